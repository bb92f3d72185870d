#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: test_timing.py
#
# Copyright 2024 SecCAN simulator contributors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to
#  deal in the Software without restriction, including without limitation the
#  rights to use, copy, modify, merge, publish, distribute, sublicense, and/or
#  sell copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
#  all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING
#  FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
#  DEALINGS IN THE SOFTWARE.
#

"""
test_timing
----------------------------------
Tests for `timing` module.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import unittest
from fractions import Fraction

import numpy as np

from seccansim.framecodec import CanFrame, decode_frame, encode_frame, CRC_BITS
from seccansim.seccansimexceptions import InvalidTimingConfig, SecCanSimError, TimingError
from seccansim.timing import (FrameDoneConvention,
                              TimingConfig,
                              bit_index_to_time,
                              check_realtime,
                              cycles_to_time,
                              format_us,
                              frame_timeline,
                              minimum_window,
                              reception_window,
                              time_to_bit_index,
                              window_table,
                              DEFAULT_IDS_LATENCY_CYCLES,
                              REFERENCE_WINDOW_US)

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__credits__ = ["SecCAN simulator contributors"]
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".

FULL_FRAME = CanFrame(0x7FF, 8, bytes(8))


class TestTimingConfig(unittest.TestCase):

    def test_defaults(self):
        config = TimingConfig()
        self.assertEqual(config.bit_time, 1)
        self.assertEqual(config.cycle_time, Fraction(1, 16))
        self.assertEqual(config.prescaler, 16)
        self.assertIs(config.frame_done_convention, FrameDoneConvention.END_OF_ERROR_FRAME)

    def test_convention_by_name(self):
        config = TimingConfig(frame_done_convention='end_of_ifs')
        self.assertIs(config.frame_done_convention, FrameDoneConvention.END_OF_IFS)
        self.assertIs(config.with_convention('end_of_eof').frame_done_convention, FrameDoneConvention.END_OF_EOF)

    def test_invalid_configurations(self):
        for bitrate, clock, convention in ((0, 16_000_000, 'end_of_ifs'),
                                           (1_000_000, 500_000, 'end_of_ifs'),
                                           (3_000_000, 16_000_000, 'end_of_ifs'),
                                           (1_000_000.0, 16_000_000, 'end_of_ifs'),
                                           (1_000_000, 16_000_000, 'end_of_ack')):
            with self.subTest(bitrate=bitrate, clock=clock, convention=convention):
                with self.assertRaises(InvalidTimingConfig):
                    TimingConfig(bitrate, clock, convention)


class TestConversions(unittest.TestCase):

    def test_bit_index_to_time(self):
        self.assertEqual(bit_index_to_time(0, TimingConfig()), 0)
        self.assertEqual(bit_index_to_time(1, TimingConfig(1_000_000)), 1)
        self.assertEqual(bit_index_to_time(44, TimingConfig(500_000)), 88)

    def test_negative_index(self):
        with self.assertRaises(TimingError):
            bit_index_to_time(-1)

    def test_negative_values_raise_timing_error(self):
        for convert, value in ((bit_index_to_time, -1), (bit_index_to_time, -40), (cycles_to_time, -1)):
            with self.subTest(convert=convert.__name__, value=value):
                with self.assertRaises(TimingError) as raised:
                    convert(value, TimingConfig())
                self.assertIsInstance(raised.exception, SecCanSimError)
                self.assertNotIsInstance(raised.exception, ValueError)
        self.assertTrue(issubclass(InvalidTimingConfig, TimingError))

    def test_cycles_to_time(self):
        self.assertEqual(cycles_to_time(DEFAULT_IDS_LATENCY_CYCLES), Fraction('36.5'))

    def test_time_to_bit_index_floors(self):
        self.assertEqual(time_to_bit_index(Fraction('36.5')), 36)
        self.assertEqual(time_to_bit_index(Fraction(37)), 37)
        self.assertEqual(time_to_bit_index(Fraction(3), TimingConfig(500_000)), 1)

    def test_format_us(self):
        self.assertEqual(format_us(Fraction('37.376')), '37.3760')
        self.assertEqual(format_us(Fraction(1, 3)), '0.3333')


class TestReceptionWindow(unittest.TestCase):

    def test_window_matches_decode_indices(self):
        config = TimingConfig(frame_done_convention=FrameDoneConvention.END_OF_IFS)
        _, events = decode_frame(encode_frame(FULL_FRAME))
        window = reception_window(FULL_FRAME, config)
        self.assertEqual(window.t_window, events.ifs_index - events.data_en_index)
        self.assertEqual(window.t_max, events.ifs_index - events.header_index)

    def test_reference_figure_is_reported_not_asserted(self):
        for convention in FrameDoneConvention:
            config = TimingConfig(frame_done_convention=convention)
            window = reception_window(FULL_FRAME, config).t_window
            self.assertIsInstance(window - REFERENCE_WINDOW_US, Fraction)

    def test_window_scales_with_bit_time(self):
        fast = reception_window(FULL_FRAME, TimingConfig(1_000_000))
        slow = reception_window(FULL_FRAME, TimingConfig(500_000))
        self.assertEqual(slow.t_window, 2 * fast.t_window)
        self.assertEqual(slow.t_max, 2 * fast.t_max)

    def test_window_depends_only_on_crc_stuffing(self):
        for convention in FrameDoneConvention:
            config = TimingConfig(frame_done_convention=convention)
            for dlc in range(9):
                frame = CanFrame(0x123, dlc, bytes(range(dlc)))
                _, events = decode_frame(encode_frame(frame))
                crc_stuff_bits = events.crc_index - events.data_en_index - CRC_BITS
                with self.subTest(convention=convention, dlc=dlc):
                    self.assertEqual(reception_window(frame, config).t_window - minimum_window(config),
                                     crc_stuff_bits * config.bit_time)
                    self.assertLessEqual(crc_stuff_bits, 4)

    def test_minimum_windows(self):
        expected = {FrameDoneConvention.END_OF_EOF: 25,
                    FrameDoneConvention.END_OF_IFS: 28,
                    FrameDoneConvention.END_OF_ERROR_FRAME: 38}
        for convention, bits in expected.items():
            self.assertEqual(minimum_window(TimingConfig(frame_done_convention=convention)), bits)

    def test_window_table(self):
        rows = window_table(TimingConfig())
        self.assertEqual(len(rows), 9 * len(FrameDoneConvention))
        for row in rows:
            self.assertGreaterEqual(row.t_window, row.t_window_min)
            self.assertEqual(row.delta_vs_reference, row.t_window - REFERENCE_WINDOW_US)
            self.assertGreaterEqual(row.t_max, row.t_window)


class TestRealtime(unittest.TestCase):

    def test_measured_latency_meets_full_frame_window(self):
        self.assertTrue(check_realtime(DEFAULT_IDS_LATENCY_CYCLES, FULL_FRAME, TimingConfig()).meets)

    def test_zero_latency(self):
        check = check_realtime(0, FULL_FRAME, TimingConfig())
        self.assertTrue(check.meets)
        self.assertEqual(check.slack, reception_window(FULL_FRAME, TimingConfig()).t_window)

    def test_excessive_latency(self):
        check = check_realtime(10 ** 6, FULL_FRAME, TimingConfig())
        self.assertFalse(check.meets)
        self.assertLess(check.slack, 0)

    def test_measured_latency_meets_every_window(self):
        rng = np.random.default_rng(3)
        config = TimingConfig()
        frames = [CanFrame(0x7FF, dlc, fill * dlc) for dlc in range(9) for fill in (b'\x00', b'\xff', b'\x55')]
        for _ in range(1000):
            dlc = int(rng.integers(0, 9))
            frames.append(CanFrame(int(rng.integers(0, 0x800)), dlc,
                                   rng.integers(0, 256, size=dlc, dtype=np.uint8).tobytes()))
        for frame in frames:
            self.assertTrue(check_realtime(DEFAULT_IDS_LATENCY_CYCLES, frame, config).meets, str(frame))

    def test_measured_latency_misses_the_intermission(self):
        config = TimingConfig(frame_done_convention=FrameDoneConvention.END_OF_IFS)
        self.assertFalse(check_realtime(DEFAULT_IDS_LATENCY_CYCLES, FULL_FRAME, config).meets)


class TestFrameTimeline(unittest.TestCase):

    def test_timeline(self):
        _, events = decode_frame(encode_frame(CanFrame(0x123, 5, b'\x01\x02\x03\x04\x05')))
        timeline = frame_timeline(events, TimingConfig(), DEFAULT_IDS_LATENCY_CYCLES)
        self.assertEqual(timeline.t_header_detected, 19)
        self.assertEqual(timeline.t_data_en, timeline.byte_write_times[-1])
        self.assertEqual(timeline.t_ids_output_ready, timeline.t_data_en + Fraction('36.5'))
        self.assertEqual(timeline.t_frame_done, events.error_frame_index)
        self.assertGreater(timeline.ids_slack, 0)

    def test_timeline_without_ids(self):
        _, events = decode_frame(encode_frame(CanFrame(0x123, 0)))
        timeline = frame_timeline(events, TimingConfig())
        self.assertIsNone(timeline.t_ids_output_ready)
        self.assertIsNone(timeline.ids_slack)
        self.assertEqual(timeline.t_data_en, timeline.t_header_detected)

    def test_timeline_scales_with_bit_time(self):
        _, events = decode_frame(encode_frame(CanFrame(0x123, 5, b'\x01\x02\x03\x04\x05')))
        fast = frame_timeline(events, TimingConfig(1_000_000, 16_000_000))
        slow = frame_timeline(events, TimingConfig(500_000, 16_000_000))
        self.assertEqual(slow.t_header_detected, 2 * fast.t_header_detected)
        self.assertEqual(slow.t_data_en, 2 * fast.t_data_en)
        self.assertEqual(slow.t_frame_done, 2 * fast.t_frame_done)
