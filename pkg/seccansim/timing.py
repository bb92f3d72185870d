#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: timing.py
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
Bus time arithmetic and the reception window check.

All arithmetic is exact: bit and cycle counts are integers and times are
``fractions.Fraction`` microseconds.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import NamedTuple, Optional

from .framecodec import (CanFrame,
                         encode_frame,
                         decode_frame,
                         CRC_BITS,
                         CRC_DELIMITER_BITS,
                         ACK_BITS,
                         EOF_BITS,
                         IFS_BITS,
                         ERROR_FLAG_BITS,
                         ERROR_DELIMITER_BITS,
                         MAX_DLC,
                         MAX_STANDARD_ID)
from .seccansimexceptions import InvalidTimingConfig, TimingError

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__credits__ = ["SecCAN simulator contributors"]
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".

# This is the main prefix used for logging
LOGGER_BASENAME = '''seccansim'''
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.timing')
LOGGER.addHandler(logging.NullHandler())

MICROSECONDS_PER_SECOND = 1_000_000
DEFAULT_BITRATE_BPS = 1_000_000
DEFAULT_CONTROLLER_CLOCK_HZ = 16_000_000
# measured end to end latency of the 4-bit model at 16 MHz: 36.5 us
DEFAULT_IDS_LATENCY_CYCLES = 584
REFERENCE_WINDOW_US = Fraction('37.376')


class FrameDoneConvention(Enum):
    """Which bus edge ``frame_done`` marks."""

    END_OF_EOF = 'end_of_eof'
    END_OF_IFS = 'end_of_ifs'
    END_OF_ERROR_FRAME = 'end_of_error_frame'

    def index(self, events):
        """The frame done bit index of ``events`` under this convention."""
        if self is FrameDoneConvention.END_OF_EOF:
            return events.eof_index
        if self is FrameDoneConvention.END_OF_IFS:
            return events.ifs_index
        return events.error_frame_index

    @property
    def bits_after_crc(self):
        """Fixed form bits between the CRC sequence and frame done."""
        bits = CRC_DELIMITER_BITS + ACK_BITS + EOF_BITS
        if self is FrameDoneConvention.END_OF_IFS:
            bits += IFS_BITS
        elif self is FrameDoneConvention.END_OF_ERROR_FRAME:
            bits += ERROR_FLAG_BITS + ERROR_DELIMITER_BITS - 1
        return bits


@dataclass(frozen=True)
class TimingConfig:
    """Bus bitrate and controller clock.

    Args:
        bitrate_bps: Bits per second on the bus.
        controller_clock_hz: Controller clock, an integer multiple of the bitrate.
        frame_done_convention: The edge used as frame completion.

    """

    bitrate_bps: int = DEFAULT_BITRATE_BPS
    controller_clock_hz: int = DEFAULT_CONTROLLER_CLOCK_HZ
    frame_done_convention: FrameDoneConvention = FrameDoneConvention.END_OF_ERROR_FRAME

    def __post_init__(self):
        try:
            convention = FrameDoneConvention(self.frame_done_convention)
        except ValueError:
            raise InvalidTimingConfig(f'Unknown frame done convention {self.frame_done_convention!r}.') from None
        object.__setattr__(self, 'frame_done_convention', convention)
        for name in ('bitrate_bps', 'controller_clock_hz'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise InvalidTimingConfig(f'{name} must be a positive integer, got {value!r}.')
        if self.controller_clock_hz < self.bitrate_bps:
            raise InvalidTimingConfig('The controller clock must not be slower than the bitrate.')
        if self.controller_clock_hz % self.bitrate_bps:
            raise InvalidTimingConfig(f'Controller clock {self.controller_clock_hz} Hz is not an integer '
                                      f'multiple of {self.bitrate_bps} bps.')

    @property
    def bit_time(self):
        """Duration of one bit in microseconds."""
        return Fraction(MICROSECONDS_PER_SECOND, self.bitrate_bps)

    @property
    def cycle_time(self):
        """Duration of one controller clock cycle in microseconds."""
        return Fraction(MICROSECONDS_PER_SECOND, self.controller_clock_hz)

    @property
    def prescaler(self):
        """Controller clocks per bus bit."""
        return self.controller_clock_hz // self.bitrate_bps

    def with_convention(self, convention):
        """A copy using another frame done convention."""
        return TimingConfig(self.bitrate_bps, self.controller_clock_hz, FrameDoneConvention(convention))


def bit_index_to_time(index, config=TimingConfig()):
    """Bus time in microseconds of a bit boundary."""
    if index < 0:
        raise TimingError(f'Bit index {index} is negative.')
    return index * config.bit_time


def cycles_to_time(cycles, config=TimingConfig()):
    """Duration in microseconds of a number of controller cycles."""
    if cycles < 0:
        raise TimingError(f'Cycle count {cycles} is negative.')
    return cycles * config.cycle_time


def time_to_bit_index(time, config=TimingConfig()):
    """The bit in progress at ``time``, as the index of its leading boundary."""
    return int(Fraction(time) // config.bit_time)


@dataclass(frozen=True)
class FrameTimeline:
    """Receive milestones of one frame in microseconds after SOF."""

    t_header_detected: Fraction
    t_data_en: Fraction
    t_frame_done: Fraction
    t_ids_output_ready: Optional[Fraction] = None
    byte_write_times: tuple = field(default_factory=tuple)

    @property
    def ids_slack(self):
        """Time left between the IDS verdict and frame done, negative when late."""
        if self.t_ids_output_ready is None:
            return None
        return self.t_frame_done - self.t_ids_output_ready


def frame_timeline(events, config=TimingConfig(), ids_latency_cycles=None):
    """Builds the timeline of a decoded frame.

    Args:
        events: The DecodeEvents of the frame.
        config: The timing configuration.
        ids_latency_cycles: IDS latency after data_en, None when no IDS runs.

    """
    t_data_en = bit_index_to_time(events.data_en_index, config)
    t_ids = None if ids_latency_cycles is None else t_data_en + cycles_to_time(ids_latency_cycles, config)
    return FrameTimeline(t_header_detected=bit_index_to_time(events.header_index, config),
                         t_data_en=t_data_en,
                         t_frame_done=bit_index_to_time(config.frame_done_convention.index(events), config),
                         t_ids_output_ready=t_ids,
                         byte_write_times=tuple(bit_index_to_time(index, config) for index in events.byte_indices))


class ReceptionWindow(NamedTuple):
    """Header to frame done (t_max) and data_en to frame done (t_window), in microseconds."""

    t_max: Fraction
    t_window: Fraction


def reception_window_from_events(events, config=TimingConfig()):
    """The reception windows of an already decoded frame."""
    done = config.frame_done_convention.index(events)
    return ReceptionWindow(t_max=bit_index_to_time(done - events.header_index, config),
                           t_window=bit_index_to_time(done - events.data_en_index, config))


def reception_window(frame, config=TimingConfig()):
    """The reception windows of ``frame`` from its actual stuffed encoding."""
    _, events = decode_frame(encode_frame(frame))
    return reception_window_from_events(events, config)


def minimum_window(config=TimingConfig()):
    """The smallest data_en to frame done window any frame can have, no stuff bits in the CRC."""
    return bit_index_to_time(CRC_BITS + config.frame_done_convention.bits_after_crc, config)


class RealtimeCheck(NamedTuple):
    """Outcome of comparing an IDS latency against a reception window."""

    meets: bool
    slack: Fraction


def check_realtime(ids_latency_cycles, frame, config=TimingConfig()):
    """Checks that an IDS of ``ids_latency_cycles`` finishes inside the window of ``frame``."""
    latency = cycles_to_time(ids_latency_cycles, config)
    window = reception_window(frame, config).t_window
    return RealtimeCheck(meets=latency <= window, slack=window - latency)


class WindowRow(NamedTuple):
    """One line of the window table."""

    dlc: int
    convention: FrameDoneConvention
    t_max: Fraction
    t_window: Fraction
    t_window_min: Fraction
    delta_vs_reference: Fraction


def window_table(config=TimingConfig(), can_id=MAX_STANDARD_ID, fill=0x00):
    """Reception windows for DLC 0..8 under every frame done convention.

    The sample frame for each DLC uses ``can_id`` and a payload of ``fill`` bytes.
    """
    rows = []
    for dlc in range(MAX_DLC + 1):
        _, events = decode_frame(encode_frame(CanFrame(can_id, dlc, bytes([fill]) * dlc)))
        for convention in FrameDoneConvention:
            variant = config.with_convention(convention)
            window = reception_window_from_events(events, variant)
            rows.append(WindowRow(dlc=dlc,
                                  convention=convention,
                                  t_max=window.t_max,
                                  t_window=window.t_window,
                                  t_window_min=minimum_window(variant),
                                  delta_vs_reference=window.t_window - REFERENCE_WINDOW_US))
    return rows


def format_us(value):
    """Fixed four decimal rendering of a microsecond value."""
    return f'{float(value):.4f}'
