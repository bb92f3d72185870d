#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: test_traffic.py
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
test_traffic
----------------------------------
Tests for `traffic` module.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import tempfile
import unittest
from collections import Counter
from pathlib import Path

from seccansim.controller import Label
from seccansim.framecodec import CanFrame, decode_frame, encode_frame
from seccansim.seccansimexceptions import (DegenerateSplit,
                                           EmptyTrace,
                                           InvalidSplitRatios,
                                           SchemaError,
                                           TraceIoError,
                                           TrafficError)
from seccansim.traffic import (AttackKind,
                               AttackProfile,
                               TraceRecord,
                               default_benign_profile,
                               feature_dataset,
                               load_dataset_dir,
                               load_trace,
                               split,
                               synthesize,
                               write_trace,
                               ATTACK_FILE_NAMES,
                               CAR_HACKING,
                               SURVIVAL)

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__credits__ = ["SecCAN simulator contributors"]
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".

FIXTURES = Path(__file__).parent / 'fixtures'


def attack_share(records):
    return sum(record.label.is_attack for record in records) / len(records)


class TestLoadTrace(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def _write(self, name, text):
        path = self.path / name
        path.write_text(text, encoding='utf-8')
        return path

    def test_car_hacking_fixture(self):
        trace = load_trace(FIXTURES / 'car_hacking_sample.csv', CAR_HACKING)
        self.assertEqual(len(trace), 10)
        self.assertEqual(trace.malformed, 0)
        self.assertEqual(trace.attack_count, 2)
        self.assertEqual(trace.name, 'car_hacking_sample')
        self.assertEqual(trace.records[0],
                         TraceRecord(1478198376.389427,
                                     CanFrame(0x316, 8, bytes([0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f])),
                                     Label.BENIGN))
        self.assertEqual(trace.records[7].frame, CanFrame(0x5F0, 2, b'\x00\x00'))
        self.assertEqual(trace.records[5].frame, CanFrame(0x000, 8, bytes(8)))
        self.assertIs(trace.records[5].label, Label.ATTACK)

    def test_survival_fixture(self):
        trace = load_trace(FIXTURES / 'survival_sample.csv', SURVIVAL)
        self.assertEqual(len(trace), 6)
        self.assertEqual(trace.attack_count, 3)
        self.assertEqual(trace.records[3].frame, CanFrame(0x5F0, 2, b'\xa0\x00'))
        self.assertEqual(trace.records[5].frame, CanFrame(0x7DF, 0))

    def test_empty_file(self):
        with self.assertRaises(EmptyTrace):
            load_trace(self._write('empty.csv', ''))

    def test_missing_file(self):
        with self.assertRaises(TraceIoError):
            load_trace(self.path / 'missing.csv')

    def test_unknown_schema(self):
        with self.assertRaises(SchemaError):
            load_trace(FIXTURES / 'car_hacking_sample.csv', 'pcap')

    def test_malformed_rows_are_counted(self):
        path = self._write('mixed.csv', '\n'.join(['1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R',
                                                    '1478198376.389636,018f,8,fe,5b,R',
                                                    '1478198376.389864,0260,2,19,21,X',
                                                    '1478198376.390096,zzzz,2,19,21,R',
                                                    '1478198376.390329,0329,8,40,bb,7f,14,11,20,00,14,R,00',
                                                    '']))
        with self.assertLogs('seccansim', level='WARNING'):
            trace = load_trace(path)
        self.assertEqual(len(trace), 1)
        self.assertEqual(trace.malformed, 4)

    def test_corrupt_first_row_is_counted(self):
        valid = '1478198376.389636,018f,8,fe,5b,00,00,00,3c,00,00,R'
        path = self._write('corrupt_first.csv', f'garbage,row,R\n{valid}\n')
        with self.assertLogs('seccansim', level='WARNING'):
            trace = load_trace(path)
        self.assertEqual(len(trace), 1)
        self.assertEqual(trace.malformed, 1)
        with self.assertRaises(SchemaError):
            load_trace(path, strict=True)

    def test_header_row_is_skipped(self):
        valid = '1478198376.389636,018f,8,fe,5b,00,00,00,3c,00,00,R'
        path = self._write('with_header.csv', f'Timestamp,ID,DLC,D0,D1,D2,D3,D4,D5,D6,D7,Flag\n{valid}\n')
        trace = load_trace(path)
        self.assertEqual((len(trace), trace.malformed), (1, 0))
        trace = load_trace(FIXTURES / 'survival_sample.csv', SURVIVAL)
        self.assertEqual(trace.malformed, 0)

    def test_strict_mode(self):
        path = self._write('bad.csv', '1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R\n'
                                      '1478198376.389636,018f,8,fe,5b,R\n')
        with self.assertRaises(SchemaError):
            load_trace(path, strict=True)

    def test_no_valid_rows(self):
        with self.assertRaises(SchemaError):
            load_trace(self._write('bad.csv', '1478198376.389636,018f,8,fe,5b,R\n'))

    def test_rows_are_sorted_by_timestamp(self):
        path = self._write('unsorted.csv', '2.0,0316,1,05,R\n1.0,0317,1,06,T\n')
        with self.assertLogs('seccansim', level='WARNING'):
            trace = load_trace(path)
        self.assertEqual([record.timestamp for record in trace], [1.0, 2.0])

    def test_write_and_load_round_trip(self):
        records = synthesize(default_benign_profile(), AttackProfile(AttackKind.FUZZING, 0.3), 500, seed=1)
        for schema in (CAR_HACKING, SURVIVAL):
            with self.subTest(schema=schema):
                path = self.path / f'{schema}.csv'
                write_trace(records, path, schema, header=schema == SURVIVAL)
                self.assertEqual(list(load_trace(path, schema)), records)

    def test_dataset_directory(self):
        for offset, kind in enumerate((AttackKind.DOS_FLOOD, AttackKind.FUZZING)):
            records = synthesize(None, AttackProfile(kind), 100, seed=offset)
            write_trace(records, self.path / ATTACK_FILE_NAMES[kind])
        traces = load_dataset_dir(self.path)
        self.assertEqual([trace.name for trace in traces], ['dos', 'fuzzy'])
        self.assertEqual([len(trace) for trace in traces], [100, 100])

    def test_dataset_directory_without_traces(self):
        with self.assertRaises(TraceIoError):
            load_dataset_dir(self.path)
        with self.assertRaises(TraceIoError):
            load_dataset_dir(self.path / 'missing')


class TestAttackProfile(unittest.TestCase):

    def test_kind_by_name(self):
        self.assertIs(AttackProfile('fuzzing').kind, AttackKind.FUZZING)

    def test_invalid_profiles(self):
        for arguments in ({'kind': 'spoofing'},
                          {'kind': AttackKind.DOS_FLOOD, 'injection_rate': 0.0},
                          {'kind': AttackKind.DOS_FLOOD, 'injection_rate': 1.0},
                          {'kind': AttackKind.DOS_FLOOD, 'target_id': 0x316},
                          {'kind': AttackKind.MALFUNCTION, 'target_id': 0x800},
                          {'kind': AttackKind.FLOODING, 'burst_length': 0}):
            with self.subTest(arguments=arguments):
                with self.assertRaises(TrafficError):
                    AttackProfile(**arguments)


class TestSynthesize(unittest.TestCase):

    def test_deterministic(self):
        profile = AttackProfile(AttackKind.FUZZING, 0.3)
        self.assertEqual(synthesize(None, profile, 500, seed=3), synthesize(None, profile, 500, seed=3))
        self.assertNotEqual(synthesize(None, profile, 500, seed=3), synthesize(None, profile, 500, seed=4))

    def test_profile_seed(self):
        profile = AttackProfile(AttackKind.MALFUNCTION, 0.2, seed=9)
        self.assertEqual(synthesize(None, profile, 200), synthesize(None, profile, 200, seed=9))

    def test_injection_rate(self):
        for kind in (AttackKind.DOS_FLOOD, AttackKind.FUZZING, AttackKind.MALFUNCTION):
            with self.subTest(kind=kind):
                records = synthesize(None, AttackProfile(kind, 0.3), 10_000, seed=5)
                self.assertAlmostEqual(attack_share(records), 0.3, delta=0.02)

    def test_flooding_rate_and_bursts(self):
        records = synthesize(None, AttackProfile(AttackKind.FLOODING, 0.3), 20_000, seed=6)
        self.assertAlmostEqual(attack_share(records), 0.3, delta=0.05)
        runs = sum(1 for left, right in zip(records, records[1:])
                   if right.label.is_attack and not left.label.is_attack)
        self.assertGreater(sum(record.label.is_attack for record in records) / runs, 2)

    def test_unreachable_flooding_rate_warns(self):
        with self.assertLogs('seccansim', level='WARNING'):
            synthesize(None, AttackProfile(AttackKind.FLOODING, 0.9), 100, seed=1)

    def test_dos_frames(self):
        records = synthesize(None, AttackProfile(AttackKind.DOS_FLOOD), 2000, seed=7)
        attacks = [record.frame for record in records if record.label.is_attack]
        self.assertTrue(attacks)
        self.assertTrue(all(frame == CanFrame(0x000, 8, bytes(8)) for frame in attacks))

    def test_malfunction_targets_a_legitimate_identifier(self):
        records = synthesize(None, AttackProfile(AttackKind.MALFUNCTION, target_id=0x2A0), 2000, seed=8)
        self.assertEqual({record.frame.can_id for record in records if record.label.is_attack}, {0x2A0})
        default = synthesize(None, AttackProfile(AttackKind.MALFUNCTION), 500, seed=8)
        self.assertEqual({record.frame.can_id for record in default if record.label.is_attack},
                         {default_benign_profile()[0].can_id})

    def test_flooding_repeats_one_frame(self):
        records = synthesize(None, AttackProfile(AttackKind.FLOODING), 2000, seed=9)
        template = default_benign_profile()[0]
        attacks = {record.frame for record in records if record.label.is_attack}
        self.assertEqual(attacks, {CanFrame(template.can_id, len(template.template), template.template)})

    def test_benign_traffic_uses_the_profile(self):
        records = synthesize(None, AttackProfile(AttackKind.FUZZING), 3000, seed=10)
        identifiers = {message.can_id for message in default_benign_profile()}
        self.assertTrue(all(record.frame.can_id in identifiers for record in records if not record.label.is_attack))

    def test_timestamps_and_encoding(self):
        for kind in AttackKind:
            records = synthesize(None, AttackProfile(kind), 1000, seed=11)
            timestamps = [record.timestamp for record in records]
            self.assertEqual(timestamps, sorted(timestamps))
            self.assertTrue(all(round(value, 6) == value for value in timestamps))
            for record in records:
                self.assertEqual(decode_frame(encode_frame(record.frame))[0], record.frame)

    def test_invalid_count(self):
        with self.assertRaises(TrafficError):
            synthesize(None, AttackProfile(AttackKind.FUZZING), 0)


class TestSplit(unittest.TestCase):

    def setUp(self):
        self.records = synthesize(None, AttackProfile(AttackKind.FUZZING), 100, seed=12)

    def test_sizes(self):
        self.assertEqual([len(part) for part in split(self.records)], [75, 15, 10])

    def test_sizes_round_to_the_nearest(self):
        self.assertEqual([len(part) for part in split(self.records[:99])], [74, 15, 10])

    def test_partition(self):
        parts = split(self.records, seed=3)
        self.assertEqual(Counter(record for part in parts for record in part), Counter(self.records))
        for part in parts:
            start = self.records.index(part[0])
            self.assertEqual(part, self.records[start:start + len(part)])

    def test_seed_is_deterministic(self):
        self.assertEqual(split(self.records, seed=5), split(self.records, seed=5))

    def test_degenerate(self):
        with self.assertRaises(DegenerateSplit):
            split(self.records[:1], (1.0, 0.0, 0.0))

    def test_invalid_ratios(self):
        for ratios in ((0.5, 0.5), (0.8, 0.3, -0.1), (0.5, 0.2, 0.2)):
            with self.assertRaises(InvalidSplitRatios):
                split(self.records, ratios)

    def test_empty(self):
        with self.assertRaises(EmptyTrace):
            split([])


class TestFeatureDataset(unittest.TestCase):

    def test_pairs_consecutive_messages(self):
        records = [TraceRecord(1.0, CanFrame(0x123, 2, b'\xab\xcd'), Label.BENIGN),
                   TraceRecord(2.0, CanFrame(0x100, 0, b'', is_remote=True), Label.BENIGN),
                   TraceRecord(3.0, CanFrame(0x000, 8, bytes(8)), Label.ATTACK)]
        features, labels, valid = feature_dataset(records)
        self.assertEqual(features.shape, (3, 20))
        self.assertEqual(labels.tolist(), [0, 0, 1])
        self.assertEqual(valid.tolist(), [False, True, True])
        self.assertEqual(bytes(features[0]), bytes(10) + b'\x01\x23\xab\xcd' + bytes(6))
        self.assertEqual(bytes(features[2][:10]), b'\x01\x23\xab\xcd' + bytes(6))
