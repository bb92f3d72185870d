#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: test_configuration.py
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
test_configuration
----------------------------------
Tests for `configuration` module.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import tempfile
import unittest
from pathlib import Path

from seccansim.configuration import (RunConfiguration,
                                     load_configuration,
                                     normalize_key,
                                     parse_configuration_text)
from seccansim.seccansimexceptions import ConfigurationError
from seccansim.timing import FrameDoneConvention
from seccansim.traffic import AttackKind

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__credits__ = ["SecCAN simulator contributors"]
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".


class TestRunConfiguration(unittest.TestCase):

    def test_defaults(self):
        configuration = RunConfiguration()
        timing = configuration.timing_config()
        self.assertEqual(timing.bitrate_bps, 1_000_000)
        self.assertEqual(timing.controller_clock_hz, 16_000_000)
        self.assertIs(timing.frame_done_convention, FrameDoneConvention.END_OF_ERROR_FRAME)
        self.assertEqual(configuration.ids_cycles, 584)
        self.assertEqual(configuration.train_config().epochs, 20)
        self.assertEqual([profile.kind for profile in configuration.attack_profiles()],
                         [AttackKind.DOS_FLOOD, AttackKind.FUZZING])

    def test_fractional_clock(self):
        self.assertEqual(RunConfiguration(clock_mhz=12.5).controller_clock_hz, 12_500_000)
        with self.assertRaises(ConfigurationError):
            RunConfiguration(clock_mhz=1e-7).controller_clock_hz  # pylint: disable=expression-not-assigned

    def test_updated_converts_values(self):
        configuration = RunConfiguration().updated(bitrate='500000', attacks='flooding, malfunction',
                                                   min_accuracy='99.5', report=None)
        self.assertEqual(configuration.bitrate, 500_000)
        self.assertEqual(configuration.attacks, ('flooding', 'malfunction'))
        self.assertEqual(configuration.min_accuracy, 99.5)
        self.assertIsNone(configuration.report)

    def test_flag_aliases_and_booleans(self):
        configuration = RunConfiguration().updated(**parse_configuration_text(
            'frame-done = end_of_ifs\ntest-split = yes\nid = 7ff\ndata = aabb\n'))
        self.assertEqual(configuration.frame_done_convention, FrameDoneConvention.END_OF_IFS.value)
        self.assertTrue(configuration.test_split)
        self.assertEqual(configuration.can_id, 0x7FF)
        self.assertEqual(configuration.data, 'aabb')
        self.assertFalse(RunConfiguration().updated(test_split='off').test_split)
        with self.assertRaises(ConfigurationError):
            RunConfiguration().updated(test_split='maybe')
        with self.assertRaises(ConfigurationError):
            RunConfiguration().updated(id='xyz')

    def test_updated_rejects_bad_input(self):
        with self.assertRaises(ConfigurationError):
            RunConfiguration().updated(colour='blue')
        with self.assertRaises(ConfigurationError):
            RunConfiguration().updated(bitrate='fast')

    def test_invalid_settings(self):
        for values in ({'schema': 'pcap'}, {'frame_done_convention': 'end_of_ack'}, {'ids_cycles': -1},
                       {'workers': 0}):
            with self.subTest(values=values):
                with self.assertRaises(ConfigurationError):
                    RunConfiguration(**values)

    def test_invalid_derived_settings(self):
        with self.assertRaises(ConfigurationError):
            RunConfiguration(bitrate=3_000_000).timing_config()
        with self.assertRaises(ConfigurationError):
            RunConfiguration(epochs=0).train_config()
        with self.assertRaises(ConfigurationError):
            RunConfiguration(attacks=('spoofing',)).attack_profiles()

    def test_to_dict(self):
        self.assertEqual(RunConfiguration().to_dict()['weights'], 'seccansim.scqw')


class TestConfigurationFile(unittest.TestCase):

    def test_normalize_key(self):
        for key in ('--clock-mhz', 'clock-mhz', 'CLOCK_MHZ', ' clock_mhz '):
            self.assertEqual(normalize_key(key), 'clock_mhz')

    def test_parse(self):
        text = '\n'.join(['# bus settings',
                          'bitrate = 500000',
                          'export CLOCK_MHZ=8',
                          '',
                          'weights = "model.scqw"  # trained on the survival set',
                          "schema='survival'"])
        self.assertEqual(parse_configuration_text(text), {'bitrate': '500000',
                                                          'clock_mhz': '8',
                                                          'weights': 'model.scqw',
                                                          'schema': 'survival'})

    def test_parse_errors(self):
        with self.assertRaises(ConfigurationError):
            parse_configuration_text('bitrate 500000')
        with self.assertRaises(ConfigurationError):
            parse_configuration_text('colour = blue')

    def test_load(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'run.conf'
            path.write_text('bitrate = 500000\nids_cycles = 600\n', encoding='utf-8')
            configuration = load_configuration(path, RunConfiguration(seed=7))
        self.assertEqual((configuration.bitrate, configuration.ids_cycles, configuration.seed), (500_000, 600, 7))

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_configuration('/nonexistent/run.conf')
