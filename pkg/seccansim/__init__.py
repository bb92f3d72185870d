#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: __init__.py
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
seccansim package.

Import all parts from seccansim here

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html
"""
from ._version import __version__
from .framecodec import CanFrame, BitStream, DecodeEvents, crc15, stuff, unstuff, encode_frame, decode_frame
from .timing import TimingConfig, FrameDoneConvention, FrameTimeline, reception_window, check_realtime
from .controller import SecCanController, BaselineController, FeatureVector, Label, collect_features
from .qnn import QuantizedMlp, quantize, forward, fold_batchnorm, export_weights, import_weights
from .training import TrainConfig, train
from .traffic import TraceRecord, AttackProfile, AttackKind, load_trace, synthesize, split
from .harness import Metrics, DetectionReport, replay, compute_metrics, waveform_report

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".

__all__ = ['CanFrame', 'BitStream', 'DecodeEvents', 'crc15', 'stuff', 'unstuff', 'encode_frame', 'decode_frame',
           'TimingConfig', 'FrameDoneConvention', 'FrameTimeline', 'reception_window', 'check_realtime',
           'SecCanController', 'BaselineController', 'FeatureVector', 'Label', 'collect_features',
           'QuantizedMlp', 'quantize', 'forward', 'fold_batchnorm', 'export_weights', 'import_weights',
           'TrainConfig', 'train',
           'TraceRecord', 'AttackProfile', 'AttackKind', 'load_trace', 'synthesize', 'split',
           'Metrics', 'DetectionReport', 'replay', 'compute_metrics', 'waveform_report']

# This is to 'use' the module(s), so lint doesn't complain
assert __version__
