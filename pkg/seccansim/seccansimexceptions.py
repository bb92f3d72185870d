#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: seccansimexceptions.py
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
Custom exception code for seccansim.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

__author__ = '''SecCAN simulator contributors'''
__docformat__ = '''google'''
__date__ = '''14-06-2024'''
__copyright__ = '''Copyright 2024, SecCAN simulator contributors'''
__credits__ = ["SecCAN simulator contributors"]
__license__ = '''MIT'''
__maintainer__ = '''SecCAN simulator contributors'''
__email__ = '''<seccansim@users.noreply.github.com>'''
__status__ = '''Development'''  # "Prototype", "Development", "Production".


class SecCanSimError(Exception):
    """Base of every error raised by the package."""


class InvalidFrame(SecCanSimError):
    """The frame violates the CAN 2.0A data frame invariants."""


class DecodeError(SecCanSimError):
    """The received bit stream does not form a valid frame.

    Args:
        message: Human readable reason.
        bit_index: Number of bus bits consumed when the error was detected.

    """

    def __init__(self, message, bit_index=None):
        super().__init__(message)
        self.bit_index = bit_index


class StuffError(DecodeError):
    """Six identical consecutive bits inside the stuffed region."""


class CrcError(DecodeError):
    """The received CRC sequence does not match the computed one."""


class FormError(DecodeError):
    """A fixed form bit has the wrong level."""


class TruncatedError(DecodeError):
    """The bit stream ended before the frame was complete."""


class UnsupportedFrame(FormError):
    """A frame format the simulator does not carry, like extended identifiers."""


class TimingError(SecCanSimError):
    """A timing conversion got a value outside its domain, like a negative bit index."""


class InvalidTimingConfig(TimingError):
    """The bitrate and controller clock combination is not usable."""


class QnnError(SecCanSimError):
    """Base for the quantized model errors."""


class DegenerateData(QnnError):
    """Training data without both classes."""


class NonFinite(QnnError):
    """The training loss stopped being a finite number."""


class ZeroVariance(QnnError):
    """A batch norm channel has no positive variance to fold."""


class WeightFileError(QnnError):
    """The weight file cannot be read."""


class VersionMismatch(WeightFileError):
    """Unknown magic or weight file format version."""


class ChecksumMismatch(WeightFileError):
    """The trailing CRC-32 does not match the file content."""


class DimensionMismatch(WeightFileError):
    """Layer dimensions do not chain 20 -> 64 -> 32 -> 1."""


class TrafficError(SecCanSimError):
    """Base for trace loading and synthesis errors."""


class TraceIoError(TrafficError):
    """The trace file cannot be read or written."""


class SchemaError(TrafficError):
    """Rows do not follow the selected trace schema."""


class EmptyTrace(TrafficError):
    """The trace holds no records."""


class DegenerateSplit(TrafficError):
    """A split came out empty."""


class InvalidSplitRatios(TrafficError):
    """Split ratios are negative or do not sum to one."""


class HarnessError(SecCanSimError):
    """Base for replay and metric errors."""


class LengthMismatch(HarnessError):
    """Labels and verdicts differ in length or are empty."""


class ConfigurationError(SecCanSimError):
    """The run configuration file or values are invalid."""
