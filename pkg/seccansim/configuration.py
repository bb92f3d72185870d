#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: configuration.py
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
Run configuration shared by every command line subcommand.

A configuration file is flat ``key = value`` text mirroring the command line
flags. Values come from the built in defaults, then the file, then the
command line.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import logging
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .seccansimexceptions import ConfigurationError, SecCanSimError
from .timing import (TimingConfig,
                     FrameDoneConvention,
                     DEFAULT_BITRATE_BPS,
                     DEFAULT_IDS_LATENCY_CYCLES)
from .traffic import AttackProfile, SCHEMAS, CAR_HACKING
from .training import TrainConfig

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.configuration')
LOGGER.addHandler(logging.NullHandler())

_BOOLEANS = {'1': True, 'true': True, 'yes': True, 'on': True,
             '0': False, 'false': False, 'no': False, 'off': False}


def _optional(converter):
    def convert(value):
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
        return converter(value)
    return convert


def _names(value):
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(item.strip() for item in str(value).split(',') if item.strip())


def _identifier(value):
    if isinstance(value, int):
        return value
    return int(str(value), 16)


def _boolean(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text not in _BOOLEANS:
        raise ValueError(f'Not a boolean: {value!r}')
    return _BOOLEANS[text]


@dataclass(frozen=True)
class RunConfiguration:
    """Every setting a run can take."""

    bitrate: int = DEFAULT_BITRATE_BPS
    clock_mhz: float = 16.0
    ids_cycles: int = DEFAULT_IDS_LATENCY_CYCLES
    frame_done_convention: str = FrameDoneConvention.END_OF_ERROR_FRAME.value
    schema: str = CAR_HACKING
    seed: int = 0
    epochs: int = 20
    learning_rate: float = 1e-4
    batch_size: int = 256
    dropout_rate: float = 0.2
    patience: int = 5
    fold_epochs: int = 3
    injection_rate: float = 0.3
    messages: int = 50_000
    attacks: tuple = ('dos_flood', 'fuzzing')
    min_accuracy: Optional[float] = None
    max_fnr: Optional[float] = None
    data_dir: Optional[str] = None
    trace: Optional[str] = None
    weights: str = 'seccansim.scqw'
    output_dir: str = '.'
    report: Optional[str] = None
    workers: int = 4
    test_split: bool = False
    can_id: int = 0x123
    data: str = '0102030405'

    def __post_init__(self):
        if self.schema not in SCHEMAS:
            raise ConfigurationError(f'Unknown schema {self.schema!r}, expected one of {SCHEMAS}.')
        try:
            FrameDoneConvention(self.frame_done_convention)
        except ValueError:
            choices = [convention.value for convention in FrameDoneConvention]
            raise ConfigurationError(f'Unknown frame done convention {self.frame_done_convention!r}, '
                                     f'expected one of {choices}.') from None
        if self.ids_cycles < 0 or self.workers < 1 or self.messages < 1:
            raise ConfigurationError('ids_cycles must not be negative, workers and messages must be positive.')

    @property
    def controller_clock_hz(self):
        """The controller clock in Hz, which must be a whole number."""
        hertz = Fraction(str(self.clock_mhz)) * 1_000_000
        if hertz.denominator != 1:
            raise ConfigurationError(f'Clock of {self.clock_mhz} MHz is not a whole number of Hz.')
        return int(hertz)

    def timing_config(self):
        """The TimingConfig of this run."""
        try:
            return TimingConfig(self.bitrate, self.controller_clock_hz,
                                FrameDoneConvention(self.frame_done_convention))
        except SecCanSimError as error:
            raise ConfigurationError(str(error)) from None

    def train_config(self):
        """The TrainConfig of this run."""
        try:
            return TrainConfig(epochs=self.epochs,
                               learning_rate=self.learning_rate,
                               batch_size=self.batch_size,
                               dropout_rate=self.dropout_rate,
                               patience=self.patience,
                               fold_epochs=self.fold_epochs,
                               seed=self.seed)
        except SecCanSimError as error:
            raise ConfigurationError(str(error)) from None

    def attack_profiles(self):
        """One AttackProfile per configured attack."""
        try:
            return tuple(AttackProfile(kind, self.injection_rate) for kind in self.attacks)
        except SecCanSimError as error:
            raise ConfigurationError(str(error)) from None

    def updated(self, **values):
        """A copy with ``values`` converted and applied, None values ignored."""
        converted = {}
        for key, value in values.items():
            name = normalize_key(key)
            if name not in _CONVERTERS:
                raise ConfigurationError(f'Unknown configuration key {key!r}.')
            if value is None:
                continue
            try:
                converted[name] = _CONVERTERS[name](value)
            except (TypeError, ValueError):
                raise ConfigurationError(f'Invalid value {value!r} for {name}.') from None
        return replace(self, **converted)

    def to_dict(self):
        """The settings as plain values."""
        return {item.name: getattr(self, item.name) for item in fields(self)}


_CONVERTERS = {'bitrate': int,
               'clock_mhz': float,
               'ids_cycles': int,
               'frame_done_convention': str,
               'schema': str,
               'seed': int,
               'epochs': int,
               'learning_rate': float,
               'batch_size': int,
               'dropout_rate': float,
               'patience': int,
               'fold_epochs': int,
               'injection_rate': float,
               'messages': int,
               'attacks': _names,
               'min_accuracy': _optional(float),
               'max_fnr': _optional(float),
               'data_dir': _optional(str),
               'trace': _optional(str),
               'weights': str,
               'output_dir': str,
               'report': _optional(str),
               'workers': int,
               'test_split': _boolean,
               'can_id': _identifier,
               'data': str}

# flag names that differ from the setting they fill
_ALIASES = {'frame_done': 'frame_done_convention',
            'id': 'can_id'}


def normalize_key(key):
    """Maps ``--clock-mhz``, ``clock-mhz`` and ``CLOCK_MHZ`` to ``clock_mhz`` and flag aliases to their setting."""
    name = key.strip().lstrip('-').replace('-', '_').lower()
    return _ALIASES.get(name, name)


def parse_configuration_text(text):
    """Parses flat ``key = value`` lines.

    Blank lines and ``#`` comments are skipped and a leading ``export`` is dropped.

    Returns:
        dict: Raw string values by normalized key.

    Raises:
        ConfigurationError: A line has no ``=`` or names an unknown key.

    """
    values = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('export '):
            line = line[len('export '):]
        try:
            key, value = line.split('=', 1)
        except ValueError:
            raise ConfigurationError(f'Invalid configuration entry on line {number}: {line!r}') from None
        key = normalize_key(key)
        if key not in _CONVERTERS:
            raise ConfigurationError(f'Unknown configuration key {key!r} on line {number}.')
        values[key] = value.strip().strip('"\'')
    return values


def load_configuration(path, base=None):
    """Applies a configuration file on top of ``base``, the defaults when None."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as error:
        raise ConfigurationError(f'Cannot read configuration file {path}: {error}') from None
    LOGGER.info('Loading run configuration from %s', path)
    return (base or RunConfiguration()).updated(**parse_configuration_text(text))
