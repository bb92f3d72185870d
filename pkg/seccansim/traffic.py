#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: traffic.py
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
Labeled CAN traces: loading the HCRL datasets, synthesizing attack traffic and splitting.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .controller import Label, collect_features, FEATURE_SIZE
from .framecodec import CanFrame, MAX_DLC, MAX_STANDARD_ID
from .seccansimexceptions import (InvalidFrame,
                                  TrafficError,
                                  TraceIoError,
                                  SchemaError,
                                  EmptyTrace,
                                  DegenerateSplit,
                                  InvalidSplitRatios)

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.traffic')
LOGGER.addHandler(logging.NullHandler())

CAR_HACKING = 'car_hacking'
SURVIVAL = 'survival'
SCHEMAS = (CAR_HACKING, SURVIVAL)
DEFAULT_SPLIT_RATIOS = (0.75, 0.15, 0.10)
DOS_GAP_SECONDS = 0.0003
ATTACK_GAP_SECONDS = 0.0005
BUS_FRAME_SECONDS = 0.0001
DEFAULT_BURST_LENGTH = 4
SIGNAL_SPAN = 8
START_TIMESTAMP = 1478198376.0
TIMESTAMP_DECIMALS = 6

_CAR_HACKING_COLUMNS = 3 + MAX_DLC + 1
_SURVIVAL_COLUMNS = 5
SURVIVAL_HEADER = 'Timestamp,Arbitration_ID,DLC,Data,Class'
_FLAGS = {'r': Label.BENIGN, 't': Label.ATTACK, 'normal': Label.BENIGN, 'attack': Label.ATTACK}
ATTACK_FILE_KEYWORDS = ('dos', 'fuzzy', 'gear', 'rpm', 'flooding', 'malfunction')


@dataclass(frozen=True)
class TraceRecord:
    """One labeled message of a trace."""

    timestamp: float
    frame: CanFrame
    label: Label

    @property
    def flag(self):
        """The dataset flag, ``R`` for benign and ``T`` for attack."""
        return 'T' if self.label.is_attack else 'R'


@dataclass(frozen=True)
class Trace:
    """Records loaded from one file or synthesized for one attack profile."""

    name: str
    records: tuple
    malformed: int = 0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def attack_count(self):
        """Records labeled attack."""
        return sum(1 for record in self.records if record.label.is_attack)


class AttackKind(Enum):
    """Attack traffic shapes."""

    DOS_FLOOD = 'dos_flood'
    FUZZING = 'fuzzing'
    MALFUNCTION = 'malfunction'
    FLOODING = 'flooding'


ATTACK_FILE_NAMES = {AttackKind.DOS_FLOOD: 'DoS_dataset.csv',
                     AttackKind.FUZZING: 'Fuzzy_dataset.csv',
                     AttackKind.MALFUNCTION: 'Malfunction_dataset.csv',
                     AttackKind.FLOODING: 'Flooding_dataset.csv'}


@dataclass(frozen=True)
class AttackProfile:
    """How attack frames are injected into benign traffic.

    Args:
        kind: The attack shape.
        injection_rate: Expected share of attack messages, strictly between 0 and 1.
        target_id: Identifier manipulated by malfunction and repeated by flooding, profile default when None.
        seed: Seed used when ``synthesize`` is not given one.
        burst_length: Mean burst length of the flooding attack.

    """

    kind: AttackKind
    injection_rate: float = 0.3
    target_id: Optional[int] = None
    seed: Optional[int] = None
    burst_length: int = DEFAULT_BURST_LENGTH

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', AttackKind(self.kind))
        except ValueError:
            raise TrafficError(f'Unknown attack kind {self.kind!r}.') from None
        if not 0 < self.injection_rate < 1:
            raise TrafficError(f'Injection rate {self.injection_rate} is not strictly between 0 and 1.')
        if self.target_id is not None:
            if self.kind in (AttackKind.DOS_FLOOD, AttackKind.FUZZING):
                raise TrafficError(f'{self.kind.value} does not take a target identifier.')
            if not 0 <= self.target_id <= MAX_STANDARD_ID:
                raise TrafficError(f'Target identifier 0x{self.target_id:X} is not an 11 bit value.')
        if self.burst_length < 1:
            raise TrafficError('Burst length must be at least 1.')

    @property
    def gap(self):
        """Seconds between an attack frame and the message before it."""
        return DOS_GAP_SECONDS if self.kind is AttackKind.DOS_FLOOD else ATTACK_GAP_SECONDS


@dataclass(frozen=True)
class BenignMessage:
    """A cyclic ECU message.

    ``counter_byte`` holds a rolling counter in its low nibble, ``signal_byte`` a signal wandering
    at most ``SIGNAL_SPAN`` around its template value.
    """

    can_id: int
    period: float
    template: bytes
    counter_byte: Optional[int] = None
    signal_byte: Optional[int] = None


def default_benign_profile():
    """Cyclic messages modelled on the identifiers and payloads of the Car Hacking captures."""
    return (BenignMessage(0x316, 0.010, bytes.fromhex('052168092121006f'), counter_byte=7, signal_byte=2),
            BenignMessage(0x18F, 0.010, bytes.fromhex('fe5b0000003c0000'), signal_byte=1),
            BenignMessage(0x260, 0.010, bytes.fromhex('19212230088e6d3a'), counter_byte=7),
            BenignMessage(0x2A0, 0.010, bytes.fromhex('64009a1d9702bd00'), signal_byte=3),
            BenignMessage(0x329, 0.010, bytes.fromhex('40bb7f1411200014'), counter_byte=0, signal_byte=1),
            BenignMessage(0x545, 0.010, bytes.fromhex('d800008a00000000'), signal_byte=3),
            BenignMessage(0x43F, 0.010, bytes.fromhex('104060ff5a6e0b00'), signal_byte=4),
            BenignMessage(0x370, 0.010, bytes.fromhex('0020000000000000')),
            BenignMessage(0x440, 0.020, bytes.fromhex('ff000000ff570d00'), signal_byte=5),
            BenignMessage(0x4F0, 0.020, bytes.fromhex('00800000000000c0'), counter_byte=0),
            BenignMessage(0x153, 0.020, bytes.fromhex('002110ff00ff0000'), counter_byte=6),
            BenignMessage(0x2C0, 0.050, bytes.fromhex('14000000')),
            BenignMessage(0x5F0, 0.100, bytes.fromhex('a000')),
            BenignMessage(0x690, 0.100, bytes.fromhex('4b00000000001100'), signal_byte=0))


class _BenignSchedule:
    """Emits the benign messages in transmission order with evolving payloads."""

    def __init__(self, profile, rng, start):
        self._profile = tuple(profile)
        if not self._profile:
            raise TrafficError('The benign profile is empty.')
        self._rng = rng
        self._payloads = [bytearray(message.template) for message in self._profile]
        self._queue = [(start + float(rng.uniform(0, message.period)), index)
                       for index, message in enumerate(self._profile)]
        heapq.heapify(self._queue)

    def next(self):
        """The next (time, frame) pair."""
        time, index = heapq.heappop(self._queue)
        message = self._profile[index]
        heapq.heappush(self._queue, (time + message.period, index))
        payload = self._payloads[index]
        if message.counter_byte is not None:
            value = payload[message.counter_byte]
            payload[message.counter_byte] = (value & 0xF0) | ((value + 1) & 0x0F)
        if message.signal_byte is not None:
            centre = message.template[message.signal_byte]
            value = payload[message.signal_byte] + int(self._rng.integers(-1, 2))
            low, high = max(0x00, centre - SIGNAL_SPAN), min(0xFF, centre + SIGNAL_SPAN)
            payload[message.signal_byte] = min(high, max(low, value))
        return time, CanFrame(message.can_id, len(payload), bytes(payload))


class _Injector:
    """Decides per message slot whether an attack frame goes out and builds it."""

    def __init__(self, attack, profile, rng):
        self._attack = attack
        self._rng = rng
        self._in_burst = False
        target_id = attack.target_id
        if target_id is None:
            target_id = profile[0].can_id
        templates = {message.can_id: message.template for message in profile}
        self._target_id = target_id
        self._target_template = templates.get(target_id, bytes(MAX_DLC))
        length = attack.burst_length
        self._burst_entry = attack.injection_rate / (length * (1 - attack.injection_rate))
        if self._burst_entry > 1:
            LOGGER.warning('Injection rate %s is out of reach with bursts of %s, bursts become back to back.',
                           attack.injection_rate, length)
            self._burst_entry = 1.0
        self._burst_exit = 1.0 / length

    def inject(self):
        """True when the next slot carries an attack frame."""
        if self._attack.kind is not AttackKind.FLOODING:
            return bool(self._rng.random() < self._attack.injection_rate)
        if self._in_burst:
            self._in_burst = not self._rng.random() < self._burst_exit
        else:
            self._in_burst = bool(self._rng.random() < self._burst_entry)
        return self._in_burst

    def frame(self):
        """An attack frame of the profile's kind."""
        kind = self._attack.kind
        if kind is AttackKind.DOS_FLOOD:
            return CanFrame(0x000, MAX_DLC, bytes(MAX_DLC))
        if kind is AttackKind.FUZZING:
            dlc = int(self._rng.integers(0, MAX_DLC + 1))
            return CanFrame(int(self._rng.integers(0, MAX_STANDARD_ID + 1)), dlc,
                            self._rng.integers(0, 256, size=dlc, dtype=np.uint8).tobytes())
        dlc = len(self._target_template)
        if kind is AttackKind.MALFUNCTION:
            return CanFrame(self._target_id, dlc, self._rng.integers(0, 256, size=dlc, dtype=np.uint8).tobytes())
        return CanFrame(self._target_id, dlc, self._target_template)


def synthesize(benign_profile, attack, n, seed=None, start=START_TIMESTAMP):
    """Generates a labeled trace of ``n`` messages.

    Args:
        benign_profile: BenignMessage definitions, ``default_benign_profile()`` when None.
        attack: The AttackProfile to inject.
        n: Number of messages.
        seed: Generator seed, the profile seed when None.
        start: Timestamp of the trace start.

    Returns:
        list: TraceRecord instances in timestamp order.

    """
    if n <= 0:
        raise TrafficError(f'Cannot synthesize {n} messages.')
    profile = tuple(benign_profile or default_benign_profile())
    rng = np.random.default_rng(attack.seed if seed is None else seed)
    schedule = _BenignSchedule(profile, rng, start)
    injector = _Injector(attack, profile, rng)
    records = []
    clock = start
    pending = None
    for _ in range(n):
        if injector.inject():
            clock += attack.gap
            records.append(TraceRecord(round(clock, TIMESTAMP_DECIMALS), injector.frame(), Label.ATTACK))
            continue
        if pending is None:
            pending = schedule.next()
        time, frame = pending
        pending = None
        clock = max(time, clock + BUS_FRAME_SECONDS)
        records.append(TraceRecord(round(clock, TIMESTAMP_DECIMALS), frame, Label.BENIGN))
    LOGGER.debug('Synthesized %s messages of %s traffic.', n, attack.kind.value)
    return records


def _split_sizes(total, ratios):
    exact = [ratio * total for ratio in ratios]
    sizes = [math.floor(value + 1e-9) for value in exact]
    remainders = sorted(range(len(ratios)), key=lambda index: (sizes[index] - exact[index], index))
    for index in remainders[:total - sum(sizes)]:
        sizes[index] += 1
    return sizes


def split(records, ratios=DEFAULT_SPLIT_RATIOS, seed=0):
    """Splits a trace into train, validation and test blocks.

    Each split is one contiguous block of the trace, keeping message adjacency intact; the seed
    decides the order in which the three blocks are laid out along the timeline.

    Returns:
        tuple: Train, validation and test record lists, each in trace order.

    Raises:
        InvalidSplitRatios: Ratios are not three non negative values summing to one.
        DegenerateSplit: A split would be empty.

    """
    records = list(records)
    ratios = tuple(float(ratio) for ratio in ratios)
    if len(ratios) != 3 or any(ratio < 0 for ratio in ratios) or not math.isclose(sum(ratios), 1.0,
                                                                                  abs_tol=1e-9):
        raise InvalidSplitRatios(f'Split ratios {ratios} must be three non negative values summing to 1.')
    if not records:
        raise EmptyTrace('Cannot split an empty trace.')
    sizes = _split_sizes(len(records), ratios)
    if min(sizes) == 0:
        raise DegenerateSplit(f'Split of {len(records)} records by {ratios} leaves an empty block: {sizes}.')
    order = np.random.default_rng(seed).permutation(3)
    blocks = [None, None, None]
    offset = 0
    for index in order:
        blocks[index] = records[offset:offset + sizes[index]]
        offset += sizes[index]
    return tuple(blocks)


def feature_dataset(records):
    """Feature bytes and labels of consecutive records.

    The first record has no previous message and gets a zeroed previous slot. Remote frames do
    not become the previous message, as in the controller.

    Returns:
        tuple: (n, 20) uint8 features, n int64 labels, n booleans telling whether a previous message existed.

    """
    records = list(records)
    features = np.zeros((len(records), FEATURE_SIZE), dtype=np.uint8)
    labels = np.zeros(len(records), dtype=np.int64)
    valid = np.zeros(len(records), dtype=bool)
    previous = None
    for index, record in enumerate(records):
        feature = collect_features(record.frame, previous)
        features[index] = np.frombuffer(feature.values, dtype=np.uint8)
        labels[index] = int(record.label.is_attack)
        valid[index] = feature.valid
        if not record.frame.is_remote:
            previous = record.frame
    return features, labels, valid


def _fields(row):
    values = [None if value is None or (isinstance(value, float) and math.isnan(value)) else str(value).strip() for value in row]
    while values and values[-1] is None:
        values.pop()
    return values


def _label(flag):
    try:
        return _FLAGS[flag.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f'Unknown flag {flag!r}.') from None


def _parse_car_hacking(values):
    if None in values or len(values) < 4:
        raise ValueError('Missing columns.')
    dlc = int(values[2])
    if len(values) != 4 + dlc:
        raise ValueError(f'{len(values)} columns for DLC {dlc}.')
    payload = bytes(int(value, 16) for value in values[3:3 + dlc])
    return TraceRecord(float(values[0]), CanFrame(int(values[1], 16), dlc, payload), _label(values[-1]))


def _parse_survival(values):
    if len(values) != _SURVIVAL_COLUMNS or None in (values[0], values[1], values[2], values[4]):
        raise ValueError(f'{len(values)} columns instead of {_SURVIVAL_COLUMNS}.')
    dlc = int(values[2])
    payload = bytes(int(value, 16) for value in (values[3] or '').split())
    if len(payload) != dlc:
        raise ValueError(f'{len(payload)} data bytes for DLC {dlc}.')
    return TraceRecord(float(values[0]), CanFrame(int(values[1], 16), dlc, payload), _label(values[4]))


def _is_header(values):
    return values[0] is not None and values[0].lower() == 'timestamp'


def load_trace(path, schema=CAR_HACKING, strict=False, name=None):
    """Loads a labeled trace file as is.

    Rows that do not follow the schema are counted in ``Trace.malformed`` and skipped. Only a first row
    naming the ``Timestamp`` column is taken for a header.

    Args:
        path: The CSV file.
        schema: ``car_hacking`` or ``survival``.
        strict: Raise on the first malformed row instead of skipping it.
        name: Trace name, the file stem when None.

    Returns:
        Trace: The records in timestamp order.

    Raises:
        TraceIoError: The file cannot be read.
        EmptyTrace: The file holds no rows.
        SchemaError: Unknown schema, or no row follows it.

    """
    if schema not in SCHEMAS:
        raise SchemaError(f'Unknown schema {schema!r}, expected one of {SCHEMAS}.')
    path = Path(path)
    columns = _CAR_HACKING_COLUMNS if schema == CAR_HACKING else _SURVIVAL_COLUMNS
    parse = _parse_car_hacking if schema == CAR_HACKING else _parse_survival
    bad_lines = []

    def tally(line):
        if strict:
            raise SchemaError(f'{path}: row {line!r} has more than {columns} columns.')
        bad_lines.append(line)

    try:
        table = pd.read_csv(path, header=None, names=list(range(columns)), dtype=str, engine='python',
                            keep_default_na=False, na_values=[''], on_bad_lines=tally)
    except pd.errors.EmptyDataError:
        raise EmptyTrace(f'{path} holds no rows.') from None
    except OSError as error:
        raise TraceIoError(f'Cannot read {path}: {error}') from None
    records = []
    malformed = len(bad_lines)
    for position, row in enumerate(table.itertuples(index=False, name=None)):
        values = _fields(row)
        if not values or (position == 0 and _is_header(values)):
            continue
        try:
            records.append(parse(values))
        except (ValueError, InvalidFrame) as error:
            if strict:
                raise SchemaError(f'{path}: row {position + 1}: {error}') from None
            malformed += 1
    if malformed:
        LOGGER.warning('Skipped %s malformed rows of %s.', malformed, path)
    if not records:
        if malformed:
            raise SchemaError(f'No row of {path} follows the {schema} schema.')
        raise EmptyTrace(f'{path} holds no records.')
    ordered = sorted(records, key=lambda record: record.timestamp)
    if ordered != records:
        LOGGER.warning('Rows of %s are not in timestamp order, sorted.', path)
    LOGGER.info('Loaded %s records from %s.', len(ordered), path)
    return Trace(name or path.stem, tuple(ordered), malformed)


def write_trace(records, path, schema=CAR_HACKING, header=False):
    """Writes records in a dataset schema, readable by ``load_trace``."""
    if schema not in SCHEMAS:
        raise SchemaError(f'Unknown schema {schema!r}, expected one of {SCHEMAS}.')
    lines = [SURVIVAL_HEADER] if header and schema == SURVIVAL else []
    for record in records:
        frame = record.frame
        prefix = f'{record.timestamp:.{TIMESTAMP_DECIMALS}f},{frame.can_id:04x},{frame.dlc}'
        if schema == CAR_HACKING:
            lines.append(','.join([prefix] + [f'{byte:02x}' for byte in frame.payload] + [record.flag]))
        else:
            lines.append(f'{prefix},{" ".join(f"{byte:02x}" for byte in frame.payload)},{record.flag}')
    try:
        Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')
    except OSError as error:
        raise TraceIoError(f'Cannot write {path}: {error}') from None
    LOGGER.info('Wrote %s records to %s.', len(lines), path)


def load_dataset_dir(path, schema=CAR_HACKING, strict=False):
    """Loads every attack file of a dataset directory, named after the attack they carry.

    Returns:
        list: One Trace per attack file found, in attack order.

    """
    directory = Path(path)
    if not directory.is_dir():
        raise TraceIoError(f'{directory} is not a directory.')
    files = sorted(item for item in directory.iterdir() if item.suffix.lower() in ('.csv', '.txt'))
    traces = []
    for attack in ATTACK_FILE_KEYWORDS:
        for item in files:
            if attack in item.stem.lower():
                traces.append(load_trace(item, schema, strict, name=attack))
                break
    if not traces:
        raise TraceIoError(f'No {schema} attack files found in {directory}.')
    return traces
