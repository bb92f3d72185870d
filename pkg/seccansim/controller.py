#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: controller.py
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
Receive datapath of a CAN controller with an in-line intrusion detector.

The controller consumes bus levels one bit at a time and raises the datapath
signals while the frame is still arriving: header detection enables the IDS,
every validated payload byte is written to the feature buffer, and once the
byte counter matches the DLC the model runs while the bus carries the CRC,
ACK and EOF fields.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from .framecodec import (BitStream,
                         CanFrame,
                         DecodeEvents,
                         FrameReceiver,
                         MAX_DLC)
from .seccansimexceptions import DecodeError, TimingError, TruncatedError
from .timing import (TimingConfig,
                     FrameTimeline,
                     DEFAULT_IDS_LATENCY_CYCLES,
                     bit_index_to_time,
                     frame_timeline,
                     format_us,
                     time_to_bit_index)

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.controller')
LOGGER.addHandler(logging.NullHandler())

FEATURE_SIZE = 2 * (2 + MAX_DLC)


class Label(Enum):
    """Verdict appended to a received message. Attack is the positive class."""

    BENIGN = 'benign'
    ATTACK = 'attack'

    @classmethod
    def from_flag(cls, is_attack):
        """Maps a boolean verdict to a label."""
        return cls.ATTACK if is_attack else cls.BENIGN

    @property
    def is_attack(self):
        """True for the positive class."""
        return self is Label.ATTACK


class EventKind(Enum):
    """Datapath signals raised by the controller."""

    HEADER_DETECTED = 'HeaderDetected'
    IDS_ENABLED = 'IdsEnabled'
    BYTE_WRITTEN = 'ByteWritten'
    DATA_EN_ASSERTED = 'DataEnAsserted'
    IDS_OUTPUT_READY = 'IdsOutputReady'
    LATENCY_VIOLATION = 'LatencyViolation'
    FRAME_DONE = 'FrameDone'
    FRAME_DROPPED = 'FrameDropped'


class ControllerEvent(NamedTuple):
    """A signal edge on the controller timeline."""

    kind: EventKind
    bus_time: object
    bit_index: int
    detail: str = ''

    def to_record(self):
        """Serializes the event as a ``bit_index, bus_time_us, event_kind, detail`` line."""
        return f'{self.bit_index}, {format_us(self.bus_time)}, {self.kind.value}, {self.detail}'


@dataclass(frozen=True)
class FeatureVector:
    """The 20 byte model input: previous then current message, identifier big endian then padded payload."""

    values: bytes
    valid: bool

    def __post_init__(self):
        values = bytes(self.values)
        if len(values) != FEATURE_SIZE:
            raise ValueError(f'A feature vector holds {FEATURE_SIZE} bytes, got {len(values)}.')
        object.__setattr__(self, 'values', values)

    @property
    def previous(self):
        """The previous message slot."""
        return self.values[:FEATURE_SIZE // 2]

    @property
    def current(self):
        """The current message slot."""
        return self.values[FEATURE_SIZE // 2:]


def _message_slot(frame):
    if frame is None:
        return bytes(FEATURE_SIZE // 2)
    return frame.can_id.to_bytes(2, 'big') + frame.padded_payload


def collect_features(current, previous=None):
    """Lays out the feature vector of ``current`` given the message received before it.

    Args:
        current: The CanFrame being received.
        previous: The last validated CanFrame, None at the start of the bus.

    Returns:
        FeatureVector: Previous slot zeroed and ``valid`` False when there is no previous message.

    """
    return FeatureVector(_message_slot(previous) + _message_slot(current), previous is not None)


@dataclass(frozen=True)
class ReceivedMessage:
    """A receive buffer entry with the IDS verdict appended."""

    frame: CanFrame
    ids_flag: Label
    timeline: FrameTimeline
    feature: Optional[FeatureVector] = None
    late: bool = False
    ids_skipped: bool = False
    probability: Optional[float] = None


class FeedResult(NamedTuple):
    """Events raised by one frame and the delivered message, None when the frame was dropped."""

    events: tuple
    message: Optional[ReceivedMessage]


class ConstantIds:
    """An IDS that returns the same verdict for every input."""

    def __init__(self, is_attack=False, probability=None):
        self.is_attack = is_attack
        self.probability = probability

    def classify(self, values):  # pylint: disable=unused-argument
        """Returns the fixed verdict."""
        return self.is_attack, self.probability


class _PendingVerdict(NamedTuple):
    data_en_index: int
    feature: FeatureVector
    is_attack: bool
    probability: Optional[float]


class BaselineController:
    """Standard CAN receive datapath without the IDS extension.

    Args:
        timing: The bus and controller clock configuration.

    """

    def __init__(self, timing=TimingConfig()):
        self.timing = timing
        self._event_log = []
        self._previous = None
        self._written = bytearray()
        self.reset()

    def reset(self):
        """Clears the previous message slot, the event log and the byte counter."""
        self._event_log = []
        self._previous = None
        self._written = bytearray()
        return self

    @property
    def event_log(self):
        """Every event raised since the last reset."""
        return tuple(self._event_log)

    @property
    def previous_frame(self):
        """The last validated frame, None after a reset."""
        return self._previous

    @property
    def byte_counter(self):
        """Payload bytes written for the frame in flight."""
        return len(self._written)

    def _event(self, kind, bit_index, detail=''):
        return ControllerEvent(kind, bit_index_to_time(bit_index, self.timing), bit_index, detail)

    def feed_bits(self, stream):
        """Receives one frame.

        Args:
            stream: A BitStream or sequence of bus levels starting at SOF.

        Returns:
            FeedResult: The ordered events of this frame and the delivered message.

        """
        bits = stream.bits if isinstance(stream, BitStream) else tuple(stream)
        receiver = FrameReceiver()
        field_events = []
        events = []
        self._written = bytearray()
        self._start_frame()
        try:
            for bit in bits:
                for field_event in receiver.push(bit):
                    field_events.append(field_event)
                    events.extend(self._on_field(field_event, receiver))
                if receiver.done:
                    break
            if not receiver.done:
                raise TruncatedError(f'Frame truncated after {len(bits)} bits.', len(bits))
        except DecodeError as error:
            index = error.bit_index if error.bit_index is not None else receiver.bit_count
            events.append(self._event(EventKind.FRAME_DROPPED, index, f'{type(error).__name__}: {error}'))
            LOGGER.debug('Frame dropped at bit %s: %s', index, error)
            self._written = bytearray()
            return self._commit(events, None)
        decode_events = DecodeEvents.from_field_events(field_events, receiver.warnings)
        message, tail_events = self._deliver(receiver.frame, decode_events)
        events.extend(tail_events)
        self._written = bytearray()
        return self._commit(events, message)

    def _commit(self, events, message):
        ordered = tuple(sorted(events, key=lambda event: event.bus_time))
        self._event_log.extend(ordered)
        return FeedResult(ordered, message)

    def _start_frame(self):
        pass

    def _on_field(self, field_event, receiver):
        if field_event.kind == 'header':
            can_id, dlc, is_remote = field_event.value
            detail = f'id=0x{can_id:03X} dlc={dlc}' + (' remote' if is_remote else '')
            events = [self._event(EventKind.HEADER_DETECTED, field_event.bit_index, detail)]
            events.extend(self._on_header(field_event.bit_index, receiver))
            if is_remote or dlc == 0:
                events.extend(self._on_data_en(field_event.bit_index, receiver))
            return events
        if field_event.kind == 'byte':
            self._written.append(field_event.value)
            position = len(self._written) - 1
            events = [self._event(EventKind.BYTE_WRITTEN, field_event.bit_index,
                                  f'{position}=0x{field_event.value:02X}')]
            if len(self._written) == receiver.dlc:
                events.extend(self._on_data_en(field_event.bit_index, receiver))
            return events
        return []

    def _on_header(self, bit_index, receiver):  # pylint: disable=unused-argument
        return []

    def _on_data_en(self, bit_index, receiver):  # pylint: disable=unused-argument
        return [self._event(EventKind.DATA_EN_ASSERTED, bit_index, f'bytes={len(self._written)}')]

    def _frame_done(self, decode_events):
        convention = self.timing.frame_done_convention
        return self._event(EventKind.FRAME_DONE, convention.index(decode_events), convention.value)

    def _deliver(self, frame, decode_events):
        timeline = frame_timeline(decode_events, self.timing)
        if not frame.is_remote:
            self._previous = frame
        LOGGER.debug('Received %s', frame)
        return ReceivedMessage(frame, Label.BENIGN, timeline), [self._frame_done(decode_events)]


class SecCanController(BaselineController):
    """Receive datapath extended with an IDS that runs while the frame tail is on the bus.

    Args:
        timing: The bus and controller clock configuration.
        ids: Object with ``classify(values) -> (is_attack, probability)``, None for a plain datapath.
        ids_latency_cycles: Controller clocks from ``data_en`` to ``ids_output_ready``.

    """

    def __init__(self, timing=TimingConfig(), ids=None, ids_latency_cycles=DEFAULT_IDS_LATENCY_CYCLES):
        if ids_latency_cycles < 0:
            raise TimingError(f'IDS latency {ids_latency_cycles} is negative.')
        self.ids = ids
        self.ids_latency_cycles = ids_latency_cycles
        self._pending = None
        self._ids_en = False
        super().__init__(timing)

    def reset(self):
        """Clears the previous message slot, the event log, the byte counter and any pending verdict."""
        self._pending = None
        self._ids_en = False
        return super().reset()

    def _start_frame(self):
        self._pending = None
        self._ids_en = False

    def _on_header(self, bit_index, receiver):
        if self.ids is None or receiver.is_remote:
            return []
        self._ids_en = True
        return [self._event(EventKind.IDS_ENABLED, bit_index)]

    def _on_data_en(self, bit_index, receiver):
        events = super()._on_data_en(bit_index, receiver)
        if self._ids_en:
            current = CanFrame(receiver.can_id, receiver.dlc, bytes(self._written))
            feature = collect_features(current, self._previous)
            is_attack, probability = self.ids.classify(feature.values)
            self._pending = _PendingVerdict(bit_index, feature, bool(is_attack), probability)
        return events

    def _deliver(self, frame, decode_events):
        if self._pending is None:
            message, events = super()._deliver(frame, decode_events)
            if self.ids is not None:
                message = ReceivedMessage(frame, Label.BENIGN, message.timeline, ids_skipped=True)
            return message, events
        pending, self._pending = self._pending, None
        timeline = frame_timeline(decode_events, self.timing, self.ids_latency_cycles)
        label = Label.from_flag(pending.is_attack)
        ready_index = time_to_bit_index(timeline.t_ids_output_ready, self.timing)
        events = [ControllerEvent(EventKind.IDS_OUTPUT_READY, timeline.t_ids_output_ready, ready_index,
                                  f'verdict={label.value}')]
        late = timeline.t_ids_output_ready > timeline.t_frame_done
        if late:
            overrun = timeline.t_ids_output_ready - timeline.t_frame_done
            LOGGER.warning('IDS verdict for %s lands %s us after frame done.', frame, format_us(overrun))
            events.append(ControllerEvent(EventKind.LATENCY_VIOLATION, timeline.t_ids_output_ready, ready_index,
                                          f'late by {format_us(overrun)} us'))
        events.append(self._frame_done(decode_events))
        self._previous = frame
        LOGGER.debug('Received %s flagged %s', frame, label.value)
        return ReceivedMessage(frame=frame,
                               ids_flag=label,
                               timeline=timeline,
                               feature=pending.feature,
                               late=late,
                               probability=pending.probability), events


def frame_for(can_id=0x123, payload=b'\x01\x02\x03\x04\x05'):
    """A data frame whose DLC follows the payload length."""
    payload = bytes(payload)
    return CanFrame(can_id, len(payload), payload)
