#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: framecodec.py
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
Bit accurate CAN 2.0A data frame codec.

Frames are encoded to the exact sequence of bus levels (dominant ``0``,
recessive ``1``) including bit stuffing and the CRC-15, and decoded back by a
bit serial receiver that reports when each field completes on the bus.

Every bit index reported by this module is a boundary count: the number of
bus bits received when the event fires, index 0 being the leading edge of SOF.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from .seccansimexceptions import (InvalidFrame,
                                  StuffError,
                                  CrcError,
                                  FormError,
                                  TruncatedError,
                                  UnsupportedFrame)

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.framecodec')
LOGGER.addHandler(logging.NullHandler())

DOMINANT = 0
RECESSIVE = 1

MAX_STANDARD_ID = 0x7FF
MAX_DLC = 8
ID_BITS = 11
DLC_BITS = 4
CRC_BITS = 15
CRC15_POLYNOMIAL = 0x4599
STUFF_RUN = 5

# SOF + ID + RTR + IDE + r0 + DLC
HEADER_BITS = 1 + ID_BITS + 1 + 1 + 1 + DLC_BITS
CRC_DELIMITER_BITS = 1
ACK_BITS = 2
EOF_BITS = 7
IFS_BITS = 3
TAIL_BITS = CRC_DELIMITER_BITS + ACK_BITS + EOF_BITS + IFS_BITS
ERROR_FLAG_BITS = 6
ERROR_DELIMITER_BITS = 8

# tail positions, 1 based, counted after the stuffed region
_CRC_DELIMITER_POSITION = 1
_ACK_SLOT_POSITION = 2
_ACK_DELIMITER_POSITION = 3
_EOF_END_POSITION = _ACK_DELIMITER_POSITION + EOF_BITS
_IFS_END_POSITION = _EOF_END_POSITION + IFS_BITS


def int_to_bits(value, width):
    """Most significant bit first."""
    return [(value >> shift) & 1 for shift in reversed(range(width))]


def bits_to_int(bits):
    """Inverse of int_to_bits."""
    value = 0
    for bit in bits:
        value = (value << 1) | bit
    return value


@dataclass(frozen=True)
class CanFrame:
    """A logical CAN 2.0A frame.

    Args:
        can_id: The 11 bit identifier.
        dlc: The data length code, 0 to 8.
        payload: The data bytes, exactly ``dlc`` of them for data frames and none for remote frames.
        is_remote: True for remote transmission requests.

    """

    can_id: int
    dlc: int
    payload: bytes = b''
    is_remote: bool = False

    def __post_init__(self):
        if not isinstance(self.can_id, int) or not 0 <= self.can_id <= MAX_STANDARD_ID:
            raise InvalidFrame(f'Identifier {self.can_id!r} is not an 11 bit value.')
        if not isinstance(self.dlc, int) or not 0 <= self.dlc <= MAX_DLC:
            raise InvalidFrame(f'DLC {self.dlc!r} is outside 0..{MAX_DLC}.')
        try:
            payload = bytes(self.payload)
        except (TypeError, ValueError):
            raise InvalidFrame(f'Payload {self.payload!r} is not a byte sequence.') from None
        expected = 0 if self.is_remote else self.dlc
        if len(payload) != expected:
            raise InvalidFrame(f'Payload holds {len(payload)} bytes, expected {expected}.')
        object.__setattr__(self, 'payload', payload)

    @property
    def padded_payload(self):
        """The payload zero padded to 8 bytes."""
        return self.payload.ljust(MAX_DLC, b'\x00')

    def __str__(self):
        kind = 'remote' if self.is_remote else 'data'
        return f'{self.can_id:03X}#{self.payload.hex()} [{self.dlc}] ({kind})'


@dataclass(frozen=True)
class BitStream:
    """Bus levels of one frame.

    Args:
        bits: The bus levels in transmission order.
        stuffed_region_end: Index where the stuffed region (SOF through CRC sequence) ends.

    """

    bits: tuple
    stuffed_region_end: int

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, index):
        return self.bits[index]

    def flipped(self, index):
        """Returns a copy with the bit at ``index`` inverted."""
        bits = list(self.bits)
        bits[index] ^= 1
        return BitStream(tuple(bits), self.stuffed_region_end)

    def forced(self, index, level):
        """Returns a copy with the bit at ``index`` driven to ``level``."""
        bits = list(self.bits)
        bits[index] = level
        return BitStream(tuple(bits), self.stuffed_region_end)

    def __str__(self):
        return ''.join(str(bit) for bit in self.bits)


def crc15(bits):
    """Calculates the CAN CRC-15 of an unstuffed bit sequence.

    Args:
        bits: The bits from SOF through the last data bit.

    Returns:
        int: The 15 bit checksum.

    """
    crc = 0
    for bit in bits:
        feedback = bit ^ ((crc >> (CRC_BITS - 1)) & 1)
        crc = (crc << 1) & 0x7FFF
        if feedback:
            crc ^= CRC15_POLYNOMIAL
    return crc


class _Destuffer:
    """Removes stuff bits one bus bit at a time."""

    def __init__(self):
        self._run_bit = None
        self._run_length = 0
        self.expects_stuff = False

    def push(self, bit, bit_index=None):
        """Returns the data bit or None when ``bit`` was a stuff bit."""
        if self.expects_stuff:
            if bit == self._run_bit:
                raise StuffError(f'Six consecutive bits at level {bit}.', bit_index)
            self._run_bit, self._run_length, self.expects_stuff = bit, 1, False
            return None
        if bit == self._run_bit:
            self._run_length += 1
        else:
            self._run_bit, self._run_length = bit, 1
        if self._run_length == STUFF_RUN:
            self.expects_stuff = True
        return bit


def stuff(bits):
    """Inserts a complement bit after every run of five identical bits.

    The inserted bit starts the next run.
    """
    stuffed = []
    run_bit, run_length = None, 0
    for bit in bits:
        stuffed.append(bit)
        if bit == run_bit:
            run_length += 1
        else:
            run_bit, run_length = bit, 1
        if run_length == STUFF_RUN:
            run_bit, run_length = 1 - bit, 1
            stuffed.append(run_bit)
    return stuffed


def unstuff(bits):
    """Removes stuff bits.

    Raises:
        StuffError: Six identical consecutive bits were found.

    """
    destuffer = _Destuffer()
    raw = []
    for index, bit in enumerate(bits):
        value = destuffer.push(bit, index + 1)
        if value is not None:
            raw.append(value)
    return raw


def frame_bits(frame):
    """The unstuffed bits from SOF through the last data bit."""
    bits = [DOMINANT]
    bits += int_to_bits(frame.can_id, ID_BITS)
    bits += [RECESSIVE if frame.is_remote else DOMINANT, DOMINANT, DOMINANT]
    bits += int_to_bits(frame.dlc, DLC_BITS)
    for byte in frame.payload:
        bits += int_to_bits(byte, 8)
    return bits


def encode_frame(frame):
    """Encodes a frame to the bus levels it produces, intermission included.

    The ACK slot is driven dominant, as if a second node acknowledged the frame.

    Returns:
        BitStream: The stuffed region followed by the fixed form tail.

    """
    raw = frame_bits(frame)
    raw += int_to_bits(crc15(raw), CRC_BITS)
    stuffed = stuff(raw)
    tail = [RECESSIVE, DOMINANT, RECESSIVE] + [RECESSIVE] * EOF_BITS + [RECESSIVE] * IFS_BITS
    return BitStream(tuple(stuffed + tail), len(stuffed))


class FieldEvent(NamedTuple):
    """A field completed on the bus.

    ``kind`` is one of ``header``, ``byte``, ``crc``, ``eof`` and ``ifs``.
    """

    kind: str
    bit_index: int
    value: object = None


@dataclass(frozen=True)
class DecodeEvents:
    """Bit indices of the receive milestones of one frame."""

    header_index: int
    byte_indices: tuple
    crc_index: int
    eof_index: int
    ifs_index: int
    sof_index: int = 0
    warnings: tuple = field(default_factory=tuple)

    @property
    def data_en_index(self):
        """Where the last payload byte was written, or the header end for empty payloads."""
        return self.byte_indices[-1] if self.byte_indices else self.header_index

    @property
    def error_frame_index(self):
        """End of an error frame raised by a receiver at EOF bit 6, the last bit a receiver may reject."""
        return self.eof_index - 1 + ERROR_FLAG_BITS + ERROR_DELIMITER_BITS

    @property
    def stuff_bit_count(self):
        """Stuff bits inserted in this frame."""
        return self.crc_index - (HEADER_BITS + 8 * len(self.byte_indices) + CRC_BITS)

    @classmethod
    def from_field_events(cls, field_events, warnings=()):
        """Collects the indices out of a receiver's field events."""
        indices = {}
        byte_indices = []
        for event in field_events:
            if event.kind == 'byte':
                byte_indices.append(event.bit_index)
            else:
                indices[event.kind] = event.bit_index
        return cls(header_index=indices['header'],
                   byte_indices=tuple(byte_indices),
                   crc_index=indices['crc'],
                   eof_index=indices['eof'],
                   ifs_index=indices['ifs'],
                   warnings=tuple(warnings))


class FrameReceiver:
    """Bit serial receive state machine for a single frame.

    Bits are pushed one at a time as they are sampled from the bus; every push returns the
    fields it completed so a caller can act on them while the rest of the frame is still
    arriving.
    """

    def __init__(self):
        self._destuffer = _Destuffer()
        self._raw = []
        self._bit_count = 0
        self._tail_position = 0
        self._in_tail = False
        self._crc_pending = None
        self._data_end = None
        self._crc_expected = None
        self._payload = bytearray()
        self.can_id = None
        self.dlc = None
        self.is_remote = False
        self.done = False
        self.warnings = []

    @property
    def bit_count(self):
        """Bus bits consumed so far."""
        return self._bit_count

    @property
    def frame(self):
        """The received frame, available once ``done``."""
        if not self.done:
            return None
        return CanFrame(self.can_id, self.dlc, bytes(self._payload), self.is_remote)

    def push(self, bit):
        """Consumes one bus bit.

        Returns:
            list: The FieldEvent instances completed by this bit.

        Raises:
            DecodeError: On stuff, form or CRC violations.

        """
        if self.done:
            raise FormError('Bit received after the end of the intermission.', self._bit_count)
        if bit not in (DOMINANT, RECESSIVE):
            raise FormError(f'Invalid bus level {bit!r}.', self._bit_count)
        self._bit_count += 1
        if self._in_tail:
            return self._on_tail_bit(bit)
        value = self._destuffer.push(bit, self._bit_count)
        if value is None:
            if self._crc_pending is not None:
                return self._finish_crc()
            return []
        return self._on_raw_bit(value)

    def _on_raw_bit(self, bit):
        self._raw.append(bit)
        position = len(self._raw)
        index = self._bit_count
        events = []
        if position == 1 and bit != DOMINANT:
            raise FormError('Start of frame is not dominant.', index)
        if position == 1 + ID_BITS:
            self.can_id = bits_to_int(self._raw[1:])
        elif position == 2 + ID_BITS:
            self.is_remote = bit == RECESSIVE
        elif position == 3 + ID_BITS and bit == RECESSIVE:
            raise UnsupportedFrame('Extended identifier frames are not supported.', index)
        elif position == HEADER_BITS:
            events.append(self._on_header(index))
        elif self._data_end is not None and HEADER_BITS < position <= self._data_end \
                and (position - HEADER_BITS) % 8 == 0:
            byte = bits_to_int(self._raw[-8:])
            self._payload.append(byte)
            events.append(FieldEvent('byte', index, byte))
        if position == self._data_end:
            self._crc_expected = crc15(self._raw)
        elif self._data_end is not None and position == self._data_end + CRC_BITS:
            self._crc_pending = bits_to_int(self._raw[self._data_end:])
            if not self._destuffer.expects_stuff:
                events.extend(self._finish_crc())
        return events

    def _on_header(self, index):
        raw_dlc = bits_to_int(self._raw[-DLC_BITS:])
        if raw_dlc > MAX_DLC:
            message = f'DLC {raw_dlc} clamped to {MAX_DLC}.'
            LOGGER.warning(message)
            self.warnings.append(message)
        self.dlc = min(raw_dlc, MAX_DLC)
        data_bytes = 0 if self.is_remote else self.dlc
        self._data_end = HEADER_BITS + 8 * data_bytes
        return FieldEvent('header', index, (self.can_id, self.dlc, self.is_remote))

    def _finish_crc(self):
        received, self._crc_pending = self._crc_pending, None
        if received != self._crc_expected:
            raise CrcError(f'CRC 0x{received:04X} received, 0x{self._crc_expected:04X} computed.',
                           self._bit_count)
        self._in_tail = True
        return [FieldEvent('crc', self._bit_count, received)]

    def _on_tail_bit(self, bit):
        self._tail_position += 1
        position = self._tail_position
        index = self._bit_count
        if position == _CRC_DELIMITER_POSITION and bit != RECESSIVE:
            raise FormError('CRC delimiter is dominant.', index)
        if position == _ACK_DELIMITER_POSITION and bit != RECESSIVE:
            raise FormError('ACK delimiter is dominant.', index)
        if _ACK_DELIMITER_POSITION < position <= _EOF_END_POSITION and bit != RECESSIVE:
            raise FormError('Dominant bit inside end of frame.', index)
        if _EOF_END_POSITION < position and bit != RECESSIVE:
            raise FormError('Dominant bit inside the intermission.', index)
        if position == _EOF_END_POSITION:
            return [FieldEvent('eof', index)]
        if position == _IFS_END_POSITION:
            self.done = True
            return [FieldEvent('ifs', index, self.frame)]
        return []


def decode_frame(stream):
    """Decodes one frame from its bus levels.

    Args:
        stream: A BitStream or any sequence of bus levels starting at SOF.

    Returns:
        tuple: The CanFrame and its DecodeEvents.

    Raises:
        StuffError, CrcError, FormError, UnsupportedFrame: The frame is invalid.
        TruncatedError: The bits ran out before the intermission completed.

    """
    bits = stream.bits if isinstance(stream, BitStream) else tuple(stream)
    receiver = FrameReceiver()
    field_events = []
    for bit in bits:
        field_events.extend(receiver.push(bit))
        if receiver.done:
            break
    if not receiver.done:
        raise TruncatedError(f'Frame truncated after {len(bits)} bits.', len(bits))
    return receiver.frame, DecodeEvents.from_field_events(field_events, receiver.warnings)
