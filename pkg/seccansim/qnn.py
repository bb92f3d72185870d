#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: qnn.py
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
Integer only 4-bit multilayer perceptron.

Weights are signed 4-bit codes with one scale per layer, hidden activations
are unsigned 4-bit codes, biases live in the 32-bit accumulator domain and the
rescaling between layers is a 16-bit fixed point multiply followed by a
rounding right shift. Floating point only appears in the sigmoid applied to the
final scalar.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import logging
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from .seccansimexceptions import (QnnError,
                                  ZeroVariance,
                                  WeightFileError,
                                  VersionMismatch,
                                  ChecksumMismatch,
                                  DimensionMismatch)

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.qnn')
LOGGER.addHandler(logging.NullHandler())

BITS = 4
WEIGHT_MIN, WEIGHT_MAX = -(1 << (BITS - 1)), (1 << (BITS - 1)) - 1
ACTIVATION_MAX = (1 << BITS) - 1
INPUT_SIZE = 20
LAYER_WIDTHS = (64, 32, 1)
INPUT_SCALE = 1.0 / ACTIVATION_MAX
BYTE_PER_CODE = 255 // ACTIVATION_MAX
INT32_MIN, INT32_MAX = -(1 << 31), (1 << 31) - 1
MULTIPLIER_BITS = 16
HALF_SNAP_TOLERANCE = 1e-9

WEIGHT_FILE_MAGIC = b'SCQW'
WEIGHT_FILE_VERSION = 1
_FILE_HEADER = struct.Struct('<4sHB')
_LAYER_HEADER = struct.Struct('<HHdd')
_CHECKSUM = struct.Struct('<I')


def _code_range(bits, signed):
    if signed:
        return -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    return 0, (1 << bits) - 1


def quantize(x, scale, bits=BITS, signed=True):
    """Maps reals to saturated integer codes of ``scale``, rounding half to even.

    Ratios within a relative 1e-9 of a half integer are treated as exact halves so decimal
    inputs round as written.

    Args:
        x: A real or an array of reals.
        scale: Positive step size.
        bits: Code width.
        signed: Two's complement range when True, unsigned otherwise.

    Returns:
        int or numpy.ndarray: The codes.

    """
    if not scale > 0:
        raise QnnError(f'Quantization scale {scale!r} is not positive.')
    low, high = _code_range(bits, signed)
    ratio = np.asarray(x, dtype=np.float64) / scale
    half = np.floor(ratio) + 0.5
    near_half = np.abs(ratio - half) <= HALF_SNAP_TOLERANCE * np.maximum(1.0, np.abs(ratio))
    codes = np.clip(np.rint(np.where(near_half, half, ratio)), low, high).astype(np.int64)
    return int(codes) if codes.ndim == 0 else codes


def dequantize(codes, scale):
    """Real values of integer codes."""
    return np.asarray(codes, dtype=np.float64) * scale


def encode_features(values):
    """Maps feature bytes to 4-bit input codes, ``round(byte / 17)``.

    Args:
        values: Bytes or an integer array of shape (20,) or (n, 20).

    Returns:
        numpy.ndarray: int64 codes in 0..15.

    """
    if isinstance(values, (bytes, bytearray)):
        values = np.frombuffer(bytes(values), dtype=np.uint8)
    array = np.asarray(values, dtype=np.int64)
    return (array + BYTE_PER_CODE // 2) // BYTE_PER_CODE


def fixed_point_multiplier(real_multiplier, bits=MULTIPLIER_BITS):
    """Splits a positive real into an integer multiplier and a right shift.

    ``real_multiplier ~= multiplier / 2 ** shift`` with ``multiplier`` holding ``bits`` significant bits.
    """
    if not (math.isfinite(real_multiplier) and real_multiplier > 0):
        raise QnnError(f'Requantization multiplier {real_multiplier!r} is not a positive finite number.')
    mantissa, exponent = np.frexp(real_multiplier)
    return int(np.rint(mantissa * (1 << bits))), bits - int(exponent)


def requantize(accumulator, multiplier, shift):
    """Integer rescaling of accumulators, rounding half away from zero."""
    product = np.asarray(accumulator, dtype=np.int64) * np.int64(multiplier)
    if shift <= 0:
        return np.left_shift(product, -shift)
    magnitude = np.right_shift(np.abs(product) + (1 << (shift - 1)), shift)
    return np.where(product < 0, -magnitude, magnitude)


def sigmoid(value):
    """Numerically stable logistic function of a scalar."""
    value = float(value)
    if value >= 0:
        return 1.0 / (1.0 + math.exp(-value))
    exp = math.exp(value)
    return exp / (1.0 + exp)


class QuantizedLayer:
    """A dense layer with 4-bit weights.

    Args:
        weights: Integer codes of shape (out, in) in -8..7.
        bias: Accumulator domain biases of shape (out,), int32.
        weight_scale: Real value of one weight code.
        input_scale: Real value of one input activation code.

    """

    def __init__(self, weights, bias, weight_scale, input_scale):
        weights = np.asarray(weights)
        bias = np.asarray(bias)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise DimensionMismatch(f'Weights {weights.shape} and bias {bias.shape} do not describe a dense layer.')
        if weights.size and (weights.min() < WEIGHT_MIN or weights.max() > WEIGHT_MAX):
            raise QnnError(f'Weight codes must lie in {WEIGHT_MIN}..{WEIGHT_MAX}.')
        if bias.size and (bias.min() < INT32_MIN or bias.max() > INT32_MAX):
            raise QnnError('Bias codes must fit 32 bits.')
        for name, scale in (('weight', weight_scale), ('input', input_scale)):
            if not (math.isfinite(scale) and scale > 0):
                raise QnnError(f'The {name} scale {scale!r} is not a positive finite number.')
        self.weights = weights.astype(np.int64)
        self.bias = bias.astype(np.int64)
        self.weight_scale = float(weight_scale)
        self.input_scale = float(input_scale)

    @property
    def in_features(self):
        """Input width."""
        return self.weights.shape[1]

    @property
    def out_features(self):
        """Output width."""
        return self.weights.shape[0]

    @property
    def accumulator_scale(self):
        """Real value of one accumulator unit."""
        return self.weight_scale * self.input_scale

    def accumulate(self, codes):
        """Integer matrix product plus bias, saturated to int32."""
        return np.clip(codes @ self.weights.T + self.bias, INT32_MIN, INT32_MAX)

    def __eq__(self, other):
        if not isinstance(other, QuantizedLayer):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias)
                and self.weight_scale == other.weight_scale
                and self.input_scale == other.input_scale)

    def __repr__(self):
        return (f'QuantizedLayer({self.in_features}->{self.out_features}, '
                f'weight_scale={self.weight_scale!r}, input_scale={self.input_scale!r})')


class QuantizedMlp:
    """The 20 -> 64 -> 32 -> 1 integer perceptron.

    Args:
        layers: Three QuantizedLayer instances whose dimensions chain.

    """

    def __init__(self, layers):
        layers = tuple(layers)
        dimensions = [(layer.in_features, layer.out_features) for layer in layers]
        expected = list(zip((INPUT_SIZE,) + LAYER_WIDTHS[:-1], LAYER_WIDTHS))
        if dimensions != expected:
            raise DimensionMismatch(f'Layer dimensions {dimensions} do not chain as {expected}.')
        if not math.isclose(layers[0].input_scale, INPUT_SCALE, rel_tol=1e-12):
            raise QnnError(f'The first layer must consume the input grid scale {INPUT_SCALE!r}.')
        self.layers = layers
        self._requantizers = [fixed_point_multiplier(layer.accumulator_scale / following.input_scale)
                              for layer, following in zip(layers, layers[1:])]

    @property
    def output_scale(self):
        """Real value of one unit of the output accumulator."""
        return self.layers[-1].accumulator_scale

    def hidden_codes(self, values):
        """Input and hidden activation codes of a batch, one array per layer input."""
        codes = encode_features(values)
        if codes.shape[-1] != INPUT_SIZE:
            raise DimensionMismatch(f'Expected {INPUT_SIZE} feature bytes, got {codes.shape[-1]}.')
        activations = [codes]
        for layer, (multiplier, shift) in zip(self.layers, self._requantizers):
            codes = np.clip(requantize(layer.accumulate(codes), multiplier, shift), 0, ACTIVATION_MAX)
            activations.append(codes)
        return activations

    def pre_activation(self, values):
        """The integer output accumulator; one value per input row."""
        return self.layers[-1].accumulate(self.hidden_codes(values)[-1])[..., 0]

    def forward(self, values):
        """Attack probability of one feature vector."""
        return sigmoid(int(self.pre_activation(values)) * self.output_scale)

    def verdict(self, values):
        """Integer threshold equivalent to ``forward(values) > 0.5``."""
        return bool(self.pre_activation(values) > 0)

    def classify(self, values):
        """Returns ``(is_attack, probability)`` for one feature vector."""
        accumulator = int(self.pre_activation(values))
        return accumulator > 0, sigmoid(accumulator * self.output_scale)

    def predict_batch(self, features):
        """Verdicts and probabilities for a (n, 20) byte matrix."""
        accumulators = self.pre_activation(np.atleast_2d(features))
        probabilities = np.array([sigmoid(value * self.output_scale) for value in accumulators])
        return accumulators > 0, probabilities

    def __eq__(self, other):
        if not isinstance(other, QuantizedMlp):
            return NotImplemented
        return all(left == right for left, right in zip(self.layers, other.layers))

    def __repr__(self):
        return f'QuantizedMlp({", ".join(repr(layer) for layer in self.layers)})'


def forward(model, feature):
    """Attack probability of a FeatureVector or raw 20 feature bytes."""
    return model.forward(getattr(feature, 'values', feature))


def reference_forward(model, values):
    """Real valued forward pass with the dequantized weights and no activation rounding.

    Returns:
        tuple: The real output pre-activation and a bound on its distance to the integer result.

    """
    activation = np.asarray(bytearray(getattr(values, 'values', values)), dtype=np.float64) / 255.0
    integer_codes = model.hidden_codes(getattr(values, 'values', values))
    error = np.full(INPUT_SIZE, INPUT_SCALE / 2)
    for index, layer in enumerate(model.layers):
        weights = dequantize(layer.weights, layer.weight_scale)
        pre_activation = weights @ activation + layer.bias * layer.accumulator_scale
        pre_error = np.abs(weights) @ error
        if index == len(model.layers) - 1:
            return float(pre_activation[0]), float(pre_error[0])
        output_scale = model.layers[index + 1].input_scale
        activation = np.clip(pre_activation, 0.0, ACTIVATION_MAX * output_scale)
        integer_value = np.abs(layer.accumulate(integer_codes[index])) * layer.accumulator_scale
        error = pre_error + output_scale / 2 + integer_value * 2.0 ** -(MULTIPLIER_BITS - 1)
    raise QnnError('The model has no layers.')


def fold_batchnorm(weight, bias, gamma, beta, mean, var, eps=0.0):
    """Absorbs a batch norm that follows a dense layer into its weight and bias.

    Returns:
        tuple: ``w * gamma / sigma`` and ``(b - mean) * gamma / sigma + beta`` per output channel.

    Raises:
        ZeroVariance: A channel has no positive variance.

    """
    denominator = np.asarray(var, dtype=np.float64) + eps
    if np.any(denominator <= 0):
        raise ZeroVariance(f'Channels {np.flatnonzero(denominator <= 0).tolist()} have no positive variance.')
    factor = np.asarray(gamma, dtype=np.float64) / np.sqrt(denominator)
    folded_weight = np.asarray(weight, dtype=np.float64) * factor[:, None]
    folded_bias = (np.asarray(bias, dtype=np.float64) - mean) * factor + beta
    return folded_weight, folded_bias


def weight_scale_of(weight):
    """Symmetric per tensor scale, the largest magnitude maps to code 7."""
    largest = float(np.max(np.abs(weight))) if np.size(weight) else 0.0
    return largest / WEIGHT_MAX if largest > 0 else 1.0


def quantize_layer(weight, bias, input_scale, weight_scale=None):
    """Quantizes real layer parameters to a QuantizedLayer."""
    weight = np.asarray(weight, dtype=np.float64)
    if weight_scale is None:
        weight_scale = weight_scale_of(weight)
    codes = quantize(weight, weight_scale)
    bias_codes = np.clip(np.rint(np.asarray(bias, dtype=np.float64) / (weight_scale * input_scale)),
                         INT32_MIN, INT32_MAX)
    return QuantizedLayer(np.atleast_2d(codes), bias_codes.astype(np.int64), weight_scale, input_scale)


def random_model(rng=None):
    """A valid model with random codes and scales."""
    rng = np.random.default_rng(rng)
    layers = []
    input_scale = INPUT_SCALE
    for in_features, out_features in zip((INPUT_SIZE,) + LAYER_WIDTHS[:-1], LAYER_WIDTHS):
        weights = rng.integers(WEIGHT_MIN, WEIGHT_MAX + 1, size=(out_features, in_features))
        bias = rng.integers(-200, 201, size=out_features)
        layers.append(QuantizedLayer(weights, bias, float(rng.uniform(0.01, 0.2)), input_scale))
        input_scale = float(rng.uniform(0.05, 0.5))
    return QuantizedMlp(layers)


def _pack_nibbles(codes):
    flat = (np.asarray(codes, dtype=np.int64).ravel() & 0xF).astype(np.uint8)
    if flat.size % 2:
        flat = np.append(flat, np.uint8(0))
    return (flat[0::2] | (flat[1::2] << 4)).tobytes()


def _unpack_nibbles(data, count):
    packed = np.frombuffer(data, dtype=np.uint8)
    flat = np.empty(packed.size * 2, dtype=np.int64)
    flat[0::2] = packed & 0xF
    flat[1::2] = packed >> 4
    flat = flat[:count]
    return np.where(flat >= 8, flat - 16, flat)


def pack_layers(layers, version=WEIGHT_FILE_VERSION):
    """Serializes layers to the weight file format without checking that they chain."""
    layers = tuple(layers)
    chunks = [_FILE_HEADER.pack(WEIGHT_FILE_MAGIC, version, len(layers))]
    for layer in layers:
        chunks.append(_LAYER_HEADER.pack(layer.in_features, layer.out_features,
                                         layer.weight_scale, layer.input_scale))
        chunks.append(layer.bias.astype('<i4').tobytes())
        chunks.append(_pack_nibbles(layer.weights))
    body = b''.join(chunks)
    return body + _CHECKSUM.pack(zlib.crc32(body))


def dump_weights(model):
    """Serializes a model to the versioned weight file format."""
    return pack_layers(model.layers)


def load_weights(data):
    """Parses a weight file.

    Raises:
        VersionMismatch: Unknown magic or version.
        ChecksumMismatch: The trailing CRC-32 is wrong.
        DimensionMismatch: Layers do not chain 20 -> 64 -> 32 -> 1.
        WeightFileError: The file is truncated.

    """
    data = bytes(data)
    if len(data) < _FILE_HEADER.size + _CHECKSUM.size:
        raise WeightFileError(f'Weight file of {len(data)} bytes is too short.')
    magic, version, layer_count = _FILE_HEADER.unpack_from(data)
    if magic != WEIGHT_FILE_MAGIC:
        raise VersionMismatch(f'Unknown weight file magic {magic!r}.')
    body, (checksum,) = data[:-_CHECKSUM.size], _CHECKSUM.unpack(data[-_CHECKSUM.size:])
    if zlib.crc32(body) != checksum:
        raise ChecksumMismatch(f'Checksum 0x{checksum:08X} does not match 0x{zlib.crc32(body):08X}.')
    if version != WEIGHT_FILE_VERSION:
        raise VersionMismatch(f'Weight file version {version} is not supported, expected {WEIGHT_FILE_VERSION}.')
    if layer_count != len(LAYER_WIDTHS):
        raise DimensionMismatch(f'Weight file declares {layer_count} layers, expected {len(LAYER_WIDTHS)}.')
    offset = _FILE_HEADER.size
    layers = []
    try:
        for _ in range(layer_count):
            in_features, out_features, weight_scale, input_scale = _LAYER_HEADER.unpack_from(body, offset)
            offset += _LAYER_HEADER.size
            expected = (INPUT_SIZE,) + LAYER_WIDTHS
            if (in_features, out_features) != (expected[len(layers)], expected[len(layers) + 1]):
                raise DimensionMismatch(f'Layer {len(layers)} declares {in_features}x{out_features}.')
            bias = np.frombuffer(body, dtype='<i4', count=out_features, offset=offset)
            offset += 4 * out_features
            packed_size = (in_features * out_features + 1) // 2
            if offset + packed_size > len(body):
                raise WeightFileError('Weight file is truncated.')
            weights = _unpack_nibbles(body[offset:offset + packed_size], in_features * out_features)
            offset += packed_size
            layers.append(QuantizedLayer(weights.reshape(out_features, in_features), bias, weight_scale,
                                         input_scale))
    except (struct.error, ValueError) as error:
        raise WeightFileError(f'Weight file is truncated: {error}') from None
    if offset != len(body):
        raise WeightFileError(f'{len(body) - offset} trailing bytes in the weight file.')
    return QuantizedMlp(layers)


def export_weights(model, path):
    """Writes ``model`` to ``path``."""
    try:
        Path(path).write_bytes(dump_weights(model))
    except OSError as error:
        raise WeightFileError(f'Cannot write weights to {path}: {error}') from None
    LOGGER.info('Weights written to %s', path)


def import_weights(path):
    """Reads a model from ``path``."""
    try:
        data = Path(path).read_bytes()
    except OSError as error:
        raise WeightFileError(f'Cannot read weights from {path}: {error}') from None
    LOGGER.debug('Loading weights from %s', path)
    return load_weights(data)
