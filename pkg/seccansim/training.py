#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: training.py
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
Quantization aware training of the 4-bit perceptron.

The forward pass uses 4-bit weights and activations, the backward pass treats
the rounding as identity (straight through estimator) and Adam updates the real
valued master weights. Batch norm statistics are tracked while training and
folded into the dense layers before a short final phase, so the exported
integer model computes what was trained.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import copy
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from torch.utils.data import DataLoader, TensorDataset

from .qnn import (ACTIVATION_MAX,
                  INPUT_SCALE,
                  INPUT_SIZE,
                  LAYER_WIDTHS,
                  WEIGHT_MAX,
                  WEIGHT_MIN,
                  QuantizedMlp,
                  encode_features,
                  fold_batchnorm,
                  quantize_layer)
from .seccansimexceptions import DegenerateData, NonFinite, QnnError

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.training')
LOGGER.addHandler(logging.NullHandler())

PAPER_EPOCHS = 200


class RoundStraightThrough(torch.autograd.Function):
    """Rounds in the forward pass, passes gradients unchanged in the backward pass."""

    @staticmethod
    def forward(ctx, x):  # pylint: disable=arguments-differ
        return torch.round(x)

    @staticmethod
    def backward(ctx, grad_output):  # pylint: disable=arguments-differ
        return grad_output


def ste_round(x):
    """Round with a straight through gradient."""
    return RoundStraightThrough.apply(x)


class QuantLinear(nn.Linear):
    """Dense layer with symmetric per tensor 4-bit weights.

    With ``quantize`` False it is a plain ``nn.Linear``.
    """

    def __init__(self, in_features, out_features, quantize=True):
        super().__init__(in_features, out_features)
        self.quantize = quantize

    def weight_scale(self):
        """The scale that maps the largest weight magnitude to code 7."""
        return float(self.weight.detach().abs().max().clamp(min=1e-12)) / WEIGHT_MAX

    def quantized_weight(self):
        """Weights snapped to the 4-bit grid."""
        scale = self.weight_scale()
        return torch.clamp(ste_round(self.weight / scale), WEIGHT_MIN, WEIGHT_MAX) * scale

    def forward(self, x):  # pylint: disable=arguments-renamed
        weight = self.quantized_weight() if self.quantize else self.weight
        return F.linear(x, weight, self.bias)


class QuantReLU(nn.Module):
    """ReLU followed by an unsigned 4-bit activation quantizer.

    The activation range is the running maximum of the ReLU output seen in training.
    """

    def __init__(self, quantize=True, momentum=0.1):
        super().__init__()
        self.quantize = quantize
        self.momentum = momentum
        self.register_buffer('running_max', torch.tensor(1.0))

    @property
    def scale(self):
        """Real value of one activation code."""
        return float(self.running_max.clamp(min=1e-6)) / ACTIVATION_MAX

    def forward(self, x):  # pylint: disable=arguments-differ
        x = F.relu(x)
        if self.training:
            with torch.no_grad():
                batch_max = x.max().to(self.running_max.dtype)
                self.running_max.mul_(1 - self.momentum).add_(self.momentum * batch_max)
        if not self.quantize:
            return x
        scale = self.scale
        return torch.clamp(ste_round(x / scale), 0, ACTIVATION_MAX) * scale


class QuantMlp(nn.Module):
    """Trainable 20 -> 64 -> 32 -> 1 perceptron with batch norm and dropout between layers."""

    def __init__(self, dropout_rate=0.2, quantize=True, widths=LAYER_WIDTHS, input_size=INPUT_SIZE):
        super().__init__()
        sizes = (input_size,) + tuple(widths)
        self.linears = nn.ModuleList(QuantLinear(left, right, quantize) for left, right in zip(sizes, sizes[1:]))
        self.norms = nn.ModuleList(nn.BatchNorm1d(width) for width in widths[:-1])
        self.activations = nn.ModuleList(QuantReLU(quantize) for _ in widths[:-1])
        self.dropout = nn.Dropout(dropout_rate)
        self.folded = False

    def forward(self, x):  # pylint: disable=arguments-differ
        for linear, norm, activation in zip(self.linears, self.norms, self.activations):
            x = linear(x)
            if not self.folded:
                x = norm(x)
            x = self.dropout(activation(x))
        return self.linears[-1](x).squeeze(-1)

    def fold_batchnorm(self):
        """Absorbs the batch norm statistics into the dense layers, once."""
        if self.folded:
            return self
        with torch.no_grad():
            for linear, norm in zip(self.linears, self.norms):
                weight, bias = fold_batchnorm(linear.weight.double().numpy(),
                                              linear.bias.double().numpy(),
                                              norm.weight.double().numpy(),
                                              norm.bias.double().numpy(),
                                              norm.running_mean.double().numpy(),
                                              norm.running_var.double().numpy(),
                                              eps=norm.eps)
                linear.weight.copy_(torch.from_numpy(weight))
                linear.bias.copy_(torch.from_numpy(bias))
        self.folded = True
        return self


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper parameters.

    ``epochs`` bounds the main phase, which stops early once the monitored loss did not improve
    for ``patience`` epochs. ``fold_epochs`` more epochs run after batch norm folding.
    """

    epochs: int = 20
    learning_rate: float = 1e-4
    batch_size: int = 256
    dropout_rate: float = 0.2
    patience: int = 5
    fold_epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise QnnError(f'epochs must be at least 1, got {self.epochs}.')
        if not self.learning_rate > 0:
            raise QnnError(f'learning_rate must be positive, got {self.learning_rate}.')
        if not 0 <= self.dropout_rate < 1:
            raise QnnError(f'dropout_rate must lie in [0, 1), got {self.dropout_rate}.')
        if self.batch_size < 1:
            raise QnnError(f'batch_size must be at least 1, got {self.batch_size}.')
        if self.patience < 1 or self.fold_epochs < 0:
            raise QnnError('patience must be positive and fold_epochs not negative.')


@dataclass
class EpochRecord:
    """Loss and accuracy of one epoch."""

    epoch: int
    phase: str
    loss: float
    accuracy: float
    validation_loss: float = None
    validation_accuracy: float = None


@dataclass
class TrainingLog:
    """Per epoch history of a training run."""

    epochs: list = field(default_factory=list)
    best_epoch: int = None
    stopped_early: bool = False

    def to_dict(self):
        """A JSON serializable view."""
        return asdict(self)


@dataclass(frozen=True)
class TrainingResult:
    """The exported integer model, its training log and the trained torch module."""

    model: QuantizedMlp
    log: TrainingLog
    module: QuantMlp


def _as_inputs(features):
    return torch.as_tensor(encode_features(features) * INPUT_SCALE, dtype=torch.float32)


def class_weights(labels):
    """Inverse frequency weights ``n / (2 * n_c)`` for classes 0 and 1."""
    labels = np.asarray(labels)
    counts = np.bincount(labels.astype(np.int64), minlength=2)
    if labels.size == 0 or counts.min() == 0:
        raise DegenerateData(f'Training data needs both classes, got counts {counts.tolist()}.')
    return labels.size / (2.0 * counts)


def _evaluate(module, inputs, targets, weights):
    module.eval()
    with torch.no_grad():
        logits = module(inputs)
        loss = F.binary_cross_entropy_with_logits(logits, targets, weight=weights[targets.long()])
        accuracy = ((logits > 0).float() == targets).float().mean()
    return float(loss), float(accuracy)


def fit(module, features, labels, learning_rate, epochs, batch_size=256, validation=None, patience=None,
        seed=0, phase='train', log=None):
    """Runs the QAT loop on ``module``.

    Args:
        module: The QuantMlp to train in place.
        features: (n, 20) feature bytes.
        labels: n labels in {0, 1}.
        learning_rate: Adam step size, zero leaves the weights untouched.
        epochs: Upper bound on epochs.
        batch_size: Mini batch size.
        validation: Optional (features, labels) monitored for early stopping.
        patience: Epochs without improvement before stopping, None never stops early.
        seed: Seed of the batch shuffling.
        phase: Name recorded in the log.
        log: TrainingLog to append to.

    Returns:
        TrainingLog: The history, with the best weights restored when early stopping is active.

    Raises:
        NonFinite: The loss diverged.

    """
    log = log if log is not None else TrainingLog()
    weights = torch.as_tensor(class_weights(labels), dtype=torch.float32)
    inputs = _as_inputs(features)
    targets = torch.as_tensor(np.asarray(labels), dtype=torch.float32)
    monitored_inputs, monitored_targets = inputs, targets
    if validation is not None:
        monitored_inputs = _as_inputs(validation[0])
        monitored_targets = torch.as_tensor(np.asarray(validation[1]), dtype=torch.float32)
    generator = torch.Generator().manual_seed(seed)
    loader = DataLoader(TensorDataset(inputs, targets), batch_size=batch_size, shuffle=True,
                        generator=generator, drop_last=len(targets) > batch_size and len(targets) % batch_size == 1)
    optimizer = torch.optim.Adam(module.parameters(), lr=learning_rate)
    best_loss, best_state, stale = math.inf, None, 0
    first_epoch = len(log.epochs) + 1
    for epoch in range(first_epoch, first_epoch + epochs):
        module.train()
        for batch_inputs, batch_targets in loader:
            optimizer.zero_grad()
            logits = module(batch_inputs)
            loss = F.binary_cross_entropy_with_logits(logits, batch_targets, weight=weights[batch_targets.long()])
            if not torch.isfinite(loss):
                raise NonFinite(f'Loss diverged in epoch {epoch}.')
            loss.backward()
            optimizer.step()
        train_loss, train_accuracy = _evaluate(module, inputs, targets, weights)
        record = EpochRecord(epoch, phase, train_loss, train_accuracy)
        monitored_loss = train_loss
        if validation is not None:
            record.validation_loss, record.validation_accuracy = _evaluate(module, monitored_inputs,
                                                                           monitored_targets, weights)
            monitored_loss = record.validation_loss
        if not math.isfinite(monitored_loss):
            raise NonFinite(f'Loss diverged in epoch {epoch}.')
        log.epochs.append(record)
        LOGGER.info('%s epoch %s: loss %.5f accuracy %.4f', phase, epoch, train_loss, train_accuracy)
        if patience is None:
            continue
        if monitored_loss < best_loss:
            best_loss, best_state, stale = monitored_loss, copy.deepcopy(module.state_dict()), 0
            log.best_epoch = epoch
        else:
            stale += 1
            if stale >= patience:
                LOGGER.info('Stopping early after epoch %s, best epoch %s.', epoch, log.best_epoch)
                log.stopped_early = True
                break
    if best_state is not None:
        module.load_state_dict(best_state)
    return log


def export_model(module):
    """Snapshots a trained module as an integer QuantizedMlp, folding batch norm on a copy if needed."""
    if not module.folded:
        module = copy.deepcopy(module).fold_batchnorm()
    input_scales = [INPUT_SCALE] + [activation.scale for activation in module.activations]
    layers = []
    with torch.no_grad():
        for linear, input_scale in zip(module.linears, input_scales):
            layers.append(quantize_layer(linear.weight.double().numpy(),
                                         linear.bias.double().numpy(),
                                         input_scale,
                                         weight_scale=linear.weight_scale()))
    return QuantizedMlp(layers)


def train(features, labels, config=TrainConfig(), validation=None):
    """Trains the 4-bit perceptron.

    Args:
        features: (n, 20) feature bytes.
        labels: n labels, 1 for attack.
        config: A TrainConfig.
        validation: Optional (features, labels) for early stopping.

    Returns:
        TrainingResult: The exported model, the log and the torch module.

    Raises:
        DegenerateData: Empty data or a single class.
        NonFinite: The loss diverged.

    """
    features = np.asarray(features)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0 or features.shape[0] != labels.shape[0]:
        raise DegenerateData(f'Features {features.shape} and labels {labels.shape} do not match.')
    if not np.isin(labels, (0, 1)).all():
        raise DegenerateData('Labels must be 0 or 1.')
    class_weights(labels)
    torch.manual_seed(config.seed)
    module = QuantMlp(dropout_rate=config.dropout_rate)
    LOGGER.info('Training on %s messages, %s attacks.', labels.size, int(labels.sum()))
    log = fit(module, features, labels, config.learning_rate, config.epochs, config.batch_size,
              validation=validation, patience=config.patience, seed=config.seed)
    module.fold_batchnorm()
    if config.fold_epochs:
        fit(module, features, labels, config.learning_rate, config.fold_epochs, config.batch_size,
            validation=validation, seed=config.seed + 1, phase='folded', log=log)
    module.eval()
    return TrainingResult(export_model(module), log, module)
