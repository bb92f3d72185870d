#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: harness.py
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
Replay of labeled traces through the simulated bus and the reports built from it.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from sklearn.metrics import confusion_matrix

from .controller import EventKind, Label, SecCanController
from .framecodec import CanFrame, MAX_DLC, MAX_STANDARD_ID, encode_frame
from .seccansimexceptions import HarnessError, LengthMismatch
from .timing import (TimingConfig,
                     DEFAULT_IDS_LATENCY_CYCLES,
                     REFERENCE_WINDOW_US,
                     check_realtime,
                     cycles_to_time,
                     format_us,
                     window_table)

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
LOGGER = logging.getLogger(f'{LOGGER_BASENAME}.harness')
LOGGER.addHandler(logging.NullHandler())

REPORT_SCHEMA = 'seccansim.report/1'
OVERALL = 'overall'
HUNDRED = Fraction(100)


def _percent(numerator, denominator, degenerate_value):
    if denominator == 0:
        return degenerate_value, True
    return HUNDRED * numerator / denominator, False


@dataclass(frozen=True)
class Metrics:
    """Confusion counts with attack as the positive class and the derived percentages.

    Undefined ratios take their perfect value (100, or 0 for the FNR) and are named in ``degenerate``.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    precision: Fraction
    recall: Fraction
    f1: Fraction
    accuracy: Fraction
    fnr: Fraction
    degenerate: tuple = ()

    @classmethod
    def from_counts(cls, tp, fp, tn, fn):
        """Derives the percentages from confusion counts."""
        degenerate = []
        values = {}
        for name, numerator, denominator, fallback in (('precision', tp, tp + fp, HUNDRED),
                                                       ('recall', tp, tp + fn, HUNDRED),
                                                       ('f1', 2 * tp, 2 * tp + fp + fn, HUNDRED),
                                                       ('accuracy', tp + tn, tp + fp + tn + fn, HUNDRED),
                                                       ('fnr', fn, fn + tp, Fraction(0))):
            values[name], is_degenerate = _percent(numerator, denominator, fallback)
            if is_degenerate:
                degenerate.append(name)
        return cls(tp, fp, tn, fn, degenerate=tuple(degenerate), **values)

    @property
    def total(self):
        """Scored messages."""
        return self.tp + self.fp + self.tn + self.fn

    @property
    def misclassifications(self):
        """False positives plus false negatives."""
        return self.fp + self.fn

    def __add__(self, other):
        return Metrics.from_counts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self):
        """Counts and full precision percentages."""
        return {'tp': self.tp, 'fp': self.fp, 'tn': self.tn, 'fn': self.fn,
                'precision': float(self.precision), 'recall': float(self.recall), 'f1': float(self.f1),
                'accuracy': float(self.accuracy), 'fnr': float(self.fnr),
                'misclassifications': self.misclassifications, 'degenerate': list(self.degenerate)}


def _is_attack(value):
    return value.is_attack if isinstance(value, Label) else bool(value)


def compute_metrics(labels, verdicts):
    """Confusion metrics of ``verdicts`` against ``labels``, both Labels or booleans.

    Raises:
        LengthMismatch: Lengths differ or are zero.

    """
    labels, verdicts = list(labels), list(verdicts)
    if len(labels) != len(verdicts) or not labels:
        raise LengthMismatch(f'{len(labels)} labels against {len(verdicts)} verdicts.')
    tn, fp, fn, tp = confusion_matrix([_is_attack(label) for label in labels],
                                      [_is_attack(verdict) for verdict in verdicts],
                                      labels=[False, True]).ravel()
    return Metrics.from_counts(int(tp), int(fp), int(tn), int(fn))


@dataclass(frozen=True)
class SlackStats:
    """Aggregate of the time left between IDS output and frame done, in microseconds."""

    minimum: Optional[Fraction] = None
    maximum: Optional[Fraction] = None
    total: Fraction = Fraction(0)
    count: int = 0

    @property
    def mean(self):
        """Mean slack, None without samples."""
        return self.total / self.count if self.count else None

    def add(self, slack):
        """A copy including ``slack``."""
        return SlackStats(slack if self.minimum is None else min(self.minimum, slack),
                          slack if self.maximum is None else max(self.maximum, slack),
                          self.total + slack,
                          self.count + 1)

    def __add__(self, other):
        if not other.count:
            return self
        if not self.count:
            return other
        return SlackStats(min(self.minimum, other.minimum), max(self.maximum, other.maximum),
                          self.total + other.total, self.count + other.count)

    def to_dict(self):
        """Values rounded to four decimals of a microsecond."""
        return {name: None if value is None else round(float(value), 4)
                for name, value in (('min', self.minimum), ('mean', self.mean), ('max', self.maximum))}


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of replaying one or more traces."""

    metrics: dict
    delivered: int
    dropped: int
    slack: SlackStats = field(default_factory=SlackStats)
    violations: int = 0
    late_attacks: int = 0
    config: dict = field(default_factory=dict)
    waveform: str = ''
    window: dict = field(default_factory=dict)

    @property
    def overall(self):
        """The aggregated metrics."""
        return self.metrics[OVERALL]

    @property
    def total(self):
        """Messages replayed."""
        return self.delivered + self.dropped

    @property
    def misclassifications(self):
        """Overall false positives plus false negatives."""
        return self.overall.misclassifications

    @classmethod
    def combine(cls, reports, config=None):
        """Merges per trace reports, keeping each trace's rows and summing the overall row."""
        reports = list(reports)
        if not reports:
            raise HarnessError('No reports to combine.')
        metrics = {}
        overall = None
        slack = SlackStats()
        for report in reports:
            for name, value in report.metrics.items():
                if name != OVERALL:
                    metrics[name] = value
            overall = report.overall if overall is None else overall + report.overall
            slack = slack + report.slack
        metrics[OVERALL] = overall
        return cls(metrics=metrics,
                   delivered=sum(report.delivered for report in reports),
                   dropped=sum(report.dropped for report in reports),
                   slack=slack,
                   violations=sum(report.violations for report in reports),
                   late_attacks=sum(report.late_attacks for report in reports),
                   config=config if config is not None else reports[0].config,
                   waveform=reports[0].waveform,
                   window=reports[0].window)

    def meets(self, min_accuracy=None, max_fnr=None):
        """Whether the overall metrics pass the acceptance thresholds, in percent."""
        if min_accuracy is not None and self.overall.accuracy < Fraction(str(min_accuracy)):
            return False
        if max_fnr is not None and self.overall.fnr > Fraction(str(max_fnr)):
            return False
        return True

    def to_dict(self):
        """The machine readable report, schema ``seccansim.report/1``."""
        return {'schema': REPORT_SCHEMA,
                'metrics': {name: value.to_dict() for name, value in self.metrics.items()},
                'delivered': self.delivered,
                'dropped': self.dropped,
                'misclassifications': self.misclassifications,
                'ids_slack_us': self.slack.to_dict(),
                'realtime_violations': self.violations,
                'late_attack_verdicts': self.late_attacks,
                'window': self.window,
                'config': self.config,
                'waveform': self.waveform}

    def to_text(self):
        """Human readable report."""
        lines = [f'{"attack":<14}{"precision":>10}{"recall":>10}{"f1":>10}{"fnr %":>8}{"accuracy":>10}'
                 f'{"messages":>10}']
        for name, value in self.metrics.items():
            flags = f'  (degenerate: {", ".join(value.degenerate)})' if value.degenerate else ''
            lines.append(f'{name:<14}{float(value.precision):>10.2f}{float(value.recall):>10.2f}'
                         f'{float(value.f1):>10.2f}{float(value.fnr):>8.2f}{float(value.accuracy):>10.2f}'
                         f'{value.total:>10}{flags}')
        lines.append('')
        lines.append(f'misclassifications: {self.misclassifications} of {self.overall.total} scored messages')
        lines.append(f'delivered: {self.delivered}  dropped: {self.dropped}')
        stats = self.slack.to_dict()
        lines.append(f'ids slack us: min {stats["min"]} mean {stats["mean"]} max {stats["max"]}')
        lines.append(f'realtime violations: {self.violations}')
        if self.window:
            lines.append(f'reception window: {self.window["t_window_us"]} us ({self.window["convention"]}), '
                         f'reference {self.window["reference_us"]} us, delta {self.window["delta_us"]} us')
        if self.waveform:
            lines.extend(['', self.waveform])
        return '\n'.join(lines)

    def write(self, path):
        """Writes the JSON report."""
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        LOGGER.info('Report written to %s', path)


def _window_summary(frame, timing, ids_latency_cycles):
    check = check_realtime(ids_latency_cycles, frame, timing)
    window = check.slack + cycles_to_time(ids_latency_cycles, timing)
    return {'convention': timing.frame_done_convention.value,
            't_window_us': format_us(window),
            'reference_us': format_us(REFERENCE_WINDOW_US),
            'delta_us': format_us(window - REFERENCE_WINDOW_US),
            'ids_latency_us': format_us(cycles_to_time(ids_latency_cycles, timing)),
            'meets': check.meets}


def replay(trace, model, timing=TimingConfig(), ids_latency_cycles=DEFAULT_IDS_LATENCY_CYCLES, name=None,
           config=None):
    """Replays a labeled trace through the bus encoder and the IDS controller.

    Records are replayed in timestamp order as they are, one controller for the whole trace.

    Args:
        trace: A Trace or a sequence of TraceRecord.
        model: Object with ``classify(values)``, usually a QuantizedMlp.
        timing: The TimingConfig.
        ids_latency_cycles: IDS latency in controller clocks.
        name: Row name of the metrics, the trace name when None.
        config: Settings echoed in the report.

    Returns:
        DetectionReport: Metrics for the trace and the overall row.

    """
    records = sorted(trace, key=lambda record: record.timestamp)
    name = name or getattr(trace, 'name', None) or 'trace'
    controller = SecCanController(timing, model, ids_latency_cycles)
    labels, verdicts = [], []
    slack = SlackStats()
    dropped = violations = late_attacks = 0
    waveform = ''
    window = {}
    for record in records:
        result = controller.feed_bits(encode_frame(record.frame))
        message = result.message
        if message is None:
            dropped += 1
            continue
        labels.append(record.label)
        verdicts.append(message.ids_flag)
        if message.timeline.ids_slack is not None:
            slack = slack.add(message.timeline.ids_slack)
        if message.late:
            violations += 1
            late_attacks += int(record.label.is_attack)
        if not waveform:
            waveform = waveform_report(result.events)
            window = _window_summary(record.frame, timing, ids_latency_cycles)
    metrics = compute_metrics(labels, verdicts) if labels else Metrics.from_counts(0, 0, 0, 0)
    LOGGER.info('Replayed %s: %s messages, accuracy %.4f%%, %s dropped, %s late.', name, len(records),
                float(metrics.accuracy), dropped, violations)
    return DetectionReport(metrics={name: metrics, OVERALL: metrics},
                           delivered=len(labels),
                           dropped=dropped,
                           slack=slack,
                           violations=violations,
                           late_attacks=late_attacks,
                           config=dict(config or {}),
                           waveform=waveform,
                           window=window)


def replay_many(traces, model, timing=TimingConfig(), ids_latency_cycles=DEFAULT_IDS_LATENCY_CYCLES, workers=4,
                config=None):
    """Replays traces concurrently, one controller each, reports in input order."""
    traces = list(traces)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(replay, trace, model, timing, ids_latency_cycles, None, config)
                   for trace in traces]
        return [future.result() for future in futures]


_SIGNALS = (('header_detected', EventKind.HEADER_DETECTED, 'pulse'),
            ('ids_en', EventKind.IDS_ENABLED, 'level'),
            ('write_flag', EventKind.BYTE_WRITTEN, 'pulse'),
            ('data_en', EventKind.DATA_EN_ASSERTED, 'level'),
            ('ids_output_ready', EventKind.IDS_OUTPUT_READY, 'level'),
            ('latency_violation', EventKind.LATENCY_VIOLATION, 'pulse'),
            ('frame_done', EventKind.FRAME_DONE, 'pulse'),
            ('frame_dropped', EventKind.FRAME_DROPPED, 'pulse'))
_OPTIONAL_SIGNALS = (EventKind.LATENCY_VIOLATION, EventKind.FRAME_DROPPED)
LOW, HIGH = '_', '#'


def waveform_report(events):
    """ASCII timeline of the controller signals of one frame, one column per bus bit.

    Levels rise at their event and stay high until the frame ends; pulses last one bit.
    The chart is followed by the event records.
    """
    events = list(events)
    if not events:
        return ''
    end = max(event.bit_index for event in events)
    width = end + 1
    kinds = {event.kind for event in events}
    label_width = max(len(name) for name, _, _ in _SIGNALS) + 2
    ruler = [' '] * width
    ticks = [' '] * width
    for column in range(0, width, 10):
        ticks[column] = '|'
        for offset, char in enumerate(str(column)):
            if column + offset < width:
                ruler[column + offset] = char
    lines = ['bit'.ljust(label_width) + ''.join(ruler).rstrip(),
             ''.ljust(label_width) + ''.join(ticks).rstrip()]
    for name, kind, shape in _SIGNALS:
        if kind in _OPTIONAL_SIGNALS and kind not in kinds:
            continue
        row = [LOW] * width
        for event in events:
            if event.kind is not kind:
                continue
            if shape == 'pulse':
                row[event.bit_index] = HIGH
            else:
                row[event.bit_index:] = [HIGH] * (width - event.bit_index)
        lines.append(name.ljust(label_width) + ''.join(row))
    lines.append('')
    lines.extend(event.to_record() for event in events)
    return '\n'.join(lines)


def window_report(timing=TimingConfig(), ids_latency_cycles=DEFAULT_IDS_LATENCY_CYCLES):
    """Reception windows per DLC and convention against the IDS latency and the reference figure."""
    latency = cycles_to_time(ids_latency_cycles, timing)
    lines = [f'bitrate {timing.bitrate_bps} bps, controller clock {timing.controller_clock_hz} Hz, '
             f'ids latency {ids_latency_cycles} cycles = {format_us(latency)} us, '
             f'reference window {format_us(REFERENCE_WINDOW_US)} us',
             f'{"dlc":>3}  {"convention":<20}{"t_max us":>12}{"t_window us":>13}{"min us":>10}'
             f'{"delta us":>11}{"slack us":>11}  meets']
    for row in window_table(timing):
        marker = '*' if row.convention is timing.frame_done_convention else ' '
        lines.append(f'{row.dlc:>3}{marker} {row.convention.value:<20}{format_us(row.t_max):>12}'
                     f'{format_us(row.t_window):>13}{format_us(row.t_window_min):>10}'
                     f'{format_us(row.delta_vs_reference):>11}{format_us(row.t_window - latency):>11}'
                     f'  {"yes" if latency <= row.t_window else "no"}')
    return '\n'.join(lines)


def sample_frame(can_id=0x123, dlc=5):
    """The frame used by the timing scenarios, payload bytes 1..dlc."""
    if not 0 <= dlc <= MAX_DLC or not 0 <= can_id <= MAX_STANDARD_ID:
        raise HarnessError(f'No sample frame for identifier 0x{can_id:X} and DLC {dlc}.')
    return CanFrame(can_id, dlc, bytes(range(1, dlc + 1)))
