#!/usr/bin/env python
# -*- coding: utf-8 -*-
# File: seccansim.py
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
Main code for seccansim.

.. _Google Python Style Guide:
   http://google.github.io/styleguide/pyguide.html

"""

import argparse
import json
import logging
import logging.config
import os
import sys
from pathlib import Path

import coloredlogs
import numpy as np

from .configuration import RunConfiguration, load_configuration, normalize_key
from .controller import ConstantIds, SecCanController
from .framecodec import CanFrame, encode_frame
from .harness import DetectionReport, replay_many, waveform_report, window_report
from .qnn import export_weights, import_weights
from .seccansimexceptions import ConfigurationError, SecCanSimError
from .timing import FrameDoneConvention
from .traffic import (ATTACK_FILE_NAMES,
                      SCHEMAS,
                      Trace,
                      default_benign_profile,
                      feature_dataset,
                      load_dataset_dir,
                      load_trace,
                      split,
                      synthesize,
                      write_trace)
from .training import train

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
LOGGER = logging.getLogger(LOGGER_BASENAME)
LOGGER.addHandler(logging.NullHandler())

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_DATA_ERROR = 2
EXIT_ACCEPTANCE_FAILURE = 3


class DefaultVariable(argparse.Action):
    """Creates an action that looks up a variable in the environment."""

    def __init__(self, variable, required=True, default=None, **kwargs):
        if not default and variable:
            if variable in os.environ:
                default = os.environ[variable]
        if required and default:
            required = False
        super().__init__(default=default, required=required, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)


class UsageExitParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _hex_int(value):
    return int(value, 16)


def _add_common_arguments(parser):
    suppress = argparse.SUPPRESS
    parser.add_argument('--bitrate', type=int, default=suppress,
                        help='Bus bitrate in bits per second. Defaults to 1000000.')
    parser.add_argument('--clock-mhz', dest='clock_mhz', type=float, default=suppress,
                        help='Controller clock in MHz. Defaults to 16.')
    parser.add_argument('--ids-cycles', dest='ids_cycles', type=int, default=suppress,
                        help='IDS latency in controller cycles. Defaults to 584.')
    parser.add_argument('--frame-done', dest='frame_done_convention', default=suppress,
                        choices=[convention.value for convention in FrameDoneConvention],
                        help='The bus edge that marks frame done. Defaults to end_of_error_frame.')
    parser.add_argument('--schema', default=suppress, choices=SCHEMAS,
                        help='Trace file schema. Defaults to car_hacking.')
    parser.add_argument('--seed', type=int, default=suppress, help='Seed for synthesis, splits and training.')
    parser.add_argument('--config', '-c',
                        help=('A flat key = value run configuration file. '
                              '(Can also be specified using "SECCANSIM_CONFIG" environment variable)'),
                        dest='config',
                        action=DefaultVariable,
                        variable='SECCANSIM_CONFIG',
                        required=False)
    parser.add_argument('--log-config', '-l', action='store', dest='logger_config',
                        help='The location of the logging config json file', default='')
    parser.add_argument('--log-level', '-L', help='Provide the log level. Defaults to info.', dest='log_level',
                        action='store', default='info',
                        choices=['debug', 'info', 'warning', 'error', 'critical'])


def _add_data_arguments(parser):
    suppress = argparse.SUPPRESS
    parser.add_argument('--data-dir', dest='data_dir', default=suppress,
                        help='Directory holding one trace file per attack.')
    parser.add_argument('--trace', default=suppress, help='A single trace file.')
    parser.add_argument('--weights', default=suppress, help='The weight file.')
    parser.add_argument('--report', default=suppress, help='Where to write the JSON report.')
    parser.add_argument('--min-accuracy', dest='min_accuracy', type=float, default=suppress,
                        help='Fail with exit code 3 below this overall accuracy in percent.')
    parser.add_argument('--max-fnr', dest='max_fnr', type=float, default=suppress,
                        help='Fail with exit code 3 above this overall FNR in percent.')
    parser.add_argument('--workers', type=int, default=suppress, help='Traces replayed concurrently.')


def get_parser():
    """The command line parser with one subparser per command."""
    parser = UsageExitParser(prog='seccan-sim',
                             description='Bit accurate CAN receive datapath simulator with an in-controller '
                                         '4-bit quantized intrusion detector.')
    subparsers = parser.add_subparsers(dest='command', metavar='command', parser_class=UsageExitParser)
    subparsers.required = True
    suppress = argparse.SUPPRESS

    generate = subparsers.add_parser('generate', help='Synthesize labeled attack traces.')
    _add_common_arguments(generate)
    generate.add_argument('--messages', type=int, default=suppress, help='Messages per trace.')
    generate.add_argument('--injection-rate', dest='injection_rate', type=float, default=suppress,
                          help='Share of attack messages.')
    generate.add_argument('--attacks', default=suppress,
                          help='Comma separated attack kinds: dos_flood, fuzzing, malfunction, flooding.')
    generate.add_argument('--output-dir', dest='output_dir', default=suppress, help='Where traces are written.')

    training = subparsers.add_parser('train', help='Train the quantized model on a dataset.')
    _add_common_arguments(training)
    _add_data_arguments(training)
    for flag, kind in (('--epochs', int), ('--learning-rate', float), ('--batch-size', int),
                       ('--dropout-rate', float), ('--patience', int), ('--fold-epochs', int)):
        training.add_argument(flag, dest=normalize_key(flag), type=kind, default=suppress)

    evaluate = subparsers.add_parser('evaluate', help='Replay traces through the controller and report.')
    _add_common_arguments(evaluate)
    _add_data_arguments(evaluate)
    evaluate.add_argument('--test-split', dest='test_split', action='store_true', default=suppress,
                          help='Replay only the test block of each trace.')

    simulate = subparsers.add_parser('simulate', help='Print the waveform of a single frame.')
    _add_common_arguments(simulate)
    simulate.add_argument('--id', dest='can_id', type=_hex_int, default=suppress,
                          help='Identifier in hex. Defaults to 123.')
    simulate.add_argument('--data', default=suppress, help='Payload in hex. Defaults to 0102030405.')
    simulate.add_argument('--weights', default=suppress, help='Optional weight file, a benign stub otherwise.')

    timing = subparsers.add_parser('timing', help='Print reception windows per DLC.')
    _add_common_arguments(timing)
    return parser


def get_arguments(arguments=None):
    """
    Gets us the cli arguments.

    Returns the args as parsed from the argsparser.
    """
    return get_parser().parse_args(arguments)


def setup_logging(level, config_file=None):
    """
    Sets up the logging.

    Needs the args to get the log level supplied

    Args:
        level: At which level do we log
        config_file: Configuration to use

    """
    if config_file:
        try:
            with open(config_file, encoding='utf-8') as conf_file:
                configuration = json.loads(conf_file.read())
                logging.config.dictConfig(configuration)
        except ValueError:
            print(f'File "{config_file}" is not valid json, cannot continue.')
            raise SystemExit(EXIT_USAGE) from None
    else:
        coloredlogs.install(level=level.upper())


def build_configuration(args):
    """Defaults, then the configuration file, then the explicit flags."""
    configuration = RunConfiguration()
    if args.config:
        configuration = load_configuration(args.config, configuration)
    known = set(RunConfiguration.__dataclass_fields__)
    return configuration.updated(**{key: value for key, value in vars(args).items() if key in known})


def _load_traces(configuration):
    if configuration.trace:
        return [load_trace(configuration.trace, configuration.schema)]
    if configuration.data_dir:
        return load_dataset_dir(configuration.data_dir, configuration.schema)
    raise ConfigurationError('Either a trace file or a data directory is required.')


def _gate(report, configuration):
    print(report.to_text())
    if configuration.report:
        report.write(configuration.report)
    if not report.meets(configuration.min_accuracy, configuration.max_fnr):
        LOGGER.error('Overall accuracy %.4f%% / FNR %.4f%% misses the acceptance thresholds.',
                     float(report.overall.accuracy), float(report.overall.fnr))
        return EXIT_ACCEPTANCE_FAILURE
    return EXIT_SUCCESS


def generate(configuration):
    """Writes one synthetic trace per configured attack."""
    output = Path(configuration.output_dir)
    output.mkdir(parents=True, exist_ok=True)
    for offset, profile in enumerate(configuration.attack_profiles()):
        records = synthesize(default_benign_profile(), profile, configuration.messages,
                             seed=configuration.seed + offset)
        write_trace(records, output / ATTACK_FILE_NAMES[profile.kind], configuration.schema)
    return EXIT_SUCCESS


def _split_traces(traces, seed):
    parts = []
    for trace in traces:
        train_records, validation_records, test_records = split(trace.records, seed=seed)
        LOGGER.info('Split %s into %s/%s/%s messages.', trace.name, len(train_records), len(validation_records),
                    len(test_records))
        parts.append((trace.name, train_records, validation_records, test_records))
    return parts


def _stack(record_sets):
    datasets = [feature_dataset(records) for records in record_sets]
    return np.concatenate([features for features, _, _ in datasets]), \
        np.concatenate([labels for _, labels, _ in datasets])


def train_model(configuration):
    """Trains on the per file train blocks, early stops on validation, reports on the test blocks."""
    parts = _split_traces(_load_traces(configuration), configuration.seed)
    features, labels = _stack(part[1] for part in parts)
    validation = _stack(part[2] for part in parts)
    result = train(features, labels, configuration.train_config(), validation)
    export_weights(result.model, configuration.weights)
    log_path = Path(f'{configuration.weights}.log.json')
    log_path.write_text(json.dumps(result.log.to_dict(), indent=2) + '\n', encoding='utf-8')
    tests = [Trace(name, tuple(test_records)) for name, _, _, test_records in parts]
    return _evaluate_traces(tests, result.model, configuration)


def _evaluate_traces(traces, model, configuration):
    reports = replay_many(traces, model, configuration.timing_config(), configuration.ids_cycles,
                          configuration.workers, configuration.to_dict())
    return _gate(DetectionReport.combine(reports), configuration)


def evaluate(configuration):
    """Replays the configured traces with a trained model."""
    model = import_weights(configuration.weights)
    traces = _load_traces(configuration)
    if configuration.test_split:
        traces = [Trace(name, tuple(test_records))
                  for name, _, _, test_records in _split_traces(traces, configuration.seed)]
    return _evaluate_traces(traces, model, configuration)


def simulate(configuration, weights=None):
    """Prints the waveform and event log of one frame."""
    payload = bytes.fromhex(configuration.data)
    frame = CanFrame(configuration.can_id, len(payload), payload)
    ids = import_weights(weights) if weights else ConstantIds()
    controller = SecCanController(configuration.timing_config(), ids, configuration.ids_cycles)
    result = controller.feed_bits(encode_frame(frame))
    print(waveform_report(result.events))
    if result.message is not None and result.message.late:
        LOGGER.warning('The IDS verdict arrived after frame done.')
    return EXIT_SUCCESS


def main(arguments=None):
    """
    Main method.

    This method holds what you want to execute when
    the script is run on command line.
    """
    args = get_arguments(arguments)
    setup_logging(args.log_level, args.logger_config)
    try:
        configuration = build_configuration(args)
        if args.command == 'generate':
            code = generate(configuration)
        elif args.command == 'train':
            code = train_model(configuration)
        elif args.command == 'evaluate':
            code = evaluate(configuration)
        elif args.command == 'simulate':
            weights = configuration.weights if 'weights' in vars(args) else None
            code = simulate(configuration, weights)
        else:
            print(window_report(configuration.timing_config(), configuration.ids_cycles))
            code = EXIT_SUCCESS
    except ConfigurationError as error:
        LOGGER.error(str(error))
        raise SystemExit(EXIT_USAGE) from None
    except ValueError as error:
        LOGGER.error(str(error))
        raise SystemExit(EXIT_USAGE) from None
    except (SecCanSimError, OSError) as error:
        LOGGER.error(str(error))
        raise SystemExit(EXIT_DATA_ERROR) from None
    raise SystemExit(code) from None


if __name__ == '__main__':
    main()
