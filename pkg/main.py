"""
Command-line front end for moment tests on mixtures with varying concentrations
"""
import argparse
import sys
import json
import logging
from datetime import datetime
from typing import Dict, List

import numpy as np
import pandas as pd

from logger_config import setup_logging
from config import Config
from data_processor import DataSet, MalformedInputError, MixtureDataProcessor, export_dataset
from empirical import component_mean_variance, improve_weights
from hypotheses import HypothesisSpecError, parse_hypothesis_spec
from moment_tests import MODIFICATIONS, DimensionMismatch, TestReport, run_all_modifications
from simulation import (
    generate_concentrations,
    load_scenario_config,
    run_scenario,
    sample_mixture,
    with_overrides,
)
from weights import InvalidConcentrations, SingularDesign, all_minimax_weights, gram_matrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SINGULAR_DESIGN = 2
EXIT_MALFORMED_INPUT = 3


def load_dataset(args) -> DataSet:
    """Read and validate the data CSV named on the command line"""
    names = args.names.split(',') if getattr(args, 'names', None) else None
    processor = MixtureDataProcessor(args.data)
    processor.load_data()
    return processor.build_dataset(renormalize=args.renormalize, component_names=names)


def format_test_table(reports: List[TestReport], modifications: List[str]) -> pd.DataFrame:
    """Grid of statistics and p-values: one pair of rows per hypothesis, one column per modification"""
    rows = []
    by_hypothesis: Dict[str, Dict[str, TestReport]] = {}
    for report in reports:
        by_hypothesis.setdefault(report.hypothesis, {})[report.modification] = report

    for hypothesis, per_mod in by_hypothesis.items():
        df = next(iter(per_mod.values())).df
        rows.append({'Hypotheses': hypothesis,
                     **{m: per_mod[m].statistic for m in modifications},
                     'df': df})
        rows.append({'Hypotheses': 'p-value',
                     **{m: per_mod[m].p_value for m in modifications},
                     'df': ''})
    return pd.DataFrame(rows, columns=['Hypotheses', *modifications, 'df'])


def cmd_test(args) -> int:
    """Run the requested hypotheses on a data file and print the reports"""
    dataset = load_dataset(args)
    modifications = list(MODIFICATIONS) if args.mod == 'all' else [args.mod]
    hypotheses = args.hypothesis or ['means-all']

    reports: List[TestReport] = []
    for text in hypotheses:
        spec = parse_hypothesis_spec(text, dataset.M)
        model, hypothesis = spec.build()
        logger.info(f"Testing {hypothesis.name} ({', '.join(modifications)}) at alpha={args.alpha}")
        results = run_all_modifications(dataset.observations, dataset.concentrations, model,
                                        hypothesis, args.alpha, modifications)
        for modification in modifications:
            report = results[modification]
            if not report.covariance_ok:
                logger.warning(f"{hypothesis.name} ({modification}): estimated D is not positive definite")
            reports.append(report)

    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
        return EXIT_OK

    print(format_test_table(reports, modifications).to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    print()
    decisions = pd.DataFrame([{
        'hypothesis': r.hypothesis,
        'modification': r.modification,
        'statistic': r.statistic,
        'df': r.df,
        'p_value': r.p_value,
        'decision': r.decision or 'undefined',
        'covariance_ok': r.covariance_ok,
    } for r in reports])
    print(decisions.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    return EXIT_OK


def cmd_moments(args) -> int:
    """Per-component means and variances, simple next to improved"""
    dataset = load_dataset(args)
    x = dataset.observations
    kind = f"improved_{args.improvement}"
    simple = all_minimax_weights(dataset.concentrations, gram_matrix(dataset.concentrations))

    table = {}
    for a, name in zip(simple, dataset.component_names):
        b = improve_weights(x, a, kind)
        table[f"{name} simple"] = component_mean_variance(x, a)
        table[f"{name} {args.improvement}"] = component_mean_variance(x, b)
        if b.mass_deficit:
            logger.info(f"{name}: improved CDF has total mass {b.mass:.6f}")
    frame = pd.DataFrame(table, index=['mean', 'variance'])

    if args.json:
        print(json.dumps(frame.to_dict(), indent=2))
    else:
        print(frame.to_string(float_format=lambda v: f"{v:.6g}"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Run a simulation scenario and write the result CSV"""
    cfg = load_scenario_config(args.config)
    sizes = [int(n) for n in args.sample_sizes.split(',')] if args.sample_sizes else None
    cfg = with_overrides(cfg, seed=args.seed, replications=args.replications, sample_sizes=sizes,
                         workers=args.workers)

    result = run_scenario(cfg, show_progress=not args.quiet)
    output = args.output or f"simulation_{cfg.name}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.csv"
    result.write_csv(output)

    if not args.quiet:
        print(result.to_frame().to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        print(f"\nResults saved to: {output}")
    return EXIT_OK


def cmd_generate(args) -> int:
    """Write a synthetic data CSV drawn from a scenario configuration"""
    cfg = load_scenario_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    P = generate_concentrations(args.n, cfg.M, rng)
    sample = sample_mixture(P, cfg.means, cfg.variances, rng)
    dataset = DataSet(observations=sample.x, concentrations=P,
                      component_names=[f"component {m + 1}" for m in range(cfg.M)])
    export_dataset(dataset, args.output)
    print(f"Wrote {args.n} observations to {args.output}")
    return EXIT_OK


def _add_data_arguments(parser):
    parser.add_argument('data', help='CSV file with columns x, p1, ..., pM')
    parser.add_argument('--renormalize', action='store_true',
                        help='Rescale concentration rows that do not sum to 1')
    parser.add_argument('--names', default=None,
                        help='Comma-separated component labels')
    parser.add_argument('--json', action='store_true', help='Print JSON instead of text')


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description='Tests on functional moments of mixtures with varying concentrations',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Mean homogeneity of all components, recommended (si) modification
  python main.py test data.csv --hypothesis means-all

  # Table of several hypotheses under all three modifications
  python main.py test data.csv --mod all --hypothesis "means 1 2" --hypothesis "vars-all"

  # Simple and improved component means / variances
  python main.py moments data.csv --names PR,OC,Other

  # Simulation sweep from a scenario file
  python main.py simulate scenarios/experiment_a1.env --workers 4 --output a1.csv

Hypotheses:
  means-all | vars-all | means i k | vars i k | mean i value=c |
  dist i k cells=-inf,c1,...,inf
        """
    )
    parser.add_argument(
        '--log-level',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        default=Config.LOG_LEVEL,
        help=f'Set logging level (default: {Config.LOG_LEVEL})'
    )
    parser.add_argument('--no-log-file', action='store_true', help='Log to stderr only')

    subparsers = parser.add_subparsers(dest='command', required=True)

    test_parser = subparsers.add_parser('test', help='Test hypotheses on a data file')
    _add_data_arguments(test_parser)
    test_parser.add_argument('--hypothesis', action='append',
                             help='Hypothesis to test (repeatable, default: means-all)')
    test_parser.add_argument('--alpha', type=float, default=Config.DEFAULT_ALPHA,
                             help=f'Significance level (default: {Config.DEFAULT_ALPHA})')
    test_parser.add_argument('--mod', choices=[*MODIFICATIONS, 'all'], default=Config.DEFAULT_MODIFICATION,
                             help=f'Test modification (default: {Config.DEFAULT_MODIFICATION})')
    test_parser.set_defaults(func=cmd_test)

    moments_parser = subparsers.add_parser('moments', help='Component means and variances')
    _add_data_arguments(moments_parser)
    moments_parser.add_argument('--improvement', choices=['plus', 'minus', 'pm'], default='pm',
                                help='Improved CDF used next to the simple estimates (default: pm)')
    moments_parser.set_defaults(func=cmd_moments)

    simulate_parser = subparsers.add_parser('simulate', help='Run a Monte-Carlo scenario')
    simulate_parser.add_argument('config', help='Scenario file (KEY=value lines)')
    simulate_parser.add_argument('--output', default=None, help='Result CSV path')
    simulate_parser.add_argument('--seed', type=int, default=None, help='Override the scenario seed')
    simulate_parser.add_argument('--replications', type=int, default=None,
                                 help='Override the number of replications')
    simulate_parser.add_argument('--sample-sizes', default=None,
                                 help='Override sample sizes, comma separated')
    simulate_parser.add_argument('--workers', type=int, default=None,
                                 help=f'Worker processes (default: WORKERS from the scenario, '
                                      f'else {Config.DEFAULT_WORKERS})')
    simulate_parser.add_argument('--quiet', action='store_true', help='No progress bar or table')
    simulate_parser.set_defaults(func=cmd_simulate)

    generate_parser = subparsers.add_parser('generate', help='Write a synthetic data CSV')
    generate_parser.add_argument('config', help='Scenario file (KEY=value lines)')
    generate_parser.add_argument('--n', type=int, default=1000, help='Number of observations')
    generate_parser.add_argument('--seed', type=int, default=None, help='Override the scenario seed')
    generate_parser.add_argument('--output', required=True, help='CSV path to write')
    generate_parser.set_defaults(func=cmd_generate)

    return parser.parse_args(argv)


def main(argv=None) -> int:
    """
    Main execution function

    Args:
        argv: Command line arguments (default: sys.argv)

    Returns:
        Exit code: 0 ran, 2 singular design, 3 malformed input
    """
    args = parse_arguments(argv)
    log_file_path = setup_logging(log_level=getattr(logging, args.log_level),
                                  log_to_file=not args.no_log_file)
    if log_file_path:
        logger.debug(f"Log file: {log_file_path}")

    try:
        Config.validate()
        return args.func(args)
    except SingularDesign as e:
        logger.error(f"Singular concentration design: {e}")
        return EXIT_SINGULAR_DESIGN
    except (MalformedInputError, HypothesisSpecError, DimensionMismatch,
            InvalidConcentrations, FileNotFoundError) as e:
        logger.error(f"Malformed input: {e}")
        return EXIT_MALFORMED_INPUT
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_MALFORMED_INPUT
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Fatal error: {str(e)}", exc_info=True)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
