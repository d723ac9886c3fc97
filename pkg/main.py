import argparse
import os
import sys

from ui.cli import CLI, EXIT_ERROR, EXIT_FAILURE
from ui.experiment import ExperimentConfig
from utils.config import Config
from utils.errors import BendlabError
from utils.logger import Logger
from utils.performance import PerformanceLogger


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Experiment config JSON')
    common.add_argument('--alpha', type=float, help='Scaling exponent alpha')
    common.add_argument('--jmin', type=int, help='Coarsest scale index (a = 2^-j)')
    common.add_argument('--jmax', type=int, help='Finest scale index')
    common.add_argument('--q', type=int, help='Grid oversampling (lines per generator unit)')
    common.add_argument('--tol', type=float, help='Adaptive quadrature tolerance')
    common.add_argument('--method', choices=['grid', 'adaptive'], help='Quadrature method')
    common.add_argument('--threads', type=int, help='Worker threads (0 = all cores; env BENDLAB_THREADS)')
    common.add_argument('--out', help='Output file (or directory for sweep-figure)')
    common.add_argument('--seed', type=int, help='Seed for randomized self-test sampling')
    common.add_argument('--supersample', action='store_true', help='4x4 supersampling when rasterizing')
    common.add_argument('-d', '--debug', action='store_true', help='Enable debug logging')

    def atom_args(p):
        p.add_argument('--s', type=float, default=0.0, help='Shear s in [-1, 1]')
        p.add_argument('--b', type=float, default=0.0, help='Bending b')
        p.add_argument('--t', type=float, nargs=2, metavar=('T1', 'T2'), default=[0.0, 0.0], help='Translation')
        p.add_argument('--iota', type=int, choices=[-1, 1], default=1, help='Cone index')

    parser = argparse.ArgumentParser(description="Bendlet transform and boundary classification")
    sub = parser.add_subparsers(dest='command', required=True)

    coeff = sub.add_parser('coeff', parents=[common], help='Print one transform coefficient')
    coeff.add_argument('--a', type=float, required=True, help='Scale a in (0, 1)')
    atom_args(coeff)

    decay = sub.add_parser('decay', parents=[common], help='Decay curve over j_min..j_max as CSV or JSON')
    atom_args(decay)
    decay.add_argument('--format', choices=['csv', 'json'],
                       help='Output format (default: from the --out extension, else csv)')

    fit = sub.add_parser('fit', parents=[common], help='Fit the slope of a decay CSV')
    fit.add_argument('input', help='Decay CSV written by the decay command')

    classify = sub.add_parser('classify', parents=[common], help='Classify query points (JSON)')
    classify.add_argument('--point', type=float, nargs=2, action='append', metavar=('X1', 'X2'),
                          help='Query point; repeat for several')

    figure = sub.add_parser('sweep-figure', parents=[common], help='Per-radius decay CSVs and curvature summary')
    figure.add_argument('--radii', type=float, nargs='+', help='Disk radii')

    sub.add_parser('selftest', parents=[common], help='Run the invariant suites')
    return parser


def apply_overrides(experiment, args):
    """Command-line flags take precedence over the experiment file"""
    if args.alpha is not None:
        experiment.alpha = args.alpha
    if args.jmin is not None:
        experiment.j_min = args.jmin
    if args.jmax is not None:
        experiment.j_max = args.jmax
    for key, value in (('q', args.q), ('tol', args.tol), ('method', args.method)):
        if value is not None:
            experiment.quadrature = dict(experiment.quadrature, **{key: value})
    if args.threads is not None:
        experiment.threads = args.threads
    if args.out is not None:
        experiment.out = args.out
    if args.seed is not None:
        experiment.seed = args.seed
    if args.supersample:
        experiment.supersample = True
    return experiment.validate()


def main(argv=None):
    # Initialize logging with default settings
    logger = Logger().get_logger('main')
    perf = PerformanceLogger()

    Logger.setup_exception_logging()
    config = Config()
    perf.set_enable_logging(config.get('logging', 'log_performance', True))

    args = build_parser().parse_args(argv)

    if args.debug:
        Logger().set_level('DEBUG')
        logger.debug("Debug mode enabled")

    logger.info(f"Starting bendlab {args.command}")
    logger.debug(f"Python version: {sys.version}")
    logger.debug(f"Running from: {os.path.abspath('.')}")

    try:
        experiment = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        experiment = apply_overrides(experiment, args)
        with perf.start_timer(f"bendlab {args.command}"):
            return CLI(experiment).run(args.command, args)
    except BendlabError as e:
        logger.error(f"Invalid experiment: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.critical(f"Unexpected error in {args.command}: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
