"""Module that parses the command-line arguments."""
import argparse
import sys

from mnarlbm import __version__, commands
from mnarlbm.config import ConfigError, build_config
from mnarlbm.logging import config_logger, logger
from mnarlbm.parsers import MATRIX_FORMATS
from mnarlbm.utils import _HelpAction

KINDS = ("mcar", "mar", "nmar", "mnar")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument(
        "-c", "--config", dest="config_path", help="path to a custom configuration file"
    )
    parser.add_argument(
        "-o", "--output-dir", dest="output_dir", required=True, help="output directory"
    )
    parser.add_argument("--seed", type=int, help="seed of every random draw")
    parser.add_argument(
        "--n-jobs", dest="n_jobs", type=int, help="number of parallel workers"
    )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="write byte-reproducible result files (no timings)",
    )
    parser.add_argument(
        "--log-level",
        dest="log_level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="level of the mnarlbm logger",
    )


def _add_input(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument(
        "-i", "--input", required=required, help="path to the observed matrix"
    )
    parser.add_argument(
        "--format", choices=MATRIX_FORMATS, help="format of the observed matrix"
    )


def _add_engine(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--inits", dest="n_inits", type=int, help="number of multi-start candidates"
    )
    parser.add_argument(
        "--tol", dest="elbo_rel_tol", type=float, help="relative tolerance on the ELBO"
    )
    parser.add_argument(
        "--max-iters", dest="max_vem_iters", type=int, help="cap on the VEM iterations"
    )


def _add_benchmark(parser: argparse.ArgumentParser):
    parser.add_argument("--rows", type=int, help="number of rows")
    parser.add_argument("--cols", type=int, help="number of columns")
    parser.add_argument("--epsilon", type=float, help="difficulty parameter")
    parser.add_argument(
        "--target-risk",
        dest="target_risk",
        type=float,
        help="conditional Bayes risk that calibrates the difficulty parameter",
    )
    parser.add_argument(
        "--mnar", help="propensity parameters as 'mu,var_a,var_b,var_p,var_q'"
    )


def build_parser() -> argparse.ArgumentParser:
    """Builds the parser of the command line, one sub-parser per command."""
    parser = argparse.ArgumentParser(
        prog="mnarlbm",
        description="Latent Block Model co-clustering with nonignorable missing values",
        add_help=False,
    )
    parser.add_argument(
        "-h", "--help", action=_HelpAction, help="show this help message and exit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(help="available commands")

    parser_simulate = subparsers.add_parser(
        "simulate", help="simulate a benchmark matrix"
    )
    _add_common(parser_simulate)
    _add_benchmark(parser_simulate)
    parser_simulate.add_argument("--kind", choices=KINDS, help="missingness kind")
    parser_simulate.set_defaults(func=commands.cmd_simulate)

    parser_fit = subparsers.add_parser("fit", help="fit one model")
    _add_common(parser_fit)
    _add_input(parser_fit)
    _add_engine(parser_fit)
    parser_fit.add_argument("--nq", type=int, help="number of row classes")
    parser_fit.add_argument("--nl", type=int, help="number of column classes")
    parser_fit.add_argument("--kind", choices=KINDS, help="missingness kind")
    parser_fit.set_defaults(func=commands.cmd_fit)

    parser_select = subparsers.add_parser(
        "select", help="select class counts and missingness kind by ICL"
    )
    _add_common(parser_select)
    _add_input(parser_select)
    _add_engine(parser_select)
    parser_select.add_argument(
        "--nq-range", dest="nq_range", help="row class counts, as '2-5' or '2,3,4'"
    )
    parser_select.add_argument(
        "--nl-range", dest="nl_range", help="column class counts, as '2-5' or '2,3,4'"
    )
    parser_select.add_argument(
        "--kinds", help="comma-separated missingness kinds, such as 'mar,nmar'"
    )
    parser_select.set_defaults(func=commands.cmd_select)

    parser_risk = subparsers.add_parser(
        "risk", help="calibrate the difficulty or estimate a conditional Bayes risk"
    )
    _add_common(parser_risk)
    _add_input(parser_risk, required=False)
    _add_benchmark(parser_risk)
    parser_risk.add_argument("--truth", help="path to the truth.json of the input")
    parser_risk.set_defaults(func=commands.cmd_risk)

    parser_eval = subparsers.add_parser("eval", help="evaluate a fit against the truth")
    _add_common(parser_eval)
    parser_eval.add_argument("--fit", required=True, help="path to a fit.json")
    parser_eval.add_argument("--truth", required=True, help="path to a truth.json")
    parser_eval.set_defaults(func=commands.cmd_eval)

    parser_report = subparsers.add_parser(
        "report", help="write plot-ready summaries of a fit"
    )
    _add_common(parser_report)
    _add_input(parser_report, required=False)
    parser_report.add_argument("--fit", required=True, help="path to a fit.json")
    parser_report.set_defaults(func=commands.cmd_report)

    parser_experiment = subparsers.add_parser(
        "experiment", help="run a protocol of the simulated-data study"
    )
    _add_common(parser_experiment)
    _add_engine(parser_experiment)
    _add_benchmark(parser_experiment)
    parser_experiment.add_argument(
        "--experiment",
        choices=("size", "nmar-effect", "recovery", "class-count"),
        help="the protocol to run",
    )
    parser_experiment.add_argument("--sizes", help="comma-separated matrix sizes")
    parser_experiment.add_argument(
        "--effects", help="comma-separated values of var_b = var_q"
    )
    parser_experiment.add_argument(
        "--replicates", type=int, help="number of simulated matrices per condition"
    )
    parser_experiment.add_argument(
        "--nq-range", dest="nq_range", help="row class counts of class-count"
    )
    parser_experiment.add_argument(
        "--nl-range", dest="nl_range", help="column class counts of class-count"
    )
    parser_experiment.add_argument("--kind", choices=KINDS, help="kind of recovery")
    parser_experiment.set_defaults(func=commands.cmd_experiment)

    return parser


def parse_cli(argv=None):
    """Parse the arguments provided for the package execution."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        sys.exit(2)

    overrides = {
        k: v for k, v in vars(args).items() if k not in ("func", "config_path")
    }

    try:
        config = build_config(args.config_path, overrides)
    except ConfigError as e:
        logger.error(e)
        sys.exit(1)

    config_logger(config.get("log_level"))
    sys.exit(args.func(config))


if __name__ == "__main__":
    parse_cli()
