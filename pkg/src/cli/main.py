"""
Command-Line Entry Point

    python -m src.cli.main build-labeling --config configs/two_channel_z2.json
    python -m src.cli.main simulate --config configs/two_channel_z2.json --out data/results/z2.csv
    python -m src.cli.main analyze rateloss --dims 1,3
    python -m src.cli.main verify --suites identities,closed-forms

Data (CSV/JSON) goes to stdout or --out; logs go to stderr and the log file.
Exit codes: 0 success, 2 invalid input or a domain error, 1 anything else.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from src.analysis.closed_forms import G_BCC, closed_form_report, gaussian_entropy
from src.analysis.tables import (
    binning_threshold_table,
    inner_bound_table,
    product_table,
    psi_table,
    rate_loss_table,
    sphere_gap_checks,
    sphere_gap_table,
)
from src.cli.config import AnalysisOptions, ConfigError, ExperimentConfig, load_config
from src.cli.results_io import write_csv, write_json
from src.cli.verify import parse_suites, run_verify
from src.codec.simulate import simulate
from src.labeling.models import LabelingFunction
from src.labeling.table import LabelingTableError, build_labeling, load_labeling, save_labeling
from src.lattice.core import CapacityError
from src.nested.system import NestingError, SystemDescriptorError
from src.utils.logger import get_logger, run_context
from src.utils.settings import get_settings

logger = get_logger(__name__)
settings = get_settings()

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2

# ValueError covers pydantic validation and every *Error raised for bad parameters.
INPUT_ERRORS = (ValueError, LabelingTableError, CapacityError, NestingError, SystemDescriptorError)

# G of the default central lattice per dimension for the rate-loss table.
_DEFAULT_G = {1: 1.0 / 12.0, 3: G_BCC}


# -------------------------------------------------------------------
# Helpers
# -------------------------------------------------------------------

def _config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    return cfg.model_copy(update=overrides) if overrides else cfg


def _analysis_options(args: argparse.Namespace) -> AnalysisOptions:
    return load_config(args.config).analysis if args.config else AnalysisOptions()


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _labeling_for(cfg: ExperimentConfig, path: Optional[Path]) -> LabelingFunction:
    """Load the labeling named on the command line or in the config, else build one."""
    system = cfg.system()
    path = path or cfg.labeling_path
    if path is None:
        logger.info("No labeling file given; building the labeling for this run")
        return build_labeling(system, cfg.profile(), workers=cfg.workers)
    labeling = load_labeling(path)
    if labeling.system.descriptor() != system.descriptor():
        raise ConfigError(f"labeling {path} was built for a different system than the configuration describes")
    return labeling


# -------------------------------------------------------------------
# Commands
# -------------------------------------------------------------------

def cmd_build_labeling(args: argparse.Namespace) -> int:
    cfg = _config(args)
    system = cfg.system()
    profile = cfg.profile()
    labeling = build_labeling(system, profile, workers=cfg.workers)

    out = Path(args.out) if args.out else (cfg.labeling_path or settings.artifacts_path / "labeling.json")
    save_labeling(labeling, out)
    logger.info(
        f"Labeling for N_pi={system.product_index} written to {out}",
        extra=run_context(indices=list(system.indices), psi=labeling.psi, J=labeling.cost.J),
    )

    report = closed_form_report(
        profile,
        system.dimension,
        system.central_volume,
        system.indices,
        sigma2=cfg.source.sigma2,
        g_central=system.central.second_moment,
    )
    summary = {
        "labeling": str(out),
        "n": system.n,
        "L": system.dimension,
        "N_pi": system.product_index,
        "indices": list(system.indices),
        "psi": labeling.psi,
        "radius": labeling.radius,
        "f": labeling.cost.f,
        "g": labeling.cost.g,
        "J": labeling.cost.J,
        "closed_forms": report.outputs,
        "notes": report.notes,
    }
    write_json(summary)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    labeling = _labeling_for(cfg, Path(args.labeling) if args.labeling else None)
    result = simulate(
        labeling,
        cfg.profile(),
        cfg.source,
        cfg.samples,
        cfg.seed,
        workers=cfg.workers,
        erasure_probability=cfg.erasure_probability,
    )
    write_csv(result.to_frame(), args.out)
    if args.json:
        write_json(result.model_dump(mode="json"), args.json)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    options = _analysis_options(args)
    L_max = args.L_max or options.L_max
    rate = options.rate if args.rate is None else args.rate

    if args.table == "sphere-gap":
        table = sphere_gap_table(L_max)
        flags = sphere_gap_checks(table)
        if not all(flags.values()):
            logger.warning(f"Sphere-gap ordering flags not all set: {flags}")
    elif args.table == "psi-table":
        table = psi_table(L_max)
    elif args.table == "rateloss":
        dims = args.dims or [1, 3]
        table = rate_loss_table((L, options.g_central or _DEFAULT_G.get(L, 1.0 / 12.0)) for L in dims)
    elif args.table == "product":
        L = args.L or 3
        table = product_table(rate, options.central_rates, L, gaussian_entropy(L), options.g_central or _DEFAULT_G.get(L, 1.0 / 12.0))
    elif args.table == "inner-bound":
        table = inner_bound_table(options.rhos, rate)
    else:
        table = binning_threshold_table(options.nesting_ratios, rate, args.L or 1)

    write_csv(table, args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    suites = parse_suites(args.suites)
    report = run_verify(suites, seed=args.seed or 0, oracle_samples=args.oracle_samples)
    write_json(report.summary(), args.out)
    if not report.passed:
        logger.error(f"Verification failed: {[c.name for c in report.failures]}")
        return EXIT_INTERNAL
    return EXIT_OK


# -------------------------------------------------------------------
# Parser
# -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="md_lattice_vq",
        description="Multiple-description lattice vector quantization: labelings, simulations, closed forms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool) -> None:
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="Override the configured seed")
        p.add_argument("--workers", type=int, default=None, help="Threads (output does not depend on it)")
        p.add_argument("--out", default=None, help="Output path (default: stdout)")

    p = sub.add_parser("build-labeling", help="Generate tuples, solve the assignment, write the table")
    common(p, config_required=True)
    p.set_defaults(handler=cmd_build_labeling)

    p = sub.add_parser("simulate", help="Monte-Carlo distortions per erasure pattern as CSV")
    common(p, config_required=True)
    p.add_argument("--labeling", default=None, help="Labeling table (default: config labeling_path, else build)")
    p.add_argument("--json", default=None, help="Also write the full result document here")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("analyze", help="Closed-form tables as CSV")
    p.add_argument(
        "table",
        choices=["sphere-gap", "rateloss", "psi-table", "product", "inner-bound", "binning-threshold"],
    )
    common(p, config_required=False)
    p.add_argument("--L", type=int, default=None, help="Dimension for product / binning-threshold")
    p.add_argument("--L-max", dest="L_max", type=int, default=None, help="Largest odd L for sphere-gap / psi-table")
    p.add_argument("--dims", type=_int_list, default=None, help="Comma-separated dimensions for rateloss")
    p.add_argument("--rate", type=float, default=None, help="Description rate R (bits per dimension)")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("verify", help="Run the invariant suites and report JSON")
    common(p, config_required=False)
    p.add_argument("--suites", default=None, help="Comma-separated subset of identities,oracle,matching,closed-forms")
    p.add_argument("--oracle-samples", dest="oracle_samples", type=int, default=1_000_000)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except INPUT_ERRORS as e:
        logger.error(f"{args.command}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        sys.stderr.write(f"internal error: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
