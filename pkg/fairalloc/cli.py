"""
fairalloc CLI entry point.

Registered as a console_scripts entry point in pyproject.toml:
    fairalloc = "fairalloc.cli:main"

Subcommands:
    fairalloc generate    - Draw a random instance (IC or SPUP culture)
    fairalloc check       - Judge an allocation under SEF / AEF / SAEF
    fairalloc solve       - Find a fair allocation or house allocation
    fairalloc reduce      - Translate a 3-CNF formula into a house-allocation instance
    fairalloc experiment  - Existence-frequency experiments, CSV output
    fairalloc types       - Print the resource-type table (optionally an LP dump)

Exit status: 0 success or fair, 1 unfair / no allocation / not equivalent,
2 on any input, precondition or budget error (message on stderr as "ERROR: ...").
"""
from __future__ import annotations

import argparse
import logging
import sys
import threading
from pathlib import Path
from typing import Sequence

from fairalloc.config_loader import Settings, load_settings
from fairalloc.errors import FairAllocError, PreconditionError
from fairalloc.exact import find_allocation_exact, find_house_exact
from fairalloc.experiment import ExperimentConfig, run_experiment
from fairalloc.gen import Culture, GenConfig, gen_instance
from fairalloc.hardness import parse_dimacs, reduce_3sat, verify_reduction
from fairalloc.ilp import (
    DepthFirstBackend,
    compute_types,
    decode_allocation,
    encode_aef_ip,
    encode_saef_ip,
    encode_sef_ip,
    solve_ip,
)
from fairalloc.model import (
    ALL_CONCEPTS,
    Allocation,
    FairnessConcept,
    Instance,
    ProblemKind,
    envy_report,
    is_complete,
    is_fair,
    is_house,
)
from fairalloc.serialization import (
    parse_allocation,
    parse_instance,
    serialize_allocation,
    serialize_gadget_map,
    serialize_instance,
)
from fairalloc.specialized import (
    PreferenceClass,
    aef_identical01,
    classify_preferences,
    saef_house_01,
    saef_house_identical_dp,
    saef_identical01_dp,
    sef_identical01,
)

STRATEGIES = ("auto", "exact", "dp", "ilp", "matching")
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

def setup_logging(level: int | str = logging.WARNING, log_file: Path | None = None) -> None:
    """Log to stderr, and to log_file when given. Uncaught exceptions are logged as CRITICAL."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)

    def _log_uncaught(exc_type, exc_value, exc_tb):
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_tb)
            return
        logging.critical("Uncaught exception", exc_info=(exc_type, exc_value, exc_tb))

    sys.excepthook = _log_uncaught

    def _thread_excepthook(args):
        if args.exc_type is SystemExit:
            return
        logging.critical(
            "Unhandled exception in thread '%s'",
            args.thread.name if args.thread else "unknown",
            exc_info=(args.exc_type, args.exc_value, args.exc_traceback),
        )

    threading.excepthook = _thread_excepthook


def _log_level(verbose: int, settings: Settings) -> int | str:
    if verbose >= 2:
        return logging.DEBUG
    if verbose == 1:
        return logging.INFO
    return settings.log_level


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _range(text: str) -> tuple[int, int]:
    """'lo-hi' -> (lo, hi)."""
    try:
        lo, hi = (int(part) for part in text.split("-", 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO-HI, got {text!r}") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairalloc",
        description="fairalloc: exact solvers for weighted envy-free allocation (SEF / AEF / SAEF)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    parser.add_argument("--log-file", type=Path, default=None, help="Also write the log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    concept_kw = dict(
        type=FairnessConcept, choices=list(FairnessConcept), default=FairnessConcept.SAEF,
        metavar="{sef,aef,saef}", help="Fairness concept (default: saef)",
    )
    kind_kw = dict(
        type=ProblemKind, choices=list(ProblemKind), default=ProblemKind.ALLOCATION,
        metavar="{allocation,house}", help="Complete allocation or house allocation (default: allocation)",
    )

    # fairalloc generate
    gen_parser = subparsers.add_parser("generate", help="Draw a random instance and write it as JSON")
    gen_parser.add_argument("--n", type=int, required=True, help="Number of agents")
    gen_parser.add_argument("--m", type=int, required=True, help="Number of resources")
    gen_parser.add_argument("--culture", type=Culture, choices=list(Culture), default=Culture.IC, metavar="{ic,spup}")
    gen_parser.add_argument("--value-range", type=_range, default=(1, 10_000), help="Utility range LO-HI")
    gen_parser.add_argument("--weight-range", type=_range, default=(1, 100), help="Weight range LO-HI")
    gen_parser.add_argument("--seed", type=int, default=None)
    gen_parser.add_argument("--out", type=Path, default=None, help="Output file (default: stdout)")
    gen_parser.set_defaults(func=_cmd_generate)

    # fairalloc check
    check_parser = subparsers.add_parser("check", help="Report envy of an allocation under a concept")
    check_parser.add_argument("instance", type=Path)
    check_parser.add_argument("allocation", type=Path)
    check_parser.add_argument("--concept", **concept_kw)
    check_parser.set_defaults(func=_cmd_check)

    # fairalloc solve
    solve_parser = subparsers.add_parser("solve", help="Find a fair allocation, or report that none exists")
    solve_parser.add_argument("instance", type=Path)
    solve_parser.add_argument("--concept", **concept_kw)
    solve_parser.add_argument("--kind", **kind_kw)
    solve_parser.add_argument("--strategy", choices=STRATEGIES, default="auto")
    solve_parser.add_argument("--leaf-budget", type=int, default=None)
    solve_parser.add_argument("--node-budget", type=int, default=None)
    solve_parser.add_argument("--json", action="store_true", help="Print the witness as an allocation document")
    solve_parser.set_defaults(func=_cmd_solve)

    # fairalloc reduce
    reduce_parser = subparsers.add_parser("reduce", help="Reduce a DIMACS 3-CNF formula to SAEF house allocation")
    reduce_parser.add_argument("cnf", type=Path)
    reduce_parser.add_argument("--out", type=Path, default=None, help="Instance output file (default: stdout)")
    reduce_parser.add_argument("--gadget-out", type=Path, default=None, help="Write the gadget map here")
    reduce_parser.add_argument("--big-m", type=int, default=None, help="Large constant (default: 2n + 4c + 2)")
    reduce_parser.add_argument("--verify", action="store_true", help="Check satisfiability against fair-allocation existence")
    reduce_parser.add_argument("--leaf-budget", type=int, default=None)
    reduce_parser.set_defaults(func=_cmd_reduce)

    # fairalloc experiment
    exp_parser = subparsers.add_parser("experiment", help="Existence-frequency experiment over random instances")
    exp_parser.add_argument("--n", type=int, nargs="+", default=[5, 6, 7, 8], dest="n_values")
    exp_parser.add_argument("--m", type=int, default=8)
    exp_parser.add_argument("--trials", type=int, default=None)
    exp_parser.add_argument("--cultures", type=Culture, choices=list(Culture), nargs="+", default=list(Culture),
                            metavar="{ic,spup}")
    exp_parser.add_argument("--weight-range", type=_range, nargs="+", default=[(1, 100), (101, 200)], dest="weight_ranges")
    exp_parser.add_argument("--value-range", type=_range, default=(1, 10_000))
    exp_parser.add_argument("--concept", type=FairnessConcept, choices=list(FairnessConcept), nargs="+", metavar="{sef,aef,saef}",
                            default=list(ALL_CONCEPTS), dest="concepts")
    exp_parser.add_argument("--kind", **kind_kw)
    exp_parser.add_argument("--seed", type=int, default=None)
    exp_parser.add_argument("--jobs", type=int, default=None)
    exp_parser.add_argument("--leaf-budget", type=int, default=None)
    exp_parser.add_argument("--out", type=Path, default=None, help="CSV output file (default: stdout)")
    exp_parser.add_argument("--repro-dir", type=Path, default=Path("fairalloc-repro"))
    exp_parser.add_argument("--no-cross-check", action="store_true", help="Skip polynomial-solver cross-checks")
    exp_parser.add_argument("--no-progress", action="store_true")
    exp_parser.set_defaults(func=_cmd_experiment)

    # fairalloc types
    types_parser = subparsers.add_parser("types", help="Print the resource-type table of an instance")
    types_parser.add_argument("instance", type=Path)
    types_parser.add_argument("--lp", type=Path, default=None, help="Write the integer program in LP format")
    types_parser.add_argument("--concept", **concept_kw)
    types_parser.set_defaults(func=_cmd_types)

    return parser


def _pick(value, default):
    return default if value is None else value


def _read_instance(path: Path) -> Instance:
    return parse_instance(path.read_text(encoding="utf-8"))


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote {out}")


# ---------------------------------------------------------------------------
# generate / check / types
# ---------------------------------------------------------------------------

def _cmd_generate(args: argparse.Namespace) -> int:
    config = GenConfig(
        n=args.n,
        m=args.m,
        culture=args.culture,
        value_range=args.value_range,
        weight_range=args.weight_range,
        seed=_pick(args.seed, args.settings.seed),
    )
    instance = gen_instance(config)
    meta = {
        "culture": config.culture.value,
        "seed": config.seed,
        "value_range": list(config.value_range),
        "weight_range": list(config.weight_range),
    }
    _emit(serialize_instance(instance, meta=meta), args.out)
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    instance = _read_instance(args.instance)
    allocation = parse_allocation(args.allocation.read_text(encoding="utf-8"))
    report = envy_report(instance, allocation, args.concept)
    print(f"allocation: {allocation.describe()}")
    print(f"complete: {'yes' if is_complete(instance, allocation) else 'no'}")
    print(f"house: {'yes' if is_house(instance, allocation) else 'no'}")
    print(f"{args.concept.name}: {'fair' if report.is_fair else 'NOT fair'}")
    if not report.is_fair:
        print(report.render())
    return 0 if report.is_fair else 1


def _cmd_types(args: argparse.Namespace) -> int:
    instance = _read_instance(args.instance)
    table = compute_types(instance)
    print(table.render())
    if args.lp is not None:
        model = _ENCODERS[args.concept](instance, table)
        _emit(model.to_lp(), args.lp)
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

_ENCODERS = {
    FairnessConcept.SEF: encode_sef_ip,
    FairnessConcept.AEF: encode_aef_ip,
    FairnessConcept.SAEF: encode_saef_ip,
}

_ALLOCATION_DP = {
    FairnessConcept.SEF: sef_identical01,
    FairnessConcept.AEF: aef_identical01,
    FairnessConcept.SAEF: saef_identical01_dp,
}


def auto_strategy(pc: PreferenceClass, concept: FairnessConcept, kind: ProblemKind) -> str:
    """Polynomial solver when the preference class admits one, exhaustive search otherwise."""
    if kind is ProblemKind.ALLOCATION:
        return "dp" if pc.is_identical and pc.is_01 else "exact"
    if concept is FairnessConcept.SAEF and pc.is_01:
        return "matching"
    if concept is FairnessConcept.SAEF and pc.is_identical:
        return "dp"
    return "exact"


def solve(
    instance: Instance,
    concept: FairnessConcept,
    kind: ProblemKind = ProblemKind.ALLOCATION,
    strategy: str = "auto",
    *,
    leaf_budget: int | None = None,
    node_budget: int | None = None,
) -> Allocation | None:
    """
    Dispatch to one solver and verify its witness.

    Raises:
        PreconditionError: if strategy does not apply to the instance, concept or kind.
        ShapeError, BudgetExceededError: from the chosen solver.
    """
    settings = Settings()
    leaf_budget = _pick(leaf_budget, settings.leaf_budget)
    node_budget = _pick(node_budget, settings.node_budget)
    if strategy == "auto":
        strategy = auto_strategy(classify_preferences(instance), concept, kind)
        logging.info("auto strategy chose %r for %s %s.", strategy, concept.name, kind.value)

    if kind is ProblemKind.HOUSE:
        witness = _solve_house(instance, concept, strategy, leaf_budget)
    else:
        witness = _solve_allocation(instance, concept, strategy, leaf_budget, node_budget)

    if witness is not None:
        shape_ok = is_house(instance, witness) if kind is ProblemKind.HOUSE else is_complete(instance, witness)
        if not shape_ok or not is_fair(instance, witness, concept):
            raise RuntimeError(f"internal error: {strategy} witness failed verification: {witness.describe()}")
    return witness


def _solve_house(instance: Instance, concept: FairnessConcept, strategy: str, leaf_budget: int) -> Allocation | None:
    if strategy == "exact":
        return find_house_exact(instance, concept, leaf_budget=leaf_budget)
    if strategy == "matching":
        if concept is FairnessConcept.AEF:
            raise PreconditionError("the matching strategy decides SEF and SAEF house allocation only")
        return saef_house_01(instance)
    if strategy == "dp":
        if concept is not FairnessConcept.SAEF:
            raise PreconditionError("the dp strategy for house allocation decides SAEF only")
        return saef_house_identical_dp(instance)
    raise PreconditionError(f"the {strategy} strategy does not apply to house allocation")


def _solve_allocation(
    instance: Instance, concept: FairnessConcept, strategy: str, leaf_budget: int, node_budget: int
) -> Allocation | None:
    if strategy == "exact":
        return find_allocation_exact(instance, concept, leaf_budget=leaf_budget)
    if strategy == "dp":
        return _ALLOCATION_DP[concept](instance)
    if strategy == "ilp":
        table = compute_types(instance)
        assignment = solve_ip(_ENCODERS[concept](instance, table), DepthFirstBackend(node_budget))
        return None if assignment is None else decode_allocation(instance, table, assignment)
    raise PreconditionError(f"the {strategy} strategy applies to house allocation only")


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = _read_instance(args.instance)
    witness = solve(
        instance,
        args.concept,
        args.kind,
        args.strategy,
        leaf_budget=_pick(args.leaf_budget, args.settings.leaf_budget),
        node_budget=_pick(args.node_budget, args.settings.node_budget),
    )
    if witness is None:
        print("none")
        return 1
    if args.json:
        print(serialize_allocation(witness), end="")
    else:
        print(witness.describe())
    return 0


# ---------------------------------------------------------------------------
# reduce / experiment
# ---------------------------------------------------------------------------

def _cmd_reduce(args: argparse.Namespace) -> int:
    formula = parse_dimacs(args.cnf.read_text(encoding="utf-8"))
    instance, gadget = reduce_3sat(formula, args.big_m)
    meta = {"source": args.cnf.name, "variables": formula.num_vars, "clauses": len(formula.clauses), "big_m": gadget.big_m}
    _emit(serialize_instance(instance, meta=meta), args.out)
    if args.gadget_out is not None:
        _emit(serialize_gadget_map(gadget), args.gadget_out)
    if args.verify:
        equivalent = verify_reduction(
            formula, big_m=args.big_m, leaf_budget=_pick(args.leaf_budget, args.settings.leaf_budget)
        )
        print(f"equivalent: {'yes' if equivalent else 'no'}")
        return 0 if equivalent else 1
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    settings: Settings = args.settings
    config = ExperimentConfig(
        n_values=args.n_values,
        m=args.m,
        trials=_pick(args.trials, settings.trials),
        cultures=args.cultures,
        weight_ranges=args.weight_ranges,
        value_range=args.value_range,
        concepts=args.concepts,
        kind=args.kind,
        seed=_pick(args.seed, settings.seed),
        jobs=_pick(args.jobs, settings.jobs),
        leaf_budget=_pick(args.leaf_budget, settings.leaf_budget),
        cross_check=not args.no_cross_check,
        repro_dir=args.repro_dir,
    )
    report = run_experiment(config, progress=not args.no_progress)
    _emit(report.to_csv(), args.out)
    print(report.comparison())
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, run the subcommand and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = load_settings()
    setup_logging(_log_level(args.verbose, settings), args.log_file)
    args.settings = settings
    try:
        return args.func(args)
    except (FairAllocError, ValueError, OSError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2


def main(argv: Sequence[str] | None = None) -> None:
    """Main entry point for the `fairalloc` CLI command."""
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
