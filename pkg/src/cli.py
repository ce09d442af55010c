"""Command-line interface for netlab."""

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from src.database import Database
from src.dynamics import ClosureError, IntegratorConfig, NoReturnError
from src.lift import (
    LiftError,
    LiftSpec,
    PhaseLiftSpec,
    build_feedforward_lift,
    build_phase_lift,
    read_lift_file,
)
from src.models import read_model_file, read_params
from src.network import (
    Colouring,
    NetlabError,
    is_balanced,
    network_to_dict,
    quotient,
    read_network,
    validate_network,
)
from src.pipeline import Analyzer, inputs_digest
from src.reports import to_json, write_json
from src.stability import DecompositionError, markus_yamabe_demo, switching_demo

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NEGATIVE = 2
EXIT_INCONCLUSIVE = 3

logger = logging.getLogger("netlab.cli")


def _configure_logging(log_file: Optional[str] = None, verbose: bool = False, quiet: bool = False) -> None:
    """Configure logging to stderr and optionally to a file.

    Library modules log under the netlab.* hierarchy; stdout stays free for
    verdicts and JSON output.
    """
    root_logger = logging.getLogger("netlab")
    root_logger.setLevel(logging.DEBUG)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    fmt = logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)
    stderr_handler.setFormatter(fmt)
    root_logger.addHandler(stderr_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(fmt)
        root_logger.addHandler(file_handler)


def log(message: str):
    """Print a timestamped progress message to stderr."""
    timestamp = datetime.now().strftime("%H:%M:%S")
    print(f"[{timestamp}] {message}", file=sys.stderr)


def _emit(data, out: Optional[str]) -> None:
    if out:
        write_json(data, out)
    else:
        sys.stdout.write(to_json(data))


def _fail(message: str, code: int = EXIT_INPUT) -> int:
    print(f"Error: {message}", file=sys.stderr)
    return code


def cmd_check_balance(args) -> int:
    doc = read_network(args.network)
    violations = validate_network(doc.network)
    if violations:
        return _fail("; ".join(str(v) for v in violations))
    if doc.colouring is None:
        return _fail(f"{args.network}: no colouring to check")
    verdict = is_balanced(doc.network, doc.colouring)
    report = {"balanced": verdict.balanced}
    if not verdict.balanced:
        first, second = verdict.multisets
        report.update({
            "reason": verdict.reason,
            "witness": list(verdict.witness),
            "inputs": {
                str(m.node): [list(entry) for entry in m.entries] for m in (first, second)
            },
        })
    _emit(report, args.out)
    print("BALANCED" if verdict.balanced else "UNBALANCED", file=sys.stderr)
    return EXIT_OK if verdict.balanced else EXIT_NEGATIVE


def cmd_quotient(args) -> int:
    doc = read_network(args.network)
    violations = validate_network(doc.network)
    if violations:
        return _fail("; ".join(str(v) for v in violations))
    kappa = doc.colouring or Colouring.trivial(doc.network)
    verdict = is_balanced(doc.network, kappa)
    if not verdict.balanced:
        print(f"UNBALANCED: {verdict.reason} (witness {verdict.witness})", file=sys.stderr)
        return EXIT_NEGATIVE
    net, node_map = quotient(doc.network, kappa)
    data = network_to_dict(net)
    data["node_map"] = {str(c): q for c, q in node_map.items()}
    _emit(data, args.out)
    return EXIT_OK


def _lift_from_spec(doc, spec: LiftSpec | PhaseLiftSpec) -> dict:
    kappa = doc.colouring or Colouring.trivial(doc.network)
    if isinstance(spec, PhaseLiftSpec):
        net, colouring, phases = build_phase_lift(
            doc.network,
            spec.alpha,
            spec.module,
            spec.copies,
            rewire_internal=spec.rewire_internal,
            kappa=doc.colouring,
        )
        return network_to_dict(
            net, colouring, doc.network.node_ids, phases.to_strings(), phases.representatives
        )
    net, colouring = build_feedforward_lift(doc.network, kappa, spec)
    cpg = spec.cpg_nodes if spec.cpg_nodes is not None else doc.network.node_ids
    return network_to_dict(net, colouring, cpg)


def cmd_lift(args) -> int:
    doc = read_network(args.cpg)
    violations = validate_network(doc.network)
    if violations:
        return _fail("; ".join(str(v) for v in violations))
    raw = read_lift_file(args.spec)
    if args.command == "phase-lift" and "alpha" not in raw:
        return _fail(f"{args.spec}: a phase-lift spec needs an 'alpha' automorphism")
    try:
        spec = PhaseLiftSpec.from_dict(raw) if "alpha" in raw else LiftSpec.from_dict(raw)
    except LiftError as e:
        return _fail(f"{args.spec}: {e}")
    try:
        data = _lift_from_spec(doc, spec)
    except LiftError as e:
        return _fail(str(e), EXIT_NEGATIVE)
    _emit(data, args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = IntegratorConfig.from_env(rtol=args.rtol, atol=args.atol)
    doc = read_network(args.network)
    violations = validate_network(doc.network)
    if violations:
        return _fail("; ".join(str(v) for v in violations))
    model_file = read_model_file(args.model)
    params = read_params(args.params)

    db = Database(args.db) if args.db else None
    analyzer = Analyzer(config, on_progress=None if args.quiet else log, db=db)
    run_id = None
    if db is not None:
        run_id = db.start_run(
            "analyze", str(args.network), inputs_digest(args.network, args.model, args.params),
            args.seed, config.rtol, config.atol,
        )
    try:
        result = analyzer.run(
            doc, model_file, params,
            grid=args.grid, probe=args.probe, seed=args.seed, out_dir=args.out,
        )
        if db is not None:
            analyzer.record(run_id, result)
    except (NoReturnError, ClosureError, DecompositionError) as e:
        log(f"Analysis inconclusive: {e}")
        if db is not None:
            db.complete_run(run_id, "inconclusive", verdict="INCONCLUSIVE", error=str(e))
        print("INCONCLUSIVE")
        return EXIT_INCONCLUSIVE
    except KeyboardInterrupt:
        if db is not None:
            db.complete_run(run_id, "interrupted")
        raise
    except Exception as e:
        if db is not None:
            db.complete_run(run_id, "failed", error=str(e))
        raise
    finally:
        if db is not None:
            db.close()

    print(result.verdict + (" PARADOX" if result.paradox else ""))
    return EXIT_OK if result.floquet.lift_stable else EXIT_NEGATIVE


def cmd_counterexamples(args) -> int:
    config = IntegratorConfig.from_env(rtol=args.rtol, atol=args.atol)
    my = markus_yamabe_demo(config, seed=args.seed)
    sw = switching_demo(sigma=args.sigma, config=config)

    print("Pointwise-stable periodic linear system (period pi)")
    print(f"  trace A(t): expected -0.5, max deviation {my.extras['trace_deviation']:.2e}")
    print(f"  det A(t):   expected  0.5, max deviation {my.extras['det_deviation']:.2e}")
    print(f"  max Re eig A(t): {my.pointwise_max_real:.6f}")
    print(f"  growth of x(t) from (-1, 0): relative error {my.extras['growth_error']:.2e}")
    expected = my.extras["expected_multipliers"]
    for z, e in zip(my.multipliers, expected):
        print(f"  multiplier {z.real:+.6f}{z.imag:+.6f}i  |rho| = {abs(z):.6f}  expected {e:+.6f}")
    print(f"  paradox: {my.paradox}")

    print("Switching between two stable triangular matrices (period 2)")
    for z, (re, im) in zip(sw.multipliers, sw.extras["exact_multipliers"]):
        print(
            f"  multiplier {abs(z):.6f}  exact e^A e^B {abs(complex(re, im)):.6f}  "
            f"{'outside' if abs(z) > 1 else 'inside'} unit circle"
        )
    print(f"  max Re eig M(t): {sw.pointwise_max_real:.6f}")
    print(f"  paradox: {sw.paradox}")

    if args.out:
        write_json({"seed": args.seed, "markus_yamabe": my.to_dict(), "switching": sw.to_dict()}, args.out)
    return EXIT_OK


COMMANDS = {
    "check-balance": cmd_check_balance,
    "quotient": cmd_quotient,
    "lift": cmd_lift,
    "phase-lift": cmd_lift,
    "analyze": cmd_analyze,
    "counterexamples": cmd_counterexamples,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netlab",
        description="netlab - balanced colourings, feedforward lifts and their Floquet stability",
    )
    parser.add_argument("--quiet", "-q", action="store_true", help="Suppress progress messages")
    parser.add_argument("--verbose", "-v", action="store_true", help="Show debug diagnostics on stderr")
    parser.add_argument(
        "--log-file",
        default=None,
        help="Path to log file for diagnostics (step counts, returns, residuals)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-balance", help="Check that the file's colouring is balanced")
    p.add_argument("network")
    p.add_argument("--out", default=None, help="Write the JSON report here instead of stdout")

    p = sub.add_parser("quotient", help="Quotient network of a balanced colouring")
    p.add_argument("network")
    p.add_argument("--out", default=None)

    for name, text in (("lift", "Build a feedforward lift (or a phase lift)"),
                       ("phase-lift", "Build a phase lift under a cyclic symmetry")):
        p = sub.add_parser(name, help=text)
        p.add_argument("cpg")
        p.add_argument("spec")
        p.add_argument("--out", default=None)

    p = sub.add_parser("analyze", help="Floquet stability analysis of a lifted periodic orbit")
    p.add_argument("network")
    p.add_argument("model")
    p.add_argument("params")
    p.add_argument("--probe", action="store_true", help="Run empirical Liapunov probes")
    p.add_argument("--grid", type=int, default=200, help="Sample points for pointwise eigenvalues")
    p.add_argument("--seed", type=int, default=0, help="Random seed for probes")
    p.add_argument("--out", default=None, help="Directory for JSON reports and CSV trajectories")
    p.add_argument("--db", default=None, help="SQLite run ledger (optional)")
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--atol", type=float, default=None)

    p = sub.add_parser("counterexamples", help="Reproduce the two pointwise-stable counterexamples")
    p.add_argument("--sigma", type=float, default=1e-4, help="Switching ramp width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--atol", type=float, default=None)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    _configure_logging(log_file=args.log_file, verbose=args.verbose, quiet=args.quiet)

    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        log("Interrupted by user.")
        return EXIT_INPUT
    except json.JSONDecodeError as e:
        return _fail(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    except (NetlabError, OSError, KeyError, ValueError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
