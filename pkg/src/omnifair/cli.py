"""Command-line front end.

Ingests JSON source specs, runs the solve / fairness / verification
pipelines, and emits machine-readable JSON reports.  Exact rationals are
serialized losslessly as "p/q" strings; reports are byte-stable across runs
for a fixed config (seed included) apart from the timing block.

Exit codes: 0 success, 2 parse or flag error, 3 verification failure,
4 numerical non-convergence.  The ``OMNIFAIR_THREADS`` environment variable
caps the internal worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .egalitarian import (
    ConvergenceError,
    SplitError,
    egalitarian_continuous,
    egalitarian_decomposed,
    packet_split_plan,
    sda,
)
from .omniscience import (
    DecompositionError,
    GameContext,
    RateVector,
    core_membership,
    decompose,
    min_sum_rate,
)
from .setfn import SetFunction, is_submodular
from .shapley import shapley_approx, shapley_decomposed, shapley_exact
from .sources import SourceSpecError, load_source

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VERIFY = 3
EXIT_NONCONVERGENCE = 4

#: Submodularity verification enumerates subset pairs; skip beyond this size.
VERIFY_SUBMODULAR_LIMIT = 12


class ConfigError(ValueError):
    """A flag combination or inline value is invalid."""


@dataclass
class RunConfig:
    """Echoed verbatim (minus derived fields) into every report."""

    command: str
    input: str | None = None
    output: str | None = None
    mode: str | None = None
    K: int | None = None
    seed: int | None = None
    permutations: int | None = None
    weights: dict | None = None
    tol: float | None = None
    trace: bool = False
    trace_csv: str | None = None
    rates: dict | None = None

    def echo(self) -> dict:
        return {
            "command": self.command,
            "input": self.input,
            "output": self.output,
            "mode": self.mode,
            "K": self.K,
            "seed": self.seed,
            "permutations": self.permutations,
            "weights": None if self.weights is None
            else {str(u): emit_value(v) for u, v in sorted(self.weights.items())},
            "tol": self.tol,
            "trace": self.trace,
            "trace_csv": self.trace_csv,
            "rates": None if self.rates is None
            else {str(u): emit_value(v) for u, v in sorted(self.rates.items())},
        }


def emit_value(value):
    """Rationals as 'p/q' strings, floats as JSON numbers."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return float(value)


def parse_rational(raw) -> Fraction:
    if isinstance(raw, bool):
        raise ConfigError(f"not a rational: {raw!r}")
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        return Fraction(raw)
    if isinstance(raw, str):
        try:
            return Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"not a rational: {raw!r}") from exc
    raise ConfigError(f"not a rational: {raw!r}")


def emit_rates(r: RateVector) -> dict:
    return {str(u): emit_value(r[u]) for u in r.users}


def _parse_user_map(raw: str, what: str) -> dict[int, Fraction]:
    """Parse an inline JSON object (or @file reference) of user -> rational."""
    text = raw
    if raw.startswith("@"):
        path = Path(raw[1:])
        if not path.exists():
            raise ConfigError(f"no such {what} file: {path}")
        text = path.read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid {what} JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a JSON object of user -> value")
    out = {}
    for key, value in obj.items():
        try:
            user = int(key)
        except ValueError:
            raise ConfigError(f"{what} key {key!r} is not a user id") from None
        out[user] = parse_rational(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omnifair",
        description="Minimum sum-rate and fair rate allocation for communication for omniscience")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_input=True):
        p.add_argument("--input", required=needs_input, help="JSON source spec path")
        p.add_argument("--output", help="report path (default: stdout)")

    p_solve = sub.add_parser("solve", help="minimum sum-rate, fundamental partition, one core vertex")
    add_common(p_solve)

    p_shap = sub.add_parser("shapley", help="Shapley-value rate allocation")
    add_common(p_shap)
    p_shap.add_argument("--mode", choices=["exact", "approx", "decomposed"], default="exact")
    p_shap.add_argument("--seed", type=int)
    p_shap.add_argument("--permutations", type=int, help="sample size for approx modes")

    p_eg = sub.add_parser("egalitarian", help="(fractional) egalitarian rate allocation")
    add_common(p_eg)
    p_eg.add_argument("--mode", choices=["sda", "continuous", "decomposed"], default="sda")
    p_eg.add_argument("--K", type=int, help="grid denominator (default: |P*| - 1)")
    p_eg.add_argument("--weights", help="JSON object user -> positive weight, or @file")
    p_eg.add_argument("--tol", type=float, help="duality-gap tolerance for the continuous solver")
    p_eg.add_argument("--trace", action="store_true", help="embed the iterate trace in the report")
    p_eg.add_argument("--trace-csv", help="write iteration,l1_error,objective CSV here")
    p_eg.add_argument("--rates", help="initial point as JSON object user -> rational, or @file")

    p_ver = sub.add_parser("verify", help="submodularity, decomposition, and core-membership checks")
    add_common(p_ver)
    p_ver.add_argument("--rates", help="rate vector to test, JSON object or @file")

    p_split = sub.add_parser("split-plan", help="integer chunk rates for a fractional rate vector")
    add_common(p_split, needs_input=False)
    p_split.add_argument("--rates", required=True, help="rate vector, JSON object or @file")
    p_split.add_argument("--K", type=int, help="chunk count (default: minimal valid)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    for name in ("input", "output", "mode", "K", "seed", "permutations", "tol", "trace", "trace_csv"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "weights", None):
        cfg.weights = _parse_user_map(args.weights, "weights")
    if getattr(args, "rates", None):
        cfg.rates = _parse_user_map(args.rates, "rates")
    return cfg


def _rate_vector_from(cfg_rates: dict, users: tuple[int, ...], what: str) -> RateVector:
    missing = set(users) - set(cfg_rates)
    unknown = set(cfg_rates) - set(users)
    if missing or unknown:
        raise ConfigError(
            f"{what} must cover exactly the users {list(users)}; "
            f"missing {sorted(missing)}, unknown {sorted(unknown)}")
    return RateVector(cfg_rates)


def _solution_record(ctx: GameContext) -> dict:
    return {
        "R_CO": emit_value(ctx.min_sum_rate),
        "fundamental_partition": ctx.fundamental_partition.to_lists(),
        "I": emit_value(ctx.shared_randomness),
        "vertex": emit_rates(ctx.vertex),
    }


def _run_shapley(cfg: RunConfig, ctx: GameContext) -> dict:
    mode = cfg.mode or "exact"
    if mode == "exact":
        vector = shapley_exact(ctx)
    elif mode == "approx":
        if cfg.seed is None:
            raise ConfigError("shapley --mode approx needs --seed")
        vector = shapley_approx(ctx, count=cfg.permutations, seed=cfg.seed)
    else:
        if cfg.seed is None:
            vector = shapley_decomposed(ctx, mode="exact")
        else:
            vector = shapley_decomposed(ctx, mode="approx", count=cfg.permutations, seed=cfg.seed)
    return {
        "method": "shapley",
        "mode": mode,
        "seed": cfg.seed,
        "permutations": cfg.permutations,
        "vector": emit_rates(vector),
    }


def _run_egalitarian(cfg: RunConfig, ctx: GameContext) -> dict:
    mode = cfg.mode or "sda"
    weights = cfg.weights
    record: dict = {"method": "egalitarian", "mode": mode, "K": cfg.K,
                    "weights": None if weights is None
                    else {str(u): emit_value(v) for u, v in sorted(weights.items())}}
    if mode == "continuous":
        vector = egalitarian_continuous(ctx, weights, tol=cfg.tol or 1e-9)
        record["iterations"] = None
    elif mode == "decomposed":
        vector = egalitarian_decomposed(ctx, weights=weights, K=cfg.K, tol=cfg.tol or 1e-9)
        record["iterations"] = None
    else:
        r0 = _rate_vector_from(cfg.rates, ctx.users, "--rates") if cfg.rates else None
        try:
            vector, trace = sda(ctx, r0=r0, K=cfg.K, weights=weights)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        record["iterations"] = trace.iterations
        record["warnings"] = trace.warnings
        if trace.locally_optimal is not None:
            record["locally_optimal"] = trace.locally_optimal
            record["left_core"] = trace.left_core
        if cfg.trace:
            record["trace"] = {
                "iterates": [emit_rates(it) for it in trace.iterates],
                "pairs": [list(pair) for pair in trace.pairs],
                "objectives": [emit_value(v) for v in trace.objectives],
            }
        if cfg.trace_csv:
            _write_trace_csv(Path(cfg.trace_csv), trace, vector)
    record["vector"] = emit_rates(vector)
    return record


def _write_trace_csv(path: Path, trace, endpoint: RateVector) -> None:
    lines = ["iteration,l1_error,objective"]
    for n, (iterate, obj) in enumerate(zip(trace.iterates, trace.objectives)):
        lines.append(f"{n},{float(iterate.l1_distance(endpoint))},{float(obj)}")
    path.write_text("\n".join(lines) + "\n")


def _run_verify(cfg: RunConfig, ctx: GameContext) -> list[dict]:
    verdicts = []
    source = ctx.source
    if len(source.users) <= VERIFY_SUBMODULAR_LIMIT:
        entropy = SetFunction(source.ground, source.entropy)
        ok, witness = is_submodular(entropy, tol=source.tol)
        verdicts.append({
            "check": "entropy_submodular",
            "pass": ok,
            "witness": None if ok else f"f({sorted(witness[0])}) + f({sorted(witness[1])}) violates submodularity",
        })
    else:
        verdicts.append({"check": "entropy_submodular", "pass": True,
                         "witness": f"skipped: more than {VERIFY_SUBMODULAR_LIMIT} users"})
    try:
        decompose(ctx)
        verdicts.append({"check": "fundamental_decomposition", "pass": True, "witness": None})
    except DecompositionError as exc:
        verdicts.append({"check": "fundamental_decomposition", "pass": False, "witness": str(exc)})
    ok, witness = core_membership(ctx, ctx.vertex)
    verdicts.append({"check": "solver_vertex_in_core", "pass": ok, "witness": witness})
    if cfg.rates is not None:
        r = _rate_vector_from(cfg.rates, ctx.users, "--rates")
        ok, witness = core_membership(ctx, r)
        verdicts.append({"check": "rate_vector_in_core", "pass": ok, "witness": witness})
    return verdicts


def run(cfg: RunConfig) -> tuple[dict, int]:
    """Execute one command; returns (report, exit_status)."""
    started = time.perf_counter()
    report: dict = {"config": cfg.echo()}
    status = EXIT_OK

    if cfg.command == "split-plan":
        rates = RateVector(cfg.rates)
        plan = packet_split_plan(rates, K=cfg.K)
        report["split_plan"] = {
            "chunks_per_packet": plan.chunks_per_packet,
            "chunk_rates": {str(u): n for u, n in sorted(plan.chunk_rates.items())},
        }
    else:
        source = load_source(cfg.input)
        solve_started = time.perf_counter()
        ctx = min_sum_rate(source)
        solve_seconds = time.perf_counter() - solve_started
        report["solution"] = _solution_record(ctx)
        if cfg.command == "shapley":
            report["fairness"] = _run_shapley(cfg, ctx)
        elif cfg.command == "egalitarian":
            report["fairness"] = _run_egalitarian(cfg, ctx)
        elif cfg.command == "verify":
            verdicts = _run_verify(cfg, ctx)
            report["verification"] = verdicts
            if not all(v["pass"] for v in verdicts):
                status = EXIT_VERIFY
        report.setdefault("timings", {})["solve_s"] = solve_seconds

    report.setdefault("timings", {})["total_s"] = time.perf_counter() - started
    return report, status


def _emit(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}}, getattr(args, "output", None))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report, status = run(cfg)
    except (SourceSpecError, ConfigError, ValueError) as exc:
        error: dict = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SplitError):
            error["offending_users"] = exc.offenders
            error["minimal_valid_K"] = exc.minimal_chunks
        _emit({"config": cfg.echo(), "error": error}, cfg.output)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConvergenceError as exc:
        _emit({"config": cfg.echo(), "error": {"type": type(exc).__name__, "message": str(exc)}}, cfg.output)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    _emit(report, cfg.output)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
