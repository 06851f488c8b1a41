"""Command-line front end: scenario in, CSV/JSON tables out.

Subcommands: analyze, simulate, stability-region, optimize-backoff,
temporal-corr and verify. Every output records the tool version, the
resolved scenario with its hash, and the seed.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, backoff_opt, coupling, montecarlo, qbd, report, stability_region, tempcorr, verify
from .scenario import NetworkScenario, ScenarioError, SchemeConfig, load_scenario, to_linear

__all__ = ["main", "RunManifest", "parse_theta", "parse_grid"]

# value flags whose arguments may start with "-" (e.g. "--theta -10dB")
_VALUE_FLAGS = ("--theta", "--alpha", "--arrival", "--grid1", "--grid2", "--thetas")


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    scenario_path: str | None
    scheme: str
    axes: tuple[str, ...]
    out: str | None
    seed: int

    def check(self) -> None:
        if self.out not in (None, "-"):
            parent = Path(self.out).resolve().parent
            parent.mkdir(parents=True, exist_ok=True)
            if not parent.is_dir():
                raise CliError(f"--out: {parent} is not a directory")


def parse_theta(text: str) -> float:
    """SINR threshold in dB from ``-10dB``, ``-10`` (dB) or ``0.1lin``."""
    t = text.strip().lower()
    try:
        if t.endswith("db"):
            return float(t[:-2])
        if t.endswith("lin"):
            v = float(t[:-3])
            if v <= 0:
                raise ValueError
            return 10.0 * math.log10(v)
        return float(t)
    except ValueError:
        raise CliError(f"--theta: cannot parse {text!r}") from None


def _floats(text: str, parse=float) -> list[float]:
    return [parse(tok) for tok in text.split(",") if tok.strip()]


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return np.round(lo + step * np.arange(n), 10)
        return np.array(_floats(text))
    except ValueError:
        raise CliError(f"cannot parse grid {text!r}") from None


def _scenario(args) -> NetworkScenario:
    if args.scenario:
        try:
            s = load_scenario(Path(args.scenario).read_text())
        except OSError as exc:
            raise CliError(f"--scenario: {exc}") from None
        if not s.ramp_thresholds:
            s = s.replace(ramp_thresholds=NetworkScenario.reference_defaults().ramp_thresholds)
    else:
        s = NetworkScenario.reference_defaults()
    axes = getattr(args, "axes", ())
    if getattr(args, "theta", None) is not None and "theta" not in axes:
        s = s.with_theta_db(parse_theta(args.theta))
    if getattr(args, "alpha", None) is not None and "alpha" not in axes:
        s = s.with_alpha_tilde(float(args.alpha))
    if getattr(args, "arrival", None) is not None:
        s = s.replace(arrival_prob=float(args.arrival))
    return s


def _scheme(args) -> SchemeConfig:
    if args.scheme == "baseline":
        return SchemeConfig.baseline()
    if args.scheme == "ramping":
        return SchemeConfig.ramping()
    return SchemeConfig.backoff(args.backoff_n, args.backoff_q)


def _analysis_dict(res: coupling.SchemeAnalysis) -> dict:
    d = res.as_dict()
    d["p_first"] = res.p
    return d


def cmd_analyze(args) -> int:
    s = _scenario(args)
    scheme = _scheme(args)
    res = coupling.solve(s, scheme)
    out = report.provenance(s, args.seed, subcommand="analyze")
    out["result"] = _analysis_dict(res)
    report.write_json(args.out, out)
    return 0


def cmd_simulate(args) -> int:
    s = _scenario(args)
    scheme = _scheme(args)
    sim = montecarlo.SimConfig(
        window=args.window, measure_radius=args.measure_radius, warmup_slots=args.warmup,
        measured_slots=args.slots, realizations=args.realizations, rng_seed=args.seed,
        interference_radius=args.interference_radius,
    )
    stats = montecarlo.run(s, scheme, sim)
    out = report.provenance(s, args.seed, subcommand="simulate")
    out["simulation"] = {k: getattr(sim, k) for k in ("window", "measure_radius", "warmup_slots",
                                                      "measured_slots", "realizations", "interference_radius")}
    out["empirical"] = stats.as_dict()
    try:
        out["analytic"] = _analysis_dict(coupling.solve(s, scheme))
    except (coupling.CouplingError, qbd.QbdError) as exc:
        out["analytic"] = {"error": str(exc)}
    report.write_json(args.out, out)
    return 0


_DEFAULT_ALPHA_GRID = np.round(np.arange(0.5, 10.0 + 1e-9, 0.5), 10)


def _axes_for(fixed: str):
    if fixed == "alpha":
        return ("theta_db", stability_region.default_theta_grid()), ("arrival", stability_region.default_arrival_grid())
    if fixed == "theta_db":
        return ("alpha", _DEFAULT_ALPHA_GRID), ("arrival", stability_region.default_arrival_grid())
    if fixed == "arrival":
        return ("theta_db", stability_region.default_theta_grid()), ("alpha", _DEFAULT_ALPHA_GRID)
    raise CliError(f"--fix: unknown parameter {fixed!r}; use alpha, theta_db or arrival")


def _parse_fix(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise CliError("--fix: expected name=value, e.g. alpha=4")
    name, val = (t.strip() for t in text.split("=", 1))
    name = {"theta": "theta_db", "a": "arrival"}.get(name, name)
    value = parse_theta(val) if name == "theta_db" else float(val)
    return name, value


def cmd_stability_region(args) -> int:
    s = _scenario(args)
    scheme = _scheme(args)
    fixed = _parse_fix(args.fix)
    (n1, g1), (n2, g2) = _axes_for(fixed[0])
    if args.grid1:
        g1 = parse_grid(args.grid1)
    if args.grid2:
        g2 = parse_grid(args.grid2)
    res = stability_region.frontier_sweep(s, scheme, (n1, g1), (n2, g2), fixed)
    meta = report.provenance(s, args.seed, subcommand="stability-region", scheme=scheme.label())
    report.write_csv(args.out, ["scheme", "fixed", n1, n2, "stable", "p", "x0"], res.rows(), meta)
    failures = [pt for pt in res.points if pt.error]
    if args.frontier_out:
        report.write_csv(args.frontier_out, [n1, f"{n2}_boundary"], res.frontier, meta)
    if failures:
        print(f"warning: {len(failures)} grid points failed to solve", file=sys.stderr)
    return 0


def cmd_optimize_backoff(args) -> int:
    base = _scenario(args)
    alphas = _floats(args.alpha) if args.alpha else [base.alpha_tilde]
    thetas = _floats(args.theta, parse_theta) if args.theta else [base.theta_db]
    space = backoff_opt.BackoffSearchSpace()
    rows = []
    for at in alphas:
        for th in thetas:
            s = base.with_alpha_tilde(at).with_theta_db(th)
            baseline_stable = coupling.solve(s, SchemeConfig.baseline(), metrics=False).stable
            opt = backoff_opt.optimize(s, space)
            rows.append((at, th, "Stable" if baseline_stable else "Unstable", opt.n, opt.q,
                         opt.mean_backoff, int(opt.stable), opt.objective_kind, opt.objective))
            if args.surface_out:
                path = Path(args.surface_out)
                path = path.with_name(f"{path.stem}_a{at:g}_t{th:g}{path.suffix or '.csv'}")
                meta = report.provenance(s, args.seed, subcommand="optimize-backoff")
                report.write_csv(path, ["N", "q", "stable", "E_Wq", "D", "mean_backoff"],
                                 backoff_opt.surface_rows(opt), meta)
    meta = report.provenance(base, args.seed, subcommand="optimize-backoff")
    report.write_csv(args.out, ["alpha", "theta_db", "baseline", "N", "q", "mean_backoff",
                                "optimum_stable", "objective_kind", "objective"], rows, meta)
    return 0


def cmd_temporal_corr(args) -> int:
    s = _scenario(args)
    grid = parse_grid(args.thetas) if args.thetas else stability_region.default_theta_grid()
    cs = tempcorr.CorrelationScenario(s, args.activity)
    rows = []
    for th, marg, cond, gap, joint in tempcorr.correlation_report(cs, grid):
        quad = tempcorr.joint_failure_quadrature(cs.at_theta_db(th))
        rows.append((th, marg, cond, gap, joint, quad))
    meta = report.provenance(s, args.seed, subcommand="temporal-corr", activity=args.activity)
    report.write_csv(args.out, ["theta_db", "marginal_failure", "conditional_failure", "gap",
                                "joint_failure", "joint_failure_quadrature"], rows, meta)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(args.checks or None)
    rows = [(r.name, r.cases, r.max_error, r.tolerance, "pass" if r.passed else "FAIL") for r in results]
    meta = report.provenance(None, args.seed, subcommand="verify")
    report.write_csv(args.out, ["check", "cases", "max_error", "tolerance", "status"], rows, meta)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def _common(p: argparse.ArgumentParser, scheme=True) -> None:
    p.add_argument("--scenario", help="scenario file (key = value [unit] lines)")
    if scheme:
        p.add_argument("--scheme", choices=("baseline", "ramping", "backoff"), default="baseline")
        p.add_argument("--backoff-n", type=int, default=0, help="deterministic backoff slots N")
        p.add_argument("--backoff-q", type=float, default=1.0, help="geometric exit probability q")
    p.add_argument("--theta", help="SINR threshold, e.g. -10dB")
    p.add_argument("--alpha", help="devices per BS per code")
    p.add_argument("--arrival", type=float, help="per-slot arrival probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"iotstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="coupled queue/interference solve (JSON)")
    _common(p)
    p.set_defaults(func=cmd_analyze, axes=())

    p = sub.add_parser("simulate", help="Monte Carlo run with analytic overlay (JSON)")
    _common(p)
    d = montecarlo.SimConfig()
    p.add_argument("--realizations", type=int, default=d.realizations)
    p.add_argument("--slots", type=int, default=d.measured_slots, help="measured slots per realization")
    p.add_argument("--warmup", type=int, default=d.warmup_slots)
    p.add_argument("--window", type=float, default=d.window, help="side of the square window [km]")
    p.add_argument("--measure-radius", type=float, default=d.measure_radius)
    p.add_argument("--interference-radius", type=float, default=d.interference_radius)
    p.set_defaults(func=cmd_simulate, axes=())

    p = sub.add_parser("stability-region", help="stability grid and frontier (CSV)")
    _common(p)
    p.add_argument("--fix", default="alpha=4", help="parameter held fixed, e.g. alpha=4")
    p.add_argument("--grid1", help="first sweep axis grid (start:stop:step or list)")
    p.add_argument("--grid2", help="second sweep axis grid")
    p.add_argument("--frontier-out", help="also write the frontier polyline here")
    p.set_defaults(func=cmd_stability_region, axes=("grid1", "grid2"))

    p = sub.add_parser("optimize-backoff", help="optimal backoff (N, q) per scenario (CSV)")
    _common(p, scheme=False)
    p.add_argument("--surface-out", help="also write the full (N, q) surface per row")
    p.set_defaults(func=cmd_optimize_backoff, scheme="backoff", axes=("alpha", "theta"))

    p = sub.add_parser("temporal-corr", help="two-slot failure correlation (CSV)")
    _common(p, scheme=False)
    p.add_argument("--activity", type=float, default=0.5, help="per-slot interferer activity")
    p.add_argument("--thetas", help="threshold grid in dB (start:stop:step or list)")
    p.set_defaults(func=cmd_temporal_corr, scheme="baseline", axes=("thetas",))

    p = sub.add_parser("verify", help="oracle cross-checks (CSV, exit 1 on failure)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--checks", nargs="*", choices=sorted(verify.CHECKS))
    p.set_defaults(func=cmd_verify, scenario=None, scheme="-", axes=())
    return parser


def _glue_values(argv):
    """Turn ``--theta -10dB`` into ``--theta=-10dB`` so argparse accepts it."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_glue_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = RunManifest(args.command, args.scenario, args.scheme, tuple(args.axes), args.out, args.seed)
    try:
        manifest.check()
        return args.func(args)
    except (CliError, ScenarioError, ValueError, ArithmeticError, KeyError, OSError) as exc:
        print(f"iotstab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
