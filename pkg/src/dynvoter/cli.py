"""Reproducible experiment runner.

Every experiment writes a raw CSV (``<out>.csv``) and a JSON summary
(``<out>.json``) carrying ``schema``, the resolved parameters, point
estimates and a list of named gates.  Outputs are a pure function of
(config, seed): replica r draws from the stream derived from (seed, r),
so ``--threads`` changes wall time only.

Exit codes: 0 all gates pass, 1 some gate failed, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import fw as fw_mod
from . import simulate, stats, theta as theta_mod, toymodel
from .errors import NumericalFailure, ParameterError
from .runner import default_threads

SCHEMA_VERSION = 1

EXPERIMENTS = (
    "theta-table",
    "sim-meeting",
    "sim-voter",
    "sim-toy",
    "duality-check",
    "fw",
    "edge-tail",
    "homogenisation",
    "consensus",
)


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 1
    threads: int = 1
    out: str | None = None


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def _gate_below(name: str, value: float, threshold: float) -> Gate:
    return Gate(name=name, value=float(value), threshold=float(threshold), passed=bool(value < threshold))


def _require(params: dict, *names: str) -> None:
    missing = [k for k in names if params.get(k) is None]
    if missing:
        raise ParameterError(f"missing required parameter(s): {', '.join(missing)}")


def _sim_degree(params: dict) -> int:
    d = int(params["d"])
    if d < 3:
        raise ParameterError(f"simulation experiments require d >= 3, got {d}")
    return d


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# experiment implementations: each returns (csv_header, csv_rows, estimates, gates)
# ---------------------------------------------------------------------------


def _run_theta_table(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "d", "nu")
    tol = float(p.get("tol") or 1e-12)
    header = ["d", "nu", "beta", "rho", "delta0", "theta", "depth", "residual"]
    rows = []
    max_residual = 0.0
    bounds_ok = True
    for d in p["d"]:
        for nu in p["nu"]:
            consts = theta_mod.make_consts(int(d), float(nu))
            delta0, depth = theta_mod.delta_cf(consts, tol)
            th = 1.0 - delta0 / consts.beta
            residual = theta_mod.cf_residual(consts, tol)
            max_residual = max(max_residual, residual)
            static = (d - 2.0) / (d - 1.0)
            if not (static - 1e-12 <= th < 1.0):
                bounds_ok = False
            rows.append([d, nu, consts.beta, consts.rho, delta0, th, depth, residual])
    estimates = {"rows": len(rows), "max_residual": max_residual}
    gates = [
        _gate_below("theta-cross-check", max_residual, 10.0 * tol),
        Gate("theta-bounds", 1.0 if bounds_ok else 0.0, 1.0, bounds_ok),
    ]
    return header, rows, estimates, gates


def _run_sim_meeting(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "reps")
    n, d, nu, reps = int(p["n"]), _sim_degree(p), float(p["nu"]), int(p["reps"])
    start = p.get("start") or "stationary-pair"
    if start not in ("stationary-pair", "edge"):
        raise ParameterError(f"start must be stationary-pair or edge, got {start!r}")
    results = simulate.meeting_experiment(
        n, d, nu, start, reps, cfg.seed, cfg.threads, t_cap=p.get("t_cap")
    )
    th = theta_mod.theta(theta_mod.make_consts(d, nu))
    header = ["replica", "tau", "censored"]
    rows = [[i, r.tau, int(r.censored)] for i, r in enumerate(results)]
    scaled = np.asarray([r.tau / n for r in results if not r.censored])
    censor_frac = 1.0 - scaled.size / reps
    positive = scaled[scaled > 0]
    rate, ci = stats.exp_rate_fit(positive)
    ks = stats.ks_exponential(scaled, 2.0 * th)
    estimates = {
        "theta": th,
        "mean_tau_over_n": float(scaled.mean()) if scaled.size else math.nan,
        "mle_rate": rate,
        "mle_rate_ci": list(ci),
        "ks_vs_exp_2theta": ks,
        "censor_fraction": censor_frac,
    }
    gates = [
        _gate_below("meeting-ks", ks, 0.06),
        _gate_below("meeting-rate-fit", abs(rate - 2.0 * th) / (2.0 * th), 0.10),
        _gate_below("meeting-censoring", censor_frac, 0.01),
    ]
    return header, rows, estimates, gates


def _run_sim_voter(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "u", "horizon", "reps")
    n, d, nu = int(p["n"]), _sim_degree(p), float(p["nu"])
    u, horizon, reps = float(p["u"]), float(p["horizon"]), int(p["reps"])
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must lie in [0, 1], got {u}")
    grid_step = float(p.get("grid_step") or horizon / 20.0)
    check_times = p.get("check_times") or [horizon / 4.0, horizon]
    traces = simulate.voter_experiment(
        n, d, nu, u, horizon, grid_step, reps, cfg.seed, cfg.threads
    )
    grid = traces[0].times
    header = ["replica", "t", "O", "D"]
    rows = [
        [i, t, tr.opinion_density[k], tr.discordance[k]]
        for i, tr in enumerate(traces)
        for k, t in enumerate(tr.times)
    ]
    o_mat = np.asarray([tr.opinion_density for tr in traces])
    intd_mat = np.asarray([tr.int_d for tr in traces])
    estimates = {"theta": theta_mod.theta(theta_mod.make_consts(d, nu)), "checks": {}}
    gates = []
    for t_chk in check_times:
        k = int(np.argmin(np.abs(grid - t_chk)))
        o_t = o_mat[:, k]
        mart_gap = abs(float(o_t.mean()) - u)
        mart_se = float(o_t.std(ddof=1) / math.sqrt(reps))
        qv = o_t**2 - o_mat[:, 0] ** 2 - intd_mat[:, k] / n
        qv_gap = abs(float(qv.mean()))
        qv_se = float(qv.std(ddof=1) / math.sqrt(reps))
        estimates["checks"][f"t={grid[k]:g}"] = {
            "mean_O": float(o_t.mean()),
            "martingale_se": mart_se,
            "qv_gap": qv_gap,
            "qv_se": qv_se,
        }
        gates.append(_gate_below(f"voter-martingale@t={grid[k]:g}", mart_gap, 3.0 * mart_se))
        gates.append(_gate_below(f"voter-quadratic-variation@t={grid[k]:g}", qv_gap, 3.0 * qv_se))
    return header, rows, estimates, gates


def _run_sim_toy(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "reps")
    n, d, nu, reps = int(p["n"]), _sim_degree(p), float(p["nu"]), int(p["reps"])
    if not nu > 0:
        raise ParameterError("sim-toy requires nu > 0")
    hbar = p.get("hbar")
    delta = float(p.get("delta") or 0.02)
    samples = toymodel.two_phase_experiment(
        d, nu, n, reps, cfg.seed, delta=delta,
        hbar=None if hbar is None else int(hbar), threads=cfg.threads,
    )
    th = theta_mod.theta(theta_mod.make_consts(d, nu))
    header = ["replica", "tau_first", "tau_second", "tau_final", "N"]
    rows = [
        [i, s.tau_first_total, s.tau_second_total, s.tau_final, s.rounds]
        for i, s in enumerate(samples)
    ]
    scaled = np.asarray([s.tau_final / n for s in samples])
    ks = stats.ks_exponential(scaled, 2.0 * th)
    mean_gap = abs(float(scaled.mean()) - 1.0 / (2.0 * th)) * 2.0 * th
    estimates = {
        "theta": th,
        "mean_tau_final_over_n": float(scaled.mean()),
        "target_mean": 1.0 / (2.0 * th),
        "ks_vs_exp_2theta": ks,
        "mean_rounds": float(np.mean([s.rounds for s in samples])),
        "second_phase_fraction": float(
            np.mean([s.tau_second_total for s in samples])
            / np.mean([s.tau_final for s in samples])
        ),
    }
    gates = [
        _gate_below("toy-ks", ks, 0.05),
        _gate_below("toy-mean", mean_gap, 0.05),
    ]
    return header, rows, estimates, gates


def _run_duality_check(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "t", "reps")
    n, d, nu = int(p["n"]), _sim_degree(p), float(p["nu"])
    t, reps = float(p["t"]), int(p["reps"])
    u = float(p.get("u") if p.get("u") is not None else 0.5)
    from .runner import run_replicas

    def worker(replica, stream):
        return simulate.duality_check(n, d, nu, u, t, stream)

    reports = run_replicas(worker, reps, cfg.seed, cfg.threads)
    header = ["replica", "pass", "mismatch_count"]
    rows = [[i, int(r.passed), len(r.mismatches)] for i, r in enumerate(reports)]
    failures = sum(0 if r.passed else 1 for r in reports)
    estimates = {"trials": reps, "failures": failures}
    gates = [Gate("duality-exact", float(failures), 0.0, failures == 0)]
    return header, rows, estimates, gates


def _run_fw(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "u", "reps")
    if p.get("theta") is not None:
        th = float(p["theta"])
    elif p.get("d") is not None and p.get("nu") is not None:
        th = theta_mod.theta(theta_mod.make_consts(int(p["d"]), float(p["nu"])))
    else:
        raise ParameterError("fw needs either theta or the pair (d, nu)")
    u, paths = float(p["u"]), int(p["reps"])
    sample_times = p.get("sample_times") or [0.2, 0.5, 1.0]
    dt = p.get("dt")
    dt = float(dt) if dt is not None else fw_mod.default_dt(th)
    from .runner import run_replicas

    times = np.asarray(sample_times, dtype=np.float64)
    idx = np.rint(times / dt).astype(np.int64)

    def worker(replica, stream):
        path = fw_mod.fw_simulate(th, u, float(times.max()), dt, stream)
        return path.values[np.minimum(idx, path.values.size - 1)]

    values = np.asarray(run_replicas(worker, paths, cfg.seed, cfg.threads))
    header = ["path", "s", "B"]
    rows = [
        [i, times[k], values[i, k]] for i in range(paths) for k in range(times.size)
    ]
    het = values * (1.0 - values)
    het_mean = het.mean(axis=0)
    het_se = het.std(axis=0, ddof=1) / math.sqrt(paths)
    ref = np.asarray([fw_mod.fw_heterozygosity(th, u, s) for s in times])
    mgale_gap = abs(float(values[:, -1].mean()) - u)
    mgale_se = float(values[:, -1].std(ddof=1) / math.sqrt(paths))
    estimates = {
        "theta": th,
        "sample_times": list(map(float, times)),
        "heterozygosity_mean": het_mean.tolist(),
        "heterozygosity_ref": ref.tolist(),
        "heterozygosity_se": het_se.tolist(),
    }
    gates = [_gate_below("fw-martingale", mgale_gap, 3.0 * mgale_se)]
    for k, s in enumerate(times):
        gates.append(
            _gate_below(f"fw-heterozygosity@s={s:g}", abs(het_mean[k] - ref[k]), 3.0 * het_se[k])
        )
    return header, rows, estimates, gates


def _run_edge_tail(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "reps")
    n, d, nu, reps = int(p["n"]), _sim_degree(p), float(p["nu"]), int(p["reps"])
    s_n = float(p.get("s_n") if p.get("s_n") is not None else n**0.5)
    stats.validate_intermediate_window(n, s_n)
    cap = s_n if s_n > 0 else 1e-9
    results = simulate.meeting_experiment(
        n, d, nu, "edge", reps, cfg.seed, cfg.threads, t_cap=cap
    )
    flags = np.asarray([1.0 if (r.censored or r.tau > s_n) else 0.0 for r in results])
    phat = float(flags.mean())
    se = math.sqrt(max(phat * (1.0 - phat), 1.0 / reps) / reps)
    th = theta_mod.theta(theta_mod.make_consts(d, nu))
    header = ["replica", "tau", "censored"]
    rows = [[i, r.tau, int(r.censored)] for i, r in enumerate(results)]
    estimates = {"theta": th, "s_n": s_n, "phat": phat, "se": se}
    gates = [
        _gate_below("edge-tail-theta", abs(phat - th), max(0.03, 3.0 * se)),
    ]
    return header, rows, estimates, gates


def _run_homogenisation(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "u", "T", "reps")
    n_values = p["n"] if isinstance(p["n"], list) else [p["n"]]
    d, nu = _sim_degree(p), float(p["nu"])
    u, T, reps = float(p["u"]), float(p["T"]), int(p["reps"])
    header = ["n", "replica", "value"]
    rows = []
    summary = []
    for n in n_values:
        rep = stats.homogenisation_experiment(int(n), d, nu, u, T, reps, cfg.seed, cfg.threads)
        rows.extend([[int(n), i, float(v)] for i, v in enumerate(rep.values)])
        summary.append({"n": int(n), "mean": rep.mean, "se": rep.se})
    estimates = {"per_n": summary, "theta": theta_mod.theta(theta_mod.make_consts(d, nu))}
    last = summary[-1]
    gates = [_gate_below("homogenisation-zero", abs(last["mean"]), 3.0 * last["se"])]
    if len(summary) > 1:
        sizes = [s["n"] for s in summary]
        order = np.argsort(sizes)
        envelope = [abs(summary[i]["mean"]) + summary[i]["se"] for i in order]
        shrinking = all(envelope[i + 1] <= envelope[i] for i in range(len(envelope) - 1))
        gates.append(Gate("homogenisation-shrinking", 1.0 if shrinking else 0.0, 1.0, shrinking))
    return header, rows, estimates, gates


def _run_consensus(cfg: ExperimentConfig):
    p = cfg.params
    _require(p, "n", "d", "nu", "u", "reps")
    n, d, nu = int(p["n"]), _sim_degree(p), float(p["nu"])
    u, reps = float(p["u"]), int(p["reps"])
    if not 0.0 < u < 1.0:
        raise ParameterError(f"consensus requires u in (0, 1), got {u}")
    samples = simulate.consensus_time_experiment(n, d, nu, u, reps, cfg.seed, cfg.threads)
    th = theta_mod.theta(theta_mod.make_consts(d, nu))
    entropy = -(1.0 - u) * math.log(1.0 - u) - u * math.log(u)
    reference = 2.0 * entropy / th
    finite = samples[np.isfinite(samples)]
    header = ["replica", "tau_cons_over_n"]
    rows = [[i, s] for i, s in enumerate(samples)]
    estimates = {
        "theta": th,
        "mean_tau_cons_over_n": float(finite.mean()) if finite.size else math.nan,
        "reference_2H_over_theta": reference,
        "unfinished": int(reps - finite.size),
    }
    return header, rows, estimates, []  # exploratory diagnostic: no gates


_RUNNERS = {
    "theta-table": _run_theta_table,
    "sim-meeting": _run_sim_meeting,
    "sim-voter": _run_sim_voter,
    "sim-toy": _run_sim_toy,
    "duality-check": _run_duality_check,
    "fw": _run_fw,
    "edge-tail": _run_edge_tail,
    "homogenisation": _run_homogenisation,
    "consensus": _run_consensus,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; write CSV + JSON; return the exit code."""
    if cfg.experiment not in _RUNNERS:
        raise ParameterError(f"unknown experiment {cfg.experiment!r}")
    header, rows, estimates, gates = _RUNNERS[cfg.experiment](cfg)
    if cfg.out:
        with open(cfg.out + ".csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(cell) for cell in row])
        with open(cfg.out + ".json", "w") as fh:
            json.dump(_summary(cfg, estimates, gates), fh, indent=2, sort_keys=True)
            fh.write("\n")
    for g in gates:
        status = "pass" if g.passed else "FAIL"
        print(f"[gate] {g.name}: value={g.value:.6g} threshold={g.threshold:.6g} {status}")
    return 0 if all(g.passed for g in gates) else 1


def _fmt(cell):
    if isinstance(cell, float):
        return format(cell, ".17g")
    return cell


def _summary(cfg: ExperimentConfig, estimates, gates) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "params": {k: v for k, v in sorted(cfg.params.items()) if v is not None},
        "seed": cfg.seed,
        "threads": cfg.threads,
        "estimates": estimates,
        "gates": [g.as_dict() for g in gates],
    }


# ---------------------------------------------------------------------------
# argument parsing and config files
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    """Read a JSON config file; parse errors name the line and column."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(
            f"config {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ParameterError(f"config {path} must hold a JSON object")
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        raise ParameterError(f"config {path}: schema must be {SCHEMA_VERSION}, got {schema!r}")
    return data


_COMMON = ("config", "seed", "threads", "out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynvoter",
        description="Voter model / random walk experiments on rewiring regular graphs",
    )
    sub = parser.add_subparsers(dest="experiment")

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--seed", type=int, help="base seed (default 1)")
        sp.add_argument("--threads", type=int, help="worker threads (default $DYNVOTER_THREADS or 1)")
        sp.add_argument("--out", help="output base path; writes <out>.csv and <out>.json")

    sp = sub.add_parser("theta", aliases=["theta-table"], help="tabulate the diffusion constant")
    sp.add_argument("--d", type=_int_list, help="degree(s), comma separated, each >= 2")
    sp.add_argument("--nu", type=_float_list, help="rewiring rate(s), comma separated")
    sp.add_argument("--tol", type=float, help="continued-fraction tolerance (default 1e-12)")
    add_common(sp)

    sp = sub.add_parser("sim-meeting", help="meeting time of two stationary walks")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--start", choices=["stationary-pair", "edge"])
    sp.add_argument("--t-cap", dest="t_cap", type=float)
    add_common(sp)

    sp = sub.add_parser("sim-voter", help="voter model martingale checks")
    for name, typ in (
        ("--n", int), ("--d", int), ("--nu", float), ("--u", float),
        ("--horizon", float), ("--grid-step", float), ("--reps", int),
    ):
        sp.add_argument(name, dest=name.lstrip("-").replace("-", "_"), type=typ)
    sp.add_argument("--check-times", dest="check_times", type=_float_list)
    add_common(sp)

    sp = sub.add_parser("sim-toy", help="two-phase renewal model of the meeting time")
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--hbar", type=int, help="explicit tree height (overrides the delta route)")
    sp.add_argument("--reps", type=int)
    add_common(sp)

    sp = sub.add_parser("duality-check", help="exact forward/backward duality check")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--u", type=float, help="initial opinion density (default 0.5)")
    add_common(sp)

    sp = sub.add_parser("fw", help="Fisher-Wright diffusion reference moments")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--u", type=float)
    sp.add_argument("--T", dest="T", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--reps", type=int, help="number of paths")
    sp.add_argument("--sample-times", dest="sample_times", type=_float_list)
    add_common(sp)

    sp = sub.add_parser("edge-tail", help="edge-start meeting tail on an intermediate scale")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--s-n", dest="s_n", type=float)
    sp.add_argument("--reps", type=int)
    add_common(sp)

    sp = sub.add_parser("homogenisation", help="discordance homogenisation functional")
    sp.add_argument("--n", type=_int_list, help="graph size(s), comma separated")
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--u", type=float)
    sp.add_argument("--T", dest="T", type=float)
    sp.add_argument("--reps", type=int)
    add_common(sp)

    sp = sub.add_parser("consensus", help="consensus time diagnostic (no gates)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--u", type=float)
    sp.add_argument("--reps", type=int)
    add_common(sp)

    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge config file and flags (flags win) into a validated config."""
    if args.experiment is None:
        raise ParameterError("an experiment subcommand is required")
    experiment = "theta-table" if args.experiment == "theta" else args.experiment
    flag_values = {
        k: v for k, v in vars(args).items() if k not in ("experiment",) and v is not None
    }
    file_values: dict = {}
    if flag_values.get("config"):
        file_values = load_config(flag_values.pop("config"))
        file_exp = file_values.get("experiment")
        if file_exp is not None and file_exp != experiment:
            raise ParameterError(
                f"config file is for experiment {file_exp!r}, command line says {experiment!r}"
            )
    params = dict(file_values.get("params") or {})
    for key, value in flag_values.items():
        if key not in _COMMON:
            params[key] = value
    seed = flag_values.get("seed", file_values.get("seed", 1))
    threads = flag_values.get("threads", file_values.get("threads", default_threads()))
    out = flag_values.get("out", file_values.get("out"))
    if int(threads) < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    return ExperimentConfig(
        experiment=experiment,
        params=params,
        seed=int(seed),
        threads=int(threads),
        out=out,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return run(cfg)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
