"""Batch experiment driver.

Subcommands: tabulate, match, certify, solve, rate, profile, sandwich, all.
Each reads one plain-text config file (INI sections, key=value), writes CSV
series and JSON verdicts under --out, and encodes its verdict in the exit
status: 0 = all checks pass, 1 = a scientific check failed, 2 = numerical
or configuration failure.  Outputs are deterministic: fixed tolerances, no
randomness, floats written with 17 significant digits.

Acceptance brackets (the numbers in DEFAULTS) are pre-registered here, not
tuned after looking at a particular run.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import warnings
from pathlib import Path

import numpy as np

from . import barriers as bar
from . import matching as mat
from . import pde
from . import serialize as ser
from .errors import NumericsError
from .grids import Snapshot, make_graded_grid
from .specialfn import SpecialFunctions, check_asymptotics

DEFAULTS = {
    "tabulate": {
        "y_max": "1e6", "npd": "40", "sweep": "1e4,1e5,1e6",
        "growth_tol": "1.35",
    },
    "match": {
        "k_lower": "5.0", "k_upper": "6.0", "t_end": "1000",
        "sigma_step": "0.005", "bracket_lo": "2.0", "bracket_hi": "3.0",
        "bracket_window": "100,1000", "halving_rtol": "1e-8",
    },
    "certify": {
        "k_lower": "5.0", "k_upper": "6.0", "k_lower_swap": "7.0",
        "k_upper_swap": "5.0", "t_lo": "0.5", "t_hi": "1000",
        "boundary_t_hi": "3000", "n_t": "48", "y_resolution": "40",
        "npd": "40",
    },
    "solve": {
        "n": "420", "x_min": "1e-8", "grading_ratio": "1.07",
        "right_bc": "1.0", "t_end": "50", "dt_max": "0.05",
        "dt_initial": "1e-7", "local_error_tol": "1e-6", "scheme": "be",
        "newton_tol": "1e-11", "reg_epsilon": "0",
        "output_times": "0.25,1,2,5,10,15,20,25,30,35,40,45,50",
    },
    "rate": {
        "d_lo": "1.5", "d_hi": "3.5", "d_window": "20,50",
        "r_lo": "0.4", "r_hi": "2.5", "trend_from": "10",
        "trend_slope_tol": "1e-5",
    },
    "profile": {
        "e_max": "0.6", "decrease_from": "10",
    },
    "sandwich": {
        "k_lower": "5.0", "k_upper": "6.0", "shift_max": "2000",
        "lattice": "0.25", "slack": "1e-9", "npd": "40",
    },
}


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTS)
    if path is not None:
        if not Path(path).exists():
            raise NumericsError(f"config file not found: {path}")
        cfg.read(path)
    return cfg


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _trend_slope(t, v):
    """Least-squares slope of v against t."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    A = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[1])


# ---------------------------------------------------------------------------
# shared builders


def _solver_setup(cfg) -> tuple[Snapshot, pde.SolverConfig, float, list[float]]:
    sec = cfg["solve"]
    grid = make_graded_grid(int(sec["n"]), float(sec["x_min"]),
                            float(sec["grading_ratio"]))
    right_bc = float(sec["right_bc"])
    u0 = Snapshot(grid=grid, values=right_bc * grid.nodes, time=0.0,
                  left_bc=0.0, right_bc=right_bc)
    err_tol = sec["local_error_tol"]
    solver_cfg = pde.SolverConfig(
        grid=grid, dt_initial=float(sec["dt_initial"]),
        dt_max=float(sec["dt_max"]), newton_tol=float(sec["newton_tol"]),
        reg_epsilon=float(sec["reg_epsilon"]), scheme=sec["scheme"],
        right_bc=right_bc,
        local_error_tol=None if err_tol.lower() == "none" else float(err_tol))
    t_end = float(sec["t_end"])
    out_times = _floats(sec["output_times"])
    return u0, solver_cfg, t_end, out_times


def _run_critical(cfg, quiet: bool) -> pde.Trajectory:
    u0, solver_cfg, t_end, out_times = _solver_setup(cfg)
    _say(quiet, f"solving to t = {t_end} on {solver_cfg.grid.n} nodes ...")
    return pde.solve(u0, solver_cfg, t_end, out_times)


def _rate_series(traj: pde.Trajectory):
    rows = []
    for s in traj.snapshots:
        if s.time <= 0.0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # early ratio fallback is expected
            info = pde.slope_origin_info(s)
        d = float(np.log(info.value) - np.sqrt(2.0 * s.time))
        l1 = pde.l1_to_one(s)
        r = float(l1 / (np.sqrt(2.0 * s.time)
                        * np.exp(-2.5 - np.sqrt(2.0 * s.time))))
        rows.append({"t": s.time, "slope": info.value, "method": info.method,
                     "fit_residual": info.fit_residual, "d": d, "l1": l1, "r": r})
    return rows


# ---------------------------------------------------------------------------
# commands


def cmd_tabulate(cfg, out: Path, quiet: bool) -> int:
    sec = cfg["tabulate"]
    y_max = float(sec["y_max"])
    npd = int(sec["npd"])
    funcs = SpecialFunctions(y_max, npd=npd)
    table = funcs.table()
    (out / "special_table.csv").write_text(ser.table_to_csv(table))
    ser.dump_json(ser.table_header_json(table, npd=npd), out / "special_table.json")

    sweep = _floats(sec["sweep"])
    if max(sweep) < 1e4:
        _say(quiet, "WARNING: asymptotic window too small (y_max < 1e4); "
                    "ratio checks skipped")
        return 0
    report = check_asymptotics(tuple(sweep), npd=npd,
                               growth_tol=float(sec["growth_tol"]), strict=False)
    ser.dump_json({"y_maxes": [ser.fmt(v) for v in report.y_maxes],
                   "ratios": {k: [ser.fmt(v) for v in seq]
                              for k, seq in report.ratios.items()},
                   "spot_checks": {k: ser.fmt(v)
                                   for k, v in report.spot_checks.items()},
                   "violations": report.violations,
                   "ok": report.ok}, out / "asymptotics.json")
    for name, seq in sorted(report.ratios.items()):
        _say(quiet, f"ratio {name:4s}: " + " ".join(f"{v:9.3g}" for v in seq))
    if not report.ok:
        _say(quiet, "FAIL: asymptotics ratios grew across the sweep")
        return 1
    _say(quiet, "tabulate: all ratio checks pass")
    return 0


def cmd_match(cfg, out: Path, quiet: bool) -> int:
    sec = cfg["match"]
    t_end = float(sec["t_end"])
    step = float(sec["sigma_step"])
    failures = []
    for key in ("k_lower", "k_upper"):
        K = float(sec[key])
        path = mat.integrate_a(K, t_end, sigma_step=step)
        path_half = mat.integrate_a(K, t_end, sigma_step=step / 2.0)
        rel = abs(path.a_at(t_end) - path_half.a_at(t_end)) / path_half.a_at(t_end)
        tag = f"k{K:g}".replace(".", "p")
        (out / f"path_{tag}.csv").write_text(ser.path_to_csv(path))
        ser.dump_json(ser.path_header_json(path, sigma_step=step),
                      out / f"path_{tag}.json")
        if rel >= float(sec["halving_rtol"]):
            failures.append(f"K={K}: step-halving changed a(t_end) by {rel:.2e}")
        w0, w1 = _floats(sec["bracket_window"])
        ts = np.linspace(w0, min(w1, t_end), 60)
        dev = path.loga_at(ts) - np.sqrt(2.0 * ts)
        lo, hi = float(sec["bracket_lo"]), float(sec["bracket_hi"])
        if key == "k_lower" and (dev.min() < lo or dev.max() > hi):
            failures.append(
                f"K={K}: log a - sqrt(2t) left [{lo}, {hi}] "
                f"(range [{dev.min():.3f}, {dev.max():.3f}])")
        if key == "k_lower" and np.any(np.diff(np.abs(dev - 2.5)) > 1e-12):
            failures.append(f"K={K}: |log a - sqrt(2t) - 5/2| not nonincreasing")
        _say(quiet, f"match K={K}: halving rel change {rel:.2e}, "
                    f"deviation range [{dev.min():.4f}, {dev.max():.4f}]")
    ser.dump_json({"failures": failures, "ok": not failures},
                  out / "match_verdict.json")
    if failures:
        for f in failures:
            _say(quiet, "FAIL: " + f)
        return 1
    return 0


def _certify_artifacts(cfg, quiet: bool):
    sec = cfg["certify"]
    t_hi = float(sec["t_hi"])
    bnd_hi = float(sec["boundary_t_hi"])
    k_lo, k_up = float(sec["k_lower"]), float(sec["k_upper"])
    path_lo = mat.integrate_a(k_lo, bnd_hi * 1.01)
    path_up = mat.integrate_a(k_up, bnd_hi * 1.01)
    y_max = float(path_up.a_at(bnd_hi * 1.01)) * 1.05
    _say(quiet, f"building tables to y_max = {y_max:.3e} ...")
    funcs = SpecialFunctions(y_max, npd=int(sec["npd"]))
    table = funcs.table()
    lower = bar.BarrierSpec(kind=bar.LOWER, path=path_lo, table=table, funcs=funcs)
    upper = bar.BarrierSpec(kind=bar.UPPER, path=path_up, table=table, funcs=funcs)
    return sec, t_hi, bnd_hi, lower, upper, table


def cmd_certify(cfg, out: Path, quiet: bool) -> int:
    sec, t_hi, bnd_hi, lower, upper, table = _certify_artifacts(cfg, quiet)
    n_t = int(sec["n_t"])
    res = int(sec["y_resolution"])
    failures = []

    rep_lo = bar.certify_sign(lower, (float(sec["t_lo"]), t_hi),
                              y_resolution=res, n_t=n_t)
    rep_up = bar.certify_sign(upper, (float(sec["t_lo"]), t_hi),
                              y_resolution=res, n_t=n_t)
    ser.dump_json(ser.residual_report_to_json(rep_lo), out / "residual_lower.json")
    ser.dump_json(ser.residual_report_to_json(rep_up), out / "residual_upper.json")
    for rep in (rep_lo, rep_up):
        _say(quiet, f"{rep.kind} residual: sign_ok={rep.sign_ok} "
                    f"threshold_T={rep.threshold_T} worst={rep.worst_value:.3e}")
        if not rep.sign_ok:
            failures.append(f"{rep.kind} residual sign not certified")

    mono = bar.check_lower_monotone(lower, (max(rep_lo.threshold_T or 1.0, 1.0), t_hi))
    _say(quiet, f"lower barrier slope > 0: {mono}")
    if not mono:
        failures.append("lower barrier not increasing beyond threshold")

    bnd_results = {}
    for spec, name in ((lower, "lower"), (upper, "upper")):
        rep = bar.check_boundary_matching(spec, (1.0, bnd_hi), n_t=96)
        bnd_results[name] = rep
        ser.dump_json({"kind": rep.kind, "K": ser.fmt(rep.K),
                       "onset_t": None if rep.onset_t is None else ser.fmt(rep.onset_t),
                       "ok_beyond": rep.ok_beyond},
                      out / f"boundary_{name}.json")
        _say(quiet, f"{name} boundary matching onset: {rep.onset_t}")
        if not rep.ok_beyond:
            failures.append(f"{name} boundary matching never holds up to {bnd_hi}")

    # deliberate K swaps must fail the matching inequalities at large time
    swaps = {}
    for kind, K in ((bar.LOWER, float(sec["k_lower_swap"])),
                    (bar.UPPER, float(sec["k_upper_swap"]))):
        p = mat.integrate_a(K, bnd_hi * 1.01)
        spec = bar.BarrierSpec(kind=kind, path=p, table=table)
        rep = bar.check_boundary_matching(spec, (1.0, bnd_hi), n_t=96)
        failed_as_predicted = rep.onset_t is None
        swaps[f"{kind}_K{K:g}"] = failed_as_predicted
        _say(quiet, f"swapped {kind} K={K:g}: matching fails as predicted: "
                    f"{failed_as_predicted}")
        if not failed_as_predicted:
            failures.append(f"swapped {kind} K={K:g} unexpectedly matched")

    ser.dump_json({"failures": failures, "swaps": swaps, "ok": not failures},
                  out / "certify_verdict.json")
    if failures:
        for f in failures:
            _say(quiet, "FAIL: " + f)
        return 1
    return 0


def cmd_solve(cfg, out: Path, quiet: bool) -> int:
    traj = _run_critical(cfg, quiet)
    cmd_solve_from(traj, out, quiet)
    _say(quiet, f"solve: {len(traj.step_times)} steps, "
                f"{len(traj.snapshots)} snapshots")
    return 0


def cmd_rate(cfg, out: Path, quiet: bool, traj=None) -> int:
    sec = cfg["rate"]
    if traj is None:
        traj = _run_critical(cfg, quiet)
    rows = _rate_series(traj)
    lines = ["t,slope,method,fit_residual,d,l1,r"]
    for r in rows:
        lines.append(",".join([ser.fmt(r["t"]), ser.fmt(r["slope"]), r["method"],
                               ser.fmt(r["fit_residual"]), ser.fmt(r["d"]),
                               ser.fmt(r["l1"]), ser.fmt(r["r"])]))
    (out / "rate.csv").write_text("\n".join(lines) + "\n")

    failures = []
    w0, w1 = _floats(sec["d_window"])
    dw = [r for r in rows if w0 - 1e-9 <= r["t"] <= w1 + 1e-9]
    d_vals = [r["d"] for r in dw]
    if not d_vals:
        failures.append("no samples in the d(t) window")
    else:
        d_lo, d_hi = float(sec["d_lo"]), float(sec["d_hi"])
        if min(d_vals) < d_lo or max(d_vals) > d_hi:
            failures.append(f"d(t) left [{d_lo}, {d_hi}]: "
                            f"range [{min(d_vals):.3f}, {max(d_vals):.3f}]")
    trend_rows = [r for r in rows if r["t"] >= float(sec["trend_from"])]
    slope_d = _trend_slope([r["t"] for r in trend_rows],
                           [abs(r["d"] - 2.5) for r in trend_rows])
    if slope_d > float(sec["trend_slope_tol"]):
        failures.append(f"|d - 5/2| trend not decreasing (slope {slope_d:.2e})")
    r_end = rows[-1]["r"]
    if not (float(sec["r_lo"]) <= r_end <= float(sec["r_hi"])):
        failures.append(f"L1 ratio at t_end = {r_end:.3f} outside bracket")
    slope_r = _trend_slope([r["t"] for r in trend_rows],
                           [abs(r["r"] - 1.0) for r in trend_rows])
    if slope_r > float(sec["trend_slope_tol"]):
        failures.append(f"|r - 1| trend not decreasing (slope {slope_r:.2e})")

    ser.dump_json({"failures": failures, "ok": not failures,
                   "d_final": ser.fmt(rows[-1]["d"]),
                   "r_final": ser.fmt(r_end),
                   "d_trend_slope": ser.fmt(slope_d),
                   "r_trend_slope": ser.fmt(slope_r)}, out / "rate_verdict.json")
    _say(quiet, f"rate: d(t_end) = {rows[-1]['d']:.4f}, r(t_end) = {r_end:.3f}")
    if failures:
        for f in failures:
            _say(quiet, "FAIL: " + f)
        return 1
    return 0


def cmd_profile(cfg, out: Path, quiet: bool, traj=None) -> int:
    sec = cfg["profile"]
    if traj is None:
        traj = _run_critical(cfg, quiet)
    rows = []
    for s in traj.snapshots:
        if s.time <= 0.0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ahat = pde.slope_origin(s)
        x = s.grid.nodes
        E = float(np.max(np.abs((1.0 - s.values) * (1.0 + ahat * x) - (1.0 - x))))
        rows.append((s.time, ahat, E))
    (out / "profile.csv").write_text(
        "\n".join(["t,ahat,E"] + [",".join(ser.fmt(v) for v in r) for r in rows])
        + "\n")
    failures = []
    tail = [(t, E) for t, _, E in rows if t >= float(sec["decrease_from"])]
    if any(e2 > e1 + 1e-12 for (_, e1), (_, e2) in zip(tail, tail[1:])):
        failures.append("profile error E(t) not decreasing beyond "
                        + sec["decrease_from"])
    if rows and rows[-1][2] > float(sec["e_max"]):
        failures.append(f"E(t_end) = {rows[-1][2]:.3f} > {sec['e_max']}")
    ser.dump_json({"failures": failures, "ok": not failures,
                   "E_final": ser.fmt(rows[-1][2]) if rows else None},
                  out / "profile_verdict.json")
    _say(quiet, f"profile: E(t_end) = {rows[-1][2]:.4f}")
    if failures:
        for f in failures:
            _say(quiet, "FAIL: " + f)
        return 1
    return 0


def cmd_sandwich(cfg, out: Path, quiet: bool, traj=None) -> int:
    sec = cfg["sandwich"]
    if traj is None:
        traj = _run_critical(cfg, quiet)
    t_end = traj.snapshots[-1].time
    shift_max = float(sec["shift_max"])
    path_lo = mat.integrate_a(float(sec["k_lower"]), t_end + 1.0)
    path_up = mat.integrate_a(float(sec["k_upper"]), t_end + shift_max + 1.0)
    y_max = float(path_up.a_at(t_end + shift_max + 1.0)) * 1.05
    _say(quiet, f"building tables to y_max = {y_max:.3e} ...")
    funcs = SpecialFunctions(y_max, npd=int(sec["npd"]))
    table = funcs.table()
    lower = bar.BarrierSpec(kind=bar.LOWER, path=path_lo, table=table)
    upper = bar.BarrierSpec(kind=bar.UPPER, path=path_up, table=table)
    tau = 1.0 / (4.0 * max(traj.data_K, 1.0))
    t_min_upper = min((s.time for s in traj.snapshots if s.time >= tau),
                      default=tau)
    report = bar.find_time_shifts(
        lower, upper, traj.snapshots, shift_max=shift_max,
        lattice=float(sec["lattice"]), slack=float(sec["slack"]),
        t_min_upper=t_min_upper)
    ok = report.worst_lower <= report.slack and report.worst_upper <= report.slack
    ser.dump_json({"T1": ser.fmt(report.T1), "T2": ser.fmt(report.T2),
                   "lower_onset": ser.fmt(report.lower_onset),
                   "upper_onset": ser.fmt(report.upper_onset),
                   "worst_lower": ser.fmt(report.worst_lower),
                   "worst_upper": ser.fmt(report.worst_upper),
                   "n_times_lower": report.n_times_lower,
                   "n_times_upper": report.n_times_upper,
                   "ok": bool(ok)}, out / "sandwich.json")
    _say(quiet, f"sandwich: T1 = {report.T1}, T2 = {report.T2}, ok = {ok}")
    return 0 if ok else 1


def cmd_all(cfg, out: Path, quiet: bool) -> int:
    rc = 0
    rc |= cmd_tabulate(cfg, out, quiet)
    rc |= cmd_match(cfg, out, quiet)
    rc |= cmd_certify(cfg, out, quiet)
    traj = _run_critical(cfg, quiet)
    rc |= cmd_solve_from(traj, out, quiet)
    rc |= cmd_rate(cfg, out, quiet, traj=traj)
    rc |= cmd_profile(cfg, out, quiet, traj=traj)
    rc |= cmd_sandwich(cfg, out, quiet, traj=traj)
    ser.dump_json({"ok": rc == 0}, out / "summary.json")
    return 1 if rc else 0


def cmd_solve_from(traj, out: Path, quiet: bool) -> int:
    for s in traj.snapshots:
        tag = ser.fmt(s.time).replace(".", "p")
        (out / f"snapshot_t{tag}.csv").write_text(ser.snapshot_to_csv(s))
    ser.dump_json(_manifest(traj), out / "trajectory.json")
    return 0


def _manifest(traj) -> dict:
    return {
        "n_steps": int(len(traj.step_times)),
        "grid_nodes": int(traj.config.grid.n),
        "scheme": traj.config.scheme,
        "right_bc": ser.fmt(traj.config.right_bc),
        "reg_epsilon": ser.fmt(traj.config.reg_epsilon),
        "dt_max": ser.fmt(traj.config.dt_max),
        "local_error_tol": None if traj.config.local_error_tol is None
        else ser.fmt(traj.config.local_error_tol),
        "newton_tol": ser.fmt(traj.config.newton_tol),
        "data_K": ser.fmt(traj.data_K),
        "dt_min_accepted": ser.fmt(float(traj.step_sizes.min())),
        "dt_max_accepted": ser.fmt(float(traj.step_sizes.max())),
        "newton_iters_max": int(traj.newton_iters.max()),
        "output_times": [ser.fmt(s.time) for s in traj.snapshots],
        "events": traj.events,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ksgrowup",
        description="critical-mass chemotaxis grow-up experiments")
    parser.add_argument("command",
                        choices=["tabulate", "match", "certify", "solve",
                                 "rate", "profile", "sandwich", "all"])
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {
            "tabulate": cmd_tabulate, "match": cmd_match,
            "certify": cmd_certify, "solve": cmd_solve, "rate": cmd_rate,
            "profile": cmd_profile, "sandwich": cmd_sandwich, "all": cmd_all,
        }[args.command]
        return handler(cfg, out, args.quiet)
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
