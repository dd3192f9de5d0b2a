"""Experiment commands: rate reports, assumption audits, and the
simulation matrices behind the contraction / scaling / moment studies.

Every command reads one flat config, writes deterministic artifacts into
an output directory (results.csv with a fixed column order and sorted
rows, summary.json with sorted keys, rate_profile.json), and returns the
summary dict.  Replications are independent jobs keyed by (N-index,
replication) through the counter-based noise streams, so the results are
byte-identical no matter how many worker processes execute the matrix.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Optional

import numpy as np

from .config import (ExperimentConfig, build_model, make_sim_config,
                     resolved_delta, resolved_eta, resolved_r_max)
from .coupling import LawSpec, SimRecords, run_coupled, verify_mixing
from .errors import AdmissibilityError
from .potentials import (PotentialModel, gronwall_moment_bound,
                         validate_assumptions)
from .rates import (RateProfile, empirical_constant, omega, tabulate_profile,
                    theorem_bound, verify_f_inequality)
from .rng import job_index
from .transport import w1_upper_from_f

CSV_COLUMNS = (
    "run_id", "seed", "N", "M", "replication", "t",
    "mean_f_distance", "mean_euclid_distance", "w1_converted",
    "bound_theorem", "second_moment_particles", "second_moment_nonlinear",
    "upsilon_estimate",
)


# ---------------------------------------------------------------------------
# Shared plumbing


def prepare(cfg: ExperimentConfig) -> tuple[PotentialModel, RateProfile]:
    model = build_model(cfg)
    profile = tabulate_profile(
        model, eta=resolved_eta(cfg), r_max=resolved_r_max(cfg),
        grid_points=cfg.grid_points, tol=cfg.quadrature_tol)
    return model, profile


def _require_admissible(profile: RateProfile) -> None:
    if profile.decay_rate <= 0.0:
        raise AdmissibilityError(
            f"interaction bound eta={profile.eta:.6g} is not below the "
            f"contraction constant c={profile.c:.6g}; the long-time bound "
            "has no positive decay rate")


def _constants(cfg: ExperimentConfig, model: PotentialModel,
               profile: RateProfile) -> dict:
    delta = resolved_delta(cfg)
    om = omega(model, delta)
    f_delta = float(profile.f(delta))
    allowance = (om + 2.0 * profile.c * f_delta) / profile.decay_rate \
        if profile.decay_rate > 0.0 else float("inf")
    u0 = LawSpec.parse(cfg.law_nonlinear).second_moment(cfg.dim)
    try:
        c_moment = gronwall_moment_bound(model, profile.eta, u0)
    except AdmissibilityError:
        c_moment = float("nan")
    return {
        "R0": profile.R0, "R1": profile.R1, "c": profile.c,
        "eta": profile.eta, "decay_rate": profile.decay_rate,
        "phi_R0": profile.phi_R0, "f_R1": profile.f_R1,
        "delta": delta, "omega_delta": om, "f_delta": f_delta,
        "discretization_allowance": allowance,
        "initial_second_moment_nonlinear": u0,
        "c_moment": c_moment,
        "c_emp": empirical_constant(c_moment) if np.isfinite(c_moment) else float("nan"),
    }


def _summary_base(cfg: ExperimentConfig, model: PotentialModel,
                  profile: RateProfile) -> dict:
    return {
        "schema_version": 1,
        "experiment": cfg.experiment,
        "model": {"name": model.name, "params": model.params},
        "constants": _constants(cfg, model, profile),
        "config": asdict(cfg),
    }


def _write_summary(out_dir: str, summary: dict) -> str:
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_results_csv(path: str, rows: list[dict]) -> None:
    rows = sorted(rows, key=lambda r: (r["N"], r["replication"], r["t"]))
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join((
                r["run_id"], str(r["seed"]), str(r["N"]), str(r["M"]),
                str(r["replication"]), _fmt(r["t"]),
                _fmt(r["mean_f_distance"]), _fmt(r["mean_euclid_distance"]),
                _fmt(r["w1_converted"]), _fmt(r["bound_theorem"]),
                _fmt(r["second_moment_particles"]),
                _fmt(r["second_moment_nonlinear"]),
                _fmt(r["upsilon_estimate"]),
            )) + "\n")


def _run_single(task) -> tuple[int, int, SimRecords]:
    cfg, n, n_idx, rep, profile = task
    model = build_model(cfg)
    sim = make_sim_config(cfg, n, job_index(n_idx, rep))
    return n_idx, rep, run_coupled(model, profile, sim)


def _execute_matrix(cfg: ExperimentConfig, profile: RateProfile,
                    n_list: list[int], threads: int) -> dict:
    """Run every (N, replication) job; keyed results, order-independent."""
    tasks = [(cfg, n, n_idx, rep, profile)
             for n_idx, n in enumerate(n_list)
             for rep in range(cfg.n_replications)]
    results: dict = {}
    if threads <= 1:
        for task in tasks:
            n_idx, rep, rec = _run_single(task)
            results[(n_idx, rep)] = rec
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for n_idx, rep, rec in pool.map(_run_single, tasks):
                results[(n_idx, rep)] = rec
    return results


def _collect_rows(cfg: ExperimentConfig, profile: RateProfile,
                  n_list: list[int], results: dict,
                  c_moment: float) -> tuple[list[dict], dict]:
    """CSV rows plus per-N aggregates (grand means, bounds, std errors)."""
    rows: list[dict] = []
    aggregates: dict = {}
    for n_idx, n in enumerate(n_list):
        recs = [results[(n_idx, rep)] for rep in range(cfg.n_replications)]
        times = recs[0].times
        mean_f = np.stack([r.mean_f for r in recs])          # (R, T)
        w_f_initial = float(mean_f[:, 0].mean())
        if np.isfinite(c_moment):
            bounds = theorem_bound(profile, w_f_initial, c_moment, n, times)
        else:
            bounds = np.full_like(times, np.nan)
        grand = mean_f.mean(axis=0)
        if cfg.n_replications > 1:
            stderr = mean_f.std(axis=0, ddof=1) / np.sqrt(cfg.n_replications)
        else:
            stderr = np.full_like(grand, np.nan)
        aggregates[n] = {
            "times": times, "grand_mean_f": grand, "std_error": stderr,
            "bounds": bounds, "w_f_initial": w_f_initial, "mean_f": mean_f,
            "sm_nonlinear": np.stack([r.second_moment_nonlinear for r in recs]),
            "sm_particles": np.stack([r.second_moment_particles for r in recs]),
        }
        for rep, rec in enumerate(recs):
            for i, t in enumerate(rec.times):
                rows.append({
                    "run_id": f"{cfg.experiment}-n{n}-r{rep:04d}",
                    "seed": cfg.seed, "N": n, "M": rec.n_reference,
                    "replication": rep, "t": float(t),
                    "mean_f_distance": float(rec.mean_f[i]),
                    "mean_euclid_distance": float(rec.mean_euclid[i]),
                    "w1_converted": w1_upper_from_f(profile.phi_R0,
                                                    float(rec.mean_f[i])),
                    "bound_theorem": float(bounds[i]),
                    "second_moment_particles": float(rec.second_moment_particles[i]),
                    "second_moment_nonlinear": float(rec.second_moment_nonlinear[i]),
                    "upsilon_estimate": float(rec.upsilon[i]),
                })
    return rows, aggregates


def _bound_violations(rows: list[dict], aggregates: dict, n_list: list[int],
                      allowance: float) -> list[dict]:
    """Rows with f-distance above bound + 3 std_error + allowance."""
    stderr_at = {}
    for n in n_list:
        agg = aggregates[n]
        for i, t in enumerate(agg["times"]):
            stderr_at[(n, float(t))] = float(agg["std_error"][i])
    out = []
    for r in rows:
        se = stderr_at[(r["N"], r["t"])]
        slack = 3.0 * se + allowance if np.isfinite(se) else allowance
        if np.isfinite(r["bound_theorem"]) and \
                r["mean_f_distance"] > r["bound_theorem"] + slack:
            out.append({"N": r["N"], "replication": r["replication"],
                        "t": r["t"], "mean_f_distance": r["mean_f_distance"],
                        "bound_theorem": r["bound_theorem"],
                        "slack_allowed": slack})
    return out


def _plateau_window(times: np.ndarray, t_end: float, fraction: float) -> np.ndarray:
    cut = (1.0 - fraction) * t_end - 1e-12
    mask = times >= cut
    if not mask.any():
        mask = times == times.max()
    return mask


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    denom = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / denom)
    return slope, float(ym - slope * xm)


# ---------------------------------------------------------------------------
# Commands


def cmd_rates(cfg: ExperimentConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    model, profile = prepare(cfg)
    _require_admissible(profile)
    ineq = verify_f_inequality(profile, model)
    summary = _summary_base(cfg, model, profile)
    summary["rates"] = {
        "inequality": {
            "passed": ineq.passed, "n_checked": ineq.n_checked,
            "worst_slack": ineq.worst_slack, "worst_r": ineq.worst_r,
            "tolerance": ineq.tolerance, "c_refined": ineq.c_refined,
            "c_drift": ineq.c_drift,
        },
        "profile_file": "rate_profile.json",
        "achieved_quadrature_tol": profile.achieved_tol,
    }
    profile.to_json(os.path.join(out_dir, "rate_profile.json"))
    _write_summary(out_dir, summary)
    print(f"rates: R0={profile.R0:.9g} R1={profile.R1:.9g} c={profile.c:.9g} "
          f"eta={profile.eta:.9g} decay_rate={profile.decay_rate:.9g}")
    print(ineq.line())
    if not ineq.passed:
        raise ArithmeticError(
            "distance-transform inequality failed at tabulated midpoints; "
            "profile is numerically unreliable")
    return summary


def cmd_validate(cfg: ExperimentConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    model, profile = prepare(cfg)
    report = validate_assumptions(model, profile.eta, profile,
                                  samples=cfg.validation_samples,
                                  seed=cfg.seed)
    mixing = verify_mixing(resolved_delta(cfg))
    ineq = verify_f_inequality(profile, model)
    all_checks = list(report.checks) + mixing
    lines = report.lines() + [
        "[{}] {}: worst violation {:.3e} {}".format(
            "ok" if c.passed else "FAIL", c.name, c.worst_violation, c.detail)
        for c in mixing]
    for line in lines:
        print(line)
    print(ineq.line())
    mixing_ok = all(c.passed for c in mixing)
    summary = _summary_base(cfg, model, profile)
    summary["validate"] = {
        "checks": [{"name": c.name, "passed": c.passed,
                    "worst_violation": c.worst_violation, "detail": c.detail}
                   for c in all_checks],
        "inequality_passed": ineq.passed,
        "worst_inequality_slack": ineq.worst_slack,
        "eta_below_rate": report.eta_below_rate,
        "eta_below_half_m_V": report.eta_below_half_m_V,
        "passed": report.passed and report.eta_below_rate and ineq.passed
                  and mixing_ok,
    }
    profile.to_json(os.path.join(out_dir, "rate_profile.json"))
    _write_summary(out_dir, summary)
    if not summary["validate"]["passed"]:
        raise AdmissibilityError(
            "assumption audit failed: " + "; ".join(
                line for line in lines + [ineq.line()]
                if line.startswith("[FAIL")))
    return summary


def cmd_contraction(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    model, profile = prepare(cfg)
    _require_admissible(profile)
    summary = _summary_base(cfg, model, profile)
    consts = summary["constants"]

    n = cfg.n_particles
    results = _execute_matrix(cfg, profile, [n], threads)
    rows, aggregates = _collect_rows(cfg, profile, [n], results,
                                     consts["c_moment"])
    agg = aggregates[n]
    times, grand, stderr = agg["times"], agg["grand_mean_f"], agg["std_error"]

    plateau_term = 0.0
    if np.isfinite(consts["c_moment"]):
        plateau_term = float(empirical_constant(consts["c_moment"]) * profile.eta
                             / (profile.decay_rate * np.sqrt(n)))
    envelope = np.exp(-profile.decay_rate * times) * agg["w_f_initial"] + plateau_term
    slack = np.where(np.isfinite(stderr), 3.0 * stderr, 0.0)
    envelope_ok = bool(np.all(grand <= envelope + slack + 1e-15))

    # informational decay fit on the early, clearly-decaying part
    fit_mask = (times > 0.0) & (times <= 0.5 * cfg.t_end) & \
        (grand > max(2.0 * plateau_term, 1e-300))
    decay_fit: Optional[float] = None
    if int(fit_mask.sum()) >= 2:
        s, _ = _ols_slope(times[fit_mask], np.log(grand[fit_mask]))
        decay_fit = -s

    violations = _bound_violations(rows, aggregates, [n],
                                   consts["discretization_allowance"])
    summary["contraction"] = {
        "n": n, "replications": cfg.n_replications,
        "times": times.tolist(), "mean_f": grand.tolist(),
        "std_error": stderr.tolist(), "envelope": envelope.tolist(),
        "plateau_term": plateau_term,
        "w_f_initial": agg["w_f_initial"],
        "envelope_ok": envelope_ok,
        "decay_exponent_fit": decay_fit,
        "decay_rate_theory": profile.decay_rate,
        "bound_violations": violations,
    }
    write_results_csv(os.path.join(out_dir, "results.csv"), rows)
    profile.to_json(os.path.join(out_dir, "rate_profile.json"))
    _write_summary(out_dir, summary)
    print(f"contraction: N={n} R={cfg.n_replications} envelope_ok={envelope_ok} "
          f"decay_fit={decay_fit} theory={profile.decay_rate:.6g}")
    return summary


def cmd_poc_scaling(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    if len(cfg.n_values) < 4:
        raise ValueError("poc-scaling needs at least 4 values in n_values")
    n_list = sorted(int(n) for n in cfg.n_values)
    if n_list[-1] < 16 * n_list[0]:
        raise ValueError("n_values must span at least a factor of 16")
    model, profile = prepare(cfg)
    _require_admissible(profile)
    summary = _summary_base(cfg, model, profile)
    consts = summary["constants"]

    results = _execute_matrix(cfg, profile, n_list, threads)
    rows, aggregates = _collect_rows(cfg, profile, n_list, results,
                                     consts["c_moment"])

    window = _plateau_window(aggregates[n_list[0]]["times"], cfg.t_end,
                             cfg.plateau_fraction)
    plateau_stats = {}
    rep_plateaus = {}
    for n in n_list:
        per_rep = aggregates[n]["mean_f"][:, window].mean(axis=1)
        rep_plateaus[n] = per_rep
        bound_plateau = float(np.mean(aggregates[n]["bounds"][window])) \
            if np.isfinite(consts["c_moment"]) else float("nan")
        plateau_stats[str(n)] = {
            "mean": float(per_rep.mean()),
            "std_error": float(per_rep.std(ddof=1) / np.sqrt(len(per_rep)))
            if len(per_rep) > 1 else float("nan"),
            "bound_theorem": bound_plateau,
        }

    log_n = np.log(np.asarray(n_list, dtype=float))
    means = np.asarray([plateau_stats[str(n)]["mean"] for n in n_list])
    slope = intercept = None
    ci = None
    if np.all(means > 0.0):
        slope, intercept = _ols_slope(log_n, np.log(means))
        if cfg.bootstrap_samples > 0 and cfg.n_replications > 1:
            rng = np.random.Generator(np.random.Philox(
                key=np.array([cfg.seed, 0xB005], dtype=np.uint64)))
            boot = []
            for _ in range(cfg.bootstrap_samples):
                resampled = []
                for n in n_list:
                    vals = rep_plateaus[n]
                    take = rng.integers(0, len(vals), size=len(vals))
                    resampled.append(vals[take].mean())
                resampled = np.asarray(resampled)
                if np.all(resampled > 0.0):
                    s, _ = _ols_slope(log_n, np.log(resampled))
                    boot.append(s)
            if boot:
                ci = [float(np.percentile(boot, 2.5)),
                      float(np.percentile(boot, 97.5))]

    violations = _bound_violations(rows, aggregates, n_list,
                                   consts["discretization_allowance"])
    summary["poc_scaling"] = {
        "n_values": n_list, "replications": cfg.n_replications,
        "plateau_fraction": cfg.plateau_fraction,
        "plateau_window_start": float((1.0 - cfg.plateau_fraction) * cfg.t_end),
        "plateaus": plateau_stats,
        "slope": slope, "intercept": intercept,
        "slope_ci": ci, "bootstrap_samples": cfg.bootstrap_samples,
        "bound_violations": violations,
        "all_rows_within_bound": len(violations) == 0,
    }
    write_results_csv(os.path.join(out_dir, "results.csv"), rows)
    profile.to_json(os.path.join(out_dir, "rate_profile.json"))
    _write_summary(out_dir, summary)
    print(f"poc-scaling: N={n_list} slope={slope} ci={ci} "
          f"violations={len(violations)}")
    return summary


def cmd_moments(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    model, profile = prepare(cfg)
    summary = _summary_base(cfg, model, profile)
    consts = summary["constants"]
    if not np.isfinite(consts["c_moment"]):
        raise AdmissibilityError(
            "moment bound unavailable: needs a one-sided interaction bound "
            "M_W or eta < m_V / 2")

    n = cfg.n_particles
    results = _execute_matrix(cfg, profile, [n], threads)
    rows, aggregates = _collect_rows(cfg, profile, [n], results,
                                     consts["c_moment"])
    agg = aggregates[n]
    times = agg["times"]
    grand_nl = agg["sm_nonlinear"].mean(axis=0)
    grand_pt = agg["sm_particles"].mean(axis=0)
    i_sup = int(np.argmax(grand_nl))
    sup_nl = float(grand_nl[i_sup])
    if cfg.n_replications > 1:
        se_sup = float(agg["sm_nonlinear"][:, i_sup].std(ddof=1)
                       / np.sqrt(cfg.n_replications))
    else:
        se_sup = float("nan")
    bound = float(consts["c_moment"])
    passed = sup_nl <= bound

    summary["moments"] = {
        "n": n, "replications": cfg.n_replications,
        "times": times.tolist(),
        "second_moment_nonlinear": grand_nl.tolist(),
        "second_moment_particles": grand_pt.tolist(),
        "sup_nonlinear": sup_nl,
        "sup_time": float(times[i_sup]),
        "std_error_at_sup": se_sup,
        "sup_particles": float(np.max(grand_pt)),
        "bound": bound,
        "passed": bool(passed),
    }
    write_results_csv(os.path.join(out_dir, "results.csv"), rows)
    profile.to_json(os.path.join(out_dir, "rate_profile.json"))
    _write_summary(out_dir, summary)
    print(f"moments: N={n} R={cfg.n_replications} sup={sup_nl:.6g} "
          f"bound={bound:.6g} passed={passed}")
    if not passed:
        raise AdmissibilityError(
            f"empirical second moment {sup_nl:.6g} exceeded the "
            f"uniform-in-time bound {bound:.6g}")
    return summary
