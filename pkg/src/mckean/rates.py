"""Contraction-rate construction for a curvature profile kappa.

Quantities, all derived from the model's kappa and an interaction bound
eta:

  R0   radius beyond which kappa is nonnegative,
  R1   radius beyond which s (s - R0) inf_{r >= s} kappa(r) >= 8,
  phi(r) = exp(-1/4 int_0^r s kappa_-(s) ds),     kappa_- = max(0, -kappa)
  Phi(r) = int_0^r phi,
  c    = 1 / int_0^{R1} Phi / phi,
  g(r) = 1 - (c/2) int_0^{min(r, R1)} Phi / phi   in [1/2, 1],
  f(r) = int_0^r phi g   (concave, increasing, f(0) = 0).

f is linear beyond R1 with slope phi(R0)/2, so the tabulated grid only
has to resolve [0, R1] and the tail is attached in closed form.  The
decay rate of the coupled distance is 2 (c - eta).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AdmissibilityError, NumericalError
from .potentials import PotentialModel
from .quadrature import bisect_root, cumulative_simpson, golden_max, golden_min, refine

_SCAN_LIMIT = 1.0e6
_MASTER_POINTS = 32768
_EMP_CONST = 1.0 + np.sqrt(2.0)   # folds 1/sqrt(N-1) + sqrt(2)/N into N^{-1/2} for N >= 2


def kappa_minus(model: PotentialModel, r: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, -np.asarray(model.kappa(r), dtype=float))


def compute_R0(model: PotentialModel, tol: float = 1e-9) -> float:
    """Smallest radius beyond which the curvature profile is nonnegative.

    Grid scan up to the certified tail radius, then bisection on the last
    sign change.  Rejects models whose kappa is negative at or beyond the
    tail radius, since that contradicts the declared certificate.
    """
    r_hi = max(model.r_star, 1.0)
    r = np.linspace(0.0, 2.0 * r_hi, _MASTER_POINTS + 1)
    k = np.asarray(model.kappa(r), dtype=float)
    if not np.isfinite(k).all():
        raise NumericalError("kappa produced non-finite values on the scan grid")
    beyond_tail = r >= model.r_star
    if np.any(k[beyond_tail] < 0.0):
        raise AdmissibilityError(
            "kappa is negative beyond its certified tail radius r_star")
    neg = np.nonzero(k < 0.0)[0]
    if len(neg) == 0:
        return 0.0
    last = neg[-1]
    lo, hi = r[last], r[last + 1]
    root = bisect_root(lambda s: float(model.kappa(np.asarray([s]))[0]), lo, hi, tol=tol)
    return float(root)


def _tail_infimum(model: PotentialModel, s: float, master_r: np.ndarray,
                  suffix_min: np.ndarray) -> float:
    """Certified lower bound for inf_{r >= s} kappa(r).

    Grid minimisation over [s, r_cap] (suffix minima plus a golden-section
    polish of the cell containing s) combined with the kappa_inf tail
    certificate for everything beyond r_cap.
    """
    r_cap = master_r[-1]
    if s >= r_cap:
        return float(model.kappa_inf)
    idx = int(np.searchsorted(master_r, s, side="right"))
    idx = min(idx, len(master_r) - 1)
    _, local = golden_min(lambda u: float(model.kappa(np.asarray([u]))[0]),
                          s, master_r[idx], tol=1e-12)
    best = min(local, float(suffix_min[idx]))
    return min(best, float(model.kappa_inf))


def compute_R1(model: PotentialModel, r0: Optional[float] = None,
               tol: float = 1e-9) -> float:
    """Smallest s >= R0 with s (s - R0) inf_{r >= s} kappa(r) >= 8.

    Scans a master grid for the first upcrossing of the threshold and
    bisects inside the bracketing cell.  Fails if no radius below 1e6
    works, which signals an unusable curvature profile.
    """
    if r0 is None:
        r0 = compute_R0(model, tol=tol)
    r_cap = max(model.r_star, r0 + 1.0, 1.0)

    lo_edge = r0
    while lo_edge < _SCAN_LIMIT:
        hi_edge = max(2.0 * r_cap, 4.0 * lo_edge + 4.0)
        master_r = np.linspace(lo_edge, hi_edge, _MASTER_POINTS + 1)
        k = np.asarray(model.kappa(master_r), dtype=float)
        if not np.isfinite(k).all():
            raise NumericalError("kappa produced non-finite values on the scan grid")
        suffix_min = np.minimum.accumulate(k[::-1])[::-1]

        def threshold(s: float) -> float:
            m = _tail_infimum(model, s, master_r, suffix_min)
            return s * (s - r0) * m - 8.0

        vals = master_r * (master_r - r0) * np.minimum(suffix_min, model.kappa_inf)
        hits = np.nonzero(vals >= 8.0)[0]
        if len(hits) > 0:
            j = int(hits[0])
            if j == 0:
                return float(master_r[0])
            root = bisect_root(threshold, float(master_r[j - 1]), float(master_r[j]),
                               tol=min(tol, 1e-12))
            return float(root)
        lo_edge = hi_edge
    raise AdmissibilityError(
        "no contraction radius R1 below 1e6; curvature profile unusable")


# ---------------------------------------------------------------------------
# Tabulation


@dataclass(frozen=True)
class RateProfile:
    """Tabulated rate construction plus the scalars derived from it.

    Grid tables cover [0, r_max] with R0 and R1 as exact nodes; phi is
    constant and f linear beyond their respective radii by construction,
    so evaluation at arbitrary r >= 0 combines interpolation on [0, R1]
    with closed-form tails.
    """

    R0: float
    R1: float
    c: float
    eta: float
    phi_R0: float
    f_R1: float
    Phi_R1: float
    grid: np.ndarray
    phi_tab: np.ndarray
    Phi_tab: np.ndarray
    g_tab: np.ndarray
    f_tab: np.ndarray
    quadrature_tol: float
    achieved_tol: float

    @property
    def decay_rate(self) -> float:
        return 2.0 * (self.c - self.eta)

    def _core(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        n = int(np.searchsorted(self.grid, self.R1, side="right"))
        return self.grid[:n], self.phi_tab[:n], self.g_tab[:n], self.f_tab[:n]

    def f(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-12):
            raise ValueError("f is defined on nonnegative distances")
        r = np.maximum(r, 0.0)
        gx, _, _, fx = self._core()
        inner = np.interp(np.minimum(r, self.R1), np.append(gx, self.R1),
                          np.append(fx, self.f_R1))
        tail = self.f_R1 + 0.5 * self.phi_R0 * (r - self.R1)
        return np.where(r <= self.R1, inner, tail)

    def f_prime(self, r) -> np.ndarray:
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        gx, px, gg, _ = self._core()
        inner = np.interp(np.minimum(r, self.R1), np.append(gx, self.R1),
                          np.append(px * gg, 0.5 * self.phi_R0))
        return np.where(r <= self.R1, inner, 0.5 * self.phi_R0)

    def phi(self, r) -> np.ndarray:
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        clipped = np.minimum(r, self.grid[-1])
        return np.where(r >= self.R0, self.phi_R0,
                        np.interp(clipped, self.grid, self.phi_tab))

    def g(self, r) -> np.ndarray:
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        clipped = np.minimum(r, self.grid[-1])
        return np.where(r >= self.R1, 0.5, np.interp(clipped, self.grid, self.g_tab))

    def Phi(self, r) -> np.ndarray:
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        inner = np.interp(np.minimum(r, self.grid[-1]), self.grid, self.Phi_tab)
        tail = self.Phi_tab[-1] + self.phi_R0 * (r - self.grid[-1])
        return np.where(r <= self.grid[-1], inner, tail)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "R0": self.R0, "R1": self.R1, "c": self.c, "eta": self.eta,
            "decay_rate": self.decay_rate, "phi_R0": self.phi_R0,
            "f_R1": self.f_R1, "Phi_R1": self.Phi_R1,
            "quadrature_tol": self.quadrature_tol,
            "achieved_tol": self.achieved_tol,
            "grid": self.grid.tolist(),
            "phi": self.phi_tab.tolist(),
            "Phi": self.Phi_tab.tolist(),
            "g": self.g_tab.tolist(),
            "f": self.f_tab.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @staticmethod
    def from_json(path) -> "RateProfile":
        with open(path) as fh:
            return RateProfile.from_dict(json.load(fh))

    @staticmethod
    def from_dict(d: dict) -> "RateProfile":
        return RateProfile(
            R0=d["R0"], R1=d["R1"], c=d["c"], eta=d["eta"], phi_R0=d["phi_R0"],
            f_R1=d["f_R1"], Phi_R1=d["Phi_R1"],
            grid=np.asarray(d["grid"]), phi_tab=np.asarray(d["phi"]),
            Phi_tab=np.asarray(d["Phi"]), g_tab=np.asarray(d["g"]),
            f_tab=np.asarray(d["f"]), quadrature_tol=d["quadrature_tol"],
            achieved_tol=d["achieved_tol"],
        )


def _densify(points: np.ndarray, mult: int) -> np.ndarray:
    """Split every cell of ``points`` into ``mult`` equal parts."""
    if mult == 1:
        return points
    left = points[:-1]
    width = np.diff(points)
    steps = np.arange(mult) / mult
    dense = (left[:, None] + width[:, None] * steps[None, :]).ravel()
    return np.append(dense, points[-1])


def _pipeline(model: PotentialModel, points: np.ndarray, r0: float, r1: float) -> dict:
    """One pass of the nested cumulative-Simpson chain on ``points``.

    Each integral consumes integrand values one dyadic refinement level
    deeper, and only the innermost integrand (s kappa_-(s)) is evaluated
    from the model directly, so no interpolation enters the chain.
    """
    p0 = points
    p1 = refine(p0)
    p2 = refine(p1)
    p3 = refine(p2)
    mids3 = refine(p3)[1::2]

    ik = lambda s: s * kappa_minus(model, s)
    i3 = cumulative_simpson(ik(p3), ik(mids3), p3)
    phi3 = np.exp(-0.25 * i3)
    # phi is provably constant beyond R0; pin it so the tail integrals are
    # exact for the constant integrand
    idx_r0_3 = int(np.searchsorted(p3, r0))
    phi_r0 = float(phi3[idx_r0_3]) if idx_r0_3 < len(p3) else float(phi3[-1])
    phi3[p3 >= r0] = phi_r0

    Phi2 = cumulative_simpson(phi3[0::2], phi3[1::2], p2)
    phi2 = phi3[0::2]
    ratio2 = Phi2 / phi2
    G1 = cumulative_simpson(ratio2[0::2], ratio2[1::2], p1)
    phi1 = phi2[0::2]
    h1 = phi1 * G1
    H0 = cumulative_simpson(h1[0::2], h1[1::2], p0)

    i0 = i3[0::8]
    phi0 = phi3[0::8]
    Phi0 = Phi2[0::4]
    G0 = G1[0::2]

    idx_r1 = int(np.searchsorted(p0, r1))
    if idx_r1 >= len(p0) or p0[idx_r1] != r1:
        raise ValueError("R1 must be an exact grid node")
    G_r1 = float(G0[idx_r1])
    if not np.isfinite(G_r1) or G_r1 <= 0.0:
        raise NumericalError("normaliser integral for c is not positive")
    c = 1.0 / G_r1

    g0 = 1.0 - 0.5 * c * G0
    g0[p0 >= r1] = 0.5
    f0 = Phi0 - 0.5 * c * H0
    f_r1 = float(f0[idx_r1])
    tail = p0 > r1
    f0[tail] = f_r1 + 0.5 * phi_r0 * (p0[tail] - r1)

    for name, arr in (("I", i0), ("phi", phi0), ("Phi", Phi0), ("g", g0), ("f", f0)):
        if not np.isfinite(arr).all():
            raise NumericalError(f"non-finite values while tabulating {name}")
    return {
        "grid": p0, "phi": phi0, "Phi": Phi0, "g": g0, "f": f0,
        "G": G0, "H": H0, "I": i0, "c": c, "phi_R0": phi_r0,
        "f_R1": f_r1, "Phi_R1": float(Phi0[idx_r1]),
    }


def _base_grid(r0: float, r1: float, r_max: float, grid_points: int) -> np.ndarray:
    base = np.linspace(0.0, r_max, grid_points + 1)
    spacing = r_max / grid_points
    for special in (r0, r1):
        if special <= 0.0 or special >= r_max:
            continue
        base = base[np.abs(base - special) > 0.25 * spacing]
        base = np.append(base, special)
    base = np.unique(base)
    return base


def default_r_max(r0: float, r1: float) -> float:
    return max(2.0 * r1, 10.0 * r0 + 10.0)


def tabulate_profile(model: PotentialModel, eta: Optional[float] = None,
                     r_max: Optional[float] = None, grid_points: int = 4096,
                     tol: float = 1e-10) -> RateProfile:
    """Build the full rate profile for a model.

    ``eta=None`` derives the interaction bound from the model's Lipschitz
    constant through the sandwich f(r) >= phi(R0) r / 2, i.e.
    eta = 2 lip_W / phi(R0).  The tabulation doubles its internal
    resolution until two passes agree to ``tol`` everywhere.
    """
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    if tol <= 0.0:
        raise ValueError("quadrature tolerance must be positive")
    r0 = compute_R0(model)
    r1 = compute_R1(model, r0)
    if r_max is None:
        r_max = default_r_max(r0, r1)
    if r_max < 2.0 * r1:
        raise ValueError(f"r_max must be at least 2 R1 = {2.0 * r1:.6g}")
    base = _base_grid(r0, r1, r_max, grid_points)

    prev_c = None
    prev_f = prev_Phi = None
    achieved = np.inf
    result = None
    stride = 1
    for mult in (1, 2, 4, 8, 16):
        cur = _pipeline(model, _densify(base, mult), r0, r1)
        cur_f = cur["f"][::mult]
        cur_Phi = cur["Phi"][::mult]
        if prev_c is not None:
            achieved = max(
                abs(cur["c"] - prev_c),
                float(np.max(np.abs(cur_f - prev_f))),
                float(np.max(np.abs(cur_Phi - prev_Phi))),
            )
            if achieved <= tol:
                result = cur
                stride = mult
                break
        prev_c, prev_f, prev_Phi = cur["c"], cur_f, cur_Phi
    if result is None:
        raise NumericalError(
            f"profile tabulation did not converge to tol={tol}")

    grid = result["grid"][::stride]
    phi_tab = result["phi"][::stride]
    Phi_tab = result["Phi"][::stride]
    g_tab = result["g"][::stride]
    f_tab = result["f"][::stride]

    if eta is None:
        eta = 2.0 * model.lip_W / result["phi_R0"]
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")

    return RateProfile(
        R0=r0, R1=r1, c=result["c"], eta=float(eta),
        phi_R0=result["phi_R0"], f_R1=result["f_R1"], Phi_R1=result["Phi_R1"],
        grid=grid, phi_tab=phi_tab, Phi_tab=Phi_tab, g_tab=g_tab, f_tab=f_tab,
        quadrature_tol=tol, achieved_tol=float(achieved),
    )


# ---------------------------------------------------------------------------
# Verification of the differential inequality


@dataclass(frozen=True)
class InequalityReport:
    passed: bool
    n_checked: int
    worst_slack: float
    worst_r: float
    tolerance: float
    c_refined: float
    c_drift: float

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return (f"[{status}] distance-transform inequality: worst slack "
                f"{self.worst_slack:.3e} at r={self.worst_r:.6g} "
                f"({self.n_checked} midpoints, tol {self.tolerance:g})")


def verify_f_inequality(profile: RateProfile, model: PotentialModel,
                        tol: float = 1e-8) -> InequalityReport:
    """Check f'' - (r kappa(r)/4) f' <= -(c/2) f at grid midpoints.

    Derivatives come from the defining identities
    f' = phi g and f'' = -(r kappa_-/4) phi g - (c/2) Phi on [0, R1), and
    f' = phi(R0)/2, f'' = 0 beyond R1, all evaluated by rerunning the
    integral chain on the midpoint-refined grid, not by interpolation.
    A neighbourhood of one grid cell around R1 is skipped because f''
    jumps there.
    """
    dense = refine(profile.grid)
    run = _pipeline(model, dense, profile.R0, profile.R1)
    c = run["c"]
    mids = dense[1::2]
    phi_m = run["phi"][1::2]
    Phi_m = run["Phi"][1::2]
    g_m = run["g"][1::2]
    f_m = run["f"][1::2]

    cell = float(np.max(np.diff(profile.grid)))
    keep = np.abs(mids - profile.R1) > cell
    mids, phi_m, Phi_m, g_m, f_m = (a[keep] for a in (mids, phi_m, Phi_m, g_m, f_m))

    kap = np.asarray(model.kappa(mids), dtype=float)
    kneg = np.maximum(0.0, -kap)
    below = mids < profile.R1
    fp = np.where(below, phi_m * g_m, 0.5 * run["phi_R0"])
    fpp = np.where(below, -0.25 * mids * kneg * phi_m * g_m - 0.5 * c * Phi_m, 0.0)
    slack = fpp - 0.25 * mids * kap * fp + 0.5 * c * f_m

    worst_idx = int(np.argmax(slack))
    worst = float(slack[worst_idx])
    c_drift = abs(c - profile.c)
    passed = worst <= tol and c_drift <= 2.0 * profile.quadrature_tol
    return InequalityReport(
        passed=bool(passed), n_checked=int(len(mids)), worst_slack=worst,
        worst_r=float(mids[worst_idx]), tolerance=tol, c_refined=float(c),
        c_drift=float(c_drift),
    )


# ---------------------------------------------------------------------------
# Short-range curvature defect and the long-time bound


def omega(model: PotentialModel, delta: float) -> float:
    """sup over s in [0, delta] of s * kappa_-(s).

    Grid maximisation polished by golden section around the best cell;
    this is the per-step growth allowance of the coupled distance inside
    the synchronous band.
    """
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return 0.0
    s = np.linspace(0.0, delta, 1025)
    vals = s * kappa_minus(model, s)
    k = int(np.argmax(vals))
    lo = s[max(0, k - 1)]
    hi = s[min(len(s) - 1, k + 1)]
    fn = lambda u: float(u * kappa_minus(model, np.asarray([u]))[0])
    _, polished = golden_max(fn, float(lo), float(hi), tol=1e-12)
    return float(max(vals[k], polished))


def empirical_constant(c_moment: float) -> float:
    """Explicit constant multiplying eta N^{-1/2} in the long-time bound.

    The drift mismatch between the empirical and mean-field interaction
    admits the bound eta (1/sqrt(N-1) + sqrt(2)/N) sqrt(c_moment); for
    N >= 2 the bracket is at most (1 + sqrt(2)) / sqrt(N).
    """
    if c_moment < 0.0:
        raise ValueError("second-moment bound must be nonnegative")
    return _EMP_CONST * float(np.sqrt(c_moment))


def theorem_bound(profile: RateProfile, w_f_initial: float, c_moment: float,
                  n: int, t) -> np.ndarray:
    """Long-time transport bound: decaying initial term plus the
    N^{-1/2} plateau.

    bound(t) = exp(-2 (c - eta) t) W0 + C eta / (2 (c - eta) sqrt(N))
    with C = empirical_constant(c_moment).  Requires eta < c and N >= 2.
    """
    decay = profile.decay_rate
    if decay <= 0.0:
        raise AdmissibilityError(
            f"interaction bound eta={profile.eta:.6g} must stay below the "
            f"contraction constant c={profile.c:.6g}")
    if n < 2:
        raise ValueError("the particle bound needs N >= 2")
    if w_f_initial < 0.0:
        raise ValueError("initial transport distance must be nonnegative")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("time must be nonnegative")
    plateau = empirical_constant(c_moment) * profile.eta / (decay * np.sqrt(n))
    return np.exp(-decay * t) * w_f_initial + plateau
