"""Model definitions: confinement and interaction potentials with the
structural data the rate construction and the moment bounds consume.

Conventions.  A model is specified through gradients only.  ``kappa`` is a
curvature profile: a continuous function with
``<grad_V(x) - grad_V(y), x - y> >= kappa(|x-y|) |x-y|^2`` for all pairs,
negative values allowed at short range, and a certified tail
``kappa(r) >= kappa_inf > 0`` for all ``r >= r_star``.  The interaction
gradient must be odd (``grad_W(-z) = -grad_W(z)``) with Lipschitz constant
``lip_W``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AdmissibilityError

Array = np.ndarray
GradFn = Callable[[Array], Array]
KappaFn = Callable[[Array], Array]

# Scale multiple of r_star used when deriving (m_V, M_V) from kappa; beyond
# this radius the certified tail alone supports the quadratic lower bound.
_DERIVE_SPAN = 2.0
_DERIVE_POINTS = 4096


@dataclass(frozen=True)
class PotentialModel:
    """Drift data for one mean-field system.

    ``grad_V`` and ``grad_W`` act on arrays of shape (..., dim) and return
    the same shape.  ``grad_W_linear`` is the coefficient b when
    ``grad_W(z) = b * z`` holds exactly; it unlocks O(N) interaction sums.
    ``quadratic_rho`` is set when ``grad_V(x) = rho * x`` exactly, which
    permits evolving the mean-field reference law in closed form.
    """

    dim: int
    grad_V: GradFn
    grad_W: GradFn
    kappa: KappaFn
    kappa_inf: float
    r_star: float
    lip_W: float
    m_V: float
    M_V: float
    M_W: Optional[float] = None
    grad_W_linear: Optional[float] = None
    quadratic_rho: Optional[float] = None
    kappa_lip: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kappa_inf <= 0.0:
            raise AdmissibilityError(
                "certified curvature tail kappa_inf must be positive")
        if self.r_star < 0.0:
            raise ValueError("r_star must be nonnegative")
        if self.lip_W < 0.0:
            raise ValueError("lip_W must be nonnegative")
        if self.m_V <= 0.0 or self.M_V < 0.0:
            raise AdmissibilityError(
                "need m_V > 0 and M_V >= 0 for the moment bound")

    # -- interaction sums ------------------------------------------------

    def interaction_within(self, x: Array) -> Array:
        """Empirical interaction drift (1/N) sum_j grad_W(x_i - x_j)."""
        n = x.shape[0]
        if self.grad_W_linear is not None:
            return self.grad_W_linear * (x - x.mean(axis=0, keepdims=True))
        out = np.zeros_like(x)
        # chunked pairwise sum; grad_W(0) = 0 keeps the diagonal harmless
        chunk = max(1, int(2_000_000 // max(n, 1)))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            diffs = x[lo:hi, None, :] - x[None, :, :]
            out[lo:hi] = self.grad_W(diffs).mean(axis=1)
        return out

    def interaction_against(self, x: Array, ref: Array) -> Array:
        """Convolution drift (1/M) sum_m grad_W(x_i - ref_m)."""
        if self.grad_W_linear is not None:
            return self.grad_W_linear * (x - ref.mean(axis=0, keepdims=True))
        m = ref.shape[0]
        out = np.zeros_like(x)
        chunk = max(1, int(2_000_000 // max(m, 1)))
        for lo in range(0, x.shape[0], chunk):
            hi = min(lo + chunk, x.shape[0])
            diffs = x[lo:hi, None, :] - ref[None, :, :]
            out[lo:hi] = self.grad_W(diffs).mean(axis=1)
        return out

    def grad_V_origin_norm(self) -> float:
        g0 = self.grad_V(np.zeros((1, self.dim)))
        return float(np.linalg.norm(g0))


def _norm_sq(x: Array) -> Array:
    return np.sum(x * x, axis=-1, keepdims=True)


def builtin_double_well(a: float, lam: float, sign: int = 1, dim: int = 1) -> PotentialModel:
    """Quartic double well |x|^4 - a|x|^2 with quadratic interaction
    sign * lam * |x|^2.

    Curvature profile kappa(r) = r^2 - 2a: the quartic term satisfies
    <|x|^2 x - |y|^2 y, x - y> >= |x-y|^2 (|x|^2 + |y|^2)/2 and the
    parallelogram bound |x|^2 + |y|^2 >= |x-y|^2 / 2 gives the r^2 part.
    """
    if a <= 0.0:
        raise ValueError("double well requires a > 0")
    if lam < 0.0:
        raise ValueError("interaction strength lam must be >= 0 (use sign=-1 for repulsion)")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = float(a)
    lam = float(lam)
    coeff = 2.0 * sign * lam

    def grad_V(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return 4.0 * _norm_sq(x) * x - 2.0 * a * x

    def grad_W(z: Array) -> Array:
        return coeff * np.asarray(z, dtype=float)

    def kappa(r):
        r = np.asarray(r, dtype=float)
        return r * r - 2.0 * a

    # Certify the curvature tail at a radius provably past the contraction
    # radius: at s = sqrt(2a) + 2 the product s (s - sqrt(2a)) kappa(s)
    # is already >= 2 * 2 * 4 = 16 > 8, so the rate search never has to
    # fall back on the (conservative) tail floor inside [0, r_star].
    r_star = np.sqrt(2.0 * a) + 2.0
    return PotentialModel(
        dim=dim,
        grad_V=grad_V,
        grad_W=grad_W,
        kappa=kappa,
        kappa_inf=r_star * r_star - 2.0 * a,   # kappa increasing: floor attained at r_star
        r_star=r_star,
        lip_W=2.0 * lam,
        m_V=a,                          # kappa(r) r^2 >= a r^2 - (3a/2)^2 exactly
        M_V=2.25 * a * a,
        M_W=0.0 if sign > 0 else None,  # attractive quadratic W is monotone
        grad_W_linear=coeff,
        quadratic_rho=None,
        kappa_lip=4.0 * r_star,         # |kappa'(r)| = 2r on the scanned span
        name="double_well",
        params={"a": a, "lam": lam, "sign": sign, "dim": dim},
    )


def builtin_quadratic(rho: float, lam: float, dim: int = 1) -> PotentialModel:
    """Quadratic confinement rho |x|^2 / 2 with interaction lam |x|^2.

    kappa is the constant rho, attained with equality, so every derived
    rate quantity has a closed form against which the pipeline is tested.
    """
    if rho <= 0.0:
        raise ValueError("quadratic confinement requires rho > 0")
    if lam < 0.0:
        raise ValueError("interaction strength lam must be >= 0")
    rho = float(rho)
    lam = float(lam)

    def grad_V(x: Array) -> Array:
        return rho * np.asarray(x, dtype=float)

    def grad_W(z: Array) -> Array:
        return 2.0 * lam * np.asarray(z, dtype=float)

    def kappa(r):
        r = np.asarray(r, dtype=float)
        return np.full_like(r, rho)

    return PotentialModel(
        dim=dim,
        grad_V=grad_V,
        grad_W=grad_W,
        kappa=kappa,
        kappa_inf=rho,
        r_star=0.0,
        lip_W=2.0 * lam,
        m_V=rho,
        M_V=0.0,
        M_W=0.0,
        grad_W_linear=2.0 * lam,
        quadratic_rho=rho,
        kappa_lip=0.0,
        name="quadratic",
        params={"rho": rho, "lam": lam, "dim": dim},
    )


def derive_quadratic_lower_bound(kappa: KappaFn, kappa_inf: float,
                                 r_star: float) -> tuple[float, float]:
    """(m_V, M_V) with kappa(r) r^2 >= m_V r^2 - M_V for all r >= 0.

    Takes m_V = kappa_inf / 2; beyond r_star the certified tail already
    exceeds it, so M_V only has to absorb the deficit on a compact range,
    estimated by grid maximisation with a safety span.
    """
    m_v = 0.5 * kappa_inf
    span = max(_DERIVE_SPAN * r_star, 1.0)
    r = np.linspace(0.0, span, _DERIVE_POINTS)
    deficit = (m_v - np.asarray(kappa(r))) * r * r
    M_v = float(max(0.0, deficit.max()))
    return m_v, M_v


# ---------------------------------------------------------------------------
# Assumption validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_violation: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    eta: float
    contraction_rate: float
    eta_below_rate: bool
    eta_below_half_m_V: bool

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> CheckResult:
        return min(self.checks, key=lambda c: (c.passed, -c.worst_violation))

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "ok" if c.passed else "FAIL"
            out.append(f"[{status}] {c.name}: worst violation {c.worst_violation:.3e} {c.detail}")
        out.append(f"[{'ok' if self.eta_below_rate else 'FAIL'}] interaction bound eta={self.eta:.6g} "
                   f"vs contraction constant c={self.contraction_rate:.6g}")
        out.append(f"[info] eta < m_V/2: {self.eta_below_half_m_V}")
        return out


def _sample_pairs(dim: int, count: int, rng: np.random.Generator) -> tuple[Array, Array]:
    """Pair cloud mixing short and long separations across several scales."""
    scales = np.array([0.25, 1.0, 3.0, 8.0])
    reps = count // len(scales) + 1
    xs, ys = [], []
    for s in scales:
        x = s * rng.standard_normal((reps, dim))
        mode = rng.integers(0, 3, size=reps)
        step = rng.standard_normal((reps, dim))
        gap = np.where(mode == 0, 1e-3, np.where(mode == 1, 1.0, 10.0))[:, None]
        ys.append(x + gap * step)
        xs.append(x)
    x = np.concatenate(xs)[:count]
    y = np.concatenate(ys)[:count]
    return x, y


def validate_assumptions(model: PotentialModel, eta: float, profile,
                         samples: int = 10_000, seed: int = 0,
                         tol: float = 1e-9) -> ValidationReport:
    """Monte Carlo audit of the standing assumptions on random pairs.

    Checks the curvature lower bound, the interaction-vs-distance bound
    through the tabulated concave distance transform, oddness of grad_W,
    and (when declared) the one-sided interaction bound M_W.  Gradients
    that produce NaN anywhere fail loudly.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 sample pairs for a meaningful audit")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xA11D17], dtype=np.uint64)))
    x, y = _sample_pairs(model.dim, samples, rng)
    dx = x - y
    r = np.linalg.norm(dx, axis=1)
    keep = r > 1e-12
    x, y, dx, r = x[keep], y[keep], dx[keep], r[keep]

    gvx, gvy = model.grad_V(x), model.grad_V(y)
    gwx, gwy = model.grad_W(x), model.grad_W(y)
    checks = []

    finite = np.isfinite(gvx).all() and np.isfinite(gvy).all() \
        and np.isfinite(gwx).all() and np.isfinite(gwy).all()
    checks.append(CheckResult("gradients finite", bool(finite),
                              0.0 if finite else np.inf))
    if not finite:
        return ValidationReport(tuple(checks), eta, profile.c, eta < profile.c,
                                eta < 0.5 * model.m_V)

    # curvature: <grad_V(x)-grad_V(y), x-y> / r^2 - kappa(r) >= 0
    inner = np.sum((gvx - gvy) * dx, axis=1)
    slack = inner / (r * r) - np.asarray(model.kappa(r))
    worst = float(slack.min())
    checks.append(CheckResult("curvature lower bound", worst >= -tol, min(0.0, worst),
                              f"at r={r[slack.argmin()]:.4g}"))

    # interaction modulus: |grad_W(x)-grad_W(y)| <= eta * f(r)
    wdiff = np.linalg.norm(gwx - gwy, axis=1)
    allowed = eta * profile.f(r)
    viol = wdiff - allowed
    worst_w = float(viol.max())
    scale = max(1.0, float(wdiff.max()))
    checks.append(CheckResult("interaction bounded by eta * f", worst_w <= tol * scale,
                              max(0.0, worst_w), f"at r={r[viol.argmax()]:.4g}"))

    # oddness and vanishing at the origin
    z = rng.standard_normal((1000, model.dim))
    odd = np.linalg.norm(model.grad_W(z) + model.grad_W(-z), axis=1).max()
    origin = float(np.linalg.norm(model.grad_W(np.zeros((1, model.dim)))))
    checks.append(CheckResult("grad_W odd with grad_W(0)=0",
                              odd <= 1e-12 * max(1.0, float(np.abs(z).max())) and origin <= 1e-12,
                              float(max(odd, origin))))

    if model.M_W is not None:
        inner_w = np.sum((gwx - gwy) * dx, axis=1)
        worst_mw = float(inner_w.min())
        checks.append(CheckResult("one-sided interaction bound",
                                  worst_mw >= -model.M_W - tol,
                                  min(0.0, worst_mw + model.M_W)))

    return ValidationReport(tuple(checks), eta, profile.c, eta < profile.c,
                            eta < 0.5 * model.m_V)


# ---------------------------------------------------------------------------
# Second-moment barrier


def gronwall_moment_bound(model: PotentialModel, eta: float,
                          second_moment_0: float) -> float:
    """Uniform-in-time bound on the nonlinear process second moment.

    Two differential inequalities are available for
    u(t) = E|X_t|^2, both of the form u' <= b + s sqrt(u) - 2 m u:

      * with the one-sided interaction bound:  b = 2 M_V + M_W + 2 d, m = m_V;
      * with a small interaction (eta < m_V / 2): b = 2 M_V + 2 d, m = m_V - eta.

    Each yields sup_t u <= max(u(0), fixed point).  When both apply the
    smaller bound is returned.
    """
    if second_moment_0 < 0.0:
        raise ValueError("initial second moment must be nonnegative")
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    s = 2.0 * model.grad_V_origin_norm()
    candidates = []
    if model.M_W is not None:
        b = 2.0 * model.M_V + model.M_W + 2.0 * model.dim
        candidates.append(_sqrt_fixed_point(b, s, model.m_V))
    if eta < 0.5 * model.m_V:
        b = 2.0 * model.M_V + 2.0 * model.dim
        candidates.append(_sqrt_fixed_point(b, s, model.m_V - eta))
    if not candidates:
        raise AdmissibilityError(
            "moment bound needs either a one-sided interaction bound M_W "
            "or eta < m_V / 2")
    return max(second_moment_0, min(candidates))


def _sqrt_fixed_point(b: float, s: float, m: float) -> float:
    """Largest root of 2 m u = b + s sqrt(u), as a bound on u."""
    if m <= 0.0:
        raise AdmissibilityError("moment bound needs a positive contraction margin")
    w = (s + np.sqrt(s * s + 8.0 * m * b)) / (4.0 * m)
    return float(w * w)
