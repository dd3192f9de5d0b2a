"""Coupled Euler simulation of the particle system and the nonlinear flow.

One run advances three coupled objects with a shared step size:

  * x        the N interacting particles (empirical interaction drift),
  * x_bar    N independent copies of the nonlinear process, each paired
             with one particle and driven by coupled noise,
  * the law entering x_bar's drift, either in closed form (exact mean
    recursion, available when both gradients are linear) or as an
    auxiliary ensemble of M independent reference particles.

The pair noise interpolates between reflection and synchronous coupling:
with E = x_bar - x and weights phi_r, phi_s depending on |E| through the
mixing band delta, the nonlinear copy receives phi_r G + phi_s Gt while
the particle receives phi_r (G - 2 <e, G> e) + phi_s Gt.  Both sides are
standard normal in law for any E, so marginals are those of the plain
Euler scheme; pathwise, large separations reflect (distance contracts in
expectation under the concave transform) and small separations merge.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import AdmissibilityError, NumericalError
from .potentials import PotentialModel
from .rates import RateProfile
from .rng import (CHANNEL_INIT, CHANNEL_REFERENCE, CHANNEL_REFLECT,
                  CHANNEL_SYNC, NoiseStreams)

_COUPLING_MODES = ("comonotone", "independent")
_CLOSURE_MODES = ("auto", "mean", "ensemble")


# ---------------------------------------------------------------------------
# Initial laws


@dataclass(frozen=True)
class LawSpec:
    """Initial law, one of three finite-fourth-moment families.

    point:c      all coordinates equal to c
    gaussian:m:s iid coordinates, mean m, standard deviation s
    ball:R       uniform on the centred ball of radius R
    """

    kind: str
    p1: float = 0.0
    p2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian", "ball"):
            raise ValueError(f"unknown law kind '{self.kind}'")
        if self.kind == "gaussian" and self.p2 < 0.0:
            raise ValueError("gaussian law needs a nonnegative std")
        if self.kind == "ball" and self.p1 < 0.0:
            raise ValueError("ball law needs a nonnegative radius")

    @staticmethod
    def parse(text: str) -> "LawSpec":
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "point":
            if len(parts) != 2:
                raise ValueError("point law syntax: point:<center>")
            return LawSpec("point", float(parts[1]))
        if kind == "gaussian":
            if len(parts) != 3:
                raise ValueError("gaussian law syntax: gaussian:<mean>:<std>")
            return LawSpec("gaussian", float(parts[1]), float(parts[2]))
        if kind == "ball":
            if len(parts) != 2:
                raise ValueError("ball law syntax: ball:<radius>")
            return LawSpec("ball", float(parts[1]))
        raise ValueError(f"unknown law kind '{kind}'")

    def render(self) -> str:
        if self.kind == "point":
            return f"point:{self.p1:g}"
        if self.kind == "gaussian":
            return f"gaussian:{self.p1:g}:{self.p2:g}"
        return f"ball:{self.p1:g}"

    def mean_vector(self, dim: int) -> np.ndarray:
        if self.kind in ("point", "gaussian"):
            return np.full(dim, self.p1)
        return np.zeros(dim)

    def second_moment(self, dim: int) -> float:
        """E |X|^2 for a draw in R^dim."""
        if self.kind == "point":
            return dim * self.p1 ** 2
        if self.kind == "gaussian":
            return dim * (self.p1 ** 2 + self.p2 ** 2)
        return self.p1 ** 2 * dim / (dim + 2.0)

    def transform(self, normals: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Map base draws to samples; sharing bases across two laws couples
        them comonotonically within each family."""
        n, dim = normals.shape
        if self.kind == "point":
            return np.full((n, dim), self.p1)
        if self.kind == "gaussian":
            return self.p1 + self.p2 * normals
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        safe = np.where(norms > 0.0, norms, 1.0)
        radii = self.p1 * uniforms[:, None] ** (1.0 / dim)
        return radii * normals / safe


# ---------------------------------------------------------------------------
# Mixing weights and the coupled noise map


def reflect_weight(dist: np.ndarray, delta: float) -> np.ndarray:
    """Weight of the reflection component: 0 below delta/2, 1 above delta,
    linear in between.  Lipschitz with constant 2/delta."""
    return np.clip(2.0 * np.asarray(dist, dtype=float) / delta - 1.0, 0.0, 1.0)


def sync_weight(dist: np.ndarray, delta: float) -> np.ndarray:
    w = reflect_weight(dist, delta)
    return np.sqrt(np.maximum(0.0, 1.0 - w * w))


@dataclass(frozen=True)
class MixingFunctions:
    """Reflection/synchronous weights as functions of the separation
    vector; phi_r^2 + phi_s^2 = 1 pointwise."""

    delta: float

    def phi_r(self, x: np.ndarray) -> np.ndarray:
        return reflect_weight(np.linalg.norm(np.atleast_2d(x), axis=-1), self.delta)

    def phi_s(self, x: np.ndarray) -> np.ndarray:
        return sync_weight(np.linalg.norm(np.atleast_2d(x), axis=-1), self.delta)


def make_mixing(delta: float) -> MixingFunctions:
    if delta <= 0.0:
        raise ValueError("mixing band delta must be positive")
    return MixingFunctions(float(delta))


def verify_mixing(delta: float, n_points: int = 4097) -> list:
    """Audit the mixing weights on a grid over [0, 2 delta]: the unit-circle
    identity, the band boundary values, and the 2/delta Lipschitz bound.
    Returns CheckResult rows."""
    from .potentials import CheckResult

    mix = make_mixing(delta)
    r = np.linspace(0.0, 2.0 * delta, n_points)
    x = r[:, None]
    wr = mix.phi_r(x)
    ws = mix.phi_s(x)

    identity_gap = float(np.max(np.abs(wr * wr + ws * ws - 1.0)))
    checks = [CheckResult(
        name="mixing unit-circle identity", passed=identity_gap <= 1e-12,
        worst_violation=identity_gap,
        detail=f"max |phi_r^2 + phi_s^2 - 1| over {n_points} radii")]

    probes = (
        (0.0, 0.0), (0.5 * delta, 0.0), (0.75 * delta, 0.5),
        (delta, 1.0), (2.0 * delta, 1.0),
    )
    boundary_gap = max(abs(float(mix.phi_r(np.array([[p]]))[0]) - want)
                       for p, want in probes)
    checks.append(CheckResult(
        name="mixing band boundaries", passed=boundary_gap == 0.0,
        worst_violation=boundary_gap,
        detail="phi_r at 0, delta/2, 3 delta/4, delta, 2 delta"))

    slopes = np.abs(np.diff(wr)) / np.diff(r)
    lip_gap = float(np.max(slopes) - 2.0 / delta)
    checks.append(CheckResult(
        name="mixing Lipschitz bound", passed=lip_gap <= 1e-9 / delta,
        worst_violation=max(0.0, lip_gap),
        detail=f"max finite-difference slope vs 2/delta = {2.0 / delta:.6g}"))
    return checks


def coupled_noise(diff: np.ndarray, g_reflect: np.ndarray, g_sync: np.ndarray,
                  delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Noise pair for (nonlinear copy, particle) given separation vectors.

    Each output is standard normal in law for every fixed ``diff`` because
    (phi_r, phi_s) lies on the unit circle and the reflection is an
    isometry; only the joint law of the pair depends on the separation.
    The unit vector of a zero separation is taken to be 0, harmless since
    the reflection weight vanishes there.
    """
    dist = np.linalg.norm(diff, axis=-1, keepdims=True)
    w_r = reflect_weight(dist, delta)
    w_s = np.sqrt(np.maximum(0.0, 1.0 - w_r * w_r))
    unit = np.where(dist > 0.0, diff / np.where(dist > 0.0, dist, 1.0), 0.0)
    radial = np.sum(unit * g_reflect, axis=-1, keepdims=True)
    reflected = g_reflect - 2.0 * radial * unit
    noise_nonlinear = w_r * g_reflect + w_s * g_sync
    noise_particles = w_r * reflected + w_s * g_sync
    return noise_nonlinear, noise_particles


# ---------------------------------------------------------------------------
# Simulation configuration


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    dim: int
    step_size: float
    t_end: float
    delta: float
    seed: int
    job: int = 0
    n_reference: int = 4096
    law_particles: LawSpec = field(default_factory=lambda: LawSpec("gaussian", 0.0, 1.0))
    law_nonlinear: LawSpec = field(default_factory=lambda: LawSpec("gaussian", 0.0, 1.0))
    initial_coupling: str = "comonotone"
    closure: str = "auto"
    output_times: tuple = ()

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.step_size <= 0.0:
            raise ValueError("step size must be positive")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.delta <= 0.0:
            raise ValueError("mixing band delta must be positive")
        if self.n_reference < 2:
            raise ValueError("reference ensemble needs at least 2 members")
        if self.initial_coupling not in _COUPLING_MODES:
            raise ValueError(f"initial_coupling must be one of {_COUPLING_MODES}")
        if self.closure not in _CLOSURE_MODES:
            raise ValueError(f"closure must be one of {_CLOSURE_MODES}")
        for t in self.output_times:
            if t < 0.0 or t > self.t_end + 1e-9:
                raise ValueError(f"output time {t} outside [0, t_end]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.step_size))

    def output_steps(self) -> list:
        """Requested output times snapped to step indices; t=0 always
        included, duplicates merged."""
        idx = {0, self.n_steps}
        for t in self.output_times:
            idx.add(min(self.n_steps, int(round(t / self.step_size))))
        return sorted(idx)


def resolve_closure(model: PotentialModel, requested: str) -> str:
    """Pick how the nonlinear drift is closed.

    The exact mean recursion needs both gradients linear (then the
    convolution only sees the mean, and the mean obeys a closed
    recursion under Euler); otherwise fall back to a reference ensemble.
    """
    exact = model.grad_W_linear is not None and model.quadratic_rho is not None
    if requested == "auto":
        return "mean" if exact else "ensemble"
    if requested == "mean" and not exact:
        raise AdmissibilityError(
            "mean closure is exact only for linear grad_V and grad_W; "
            "use closure=ensemble for this model")
    return requested


# ---------------------------------------------------------------------------
# Coupled state and the stepping operations


@dataclass
class CoupledEnsemble:
    """State of one coupled run.

    ``ref`` approximates the nonlinear law when no closed form exists;
    in mean-closure mode it is None and ``closure_mean`` carries the
    exactly-evolved mean of the nonlinear law.  The pair separation is
    E = x_bar - x, recomputed on demand so it can never drift out of
    sync with the components.
    """

    t: float
    h: float
    step: int
    x_bar: np.ndarray
    x: np.ndarray
    ref: Optional[np.ndarray]
    closure_mean: Optional[np.ndarray]
    closure: str
    streams: NoiseStreams

    @property
    def E(self) -> np.ndarray:
        return self.x_bar - self.x


def sample_initial(cfg: SimConfig, streams: NoiseStreams, closure: str):
    """Initial draws in a fixed consumption order from the init channel.

    Order: pair base normals, pair base uniforms, extra bases for the
    independent coupling, then the reference ensemble.  Keeping the order
    fixed makes every run reproducible from (seed, job) alone.
    """
    gen = streams.generator(0, CHANNEL_INIT)
    n, d = cfg.n_particles, cfg.dim
    z_pair = gen.standard_normal((n, d))
    u_pair = gen.uniform(size=n)
    if cfg.initial_coupling == "comonotone":
        z_other, u_other = z_pair, u_pair
    else:
        z_other = gen.standard_normal((n, d))
        u_other = gen.uniform(size=n)
    x0 = cfg.law_particles.transform(z_pair, u_pair)
    xbar0 = cfg.law_nonlinear.transform(z_other, u_other)

    if closure == "ensemble":
        m = cfg.n_reference
        if m < cfg.n_particles:
            raise ValueError(
                "reference ensemble must be at least as large as the particle system")
        z_ref = gen.standard_normal((m, d))
        u_ref = gen.uniform(size=m)
        ref0 = cfg.law_nonlinear.transform(z_ref, u_ref)
    else:
        ref0 = None
    return x0, xbar0, ref0


def init_coupled(cfg: SimConfig, model: PotentialModel) -> CoupledEnsemble:
    if cfg.dim != model.dim:
        raise ValueError(f"config dim {cfg.dim} != model dim {model.dim}")
    closure = resolve_closure(model, cfg.closure)
    streams = NoiseStreams(cfg.seed, cfg.job)
    x0, xbar0, ref0 = sample_initial(cfg, streams, closure)
    mean0 = cfg.law_nonlinear.mean_vector(cfg.dim) if closure == "mean" else None
    return CoupledEnsemble(t=0.0, h=cfg.step_size, step=0, x_bar=xbar0, x=x0,
                           ref=ref0, closure_mean=mean0, closure=closure,
                           streams=streams)


def step_particles(state: np.ndarray, model: PotentialModel, h: float,
                   noise: np.ndarray) -> np.ndarray:
    """One Euler step of the interacting particle system."""
    drift = -(model.grad_V(state) + model.interaction_within(state))
    return state + h * drift + np.sqrt(2.0 * h) * noise


def advance_reference(ref: np.ndarray, model: PotentialModel, h: float,
                      noise: np.ndarray) -> np.ndarray:
    """One Euler step of the self-interacting reference ensemble standing
    in for the nonlinear flow."""
    drift = -(model.grad_V(ref) + model.interaction_within(ref))
    return ref + h * drift + np.sqrt(2.0 * h) * noise


def _nonlinear_drift(ens: CoupledEnsemble, model: PotentialModel) -> np.ndarray:
    if ens.closure == "mean":
        conv = model.grad_W_linear * (ens.x_bar - ens.closure_mean)
        return -(model.grad_V(ens.x_bar) + conv)
    return -(model.grad_V(ens.x_bar) + model.interaction_against(ens.x_bar, ens.ref))


def _check_finite(t: float, *arrays) -> None:
    for a in arrays:
        if a is not None and not np.isfinite(a).all():
            raise NumericalError("simulation state left the finite range", t=t)


def step_coupled(ens: CoupledEnsemble, model: PotentialModel,
                 mix: MixingFunctions) -> CoupledEnsemble:
    """One Euler step of the full coupled system.

    Noise channels are drawn by step index, so the trajectory is a pure
    function of (seed, job) regardless of scheduling.
    """
    step = ens.step + 1
    h = ens.h
    shape = ens.x.shape
    g_reflect = ens.streams.block(step, CHANNEL_REFLECT, shape)
    g_sync = ens.streams.block(step, CHANNEL_SYNC, shape)
    noise_bar, noise_par = coupled_noise(ens.E, g_reflect, g_sync, mix.delta)

    drift_bar = _nonlinear_drift(ens, model)
    x = step_particles(ens.x, model, h, noise_par)
    x_bar = ens.x_bar + h * drift_bar + np.sqrt(2.0 * h) * noise_bar

    ref = ens.ref
    closure_mean = ens.closure_mean
    if ens.closure == "mean":
        closure_mean = (1.0 - h * model.quadratic_rho) * closure_mean
    else:
        z_ref = ens.streams.block(step, CHANNEL_REFERENCE, ref.shape)
        ref = advance_reference(ref, model, h, z_ref)

    t = step * h
    _check_finite(t, x, x_bar, ref)
    return replace(ens, t=t, step=step, x=x, x_bar=x_bar, ref=ref,
                   closure_mean=closure_mean)


# ---------------------------------------------------------------------------
# Full runs


@dataclass
class SimRecords:
    times: np.ndarray
    mean_f: np.ndarray
    mean_euclid: np.ndarray
    second_moment_particles: np.ndarray
    second_moment_nonlinear: np.ndarray
    upsilon: np.ndarray
    closure: str
    n_reference: int


def _upsilon(ens: CoupledEnsemble, model: PotentialModel) -> float:
    """Mismatch between the empirical interaction among the nonlinear
    copies and the mean-field drift they actually use."""
    if ens.closure == "mean":
        ref_mean = ens.closure_mean
    else:
        ref_mean = ens.ref.mean(axis=0)
    if model.grad_W_linear is not None:
        return abs(model.grad_W_linear) * float(
            np.linalg.norm(ens.x_bar.mean(axis=0) - ref_mean))
    gap = model.interaction_within(ens.x_bar) \
        - model.interaction_against(ens.x_bar, ens.ref)
    return float(np.linalg.norm(gap, axis=1).mean())


def run_coupled(model: PotentialModel, profile: RateProfile,
                cfg: SimConfig) -> SimRecords:
    """Advance the coupled system to t_end, collecting summary records at
    the output steps (t = 0 always included)."""
    ens = init_coupled(cfg, model)
    mix = make_mixing(cfg.delta)
    out_set = set(cfg.output_steps())
    rows = []

    def record() -> None:
        dist = np.linalg.norm(ens.E, axis=1)
        rows.append((
            ens.t,
            float(np.mean(profile.f(dist))),
            float(dist.mean()),
            float(np.mean(np.sum(ens.x * ens.x, axis=1))),
            float(np.mean(np.sum(ens.x_bar * ens.x_bar, axis=1))),
            _upsilon(ens, model),
        ))

    record()
    # divergence is detected by the explicit finiteness check, so the
    # overflow warnings on the way there are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.n_steps):
            ens = step_coupled(ens, model, mix)
            if ens.step in out_set:
                record()

    arr = np.asarray(rows, dtype=float)
    return SimRecords(
        times=arr[:, 0], mean_f=arr[:, 1], mean_euclid=arr[:, 2],
        second_moment_particles=arr[:, 3], second_moment_nonlinear=arr[:, 4],
        upsilon=arr[:, 5], closure=ens.closure,
        n_reference=0 if ens.closure == "mean" else cfg.n_reference,
    )
