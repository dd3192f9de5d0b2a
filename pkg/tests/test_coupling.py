"""Coupled simulation: mixing weights, noise map identities, marginal
laws, closure modes, and reproducibility."""
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mckean.coupling import (CoupledEnsemble, LawSpec, SimConfig,
                             advance_reference, coupled_noise, init_coupled,
                             make_mixing, reflect_weight, run_coupled,
                             sample_initial, step_coupled, step_particles,
                             sync_weight, verify_mixing)
from mckean.errors import AdmissibilityError, NumericalError
from mckean.potentials import builtin_double_well, builtin_quadratic
from mckean.rng import NoiseStreams


# -- initial laws -------------------------------------------------------------


@pytest.mark.parametrize("text", ["point:2", "gaussian:0:1", "gaussian:-1.5:0.25",
                                  "ball:3"])
def test_law_parse_render_round_trip(text):
    law = LawSpec.parse(text)
    assert LawSpec.parse(law.render()) == law


@pytest.mark.parametrize("text", ["point", "gaussian:1", "ball:-1", "box:2",
                                  "gaussian:0:-1", "point:a"])
def test_law_parse_rejects(text):
    with pytest.raises(ValueError):
        LawSpec.parse(text)


def test_law_second_moments():
    assert LawSpec("point", 2.0).second_moment(3) == 12.0
    assert LawSpec("gaussian", 1.0, 2.0).second_moment(2) == 10.0
    # uniform ball: E|X|^2 = R^2 d/(d+2)
    assert LawSpec("ball", 3.0).second_moment(4) == pytest.approx(6.0)


def test_ball_sampler_statistics():
    gen = np.random.default_rng(5)
    law = LawSpec("ball", 2.0)
    z = gen.standard_normal((40000, 3))
    u = gen.uniform(size=40000)
    x = law.transform(z, u)
    r = np.linalg.norm(x, axis=1)
    assert r.max() <= 2.0 + 1e-12
    assert np.mean(r * r) == pytest.approx(law.second_moment(3), rel=0.02)


# -- mixing weights -----------------------------------------------------------


def test_make_mixing_rejects_nonpositive():
    with pytest.raises(ValueError):
        make_mixing(0.0)
    with pytest.raises(ValueError):
        make_mixing(-1.0)


def test_mixing_boundary_values():
    mix = make_mixing(2.0)
    x = np.array([[0.0], [1.0], [1.5], [2.0], [5.0]])
    np.testing.assert_array_equal(mix.phi_r(x), [0.0, 0.0, 0.5, 1.0, 1.0])
    np.testing.assert_array_equal(mix.phi_s(x)[[0, 1, 3, 4]], [1.0, 1.0, 0.0, 0.0])


@given(delta=st.floats(1e-3, 1e3), scale=st.floats(0.0, 3.0))
@settings(max_examples=50, deadline=None)
def test_mixing_unit_circle_identity(delta, scale):
    r = np.linspace(0.0, scale * delta, 101)
    wr = reflect_weight(r, delta)
    ws = sync_weight(r, delta)
    np.testing.assert_allclose(wr * wr + ws * ws, 1.0, atol=1e-12)


@pytest.mark.parametrize("delta", [1e-3, 0.316, 2.0, 50.0])
def test_verify_mixing_passes(delta):
    assert all(c.passed for c in verify_mixing(delta))


# -- the coupled noise map ------------------------------------------------------


def test_noise_pure_reflection_zone():
    # at separation >= delta the particle receives the mirrored draw; in
    # one dimension that is exactly -G
    diff = np.array([[3.0], [-4.0]])
    g = np.array([[1.25], [-0.5]])
    gt = np.array([[9.0], [9.0]])  # must be ignored
    bar, par = coupled_noise(diff, g, gt, delta=1.0)
    np.testing.assert_array_equal(bar, g)
    np.testing.assert_array_equal(par, -g)


def test_noise_pure_synchronous_zone():
    diff = np.array([[0.1, 0.0], [0.0, 0.0]])
    g = np.random.default_rng(0).standard_normal((2, 2))
    gt = np.random.default_rng(1).standard_normal((2, 2))
    bar, par = coupled_noise(diff, g, gt, delta=1.0)
    np.testing.assert_array_equal(bar, gt)
    np.testing.assert_array_equal(par, gt)


def test_noise_reflection_is_isometry():
    # wherever the reflection weight saturates, the injected noise norms
    # agree exactly; the mirror preserves length
    rng = np.random.default_rng(2)
    diff = rng.standard_normal((100, 3)) * 10.0
    g = rng.standard_normal((100, 3))
    gt = rng.standard_normal((100, 3))
    bar, par = coupled_noise(diff, g, gt, delta=1e-6)
    np.testing.assert_allclose(np.linalg.norm(par, axis=1),
                               np.linalg.norm(bar, axis=1), atol=1e-12)


@given(seed=st.integers(0, 500), delta=st.floats(0.1, 5.0))
@settings(max_examples=50, deadline=None)
def test_noise_radial_identities(seed, delta):
    # along the separation direction: e.(bar - par) = 2 phi_r e.G and
    # e.(bar + par) = 2 phi_s e.Gt; orthogonal components coincide
    rng = np.random.default_rng(seed)
    diff = rng.standard_normal((64, 3)) * rng.uniform(0, 2 * delta)
    g = rng.standard_normal((64, 3))
    gt = rng.standard_normal((64, 3))
    bar, par = coupled_noise(diff, g, gt, delta)
    dist = np.linalg.norm(diff, axis=1, keepdims=True)
    e = np.where(dist > 0, diff / np.where(dist > 0, dist, 1.0), 0.0)
    wr = reflect_weight(dist[:, 0], delta)
    ws = sync_weight(dist[:, 0], delta)
    eg = np.sum(e * g, axis=1)
    egt = np.sum(e * gt, axis=1)
    np.testing.assert_allclose(np.sum(e * (bar - par), axis=1), 2 * wr * eg,
                               atol=1e-12)
    np.testing.assert_allclose(np.sum(e * (bar + par), axis=1), 2 * ws * egt,
                               atol=1e-12)
    perp_bar = bar - np.sum(e * bar, axis=1, keepdims=True) * e
    perp_par = par - np.sum(e * par, axis=1, keepdims=True) * e
    np.testing.assert_allclose(perp_bar, perp_par, atol=1e-12)


def test_noise_marginals_standard_normal_in_mixing_zone():
    # with both weights active the pair is correlated but each side stays
    # exactly standard normal in law; checked through moments
    n = 200000
    rng = np.random.default_rng(11)
    diff = np.tile([[0.75, 0.0]], (n, 1))  # phi_r = 1/2 at 3 delta/4, delta=1
    g = rng.standard_normal((n, 2))
    gt = rng.standard_normal((n, 2))
    bar, par = coupled_noise(diff, g, gt, delta=1.0)
    for side in (bar, par):
        assert np.abs(side.mean(axis=0)).max() < 0.01
        cov = np.cov(side.T)
        np.testing.assert_allclose(cov, np.eye(2), atol=0.02)


# -- configuration ---------------------------------------------------------------


def test_sim_config_validation():
    ok = dict(n_particles=4, dim=1, step_size=0.1, t_end=1.0, delta=1.0, seed=0)
    SimConfig(**ok)
    for bad in (dict(n_particles=1), dict(dim=0), dict(step_size=0.0),
                dict(t_end=-1.0), dict(delta=0.0), dict(n_reference=1),
                dict(initial_coupling="sorted"), dict(closure="exact"),
                dict(output_times=(2.0,))):
        with pytest.raises(ValueError):
            SimConfig(**{**ok, **bad})


def test_output_steps_snap_and_dedupe():
    cfg = SimConfig(n_particles=4, dim=1, step_size=0.1, t_end=1.0, delta=1.0,
                    seed=0, output_times=(0.0, 0.1, 0.1001, 0.55, 1.0))
    assert cfg.n_steps == 10
    assert cfg.output_steps() == [0, 1, 6, 10]


def test_mean_closure_requires_linear_model():
    dw = builtin_double_well(a=1.0, lam=0.1)
    cfg = SimConfig(n_particles=4, dim=1, step_size=0.1, t_end=0.2, delta=1.0,
                    seed=0, closure="mean")
    with pytest.raises(AdmissibilityError):
        init_coupled(cfg, dw)


def test_reference_ensemble_must_cover_particles():
    dw = builtin_double_well(a=1.0, lam=0.1)
    cfg = SimConfig(n_particles=64, dim=1, step_size=0.1, t_end=0.2, delta=1.0,
                    seed=0, n_reference=32)
    with pytest.raises(ValueError):
        init_coupled(cfg, dw)


def test_dim_mismatch_rejected():
    q = builtin_quadratic(rho=1.0, lam=0.0, dim=2)
    cfg = SimConfig(n_particles=4, dim=1, step_size=0.1, t_end=0.1, delta=1.0,
                    seed=0)
    with pytest.raises(ValueError):
        init_coupled(cfg, q)


# -- initial sampling --------------------------------------------------------------


def test_comonotone_same_law_starts_identical():
    cfg = SimConfig(n_particles=32, dim=2, step_size=0.1, t_end=0.1, delta=1.0,
                    seed=4)
    x0, xb0, ref0 = sample_initial(cfg, NoiseStreams(4, 0), "mean")
    np.testing.assert_array_equal(x0, xb0)
    assert ref0 is None


def test_independent_coupling_differs():
    cfg = SimConfig(n_particles=32, dim=2, step_size=0.1, t_end=0.1, delta=1.0,
                    seed=4, initial_coupling="independent")
    x0, xb0, _ = sample_initial(cfg, NoiseStreams(4, 0), "mean")
    assert not np.array_equal(x0, xb0)


def test_point_laws_are_exact():
    cfg = SimConfig(n_particles=8, dim=3, step_size=0.1, t_end=0.1, delta=1.0,
                    seed=0, law_particles=LawSpec("point", 2.0),
                    law_nonlinear=LawSpec("point", -1.0))
    x0, xb0, ref0 = sample_initial(cfg, NoiseStreams(0, 0), "ensemble")
    np.testing.assert_array_equal(x0, 2.0)
    np.testing.assert_array_equal(xb0, -1.0)
    np.testing.assert_array_equal(ref0, -1.0)
    assert ref0.shape == (cfg.n_reference, 3)


# -- stepping operations -------------------------------------------------------------


def test_step_particles_euler_example():
    # quadratic rho=1, x=1, h=0.1, zero noise: x' = x - h x = 0.9
    q = builtin_quadratic(rho=1.0, lam=0.0, dim=1)
    x = np.ones((3, 1))
    out = step_particles(x, q, 0.1, np.zeros((3, 1)))
    np.testing.assert_allclose(out, 0.9)


def test_step_particles_double_well_drift_example():
    # a=1, lam=0.5, N=2 at (1, 0): particle at 1 feels grad_V = 4-2 = 2
    # and interaction (1/2)(grad_W(0) + grad_W(1)) = 0.5, so drift -2.5
    dw = builtin_double_well(a=1.0, lam=0.5, dim=1)
    x = np.array([[1.0], [0.0]])
    out = step_particles(x, dw, 0.01, np.zeros((2, 1)))
    np.testing.assert_allclose((out - x)[0, 0] / 0.01, -2.5, atol=1e-12)


def test_advance_reference_is_plain_euler():
    dw = builtin_double_well(a=0.5, lam=0.2, dim=2)
    rng = np.random.default_rng(8)
    ref = rng.standard_normal((16, 2))
    z = rng.standard_normal((16, 2))
    h = 0.05
    want = ref - h * (dw.grad_V(ref) + dw.interaction_within(ref)) \
        + np.sqrt(2 * h) * z
    np.testing.assert_allclose(advance_reference(ref, dw, h, z), want,
                               atol=1e-14)


def test_advance_reference_brownian_limit():
    # negligible drift: the ensemble spreads like Brownian motion with
    # variance 2t per coordinate
    q = builtin_quadratic(rho=1e-12, lam=0.0, dim=1)
    streams = NoiseStreams(31, 0)
    ref = np.zeros((50000, 1))
    h, steps = 0.01, 10
    for k in range(1, steps + 1):
        ref = advance_reference(ref, q, h, streams.block(k, 3, ref.shape))
    var = ref.var()
    assert abs(var - 2 * h * steps) < 0.005


def test_step_coupled_keeps_separation_consistent():
    q = builtin_quadratic(rho=1.0, lam=0.0, dim=2)
    cfg = SimConfig(n_particles=16, dim=2, step_size=0.05, t_end=0.5, delta=1.0,
                    seed=6, law_particles=LawSpec("gaussian", 1.0, 0.5))
    ens = init_coupled(cfg, q)
    mix = make_mixing(cfg.delta)
    for _ in range(5):
        ens = step_coupled(ens, q, mix)
    np.testing.assert_array_equal(ens.E, ens.x_bar - ens.x)
    assert ens.step == 5
    assert ens.t == pytest.approx(0.25)


# -- marginal law of the coupled pair ---------------------------------------------


def test_marginals_follow_euler_ou_recursion(quadratic_model, quadratic_profile):
    # both coupled components must have the exact Euler OU law: the noise
    # map only correlates them.  mean_k = m0 (1-h)^k,
    # var_k = (1-h)^{2k} v0 + 2h (1 - (1-h)^{2k}) / (2h - h^2)
    h, steps, n = 0.01, 100, 20000
    cfg = SimConfig(n_particles=n, dim=1, step_size=h, t_end=h * steps,
                    delta=10 * np.sqrt(h), seed=37,
                    law_particles=LawSpec("point", 2.0),
                    law_nonlinear=LawSpec("gaussian", 0.0, 1.0))
    ens = init_coupled(cfg, quadratic_model)
    mix = make_mixing(cfg.delta)
    for _ in range(steps):
        ens = step_coupled(ens, quadratic_model, mix)
    decay = (1.0 - h) ** steps
    decay2 = (1.0 - h) ** (2 * steps)
    v_inf = 2.0 * h / (2.0 * h - h * h)
    cases = [
        ("particles", ens.x[:, 0], 2.0 * decay, decay2 * 0.0 + (1 - decay2) * v_inf),
        ("nonlinear", ens.x_bar[:, 0], 0.0, decay2 * 1.0 + (1 - decay2) * v_inf),
    ]
    for name, sample, mean_want, var_want in cases:
        se_mean = np.sqrt(var_want / n)
        se_var = var_want * np.sqrt(2.0 / (n - 1))
        assert abs(sample.mean() - mean_want) < 4 * se_mean, name
        assert abs(sample.var(ddof=1) - var_want) < 4 * se_var, name


def test_closure_modes_agree(quadratic_profile):
    q = builtin_quadratic(rho=1.0, lam=0.1, dim=1)
    base = SimConfig(n_particles=2048, dim=1, step_size=0.01, t_end=1.0,
                     delta=0.5, seed=13, n_reference=8192,
                     law_particles=LawSpec("point", 2.0),
                     law_nonlinear=LawSpec("gaussian", 0.0, 1.0),
                     output_times=(0.5, 1.0))
    rm = run_coupled(q, quadratic_profile, dataclasses.replace(base, closure="mean"))
    re_ = run_coupled(q, quadratic_profile,
                      dataclasses.replace(base, closure="ensemble"))
    assert rm.closure == "mean" and re_.closure == "ensemble"
    np.testing.assert_allclose(rm.mean_f, re_.mean_f, atol=0.01)


def test_same_law_synchronous_pairs_never_separate(quadratic_model,
                                                   quadratic_profile):
    cfg = SimConfig(n_particles=64, dim=1, step_size=0.01, t_end=0.3, delta=1.0,
                    seed=2, law_particles=LawSpec("gaussian", 0.0, 1.0),
                    law_nonlinear=LawSpec("gaussian", 0.0, 1.0),
                    output_times=(0.1, 0.2, 0.3))
    rec = run_coupled(quadratic_model, quadratic_profile, cfg)
    np.testing.assert_array_equal(rec.mean_f, 0.0)
    np.testing.assert_array_equal(rec.mean_euclid, 0.0)


def test_pair_distance_contracts_for_convex_model(quadratic_model,
                                                  quadratic_profile):
    # no interaction: 10^4 independent reflection couplings; the expected
    # distance must decrease along the whole grid
    cfg = SimConfig(n_particles=10**4, dim=1, step_size=0.005, t_end=1.0,
                    delta=10 * np.sqrt(0.005), seed=19,
                    law_particles=LawSpec("point", 2.0),
                    law_nonlinear=LawSpec("point", 0.0),
                    output_times=tuple(np.linspace(0.0, 1.0, 11)))
    rec = run_coupled(quadratic_model, quadratic_profile, cfg)
    assert np.all(np.diff(rec.mean_euclid) <= 1e-3)


def test_step_size_refinement_weak_order(quadratic_model, quadratic_profile):
    # E f(|E_1|) settles at O(h): successive halvings shrink the change
    vals = {}
    for h in (0.08, 0.04, 0.02, 0.01):
        cfg = SimConfig(n_particles=5 * 10**4, dim=1, step_size=h, t_end=1.0,
                        delta=10 * np.sqrt(h), seed=23,
                        law_particles=LawSpec("point", 2.0),
                        law_nonlinear=LawSpec("point", 0.0))
        vals[h] = run_coupled(quadratic_model, quadratic_profile, cfg).mean_f[-1]
    d1 = abs(vals[0.08] - vals[0.04])
    d2 = abs(vals[0.04] - vals[0.02])
    d3 = abs(vals[0.02] - vals[0.01])
    assert d1 < 1.5 * 0.08
    assert d2 < d1 and d3 < d2
    assert d3 < 0.45 * d1


# -- full runs ------------------------------------------------------------------


def test_run_coupled_deterministic(double_well_model, double_well_profile):
    cfg = SimConfig(n_particles=16, dim=1, step_size=0.02, t_end=0.2,
                    delta=1.0, seed=14, n_reference=64,
                    output_times=(0.1, 0.2))
    a = run_coupled(double_well_model, double_well_profile, cfg)
    b = run_coupled(double_well_model, double_well_profile, cfg)
    np.testing.assert_array_equal(a.mean_f, b.mean_f)
    np.testing.assert_array_equal(a.upsilon, b.upsilon)
    c = run_coupled(double_well_model, double_well_profile,
                    dataclasses.replace(cfg, job=1))
    assert not np.array_equal(a.mean_f, c.mean_f)


def test_run_coupled_zero_horizon(quadratic_model, quadratic_profile):
    cfg = SimConfig(n_particles=8, dim=1, step_size=0.01, t_end=0.0, delta=1.0,
                    seed=3, law_particles=LawSpec("point", 2.0),
                    law_nonlinear=LawSpec("point", 0.0))
    rec = run_coupled(quadratic_model, quadratic_profile, cfg)
    assert rec.times.tolist() == [0.0]
    assert rec.second_moment_particles[0] == 4.0
    assert rec.second_moment_nonlinear[0] == 0.0
    assert rec.mean_f[0] == pytest.approx(
        float(quadratic_profile.f(np.array([2.0]))[0]))


def test_run_coupled_flags_divergence(double_well_profile):
    # a huge step makes the quartic drift explode; the failure must carry
    # the in-simulation time
    dw = builtin_double_well(a=0.5, lam=0.01, dim=1)
    cfg = SimConfig(n_particles=8, dim=1, step_size=2.0, t_end=40.0, delta=1.0,
                    seed=0, n_reference=8,
                    law_particles=LawSpec("gaussian", 0.0, 2.0))
    with pytest.raises(NumericalError) as exc:
        run_coupled(dw, double_well_profile, cfg)
    assert exc.value.t is not None


def test_records_report_closure(quadratic_model, quadratic_profile,
                                double_well_model, double_well_profile):
    cfg = SimConfig(n_particles=8, dim=1, step_size=0.05, t_end=0.1, delta=1.0,
                    seed=1, n_reference=32)
    rq = run_coupled(quadratic_model, quadratic_profile, cfg)
    assert rq.closure == "mean" and rq.n_reference == 0
    rd = run_coupled(double_well_model, double_well_profile, cfg)
    assert rd.closure == "ensemble" and rd.n_reference == 32
