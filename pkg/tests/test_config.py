"""Flat config file format: parsing, rendering, auto-token resolution."""
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mckean.config import (ExperimentConfig, build_model, load_config,
                           make_sim_config, parse_config, render_config,
                           resolved_delta, resolved_n_reference,
                           resolved_output_times)


def test_minimal_config():
    cfg = parse_config("experiment = rates\n")
    assert cfg.experiment == "rates"
    assert cfg.model == "quadratic"
    assert cfg.schema_version == 1


def test_comments_and_blank_lines_ignored():
    text = """
    # header comment
    experiment = moments   # trailing comment

    n_particles = 128
    """
    cfg = parse_config(text)
    assert cfg.n_particles == 128


@pytest.mark.parametrize("text,fragment", [
    ("n_particles = 4\n", "must set 'experiment'"),
    ("experiment = rates\nexperiment = rates\n", "duplicate"),
    ("experiment = rates\nwibble = 3\n", "unknown config key"),
    ("experiment = rates\nn_particles\n", "expected 'key = value'"),
    ("experiment = rates\nstep_size = fast\n", "bad value"),
    ("experiment = launch\n", "experiment must be one of"),
    ("experiment = rates\nschema_version = 99\n", "schema_version"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ValueError, match=fragment):
        parse_config(text)


def test_validation_catches_bad_fields():
    base = dict(experiment="contraction")
    for bad in (dict(n_particles=1), dict(step_size=0.0), dict(dim=0),
                dict(grid_points=10), dict(plateau_fraction=0.0),
                dict(seed=-1), dict(law_particles="box:1"),
                dict(eta=-0.5), dict(n_values=(4, 1)),
                dict(initial_coupling="matched"), dict(closure="always"),
                dict(eta="fast"), dict(validation_samples=10)):
        with pytest.raises(ValueError):
            ExperimentConfig(**{**base, **bad})


config_strategy = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(("rates", "validate", "contraction",
                                "poc-scaling", "moments")),
    model=st.sampled_from(("quadratic", "double_well")),
    dim=st.integers(1, 4),
    a=st.floats(0.1, 5.0),
    lam=st.floats(0.0, 0.2),
    rho=st.floats(0.1, 5.0),
    eta=st.one_of(st.just("auto"), st.floats(0.0, 0.2)),
    r_max=st.one_of(st.just("auto"), st.floats(10.0, 50.0)),
    n_particles=st.integers(2, 4096),
    n_values=st.lists(st.integers(2, 2048), max_size=4).map(tuple),
    n_replications=st.integers(1, 64),
    n_reference=st.one_of(st.just("auto"), st.integers(2, 8192)),
    step_size=st.floats(1e-4, 0.5),
    t_end=st.floats(0.0, 20.0),
    delta=st.one_of(st.just("auto"), st.floats(1e-3, 2.0)),
    law_particles=st.sampled_from(("point:2", "gaussian:0:1", "ball:1.5",
                                   "gaussian:-1:0.5")),
    initial_coupling=st.sampled_from(("comonotone", "independent")),
    closure=st.sampled_from(("auto", "mean", "ensemble")),
    seed=st.integers(0, 2**64 - 1),
    plateau_fraction=st.floats(0.05, 1.0),
)


@given(cfg=config_strategy)
@settings(max_examples=80, deadline=None)
def test_render_parse_round_trip(cfg):
    assert parse_config(render_config(cfg)) == cfg


def test_load_config_round_trip(tmp_path):
    cfg = ExperimentConfig(experiment="moments", step_size=0.0025,
                           n_values=(16, 64), output_times=(0.5, 1.0),
                           seed=99)
    path = tmp_path / "exp.cfg"
    path.write_text(render_config(cfg))
    assert load_config(path) == cfg


def test_build_model_dispatch():
    q = build_model(ExperimentConfig(experiment="rates", model="quadratic",
                                     rho=2.0, lam=0.1, dim=3))
    assert q.name == "quadratic" and q.dim == 3 and q.quadratic_rho == 2.0
    d = build_model(ExperimentConfig(experiment="rates", model="double_well",
                                     a=0.7, lam=0.0, dim=2))
    assert d.name == "double_well" and d.params["a"] == 0.7


def test_auto_resolutions():
    cfg = ExperimentConfig(experiment="contraction", step_size=0.01)
    assert resolved_delta(cfg) == pytest.approx(1.0)
    assert resolved_n_reference(cfg, 64) == 4096
    assert resolved_n_reference(cfg, 1024) == 16384
    explicit = dataclasses.replace(cfg, delta=0.3, n_reference=512)
    assert resolved_delta(explicit) == 0.3
    assert resolved_n_reference(explicit, 1024) == 512


def test_resolved_output_times_default_grid():
    cfg = ExperimentConfig(experiment="contraction", t_end=2.0,
                           n_output_times=5)
    np.testing.assert_allclose(resolved_output_times(cfg),
                               [0.0, 0.5, 1.0, 1.5, 2.0])
    explicit = dataclasses.replace(cfg, output_times=(0.5, 2.0))
    assert resolved_output_times(explicit) == (0.5, 2.0)


def test_make_sim_config_carries_fields():
    cfg = ExperimentConfig(experiment="contraction", dim=2, step_size=0.004,
                           t_end=1.0, seed=5, law_particles="point:1",
                           law_nonlinear="gaussian:0:2",
                           initial_coupling="independent")
    sim = make_sim_config(cfg, n_particles=128, job=77)
    assert sim.n_particles == 128
    assert sim.job == 77
    assert sim.dim == 2
    assert sim.delta == pytest.approx(10 * np.sqrt(0.004))
    assert sim.law_particles.kind == "point"
    assert sim.law_nonlinear.p2 == 2.0
    assert sim.initial_coupling == "independent"
    assert sim.output_times == resolved_output_times(cfg)
