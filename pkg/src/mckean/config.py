"""Flat key = value experiment configuration.

One experiment is one text file: `key = value` lines, `#` comments,
nothing nested, so that reproducibility artifacts stay diffable.  Every
field has a default; unknown keys and duplicate keys are errors.  A few
fields accept the literal token `auto` and are resolved against the
model or the step size at run time:

  eta          auto -> 2 lip_W / phi(R0)
  delta        auto -> 10 sqrt(step_size)
  n_reference  auto -> max(4096, 16 N)
  r_max        auto -> max(2 R1, 10 R0 + 10)
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np

from .coupling import LawSpec, SimConfig
from .potentials import PotentialModel, builtin_double_well, builtin_quadratic

SCHEMA_VERSION = 1

EXPERIMENTS = ("rates", "validate", "contraction", "poc-scaling", "moments")
MODELS = ("quadratic", "double_well")

AutoFloat = Union[str, float]
AutoInt = Union[str, int]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    schema_version: int = SCHEMA_VERSION
    model: str = "quadratic"
    dim: int = 1
    a: float = 1.0
    lam: float = 0.0
    rho: float = 1.0
    sign: int = 1
    eta: AutoFloat = "auto"
    r_max: AutoFloat = "auto"
    grid_points: int = 4096
    quadrature_tol: float = 1e-10
    n_particles: int = 64
    n_values: tuple = ()
    n_replications: int = 8
    n_reference: AutoInt = "auto"
    step_size: float = 1e-3
    t_end: float = 1.0
    delta: AutoFloat = "auto"
    law_particles: str = "gaussian:0:1"
    law_nonlinear: str = "gaussian:0:1"
    initial_coupling: str = "comonotone"
    closure: str = "auto"
    output_times: tuple = ()
    n_output_times: int = 33
    seed: int = 0
    plateau_fraction: float = 0.25
    bootstrap_samples: int = 200
    validation_samples: int = 10000

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"config schema_version {self.schema_version} unsupported "
                f"(this build reads version {SCHEMA_VERSION})")
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.sign not in (1, -1):
            raise ValueError("sign must be 1 or -1")
        for name in ("eta", "r_max", "delta"):
            v = getattr(self, name)
            if isinstance(v, str) and v != "auto":
                raise ValueError(f"{name} must be a number or 'auto'")
        if isinstance(self.n_reference, str) and self.n_reference != "auto":
            raise ValueError("n_reference must be an integer or 'auto'")
        if not isinstance(self.eta, str) and self.eta < 0.0:
            raise ValueError("eta must be nonnegative")
        if not isinstance(self.delta, str) and self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.grid_points < 1000:
            raise ValueError("grid_points must be >= 1000")
        if self.quadrature_tol <= 0.0:
            raise ValueError("quadrature_tol must be positive")
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if any(int(n) < 2 for n in self.n_values):
            raise ValueError("all n_values must be >= 2")
        if self.n_replications < 1:
            raise ValueError("n_replications must be >= 1")
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if not 0.0 < self.plateau_fraction <= 1.0:
            raise ValueError("plateau_fraction must lie in (0, 1]")
        if self.n_output_times < 2:
            raise ValueError("n_output_times must be >= 2")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.bootstrap_samples < 0:
            raise ValueError("bootstrap_samples must be nonnegative")
        if self.validation_samples < 1000:
            raise ValueError("validation_samples must be >= 1000")
        LawSpec.parse(self.law_particles)
        LawSpec.parse(self.law_nonlinear)
        if self.initial_coupling not in ("comonotone", "independent"):
            raise ValueError("initial_coupling must be comonotone or independent")
        if self.closure not in ("auto", "mean", "ensemble"):
            raise ValueError("closure must be auto, mean, or ensemble")


# field name -> parse/render kind
_KINDS = {
    "experiment": "str", "schema_version": "int", "model": "str", "dim": "int",
    "a": "float", "lam": "float", "rho": "float", "sign": "int",
    "eta": "auto_float", "r_max": "auto_float", "grid_points": "int",
    "quadrature_tol": "float", "n_particles": "int", "n_values": "int_list",
    "n_replications": "int", "n_reference": "auto_int", "step_size": "float",
    "t_end": "float", "delta": "auto_float", "law_particles": "str",
    "law_nonlinear": "str", "initial_coupling": "str", "closure": "str",
    "output_times": "float_list", "n_output_times": "int", "seed": "int",
    "plateau_fraction": "float", "bootstrap_samples": "int",
    "validation_samples": "int",
}


def _parse_value(kind: str, raw: str):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "auto_float":
        return "auto" if raw == "auto" else float(raw)
    if kind == "auto_int":
        return "auto" if raw == "auto" else int(raw)
    if kind == "int_list":
        return tuple(int(p) for p in raw.split(",") if p.strip() != "")
    if kind == "float_list":
        return tuple(float(p) for p in raw.split(",") if p.strip() != "")
    raise AssertionError(kind)


def _render_value(kind: str, value) -> str:
    if kind in ("int_list", "float_list"):
        return ",".join(repr(v) if kind == "float_list" else str(v) for v in value)
    if kind == "float":
        return repr(float(value))
    if kind in ("auto_float", "auto_int"):
        if isinstance(value, str):
            return value
        return repr(float(value)) if kind == "auto_float" else str(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    seen: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _KINDS:
            raise ValueError(f"line {lineno}: unknown config key '{key}'")
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate config key '{key}'")
        try:
            seen[key] = _parse_value(_KINDS[key], raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for '{key}': {exc}") from exc
    if "experiment" not in seen:
        raise ValueError("config must set 'experiment'")
    return ExperimentConfig(**seen)


def render_config(cfg: ExperimentConfig) -> str:
    lines = [f"# schema_version {SCHEMA_VERSION} experiment configuration"]
    for f in fields(ExperimentConfig):
        lines.append(f"{f.name} = {_render_value(_KINDS[f.name], getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# Resolution of auto tokens against a concrete model / run


def build_model(cfg: ExperimentConfig) -> PotentialModel:
    if cfg.model == "quadratic":
        return builtin_quadratic(cfg.rho, cfg.lam, dim=cfg.dim)
    return builtin_double_well(cfg.a, cfg.lam, sign=cfg.sign, dim=cfg.dim)


def resolved_eta(cfg: ExperimentConfig) -> Optional[float]:
    return None if isinstance(cfg.eta, str) else float(cfg.eta)


def resolved_r_max(cfg: ExperimentConfig) -> Optional[float]:
    return None if isinstance(cfg.r_max, str) else float(cfg.r_max)


def resolved_delta(cfg: ExperimentConfig) -> float:
    if isinstance(cfg.delta, str):
        return 10.0 * float(np.sqrt(cfg.step_size))
    return float(cfg.delta)


def resolved_n_reference(cfg: ExperimentConfig, n_particles: int) -> int:
    if isinstance(cfg.n_reference, str):
        return max(4096, 16 * n_particles)
    return int(cfg.n_reference)


def resolved_output_times(cfg: ExperimentConfig) -> tuple:
    if cfg.output_times:
        return tuple(cfg.output_times)
    return tuple(np.linspace(0.0, cfg.t_end, cfg.n_output_times))


def make_sim_config(cfg: ExperimentConfig, n_particles: int, job: int) -> SimConfig:
    return SimConfig(
        n_particles=n_particles,
        dim=cfg.dim,
        step_size=cfg.step_size,
        t_end=cfg.t_end,
        delta=resolved_delta(cfg),
        seed=cfg.seed,
        job=job,
        n_reference=resolved_n_reference(cfg, n_particles),
        law_particles=LawSpec.parse(cfg.law_particles),
        law_nonlinear=LawSpec.parse(cfg.law_nonlinear),
        initial_coupling=cfg.initial_coupling,
        closure=cfg.closure,
        output_times=resolved_output_times(cfg),
    )
