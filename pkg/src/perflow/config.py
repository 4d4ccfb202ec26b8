"""Experiment configuration: one flat JSON document drives every command.

The document is deliberately plain -- flat keys, JSON scalars and short
lists -- so a run is reproducible from the file alone and trivially parsed
anywhere.  Unknown keys are rejected rather than ignored: a typo must fail
loudly, not silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from .errors import ConfigError
from .flows import NoiseSpec, StepSchedule, normalize_flow_kind
from .model import BernoulliSquaredModel
from .shifts import (
    ShiftFunction,
    bump_shift,
    clamped_polynomial_shift,
    logistic_shift,
    tabulated_shift,
)

_MODEL_ALIASES = {
    "bernoulli-squared": ("bernoulli-squared", None),
    # shorthand: the built-in model with its canonical bump transition
    "bernoulli-phi": ("bernoulli-squared", "bump"),
}

_SHIFT_KINDS = ("bump", "logistic", "clamped-polynomial", "tabulated")
_FIT_MODES = ("delta-zero", "epsilon-capped")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters for one command invocation."""

    model: str = "bernoulli-squared"
    shift_kind: str = "bump"
    shift_params: tuple = ()  # sorted (key, value) pairs; values hashable
    domain: tuple = (-0.5, 1.5)
    flow: str = "rgd-flow"
    x0: tuple = (0.1,)
    t_end: float = 50.0
    h: float = 0.01
    eq_tol: float = 1e-9
    grid_n: int = 2001
    match_radius: float = 1e-3
    refine_tol: float = 1e-10
    radius: float = 0.4
    x_star: tuple = (0.0,)
    theta: float = 0.5
    fit_mode: str = "delta-zero"
    epsilon_cap: Optional[float] = None
    noise: str = "none"
    seed: int = 0
    steps: int = 5000
    schedule: str = "constant:0.01"
    lo: float = 0.0
    hi: float = 1.0
    out: str = "out"

    @property
    def shift_params_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.shift_params}


def _fail(msg: str):
    raise ConfigError(msg)


def _as_float(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_int(value, key):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{key} must be an integer, got {value!r}")
    return int(value)


def _as_vector(value, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if isinstance(value, (list, tuple)) and value and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return tuple(float(v) for v in value)
    _fail(f"{key} must be a number or a non-empty list of numbers, got {value!r}")


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def parse_config(document: dict) -> ExperimentConfig:
    """Validate a configuration document; unknown keys and bad ranges are errors."""
    if not isinstance(document, dict):
        _fail(f"configuration must be a JSON object, got {type(document).__name__}")
    doc = dict(document)

    known = {f.name for f in fields(ExperimentConfig)} - {"shift_kind", "shift_params"}
    known.add("shift")
    unknown = set(doc) - known
    if unknown:
        _fail(f"unknown configuration keys: {', '.join(sorted(unknown))}")

    kwargs = {}

    model = doc.get("model", "bernoulli-squared")
    if model not in _MODEL_ALIASES:
        _fail(f"unknown model {model!r}; expected one of {sorted(_MODEL_ALIASES)}")
    model, forced_shift = _MODEL_ALIASES[model]
    kwargs["model"] = model

    shift_doc = doc.get("shift", {"kind": forced_shift or "bump", "params": {}})
    if not isinstance(shift_doc, dict) or set(shift_doc) - {"kind", "params"}:
        _fail("shift must be an object with keys 'kind' and 'params'")
    kind = shift_doc.get("kind", "bump")
    if forced_shift is not None and kind != forced_shift:
        _fail(f"model alias fixes the shift kind to {forced_shift!r}, got {kind!r}")
    if kind not in _SHIFT_KINDS:
        _fail(f"unknown shift kind {kind!r}; expected one of {_SHIFT_KINDS}")
    params = shift_doc.get("params", {})
    if not isinstance(params, dict):
        _fail("shift.params must be an object")
    kwargs["shift_kind"] = kind
    kwargs["shift_params"] = tuple(sorted((k, _freeze(v)) for k, v in params.items()))

    domain = doc.get("domain", [-0.5, 1.5])
    if not (isinstance(domain, (list, tuple)) and len(domain) == 2):
        _fail(f"domain must be [lo, hi], got {domain!r}")
    d_lo, d_hi = _as_float(domain[0], "domain lo"), _as_float(domain[1], "domain hi")
    if d_lo >= d_hi:
        _fail(f"domain must satisfy lo < hi, got [{d_lo}, {d_hi}]")
    kwargs["domain"] = (d_lo, d_hi)

    try:
        kwargs["flow"] = normalize_flow_kind(doc.get("flow", "rgd"))
    except ValueError as exc:
        _fail(str(exc))

    kwargs["x0"] = _as_vector(doc.get("x0", [0.1]), "x0")
    kwargs["x_star"] = _as_vector(doc.get("x_star", [0.0]), "x_star")

    positive = {"t_end": 50.0, "h": 0.01, "match_radius": 1e-3, "refine_tol": 1e-10, "radius": 0.4}
    for key, default in positive.items():
        v = _as_float(doc.get(key, default), key)
        if v <= 0:
            _fail(f"{key} must be positive, got {v}")
        kwargs[key] = v

    eq_tol = _as_float(doc.get("eq_tol", 1e-9), "eq_tol")
    if eq_tol < 0:
        _fail(f"eq_tol must be nonnegative, got {eq_tol}")
    kwargs["eq_tol"] = eq_tol

    grid_n = _as_int(doc.get("grid_n", 2001), "grid_n")
    if grid_n < 2:
        _fail(f"grid_n must be at least 2, got {grid_n}")
    kwargs["grid_n"] = grid_n

    theta = _as_float(doc.get("theta", 0.5), "theta")
    if not 0.0 < theta < 1.0:
        _fail(f"theta must lie strictly inside (0, 1), got {theta}")
    kwargs["theta"] = theta

    fit_mode = doc.get("fit_mode", "delta-zero")
    if fit_mode not in _FIT_MODES:
        _fail(f"unknown fit_mode {fit_mode!r}; expected one of {_FIT_MODES}")
    kwargs["fit_mode"] = fit_mode

    cap = doc.get("epsilon_cap", None)
    if cap is not None:
        cap = _as_float(cap, "epsilon_cap")
        if cap < 0:
            _fail(f"epsilon_cap must be nonnegative, got {cap}")
    kwargs["epsilon_cap"] = cap

    noise = doc.get("noise", "none")
    parse_noise(noise, 0)  # validates the grammar
    kwargs["noise"] = noise

    kwargs["seed"] = _as_int(doc.get("seed", 0), "seed")

    steps = _as_int(doc.get("steps", 5000), "steps")
    if steps < 0:
        _fail(f"steps must be nonnegative, got {steps}")
    kwargs["steps"] = steps

    schedule = doc.get("schedule", "constant:0.01")
    parse_schedule(schedule)
    kwargs["schedule"] = schedule

    kwargs["lo"] = _as_float(doc.get("lo", 0.0), "lo")
    kwargs["hi"] = _as_float(doc.get("hi", 1.0), "hi")
    if kwargs["lo"] >= kwargs["hi"]:
        _fail(f"alignment region needs lo < hi, got [{kwargs['lo']}, {kwargs['hi']}]")

    out = doc.get("out", "out")
    if not isinstance(out, str) or not out:
        _fail(f"out must be a non-empty path string, got {out!r}")
    kwargs["out"] = out

    cfg = ExperimentConfig(**kwargs)
    build_shift(cfg)  # reject unknown or malformed shift parameters up front
    return cfg


def to_document(cfg: ExperimentConfig) -> dict:
    """Canonical JSON document reproducing the configuration."""
    return {
        "model": cfg.model,
        "shift": {"kind": cfg.shift_kind, "params": cfg.shift_params_dict},
        "domain": list(cfg.domain),
        "flow": cfg.flow,
        "x0": list(cfg.x0),
        "t_end": cfg.t_end,
        "h": cfg.h,
        "eq_tol": cfg.eq_tol,
        "grid_n": cfg.grid_n,
        "match_radius": cfg.match_radius,
        "refine_tol": cfg.refine_tol,
        "radius": cfg.radius,
        "x_star": list(cfg.x_star),
        "theta": cfg.theta,
        "fit_mode": cfg.fit_mode,
        "epsilon_cap": cfg.epsilon_cap,
        "noise": cfg.noise,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "schedule": cfg.schedule,
        "lo": cfg.lo,
        "hi": cfg.hi,
        "out": cfg.out,
    }


def build_shift(cfg: ExperimentConfig) -> ShiftFunction:
    params = cfg.shift_params_dict
    kind = cfg.shift_kind
    try:
        if kind == "bump":
            if params:
                _fail(f"bump shift takes no parameters, got {sorted(params)}")
            return bump_shift()
        if kind == "logistic":
            extra = set(params) - {"rate", "midpoint"}
            if extra:
                _fail(f"unknown logistic parameters: {sorted(extra)}")
            return logistic_shift(params.get("rate", 8.0), params.get("midpoint", 0.5))
        if kind == "clamped-polynomial":
            extra = set(params) - {"coefficients"}
            if extra or "coefficients" not in params:
                _fail("clamped-polynomial shift needs exactly the 'coefficients' parameter")
            return clamped_polynomial_shift(params["coefficients"])
        extra = set(params) - {"knots_x", "knots_p"}
        if extra or "knots_x" not in params or "knots_p" not in params:
            _fail("tabulated shift needs exactly 'knots_x' and 'knots_p'")
        return tabulated_shift(params["knots_x"], params["knots_p"])
    except ValueError as exc:
        _fail(f"invalid shift parameters: {exc}")


def build_model(cfg: ExperimentConfig) -> BernoulliSquaredModel:
    return BernoulliSquaredModel(shift=build_shift(cfg), domain=cfg.domain)


def parse_noise(spec: str, seed: int) -> NoiseSpec:
    """Noise grammar: ``none`` | ``gaussian:SIGMA`` | ``bernoulli:N``."""
    if not isinstance(spec, str):
        _fail(f"noise must be a string, got {spec!r}")
    if spec == "none":
        return NoiseSpec.none()
    head, sep, arg = spec.partition(":")
    try:
        if head == "gaussian" and sep:
            return NoiseSpec.gaussian(float(arg), seed=seed)
        if head == "bernoulli" and sep:
            return NoiseSpec.bernoulli_sample(int(arg), seed=seed)
    except ValueError as exc:
        _fail(f"invalid noise specification {spec!r}: {exc}")
    _fail(f"invalid noise specification {spec!r}; expected none, gaussian:SIGMA or bernoulli:N")


def parse_schedule(spec: str) -> StepSchedule:
    """Schedule grammar: ``constant:A`` | ``inverse:A,B``."""
    if not isinstance(spec, str):
        _fail(f"schedule must be a string, got {spec!r}")
    head, sep, arg = spec.partition(":")
    try:
        if head == "constant" and sep:
            return StepSchedule.constant(float(arg))
        if head == "inverse" and sep:
            a, _, b = arg.partition(",")
            return StepSchedule.inverse(float(a), float(b))
    except ValueError as exc:
        _fail(f"invalid schedule specification {spec!r}: {exc}")
    _fail(f"invalid schedule specification {spec!r}; expected constant:A or inverse:A,B")
