"""Continuous-flow integration and the discrete stochastic descent recursion.

Two ordinary differential equations are integrated with a fixed-step
classical Runge-Kutta scheme: the full descent flow of the diagonal risk and
the shift-blind flow that repeated gradient descent follows.  The discrete
recursion ``x_{k+1} = x_k - alpha_k * (grad_x1 R(x_k, x_k) + eta_k)`` is run
exactly as written, with the noise term drawn from a seeded, per-run
generator.

Fixed stepping keeps trajectories bit-reproducible; the fields handled here
are cheap, smooth, and low-dimensional, so adaptivity buys nothing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericIntegrationError, OutOfDomainError
from .model import DecisionDependentModel, _check_domain

PRM_FLOW = "prm-flow"
RGD_FLOW = "rgd-flow"
DISCRETE_RGD = "discrete-rgd"

CONVERGED = "converged-to-equilibrium"
MAX_TIME = "max-time"
LEFT_DOMAIN = "left-domain"
NUMERIC_ERROR = "numeric-error"  # ensemble-only, recorded per point

_FLOW_ALIASES = {
    "rgd": RGD_FLOW,
    "prm": PRM_FLOW,
    RGD_FLOW: RGD_FLOW,
    PRM_FLOW: PRM_FLOW,
    DISCRETE_RGD: DISCRETE_RGD,
}


def normalize_flow_kind(kind: str) -> str:
    try:
        return _FLOW_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown flow kind {kind!r}") from None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped states of one flow solution or discrete run.

    ``times`` are strictly increasing (iteration indices for the discrete
    recursion).  All states lie in the domain box except possibly the final
    one when ``terminal_status == "left-domain"``.
    """

    kind: str
    times: np.ndarray
    states: np.ndarray
    terminal_status: str

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes for the discrete recursion: constant or ``a / (k + b)``.

    The inverse form has divergent step sum and convergent squared sum, the
    standard stochastic-approximation regime.
    """

    form: str
    coefficient: float
    offset: float = 1.0

    def __post_init__(self):
        if self.form not in ("constant", "inverse"):
            raise ValueError(f"unknown schedule form {self.form!r}")
        if self.coefficient <= 0:
            raise ValueError("schedule coefficient must be positive")
        if self.form == "inverse" and self.offset < 1.0:
            raise ValueError("inverse schedule offset must be >= 1")

    @classmethod
    def constant(cls, step: float) -> "StepSchedule":
        return cls("constant", step)

    @classmethod
    def inverse(cls, coefficient: float, offset: float) -> "StepSchedule":
        return cls("inverse", coefficient, offset)

    def step(self, k: int) -> float:
        if self.form == "constant":
            return self.coefficient
        return self.coefficient / (k + self.offset)

    def values(self, num_steps: int) -> np.ndarray:
        if self.form == "constant":
            return np.full(num_steps, self.coefficient)
        return self.coefficient / (np.arange(num_steps) + self.offset)


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean gradient noise for the discrete recursion.

    ``gaussian`` adds iid N(0, sigma^2) per coordinate.  ``bernoulli-sample``
    models a learner that estimates the gradient from ``sample_size`` fresh
    0/1 responses drawn at the current decision: the gradient estimate is
    ``x_k - mean(Z)``, so the realized noise is ``p(x_k) - mean(Z)``.
    Generators are per-run and seeded; runs never share one.
    """

    mode: str
    sigma: float = 0.0
    sample_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("none", "gaussian", "bernoulli-sample"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if self.sample_size < 1:
            raise ValueError("sample size must be >= 1")

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls("none")

    @classmethod
    def gaussian(cls, sigma: float, seed: int = 0) -> "NoiseSpec":
        return cls("gaussian", sigma=sigma, seed=seed)

    @classmethod
    def bernoulli_sample(cls, sample_size: int, seed: int = 0) -> "NoiseSpec":
        return cls("bernoulli-sample", sample_size=sample_size, seed=seed)


def _field_function(model: DecisionDependentModel, kind: str):
    kind = normalize_flow_kind(kind)
    if kind == RGD_FLOW:
        return lambda x: -model.grad_x1(x, x)
    if kind == PRM_FLOW:
        return lambda x: -(model.grad_x1(x, x) + model.grad_x2(x, x))
    raise ValueError(f"{kind!r} is not a continuous flow")


def _record_stride(h: float) -> int:
    # bounds trajectory memory: one sample per ~0.1 time units
    return max(1, math.ceil(1.0 / (10.0 * h)))


def integrate_flow(
    model: DecisionDependentModel,
    kind: str,
    x0,
    t_end: float,
    h: float = 0.01,
    eq_tol: float = 1e-9,
) -> Trajectory:
    """Fixed-step fourth-order Runge-Kutta solution of the chosen flow.

    Stops early with status ``converged-to-equilibrium`` once the field norm
    drops to ``eq_tol``, or with ``left-domain`` when a step exits the domain
    box (the exiting state is kept as the final sample).  States are recorded
    every ``ceil(1/(10 h))`` steps plus always at the endpoint.
    """
    kind = normalize_flow_kind(kind)
    if h <= 0:
        raise ValueError("step size must be positive")
    if t_end <= 0:
        raise ValueError("horizon must be positive")
    x = _check_domain(model, x0).astype(float).copy()
    field = _field_function(model, kind)
    steps = max(1, int(round(t_end / h)))
    stride = _record_stride(h)

    times = [0.0]
    states = [x.copy()]
    last_recorded = 0
    status = MAX_TIME

    for k in range(steps):
        fx = np.asarray(field(x), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise NumericIntegrationError(
                f"non-finite field value at state {x.tolist()}", state=x.copy()
            )
        if float(np.linalg.norm(fx)) <= eq_tol:
            status = CONVERGED
            if k > last_recorded:
                times.append(k * h)
                states.append(x.copy())
            break
        k1 = fx
        k2 = np.asarray(field(x + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(field(x + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(field(x + h * k3), dtype=float)
        x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_new)):
            raise NumericIntegrationError(
                f"non-finite state after step from {x.tolist()}", state=x.copy()
            )
        if not model.domain.contains(x_new):
            times.append((k + 1) * h)
            states.append(x_new.copy())
            last_recorded = k + 1
            status = LEFT_DOMAIN
            break
        x = x_new
        if (k + 1) % stride == 0:
            times.append((k + 1) * h)
            states.append(x.copy())
            last_recorded = k + 1
    else:
        if steps > last_recorded:
            times.append(steps * h)
            states.append(x.copy())

    return Trajectory(
        kind=kind,
        times=np.asarray(times),
        states=np.stack(states),
        terminal_status=status,
    )


def _worker_count() -> int:
    raw = os.environ.get("PERFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PERFLOW_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _integrate_batch(model, kind, x0s, t_end, h, eq_tol, record):
    field = _field_function(model, kind)
    x = np.array(x0s, dtype=float)
    m = x.shape[0]
    active = np.ones(m, dtype=bool)
    statuses = np.full(m, MAX_TIME, dtype=object)
    steps = max(1, int(round(t_end / h)))
    stride = _record_stride(h)
    rec_times, rec_states = [0.0], [x.copy()]

    for k in range(steps):
        if not active.any():
            break
        fx = np.asarray(field(x), dtype=float)
        bad = active & ~np.all(np.isfinite(fx), axis=-1)
        if bad.any():
            statuses[bad] = NUMERIC_ERROR
            active &= ~bad
        norms = np.linalg.norm(np.where(np.isfinite(fx), fx, 0.0), axis=-1)
        done = active & (norms <= eq_tol)
        if done.any():
            statuses[done] = CONVERGED
            active &= ~done
        if not active.any():
            break
        k1 = fx
        k2 = np.asarray(field(x + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(field(x + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(field(x + h * k3), dtype=float)
        x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = active & ~np.all(np.isfinite(x_new), axis=-1)
        if bad.any():
            statuses[bad] = NUMERIC_ERROR
            active &= ~bad
        exited = active & ~model.domain.contains_each(x_new)
        if exited.any():
            # keep the exiting state as the final sample for those points
            x[exited] = x_new[exited]
            statuses[exited] = LEFT_DOMAIN
            active &= ~exited
        x[active] = x_new[active]
        if record and (k + 1) % stride == 0:
            rec_times.append((k + 1) * h)
            rec_states.append(x.copy())

    if record and rec_times[-1] != steps * h:
        rec_times.append(steps * h)
        rec_states.append(x.copy())
    recording = (np.asarray(rec_times), np.stack(rec_states)) if record else None
    return x, statuses, recording


def integrate_ensemble(
    model: DecisionDependentModel,
    kind: str,
    x0s,
    t_end: float,
    h: float = 0.01,
    eq_tol: float = 1e-9,
    record: bool = False,
):
    """Integrate many initial conditions at once.

    For batch-capable models the whole ensemble advances through vectorized
    Runge-Kutta steps; converged or exited points freeze in place while the
    rest continue.  ``PERFLOW_THREADS`` (default 1) caps how many row chunks
    run concurrently; recording runs keep a single chunk so the snapshot
    arrays stay whole.  Returns ``(final_states, statuses, recording)`` where
    ``recording`` is ``(times, states[k, m, n])`` when requested, else None.
    Per-point failures are recorded as status ``numeric-error``, not raised.
    """
    kind = normalize_flow_kind(kind)
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    for row in x0s:
        _check_domain(model, row)

    if not model.supports_batch:
        finals = np.empty_like(x0s)
        statuses = np.empty(x0s.shape[0], dtype=object)
        for i, row in enumerate(x0s):
            try:
                traj = integrate_flow(model, kind, row, t_end, h=h, eq_tol=eq_tol)
                finals[i] = traj.final_state
                statuses[i] = traj.terminal_status
            except NumericIntegrationError:
                finals[i] = np.nan
                statuses[i] = NUMERIC_ERROR
        return finals, statuses, None

    workers = _worker_count()
    if workers == 1 or x0s.shape[0] < 2 * workers or record:
        return _integrate_batch(model, kind, x0s, t_end, h, eq_tol, record)

    chunks = np.array_split(np.arange(x0s.shape[0]), workers)
    finals = np.empty_like(x0s)
    statuses = np.empty(x0s.shape[0], dtype=object)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(_integrate_batch, model, kind, x0s[idx], t_end, h, eq_tol, False): idx
            for idx in chunks
            if idx.size
        }
        for fut, idx in futures.items():
            f, s, _ = fut.result()
            finals[idx] = f
            statuses[idx] = s
    return finals, statuses, None


def discrete_rgd(
    model: DecisionDependentModel,
    x0,
    num_steps: int,
    schedule: StepSchedule,
    noise: NoiseSpec,
) -> Trajectory:
    """Run ``x_{k+1} = x_k - alpha_k * (grad_x1 R(x_k, x_k) + eta_k)`` exactly.

    With noise mode ``none`` and a constant step equal to ``h`` this is
    forward Euler on the shift-blind flow.  All iterates are recorded; if an
    iterate exits the domain box the trajectory is truncated there with
    status ``left-domain``.  Identical seeds give bitwise-identical runs.
    """
    if num_steps < 0:
        raise ValueError("number of steps must be nonnegative")
    x = _check_domain(model, x0).astype(float).copy()
    n = x.size
    if noise.mode == "bernoulli-sample" and (not hasattr(model, "shift") or n != 1):
        raise ValueError("bernoulli-sample noise needs a scalar model with a response shift")
    rng = np.random.default_rng(noise.seed) if noise.mode != "none" else None
    alphas = schedule.values(num_steps)
    states = np.empty((num_steps + 1, n))
    states[0] = x
    status = MAX_TIME
    recorded = 1

    lo, hi = model.domain.lower, model.domain.upper
    if n == 1 and noise.mode == "bernoulli-sample":
        # scalar fast path: the sampling mode runs for ~1e5 steps routinely
        value = model.shift.value
        xs = float(x[0])
        lo0, hi0 = lo[0], hi[0]
        size = noise.sample_size
        for k in range(num_steps):
            z_mean = rng.binomial(size, value(xs)) / size
            xs = xs - alphas[k] * (xs - z_mean)
            states[recorded, 0] = xs
            recorded += 1
            if xs < lo0 or xs > hi0:
                status = LEFT_DOMAIN
                break
    else:
        for k in range(num_steps):
            grad = np.asarray(model.grad_x1(x, x), dtype=float)
            if noise.mode == "gaussian":
                grad = grad + rng.normal(0.0, noise.sigma, size=n)
            x = x - alphas[k] * grad
            states[recorded] = x
            recorded += 1
            if not model.domain.contains(x):
                status = LEFT_DOMAIN
                break

    return Trajectory(
        kind=DISCRETE_RGD,
        times=np.arange(recorded, dtype=float),
        states=states[:recorded],
        terminal_status=status,
    )


def lyapunov_derivative(model: DecisionDependentModel, x, kind: str) -> float:
    """Derivative of the diagonal risk along the chosen flow at ``x``.

    This is the inner product of the total risk gradient with the field; for
    the full descent flow it equals minus the squared gradient norm, hence is
    never positive.
    """
    kind = normalize_flow_kind(kind)
    x = _check_domain(model, x)
    g1 = np.asarray(model.grad_x1(x, x), dtype=float)
    total = g1 + np.asarray(model.grad_x2(x, x), dtype=float)
    if kind == PRM_FLOW:
        return -float(np.dot(total, total))
    if kind == RGD_FLOW:
        return float(np.dot(total, -g1))
    raise ValueError(f"{kind!r} is not a continuous flow")
