"""Numerical certification of local curvature, perturbation envelopes, and bounds.

Around an isolated minimizer ``x*`` of the diagonal risk, four constants
bracket the landscape on the ball of a chosen radius ``r``:

* ``c1 |x-x*|^2 <= PR(x) - PR(x*) <= c2 |x-x*|^2``  (value bracket)
* ``c3 |x-x*|   <= |grad PR(x)|  <= c4 |x-x*|``     (gradient bracket)

The tightest constants are estimated as grid infima/suprema of the two
ratios over the ball intersected with the domain box, excluding a small ball
around ``x*`` where the ratios are 0/0 (the limits are captured by the
nearest included cells).

Validity of the gradient bracket is decided by a sign test, not by the raw
infimum: on a finite grid the infimum of ``|grad PR|/|x-x*|`` is always
positive, even when the gradient vanishes inside the ball.  A reversal of
the outward radial derivative at any grid point certifies, by continuity, an
interior zero, hence that no positive ``c3`` exists at this radius.

On top of a certificate, an affine envelope ``|g(x)| <= eps |x-x*| + delta``
on the perturbation yields transient/ultimate bounds for the shift-blind
flow: exponential decay at rate ``theta * (c3^2 - c4 eps) / (2 c2)`` with
prefactor ``sqrt(c2/c1)`` until the trajectory enters the ultimate ball of
radius ``sqrt(c2/c1) * c4 delta / ((1-theta)(c3^2 - c4 eps))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidCertificateError,
    MissingConstantsError,
    NotAMinimizerError,
    PerflowError,
)
from .model import DecisionDependentModel, SmoothnessConstants


# ---------------------------------------------------------------------------
# grid helpers

def _ball_grid(model, x_star, radius, grid_n, exclusion_cells):
    """Lattice covering the ball around x_star clipped to the domain box."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    lo = np.maximum(model.domain.lower, x_star - radius)
    hi = np.minimum(model.domain.upper, x_star + radius)
    n = model.dimension
    if n == 1:
        pts = np.linspace(lo[0], hi[0], int(grid_n))[:, None]
        cell = float(pts[1, 0] - pts[0, 0])
    else:
        per_axis = max(5, int(round(grid_n ** (1.0 / n))))
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        cell = float(max(ax[1] - ax[0] for ax in axes))
        pts = pts[np.linalg.norm(pts - x_star, axis=-1) <= radius]
    dist = np.linalg.norm(pts - x_star, axis=-1)
    return x_star, pts, dist, exclusion_cells * cell


def _batch_risk(model, pts):
    if model.supports_batch:
        return np.asarray(model.decoupled_risk(pts, pts), dtype=float)
    return np.array([float(model.decoupled_risk(row, row)) for row in pts])


def _batch_total_grad(model, pts):
    if model.supports_batch:
        return np.asarray(model.grad_x1(pts, pts), dtype=float) + np.asarray(
            model.grad_x2(pts, pts), dtype=float
        )
    return np.stack(
        [
            np.asarray(model.grad_x1(row, row), dtype=float)
            + np.asarray(model.grad_x2(row, row), dtype=float)
            for row in pts
        ]
    )


def _batch_perturbation(model, pts):
    if model.supports_batch:
        return np.asarray(model.grad_x2(pts, pts), dtype=float)
    return np.stack([np.asarray(model.grad_x2(row, row), dtype=float) for row in pts])


def _batch_first_grad(model, pts):
    if model.supports_batch:
        return np.asarray(model.grad_x1(pts, pts), dtype=float)
    return np.stack([np.asarray(model.grad_x1(row, row), dtype=float) for row in pts])


# ---------------------------------------------------------------------------
# curvature certificates

@dataclass(frozen=True, eq=False)
class CurvatureCertificate:
    """Tightest quadratic/linear bracketing constants on a ball around x_star.

    By construction every retained grid point x with
    ``exclusion_radius <= |x - x_star| <= radius`` satisfies
    ``c1 d^2 <= PR(x) - PR(x_star) <= c2 d^2`` and
    ``c3 d <= |grad PR(x)| <= c4 d``.  ``gradient_side_valid`` is False when
    the outward radial derivative reverses sign anywhere on the grid, which
    certifies an interior gradient zero (no positive c3 exists).
    """

    x_star: np.ndarray
    radius: float
    c1: float
    c2: float
    c3: float
    c4: float
    grid_n: int
    exclusion_radius: float
    value_side_valid: bool
    gradient_side_valid: bool

    @property
    def valid(self) -> bool:
        return self.value_side_valid and self.gradient_side_valid

    def to_dict(self) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "radius": float(self.radius),
            "c1": float(self.c1),
            "c2": float(self.c2),
            "c3": float(self.c3),
            "c4": float(self.c4),
            "grid_n": int(self.grid_n),
            "exclusion_radius": float(self.exclusion_radius),
            "value_side_valid": bool(self.value_side_valid),
            "gradient_side_valid": bool(self.gradient_side_valid),
            "valid": bool(self.valid),
        }


def estimate_curvature_constants(
    model: DecisionDependentModel,
    x_star,
    radius: float,
    grid_n: int = 4001,
    exclusion_cells: int = 2,
) -> CurvatureCertificate:
    """Estimate the tightest bracketing constants at the given radius.

    ``x_star`` must be a local minimizer of the diagonal risk (certify it
    first); a grid point with risk below the center raises
    :class:`NotAMinimizerError`.  ``grid_n`` of a few thousand resolves the
    constants of smooth scalar models to three digits in well under a second.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if grid_n < 100:
        raise ValueError("constant estimation needs at least 100 grid points")
    x_star, pts, dist, excl = _ball_grid(model, x_star, radius, grid_n, exclusion_cells)

    risk_center = float(_batch_risk(model, x_star[None, :])[0])
    keep = dist >= excl
    pts, dist = pts[keep], dist[keep]

    value_gap = _batch_risk(model, pts) - risk_center
    if np.min(value_gap) < -1e-12 * (1.0 + abs(risk_center)):
        worst = pts[np.argmin(value_gap)]
        raise NotAMinimizerError(
            f"risk at {worst.tolist()} is below the risk at x_star={x_star.tolist()}: "
            "the reference point is not a local minimizer on this ball"
        )
    grad = _batch_total_grad(model, pts)
    grad_norm = np.linalg.norm(grad, axis=-1)
    radial = np.einsum("ij,ij->i", grad, pts - x_star) / dist

    value_ratio = value_gap / dist**2
    grad_ratio = grad_norm / dist
    c1, c2 = float(np.min(value_ratio)), float(np.max(value_ratio))
    c3, c4 = float(np.min(grad_ratio)), float(np.max(grad_ratio))

    finite = all(np.isfinite(v) for v in (c1, c2, c3, c4))
    return CurvatureCertificate(
        x_star=x_star,
        radius=float(radius),
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        grid_n=int(grid_n),
        exclusion_radius=float(excl),
        value_side_valid=bool(finite and c1 > 0.0),
        gradient_side_valid=bool(finite and np.all(radial > 0.0)),
    )


def feasible_radius(cert: CurvatureCertificate) -> float:
    """Radius of the certified initial-condition ball: ``sqrt(c1/c2) * radius``.

    Needs only the value-side constants; the gradient side may legitimately
    be degenerate at radii where the value bracket still holds.
    """
    if not cert.value_side_valid or cert.c2 <= 0:
        raise InvalidCertificateError(
            "feasible radius needs positive, finite value-side constants"
        )
    return float(np.sqrt(cert.c1 / cert.c2) * cert.radius)


def sweep_curvature_constants(
    model: DecisionDependentModel,
    x_star,
    radii: Sequence[float],
    grid_n: int = 4001,
    exclusion_cells: int = 2,
) -> list[CurvatureCertificate]:
    """Certificates for each radius, e.g. to trace constants as the ball grows."""
    return [
        estimate_curvature_constants(model, x_star, float(r), grid_n, exclusion_cells)
        for r in radii
    ]


# ---------------------------------------------------------------------------
# perturbation envelopes

@dataclass(frozen=True, eq=False)
class PerturbationEnvelope:
    """Affine bound ``|g(x)| <= epsilon |x - x_star| + delta`` on the ball."""

    epsilon: float
    delta: float
    radius: float
    x_star: np.ndarray
    fit_mode: str
    grid_n: int

    def bound(self, dist):
        return self.epsilon * np.asarray(dist, dtype=float) + self.delta

    def to_dict(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "delta": float(self.delta),
            "radius": float(self.radius),
            "x_star": [float(v) for v in self.x_star],
            "fit_mode": self.fit_mode,
            "grid_n": int(self.grid_n),
        }


def estimate_perturbation_envelope(
    model: DecisionDependentModel,
    x_star,
    radius: float,
    grid_n: int = 4001,
    fit_mode: str = "delta-zero",
    epsilon_cap: Optional[float] = None,
) -> PerturbationEnvelope:
    """Fit the affine perturbation envelope on the ball around x_star.

    ``delta-zero`` fits the smallest purely linear envelope (delta = 0,
    epsilon = sup |g| / d away from the center).  ``epsilon-capped`` fixes
    epsilon at the supplied cap and absorbs the excess into
    ``delta = sup max(0, |g| - cap * d)`` over the whole ball.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if fit_mode not in ("delta-zero", "epsilon-capped"):
        raise ValueError(f"unknown fit mode {fit_mode!r}")
    x_star, pts, dist, excl = _ball_grid(model, x_star, radius, grid_n, 2)
    g_norm = np.linalg.norm(_batch_perturbation(model, pts), axis=-1)

    if fit_mode == "delta-zero":
        keep = dist >= excl
        epsilon = float(np.max(g_norm[keep] / dist[keep])) if keep.any() else 0.0
        delta = 0.0
    else:
        if epsilon_cap is None or epsilon_cap < 0:
            raise ValueError("epsilon-capped fitting needs a nonnegative epsilon_cap")
        epsilon = float(epsilon_cap)
        delta = float(np.max(np.maximum(0.0, g_norm - epsilon * dist)))
    return PerturbationEnvelope(
        epsilon=epsilon,
        delta=delta,
        radius=float(radius),
        x_star=x_star,
        fit_mode=fit_mode,
        grid_n=int(grid_n),
    )


# ---------------------------------------------------------------------------
# transient / ultimate bounds

@dataclass(frozen=True, eq=False)
class UltimateBoundReport:
    """Evaluated convergence-bound quantities for one initial condition.

    ``admissible`` requires all three hypotheses: the envelope slope beats
    ``c3^2/c4``, the initial condition sits inside the feasible ball, and the
    offset satisfies the theta condition.  The theta condition is evaluated
    exactly as stated (prefactor ``sqrt(c2/c1)``); the dimensional-analysis
    variant with ``sqrt(c1/c2)`` is recorded alongside since the two differ
    and nothing downstream depends on choosing between them.
    """

    theta: float
    alpha: float
    mu_theta: float
    transient_rate: float
    transient_prefactor: float
    ultimate_radius: float
    t_bound: float
    epsilon_admissible: bool
    initial_condition_admissible: bool
    theta_admissible: bool
    theta_admissible_variant: bool
    admissible: bool
    initial_distance: float
    certificate: CurvatureCertificate
    envelope: PerturbationEnvelope

    def transient_envelope(self, times):
        """Bound ``prefactor * exp(-rate * t) * |x0 - x_star|`` at the given times."""
        t = np.asarray(times, dtype=float)
        return self.transient_prefactor * np.exp(-self.transient_rate * t) * self.initial_distance

    def to_dict(self) -> dict:
        return {
            "theta": float(self.theta),
            "alpha": float(self.alpha),
            "mu_theta": float(self.mu_theta),
            "transient_rate": float(self.transient_rate),
            "transient_prefactor": float(self.transient_prefactor),
            "ultimate_radius": float(self.ultimate_radius),
            "t_bound": float(self.t_bound),
            "epsilon_admissible": bool(self.epsilon_admissible),
            "initial_condition_admissible": bool(self.initial_condition_admissible),
            "theta_admissible": bool(self.theta_admissible),
            "theta_admissible_variant": bool(self.theta_admissible_variant),
            "admissible": bool(self.admissible),
            "initial_distance": float(self.initial_distance),
            "certificate": self.certificate.to_dict(),
            "envelope": self.envelope.to_dict(),
        }


def ultimate_bounds(
    cert: CurvatureCertificate,
    envelope: PerturbationEnvelope,
    x0,
    theta: float,
) -> UltimateBoundReport:
    """Evaluate the transient/ultimate bound quantities for one initial state.

    All fields are computed for any finite certificate; hypothesis failures
    (including a degenerate gradient side, where ``alpha <= 0``) are reported
    through the admissibility flags rather than raised, so sweeps over
    marginal radii stay total.  Only ``theta`` outside (0, 1) is an error.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    c1, c2, c3, c4 = cert.c1, cert.c2, cert.c3, cert.c4
    eps, delta = envelope.epsilon, envelope.delta
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d0 = float(np.linalg.norm(x0 - cert.x_star))

    alpha = c3**2 - c4 * eps
    prefactor = float(np.sqrt(c2 / c1)) if c1 > 0 else float("inf")
    rate = theta * alpha / (2.0 * c2) if c2 > 0 else 0.0

    epsilon_admissible = c4 > 0 and eps < c3**2 / c4
    initial_condition_admissible = c2 > 0 and d0 <= np.sqrt(max(c1, 0.0) / c2) * cert.radius
    slack = cert.radius * (c3**2 / c4 - eps) if c4 > 0 else float("-inf")
    theta_admissible = c1 > 0 and delta <= np.sqrt(c2 / c1) * (1.0 - theta) * slack
    theta_admissible_variant = c2 > 0 and delta <= np.sqrt(max(c1, 0.0) / c2) * (1.0 - theta) * slack

    if delta == 0.0:
        mu = 0.0
        t_bound = float("inf")
    elif alpha > 0:
        mu = c4 * delta / ((1.0 - theta) * alpha)
        if mu >= prefactor * d0:
            t_bound = 0.0
        elif rate > 0:
            t_bound = float(np.log(prefactor * d0 / mu) / rate)
        else:
            t_bound = float("inf")
    else:
        mu = float("inf")
        t_bound = float("inf")

    return UltimateBoundReport(
        theta=float(theta),
        alpha=float(alpha),
        mu_theta=float(mu),
        transient_rate=float(rate),
        transient_prefactor=prefactor,
        ultimate_radius=float(prefactor * mu) if np.isfinite(mu) else float("inf"),
        t_bound=t_bound,
        epsilon_admissible=bool(epsilon_admissible),
        initial_condition_admissible=bool(initial_condition_admissible),
        theta_admissible=bool(theta_admissible),
        theta_admissible_variant=bool(theta_admissible_variant),
        admissible=bool(epsilon_admissible and initial_condition_admissible and theta_admissible),
        initial_distance=d0,
        certificate=cert,
        envelope=envelope,
    )


def theta_tradeoff(
    cert: CurvatureCertificate,
    envelope: PerturbationEnvelope,
    x0,
    thetas: Optional[Sequence[float]] = None,
) -> list[UltimateBoundReport]:
    """Bound reports across a theta sweep.

    Larger theta buys a faster transient rate at the price of a larger
    ultimate radius; the two goals are antagonistic, so no single optimum is
    singled out -- callers pick their point on the curve.
    """
    if thetas is None:
        thetas = np.round(np.arange(0.05, 0.951, 0.05), 2)
    return [ultimate_bounds(cert, envelope, x0, float(t)) for t in thetas]


# ---------------------------------------------------------------------------
# analytic brackets from smoothness constants

def _require(constants: SmoothnessConstants, names):
    missing = [n for n in names if getattr(constants, n) is None]
    if missing:
        raise MissingConstantsError(f"bound formula needs constants: {', '.join(missing)}")


def risk_curvature_bracket(constants: SmoothnessConstants, dist2: float):
    """Value-gap bracket from loss/shift regularity at squared distance ``dist2``.

    Returns ``((m/2 - L1*L2) * dist2, (L1*L2 + L3/2) * dist2)`` where L1 is
    the loss Lipschitz constant in the data, L2 the quadratic transport
    bound on the shift, m/L3 the convexity/smoothness moduli.
    """
    _require(
        constants,
        ("loss_lipschitz", "shift_quadratic_bound", "strong_convexity", "smoothness"),
    )
    if dist2 < 0:
        raise ValueError("squared distance must be nonnegative")
    cross = constants.loss_lipschitz * constants.shift_quadratic_bound
    lower = (constants.strong_convexity / 2.0 - cross) * dist2
    upper = (cross + constants.smoothness / 2.0) * dist2
    return lower, upper


def gradient_norm_bracket(constants: SmoothnessConstants, dist: float):
    """Gradient-norm bracket at distance ``dist`` from the minimizer.

    Returns ``(max(0, (m - eps*L4)*dist - 2*eps*L1), (L3 + eps*L4)*dist + 2*eps*L1)``
    with eps the transport sensitivity of the shift and L4 the data-Lipschitz
    constant of the decision gradient.  The lower end is clamped at zero.
    """
    _require(
        constants,
        ("loss_lipschitz", "strong_convexity", "smoothness", "grad_data_lipschitz", "sensitivity"),
    )
    if dist < 0:
        raise ValueError("distance must be nonnegative")
    eps = constants.sensitivity
    lower = max(
        0.0,
        (constants.strong_convexity - eps * constants.grad_data_lipschitz) * dist
        - 2.0 * eps * constants.loss_lipschitz,
    )
    upper = (
        constants.smoothness + eps * constants.grad_data_lipschitz
    ) * dist + 2.0 * eps * constants.loss_lipschitz
    return lower, upper


# ---------------------------------------------------------------------------
# alignment of the perturbation with descent

HOLDS_SLACK = 1e-12

@dataclass(frozen=True, eq=False)
class AlignmentReport:
    """Pointwise check of ``|g|^2 <= <-grad_x1 R, g>`` over a scalar interval.

    Where the condition holds, the perturbation cannot increase the diagonal
    risk, so the shift-blind flow descends it at least as fast as
    ``-|grad PR|^2``.  ``hold_intervals`` lists the maximal grid runs where
    the condition holds.
    """

    points: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray
    hold_intervals: tuple

    def to_dict(self) -> dict:
        return {
            "grid_n": int(self.points.size),
            "lo": float(self.points[0]),
            "hi": float(self.points[-1]),
            "fraction_holding": float(np.mean(self.holds)),
            "hold_intervals": [[float(a), float(b)] for a, b in self.hold_intervals],
        }


def alignment_check(model: DecisionDependentModel, lo: float, hi: float, grid_n: int) -> AlignmentReport:
    """Evaluate the alignment condition on ``grid_n`` points of ``[lo, hi]``.

    For models with a response shift the specialized scalar form
    ``|1/2 - x|^2 p'(x)^2 <= (p(x) - x)(1/2 - x) p'(x)`` is evaluated
    independently and must agree with the general form to 1e-10.
    """
    if grid_n < 2:
        raise ValueError("grid must have at least 2 points")
    if model.dimension != 1:
        raise ValueError("the alignment check is defined for scalar models")
    xs = np.linspace(float(lo), float(hi), int(grid_n))
    pts = xs[:, None]
    g1 = _batch_first_grad(model, pts)[:, 0]
    g = _batch_perturbation(model, pts)[:, 0]
    lhs = g * g
    rhs = -g1 * g

    if hasattr(model, "shift"):
        p = np.asarray(model.shift.value(xs), dtype=float)
        dp = np.asarray(model.shift.derivative(xs), dtype=float)
        lhs_s = (0.5 - xs) ** 2 * dp**2
        rhs_s = (p - xs) * (0.5 - xs) * dp
        gap = max(float(np.max(np.abs(lhs - lhs_s))), float(np.max(np.abs(rhs - rhs_s))))
        if gap > 1e-10:
            raise PerflowError(
                f"specialized alignment form disagrees with the general form by {gap:.3g}"
            )

    holds = lhs <= rhs + HOLDS_SLACK
    intervals = []
    idx = np.nonzero(holds)[0]
    if idx.size:
        splits = np.nonzero(np.diff(idx) > 1)[0]
        for run in np.split(idx, splits + 1):
            intervals.append((float(xs[run[0]]), float(xs[run[-1]])))
    return AlignmentReport(
        points=xs,
        lhs=lhs,
        rhs=rhs,
        holds=holds,
        hold_intervals=tuple(intervals),
    )
