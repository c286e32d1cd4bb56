"""
Equilibrium solvers, the MD Lyapunov function, exponential rate bounds and
trajectory-vs-bound verification.
"""
import logging
from typing import Literal, Optional, Tuple

import numpy as np

from dualdyn.models.Dynamics import Trajectory
from dualdyn.models.Game import Game, StrategyProfile
from dualdyn.models.Geometry import MirrorSpec
from dualdyn.models.Report import BoundReport, RateBound, Violation
from dualdyn.utils.exceptions import BoundMismatchError, InvalidInputError, PreconditionError, SolverError
from dualdyn.utils.games import domain_center
from dualdyn.utils.geometry import dual_bregman, mirror_map, project_profile, stacked_bregman

logger = logging.getLogger(__name__)

DEFAULT_SLACK = 1e-6
ABS_TOL = 1e-15
DECAY_FLOOR_RATIO = 1e-10


# --- Equilibria ---

def projected_residual(game: Game, x, sigma: float = 1.0) -> float:
    """‖x − Π_Ω(x + σU(x))‖₂; zero exactly at a NE."""
    x = np.asarray(x, dtype=float)
    step = project_profile(game.domains, game.partition, x + sigma * game.U(x))
    return float(np.linalg.norm(x - step))


def solve_ne(game: Game, tol: float = 1e-10, max_iter: int = 200_000,
             step: Optional[float] = None) -> StrategyProfile:
    """
    NE of a monotone game by projected extragradient.

    Builtins with an analytic NE return it directly. σ = ``step``, else 1/L from
    ``lipschitz_hint``, else backtracking halving from 1.
    """
    if game.known_ne is not None:
        return game.profile(game.known_ne)

    def proj(v: np.ndarray) -> np.ndarray:
        return project_profile(game.domains, game.partition, v)

    if step is not None:
        sigma, backtrack = float(step), False
    elif game.lipschitz_hint is not None:
        sigma, backtrack = 1.0 / game.lipschitz_hint, False
    else:
        sigma, backtrack = 1.0, True

    x = domain_center(game.domains)
    residual = np.inf
    for it in range(max_iter):
        u = game.U(x)
        y = proj(x + sigma * u)
        uy = game.U(y)
        if backtrack:
            while sigma * np.linalg.norm(uy - u) > 0.9 * np.linalg.norm(y - x) and sigma > 1e-12:
                sigma *= 0.5
                y = proj(x + sigma * u)
                uy = game.U(y)
        residual = float(np.linalg.norm(x - y))
        if residual <= tol:
            logger.debug("extragradient converged on %s after %d iterations", game.name, it)
            return game.profile(x)
        y_residual = float(np.linalg.norm(y - proj(y + sigma * uy)))
        if y_residual <= tol:
            return game.profile(y)
        x = proj(x + sigma * uy)

    raise SolverError(f"extragradient did not converge on '{game.name}' in {max_iter} iterations",
                      last_residual=residual)


def solve_perturbed_ne(game: Game, mspec: MirrorSpec, tol: float = 1e-10, max_iter: int = 100_000,
                       damping: float = 1.0, mu: Optional[float] = None) -> StrategyProfile:
    """
    Perturbed NE x̄ = C_ε(U(x̄)) by damped fixed-point iteration
    x ← (1−α)x + αC_ε(U(x)), started from C_ε(0).
    """
    if not 0.0 < damping <= 1.0:
        raise InvalidInputError(f"damping must lie in (0, 1], got {damping}")
    if mu is not None and not mspec.epsilon > mu:
        raise PreconditionError(f"perturbed NE needs epsilon > mu (epsilon={mspec.epsilon}, mu={mu})")

    x = mirror_map(mspec, np.zeros(game.n))
    residual = np.inf
    for it in range(max_iter):
        target = mirror_map(mspec, game.U(x))
        residual = float(np.max(np.abs(x - target)))
        if residual <= tol:
            break
        x = (1.0 - damping) * x + damping * target
    else:
        raise SolverError(
            f"fixed-point iteration did not converge on '{game.name}'; "
            f"try a smaller damping or a larger epsilon",
            last_residual=residual,
        )

    check = float(np.max(np.abs(x - mirror_map(mspec, game.U(x)))))
    if check > tol:
        raise SolverError("perturbed NE failed the post-hoc fixed-point check", last_residual=check)
    logger.debug("perturbed NE of %s found after %d iterations", game.name, it)
    return game.profile(x)


def lyapunov_md(mspec: MirrorSpec, gamma: float, z, z_target):
    """V_z = γ⁻¹ Σ_p D_{ψ⋆}(zᵖ, zᵖ⋆)."""
    return dual_bregman(mspec, z, z_target) / gamma


# --- Rate bounds ---

def _require(condition: bool, message: str, error=InvalidInputError) -> None:
    if not condition:
        raise error(message)


def _pair(beta: float, bregman_c0: float, euclid_c0: float, target,
          target_first: bool = True) -> Tuple[RateBound, RateBound]:
    return (
        RateBound(exponent=beta, constant=bregman_c0, metric="bregman_to_target",
                  target=target, target_first=target_first),
        RateBound(exponent=beta, constant=euclid_c0, metric="euclid_sq_to_target",
                  target=target, target_first=target_first),
    )


def md_rate_bound(gamma: float, eta: float, epsilon: float, D0: float, rho: float = 1.0,
                  target: Optional[StrategyProfile] = None) -> Tuple[RateBound, RateBound]:
    """β = γη/ε; bregman C0 = D0, euclid C0 = 2D0/ρ. η = 0 gives the conserved bound."""
    _require(gamma > 0 and epsilon > 0 and rho > 0, "gamma, epsilon and rho must be positive")
    _require(eta >= 0, f"MD bound needs eta >= 0, got {eta}", PreconditionError)
    _require(D0 >= 0, f"D0 must be nonnegative, got {D0}")
    return _pair(gamma * eta / epsilon, D0, 2.0 * D0 / rho, target)


def dmd_rate_bound(gamma: float, mu: float, epsilon: float, D0: float, rho: float = 1.0,
                   target: Optional[StrategyProfile] = None) -> Tuple[RateBound, RateBound]:
    """β = γ(ε−μ)/ε; μ may be negative (μ = −η for strongly monotone games)."""
    _require(gamma > 0 and epsilon > 0 and rho > 0, "gamma, epsilon and rho must be positive")
    _require(epsilon > mu, f"DMD bound requires epsilon > mu (epsilon={epsilon}, mu={mu})",
             PreconditionError)
    _require(D0 >= 0, f"D0 must be nonnegative, got {D0}")
    return _pair(gamma * (epsilon - mu) / epsilon, D0, 2.0 * D0 / rho, target)


def ac_rate_bound(gamma: float, eta: float, epsilon: float, r: float, potential_gap0: float,
                  D0: float, rho: float = 1.0, target: Optional[StrategyProfile] = None
                  ) -> Tuple[RateBound, RateBound, RateBound]:
    """
    β = γη/ε with C0 = gap0 + (rε/γ)D0 for the potential gap, C0/η for
    D_h(x, x⋆) and 2C0/(ρη) for the squared distance. Needs ε > ηγ/r.
    """
    _require(gamma > 0 and epsilon > 0 and r > 0 and rho > 0, "gamma, epsilon, r and rho must be positive")
    _require(eta > 0, f"AC bound needs eta > 0, got {eta}", PreconditionError)
    _require(epsilon > eta * gamma / r,
             f"AC bound requires epsilon > eta*gamma/r (epsilon={epsilon}, eta*gamma/r={eta * gamma / r})",
             PreconditionError)
    _require(D0 >= 0, f"D0 must be nonnegative, got {D0}")
    beta = gamma * eta / epsilon
    c0 = max(potential_gap0 + r * epsilon * D0 / gamma, 0.0)
    gap = RateBound(exponent=beta, constant=c0, metric="potential_gap", target=target)
    bregman, euclid = _pair(beta, c0 / eta, 2.0 * c0 / (rho * eta), target, target_first=False)
    return gap, bregman, euclid


def convert_relative(constant: float, kind: Literal["strong", "hypo"],
                     ell_smooth: Optional[float] = None,
                     rho_strongconvex: Optional[float] = None) -> float:
    """η-strong → η/ℓ relative; μ-hypo → μ/ρ relative."""
    _require(constant >= 0, f"modulus must be nonnegative, got {constant}")
    if kind == "strong":
        _require(ell_smooth is not None and ell_smooth > 0, "strong conversion needs a positive ell_smooth")
        return constant / ell_smooth
    if kind == "hypo":
        _require(rho_strongconvex is not None and rho_strongconvex > 0,
                 "hypo conversion needs a positive rho_strongconvex")
        return constant / rho_strongconvex
    raise InvalidInputError(f"unknown conversion kind '{kind}'")


# --- Verification ---

def measure_metric(traj: Trajectory, bound: RateBound, game: Game, mspec: MirrorSpec) -> np.ndarray:
    if bound.target is None:
        raise BoundMismatchError("bound has no target profile")
    target = bound.target.values
    if target.shape[0] != traj.x.shape[1]:
        raise BoundMismatchError("bound target does not match the trajectory dimension")
    x = traj.x
    if bound.metric == "bregman_to_target":
        if bound.target_first:
            return np.asarray(stacked_bregman(mspec, target, x), dtype=float)
        return np.asarray(stacked_bregman(mspec, x, target), dtype=float)
    if bound.metric == "euclid_sq_to_target":
        d = x - target
        return np.sum(d * d, axis=1)
    if game.potential is None:
        raise BoundMismatchError(f"potential_gap bound needs a potential; '{game.name}' has none")
    return float(game.P(target)) - np.asarray(game.P(x), dtype=float)


def default_t_min(times: np.ndarray, metric: np.ndarray) -> float:
    """First sample time at which the metric falls below its initial value."""
    below = np.flatnonzero(metric < metric[0])
    return float(times[below[0]]) if below.size else float(times[-1])


def verify_bound(traj: Trajectory, bound: RateBound, game: Game, mspec: MirrorSpec,
                 slack: float = DEFAULT_SLACK, t_min: Optional[float] = None) -> BoundReport:
    """
    Compare the measured metric with C0·e^{−βt}·(1+slack) at every sample;
    asymptotic bounds ignore samples before ``t_min``.
    """
    metric = measure_metric(traj, bound, game, mspec)
    values = bound.value(traj.times)
    times = traj.times

    if bound.validity == "all_t":
        mask = np.ones(len(times), dtype=bool)
        mode = "all_t"
    else:
        t_min = default_t_min(times, metric) if t_min is None else float(t_min)
        mask = times >= t_min
        mode = f"asymptotic(t_min={t_min!r})"

    limit = values * (1.0 + slack) + ABS_TOL
    bad = mask & (metric > limit)
    violations = [
        Violation(t=float(t), measured=float(m), bound=float(b))
        for t, m, b in zip(times[bad], metric[bad], values[bad])
    ]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(values > 0, metric / values, np.where(metric > ABS_TOL, np.inf, 0.0))
    max_ratio = float(np.max(ratios[mask])) if np.any(mask) else 0.0

    if violations:
        logger.info("bound %s violated at %d of %d samples (max ratio %.6g)",
                    bound.metric, len(violations), int(mask.sum()), max_ratio)
    return BoundReport(checked_times=int(mask.sum()), violations=violations,
                       max_ratio=max_ratio, mode=mode, passed=not violations)


def fit_decay_exponent(times, values, floor_ratio: float = DECAY_FLOOR_RATIO) -> float:
    """
    Least-squares decay rate of log(values) over the final half of the
    resolvable window (samples above ``floor_ratio``·values[0]).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    floor = floor_ratio * values[0] if values[0] > 0 else 0.0
    above = np.flatnonzero((values > floor) & (values > 0))
    if above.size < 2:
        raise InvalidInputError("fewer than two samples above the noise floor")
    t_cut = times[above[-1]]
    window = above[times[above] >= 0.5 * t_cut]
    if window.size < 2:
        window = above
    slope = np.polyfit(times[window], np.log(values[window]), 1)[0]
    return float(-slope)
