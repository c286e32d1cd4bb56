"""
Vector fields of the MD / DMD / AC dynamics and a fixed-step RK4 integrator.
"""
import logging
from typing import Callable, Optional

import numpy as np

from dualdyn.models.Dynamics import DynamicsSpec, IntegratorConfig, Trajectory
from dualdyn.models.Game import Game
from dualdyn.models.Geometry import MirrorSpec
from dualdyn.utils.exceptions import DivergenceError, IntegratorError, InvalidInputError
from dualdyn.utils.geometry import mirror_map

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12


def _check_state(state: np.ndarray) -> None:
    bad = ~np.isfinite(state)
    if np.any(bad):
        index = int(np.flatnonzero(bad)[0])
        raise IntegratorError(f"non-finite state at index {index}", index=index)


def _check_compatible(game: Game, mspec: MirrorSpec) -> None:
    if game.partition.sizes != mspec.partition.sizes:
        raise InvalidInputError(
            f"mirror spec blocks {mspec.partition.sizes} do not match game blocks {game.partition.sizes}"
        )
    for p, (dom, reg) in enumerate(zip(game.domains, mspec.regularizers)):
        if dom.kind != reg.domain.kind:
            raise InvalidInputError(f"player {p}: regularizer domain '{reg.domain.kind}' != game domain '{dom.kind}'")


def vector_field(dspec: DynamicsSpec, game: Game, mspec: MirrorSpec, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    n = game.n
    expected = 2 * n if dspec.kind == "AC" else n
    if state.shape != (expected,):
        raise InvalidInputError(f"{dspec.kind} state must have length {expected}, got {state.shape}")
    _check_state(state)

    if dspec.kind == "MD":
        return dspec.gamma * game.U(mirror_map(mspec, state))
    if dspec.kind == "DMD":
        return dspec.gamma * (game.U(mirror_map(mspec, state)) - state)

    z, x = state[:n], state[n:]
    return np.concatenate([
        dspec.gamma * game.U(x),
        dspec.r * (mirror_map(mspec, z) - x),
    ])


def rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_plan(cfg: IntegratorConfig):
    n_full = int(np.floor(cfg.t_end / cfg.dt + 1e-9))
    tail = cfg.t_end - n_full * cfg.dt
    if tail > 1e-12 * cfg.dt:
        return n_full + 1, tail
    return n_full, None


def integrate(dspec: DynamicsSpec, game: Game, mspec: MirrorSpec, z0,
              cfg: IntegratorConfig, x0=None) -> Trajectory:
    """
    Classical RK4 with fixed step ``cfg.dt``. Samples every ``cfg.sample_every``
    steps plus the final time. Aborts with DivergenceError once ‖z‖∞ > 1e12.
    """
    _check_compatible(game, mspec)
    n = game.n
    z0 = np.asarray(z0, dtype=float).ravel()
    if z0.shape != (n,):
        raise InvalidInputError(f"z0 must have length {n}, got {z0.size}")
    if not np.all(np.isfinite(z0)):
        raise InvalidInputError("z0 has non-finite entries")

    if dspec.kind == "AC":
        x0 = mirror_map(mspec, z0) if x0 is None else np.asarray(x0, dtype=float).ravel()
        if x0.shape != (n,) or not game.is_feasible(x0):
            raise InvalidInputError("AC initial primal state x0 is not a feasible profile")
        state = np.concatenate([z0, x0])
    else:
        state = z0.copy()

    def f(y: np.ndarray) -> np.ndarray:
        return vector_field(dspec, game, mspec, y)

    n_steps, tail = _step_plan(cfg)
    logger.debug("integrating %s on %s: %d steps of dt=%g", dspec.kind, game.name, n_steps, cfg.dt)

    times = [0.0]
    states = [state.copy()]
    for k in range(1, n_steps + 1):
        last = k == n_steps
        h = tail if (last and tail is not None) else cfg.dt
        state = rk4_step(f, state, h)
        t = cfg.t_end if last else k * cfg.dt
        norm = float(np.max(np.abs(state[:n])))
        if not np.isfinite(norm):
            _check_state(state)
        if norm > DIVERGENCE_THRESHOLD:
            raise DivergenceError(t, norm)
        if last or k % cfg.sample_every == 0:
            times.append(t)
            states.append(state.copy())

    S = np.vstack(states)
    z = S[:, :n]
    mirror_x = mirror_map(mspec, z)
    x = S[:, n:] if dspec.kind == "AC" else mirror_x
    return Trajectory(kind=dspec.kind, partition=game.partition, times=np.array(times),
                      z=z, x=x, mirror_x=mirror_x)


def state_velocity(traj: Trajectory) -> float:
    """‖x(t_K) − x(t_{K−1})‖∞ / (t_K − t_{K−1}) over the last two samples."""
    if len(traj) < 2:
        return 0.0
    dt = traj.times[-1] - traj.times[-2]
    return float(np.max(np.abs(traj.x[-1] - traj.x[-2])) / dt)


def richardson_order(coarse: Trajectory, mid: Trajectory, fine: Trajectory) -> float:
    """
    Observed convergence order from three runs at dt, dt/2, dt/4 sampled at the
    same times: log2(max‖z_dt − z_dt/2‖∞ / max‖z_dt/2 − z_dt/4‖∞).
    """
    for other in (mid, fine):
        if len(other) != len(coarse) or not np.allclose(other.times, coarse.times, rtol=0, atol=1e-9):
            raise InvalidInputError("Richardson estimate needs runs sampled at identical times")
    e1 = float(np.max(np.abs(coarse.z - mid.z)))
    e2 = float(np.max(np.abs(mid.z - fine.z)))
    if e2 == 0.0:
        raise InvalidInputError("finest runs coincide; order is undefined")
    return float(np.log2(e1 / e2))
