"""
Regularizers, projections, mirror maps and Bregman divergences.

Every function is pure. Block-level functions work on the last axis, so a batch
of points can be passed as a 2-D array with one point per row.
"""
import logging
from typing import Sequence

import numpy as np
from scipy.special import kl_div, logsumexp, softmax, xlogy

from dualdyn.models.Geometry import BoxDomain, MirrorSpec, RegularizerKind, SimplexDomain
from dualdyn.utils.exceptions import DomainError, InvalidInputError

logger = logging.getLogger(__name__)

# Coordinates below this are treated as the boundary of the simplex.
ENTROPY_FLOOR = 1e-300


def _as_finite(v, name: str = "input") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise InvalidInputError(f"{name} has a non-finite entry at flat index {bad}")
    return arr


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-then-threshold)."""
    v = _as_finite(v, "v")
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    # the largest index satisfying cond; cond[..., 0] always holds
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)


def project_box(v, lo, hi) -> np.ndarray:
    v = _as_finite(v, "v")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise InvalidInputError("invalid box domain: lo > hi in some coordinate")
    return np.clip(v, lo, hi)


def project_onto_domain(domain, v) -> np.ndarray:
    if isinstance(domain, SimplexDomain):
        return project_simplex(v)
    return project_box(v, domain.lo, domain.hi)


def project_profile(domains: Sequence, partition, v) -> np.ndarray:
    """Blockwise projection of a stacked vector onto Ω = ∏ Ωᵖ."""
    v = _as_finite(v, "v")
    out = np.empty_like(v)
    for domain, sl in zip(domains, partition.slices):
        out[..., sl] = project_onto_domain(domain, v[..., sl])
    return out


def _check_interior(reg: RegularizerKind, y: np.ndarray, name: str) -> None:
    if reg.kind == "entropy" and np.any(y < ENTROPY_FLOOR):
        raise DomainError(f"{name} lies on the simplex boundary; entropy gradient is undefined there")


def regularizer_value(reg: RegularizerKind, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if reg.kind == "euclidean":
        return 0.5 * np.sum(x * x, axis=-1)
    return np.sum(xlogy(x, x), axis=-1)


def regularizer_gradient(reg: RegularizerKind, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if reg.kind == "euclidean":
        return x.copy()
    _check_interior(reg, x, "x")
    return np.log(x) + 1.0


def mirror_map_block(reg: RegularizerKind, epsilon: float, z) -> np.ndarray:
    """C_ε for one player: projection of z/ε, or softmax with temperature ε."""
    scaled = np.asarray(z, dtype=float) / epsilon
    if reg.kind == "entropy":
        return softmax(scaled, axis=-1)
    return project_onto_domain(reg.domain, scaled)


def mirror_map(spec: MirrorSpec, z) -> np.ndarray:
    z = _as_finite(z, "z")
    if z.shape[-1] != spec.partition.total:
        raise InvalidInputError(
            f"dual vector has length {z.shape[-1]}, expected {spec.partition.total}"
        )
    out = np.empty_like(z)
    for reg, sl in zip(spec.regularizers, spec.partition.slices):
        out[..., sl] = mirror_map_block(reg, spec.epsilon, z[..., sl])
    return out


def mirror_preimage(spec: MirrorSpec, x) -> np.ndarray:
    """∇ψ_ε(x) = ε∇ϑ(x): a dual point mapped back to x (x interior)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for reg, sl in zip(spec.regularizers, spec.partition.slices):
        out[..., sl] = spec.epsilon * regularizer_gradient(reg, x[..., sl])
    return out


def bregman(reg: RegularizerKind, x, y) -> np.ndarray:
    """D_ϑ(x, y) = ϑ(x) − ϑ(y) − ∇ϑ(y)ᵀ(x − y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if reg.kind == "euclidean":
        d = x - y
        return 0.5 * np.sum(d * d, axis=-1)
    _check_interior(reg, y, "second argument")
    return np.sum(kl_div(x, y), axis=-1)


def symmetrized_bregman(reg: RegularizerKind, x, y) -> np.ndarray:
    """D(x,y) + D(y,x) = (x − y)ᵀ(∇ϑ(x) − ∇ϑ(y))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum((x - y) * (regularizer_gradient(reg, x) - regularizer_gradient(reg, y)), axis=-1)


def stacked_bregman(spec: MirrorSpec, x, y) -> np.ndarray:
    """D_h(x, y) for h = Σ_p ϑᵖ (unscaled by ε)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return sum(
        bregman(reg, x[..., sl], y[..., sl])
        for reg, sl in zip(spec.regularizers, spec.partition.slices)
    )


def conjugate_value(spec: MirrorSpec, z) -> float:
    """ψ_ε⋆(z) = C_ε(z)ᵀz − εϑ(C_ε(z)), summed over players."""
    z = _as_finite(z, "z")
    eps = spec.epsilon
    total = 0.0
    for reg, sl in zip(spec.regularizers, spec.partition.slices):
        zb = z[..., sl]
        if reg.kind == "entropy":
            total = total + eps * logsumexp(zb / eps, axis=-1)
        else:
            xb = mirror_map_block(reg, eps, zb)
            total = total + np.sum(xb * zb, axis=-1) - eps * regularizer_value(reg, xb)
    return total


def dual_bregman(spec: MirrorSpec, z, z_ref) -> float:
    """D_{ψ⋆}(z, z_ref); equals D_ψ(C(z_ref), C(z))."""
    z = _as_finite(z, "z")
    z_ref = _as_finite(z_ref, "z_ref")
    x_ref = mirror_map(spec, z_ref)
    value = (
        conjugate_value(spec, z)
        - conjugate_value(spec, z_ref)
        - np.sum(x_ref * (z - z_ref), axis=-1)
    )
    return np.maximum(value, 0.0)
