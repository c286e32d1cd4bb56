"""
Game builders for the case studies plus sampling-based diagnostics
(monotonicity moduli, potential/Jacobian symmetry checks) and the
regularizer perturbation Ũ = U − εΨ.
"""
import logging
import os
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from dualdyn.config.settings import ATTACK_DATASET_PATH
from dualdyn.models.Game import Game, MonotonicityReport
from dualdyn.models.Geometry import BlockPartition, BoxDomain, MirrorSpec, RegularizerKind, SimplexDomain
from dualdyn.utils.exceptions import DomainError, InvalidGameError, InvalidInputError
from dualdyn.utils.geometry import ENTROPY_FLOOR, regularizer_gradient, regularizer_value, symmetrized_bregman

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
BOX_SHRINK = 1e-6
SAMPLE_CHUNK = 4096
# Ratios whose numerator sits at floating-point resolution count as exactly zero.
ROUNDOFF_RATIO = 1e-12


# --- Domains ---

def domain_center(domains: Sequence) -> np.ndarray:
    parts = []
    for dom in domains:
        if dom.kind == "simplex":
            parts.append(np.full(dom.dim, 1.0 / dom.dim))
        else:
            parts.append(0.5 * (np.asarray(dom.lo) + np.asarray(dom.hi)))
    return np.concatenate(parts)


def _sample_block(domain, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    if domain.kind == "simplex":
        return rng.dirichlet(np.ones(domain.dim), size=shape)
    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    width = hi - lo
    lo, hi = lo + BOX_SHRINK * width, hi - BOX_SHRINK * width
    return lo + (hi - lo) * rng.random(shape + (domain.dim,))


def sample_interior(domains: Sequence, partition: BlockPartition, seed_key, size: int,
                    pairs: bool = False) -> np.ndarray:
    """
    Interior samples of Ω: Dirichlet(1) on simplices, uniform on a shrunk box.

    Each block draws from its own generator ``default_rng([*seed_key, p])`` so a
    longer draw extends a shorter one. With ``pairs=True`` the result has shape
    (size, 2, n), otherwise (size, n).
    """
    key = [int(v) for v in np.atleast_1d(seed_key)]
    shape = (size, 2) if pairs else (size,)
    out = np.empty(shape + (partition.total,))
    for p, (dom, sl) in enumerate(zip(domains, partition.slices)):
        rng = np.random.default_rng(key + [p])
        out[..., sl] = _sample_block(dom, rng, shape)
    return out


# --- Builders ---

def rps_matrix(w: float, l: float) -> np.ndarray:
    return np.array([[0.0, -l, w], [w, 0.0, -l], [-l, w, 0.0]])


def _linear_game(name: str, phi: np.ndarray, domains: Tuple, known_ne=None,
                 params: Optional[Dict] = None) -> Game:
    partition = BlockPartition(sizes=tuple(d.dim for d in domains))
    phi_t = phi.T.copy()

    def pseudo_gradient(x: np.ndarray) -> np.ndarray:
        return x @ phi_t

    return Game(
        name=name,
        partition=partition,
        domains=domains,
        pseudo_gradient=pseudo_gradient,
        lipschitz_hint=float(np.linalg.norm(phi, 2)) or None,
        known_ne=known_ne,
        params={"phi": phi, **(params or {})},
    )


def build_rps(w: float, l: float, payoff_form: str = "bimatrix") -> Game:
    """
    Two-player rock-paper-scissors on Δ³ × Δ³.

    ``bimatrix`` gives U(x) = (A x², A x¹), the factored block form;
    ``printed`` gives U(x) = (A x¹, A x²).
    """
    if not (w > 0 and l > 0 and np.isfinite(w) and np.isfinite(l)):
        raise InvalidInputError(f"rps needs positive w and l, got w={w}, l={l}")
    A = rps_matrix(w, l)
    zero = np.zeros((3, 3))
    if payoff_form == "bimatrix":
        phi = np.block([[zero, A], [A, zero]])
    elif payoff_form == "printed":
        phi = np.block([[A, zero], [zero, A]])
    else:
        raise InvalidInputError(f"unknown rps payoff form '{payoff_form}'")
    domains = (SimplexDomain(dim=3), SimplexDomain(dim=3))
    return _linear_game(
        "rps", phi, domains,
        known_ne=np.full(6, 1.0 / 3.0),
        params={"w": w, "l": l, "payoff_form": payoff_form},
    )


def build_network_zero_sum(edge_matrices: Mapping[Tuple[int, int], np.ndarray],
                           name: str = "network-zero-sum", known_ne=None) -> Game:
    """
    Network zero-sum game U(x) = Φx on a product of simplices.

    Missing reverse blocks are filled with −Aᵀ; a supplied reverse block must
    already equal −Aᵀ.
    """
    if not edge_matrices:
        raise InvalidGameError("network game needs at least one edge")
    blocks = {key: np.atleast_2d(np.asarray(m, dtype=float)) for key, m in edge_matrices.items()}
    sizes: Dict[int, int] = {}
    for (p, q), m in blocks.items():
        for player, dim in ((p, m.shape[0]), (q, m.shape[1])):
            if sizes.setdefault(player, dim) != dim:
                raise InvalidGameError(f"player {player} has inconsistent block sizes")
    n_players = max(sizes) + 1
    missing = [p for p in range(n_players) if p not in sizes]
    if missing:
        raise InvalidGameError(f"players {missing} have no edges")

    for (p, q), m in list(blocks.items()):
        reverse = blocks.get((q, p))
        if reverse is None:
            blocks[(q, p)] = -m.T
        elif not np.allclose(reverse, -m.T, rtol=0.0, atol=1e-12):
            raise InvalidGameError(f"edge ({q},{p}) is not the negative transpose of edge ({p},{q})")

    partition = BlockPartition(sizes=tuple(sizes[p] for p in range(n_players)))
    phi = np.zeros((partition.total, partition.total))
    for (p, q), m in blocks.items():
        phi[partition.slices[p], partition.slices[q]] = m
    if np.linalg.norm(phi + phi.T) != 0.0:
        raise InvalidGameError("assembled Φ is not skew-symmetric")

    domains = tuple(SimplexDomain(dim=sizes[p]) for p in range(n_players))
    return _linear_game(name, phi, domains, known_ne=known_ne)


def matching_pennies(k: float) -> np.ndarray:
    return np.array([[k, -k], [-k, k]], dtype=float)


def build_network_mp() -> Game:
    """Three-player matching-pennies network; its NE is uniform for every player."""
    edges = {(0, 1): matching_pennies(1), (0, 2): matching_pennies(2), (1, 2): matching_pennies(3)}
    return build_network_zero_sum(edges, name="network-mp", known_ne=np.full(6, 0.5))


def load_attack_dataset(path: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    path = path or ATTACK_DATASET_PATH
    if not os.path.isfile(path):
        raise InvalidInputError(f"attack dataset not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().replace(" ", "")
        if header != "a,b":
            raise InvalidInputError(f"{path}: expected header 'a,b', got '{header}'")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.shape[0] == 0:
        raise InvalidGameError(f"{path}: dataset is empty")
    return data[:, 0].copy(), data[:, 1].copy()


def build_adversarial_attack(dataset: Tuple[Sequence[float], Sequence[float]],
                             weights: Tuple[float, float],
                             r_reg: float,
                             iota_box: Tuple[float, float] = (-1.0, 1.0)) -> Game:
    """
    Attack on a logistic classifier over a whole dataset.

    Player 1 picks a shared feature perturbation ι in a box; player 2 picks a
    distribution p over data points. With margin m_n = −b̂_n(w0 + w1(a_n + ι)):
        U¹ = Σ p_n b̂_n w1 φ(m_n)
        U² = log(1 + exp(m_n)) − r(p − 1/N)
    where b̂ = −b are the adversarial targets.
    """
    a = np.asarray(dataset[0], dtype=float).ravel()
    b = np.asarray(dataset[1], dtype=float).ravel()
    if a.size == 0 or a.size != b.size:
        raise InvalidGameError("attack dataset must be nonempty with one label per point")
    if not np.all(np.isin(b, (-1.0, 1.0))):
        raise InvalidGameError("attack labels must be -1 or +1")
    if not r_reg > 0:
        raise InvalidInputError(f"r_reg must be positive, got {r_reg}")
    w0, w1 = (float(w) for w in weights)
    b_hat = -b
    n_points = a.size

    def pseudo_gradient(x: np.ndarray) -> np.ndarray:
        iota = x[..., :1]
        p = x[..., 1:]
        margin = -b_hat * (w0 + w1 * (a + iota))
        u1 = np.sum(p * b_hat * w1 * expit(margin), axis=-1, keepdims=True)
        u2 = np.logaddexp(0.0, margin) - r_reg * (p - 1.0 / n_points)
        return np.concatenate([u1, u2], axis=-1)

    domains = (BoxDomain(lo=(float(iota_box[0]),), hi=(float(iota_box[1]),)), SimplexDomain(dim=n_points))
    return Game(
        name="adversarial",
        partition=BlockPartition(sizes=(1, n_points)),
        domains=domains,
        pseudo_gradient=pseudo_gradient,
        params={"a": a, "b_hat": b_hat, "w0": w0, "w1": w1, "r_reg": float(r_reg),
                "iota_box": (float(iota_box[0]), float(iota_box[1]))},
    )


def attack_eta_grid(game: Game, n_grid: int = 2001) -> float:
    """Grid-searched strong-monotonicity modulus min{w1²φ(1−φ), r} of the attack game."""
    if game.name != "adversarial":
        raise InvalidGameError("grid search is defined for the adversarial game only")
    prm = game.params
    lo, hi = prm["iota_box"]
    iota = np.linspace(lo, hi, n_grid)[:, None]
    margin = -prm["b_hat"] * (prm["w0"] + prm["w1"] * (prm["a"] + iota))
    phi = expit(margin)
    curvature = prm["w1"] ** 2 * phi * (1.0 - phi)
    return float(min(curvature.min(), prm["r_reg"]))


def build_quadratic_potential(Q, b, domains: Sequence) -> Game:
    """Potential game P(x) = −½xᵀQx + bᵀx, U(x) = −Qx + b."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if Q.shape[0] != Q.shape[1] or Q.shape[0] != b.size:
        raise InvalidGameError(f"Q must be square and match b: Q{Q.shape}, b({b.size},)")
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12):
        raise InvalidGameError("Q must be symmetric")
    eigs = np.linalg.eigvalsh(Q)
    if eigs[0] <= 0:
        raise InvalidGameError(f"Q must be positive definite (min eigenvalue {eigs[0]:.3g})")
    domains = tuple(domains)
    if sum(d.dim for d in domains) != b.size:
        raise InvalidGameError("domain dimensions do not add up to len(b)")

    def pseudo_gradient(x: np.ndarray) -> np.ndarray:
        return b - x @ Q

    def potential(x: np.ndarray):
        return -0.5 * np.sum((x @ Q) * x, axis=-1) + x @ b

    return Game(
        name="quadratic",
        partition=BlockPartition(sizes=tuple(d.dim for d in domains)),
        domains=domains,
        pseudo_gradient=pseudo_gradient,
        potential=potential,
        lipschitz_hint=float(eigs[-1]),
        params={"Q": Q, "b": b, "eta": float(eigs[0])},
    )


# --- Diagnostics ---

def _regularizer_list(game: Game, h: Union[MirrorSpec, Sequence[RegularizerKind]]) -> Tuple[RegularizerKind, ...]:
    regs = tuple(h.regularizers) if isinstance(h, MirrorSpec) else tuple(h)
    if len(regs) != len(game.domains):
        raise InvalidInputError(f"need {len(game.domains)} regularizers, got {len(regs)}")
    for p, (reg, dom) in enumerate(zip(regs, game.domains)):
        if reg.dim != dom.dim or reg.domain.kind != dom.kind:
            raise InvalidInputError(f"player {p}: regularizer domain does not match the game")
    return regs


def estimate_monotonicity(game: Game, h, n_pairs: int, rng_seed: int = 0) -> MonotonicityReport:
    """
    Sampled sup of (U(x)−U(x'))ᵀ(x−x') over ‖x−x'‖² and over the symmetrized
    Bregman divergence of h. Negative sups give eta estimates, positive ones mu.
    """
    if n_pairs < 1:
        raise InvalidInputError("n_pairs must be at least 1")
    regs = _regularizer_list(game, h)
    slices = game.partition.slices
    sup_r2 = -np.inf
    sup_rh = -np.inf
    used = 0

    for k, start in enumerate(range(0, n_pairs, SAMPLE_CHUNK)):
        m = min(SAMPLE_CHUNK, n_pairs - start)
        pts = sample_interior(game.domains, game.partition, [rng_seed, k], m, pairs=True)
        X, Y = pts[:, 0, :], pts[:, 1, :]

        ok = np.ones(m, dtype=bool)
        for reg, sl in zip(regs, slices):
            if reg.steep:
                ok &= np.all(X[:, sl] >= ENTROPY_FLOOR, axis=1) & np.all(Y[:, sl] >= ENTROPY_FLOOR, axis=1)
        d = X - Y
        sq = np.sum(d * d, axis=1)
        ok &= sq > 1e-24
        if not np.any(ok):
            continue
        X, Y, d, sq = X[ok], Y[ok], d[ok], sq[ok]

        dU = game.U(X) - game.U(Y)
        num = np.sum(dU * d, axis=1)
        noise = ROUNDOFF_RATIO * np.linalg.norm(dU, axis=1) * np.sqrt(sq)
        num = np.where(np.abs(num) <= noise, 0.0, num)
        sym = sum(symmetrized_bregman(reg, X[:, sl], Y[:, sl]) for reg, sl in zip(regs, slices))

        sup_r2 = max(sup_r2, float(np.max(num / sq)))
        pos = sym > 0
        if np.any(pos):
            sup_rh = max(sup_rh, float(np.max(num[pos] / sym[pos])))
        used += int(ok.sum())

    if used == 0:
        raise DomainError(f"could not sample interior pairs for game '{game.name}'")

    logger.debug("monotonicity of %s: sup r2=%.6g, sup rh=%.6g over %d pairs", game.name, sup_r2, sup_rh, used)
    if not np.isfinite(sup_rh):
        sup_rh = 0.0
    return MonotonicityReport(
        eta_est=max(0.0, -sup_r2),
        mu_est=max(0.0, sup_r2),
        relative_eta_est=max(0.0, -sup_rh),
        relative_mu_est=max(0.0, sup_rh),
        samples_used=used,
    )


def finite_difference_jacobian(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    n = x.size
    basis = np.eye(n) * step
    forward = f(x + basis)
    backward = f(x - basis)
    # row j of forward/backward is the perturbation along e_j
    return ((forward - backward) / (2.0 * step)).T


def check_potential(game: Game, n_points: int = 20, fd_step: float = FD_STEP,
                    tol: float = 1e-6, seed: int = 0) -> bool:
    """True iff the finite-difference Jacobian of U is symmetric at every sampled point."""
    points = sample_interior(game.domains, game.partition, [seed], n_points)
    for x in points:
        J = finite_difference_jacobian(game.U, x, fd_step)
        scale = max(1.0, float(np.max(np.abs(J))))
        if np.max(np.abs(J - J.T)) > tol * scale:
            return False
    return True


def potential_gradient_error(game: Game, n_points: int = 100, fd_step: float = FD_STEP,
                             seed: int = 0) -> float:
    """Largest relative gap between central-difference ∇P and U over sampled profiles."""
    if game.potential is None:
        raise InvalidGameError(f"game '{game.name}' has no potential")
    points = sample_interior(game.domains, game.partition, [seed], n_points)
    basis = np.eye(game.n) * fd_step
    worst = 0.0
    for x in points:
        grad = (game.P(x + basis) - game.P(x - basis)) / (2.0 * fd_step)
        u = game.U(x)
        worst = max(worst, float(np.max(np.abs(grad - u)) / max(1.0, float(np.max(np.abs(u))))))
    return worst


def perturb_game(game: Game, spec: MirrorSpec) -> Game:
    """Game with Ũ = U − ε(∇ϑᵖ)_p and, if present, potential P − εΣϑᵖ."""
    regs = _regularizer_list(game, spec)
    eps = spec.epsilon
    slices = game.partition.slices
    base_u = game.pseudo_gradient
    base_p = game.potential

    def pseudo_gradient(x: np.ndarray) -> np.ndarray:
        grad = np.concatenate(
            [regularizer_gradient(reg, x[..., sl]) for reg, sl in zip(regs, slices)], axis=-1
        )
        return base_u(x) - eps * grad

    potential = None
    if base_p is not None:
        def potential(x: np.ndarray):
            penalty = sum(regularizer_value(reg, x[..., sl]) for reg, sl in zip(regs, slices))
            return base_p(x) - eps * penalty

    lipschitz = None
    if game.lipschitz_hint is not None and not any(reg.steep for reg in regs):
        lipschitz = game.lipschitz_hint + eps
    return Game(
        name=f"{game.name}+perturbed",
        partition=game.partition,
        domains=game.domains,
        pseudo_gradient=pseudo_gradient,
        potential=potential,
        lipschitz_hint=lipschitz,
        params={**game.params, "perturbation_epsilon": eps},
    )
