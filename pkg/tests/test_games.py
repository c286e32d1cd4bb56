import numpy as np
import pytest

from dualdyn.models.Game import MonotonicityReport
from dualdyn.models.Geometry import BoxDomain, MirrorSpec, RegularizerKind, SimplexDomain
from dualdyn.utils.exceptions import InvalidGameError, InvalidInputError
from dualdyn.utils.games import (
    attack_eta_grid,
    build_adversarial_attack,
    build_network_mp,
    build_network_zero_sum,
    build_quadratic_potential,
    build_rps,
    check_potential,
    estimate_monotonicity,
    load_attack_dataset,
    matching_pennies,
    perturb_game,
    potential_gradient_error,
    sample_interior,
)


def entropy_regs(game):
    return [RegularizerKind(kind="entropy", domain=d) for d in game.domains]


def euclid_regs(game):
    return [RegularizerKind(kind="euclidean", domain=d) for d in game.domains]


def unit_boxes(n):
    return [BoxDomain(lo=(-1.0,), hi=(1.0,)) for _ in range(n)]


@pytest.fixture(scope="module")
def rps():
    return build_rps(1.0, 5.0)


@pytest.fixture(scope="module")
def network():
    return build_network_mp()


@pytest.fixture(scope="module")
def quadratic14():
    return build_quadratic_potential(np.diag([1.0, 4.0]), np.zeros(2), unit_boxes(2))


class TestRps:
    def test_uniform_profile(self, rps):
        assert rps.U(np.full(6, 1.0 / 3.0)) == pytest.approx(np.full(6, -4.0 / 3.0))

    def test_bimatrix_block_order(self, rps):
        A = np.array([[0.0, -5.0, 1.0], [1.0, 0.0, -5.0], [-5.0, 1.0, 0.0]])
        x1, x2 = np.array([0.6, 0.3, 0.1]), np.array([0.2, 0.2, 0.6])
        assert rps.U(np.concatenate([x1, x2])) == pytest.approx(np.concatenate([A @ x2, A @ x1]))

    def test_printed_form(self):
        game = build_rps(1.0, 5.0, payoff_form="printed")
        A = game.params["phi"][:3, :3]
        x1, x2 = np.array([0.6, 0.3, 0.1]), np.array([0.2, 0.2, 0.6])
        assert game.U(np.concatenate([x1, x2])) == pytest.approx(np.concatenate([A @ x1, A @ x2]))

    def test_null_monotone_when_w_equals_l(self):
        game = build_rps(1.0, 1.0)
        pts = sample_interior(game.domains, game.partition, [0], 500, pairs=True)
        X, Y = pts[:, 0], pts[:, 1]
        inner = np.sum((game.U(X) - game.U(Y)) * (X - Y), axis=1)
        assert np.max(np.abs(inner)) <= 1e-12

    @pytest.mark.parametrize("w, l", [(0.0, 1.0), (1.0, -2.0)])
    def test_rejects_nonpositive(self, w, l):
        with pytest.raises(InvalidInputError):
            build_rps(w, l)

    def test_known_ne(self, rps):
        assert rps.known_ne == pytest.approx(np.full(6, 1.0 / 3.0))


class TestNetworkZeroSum:
    def test_phi_is_skew(self, network):
        phi = network.params["phi"]
        assert np.linalg.norm(phi + phi.T) == 0.0
        assert np.any(phi != 0.0)

    def test_uniform_is_rest_point(self, network):
        assert network.U(np.full(6, 0.5)) == pytest.approx(np.zeros(6), abs=0)

    def test_zero_sum_form(self, network):
        X = sample_interior(network.domains, network.partition, [3], 200)
        assert np.max(np.abs(np.sum(X * network.U(X), axis=1))) <= 1e-12

    def test_rejects_inconsistent_reverse_edge(self):
        with pytest.raises(InvalidGameError):
            build_network_zero_sum({(0, 1): matching_pennies(1), (1, 0): matching_pennies(1)})

    def test_accepts_explicit_reverse_edge(self):
        A = matching_pennies(2)
        game = build_network_zero_sum({(0, 1): A, (1, 0): -A.T})
        assert game.partition.sizes == (2, 2)

    def test_rejects_empty(self):
        with pytest.raises(InvalidGameError):
            build_network_zero_sum({})


class TestAdversarialAttack:
    @pytest.fixture(scope="class")
    def attack(self):
        return build_adversarial_attack(load_attack_dataset(), (0.8484, 0.8947), 10.0)

    def test_shipped_dataset(self):
        a, b = load_attack_dataset()
        assert a.shape == b.shape == (10,)
        assert set(b.tolist()) == {-1.0, 1.0}

    def test_regularizer_term_vanishes_at_uniform(self, attack):
        x = np.concatenate([[0.3], np.full(10, 0.1)])
        prm = attack.params
        margin = -prm["b_hat"] * (prm["w0"] + prm["w1"] * (prm["a"] + 0.3))
        assert attack.U(x)[1:] == pytest.approx(np.log1p(np.exp(margin)), rel=1e-12)

    def test_player_two_jacobian_block(self, attack):
        from dualdyn.utils.games import finite_difference_jacobian

        x = np.concatenate([[0.1], np.full(10, 0.1)])
        J = finite_difference_jacobian(attack.U, x)
        assert J[1:, 1:] == pytest.approx(-10.0 * np.eye(10), abs=1e-6)

    def test_grid_eta_positive(self, attack):
        eta = attack_eta_grid(attack)
        assert 0.0 < eta <= 10.0
        assert eta == pytest.approx(0.0228, abs=5e-4)

    @pytest.mark.parametrize("labels", [[1.0, 0.0], [2.0, -1.0]])
    def test_rejects_bad_labels(self, labels):
        with pytest.raises(InvalidGameError):
            build_adversarial_attack(([0.1, 0.2], labels), (0.5, 0.5), 10.0)

    def test_rejects_empty_dataset(self):
        with pytest.raises(InvalidGameError):
            build_adversarial_attack(([], []), (0.5, 0.5), 10.0)


class TestQuadraticPotential:
    def test_identity(self):
        game = build_quadratic_potential(np.eye(2), np.zeros(2), unit_boxes(2))
        x = np.array([0.3, -0.4])
        assert game.U(x) == pytest.approx(-x)
        assert game.params["eta"] == 1.0

    def test_gradient_consistency(self, quadratic14):
        assert potential_gradient_error(quadratic14, n_points=100) <= 1e-6

    @pytest.mark.parametrize("Q", [[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]]])
    def test_rejects_bad_q(self, Q):
        with pytest.raises(InvalidGameError):
            build_quadratic_potential(np.array(Q), np.zeros(2), unit_boxes(2))


class TestCheckPotential:
    def test_quadratic(self, quadratic14):
        assert check_potential(quadratic14)

    def test_network(self, network):
        assert not check_potential(network)

    def test_rps(self, rps):
        assert not check_potential(rps)


class TestEstimateMonotonicity:
    def test_skew_game_reports_exact_zero(self, network):
        report = estimate_monotonicity(network, entropy_regs(network), 20_000, rng_seed=1)
        assert report.eta_est == 0.0 and report.mu_est == 0.0
        assert report.relative_eta_est == 0.0 and report.relative_mu_est == 0.0

    def test_rps_hypo_monotone(self, rps):
        report = estimate_monotonicity(rps, entropy_regs(rps), 100_000, rng_seed=0)
        assert 1.8 <= report.mu_est <= 2.0 + 1e-12
        assert 0.0 < report.relative_mu_est <= 2.0 + 1e-12
        assert report.eta_est == 0.0
        assert report.samples_used == 100_000

    def test_quadratic_strongly_monotone(self, quadratic14):
        report = estimate_monotonicity(quadratic14, euclid_regs(quadratic14), 100_000, rng_seed=0)
        assert 1.0 <= report.eta_est <= 1.05
        assert report.mu_est == 0.0
        assert report.relative_eta_est == pytest.approx(report.eta_est)

    def test_more_samples_never_raise_eta(self, quadratic14):
        small = estimate_monotonicity(quadratic14, euclid_regs(quadratic14), 5_000, rng_seed=4)
        large = estimate_monotonicity(quadratic14, euclid_regs(quadratic14), 20_000, rng_seed=4)
        assert large.eta_est <= small.eta_est

    def test_accepts_mirror_spec(self, rps):
        spec = MirrorSpec(regularizers=tuple(entropy_regs(rps)), epsilon=1.0)
        assert isinstance(estimate_monotonicity(rps, spec, 10), MonotonicityReport)

    def test_mismatched_regularizers(self, rps):
        with pytest.raises(InvalidInputError):
            estimate_monotonicity(rps, entropy_regs(rps)[:1], 10)


class TestPerturbGame:
    def test_euclidean_perturbation(self, quadratic14):
        spec = MirrorSpec(regularizers=tuple(euclid_regs(quadratic14)), epsilon=0.3)
        perturbed = perturb_game(quadratic14, spec)
        x = np.array([0.2, -0.7])
        assert perturbed.U(x) == pytest.approx(quadratic14.U(x) - 0.3 * x)
        assert perturbed.P(x) == pytest.approx(quadratic14.P(x) - 0.3 * 0.5 * x @ x)

    def test_small_epsilon_limit(self, rps):
        spec = MirrorSpec(regularizers=tuple(entropy_regs(rps)), epsilon=1e-12)
        x = np.array([0.2, 0.3, 0.5, 0.1, 0.6, 0.3])
        assert perturb_game(rps, spec).U(x) == pytest.approx(rps.U(x), abs=1e-10)

    @pytest.mark.parametrize("epsilon", [2.1, 3.0, 5.0])
    def test_relative_strong_monotonicity(self, rps, epsilon):
        regs = entropy_regs(rps)
        base = estimate_monotonicity(rps, regs, 10_000, rng_seed=2)
        spec = MirrorSpec(regularizers=tuple(regs), epsilon=epsilon)
        perturbed = estimate_monotonicity(perturb_game(rps, spec), regs, 10_000, rng_seed=2)
        assert perturbed.relative_eta_est >= epsilon - base.relative_mu_est - 1e-3
        assert perturbed.relative_eta_est >= epsilon - 2.0 - 1e-3
