import math

import numpy as np
import pytest

from dualdyn.models.Dynamics import DynamicsSpec, IntegratorConfig
from dualdyn.models.Geometry import BoxDomain, MirrorSpec, RegularizerKind, SimplexDomain
from dualdyn.models.Report import RateBound
from dualdyn.utils.analysis import (
    ac_rate_bound,
    convert_relative,
    default_t_min,
    dmd_rate_bound,
    fit_decay_exponent,
    lyapunov_md,
    md_rate_bound,
    projected_residual,
    solve_ne,
    solve_perturbed_ne,
    verify_bound,
)
from dualdyn.utils.dynamics import integrate
from dualdyn.utils.exceptions import BoundMismatchError, InvalidInputError, PreconditionError, SolverError
from dualdyn.utils.games import build_network_mp, build_quadratic_potential, build_rps, estimate_monotonicity
from dualdyn.utils.geometry import mirror_map, mirror_preimage, stacked_bregman

UNIT_BOX = BoxDomain(lo=(-1.0,), hi=(1.0,))


def mirror_spec(game, kind, epsilon):
    return MirrorSpec(
        regularizers=tuple(RegularizerKind(kind=kind, domain=d) for d in game.domains),
        epsilon=epsilon,
    )


@pytest.fixture(scope="module")
def rps():
    return build_rps(1.0, 5.0)


@pytest.fixture(scope="module")
def network():
    return build_network_mp()


@pytest.fixture(scope="module")
def quadratic():
    return build_quadratic_potential(np.diag([1.0, 2.0]), np.zeros(2), [UNIT_BOX, UNIT_BOX])


@pytest.fixture(scope="module")
def rps_dmd_run(rps):
    spec = mirror_spec(rps, "entropy", 2.1)
    traj = integrate(DynamicsSpec(kind="DMD", gamma=1.0), rps, spec, [1, 2, 3, 1, 2, 3],
                     IntegratorConfig(dt=1e-2, t_end=100.0, sample_every=10))
    target = solve_perturbed_ne(rps, spec, mu=2.0)
    return spec, traj, target


class TestSolveNe:
    def test_known_equilibrium_short_circuits(self, rps):
        assert solve_ne(rps).values == pytest.approx(np.full(6, 1.0 / 3.0))

    def test_boundary_equilibrium(self):
        game = build_quadratic_potential(np.diag([1.0, 2.0]), [0.5, 4.0], [UNIT_BOX, UNIT_BOX])
        x = solve_ne(game)
        assert x.values == pytest.approx([0.5, 1.0], abs=1e-8)
        assert projected_residual(game, x.values) <= 1e-8

    def test_backtracking_without_lipschitz_hint(self):
        game = build_quadratic_potential(np.diag([3.0, 5.0]), [1.5, -1.0], [UNIT_BOX, UNIT_BOX])
        game = game.model_copy(update={"lipschitz_hint": None})
        assert solve_ne(game).values == pytest.approx([0.5, -0.2], abs=1e-8)

    def test_non_convergence(self):
        game = build_quadratic_potential(np.diag([1.0, 2.0]), [0.5, 0.3], [UNIT_BOX, UNIT_BOX])
        with pytest.raises(SolverError) as info:
            solve_ne(game, max_iter=1)
        assert info.value.last_residual > 0
        assert info.value.exit_code == 4


class TestSolvePerturbedNe:
    @pytest.mark.parametrize("epsilon", [2.1, 3.0, 5.0])
    def test_rps_uniform(self, rps, epsilon):
        x = solve_perturbed_ne(rps, mirror_spec(rps, "entropy", epsilon))
        assert np.max(np.abs(x.values - 1.0 / 3.0)) <= 1e-8

    def test_network_uniform(self, network):
        x = solve_perturbed_ne(network, mirror_spec(network, "entropy", 1.0))
        assert np.max(np.abs(x.values - 0.5)) <= 1e-8

    def test_fixed_point_property(self):
        game = build_quadratic_potential(np.diag([1.0, 2.0]), [0.3, -0.2], [UNIT_BOX, UNIT_BOX])
        spec = mirror_spec(game, "euclidean", 1.0)
        x = solve_perturbed_ne(game, spec, tol=1e-12, damping=0.5)
        assert np.max(np.abs(x.values - mirror_map(spec, game.U(x.values)))) <= 1e-12

    def test_epsilon_must_exceed_mu(self, rps):
        with pytest.raises(PreconditionError):
            solve_perturbed_ne(rps, mirror_spec(rps, "entropy", 2.1), mu=3.0)

    def test_damping_range(self, rps):
        with pytest.raises(InvalidInputError):
            solve_perturbed_ne(rps, mirror_spec(rps, "entropy", 2.1), damping=0.0)

    def test_budget_exhausted(self):
        game = build_quadratic_potential(np.diag([1.0, 2.0]), [0.3, -0.2], [UNIT_BOX, UNIT_BOX])
        with pytest.raises(SolverError):
            solve_perturbed_ne(game, mirror_spec(game, "euclidean", 1.0), max_iter=1, damping=0.01)


class TestLyapunov:
    def test_zero_at_target(self, rps):
        spec = mirror_spec(rps, "entropy", 1.0)
        z = np.array([0.3, -1.0, 2.0, 0.0, 0.5, 1.5])
        assert lyapunov_md(spec, 1.0, z, z) == pytest.approx(0.0, abs=1e-12)

    def test_duality_with_primal_bregman(self, rps):
        spec = mirror_spec(rps, "entropy", 0.7)
        rng = np.random.default_rng(3)
        gamma = 2.0
        for _ in range(50):
            z, z_star = rng.normal(size=6), rng.normal(size=6)
            x, x_star = mirror_map(spec, z), mirror_map(spec, z_star)
            expected = spec.epsilon * stacked_bregman(spec, x_star, x)
            assert lyapunov_md(spec, gamma, z, z_star) * gamma == pytest.approx(expected, abs=1e-9)

    def test_md_decreases_in_strongly_monotone_game(self):
        b = np.array([0.5, 0.3, 0.2])
        game = build_quadratic_potential(np.eye(3), b, [SimplexDomain(dim=3)])
        spec = mirror_spec(game, "entropy", 1.0)
        assert estimate_monotonicity(game, spec, 2000, 0).eta_est > 0

        traj = integrate(DynamicsSpec(kind="MD", gamma=1.0), game, spec, np.zeros(3),
                         IntegratorConfig(dt=1e-2, t_end=20.0, sample_every=10))
        V = lyapunov_md(spec, 1.0, traj.z, mirror_preimage(spec, b))
        assert np.max(np.diff(V)) <= 1e-9
        assert V[-1] < 1e-3 * V[0]


class TestRateBounds:
    def test_md_multiplier(self):
        bregman, euclid = md_rate_bound(1.0, 0.0037, 0.1, D0=1.0)
        assert bregman.value(100.0) == pytest.approx(math.exp(-3.7))
        assert bregman.value(100.0) == pytest.approx(0.02472, abs=1e-5)
        assert euclid.value(0.0) == pytest.approx(2.0)

    def test_md_initial_values_with_rho(self):
        bregman, euclid = md_rate_bound(1.0, 0.5, 1.0, D0=3.0, rho=0.5)
        assert bregman.value(0.0) == 3.0
        assert euclid.value(0.0) == 12.0

    def test_doubling_gamma_halves_time(self):
        slow, _ = md_rate_bound(1.0, 0.2, 0.5, D0=1.0)
        fast, _ = md_rate_bound(2.0, 0.2, 0.5, D0=1.0)
        assert fast.value(5.0) == pytest.approx(slow.value(10.0))

    def test_md_conserved_bound(self):
        bregman, _ = md_rate_bound(1.0, 0.0, 1.0, D0=0.4)
        assert bregman.exponent == 0.0
        assert bregman.value(1e6) == 0.4

    def test_md_negative_eta(self):
        with pytest.raises(PreconditionError):
            md_rate_bound(1.0, -0.1, 1.0, D0=1.0)

    def test_dmd_null_monotone(self):
        bregman, euclid = dmd_rate_bound(1.0, 0.0, 0.3, D0=1.0)
        assert bregman.exponent == pytest.approx(1.0)
        assert euclid.constant == 2.0

    def test_dmd_rps_exponent(self):
        bregman, _ = dmd_rate_bound(1.0, 2.0, 2.1, D0=1.0)
        assert bregman.exponent == pytest.approx(0.047619, abs=1e-6)

    def test_dmd_negative_mu_beats_md(self):
        dmd, _ = dmd_rate_bound(1.0, -0.0228, 0.1, D0=1.0)
        md, _ = md_rate_bound(1.0, 0.0228, 0.1, D0=1.0)
        assert dmd.exponent > 1.0 > md.exponent

    def test_dmd_needs_epsilon_above_mu(self):
        with pytest.raises(PreconditionError):
            dmd_rate_bound(1.0, 2.0, 2.0, D0=1.0)

    def test_ac_arithmetic(self):
        gap, bregman, euclid = ac_rate_bound(1.0, 1.0, 0.1, 20.0, potential_gap0=0.375, D0=0.25)
        assert gap.exponent == pytest.approx(10.0)
        assert gap.value(0.0) == pytest.approx(0.875)
        assert bregman.constant == pytest.approx(0.875)
        assert euclid.constant == pytest.approx(1.75)
        assert not bregman.target_first

    def test_ac_condition(self):
        with pytest.raises(PreconditionError):
            ac_rate_bound(1.0, 1.0, 0.05, 20.0, potential_gap0=0.0, D0=0.0)

    def test_negative_d0(self):
        with pytest.raises(InvalidInputError):
            dmd_rate_bound(1.0, 0.0, 1.0, D0=-1.0)


class TestConvertRelative:
    def test_strong(self):
        assert convert_relative(2.0, "strong", ell_smooth=4.0) == 0.5

    def test_hypo(self):
        assert convert_relative(2.0, "hypo", rho_strongconvex=1.0) == 2.0

    def test_identity(self):
        assert convert_relative(0.7, "strong", ell_smooth=1.0) == 0.7

    def test_missing_modulus(self):
        with pytest.raises(InvalidInputError):
            convert_relative(1.0, "hypo", rho_strongconvex=0.0)


class TestVerifyBound:
    def test_rps_dmd_all_t(self, rps, rps_dmd_run):
        spec, traj, target = rps_dmd_run
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        bregman, euclid = dmd_rate_bound(1.0, 2.0, 2.1, d0, target=target)
        report = verify_bound(traj, bregman, rps, spec)
        assert report.passed
        assert report.mode == "all_t"
        assert report.checked_times == len(traj)
        assert report.max_ratio <= 1.0 + 1e-6
        assert verify_bound(traj, euclid, rps, spec).passed

    def test_network_dmd_null_monotone(self, network):
        spec = mirror_spec(network, "entropy", 1.0)
        traj = integrate(DynamicsSpec(kind="DMD", gamma=1.0), network, spec, [1, 2] * 3,
                         IntegratorConfig(dt=1e-2, t_end=30.0, sample_every=5))
        target = solve_perturbed_ne(network, spec, mu=0.0)
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        _, euclid = dmd_rate_bound(1.0, 0.0, 1.0, d0, target=target)
        assert verify_bound(traj, euclid, network, spec).passed

    def test_network_md_conserved(self, network):
        spec = mirror_spec(network, "entropy", 1.0)
        traj = integrate(DynamicsSpec(kind="MD", gamma=1.0), network, spec, [1, 2] * 3,
                         IntegratorConfig(dt=1e-3, t_end=10.0, sample_every=100))
        target = solve_ne(network)
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        bregman, _ = md_rate_bound(1.0, 0.0, 1.0, d0, target=target)
        report = verify_bound(traj, bregman, network, spec)
        assert report.passed
        assert report.max_ratio == pytest.approx(1.0, abs=1e-6)

    def test_quadratic_md_all_t(self, quadratic):
        spec = mirror_spec(quadratic, "euclidean", 0.5)
        traj = integrate(DynamicsSpec(kind="MD", gamma=1.0), quadratic, spec, [0.1, 0.1],
                         IntegratorConfig(dt=1e-3, t_end=5.0, sample_every=10))
        target = solve_ne(quadratic)
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        for bound in md_rate_bound(1.0, 1.0, 0.5, d0, target=target):
            assert verify_bound(traj, bound, quadratic, spec).passed

    def test_quadratic_ac_gap(self, quadratic):
        spec = mirror_spec(quadratic, "euclidean", 0.1)
        traj = integrate(DynamicsSpec(kind="AC", gamma=1.0, r=20.0), quadratic, spec, [0.05, 0.05],
                         IntegratorConfig(dt=1e-3, t_end=3.0, sample_every=10))
        target = solve_ne(quadratic)
        d0 = float(stacked_bregman(spec, target.values, traj.mirror_x[0]))
        gap0 = float(quadratic.P(target.values) - quadratic.P(traj.x[0]))
        assert gap0 == pytest.approx(0.375)
        for bound in ac_rate_bound(1.0, 1.0, 0.1, 20.0, gap0, d0, target=target):
            assert verify_bound(traj, bound, quadratic, spec).passed

    def test_tight_bound_reports_violations(self, rps, rps_dmd_run):
        spec, traj, target = rps_dmd_run
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        bregman, _ = dmd_rate_bound(1.0, 2.0, 2.1, 0.5 * d0, target=target)
        report = verify_bound(traj, bregman, rps, spec)
        assert not report.passed
        assert report.violations[0].t == 0.0
        assert report.max_ratio >= 2.0 - 1e-9
        data = report.to_json_dict()
        assert set(data) == {"checked_times", "violations", "max_ratio", "mode", "pass"}
        assert set(data["violations"][0]) == {"t", "measured", "bound"}

    def test_asymptotic_mode_skips_early_samples(self, rps, rps_dmd_run):
        spec, traj, target = rps_dmd_run
        d0 = float(stacked_bregman(spec, target.values, traj.x[0]))
        bregman, _ = dmd_rate_bound(1.0, 2.0, 2.1, 0.5 * d0, target=target)
        report = verify_bound(traj, bregman.with_validity("asymptotic"), rps, spec, t_min=1e9)
        assert report.passed
        assert report.checked_times == 0
        assert report.mode.startswith("asymptotic")

    def test_missing_potential(self, rps, rps_dmd_run):
        spec, traj, target = rps_dmd_run
        bound = RateBound(exponent=1.0, constant=1.0, metric="potential_gap", target=target)
        with pytest.raises(BoundMismatchError):
            verify_bound(traj, bound, rps, spec)

    def test_missing_target(self, rps, rps_dmd_run):
        spec, traj, _ = rps_dmd_run
        bound = RateBound(exponent=1.0, constant=1.0, metric="euclid_sq_to_target")
        with pytest.raises(BoundMismatchError):
            verify_bound(traj, bound, rps, spec)


class TestDecayFit:
    def test_recovers_exponent(self):
        t = np.linspace(0.0, 20.0, 201)
        assert fit_decay_exponent(t, 3.0 * np.exp(-0.7 * t)) == pytest.approx(0.7, rel=1e-9)

    def test_ignores_noise_floor(self):
        t = np.linspace(0.0, 40.0, 401)
        values = np.maximum(np.exp(-t), 1e-14)
        assert fit_decay_exponent(t, values) == pytest.approx(1.0, rel=1e-6)

    def test_too_few_samples(self):
        with pytest.raises(InvalidInputError):
            fit_decay_exponent([0.0, 1.0], [1.0, 0.0])

    def test_default_t_min(self):
        times = np.array([0.0, 1.0, 2.0, 3.0])
        assert default_t_min(times, np.array([1.0, 1.5, 0.9, 0.1])) == 2.0
        assert default_t_min(times, np.array([1.0, 1.0, 1.0, 1.0])) == 3.0
