import os
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from dualdyn.config import settings
from dualdyn.models.Dynamics import DynamicsSpec, IntegratorConfig
from dualdyn.models.Experiment import ExperimentConfig, RunResult
from dualdyn.models.Game import Game, MonotonicityReport, StrategyProfile
from dualdyn.models.Geometry import BoxDomain, MirrorSpec, RegularizerKind
from dualdyn.models.Report import RateBound
from dualdyn.utils.analysis import (
    ac_rate_bound,
    dmd_rate_bound,
    fit_decay_exponent,
    md_rate_bound,
    measure_metric,
    projected_residual,
    solve_ne,
    solve_perturbed_ne,
    verify_bound,
)
from dualdyn.utils.cache_manager import equilibrium_cache
from dualdyn.utils.dynamics import integrate, state_velocity
from dualdyn.utils.exceptions import (
    BOUND_VIOLATION_EXIT_CODE,
    ConfigError,
    DualDynError,
    InvalidInputError,
)
from dualdyn.utils.functions import resolve_prefix, write_json, write_trajectory_csv
from dualdyn.utils.games import (
    attack_eta_grid,
    build_adversarial_attack,
    build_network_mp,
    build_quadratic_potential,
    build_rps,
    estimate_monotonicity,
    load_attack_dataset,
)
from dualdyn.utils.geometry import mirror_map, stacked_bregman
from dualdyn.utils.job_manager import RunStatus, run_manager

logger = logging.getLogger(__name__)

# Pinned configs per case study, in summary order.
REPRODUCTION_CASES: Dict[str, Tuple[str, ...]] = {
    "rps": ("rps_projection", "rps_softmax"),
    "network-mp": ("network_mp_md", "network_mp_projection", "network_mp_softmax"),
    "adversarial": ("adversarial_md", "adversarial_dmd"),
}

METRIC_NAMES = {
    "bregman": "bregman_to_target",
    "euclid_sq": "euclid_sq_to_target",
    "potential_gap": "potential_gap",
}

CONVERGENCE_VELOCITY = 1e-6


def _config_error(exc: ValidationError, prefix: str = "") -> ConfigError:
    first = exc.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or prefix or "config"
    if prefix and first["loc"]:
        field = f"{prefix}.{field}"
    return ConfigError(first["msg"], field=field)


class ExperimentService:
    def __init__(self, output_dir: Optional[str] = None):
        """
        Orchestrates config loading, game construction, integration, bound
        verification and artifact writing.

        Args:
            output_dir: folder for relative output prefixes. Defaults to
                DUALDYN_OUTPUT_DIR (or ./output).
        """
        self.output_dir = output_dir or settings.output_dir()
        self.cache = equilibrium_cache
        logger.debug("experiment service writing to %s", self.output_dir)

    # --- Config ---

    @staticmethod
    def load_config(path: str) -> ExperimentConfig:
        if not os.path.isfile(path):
            raise ConfigError("config file not found", field=path)
        raw = {
            key.strip().lower(): value.strip()
            for key, value in dotenv_values(path).items()
            if value is not None and value.strip() != ""
        }
        dataset = raw.get("attack_dataset")
        if dataset and not os.path.isabs(dataset):
            raw["attack_dataset"] = os.path.join(os.path.dirname(os.path.abspath(path)), dataset)
        try:
            return ExperimentConfig(**raw)
        except ValidationError as e:
            raise _config_error(e) from e

    # --- Builders ---

    def build_game(self, cfg: ExperimentConfig) -> Game:
        if cfg.game == "rps":
            return build_rps(cfg.rps_w, cfg.rps_l, payoff_form=cfg.rps_form)
        if cfg.game == "network-mp":
            return build_network_mp()
        if cfg.game == "adversarial":
            if cfg.attack_iota_lo > cfg.attack_iota_hi:
                raise ConfigError("lower bound exceeds upper bound", field="attack_iota_lo")
            return build_adversarial_attack(
                load_attack_dataset(cfg.attack_dataset),
                cfg.attack_weights,
                cfg.attack_r,
                iota_box=(cfg.attack_iota_lo, cfg.attack_iota_hi),
            )
        n = len(cfg.quad_b)
        lo = cfg.quad_lo or [-1.0] * n
        hi = cfg.quad_hi or [1.0] * n
        if len(lo) != n or len(hi) != n:
            raise ConfigError(f"needs {n} entries", field="quad_lo" if len(lo) != n else "quad_hi")
        try:
            domains = [BoxDomain(lo=(l,), hi=(h,)) for l, h in zip(lo, hi)]
        except ValidationError as e:
            raise _config_error(e, prefix="quad_lo") from e
        return build_quadratic_potential(np.array(cfg.quad_q), np.array(cfg.quad_b), domains)

    def build_regularizers(self, cfg: ExperimentConfig, game: Game) -> Tuple[RegularizerKind, ...]:
        kinds = cfg.regularizer
        if len(kinds) == 1:
            kinds = kinds * len(game.domains)
        if len(kinds) != len(game.domains):
            raise ConfigError(f"expected 1 or {len(game.domains)} entries, got {len(kinds)}",
                              field="regularizer")
        try:
            return tuple(RegularizerKind(kind=k, domain=d) for k, d in zip(kinds, game.domains))
        except ValidationError as e:
            raise ConfigError(e.errors()[0]["msg"], field="regularizer") from e

    def build_mirror_spec(self, cfg: ExperimentConfig, game: Game) -> MirrorSpec:
        if cfg.epsilon is None:
            raise ConfigError("required", field="epsilon")
        return MirrorSpec(regularizers=self.build_regularizers(cfg, game), epsilon=cfg.epsilon)

    # --- Equilibria ---

    def solve_target(self, cfg: ExperimentConfig, game: Game, mspec: Optional[MirrorSpec],
                     kind: Optional[str] = None) -> StrategyProfile:
        kind = kind or cfg.target_kind
        key = self.cache.make_key(
            game=game.name,
            params={k: v for k, v in game.params.items()},
            mirror=mspec.model_dump() if (mspec is not None and kind == "perturbed_ne") else None,
            kind=kind,
            tol=cfg.solver_tol,
            damping=cfg.damping if kind == "perturbed_ne" else None,
        )
        cached = self.cache.get(key)
        if cached is not None:
            return game.profile(cached)

        if kind == "perturbed_ne":
            profile = solve_perturbed_ne(game, mspec, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter,
                                         damping=cfg.damping, mu=cfg.mu)
        else:
            profile = solve_ne(game, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        self.cache.set(key, profile.values)
        return profile

    # --- Bounds ---

    def check_bound_preconditions(self, cfg: ExperimentConfig) -> None:
        """Fail before integrating when the requested bound cannot apply."""
        if cfg.bound == "md":
            md_rate_bound(cfg.gamma, cfg.eta, cfg.epsilon, 0.0, cfg.rho)
        elif cfg.bound == "dmd":
            dmd_rate_bound(cfg.gamma, cfg.mu, cfg.epsilon, 0.0, cfg.rho)
        elif cfg.bound == "ac":
            ac_rate_bound(cfg.gamma, cfg.eta, cfg.epsilon, cfg.r, 0.0, 0.0, cfg.rho)

    def build_bounds(self, cfg: ExperimentConfig, game: Game, mspec: MirrorSpec,
                     target: StrategyProfile, traj) -> Dict[str, RateBound]:
        """Bounds keyed by metric name, all carrying the configured validity."""
        if cfg.bound == "ac":
            d0 = float(stacked_bregman(mspec, target.values, traj.mirror_x[0]))
            gap0 = float(game.P(target.values) - game.P(traj.x[0]))
            bounds = ac_rate_bound(cfg.gamma, cfg.eta, cfg.epsilon, cfg.r, gap0, d0, cfg.rho, target)
        else:
            d0 = float(stacked_bregman(mspec, target.values, traj.x[0]))
            if cfg.bound == "md":
                bounds = md_rate_bound(cfg.gamma, cfg.eta, cfg.epsilon, d0, cfg.rho, target)
            else:
                bounds = dmd_rate_bound(cfg.gamma, cfg.mu, cfg.epsilon, d0, cfg.rho, target)
        by_metric = {b.metric: b.with_validity(cfg.validity) for b in bounds}
        return {name: by_metric[metric] for name, metric in METRIC_NAMES.items() if metric in by_metric}

    # --- Commands ---

    def run(self, cfg: ExperimentConfig, name: Optional[str] = None) -> RunResult:
        """Integrate the configured dynamics, verify the bound and write artifacts."""
        for field in ("dynamics", "epsilon", "z0", "t_end"):
            if getattr(cfg, field) is None:
                raise ConfigError("required for run", field=field)
        name = name or os.path.basename(cfg.output)
        try:
            dspec = DynamicsSpec(kind=cfg.dynamics, gamma=cfg.gamma, r=cfg.r)
            icfg = IntegratorConfig(dt=cfg.dt, t_end=cfg.t_end, sample_every=cfg.sample_every)
        except ValidationError as e:
            raise _config_error(e) from e

        game = self.build_game(cfg)
        mspec = self.build_mirror_spec(cfg, game)
        self.check_bound_preconditions(cfg)
        z0 = np.asarray(cfg.z0, dtype=float)
        if z0.size != game.n:
            raise ConfigError(f"expected {game.n} values, got {z0.size}", field="z0")
        if cfg.x0 is not None and len(cfg.x0) != game.n:
            raise ConfigError(f"expected {game.n} values, got {len(cfg.x0)}", field="x0")

        logger.info("⏳ [%s] %s on %s (ε=%g, γ=%g, t_end=%g, dt=%g)",
                    name, cfg.dynamics, game.name, cfg.epsilon, cfg.gamma, cfg.t_end, cfg.dt)
        traj = integrate(dspec, game, mspec, z0, icfg, x0=cfg.x0)

        result = RunResult(
            name=name,
            dynamics=cfg.dynamics,
            regularizer=[reg.kind for reg in mspec.regularizers],
            final_x=[float(v) for v in traj.x[-1]],
            state_velocity=state_velocity(traj),
        )
        prefix = resolve_prefix(cfg.output, self.output_dir)
        payload = {
            "name": name,
            "config": cfg.model_dump(mode="json"),
            "game": game.name,
            "final_x": result.final_x,
            "final_time": float(traj.times[-1]),
            "state_velocity": result.state_velocity,
        }

        metric_series = bound_series = None
        if cfg.bound != "none":
            target = self.solve_target(cfg, game, mspec)
            bounds = self.build_bounds(cfg, game, mspec, target, traj)
            reports = {
                metric: verify_bound(traj, bound, game, mspec, slack=cfg.slack, t_min=cfg.t_min)
                for metric, bound in bounds.items()
            }
            main_bound = bounds[cfg.metric]
            main_report = reports[cfg.metric]
            metric_series = measure_metric(traj, main_bound, game, mspec)
            bound_series = main_bound.value(traj.times)
            try:
                fitted = fit_decay_exponent(traj.times, metric_series)
            except InvalidInputError:
                fitted = None

            result = result.model_copy(update={
                "passed": main_report.passed,
                "exit_code": 0 if main_report.passed else BOUND_VIOLATION_EXIT_CODE,
                "theoretical_exponent": main_bound.exponent,
                "fitted_exponent": fitted,
                "reports": {metric: report.to_json_dict() for metric, report in reports.items()},
            })
            payload.update({
                "target": target.tolist(),
                "metric": cfg.metric,
                "theoretical_exponent": main_bound.exponent,
                "bound_constant": main_bound.constant,
                "fitted_exponent": fitted,
                "bound_report": main_report.to_json_dict(),
                "reports": result.reports,
                "passed": main_report.passed,
            })
            status = "✅ bound holds" if main_report.passed else "❌ bound violated"
            logger.info("%s [%s] %s: %d samples checked, max ratio %.6g",
                        status, name, cfg.metric, main_report.checked_times, main_report.max_ratio)

        csv_path = write_trajectory_csv(f"{prefix}_trajectory.csv", traj, metric_series, bound_series)
        report_path = write_json(f"{prefix}_report.json", payload)
        logger.info("💾 [%s] wrote %s and %s", name, csv_path, report_path)
        return result.model_copy(update={"trajectory_path": csv_path, "report_path": report_path})

    def analyze(self, cfg: ExperimentConfig) -> MonotonicityReport:
        game = self.build_game(cfg)
        regs = self.build_regularizers(cfg, game)
        logger.info("⏳ sampling %d pairs on %s (seed %d)", cfg.n_pairs, game.name, cfg.seed)
        report = estimate_monotonicity(game, regs, cfg.n_pairs, cfg.seed)
        prefix = resolve_prefix(cfg.output, self.output_dir)
        write_json(f"{prefix}_monotonicity.json", report.model_dump())
        return report

    def solve_equilibria(self, cfg: ExperimentConfig) -> dict:
        game = self.build_game(cfg)
        ne = self.solve_target(cfg, game, None, kind="ne")
        payload = {
            "game": game.name,
            "ne": ne.tolist(),
            "ne_residual": projected_residual(game, ne.values),
        }
        if cfg.epsilon is not None:
            mspec = self.build_mirror_spec(cfg, game)
            perturbed = self.solve_target(cfg, game, mspec, kind="perturbed_ne")
            payload["epsilon"] = cfg.epsilon
            payload["perturbed_ne"] = perturbed.tolist()
            payload["perturbed_residual"] = float(
                np.max(np.abs(perturbed.values - mirror_map(mspec, game.U(perturbed.values))))
            )
        if game.name == "adversarial":
            payload["eta_grid"] = attack_eta_grid(game)
        prefix = resolve_prefix(cfg.output, self.output_dir)
        write_json(f"{prefix}_ne.json", payload)
        return payload

    # --- Reproduction ---

    def _run_tracked(self, run_id: str, name: str, cfg: ExperimentConfig) -> RunResult:
        run_manager.update_run(run_id, status=RunStatus.RUNNING, message="integrating")
        try:
            result = self.run(cfg, name=name)
        except DualDynError as e:
            logger.error("❌ [%s] failed: %s", name, e.detail)
            run_manager.update_run(run_id, status=RunStatus.FAILED, error=e.detail)
            return RunResult(name=name, status=RunStatus.FAILED.value, exit_code=e.exit_code, error=e.detail)
        run_manager.update_run(run_id, status=RunStatus.COMPLETED, message="done",
                               result=result.model_dump())
        return result

    def reproduce(self, case: str) -> dict:
        """
        Run the pinned configs of a case study in parallel and write
        ``<case>_summary.json`` comparing measured and theoretical decay.
        """
        if case not in REPRODUCTION_CASES:
            raise ConfigError(f"unknown case; choose from {sorted(REPRODUCTION_CASES)}", field="case")
        names = REPRODUCTION_CASES[case]
        configs = [
            (name, self.load_config(os.path.join(settings.EXPERIMENTS_DIR, f"{name}.env")))
            for name in names
        ]
        run_ids = {name: run_manager.create_run(case, name) for name in names}

        results: Dict[str, RunResult] = {}
        logger.info("🚀 reproducing '%s' with %d runs", case, len(configs))
        with ThreadPoolExecutor(max_workers=settings.max_workers()) as pool:
            futures = {pool.submit(self._run_tracked, run_ids[name], name, cfg): name for name, cfg in configs}
            for future in as_completed(futures):
                results[futures[future]] = future.result()

        ordered = [results[name] for name in names]
        summary = {
            "case": case,
            "runs": [r.model_dump() for r in ordered],
            "comparisons": self._compare(case, results, dict(configs)),
            "failed": [r.name for r in ordered if r.status == RunStatus.FAILED.value],
        }
        write_json(os.path.join(self.output_dir, f"{case}_summary.json"), summary)
        return summary

    def _compare(self, case: str, results: Dict[str, RunResult],
                 configs: Dict[str, ExperimentConfig]) -> dict:
        ok = {name: r for name, r in results.items() if r.status != RunStatus.FAILED.value}
        if case == "rps":
            soft, proj = ok.get("rps_softmax"), ok.get("rps_projection")
            if not (soft and proj) or soft.fitted_exponent is None or proj.fitted_exponent is None:
                return {}
            return {
                "softmax_theoretical_exponent": soft.theoretical_exponent,
                "softmax_fitted_exponent": soft.fitted_exponent,
                "projection_theoretical_exponent": proj.theoretical_exponent,
                "projection_fitted_exponent": proj.fitted_exponent,
                "softmax_faster": soft.fitted_exponent >= proj.fitted_exponent,
            }
        if case == "network-mp":
            return {
                name: {"theoretical_exponent": r.theoretical_exponent, "fitted_exponent": r.fitted_exponent}
                for name, r in ok.items()
            }
        md, dmd = ok.get("adversarial_md"), ok.get("adversarial_dmd")
        comparison = {"eta_grid": attack_eta_grid(self.build_game(configs["adversarial_md"]))}
        if md and dmd:
            iota_md, iota_dmd = md.final_x[0], dmd.final_x[0]
            comparison.update({
                "iota_md": iota_md,
                "iota_dmd": iota_dmd,
                "dmd_perturbation_smaller": abs(iota_dmd) < abs(iota_md),
                "converged": all(r.state_velocity < CONVERGENCE_VELOCITY for r in (md, dmd)),
            })
        return comparison

