import numpy as np
import pytest

from sktlab.errors import PositivityLost, StepFailed
from sktlab.grid import Grid
from sktlab.model import SKTParameters
from sktlab.noise import build_noise_model
from sktlab.regularization import EntropyRegularizer
from sktlab.simulator import (
    InitialCondition,
    SimConfig,
    entropy_balance_report,
    run_ensemble,
    run_path,
)
from sktlab.spectral import build_eigenbasis

from conftest import make_config, no_self_diffusion_params, two_species_params


class TestConfigValidation:
    def test_scheme_mode_constraints(self):
        with pytest.raises(ValueError):
            make_config(params=two_species_params(), scheme="laplacian_form")
        # without self-diffusion: both schemes admissible
        make_config(params=no_self_diffusion_params(), scheme="laplacian_form")
        make_config(params=no_self_diffusion_params(), scheme="entropy_variable")

    def test_initial_condition_positivity(self):
        with pytest.raises(ValueError):
            make_config(c=[1.0], delta=[1.0])

    def test_time_grid(self):
        with pytest.raises(ValueError):
            make_config(t_final=1e-4, dt=1e-3)


class TestEntropyVariableScheme:
    def test_constant_fixed_point(self):
        cfg = make_config(delta=[0.0], t_final=3e-3, dt=1e-3)
        rec = run_path(cfg, 1)
        assert len(rec.times) == 4
        assert np.max(np.abs(rec.entropy)) == 0.0
        assert np.max(np.abs(rec.final_density - 1.0)) == 0.0

    def test_single_step_record(self):
        cfg = make_config(delta=[0.0], t_final=1e-3, dt=1e-3)
        rec = run_path(cfg, 1)
        assert len(rec.times) == 2
        assert rec.entropy[0] == 0.0 and rec.entropy[1] == 0.0

    def test_heat_decay_oracle(self):
        cfg = make_config(nx=64, t_final=0.05, dt=2e-4, eps=1e-8, delta=[0.5],
                          save_every=250)
        rec = run_path(cfg, 1)
        x = cfg.grid.centers("x")
        exact = 1 + 0.5 * np.cos(np.pi * x) * np.exp(-np.pi**2 * rec.times[-1])
        assert np.max(np.abs(rec.final_density[0] - exact)) < 2e-3

    def test_mass_conservation_and_entropy_decay(self):
        cfg = make_config(params=two_species_params(), nx=32, t_final=0.02, dt=2e-4,
                          c=[1.0, 1.2], delta=[0.3, 0.2], save_every=100)
        rec = run_path(cfg, 1)
        drift = np.max(np.abs(rec.masses - rec.masses[0]) / np.abs(rec.masses[0]))
        assert drift < 1e-10
        dH = np.diff(rec.entropy)
        assert np.all(dH <= 1e-10 * (1.0 + np.abs(rec.entropy[:-1])))
        assert np.all(rec.dissipation >= -1e-12)

    def test_positivity_structural(self):
        cfg = make_config(family="bounded_ratio", eta=0.5, nx=32, t_final=0.01,
                          dt=1e-3, delta=[0.5])
        rec = run_path(cfg, 12)
        assert np.min(rec.min_density) > 0.0

    def test_bitwise_determinism(self):
        cfg = make_config(family="bounded_ratio", eta=0.5, nx=16, t_final=5e-3, dt=1e-3)
        r1, r2 = run_path(cfg, 9), run_path(cfg, 9)
        assert np.array_equal(r1.entropy, r2.entropy)
        assert all(np.array_equal(a, b) for a, b in zip(r1.snapshots_u, r2.snapshots_u))
        r3 = run_path(cfg, 10)
        assert not np.array_equal(r1.final_density, r3.final_density)

    def test_segregation_smoke(self):
        # coinciding bumps, strong cross-diffusion: species overlap decreases
        p = SKTParameters(a0=[0.05, 0.05], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        grid = Grid(dim=1, nx=32, lx=1.0)
        basis = build_eigenbasis(grid)
        x = grid.centers("x")
        bump = 1.0 + 0.8 * np.cos(np.pi * x)
        u0 = np.stack([bump, bump])
        cfg = SimConfig(
            params=p, grid=grid, basis=basis,
            regularizer=EntropyRegularizer(params=p, basis=basis, epsilon=1e-6),
            noise=build_noise_model("zero", basis),
            t_final=0.02, dt=1e-4, save_every=200,
            initial=InitialCondition(kind="field", values=u0),
        )
        rec = run_path(cfg, 1)
        overlap0 = np.sum(u0[0] * u0[1]) * grid.hx
        overlapT = np.sum(rec.final_density[0] * rec.final_density[1]) * grid.hx
        assert overlapT < overlap0
        # frozen regression value for this exact configuration
        assert overlapT == pytest.approx(1.1502, abs=2e-3)

    def test_2d_run(self):
        cfg = make_config(dim=2, nx=8, ny=8, t_final=4e-3, dt=1e-3, delta=[0.3])
        rec = run_path(cfg, 2)
        assert np.max(np.abs(rec.masses - rec.masses[0])) < 1e-12
        assert np.all(np.diff(rec.entropy) <= 1e-12)


class TestLaplacianFormScheme:
    def test_constant_fixed_point(self):
        cfg = make_config(params=no_self_diffusion_params(), scheme="laplacian_form",
                          c=[1.0, 2.0], delta=[0.0, 0.0], t_final=3e-3, dt=1e-3)
        rec = run_path(cfg, 1)
        assert np.max(np.abs(rec.final_density - rec.snapshots_u[0])) < 1e-13

    def test_unconditional_stability_large_dt(self):
        # backward Euler at dt = 10 h^2 stays stable and accurate-ish
        cfg = make_config(nx=64, scheme="laplacian_form", t_final=0.1, dt=10.0 / 64**2,
                          delta=[0.5], save_every=100)
        rec = run_path(cfg, 1)
        x = cfg.grid.centers("x")
        exact = 1 + 0.5 * np.cos(np.pi * x) * np.exp(-np.pi**2 * rec.times[-1])
        assert np.max(np.abs(rec.final_density[0] - exact)) < 5e-3

    def test_mass_conserved(self):
        cfg = make_config(params=no_self_diffusion_params(), scheme="laplacian_form",
                          nx=32, t_final=0.02, dt=2e-4, c=[1.0, 1.2],
                          delta=[0.3, 0.2], save_every=100)
        rec = run_path(cfg, 1)
        drift = np.max(np.abs(rec.masses - rec.masses[0]) / np.abs(rec.masses[0]))
        assert drift < 1e-10

    def test_positivity_policy(self):
        # strongly negative initial datum is rejected up front
        p = no_self_diffusion_params()
        grid = Grid(dim=1, nx=8, lx=1.0)
        basis = build_eigenbasis(grid)
        u0 = np.full((2, 8), 1.0)
        u0[0, 3] = -1.0
        cfg = SimConfig(
            params=p, grid=grid, basis=basis,
            regularizer=EntropyRegularizer(params=p, basis=basis, epsilon=1e-4),
            noise=build_noise_model("zero", basis),
            t_final=1e-3, dt=1e-3, scheme="laplacian_form",
            initial=InitialCondition(kind="field", values=u0),
        )
        with pytest.raises(PositivityLost):
            run_path(cfg, 1)


class TestSchemeAgreement:
    def test_agreement_shrinks_under_refinement(self):
        p = no_self_diffusion_params()

        def diff(nx, dt):
            recs = []
            for scheme in ("entropy_variable", "laplacian_form"):
                cfg = make_config(params=p, nx=nx, scheme=scheme, t_final=0.02, dt=dt,
                                  eps=1e-8, c=[1.0, 1.2], delta=[0.4, 0.3],
                                  save_every=10**9)
                recs.append(run_path(cfg, 1))
            return float(np.max(np.abs(recs[0].final_density - recs[1].final_density)))

        d_coarse = diff(16, 8e-4)
        d_fine = diff(32, 2e-4)
        sup0 = 1.5
        assert d_coarse <= 5.0 * (8e-4 + (1.0 / 16) ** 2) * sup0
        assert d_fine < d_coarse


class TestEnsemble:
    def test_single_path_matches(self):
        cfg = make_config(family="bounded_ratio", eta=0.5, nx=16, t_final=5e-3, dt=1e-3)
        stats = run_ensemble(cfg, 1, 21)
        rec = run_path(cfg, 21, stream_index=0)
        assert stats.sup_entropy[0] == pytest.approx(np.max(rec.entropy))
        assert stats.aggregates["sup_entropy"]["stderr"] is None

    def test_zero_noise_zero_variance(self):
        cfg = make_config(nx=16, t_final=5e-3, dt=1e-3)
        stats = run_ensemble(cfg, 4, 3)
        assert stats.aggregates["sup_entropy"]["variance"] == 0.0

    def test_worker_pool_matches_sequential(self):
        cfg = make_config(family="bounded_ratio", eta=0.5, nx=16, t_final=5e-3, dt=1e-3)
        s1 = run_ensemble(cfg, 6, 7, workers=1)
        s2 = run_ensemble(cfg, 6, 7, workers=2)
        assert np.array_equal(s1.sup_entropy, s2.sup_entropy)
        assert s1.aggregates == s2.aggregates

    def test_mass_increment_variance_closed_form(self):
        # constant test intensity, single constant mode: Ito isometry
        cfg = make_config(scheme="laplacian_form", family="constant", k_modes=1,
                          nx=8, t_final=1e-3, dt=1e-3, delta=[0.0])
        stats = run_ensemble(cfg, 800, 17)
        inc = stats.mass_final[:, 0] - stats.mass_initial[:, 0]
        var = float(np.var(inc, ddof=1))
        expected = 1e-3   # dt * a_0^2 * |domain|
        se = expected * np.sqrt(2.0 / (len(inc) - 1))
        assert abs(var - expected) <= 3.0 * se


class TestEntropyBalance:
    def test_all_zero_for_constant_state(self):
        cfg = make_config(delta=[0.0], t_final=3e-3, dt=1e-3)
        rows = entropy_balance_report(cfg, run_path(cfg, 1))
        for r in rows:
            assert r.delta_entropy == 0.0 and r.dissipation == 0.0
            assert r.martingale == 0.0 and r.ito_correction == 0.0

    def test_deterministic_residual_second_order(self):
        residuals = {}
        for dt in (2e-4, 1e-4):
            cfg = make_config(nx=64, t_final=20 * dt, dt=dt, delta=[0.5])
            rows = entropy_balance_report(cfg, run_path(cfg, 1))
            residuals[dt] = max(abs(r.residual) for r in rows)
            assert min(r.min_face_margin for r in rows) >= -1e-12
        assert residuals[1e-4] <= 1e-3 * 1e-4
        # per-step residual is O(dt^2): halving dt quarters it (allow slack)
        assert residuals[1e-4] <= 0.35 * residuals[2e-4]

    def test_stochastic_terms_populated(self):
        cfg = make_config(family="bounded_ratio", eta=0.5, nx=16, t_final=5e-3,
                          dt=1e-3, delta=[0.4])
        rows = entropy_balance_report(cfg, run_path(cfg, 4))
        assert any(r.martingale != 0.0 for r in rows)
        assert all(r.ito_correction >= 0.0 for r in rows)

    def test_requires_dense_snapshots(self):
        cfg = make_config(nx=16, t_final=4e-3, dt=1e-3, save_every=2)
        rec = run_path(cfg, 1)
        with pytest.raises(ValueError):
            entropy_balance_report(cfg, rec)


def test_ensemble_reports_completed_count():
    cfg = make_config(nx=16, t_final=2e-3, dt=1e-3, delta=[0.5])
    cfg.regularizer.newton_max_iter = 1
    with pytest.raises(StepFailed) as info:
        run_ensemble(cfg, 3, 1)
    assert info.value.completed_paths == 0


def test_step_failure_carries_index():
    # a one-iteration Newton budget cannot meet the step tolerance
    cfg = make_config(nx=16, t_final=2e-3, dt=1e-3, delta=[0.5])
    cfg.regularizer.newton_max_iter = 1
    with pytest.raises(StepFailed) as info:
        run_path(cfg, 1)
    assert info.value.step == 0
