"""测试 RK4 积分、转移实验、α 扫描、久期频率与解析判据的交叉验证"""

import math

import numpy as np
import pytest
from rusty_results.prelude import Err

from paul_junction.config import REPLICATION_VELOCITY_MS, TRANSFER_TIME_S
from paul_junction.core.field_grid import GridTrapModel
from paul_junction.core.flight import (
    TRAJECTORY_COLUMNS,
    CrosscheckRow,
    IonState,
    Outcome,
    SimConfig,
    TrajectoryRecord,
    TransferExperiment,
    alpha_sweep,
    crosscheck_transfer,
    detect_drift,
    measure_secular_frequency,
    null_offset_rms,
    random_junction_params,
    read_trajectory_csv,
    rk4_step,
    simulate,
    simulate_batch,
    stability_margin,
    write_trajectory_csv,
)
from paul_junction.core.junction import JunctionParams
from paul_junction.core.mathieu import MathieuParams, characteristic_exponent
from paul_junction.core.potential import (
    PhysicalTrapSpec,
    TransferProfile,
    TwoLayerGeometry,
    physical_to_dimensionless,
)
from paul_junction.core.validators import ConfigError, InsufficientData, OutOfDomain

GEOMETRY = TwoLayerGeometry()


class ZeroField:
    def acceleration(self, tau, positions, which):
        return np.zeros_like(positions), np.ones(len(positions), dtype=bool)


class HarmonicField:
    def __init__(self, omega=1.0):
        self.omega = omega

    def acceleration(self, tau, positions, which):
        return -self.omega**2 * positions, np.ones(len(positions), dtype=bool)


class NowhereField:
    def acceleration(self, tau, positions, which):
        return np.zeros_like(positions), np.zeros(len(positions), dtype=bool)


def transfer_experiment(mu, beta, alpha, scales, velocity=REPLICATION_VELOCITY_MS, profile=None):
    profile = profile or TransferProfile.from_seconds("three_phase", TRANSFER_TIME_S, scales)
    v = tuple(float(c) for c in scales.velocity_to_dimensionless(velocity))
    initial = IonState(position=(0.0, 0.0, -GEOMETRY.s), velocity=v)
    return TransferExperiment(JunctionParams(mu, beta, alpha), GEOMETRY, profile, initial)


def integrate(field, state, dt, steps):
    for _ in range(steps):
        state = rk4_step(state, field, dt).unwrap()
    return state


class TestRk4Step:
    def test_free_flight(self):
        state = rk4_step(IonState((0.0, 0.0, 0.0), (1.0, 2.0, 3.0)), ZeroField(), 0.5).unwrap()
        assert state.position == pytest.approx((0.5, 1.0, 1.5))
        assert state.velocity == (1.0, 2.0, 3.0)
        assert state.time == 0.5

    def test_harmonic_energy(self):
        start = IonState((1.0, 0.0, 0.5), (0.0, 0.3, 0.0))
        end = integrate(HarmonicField(), start, 0.05, 2000)

        def energy(s):
            return 0.5 * (np.sum(np.square(s.velocity)) + np.sum(np.square(s.position)))

        assert energy(end) == pytest.approx(energy(start), rel=1e-6)

    def test_fourth_order(self):
        start = IonState((1.0, 0.0, 0.0))
        errors = []
        for dt, steps in ((0.1, 10), (0.05, 20)):
            end = integrate(HarmonicField(), start, dt, steps)
            errors.append(abs(end.position[0] - math.cos(1.0)))
        assert math.log2(errors[0] / errors[1]) >= 3.7

    def test_charge_and_mass_preserved(self):
        start = IonState((1.0, 0.0, 0.0), charge=2.0, mass=3.0)
        end = rk4_step(start, HarmonicField(), 0.1).unwrap()
        assert (end.charge, end.mass) == (2.0, 3.0)

    def test_non_positive_step(self):
        with pytest.raises(ValueError):
            rk4_step(IonState((0.0, 0.0, 0.0)), ZeroField(), 0.0)

    def test_out_of_domain(self):
        result = rk4_step(IonState((0.0, 0.0, 0.0)), NowhereField(), 0.1)
        assert isinstance(result, Err)
        assert isinstance(result.Error, OutOfDomain)

    def test_mass_must_be_positive(self):
        with pytest.raises(ValueError):
            IonState((0.0, 0.0, 0.0), mass=0.0)


class TestSimConfig:
    @pytest.mark.parametrize("kwargs", [
        {"duration": 10.0, "steps_per_period": 32},  # dt > 周期/64
        {"duration": 0.0},
        {"duration": 10.0, "bounds": (1.0, 0.0, 1.0)},
        {"duration": 10.0, "record_stride": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)

    def test_dt(self):
        assert SimConfig(duration=1.0, steps_per_period=64).dt == pytest.approx(math.pi / 64)


class TestSimulate:
    def test_ion_at_null_stays(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        profile = TransferProfile("constant", T=1.0, level=0.0)
        exp = transfer_experiment(0.5, -0.05, 0.1, scales, velocity=(0.0, 0.0, 0.0), profile=profile)
        record = simulate(exp, SimConfig(duration=20.0, steps_per_period=64, scales=scales)).unwrap()
        assert record.outcome.confined
        assert np.allclose(record.position, [0.0, 0.0, -GEOMETRY.s], atol=1e-12)

    def test_record_layout(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        exp = transfer_experiment(0.5, -0.05, 0.1, scales)
        cfg = SimConfig(duration=10.0, steps_per_period=64, record_stride=4, scales=scales)
        record = simulate(exp, cfg).unwrap()
        n_steps = math.ceil(10.0 / cfg.dt)
        assert len(record.tau) == n_steps // 4 + 1
        assert record.tau[0] == 0.0
        assert record.rows().shape == (len(record.tau), len(TRAJECTORY_COLUMNS))
        assert record.drive_frequency == pytest.approx(31e6, rel=1e-9)

    def test_deterministic(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        exp = transfer_experiment(0.5, -0.05, 0.1, scales)
        cfg = SimConfig(duration=30.0, steps_per_period=64, scales=scales)
        a = simulate(exp, cfg).unwrap()
        b = simulate(exp, cfg).unwrap()
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.velocity, b.velocity)

    def test_batch_matches_single(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        experiments = [transfer_experiment(0.5, b, 0.1, scales) for b in (-0.05, 0.0)]
        cfg = SimConfig(duration=20.0, steps_per_period=64, scales=scales)
        batch = simulate_batch(experiments, cfg).unwrap()
        single = simulate(experiments[1], cfg).unwrap()
        assert np.allclose(batch[1].position, single.position, atol=1e-12)

    def test_batch_needs_shared_profile(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        a = transfer_experiment(0.5, -0.05, 0.1, scales)
        b = transfer_experiment(0.5, -0.05, 0.1, scales, profile=TransferProfile("linear", T=5.0))
        result = simulate_batch([a, b], SimConfig(duration=5.0, scales=scales))
        assert isinstance(result, Err)
        assert isinstance(result.Error, ConfigError)

    def test_empty_batch(self):
        assert simulate_batch([], SimConfig(duration=1.0)).unwrap() == []

    def test_grid_source_needs_model(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        exp = transfer_experiment(0.5, -0.05, 0.1, scales)
        result = simulate(exp, SimConfig(duration=1.0, field_source="grid", scales=scales))
        assert isinstance(result, Err)
        assert isinstance(result.Error, ConfigError)

    def test_lost_trajectory_is_frozen(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        exp = transfer_experiment(0.5, 0.0, 0.2, scales)  # z 对 (-0.2, 0.5) 在 a₀ 之下
        record = simulate(exp, SimConfig(duration=300.0, steps_per_period=64, scales=scales)).unwrap()
        assert not record.outcome.confined
        assert record.outcome.axis == "z"
        assert record.tau[-1] == pytest.approx(record.outcome.time)
        assert abs(record.position[-1, 2]) > GEOMETRY.plane_half_gap


@pytest.fixture(scope="module")
def fig6():
    """μ = 0.75、5 m/s 初速度的四组转移：A (0, 0)、B (0.2, 0)、C (0.29, 0)、D (0.29, -0.15)"""
    scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.75))
    cases = {"A": (0.0, 0.0), "B": (0.2, 0.0), "C": (0.29, 0.0), "D": (0.29, -0.15)}
    experiments = [transfer_experiment(0.75, beta, alpha, scales) for alpha, beta in cases.values()]
    T = experiments[0].profile.T
    records = simulate_batch(experiments, SimConfig(duration=T, scales=scales)).unwrap()
    return dict(zip(cases, records)), T


class TestTransferReplication:
    def test_transfer_time(self, fig6):
        _, T = fig6
        assert T == pytest.approx(282.4, abs=0.5)

    def test_no_axial_confinement_drifts_in_y(self, fig6):
        records, T = fig6
        assert records["A"].outcome.confined
        assert detect_drift(records["A"], "y").drifting

    @pytest.mark.parametrize("case", ["B", "D"])
    def test_confined(self, fig6, case):
        records, _ = fig6
        assert records[case].outcome.confined
        assert not detect_drift(records[case], "y").drifting
        assert not detect_drift(records[case], "x").drifting

    def test_static_pair_below_a0_is_lost_on_z(self, fig6):
        records, T = fig6
        outcome = records["C"].outcome
        assert not outcome.confined
        assert outcome.axis == "z"
        assert outcome.time < T

    def test_beta_tightens_z(self, fig6):
        """D 的 γ 离 a₀ 更远，第一段保持内 z 偏移更小"""
        records, T = fig6
        window = (0.0, T / 3)
        assert null_offset_rms(records["B"], "z", window) > null_offset_rms(records["D"], "z", window)

    def test_ends_at_top_null(self, fig6):
        records, _ = fig6
        z = records["D"].position[-1, 2]
        assert z == pytest.approx(GEOMETRY.s, abs=1.0)
        assert records["D"].f[-1] == 1.0


class TestAlphaSweep:
    def test_last_confined_alpha(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.75))
        base = transfer_experiment(0.75, 0.0, 0.1, scales)
        alphas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
        result = alpha_sweep(base, alphas, SimConfig(duration=base.profile.T, scales=scales)).unwrap()
        assert result.alphas == tuple(alphas)
        assert 0.25 <= result.last_confined <= 0.4
        assert not result.outcomes[-1].confined

    @pytest.mark.parametrize("alphas", [[], [0.2, 0.1], [0.0, 0.1]])
    def test_invalid_alphas(self, alphas):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.75))
        base = transfer_experiment(0.75, 0.0, 0.1, scales)
        result = alpha_sweep(base, alphas, SimConfig(duration=1.0, scales=scales))
        assert isinstance(result, Err)
        assert isinstance(result.Error, ConfigError)


class TestSecularFrequency:
    @pytest.fixture(scope="class")
    def record(self):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.25))
        profile = TransferProfile("constant", T=1.0, level=0.0)
        initial = IonState(position=(0.0, 1.0, -GEOMETRY.s))
        exp = TransferExperiment(JunctionParams(0.25, 0.0, 0.0), GEOMETRY, profile, initial)
        cfg = SimConfig(duration=1e-5 / scales.time_scale, steps_per_period=64, record_stride=4, scales=scales)
        return simulate(exp, cfg).unwrap(), scales

    def test_matches_characteristic_exponent(self, record):
        traj, scales = record
        measured = measure_secular_frequency(traj, "y").unwrap()
        w = characteristic_exponent(MathieuParams(0.0, 0.25)).w.real
        expected = w / (2 * math.pi * scales.time_scale)
        assert measured == pytest.approx(expected, rel=0.01)

    def test_close_to_small_mu_estimate(self, record):
        traj, scales = record
        measured = measure_secular_frequency(traj, "y").unwrap()
        assert measured == pytest.approx(scales.secular_frequency, rel=0.03)

    def test_too_short(self, record):
        traj, _ = record
        short = TrajectoryRecord(
            traj.tau[:40], traj.position[:40], traj.velocity[:40], traj.f[:40], traj.outcome, traj.time_scale
        )
        result = measure_secular_frequency(short, "y")
        assert isinstance(result, Err)
        assert isinstance(result.Error, InsufficientData)

    def test_too_few_periods(self, record):
        traj, _ = record
        n = 400  # 约 2 个久期周期
        short = TrajectoryRecord(
            traj.tau[:n], traj.position[:n], traj.velocity[:n], traj.f[:n], traj.outcome, traj.time_scale
        )
        result = measure_secular_frequency(short, "y")
        assert isinstance(result, Err)
        assert isinstance(result.Error, InsufficientData)


    def test_static_harmonic_well(self):
        """已知 ω 的静态谐振势：测得频率与 ω/2π 相差不超过 0.1%"""
        omega, time_scale = 0.35, 1.0 / (math.pi * 31e6)
        dt = 2 * math.pi / omega / 64
        state = IonState(position=(0.0, 1.0, 0.0))
        tau, position = [0.0], [state.position]
        for _ in range(64 * 60):
            state = rk4_step(state, HarmonicField(omega), dt).unwrap()
            tau.append(state.time)
            position.append(state.position)
        tau, position = np.array(tau), np.array(position)
        record = TrajectoryRecord(
            tau, position, np.zeros_like(position), np.zeros(len(tau)), Outcome(True), time_scale
        )
        measured = measure_secular_frequency(record, "y").unwrap()
        assert measured == pytest.approx(omega / (2 * math.pi * time_scale), rel=1e-3)


class TestGridSecular:
    """Peregrine 网格场（41³）中 μ = 0.25 的久期频率"""

    @pytest.fixture(scope="class")
    def record(self):
        from paul_junction.core.electrodes import GridSpec, generate_rect_electrode_grid, peregrine_junction

        spec = GridSpec.centered(box=(200.0, 200.0, 40.0), dims=(41, 41, 41))
        model = GridTrapModel.build(generate_rect_electrode_grid(peregrine_junction(), spec).unwrap()).unwrap()
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.25))
        profile = TransferProfile("constant", T=1.0, level=0.0)
        initial = IonState(position=(0.0, 1.0, model.nulls["bottom"].z))
        exp = TransferExperiment(JunctionParams(0.25, 0.0, 0.02), GEOMETRY, profile, initial)
        cfg = SimConfig(
            duration=1e-5 / scales.time_scale,
            steps_per_period=64,
            record_stride=4,
            field_source="grid",
            grid_model=model,
            scales=scales,
        )
        return simulate(exp, cfg).unwrap()

    def test_confined(self, record):
        assert record.outcome.confined

    def test_secular_frequency(self, record):
        assert measure_secular_frequency(record, "y").unwrap() == pytest.approx(2.75e6, rel=0.03)


class TestDiagnostics:
    def _record(self, position, tau=None, f=None):
        tau = np.arange(len(position), dtype=float) if tau is None else tau
        position = np.asarray(position, dtype=float)
        velocity = np.gradient(position, tau, axis=0)
        f = np.zeros(len(tau)) if f is None else f
        return TrajectoryRecord(tau, position, velocity, f, Outcome(True), 1e-8)

    def test_drift(self):
        t = np.arange(30, dtype=float)
        pos = np.column_stack([np.zeros(30), 0.1 * t, np.zeros(30)])
        report = detect_drift(self._record(pos), "y")
        assert report.drifting
        assert report.velocity == pytest.approx(0.1)

    def test_oscillation_is_not_drift(self):
        t = np.linspace(0.0, 30.0, 300)
        pos = np.column_stack([np.sin(t), np.zeros(300), np.zeros(300)])
        assert not detect_drift(self._record(pos, tau=t), "x").drifting

    def test_null_offset_follows_f(self):
        f = np.linspace(0.0, 1.0, 11)
        z = GEOMETRY.s * (2 * f - 1)
        pos = np.column_stack([np.zeros(11), np.zeros(11), z])
        record = self._record(pos, f=f)
        assert null_offset_rms(record, "z", (0.0, 10.0)) == pytest.approx(0.0, abs=1e-12)

    def test_null_offset_custom_nulls(self):
        pos = np.column_stack([np.zeros(5), np.zeros(5), np.full(5, -1.0)])
        record = self._record(pos)
        assert null_offset_rms(record, "z", (0.0, 4.0), null_z=(-2.0, 2.0)) == pytest.approx(1.0)

    def test_margin(self, curves):
        assert stability_margin(JunctionParams(0.5, -0.05, 0.1), curves) > 0.02
        assert stability_margin(JunctionParams(0.5, 0.0, -0.1), curves) == pytest.approx(0.1)


class TestCrosscheck:
    def test_robust_points_agree(self, curves):
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        base = transfer_experiment(0.5, -0.05, 0.1, scales)
        params = [JunctionParams(0.5, -0.05, 0.1), JunctionParams(0.5, 0.0, 0.2)]
        rows = crosscheck_transfer(params, base, SimConfig(duration=base.profile.T, scales=scales), curves).unwrap()
        assert [r.analytic_stable for r in rows] == [True, False]
        assert [r.simulated_confined for r in rows] == [True, False]
        assert all(r.agree and r.explained(0.02) for r in rows)

    def test_hundred_random_points_explained(self, curves):
        """100 个随机 (μ, β, α)：模拟与解析判定一致，或分歧落在边界带 / 大 α 动量情形"""
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        base = transfer_experiment(0.5, 0.0, 0.1, scales)
        params = random_junction_params(100, np.random.default_rng(0))
        rows = crosscheck_transfer(params, base, SimConfig(duration=base.profile.T, scales=scales), curves).unwrap()
        assert len(rows) == 100
        assert [r for r in rows if not r.explained()] == []
        # 动量情形只允许在模拟一侧失稳
        assert all(r.analytic_stable and not r.simulated_confined for r in rows if r.momentum_excused())

    @pytest.mark.parametrize(
        "alpha, analytic, simulated, margin, explained",
        [
            (0.1, True, False, 0.5, False),  # 小 α 的模拟丢失不能归因于动量
            (0.6, True, False, 0.5, True),  # 大 α 动量效应
            (0.6, False, True, 0.5, False),  # 只有模拟一侧可以失稳
            (0.1, True, False, 0.01, True),  # 边界带内
            (0.1, False, False, 0.5, True),  # 一致
        ],
    )
    def test_explained_rules(self, alpha, analytic, simulated, margin, explained):
        row = CrosscheckRow(JunctionParams(0.5, 0.0, alpha), analytic, simulated, margin)
        assert row.explained() is explained

    def test_momentum_threshold_is_configurable(self):
        row = CrosscheckRow(JunctionParams(0.5, 0.0, 0.2), True, False, 0.5)
        assert not row.momentum_excused()
        assert row.momentum_excused(alpha_min=0.15)
        assert row.explained(alpha_min=0.15)

    def test_random_params(self):
        a = random_junction_params(20, np.random.default_rng(5))
        b = random_junction_params(20, np.random.default_rng(5))
        assert a == b
        assert all(0.05 <= p.mu <= 0.8 and -0.4 <= p.beta <= 0.4 and 0.01 <= p.alpha <= 0.9 for p in a)


class TestGridFlight:
    def test_ion_confined_in_grid_field(self, peregrine_grid):
        model = GridTrapModel.build(peregrine_grid).unwrap()
        scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
        profile = TransferProfile("constant", T=1.0, level=0.0)
        initial = IonState(position=(0.0, 0.5, model.nulls["bottom"].z))
        exp = TransferExperiment(JunctionParams(0.5, 0.0, 0.05), GEOMETRY, profile, initial)
        cfg = SimConfig(duration=60.0, steps_per_period=64, field_source="grid", grid_model=model, scales=scales)
        record = simulate(exp, cfg).unwrap()
        assert record.outcome.confined
        assert np.max(np.abs(record.position[:, 1])) < 5.0


def test_trajectory_csv(tmp_path):
    scales = physical_to_dimensionless(PhysicalTrapSpec(mu=0.5))
    exp = transfer_experiment(0.5, -0.05, 0.1, scales)
    record = simulate(exp, SimConfig(duration=5.0, steps_per_period=64, scales=scales)).unwrap()
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(path, record, notes=["hello"])

    header = [line for line in path.read_text(encoding="utf-8").splitlines() if line.startswith("#")]
    assert header[1] == "# outcome: confined"
    assert header[2] == "# hello"
    columns, data = read_trajectory_csv(path)
    assert tuple(columns) == TRAJECTORY_COLUMNS
    assert data.shape == (len(record.tau), len(TRAJECTORY_COLUMNS))
    assert data[:, 1] == pytest.approx(record.position[:, 0], abs=1e-9)
