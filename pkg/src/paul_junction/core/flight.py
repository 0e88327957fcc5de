"""离子飞行模拟 - RK4 积分、出界判定、转移实验、久期频率测量与交叉验证

内部全部使用无量纲单位：时间 τ（RF 周期 π）、长度 µm、速度 µm/τ，
加速度 a = -½∇Φ（Φ 以 E₀ = mΩ²/(8c) 为单位）。物理量只在 CSV 输出时换算。
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Protocol

import numpy as np
from rusty_results.prelude import Err, Ok, Result
from scipy.fft import rfft, rfftfreq
from scipy.signal import get_window

from .. import file_manager
from ..config import (
    CROSSCHECK_BAND,
    DRIVE_EXCLUSION,
    ELEMENTARY_CHARGE,
    LOSS_BOX_XY_UM,
    MIN_STEPS_PER_PERIOD,
    MOMENTUM_ALPHA_MIN,
    PLANE_SEPARATION_UM,
    STEPS_PER_PERIOD,
    YB171_MASS_KG,
)
from ..logger import logger
from .field_grid import GridField, GridTrapModel, superpose
from .junction import JunctionParams, transfer_stable
from .mathieu import BoundaryCurves, default_boundary_curves, stable_mask
from .potential import (
    DimensionlessScales,
    PhysicalTrapSpec,
    TransferProfile,
    TwoLayerGeometry,
    instantaneous_null_z,
    physical_to_dimensionless,
    transfer_coefficients,
    transfer_profile_eval,
)
from .validators import (
    ConfigError,
    FailureHint,
    InsufficientData,
    NoPeak,
    OutOfDomain,
    validate_ascending_positive,
)

AXES = ("x", "y", "z")
TRAJECTORY_COLUMNS = ("time_s", "x_um", "y_um", "z_um", "vx_ms", "vy_ms", "vz_ms", "f")


@dataclass(frozen=True)
class IonState:
    """位置 µm、速度 µm/τ、时间 τ；电荷与质量只用于换算，积分中保持不变"""

    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    time: float = 0.0
    charge: float = ELEMENTARY_CHARGE
    mass: float = YB171_MASS_KG

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"Ion mass must be positive, got {self.mass}")


class ForceField(Protocol):
    def acceleration(
        self, tau: float, positions: np.ndarray, which: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """positions (n, 3) 处的加速度 (n, 3) 与有效标记 (n,)；which 为轨迹编号"""
        ...


class QuadraticField:
    """理想二次势的力场，对每条轨迹的 (α, β, μ) 向量化"""

    def __init__(
        self,
        alpha: np.ndarray,
        beta: np.ndarray,
        mu: np.ndarray,
        geometry: TwoLayerGeometry,
        profile: TransferProfile,
    ):
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.beta = np.atleast_1d(np.asarray(beta, dtype=float))
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.geometry = geometry
        self.profile = profile

    @classmethod
    def from_params(
        cls, params: Sequence[JunctionParams], geometry: TwoLayerGeometry, profile: TransferProfile
    ) -> "QuadraticField":
        return cls(
            np.array([p.alpha for p in params]),
            np.array([p.beta for p in params]),
            np.array([p.mu for p in params]),
            geometry,
            profile,
        )

    def acceleration(self, tau: float, positions: np.ndarray, which: np.ndarray):
        f = transfer_profile_eval(self.profile, tau)
        k = transfer_coefficients(self.alpha[which], self.beta[which], self.mu[which], f, tau)
        s = self.geometry.s
        x, y, z = positions[:, 0], positions[:, 1], positions[:, 2]
        acc = np.column_stack(
            [
                -k.kx * x,
                -k.ky * y,
                -(k.k_lo * (z + s) - k.k_hi * (s - z)),
            ]
        )
        return acc, np.ones(len(positions), dtype=bool)


class GridForce:
    """网格场的力：a = -∇φ / (2E₀)，φ 单位 V、长度 µm"""

    def __init__(self, field: GridField, energy_scale: float):
        self.field = field
        self.energy_scale = energy_scale

    def acceleration(self, tau: float, positions: np.ndarray, which: np.ndarray):
        _, grad, valid = self.field.sample(positions, tau, which)
        return -grad / (2.0 * self.energy_scale), valid


@dataclass(frozen=True)
class TransferExperiment:
    params: JunctionParams
    geometry: TwoLayerGeometry
    profile: TransferProfile
    initial: IonState


@dataclass(frozen=True, eq=False)
class SimConfig:
    """duration 为无量纲时长；dt = π / steps_per_period；bounds 为出界盒半宽 (µm)"""

    duration: float
    steps_per_period: int = STEPS_PER_PERIOD
    bounds: tuple[float, float, float] = (LOSS_BOX_XY_UM, LOSS_BOX_XY_UM, PLANE_SEPARATION_UM / 2)
    record_stride: int = 1
    field_source: Literal["quadratic", "grid"] = "quadratic"
    grid_model: GridTrapModel | None = None
    scales: DimensionlessScales | None = None

    def __post_init__(self):
        if self.steps_per_period < MIN_STEPS_PER_PERIOD:
            raise ValueError(f"dt must be <= period/{MIN_STEPS_PER_PERIOD}, got period/{self.steps_per_period}")
        if not self.duration > 0:
            raise ValueError(f"Duration must be positive, got {self.duration}")
        if min(self.bounds) <= 0:
            raise ValueError(f"Loss box must be nonempty, got {self.bounds}")
        if self.record_stride < 1:
            raise ValueError(f"Record stride must be >= 1, got {self.record_stride}")

    @property
    def dt(self) -> float:
        return math.pi / self.steps_per_period


@dataclass(frozen=True)
class Outcome:
    confined: bool
    axis: str | None = None
    time: float | None = None

    def describe(self) -> str:
        if self.confined:
            return "confined"
        return f"lost axis={self.axis} tau={self.time:.6g}"


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    tau: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    f: np.ndarray
    outcome: Outcome
    time_scale: float

    @property
    def seconds(self) -> np.ndarray:
        return self.tau * self.time_scale

    @property
    def drive_frequency(self) -> float:
        """驱动频率 (Hz)：cos 2τ 的周期 π 对应 π·time_scale 秒"""
        return 1.0 / (math.pi * self.time_scale)

    def rows(self) -> np.ndarray:
        v_ms = self.velocity * 1e-6 / self.time_scale
        return np.column_stack([self.seconds, self.position, v_ms, self.f])


def _rk4(field: ForceField, tau: float, dt: float, p: np.ndarray, v: np.ndarray, which: np.ndarray):
    a1, ok1 = field.acceleration(tau, p, which)
    p2, v2 = p + 0.5 * dt * v, v + 0.5 * dt * a1
    a2, ok2 = field.acceleration(tau + 0.5 * dt, p2, which)
    p3, v3 = p + 0.5 * dt * v2, v + 0.5 * dt * a2
    a3, ok3 = field.acceleration(tau + 0.5 * dt, p3, which)
    p4, v4 = p + dt * v3, v + dt * a3
    a4, ok4 = field.acceleration(tau + dt, p4, which)

    p_new = p + (dt / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return p_new, v_new, ok1 & ok2 & ok3 & ok4


def rk4_step(state: IonState, field: ForceField, dt: float) -> Result[IonState, FailureHint]:
    """经典 RK4 更新 (p, v)；电荷不变"""
    if not dt > 0:
        raise ValueError(f"Step must be positive, got {dt}")
    p = np.asarray(state.position, dtype=float)[None]
    v = np.asarray(state.velocity, dtype=float)[None]
    p_new, v_new, ok = _rk4(field, state.time, dt, p, v, np.array([0]))
    if not ok[0]:
        return Err(OutOfDomain(f"t={state.time:.6g} 处的积分点超出场的定义域"))
    return Ok(
        replace(
            state,
            position=tuple(float(c) for c in p_new[0]),
            velocity=tuple(float(c) for c in v_new[0]),
            time=state.time + dt,
        )
    )


def _default_scales(experiments: Sequence[TransferExperiment], cfg: SimConfig) -> DimensionlessScales:
    if cfg.scales is not None:
        return cfg.scales
    ion = experiments[0].initial
    spec = PhysicalTrapSpec(ion_mass=ion.mass, ion_charge=ion.charge, mu=abs(experiments[0].params.mu))
    return physical_to_dimensionless(spec)


def build_field(
    experiments: Sequence[TransferExperiment], cfg: SimConfig, scales: DimensionlessScales
) -> Result[ForceField, FailureHint]:
    profile = experiments[0].profile
    if cfg.field_source == "quadratic":
        return Ok(QuadraticField.from_params([e.params for e in experiments], experiments[0].geometry, profile))

    if cfg.grid_model is None:
        return Err(ConfigError("网格场模拟需要先生成网格", suggestion="用 fieldgen 生成网格并通过 grid 配置项传入"))
    rows = []
    for e in experiments:
        match cfg.grid_model.voltages(e.params.mu, e.params.alpha, e.params.beta, scales.energy_scale):
            case Err(err):
                return Err(err)
            case Ok(volts):
                rows.append(volts)
    match superpose([cfg.grid_model.grid], rows, profile):
        case Err(err):
            return Err(err)
        case Ok(field):
            return Ok(GridForce(field, scales.energy_scale))
    raise AssertionError("unreachable")


def _loss_bounds(cfg: SimConfig) -> np.ndarray:
    bounds = np.asarray(cfg.bounds, dtype=float)
    if cfg.field_source == "grid" and cfg.grid_model is not None:
        # 出界盒收缩到插值区域内（留一个网格单元余量）
        lo, hi = cfg.grid_model.grid.interior_bounds()
        margin = cfg.grid_model.grid.spacing
        bounds = np.minimum(bounds, np.minimum(-lo, hi) - margin)
    return bounds


def simulate_batch(
    experiments: Sequence[TransferExperiment], cfg: SimConfig
) -> Result[list[TrajectoryRecord], FailureHint]:
    """共享转移函数的一批实验作为一个向量化状态积分；出界轨迹冻结"""
    if not experiments:
        return Ok([])
    profile = experiments[0].profile
    if any(e.profile != profile for e in experiments):
        return Err(ConfigError("同一批实验必须共享转移函数"))

    scales = _default_scales(experiments, cfg)
    match build_field(experiments, cfg, scales):
        case Err(e):
            return Err(e)
        case Ok(field):
            pass

    n = len(experiments)
    dt = cfg.dt
    n_steps = int(math.ceil(cfg.duration / dt - 1e-9))
    bounds = _loss_bounds(cfg)

    p = np.array([e.initial.position for e in experiments], dtype=float)
    v = np.array([e.initial.velocity for e in experiments], dtype=float)
    active = np.ones(n, dtype=bool)
    outcomes: list[Outcome] = [Outcome(True)] * n
    final: dict[int, tuple[float, np.ndarray, np.ndarray]] = {}

    record_steps = list(range(0, n_steps + 1, cfg.record_stride))
    tau_rec = np.array(record_steps, dtype=float) * dt
    pos_rec = np.empty((len(record_steps), n, 3))
    vel_rec = np.empty((len(record_steps), n, 3))
    pos_rec[0], vel_rec[0] = p, v
    row = 1

    for step in range(n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        tau = step * dt
        p_new, v_new, ok = _rk4(field, tau, dt, p[idx], v[idx], idx)
        p[idx], v[idx] = p_new, v_new

        ratio = np.abs(p_new) / bounds
        lost = (ratio > 1.0).any(axis=1) | ~ok
        for j, r in zip(idx[lost], ratio[lost]):
            axis = AXES[int(np.argmax(r))]
            outcomes[j] = Outcome(False, axis, tau + dt)
            final[j] = (tau + dt, p[j].copy(), v[j].copy())
            active[j] = False
            logger.debug(f"[Flight] trajectory {j} lost along {axis} at tau={tau + dt:.4f}")

        if row < len(record_steps) and step + 1 == record_steps[row]:
            pos_rec[row], vel_rec[row] = p, v
            row += 1

    records = []
    for j in range(n):
        if j in final:
            t_lost, p_lost, v_lost = final[j]
            keep = tau_rec[:row] < t_lost - 1e-12
            tau_j = np.append(tau_rec[:row][keep], t_lost)
            pos_j = np.vstack([pos_rec[:row][keep, j], p_lost])
            vel_j = np.vstack([vel_rec[:row][keep, j], v_lost])
        else:
            tau_j, pos_j, vel_j = tau_rec[:row], pos_rec[:row, j], vel_rec[:row, j]
        f_j = np.asarray(transfer_profile_eval(profile, tau_j), dtype=float) * np.ones_like(tau_j)
        records.append(TrajectoryRecord(tau_j, pos_j, vel_j, f_j, outcomes[j], scales.time_scale))

    confined = sum(o.confined for o in outcomes)
    logger.info(f"[Flight] {n} trajectory(ies), {n_steps} steps of dt={dt:.5f}: {confined} confined")
    return Ok(records)


def simulate(exp: TransferExperiment, cfg: SimConfig) -> Result[TrajectoryRecord, FailureHint]:
    match simulate_batch([exp], cfg):
        case Err(e):
            return Err(e)
        case Ok(records):
            return Ok(records[0])
    raise AssertionError("unreachable")


def position_spectrum(traj: TrajectoryRecord, axis: str) -> tuple[np.ndarray, np.ndarray]:
    """去均值、Hann 窗、8 倍补零后的幅度谱 (freqs Hz, |FFT|)"""
    samples = traj.position[:, AXES.index(axis)]
    dt = float(np.mean(np.diff(traj.seconds)))
    windowed = (samples - samples.mean()) * get_window("hann", len(samples))
    n_fft = 8 * len(samples)
    return rfftfreq(n_fft, d=dt), np.abs(rfft(windowed, n=n_fft))


def measure_secular_frequency(
    traj: TrajectoryRecord,
    axis: str,
    drive_exclusion: float = DRIVE_EXCLUSION,
    min_periods: float = 20.0,
) -> Result[float, FailureHint]:
    """驱动频率以下的主谱峰 (Hz)，对数幅度抛物线插值"""
    if len(traj.tau) < 64:
        return Err(InsufficientData(f"轨迹只有 {len(traj.tau)} 个采样点", suggestion="延长模拟时长"))

    duration = float(traj.seconds[-1] - traj.seconds[0])
    freqs, spectrum = position_spectrum(traj, axis)

    f_drive = traj.drive_frequency
    candidates = (freqs > 2.0 / duration) & (freqs < f_drive * (1.0 - drive_exclusion))
    if not candidates.any() or not np.any(spectrum[candidates] > 0):
        return Err(NoPeak("驱动频率以下没有谱峰"))

    k = int(np.flatnonzero(candidates)[np.argmax(spectrum[candidates])])
    peak = freqs[k]
    if 0 < k < len(spectrum) - 1 and np.all(spectrum[k - 1 : k + 2] > 0):
        la, lb, lc = np.log(spectrum[k - 1 : k + 2])
        denom = la - 2.0 * lb + lc
        if denom < 0:
            peak = freqs[k] + 0.5 * (la - lc) / denom * (freqs[1] - freqs[0])

    if peak * duration < min_periods:
        return Err(
            InsufficientData(
                f"轨迹只覆盖 {peak * duration:.1f} 个久期周期（至少需要 {min_periods:.0f}）",
                suggestion="延长模拟时长",
            )
        )
    logger.info(f"[Secular] axis {axis}: {peak / 1e6:.4f} MHz")
    return Ok(float(peak))


@dataclass(frozen=True)
class DriftReport:
    drifting: bool
    velocity: float
    displacement: float


def detect_drift(record: TrajectoryRecord, axis: str, tau_start: float | None = None) -> DriftReport:
    """保持阶段内速度不变号且位移单调 → 无约束漂移（默认取轨迹最后三分之一）"""
    i = AXES.index(axis)
    start = record.tau[-1] * 2.0 / 3.0 if tau_start is None else tau_start
    window = record.tau >= start
    pos = record.position[window, i]
    vel = record.velocity[window, i]
    if len(pos) < 8:
        return DriftReport(False, 0.0, 0.0)

    steps = np.diff(pos)
    drifting = bool(
        (np.all(vel > 1e-9) or np.all(vel < -1e-9)) and (np.all(steps > 0) or np.all(steps < 0))
    )
    return DriftReport(drifting, float(np.mean(vel)), float(pos[-1] - pos[0]))


def null_offset_rms(
    record: TrajectoryRecord,
    axis: str,
    window: tuple[float, float],
    null_z: tuple[float, float] | None = None,
) -> float:
    """窗口内相对瞬时零点的均方根偏移；z 零点在 null_z 两端之间按 f 线性插值

    null_z 默认取二次势模型两层零点 (-s, s)。
    """
    null_z = null_z or quadratic_null_z(TwoLayerGeometry())
    i = AXES.index(axis)
    mask = (record.tau >= window[0]) & (record.tau <= window[1])
    pos = record.position[mask, i]
    if axis == "z":
        pos = pos - ((1.0 - record.f[mask]) * null_z[0] + record.f[mask] * null_z[1])
    if pos.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(pos**2)))


def quadratic_null_z(geometry: TwoLayerGeometry) -> tuple[float, float]:
    return float(instantaneous_null_z(geometry, 0.0)), float(instantaneous_null_z(geometry, 1.0))


@dataclass(frozen=True)
class SweepResult:
    alphas: tuple[float, ...]
    outcomes: tuple[Outcome, ...]
    last_confined: float | None


def alpha_sweep(
    base: TransferExperiment, alphas: Sequence[float], cfg: SimConfig
) -> Result[SweepResult, FailureHint]:
    """按 α 扫描转移实验；last_confined 为从小到大首次失稳前的最后一个 α"""
    match validate_ascending_positive(alphas):
        case Err(e):
            return Err(e)
        case Ok(values):
            pass

    experiments = [replace(base, params=replace(base.params, alpha=a)) for a in values]
    match simulate_batch(experiments, cfg):
        case Err(e):
            return Err(e)
        case Ok(records):
            pass

    outcomes = tuple(r.outcome for r in records)
    last = None
    for a, o in zip(values, outcomes):
        if not o.confined:
            break
        last = a
    logger.info(f"[Flight] alpha sweep over {len(values)} values: last confined alpha = {last}")
    return Ok(SweepResult(tuple(values), outcomes, last))


def stability_margin(jp: JunctionParams, curves: BoundaryCurves, samples: int = 64) -> float:
    """解析判定的可信度：稳定时为离最近边界的最小 U 距离，不稳定时为最深越界距离"""
    t = np.arange(samples + 1) / samples
    U = np.append(jp.alpha * (1.0 - t) + jp.beta * t, jp.gamma)
    V = np.append(abs(jp.mu) * t, abs(jp.mu))
    dist = np.min(np.abs(np.stack([U - curves.a0(V), U - curves.b1(V), U - curves.a1(V)])), axis=0)
    ok = stable_mask(U, V)

    if jp.alpha <= 0:
        return -jp.alpha
    if ok.all():
        return float(min(dist.min(), jp.alpha))
    return float(dist[~ok].max())


@dataclass(frozen=True)
class CrosscheckRow:
    params: JunctionParams
    analytic_stable: bool
    simulated_confined: bool
    margin: float

    @property
    def agree(self) -> bool:
        return self.analytic_stable == self.simulated_confined

    def in_band(self, band: float = CROSSCHECK_BAND) -> bool:
        return not self.agree and self.margin < band

    def momentum_excused(self, alpha_min: float = MOMENTUM_ALPHA_MIN) -> bool:
        """大 α 下解析稳定而模拟丢失：时间无关分析不含转移中的动量，只允许在模拟一侧失稳"""
        return (
            self.analytic_stable
            and not self.simulated_confined
            and self.params.alpha >= alpha_min
        )

    def explained(self, band: float = CROSSCHECK_BAND, alpha_min: float = MOMENTUM_ALPHA_MIN) -> bool:
        return self.agree or self.in_band(band) or self.momentum_excused(alpha_min)


def crosscheck_transfer(
    params: Sequence[JunctionParams],
    base: TransferExperiment,
    cfg: SimConfig,
    curves: BoundaryCurves | None = None,
) -> Result[list[CrosscheckRow], FailureHint]:
    """二次势模型的模拟结果与 transfer_stable 解析判定逐点对照"""
    curves = curves or default_boundary_curves()
    experiments = [replace(base, params=p) for p in params]
    match simulate_batch(experiments, cfg):
        case Err(e):
            return Err(e)
        case Ok(records):
            pass

    rows = [
        CrosscheckRow(p, transfer_stable(p, curves=curves).stable, r.outcome.confined, stability_margin(p, curves))
        for p, r in zip(params, records)
    ]
    logger.info(f"[Crosscheck] {sum(r.agree for r in rows)}/{len(rows)} analytic/simulated verdicts agree")
    return Ok(rows)


def random_junction_params(
    n: int, rng: np.random.Generator, mu_max: float = 0.8, alpha_max: float = 0.9, beta_span: float = 0.4
) -> list[JunctionParams]:
    mu = rng.uniform(0.05, mu_max, n)
    beta = rng.uniform(-beta_span, beta_span, n)
    alpha = rng.uniform(0.01, alpha_max, n)
    return [JunctionParams(float(m), float(b), float(a)) for m, b, a in zip(mu, beta, alpha)]


def write_trajectory_csv(path: Path, record: TrajectoryRecord, notes: Sequence[str] = ()) -> None:
    file_manager.write_csv(
        path,
        "trajectory",
        TRAJECTORY_COLUMNS,
        record.rows(),
        fmt="%.12g",
        notes=[f"outcome: {record.outcome.describe()}", *notes],
    )


def read_trajectory_csv(path: Path) -> tuple[list[str], np.ndarray]:
    return file_manager.read_csv(path)
