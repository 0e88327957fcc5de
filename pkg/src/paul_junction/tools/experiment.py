"""由运行配置构造转移实验与模拟配置（transfer-sim / alpha-sweep / secular / crosscheck 共用）"""

from dataclasses import dataclass, replace

from rusty_results.prelude import Err, Ok, Result

from ..config import (
    DRIVE_FREQUENCY_HZ,
    ELEMENTARY_CHARGE,
    LOSS_BOX_XY_UM,
    NULL_HALF_SEPARATION_UM,
    PLANE_SEPARATION_UM,
    STEPS_PER_PERIOD,
    TRANSFER_TIME_S,
)
from ..core.field_grid import GridTrapModel, load_field_grid
from ..core.flight import IonState, SimConfig, TransferExperiment, quadratic_null_z
from ..core.junction import JunctionParams
from ..core.potential import (
    PROFILE_KINDS,
    DimensionlessScales,
    PhysicalTrapSpec,
    TransferProfile,
    TwoLayerGeometry,
    physical_to_dimensionless,
)
from ..core.validators import ConfigError, FailureHint
from ..logger import logger
from .run_config import ConfigKey, RunConfig

EXPERIMENT_KEYS = (
    ConfigKey("mu", "float", "RF 强度 μ", required=True),
    ConfigKey("alpha", "float", "控制势 x² 系数 α", required=True),
    ConfigKey("beta", "float", "控制势 y² 系数 β", required=True),
    ConfigKey("mass", "float", "离子质量 (kg)", required=True),
    ConfigKey("charge", "float", "离子电荷 (C)", default=repr(ELEMENTARY_CHARGE)),
    ConfigKey("drive_frequency", "float", "驱动频率 Ω/2π (Hz)", default=repr(DRIVE_FREQUENCY_HZ)),
    ConfigKey("profile", "str", "转移函数 f(t)", default="three_phase", choices=PROFILE_KINDS),
    ConfigKey("level", "float", "constant 转移函数的取值", default="0.5"),
    ConfigKey("transfer_time_s", "float", "转移总时长 T (s)", default=repr(TRANSFER_TIME_S)),
    ConfigKey("duration_s", "float", "模拟时长 (s)，默认等于 transfer_time_s"),
    ConfigKey("offset", "floats", "相对下层零点的初始位移 (µm)", default="0,0,0"),
    ConfigKey("velocity", "floats", "初速度 (m/s)", default="0,0,0"),
    ConfigKey("s", "float", "二次势模型中两个零点的半间距 (µm)", default=repr(NULL_HALF_SEPARATION_UM)),
    ConfigKey("steps_per_period", "int", "每个 RF 周期的 RK4 步数", default=str(STEPS_PER_PERIOD)),
    ConfigKey("record_stride", "int", "每隔多少步记录一次", default="1"),
    ConfigKey("field", "str", "场模型", default="quadratic", choices=("quadratic", "grid")),
    ConfigKey("grid", "path", "fieldgen 生成的网格文件（field=grid 时必需）"),
)


@dataclass(frozen=True)
class ExperimentSetup:
    experiment: TransferExperiment
    sim: SimConfig
    scales: DimensionlessScales
    null_z: tuple[float, float]

    @property
    def transfer_time(self) -> float:
        return self.experiment.profile.T


def _vector(cfg: RunConfig, key: str) -> Result[tuple[float, float, float], FailureHint]:
    values = cfg[key]
    if len(values) != 3:
        return Err(ConfigError(f"{key} 需要 3 个分量，实际 {len(values)} 个", suggestion="例如 5,5,5"))
    return Ok(tuple(values))


def _grid_model(cfg: RunConfig) -> Result[GridTrapModel | None, FailureHint]:
    if cfg.get("field", "quadratic") != "grid":
        return Ok(None)
    if cfg.get("grid") is None:
        return Err(ConfigError("field=grid 需要 grid 配置项", suggestion="先运行 fieldgen 生成网格文件"))
    match load_field_grid(cfg["grid"]):
        case Err(e):
            return Err(e)
        case Ok(grid):
            return GridTrapModel.build(grid)
    raise AssertionError("unreachable")


def build_setup(cfg: RunConfig) -> Result[ExperimentSetup, FailureHint]:
    """把配置中的物理量换算为无量纲单位并组装实验"""
    match _vector(cfg, "offset"):
        case Err(e):
            return Err(e)
        case Ok(offset):
            pass
    match _vector(cfg, "velocity"):
        case Err(e):
            return Err(e)
        case Ok(velocity):
            pass
    match _grid_model(cfg):
        case Err(e):
            return Err(e)
        case Ok(model):
            pass

    try:
        params = JunctionParams(cfg["mu"], cfg["beta"], cfg["alpha"])
        spec = PhysicalTrapSpec(
            drive_frequency=cfg["drive_frequency"],
            ion_mass=cfg["mass"],
            ion_charge=cfg["charge"],
            mu=abs(cfg["mu"]),
        )
        scales = physical_to_dimensionless(spec)
        geometry = TwoLayerGeometry(s=cfg["s"])
        profile = TransferProfile.from_seconds(cfg["profile"], cfg["transfer_time_s"], scales, cfg["level"])

        if model is None:
            null_z = quadratic_null_z(geometry)
        else:
            null_z = (model.nulls["bottom"].z, model.nulls["top"].z)
        start = (offset[0], offset[1], null_z[0] + offset[2])
        initial = IonState(
            position=start,
            velocity=tuple(float(v) for v in scales.velocity_to_dimensionless(velocity)),
            charge=cfg["charge"],
            mass=cfg["mass"],
        )
        duration_s = cfg.get("duration_s", cfg["transfer_time_s"])
        sim = SimConfig(
            duration=duration_s / scales.time_scale,
            steps_per_period=cfg["steps_per_period"],
            bounds=(LOSS_BOX_XY_UM, LOSS_BOX_XY_UM, PLANE_SEPARATION_UM / 2),
            record_stride=cfg["record_stride"],
            field_source=cfg.get("field", "quadratic"),
            grid_model=model,
            scales=scales,
        )
    except ValueError as e:
        return Err(ConfigError(f"实验参数不合法: {e}"))

    logger.info(
        f"[CLI] Experiment mu={params.mu} alpha={params.alpha} beta={params.beta}, "
        f"T={profile.T:.2f}, duration={sim.duration:.2f} (dimensionless)"
    )
    return Ok(ExperimentSetup(TransferExperiment(params, geometry, profile, initial), sim, scales, null_z))


def experiment_keys(exclude: tuple[str, ...] = (), **defaults: str) -> tuple[ConfigKey, ...]:
    """EXPERIMENT_KEYS 的副本：给出默认值的键不再是必需项"""
    keys = []
    for key in EXPERIMENT_KEYS:
        if key.name in exclude:
            continue
        if key.name in defaults:
            key = replace(key, default=defaults[key.name], required=False)
        keys.append(key)
    return tuple(keys)
