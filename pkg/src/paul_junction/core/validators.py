"""参数验证函数与错误类型 - 数据验证层"""

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from rusty_results.prelude import Err, Ok, Result

from ..logger import logger


@dataclass(frozen=True)
class FailureHint:
    """带建议的错误类型"""

    message: str
    suggestion: str | None = None


@dataclass(frozen=True)
class PoleProximity(FailureHint):
    """U 落在 Hill 行列式极点 r² 的容差带内"""


@dataclass(frozen=True)
class OutOfTabulation(FailureHint):
    """V 超出边界曲线制表范围"""


@dataclass(frozen=True)
class DegenerateSlope(FailureHint):
    """切点处 a₀′ 退化，切线判据不可用"""


@dataclass(frozen=True)
class OutOfDomain(FailureHint):
    """插值模板超出网格范围"""


@dataclass(frozen=True)
class GeometryError(FailureHint):
    """电极布局或网格区域几何不合法"""


@dataclass(frozen=True)
class GridMismatch(FailureHint):
    """叠加的网格原点/步长/尺寸不一致"""


@dataclass(frozen=True)
class InsufficientData(FailureHint):
    """轨迹太短，无法做频谱分析"""


@dataclass(frozen=True)
class NoPeak(FailureHint):
    """频谱中找不到驱动频率以下的峰"""


@dataclass(frozen=True)
class ConfigError(FailureHint):
    """配置文件或命令行参数错误"""


def validate_finite(**values: float) -> Result[None, FailureHint]:
    """验证所有数值均为有限实数"""
    bad = [name for name, value in values.items() if not math.isfinite(value)]
    if bad:
        logger.warning(f"[Validate:Finite] Non-finite: {bad}")
        return Err(ConfigError(f"参数必须为有限数值: {', '.join(bad)}"))
    return Ok(None)


def validate_positive(**values: float) -> Result[None, FailureHint]:
    """验证所有数值为正（物理参数：频率、质量、电荷、间距）"""
    bad = [
        name
        for name, value in values.items()
        if not (math.isfinite(value) and value > 0)
    ]
    if bad:
        logger.warning(f"[Validate:Positive] Not positive: {bad}")
        return Err(ConfigError(f"参数必须为正数: {', '.join(bad)}"))
    return Ok(None)


def validate_range(
    name: str, lo: float, hi: float, allow_negative: bool = True
) -> Result[tuple[float, float], FailureHint]:
    """验证区间 [lo, hi]：有限、lo ≤ hi，必要时禁止负值"""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return Err(ConfigError(f"{name} 区间必须为有限数值"))
    if lo > hi:
        return Err(
            ConfigError(
                f"{name} 区间为空: [{lo}, {hi}]",
                suggestion="确认区间下界不大于上界",
            )
        )
    if not allow_negative and lo < 0:
        return Err(
            ConfigError(
                f"{name} 区间不能为负: [{lo}, {hi}]",
                suggestion="稳定性关于 V 是偶函数，只需给出非负区间",
            )
        )
    return Ok((lo, hi))


def validate_resolution(name: str, count: int, minimum: int = 1) -> Result[int, FailureHint]:
    if count < minimum:
        return Err(ConfigError(f"{name} 分辨率至少为 {minimum}，实际为 {count}"))
    return Ok(count)


def validate_ascending_positive(values: Iterable[float]) -> Result[list[float], FailureHint]:
    """验证扫描值为正且严格递增"""
    items = list(values)
    if not items:
        return Err(ConfigError("扫描值不能为空"))
    if any(not (math.isfinite(v) and v > 0) for v in items):
        return Err(ConfigError("扫描值必须为正数"))
    if any(b <= a for a, b in zip(items, items[1:])):
        return Err(ConfigError("扫描值必须严格递增"))
    return Ok(items)


def require_keys(
    config: Mapping[str, str | None], keys: Iterable[str]
) -> Result[None, FailureHint]:
    """验证配置中包含所有必需键（收集全部缺失项，不 fail fast）"""
    missing = [key for key in keys if config.get(key) in (None, "")]
    if missing:
        logger.warning(f"[Validate:Config] Missing keys: {missing}")
        return Err(
            ConfigError(
                f"配置缺少必需字段: {', '.join(missing)}",
                suggestion="参考内置 preset 或 --help 中列出的配置键",
            )
        )
    return Ok(None)


def parse_float(config: Mapping[str, str | None], key: str) -> Result[float, FailureHint]:
    raw = config.get(key)
    try:
        value = float(raw)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return Err(ConfigError(f"配置字段 {key} 不是数值: {raw!r}"))
    if not math.isfinite(value):
        return Err(ConfigError(f"配置字段 {key} 必须为有限数值"))
    return Ok(value)
