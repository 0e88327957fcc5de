"""stability-map - (U, V) 平面的 Mathieu 稳定性图"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..config import FLOQUET_STEPS, MAX_WORKERS, STABILITY_TOL
from ..core.mathieu import classify, floquet_trace, real_exponent
from ..core.validators import FailureHint, validate_range, validate_resolution
from ..file_manager import write_csv
from ..logger import logger
from .base import EXIT_OK, Command, CommandResult
from .plotting import stability_map_svg
from .run_config import ConfigKey, RunConfig

# Floquet 积分按块并行，每块的点数
_CHUNK = 16384


def axis_values(lo: float, hi: float, cells: int) -> np.ndarray:
    """lo == hi 时退化为单点"""
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, cells)


def _chunked(fn, U: np.ndarray, V: np.ndarray, workers: int) -> np.ndarray:
    bounds = range(0, U.size, _CHUNK)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(lambda i: fn(U[i : i + _CHUNK], V[i : i + _CHUNK]), bounds))
    return np.concatenate(parts)


class StabilityMapCommand(Command):
    def __init__(self):
        super().__init__(
            name="stability-map",
            description="计算 (U, V) 网格上的 Mathieu 稳定性（Hill 行列式 / Floquet 单值矩阵）",
            keys=(
                ConfigKey("u_min", "float", "U 下界", default="-1"),
                ConfigKey("u_max", "float", "U 上界", default="1.5"),
                ConfigKey("v_min", "float", "V 下界（非负）", default="0"),
                ConfigKey("v_max", "float", "V 上界", default="1.5"),
                ConfigKey("u_cells", "int", "U 方向点数", default="300"),
                ConfigKey("v_cells", "int", "V 方向点数", default="300"),
                ConfigKey("method", "str", "判据", default="both", choices=("hill", "floquet", "both")),
                ConfigKey("floquet_steps", "int", "Floquet 积分每周期步数", default=str(FLOQUET_STEPS)),
            ),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        for check in (
            validate_range("U", cfg["u_min"], cfg["u_max"]),
            validate_range("V", cfg["v_min"], cfg["v_max"], allow_negative=False),
            validate_resolution("u_cells", cfg["u_cells"]),
            validate_resolution("v_cells", cfg["v_cells"]),
            validate_resolution("floquet_steps", cfg["floquet_steps"], minimum=64),
        ):
            if isinstance(check, Err):
                return check

        u = axis_values(cfg["u_min"], cfg["u_max"], cfg["u_cells"])
        v = axis_values(cfg["v_min"], cfg["v_max"], cfg["v_cells"])
        UU, VV = (g.ravel() for g in np.meshgrid(u, v, indexing="ij"))
        method = cfg["method"]
        workers = MAX_WORKERS

        columns: list[str] = ["U", "V"]
        data: list[np.ndarray] = [UU, VV]
        summary = [f"grid {u.size} x {v.size}, method {method}"]

        if method in ("hill", "both"):
            _, cos_arg, _ = classify(UU, VV)
            hill = np.abs(cos_arg) <= 1.0 + STABILITY_TOL
            w = real_exponent(cos_arg, UU)
        if method in ("floquet", "both"):
            steps = cfg["floquet_steps"]
            half_trace = 0.5 * _chunked(lambda a, b: floquet_trace(a, b, steps), UU, VV, workers)
            floquet = np.abs(half_trace) <= 1.0 + STABILITY_TOL

        match method:
            case "hill":
                columns += ["stable", "w"]
                data += [hill.astype(int), w]
                shown = hill
            case "floquet":
                columns += ["stable", "half_trace"]
                data += [floquet.astype(int), half_trace]
                shown = floquet
            case _:
                agree = hill == floquet
                columns += ["hill_stable", "floquet_stable", "agree", "w"]
                data += [hill.astype(int), floquet.astype(int), agree.astype(int), w]
                shown = hill
                summary.append(f"hill/floquet agreement {100.0 * agree.mean():.2f}%")

        summary.append(f"stable points {int(shown.sum())}/{shown.size}")
        csv_path = cfg.output_dir / "stability_map.csv"
        write_csv(csv_path, "stability-map", columns, np.column_stack(data), fmt="%.10g")
        files = [csv_path]
        if cfg.svg:
            files.append(stability_map_svg(u, v, shown.reshape(u.size, v.size), cfg.output_dir / "stability_map.svg"))

        logger.info(f"[CLI] stability-map: {'; '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, files))
