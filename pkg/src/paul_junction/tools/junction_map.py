"""junction-map - (μ, β, α) 空间的单阱 / 转移稳定区与禁区"""

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..config import MAP_CHUNK_CELLS, MAX_WORKERS, PATH_SAMPLES
from ..core.junction import MapAxis, region_map
from ..core.validators import FailureHint, validate_range, validate_resolution
from ..file_manager import write_csv
from ..logger import logger
from .base import EXIT_OK, Command, CommandResult
from .plotting import region_slices_svg
from .run_config import ConfigKey, RunConfig

COLUMNS = ("mu", "beta", "alpha", "simple", "transfer", "banned")


def _axis_keys(name: str, lo: str, hi: str) -> tuple[ConfigKey, ...]:
    return (
        ConfigKey(f"{name}_min", "float", f"{name} 下界", default=lo),
        ConfigKey(f"{name}_max", "float", f"{name} 上界", default=hi),
        ConfigKey(f"{name}_cells", "int", f"{name} 方向单元数（下界等于上界时忽略）", default="16"),
    )


class JunctionMapCommand(Command):
    def __init__(self):
        super().__init__(
            name="junction-map",
            description="逐单元判定单阱稳定与转移稳定，输出禁区（单阱稳定但转移不稳定）",
            keys=(
                *_axis_keys("mu", "0", "1.5"),
                *_axis_keys("beta", "-0.8", "0.8"),
                *_axis_keys("alpha", "0", "1.5"),
                ConfigKey("samples", "int", "转移路径采样区间数", default=str(PATH_SAMPLES)),
                ConfigKey("slice_mu", "floats", "SVG 切片对应的 μ 值（取最近的单元）"),
            ),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        axes = {}
        for name in ("mu", "beta", "alpha"):
            lo, hi, cells = cfg[f"{name}_min"], cfg[f"{name}_max"], cfg[f"{name}_cells"]
            match validate_range(name, lo, hi):
                case Err(e):
                    return Err(e)
            if lo != hi:
                match validate_resolution(f"{name}_cells", cells, minimum=8):
                    case Err(e):
                        return Err(e)
            axes[name] = MapAxis(lo, hi, cells)
        match validate_resolution("samples", cfg["samples"], minimum=2):
            case Err(e):
                return Err(e)

        region = region_map(
            axes["mu"], axes["beta"], axes["alpha"], samples=cfg["samples"], workers=MAX_WORKERS, chunk_cells=MAP_CHUNK_CELLS
        )
        banned = region.banned
        summary = [
            f"cells {region.simple_stable.size}",
            f"simple-stable {int(region.simple_stable.sum())}",
            f"transfer-stable {int(region.transfer_stable.sum())}",
            f"banned {int(banned.sum())}",
        ]
        if banned.any():
            alphas = np.broadcast_to(region.alpha, banned.shape)[banned]
            summary.append(f"banned alpha range [{alphas.min():.4g}, {alphas.max():.4g}]")

        csv_path = cfg.output_dir / "junction_map.csv"
        write_csv(csv_path, "junction-map", COLUMNS, region.rows(), fmt="%.10g")
        files = [csv_path]
        if cfg.svg:
            wanted = cfg.get("slice_mu", (float(region.mu[len(region.mu) // 2]),))
            indices = sorted({int(np.argmin(np.abs(region.mu - m))) for m in wanted})
            files.append(region_slices_svg(region, indices, cfg.output_dir / "junction_slices.svg"))

        logger.info(f"[CLI] junction-map: {', '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, files))
