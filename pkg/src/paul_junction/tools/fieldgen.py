"""fieldgen / null-find - 电极布局 → 单位电压网格 → RF 零点"""

from pathlib import Path

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..config import DEFAULT_GRID_BOX_UM, DEFAULT_GRID_DIMS, IMAGE_ORDER, MAX_WORKERS
from ..core.electrodes import (
    LAYOUT_PRESETS,
    ElectrodeLayout,
    GridSpec,
    generate_rect_electrode_grid,
    layout_text,
    parse_layout,
)
from ..core.field_grid import LAYERS, find_rf_null, load_field_grid, rf_curvature, save_field_grid
from ..core.validators import FailureHint, GeometryError, validate_resolution
from ..file_manager import read_file, write_csv, write_file
from ..logger import logger
from .base import EXIT_OK, Command, CommandResult
from .run_config import ConfigKey, RunConfig

GRID_FILE = "field_grid.txt"
NULL_COLUMNS = ("layer", "z_um", "height_um", "gradient_norm", "degenerate", "rf_curvature")


def resolve_layout(name: str) -> Result[ElectrodeLayout, FailureHint]:
    """preset 名称或布局文件路径"""
    if name in LAYOUT_PRESETS:
        return Ok(LAYOUT_PRESETS[name]())
    path = Path(name).expanduser()
    if not path.is_file():
        return Err(
            GeometryError(
                f"未知布局: {name}",
                suggestion=f"可用 preset: {', '.join(LAYOUT_PRESETS)}，或给出布局文件路径",
            )
        )
    return parse_layout(read_file(path))


class FieldGenCommand(Command):
    def __init__(self):
        dims, box = DEFAULT_GRID_DIMS, DEFAULT_GRID_BOX_UM
        super().__init__(
            name="fieldgen",
            description="无缝平面近似 + 镜像级数计算各电极的单位电压电势网格",
            keys=(
                ConfigKey("layout", "str", f"布局 preset（{'/'.join(LAYOUT_PRESETS)}）或布局文件", default="peregrine"),
                ConfigKey("nx", "int", "x 方向网格点数", default=str(dims[0])),
                ConfigKey("ny", "int", "y 方向网格点数", default=str(dims[1])),
                ConfigKey("nz", "int", "z 方向网格点数", default=str(dims[2])),
                ConfigKey("box_x", "float", "x 方向边长 (µm)", default=repr(box[0])),
                ConfigKey("box_y", "float", "y 方向边长 (µm)", default=repr(box[1])),
                ConfigKey("box_z", "float", "z 方向边长 (µm)，必须小于平面间距", default=repr(box[2])),
                ConfigKey("image_order", "int", "镜像级数截断阶数", default=str(IMAGE_ORDER)),
            ),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        match validate_resolution("image_order", cfg["image_order"], minimum=0):
            case Err(e):
                return Err(e)
        match resolve_layout(cfg["layout"]):
            case Err(e):
                return Err(e)
            case Ok(layout):
                pass

        dims = (cfg["nx"], cfg["ny"], cfg["nz"])
        box = (cfg["box_x"], cfg["box_y"], cfg["box_z"])
        if min(box) <= 0:
            return Err(GeometryError(f"网格边长必须为正: {box}"))
        match generate_rect_electrode_grid(layout, GridSpec.centered(box, dims), cfg["image_order"], MAX_WORKERS):
            case Err(e):
                return Err(e)
            case Ok(grid):
                pass

        grid_path = cfg.output_dir / GRID_FILE
        layout_path = cfg.output_dir / "layout.txt"
        save_field_grid(grid, grid_path)
        write_file(layout_path, layout_text(layout))

        worst = max(grid.convergence.values(), default=0.0)
        summary = [
            f"layout {layout.name}: {len(grid.names)} electrode(s) on {dims[0]}x{dims[1]}x{dims[2]}",
            f"last image term {worst:.2e}",
        ]
        logger.info(f"[CLI] fieldgen: {'; '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, [grid_path, layout_path]))


class NullFindCommand(Command):
    def __init__(self):
        super().__init__(
            name="null-find",
            description="沿结轴定位每层 RF 零点并报告其离电极平面的高度（layer: 0 = bottom, 1 = top）",
            keys=(ConfigKey("grid", "path", "fieldgen 生成的网格文件", required=True),),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        match load_field_grid(cfg["grid"]):
            case Err(e):
                return Err(e)
            case Ok(grid):
                pass

        rows: list[list[float]] = []
        summary: list[str] = []
        for index, layer in enumerate(LAYERS):
            if not grid.electrodes_where(layer=layer, role="rf"):
                summary.append(f"{layer}: no RF electrodes")
                continue
            match find_rf_null(grid, layer):
                case Err(e):
                    return Err(e)
                case Ok(report):
                    pass
            kappa = np.nan if report.degenerate else rf_curvature(grid, layer, report.z)
            rows.append([index, report.z, report.height, report.gradient_norm, int(report.degenerate), kappa])
            if report.degenerate:
                summary.append(f"{layer}: degenerate (no RF minimum on the junction axis)")
            else:
                summary.append(f"{layer}: null at z={report.z:.4f} um, {report.height:.4f} um from the surface")

        csv_path = cfg.output_dir / "null_report.csv"
        write_csv(csv_path, "null-find", NULL_COLUMNS, np.array(rows).reshape(-1, len(NULL_COLUMNS)), fmt="%.10g")
        logger.info(f"[CLI] null-find: {'; '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, [csv_path]))
