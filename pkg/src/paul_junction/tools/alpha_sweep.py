"""alpha-sweep - 按 α 扫描转移实验，报告最后一个仍约束的 α"""

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..core.flight import AXES, alpha_sweep
from ..core.validators import FailureHint
from ..file_manager import write_csv
from ..logger import logger
from .base import EXIT_OK, Command, CommandResult
from .experiment import build_setup, experiment_keys
from .plotting import sweep_svg
from .run_config import ConfigKey, RunConfig

COLUMNS = ("alpha", "confined", "lost_axis", "lost_time_s")


class AlphaSweepCommand(Command):
    def __init__(self):
        super().__init__(
            name="alpha-sweep",
            description="对一组 α 批量模拟转移（lost_axis: 0/1/2 = x/y/z，-1 = 约束）",
            keys=(
                *experiment_keys(alpha="0"),
                ConfigKey(
                    "alphas",
                    "floats",
                    "扫描的 α 值（正、严格递增）",
                    default="0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5",
                ),
            ),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        match build_setup(cfg):
            case Err(e):
                return Err(e)
            case Ok(setup):
                pass
        match alpha_sweep(setup.experiment, cfg["alphas"], setup.sim):
            case Err(e):
                return Err(e)
            case Ok(result):
                pass

        time_scale = setup.scales.time_scale
        rows = np.array(
            [
                [
                    a,
                    int(o.confined),
                    -1 if o.confined else AXES.index(o.axis),
                    np.nan if o.confined else o.time * time_scale,
                ]
                for a, o in zip(result.alphas, result.outcomes)
            ]
        )
        summary = [
            f"confined {sum(o.confined for o in result.outcomes)}/{len(result.outcomes)}",
            f"last confined alpha: {result.last_confined if result.last_confined is not None else 'none'}",
        ]
        csv_path = cfg.output_dir / "alpha_sweep.csv"
        write_csv(csv_path, "alpha-sweep", COLUMNS, rows, fmt="%.10g", notes=summary[1:])
        files = [csv_path]
        if cfg.svg:
            files.append(sweep_svg(result.alphas, [o.confined for o in result.outcomes], cfg.output_dir / "alpha_sweep.svg"))

        logger.info(f"[CLI] alpha-sweep: {'; '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, files))
