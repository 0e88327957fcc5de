"""secular - 由轨迹频谱测量久期频率，并与 μΩ/(2√2) 估计比较"""

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..core.flight import measure_secular_frequency, position_spectrum, simulate, write_trajectory_csv
from ..core.validators import FailureHint
from ..file_manager import write_csv
from ..logger import logger
from .base import EXIT_LOST, EXIT_OK, Command, CommandResult
from .experiment import EXPERIMENT_KEYS, build_setup
from .plotting import spectrum_svg
from .run_config import ConfigKey, RunConfig

COLUMNS = ("frequency_hz", "estimate_hz", "relative_difference")


class SecularCommand(Command):
    def __init__(self):
        super().__init__(
            name="secular",
            description="模拟静态阱中的离子并测量某一轴的久期频率",
            keys=(*EXPERIMENT_KEYS, ConfigKey("axis", "str", "测量的轴", default="y", choices=("x", "y", "z"))),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        match build_setup(cfg):
            case Err(e):
                return Err(e)
            case Ok(setup):
                pass
        match simulate(setup.experiment, setup.sim):
            case Err(e):
                return Err(e)
            case Ok(record):
                pass

        trajectory_path = cfg.output_dir / "trajectory.csv"
        write_trajectory_csv(trajectory_path, record)
        if not record.outcome.confined:
            summary = [f"outcome: {record.outcome.describe()}"]
            return Ok(CommandResult(EXIT_LOST, summary, [trajectory_path]))

        axis = cfg["axis"]
        match measure_secular_frequency(record, axis):
            case Err(e):
                return Err(e)
            case Ok(frequency):
                pass

        estimate = setup.scales.secular_frequency
        difference = frequency / estimate - 1.0 if estimate > 0 else np.nan
        summary = [
            f"secular frequency ({axis}): {frequency / 1e6:.4f} MHz",
            f"small-mu estimate: {estimate / 1e6:.4f} MHz ({100 * difference:+.2f}%)",
        ]
        csv_path = cfg.output_dir / "secular.csv"
        write_csv(csv_path, "secular", COLUMNS, np.array([[frequency, estimate, difference]]), fmt="%.10g")
        files = [csv_path, trajectory_path]
        if cfg.svg:
            freqs, magnitude = position_spectrum(record, axis)
            keep = freqs < record.drive_frequency * 1.5
            files.append(spectrum_svg(freqs[keep], magnitude[keep], frequency, cfg.output_dir / "spectrum.svg"))

        logger.info(f"[Secular] {'; '.join(summary)}")
        return Ok(CommandResult(EXIT_OK, summary, files))
