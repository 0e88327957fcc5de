"""transfer-sim - 单条离子轨迹的转移模拟"""

from rusty_results.prelude import Err, Ok, Result

from ..core.flight import AXES, TrajectoryRecord, detect_drift, null_offset_rms, simulate, write_trajectory_csv
from ..core.validators import FailureHint
from ..logger import logger
from .base import EXIT_LOST, EXIT_OK, Command, CommandResult
from .experiment import EXPERIMENT_KEYS, ExperimentSetup, build_setup
from .plotting import trajectory_svg
from .run_config import RunConfig


def summarize(record: TrajectoryRecord, setup: ExperimentSetup) -> list[str]:
    """结果摘要：outcome、末段漂移轴、第一段保持期的 z 零点偏移"""
    lines = [f"outcome: {record.outcome.describe()}"]
    if record.outcome.confined:
        drifting = [axis for axis in AXES if detect_drift(record, axis).drifting]
        lines.append(f"drift: {','.join(drifting) if drifting else 'none'}")

    hold = (0.0, setup.transfer_time / 3.0)
    rms = null_offset_rms(record, "z", hold, null_z=setup.null_z)
    lines.append(f"z_null_offset_rms_um: {rms:.6g}")
    return lines


class TransferSimCommand(Command):
    def __init__(self):
        super().__init__(
            name="transfer-sim",
            description="RK4 模拟离子在结转移中的轨迹（退出码 0 = 约束，3 = 丢失）",
            keys=EXPERIMENT_KEYS,
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

        summary = summarize(record, setup)
        csv_path = cfg.output_dir / "trajectory.csv"
        write_trajectory_csv(csv_path, record, notes=summary[1:])
        files = [csv_path]
        if cfg.svg:
            files.append(trajectory_svg(record, cfg.output_dir / "trajectory.svg"))

        logger.info(f"[CLI] transfer-sim: {'; '.join(summary)}")
        code = EXIT_OK if record.outcome.confined else EXIT_LOST
        return Ok(CommandResult(code, summary, files))
