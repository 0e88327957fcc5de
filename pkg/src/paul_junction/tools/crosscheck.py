"""crosscheck - 二次势模型的模拟结果与解析转移判据逐点对照"""

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..config import CROSSCHECK_BAND, MOMENTUM_ALPHA_MIN, YB171_MASS_KG
from ..core.flight import crosscheck_transfer, random_junction_params
from ..core.validators import FailureHint, validate_positive, validate_resolution
from ..file_manager import write_csv
from ..logger import logger
from .base import EXIT_OK, Command, CommandResult
from .experiment import build_setup, experiment_keys
from .run_config import ConfigKey, RunConfig

COLUMNS = ("mu", "beta", "alpha", "analytic", "simulated", "margin", "agree", "in_band", "momentum", "explained")


class CrosscheckCommand(Command):
    def __init__(self):
        super().__init__(
            name="crosscheck",
            description="随机抽取 (μ, β, α)，比较 RK4 模拟与 transfer_stable 的判定（种子由 --seed 给出）",
            keys=(
                *experiment_keys(
                    exclude=("field", "grid"),
                    mu="0.5",
                    alpha="0.1",
                    beta="0",
                    mass=repr(YB171_MASS_KG),
                    velocity="5,5,5",
                ),
                ConfigKey("n", "int", "抽样点数", default="100"),
                ConfigKey("mu_max", "float", "μ 上界", default="0.8"),
                ConfigKey("alpha_max", "float", "α 上界", default="0.9"),
                ConfigKey("beta_span", "float", "β 取值范围 [-span, span]", default="0.4"),
                ConfigKey("band", "float", "允许分歧的边界带宽度", default=repr(CROSSCHECK_BAND)),
                ConfigKey(
                    "momentum_alpha",
                    "float",
                    "不低于该 α 时允许模拟一侧单独失稳（动量效应）",
                    default=repr(MOMENTUM_ALPHA_MIN),
                ),
            ),
        )

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        match validate_resolution("n", cfg["n"]):
            case Err(e):
                return Err(e)
        match validate_positive(
            mu_max=cfg["mu_max"], alpha_max=cfg["alpha_max"], beta_span=cfg["beta_span"], band=cfg["band"]
        ):
            case Err(e):
                return Err(e)
        match build_setup(cfg):
            case Err(e):
                return Err(e)
            case Ok(setup):
                pass

        rng = np.random.default_rng(cfg.seed)
        params = random_junction_params(cfg["n"], rng, cfg["mu_max"], cfg["alpha_max"], cfg["beta_span"])
        match crosscheck_transfer(params, setup.experiment, setup.sim):
            case Err(e):
                return Err(e)
            case Ok(rows):
                pass

        band, alpha_min = cfg["band"], cfg["momentum_alpha"]
        table = np.array(
            [
                [
                    r.params.mu,
                    r.params.beta,
                    r.params.alpha,
                    int(r.analytic_stable),
                    int(r.simulated_confined),
                    r.margin,
                    int(r.agree),
                    int(r.in_band(band)),
                    int(r.momentum_excused(alpha_min)),
                    int(r.explained(band, alpha_min)),
                ]
                for r in rows
            ]
        )
        unexplained = sum(not r.explained(band, alpha_min) for r in rows)
        summary = [
            f"agree {sum(r.agree for r in rows)}/{len(rows)}",
            f"boundary band {sum(r.in_band(band) for r in rows)}",
            f"momentum (alpha >= {alpha_min:g}) {sum(r.momentum_excused(alpha_min) for r in rows)}",
            f"unexplained disagreements {unexplained}",
        ]
        csv_path = cfg.output_dir / "crosscheck.csv"
        write_csv(csv_path, "crosscheck", COLUMNS, table, fmt="%.10g", notes=summary)
        if unexplained:
            logger.warning(f"[Crosscheck] {unexplained} disagreement(s) outside the boundary band")
        return Ok(CommandResult(EXIT_OK, summary, [csv_path]))
