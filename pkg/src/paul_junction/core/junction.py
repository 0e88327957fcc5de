"""结转移稳定性 - 单阱条件、转移路径条件、禁区切线判据与三维区域图

路径约定: 转移参数 t ∈ [0, 1]，x 方向经历 (α(1-t) + βt, μt)，
z 方向为静态对 (-α-β, μ)。y 方向经历同一点集的逆序，只需检查一次。
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from rusty_results.prelude import Err, Ok, Result
from scipy.optimize import brentq

from ..config import MAP_CHUNK_CELLS, MAX_WORKERS, PATH_SAMPLES, PATH_T_TOL
from ..logger import logger
from .mathieu import BoundaryCurves, boundary_values, default_boundary_curves, stable_mask
from .validators import DegenerateSlope, FailureHint, OutOfTabulation

Mechanism = Literal["below_a0", "above_a1b1", "axial_unconfined"]
FailingPair = Literal["path", "static"]

# |a₀′| 低于该值时切点位置不可分辨
SLOPE_FLOOR = 1e-12


@dataclass(frozen=True)
class JunctionParams:
    """(μ, β, α)：γ = -α-β 由 Laplace 约束导出，不单独存储"""

    mu: float
    beta: float
    alpha: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.mu, self.beta, self.alpha)):
            raise ValueError(f"Junction parameters must be finite: {self}")

    @property
    def gamma(self) -> float:
        return -self.alpha - self.beta


@dataclass(frozen=True)
class PointCheck:
    label: str
    U: float
    V: float
    stable: bool


@dataclass(frozen=True)
class SimpleStabilityReport:
    point_checks: tuple[PointCheck, ...]
    axial_confined: bool
    stable: bool


@dataclass(frozen=True)
class TransferStabilityReport:
    stable: bool
    first_failure_t: float | None = None
    failing_pair: FailingPair | None = None
    mechanism: Mechanism | None = None


def simple_trap_stable(jp: JunctionParams) -> SimpleStabilityReport:
    """静止于单个线性阱：(α,0)、(β,μ)、(-α-β,μ) 均需在稳定集内，且 α > 0"""
    mu = abs(jp.mu)
    labels = ("x", "y", "z")
    U = np.array([jp.alpha, jp.beta, jp.gamma])
    V = np.array([0.0, mu, mu])
    verdicts = stable_mask(U, V)

    checks = tuple(
        PointCheck(label, float(u), float(v), bool(ok))
        for label, u, v, ok in zip(labels, U, V, verdicts)
    )
    axial = jp.alpha > 0
    return SimpleStabilityReport(
        point_checks=checks,
        axial_confined=axial,
        stable=axial and all(c.stable for c in checks),
    )


def path_points(jp: JunctionParams, t) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    return jp.alpha * (1.0 - t) + jp.beta * t, abs(jp.mu) * t


def path_verdicts(
    jp: JunctionParams, samples: int = PATH_SAMPLES
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """路径上 samples + 1 个等距点（含两端）的 (t, U, V, stable)"""
    t = np.arange(samples + 1) / samples
    U, V = path_points(jp, t)
    return t, U, V, stable_mask(U, V)


def _mechanism(U: float, V: float, curves: BoundaryCurves) -> Mechanism:
    """不稳定点靠近 a₀ 一侧还是 b₁/a₁ 一侧（以第一稳定区中线划分）"""
    if V <= curves.v_max:
        a0, b1 = curves.a0(V), curves.b1(V)
    else:
        values = boundary_values(np.asarray([V]))
        a0, b1 = float(values["a0"][0]), float(values["b1"][0])
    return "below_a0" if U < 0.5 * (a0 + b1) else "above_a1b1"


def _refine_failure(jp: JunctionParams, t_ok: float, t_bad: float, tol: float) -> float:
    while t_bad - t_ok > tol:
        mid = 0.5 * (t_ok + t_bad)
        U, V = path_points(jp, mid)
        if stable_mask(U, V):
            t_ok = mid
        else:
            t_bad = mid
    return t_bad


def transfer_stable(
    jp: JunctionParams,
    samples: int = PATH_SAMPLES,
    curves: BoundaryCurves | None = None,
) -> TransferStabilityReport:
    """转移稳定性：先查轴向约束，再查路径（首个失败点二分到 1e-4），最后查静态对"""
    if samples < 64:
        raise ValueError(f"Path sampling needs >= 64 intervals, got {samples}")
    curves = curves or default_boundary_curves()

    if jp.alpha <= 0:
        return TransferStabilityReport(
            stable=False, first_failure_t=0.0, failing_pair="path", mechanism="axial_unconfined"
        )

    t, U, V, ok = path_verdicts(jp, samples)
    if not ok.all():
        k = int(np.argmax(~ok))
        t_fail = 0.0 if k == 0 else _refine_failure(jp, float(t[k - 1]), float(t[k]), PATH_T_TOL)
        U_f, V_f = path_points(jp, t_fail)
        mechanism = _mechanism(float(U_f), float(V_f), curves)
        logger.debug(f"[Transfer] {jp} fails on path at t={t_fail:.5f} ({mechanism})")
        return TransferStabilityReport(False, t_fail, "path", mechanism)

    mu = abs(jp.mu)
    if not stable_mask(jp.gamma, mu):
        mechanism = _mechanism(jp.gamma, mu, curves)
        logger.debug(f"[Transfer] {jp} fails on static pair ({mechanism})")
        return TransferStabilityReport(False, 0.0, "static", mechanism)

    return TransferStabilityReport(stable=True)


def banned_region_tangency(
    jp: JunctionParams, curves: BoundaryCurves | None = None
) -> Result[bool, FailureHint]:
    """切线判据：路径 U = α + sV（s = (β-α)/μ）是否在 [0, μ] 上穿到 a₀ 之下

    a₀ 是凹函数，U - a₀ 在 a₀′(m) = s 处取最小值；无此切点时最小值在端点。
    """
    curves = curves or default_boundary_curves()
    mu = abs(jp.mu)
    if mu <= 0:
        raise ValueError("Tangency test needs mu != 0")
    if mu > curves.v_max:
        return Err(
            OutOfTabulation(
                f"μ={mu} 超出边界曲线范围 [0, {curves.v_max}]",
                suggestion="改用 transfer_stable 的采样路径判据",
            )
        )
    if jp.alpha <= 0:
        return Ok(True)

    s = (jp.beta - jp.alpha) / mu
    if s >= 0:
        return Ok(False)

    def slope_gap(v: float) -> float:
        return curves.a0_slope(v) - s

    if slope_gap(mu) >= 0:
        # 路径整体比 a₀ 更平缓，最低点在 V = μ
        return Ok(bool(jp.beta < curves.a0(mu)))

    m = brentq(slope_gap, 0.0, mu, xtol=1e-10)
    if abs(curves.a0_slope(m)) < SLOPE_FLOOR:
        return Err(
            DegenerateSlope(
                f"切点 m={m:.3e} 处 a₀′ 退化",
                suggestion="改用 transfer_stable 的采样路径判据",
            )
        )
    return Ok(bool(jp.alpha + s * m < curves.a0(m)))


@dataclass(frozen=True)
class MapAxis:
    """区域图的一个轴：lo == hi 时为单值切片，否则取 cells 个单元中心"""

    lo: float
    hi: float
    cells: int

    def centers(self) -> np.ndarray:
        if self.lo == self.hi:
            return np.array([self.lo])
        step = (self.hi - self.lo) / self.cells
        return self.lo + (np.arange(self.cells) + 0.5) * step


@dataclass(frozen=True, eq=False)
class RegionMap3D:
    """(μ, β, α) 单元中心上的稳定性判定，数组形状 (nμ, nβ, nα)"""

    mu: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    simple_stable: np.ndarray
    transfer_stable: np.ndarray

    @property
    def banned(self) -> np.ndarray:
        return self.simple_stable & ~self.transfer_stable

    def slice_mu(self, index: int) -> dict[str, np.ndarray]:
        return {
            "mu": np.asarray(self.mu[index]),
            "beta": self.beta,
            "alpha": self.alpha,
            "simple_stable": self.simple_stable[index],
            "transfer_stable": self.transfer_stable[index],
            "banned": self.banned[index],
        }

    def rows(self) -> np.ndarray:
        M, B, A = np.meshgrid(self.mu, self.beta, self.alpha, indexing="ij")
        return np.column_stack(
            [
                M.ravel(),
                B.ravel(),
                A.ravel(),
                self.simple_stable.ravel().astype(int),
                self.transfer_stable.ravel().astype(int),
                self.banned.ravel().astype(int),
            ]
        )


def _cell_verdicts(
    mu: np.ndarray, beta: np.ndarray, alpha: np.ndarray, samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """一批单元的 (simple, transfer) 判定，路径与静态对一起向量化"""
    mu = np.abs(mu)
    gamma = -alpha - beta
    axial = alpha > 0

    x_ok = stable_mask(alpha, np.zeros_like(alpha))
    y_ok = stable_mask(beta, mu)
    z_ok = stable_mask(gamma, mu)
    simple = axial & x_ok & y_ok & z_ok

    t = np.arange(samples + 1) / samples
    U = alpha[:, None] * (1.0 - t) + beta[:, None] * t
    V = mu[:, None] * t
    path_ok = stable_mask(U, V).all(axis=1)
    return simple, axial & path_ok & z_ok


def region_map(
    mu_axis: MapAxis,
    beta_axis: MapAxis,
    alpha_axis: MapAxis,
    samples: int = PATH_SAMPLES,
    workers: int = MAX_WORKERS,
    chunk_cells: int = MAP_CHUNK_CELLS,
) -> RegionMap3D:
    """逐单元填充 simple/transfer 判定（按块并行，结果与 workers 无关）"""
    for name, axis in (("mu", mu_axis), ("beta", beta_axis), ("alpha", alpha_axis)):
        if not (math.isfinite(axis.lo) and math.isfinite(axis.hi)):
            raise ValueError(f"Axis {name} range must be finite")
        if axis.lo != axis.hi and axis.cells < 8:
            raise ValueError(f"Axis {name} needs >= 8 cells, got {axis.cells}")

    mu, beta, alpha = mu_axis.centers(), beta_axis.centers(), alpha_axis.centers()
    M, B, A = (g.ravel() for g in np.meshgrid(mu, beta, alpha, indexing="ij"))

    bounds = range(0, M.size, chunk_cells)
    chunks = [(M[i : i + chunk_cells], B[i : i + chunk_cells], A[i : i + chunk_cells]) for i in bounds]

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda c: _cell_verdicts(*c, samples), chunks))

    shape = (mu.size, beta.size, alpha.size)
    simple = np.concatenate([r[0] for r in results]).reshape(shape)
    transfer = np.concatenate([r[1] for r in results]).reshape(shape)

    logger.info(
        f"[RegionMap] {M.size} cells: {int(simple.sum())} simple-stable, "
        f"{int(transfer.sum())} transfer-stable, {int((simple & ~transfer).sum())} banned"
    )
    return RegionMap3D(mu, beta, alpha, simple, transfer)
