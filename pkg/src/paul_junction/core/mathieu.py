"""Mathieu 方程稳定性 - Hill 行列式、Floquet 单值矩阵与边界曲线

方程约定: q'' + (U + 2V cos 2t) q = 0，驱动周期为 π。
所有判据关于 V 是偶函数，内部统一使用 |V|。
"""

import functools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from filelock import FileLock
from rusty_results.prelude import Err, Ok, Result

from .. import file_manager
from ..config import (
    BISECTION_U_TOL,
    BOUNDARY_KNOTS,
    BOUNDARY_SCAN_STEP,
    BOUNDARY_V_MAX,
    FLOQUET_STEPS,
    HILL_TAIL_TERMS,
    HILL_TRUNCATION,
    POLE_TOL,
    STABILITY_TOL,
)
from ..logger import logger
from .validators import FailureHint, OutOfTabulation, PoleProximity

CurveName = Literal["a0", "a1", "b1"]


@dataclass(frozen=True)
class MathieuParams:
    """(U, V) 参数点：U 为静态系数，V 为 RF 系数"""

    U: float
    V: float


@dataclass(frozen=True)
class StabilityResult:
    """稳定性判定结果

    hill_det 为 None 表示该点位于 Δ(0) 极点附近，结论来自 Floquet 判据。
    """

    stable: bool
    w: complex
    hill_det: float | None
    cos_arg: float


@dataclass(frozen=True)
class FloquetResult:
    monodromy_trace: float
    stable: bool


def _pole_band(U: np.ndarray, N: int, pole_tol: float) -> np.ndarray:
    # 只需比较两侧最近的偶数平方 r² = 4k², k ≤ N
    half_root = np.sqrt(np.clip(U, 0.0, None)) / 2.0
    k_lo = np.minimum(np.floor(half_root), N)
    k_hi = np.minimum(k_lo + 1.0, N)
    dist = np.minimum(np.abs(U - 4.0 * k_lo**2), np.abs(U - 4.0 * k_hi**2))
    return dist < pole_tol


def _hill_tail(U: np.ndarray, V: np.ndarray, N: int, terms: int = HILL_TAIL_TERMS) -> np.ndarray:
    """截断外各行的对数修正因子 log Π_{|r|>2N} (1 - ζ_r ζ_{r∓2})

    外侧一行的贡献为 ζ_{2m} ζ_{2m-2} ≈ V²/(16 m²(m-1)²)；前 terms 行显式求和，
    其余按 Σ_{m>M} 1/(m(m-1))² ≈ 1/(3M³) 取积分余项。两侧对称，结果乘 2。
    忽略的是 (V²/16N⁴)² 量级的二阶项。
    """
    m = np.arange(N + 1, N + terms + 1, dtype=float)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = V**2 / ((4.0 * m**2 - U) * (4.0 * (m - 1.0) ** 2 - U))
        last = float(N + terms)
        remainder = V**2 / (48.0 * last**3)
        return 2.0 * (np.log1p(-t).sum(axis=0) - remainder)


def _hill_recurrence(U: np.ndarray, V: np.ndarray, N: int) -> np.ndarray:
    """截断三对角行列式的三项递推（r = -2N, ..., 2N 取偶数），乘以截断外的尾部修正

    第 k 行: ζ_r c_{r-2} + c_r + ζ_r c_{r+2}，ζ_r = V / (r² - U)。
    D_k = D_{k-1} - ζ_{r_k} ζ_{r_{k-1}} D_{k-2}
    """
    rows = np.arange(-2 * N, 2 * N + 1, 2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta_prev = V / (rows[0] ** 2 - U)
        d_prev2 = np.ones_like(U)
        d_prev = np.ones_like(U)
        for r in rows[1:]:
            zeta = V / (r**2 - U)
            d_prev2, d_prev = d_prev, d_prev - zeta * zeta_prev * d_prev2
            zeta_prev = zeta
    return d_prev * np.exp(_hill_tail(U, V, N))


def floquet_trace(U, V, steps: int = FLOQUET_STEPS) -> np.ndarray:
    """单值矩阵的迹（向量化 RK4，同时积分两个基本解，一个周期 π）"""
    U, V = np.broadcast_arrays(np.asarray(U, dtype=float), np.abs(np.asarray(V, dtype=float)))
    h = math.pi / steps

    # y[0], p[0]: 初值 (1, 0)；y[1], p[1]: 初值 (0, 1)
    y = np.stack([np.ones_like(U), np.zeros_like(U)])
    p = np.stack([np.zeros_like(U), np.ones_like(U)])

    for k in range(steps):
        t = k * h
        c0 = U + 2.0 * V * math.cos(2.0 * t)
        c_half = U + 2.0 * V * math.cos(2.0 * (t + 0.5 * h))
        c1 = U + 2.0 * V * math.cos(2.0 * (t + h))

        k1y, k1p = p, -c0 * y
        k2y, k2p = p + 0.5 * h * k1p, -c_half * (y + 0.5 * h * k1y)
        k3y, k3p = p + 0.5 * h * k2p, -c_half * (y + 0.5 * h * k2y)
        k4y, k4p = p + h * k3p, -c1 * (y + h * k3y)

        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)

    # M = [[y1(π), y2(π)], [p1(π), p2(π)]]
    return y[0] + p[1]


def classify(
    U,
    V,
    N: int = HILL_TRUNCATION,
    pole_tol: float = POLE_TOL,
    tol: float = STABILITY_TOL,
    steps: int = FLOQUET_STEPS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """向量化稳定性判定

    Returns:
        (stable, cos_arg, hill_det)；极点带内 hill_det 为 nan，cos_arg 取 Floquet 迹的一半
    """
    U, V = np.broadcast_arrays(np.asarray(U, dtype=float), np.abs(np.asarray(V, dtype=float)))
    shape = U.shape
    U = U.ravel()
    V = V.ravel()

    near = _pole_band(U, N, pole_tol)
    hill_det = np.full(U.shape, np.nan)
    cos_arg = np.empty(U.shape)

    far = ~near
    if far.any():
        det = _hill_recurrence(U[far], V[far], N)
        hill_det[far] = det
        cos_pi_sqrt = np.cos(np.pi * np.sqrt(U[far] + 0j)).real
        cos_arg[far] = 1.0 - det * (1.0 - cos_pi_sqrt)

    if near.any():
        logger.debug(f"[Hill] {int(near.sum())} point(s) in pole band, using Floquet trace")
        cos_arg[near] = 0.5 * floquet_trace(U[near], V[near], steps)

    stable = np.abs(cos_arg) <= 1.0 + tol
    return stable.reshape(shape), cos_arg.reshape(shape), hill_det.reshape(shape)


def stable_mask(U, V, **kwargs) -> np.ndarray:
    """只返回稳定性布尔数组"""
    return classify(U, V, **kwargs)[0]


def hill_determinant(
    p: MathieuParams, N: int = HILL_TRUNCATION, pole_tol: float = POLE_TOL
) -> Result[float, FailureHint]:
    """Δ(0)：截断 (2N+1) 阶三对角 Hill 行列式，截断外的行以尾部因子补回"""
    if N < 5:
        raise ValueError(f"Truncation order must be >= 5, got {N}")

    U = np.asarray([p.U], dtype=float)
    if _pole_band(U, N, pole_tol)[0]:
        r = 2 * round(math.sqrt(max(p.U, 0.0)) / 2)
        return Err(
            PoleProximity(
                f"U={p.U} 距离极点 r²={r * r} 小于 {pole_tol}",
                suggestion="改用 floquet_stable 判定该点",
            )
        )
    det = _hill_recurrence(U, np.asarray([abs(p.V)], dtype=float), N)
    return Ok(float(det[0]))


def _exponent_from_cos(cos_arg: float, U: float) -> complex:
    """由 cos(πw) 求 w，取与 V=0 时 w=√U 连续的分支"""
    w0 = complex(np.arccos(complex(cos_arg))) / math.pi
    target = complex(np.sqrt(complex(U))).real

    k1 = round((target - w0.real) / 2.0)
    k2 = round((target + w0.real) / 2.0)
    cand1 = 2 * k1 + w0
    cand2 = 2 * k2 - w0
    w = cand1 if abs(cand1.real - target) <= abs(cand2.real - target) else cand2
    return complex(w.real, abs(w.imag))


def real_exponent(cos_arg, U, tol: float = STABILITY_TOL) -> np.ndarray:
    """_exponent_from_cos 的向量化版本，只给稳定点的实 w（不稳定点为 nan）"""
    c = np.asarray(cos_arg, dtype=float)
    U = np.asarray(U, dtype=float)
    w0 = np.arccos(np.clip(c, -1.0, 1.0)) / math.pi
    target = np.sqrt(np.maximum(U, 0.0))
    cand1 = 2.0 * np.round((target - w0) / 2.0) + w0
    cand2 = 2.0 * np.round((target + w0) / 2.0) - w0
    w = np.where(np.abs(cand1 - target) <= np.abs(cand2 - target), cand1, cand2)
    return np.where(np.abs(c) <= 1.0 + tol, w, np.nan)


def characteristic_exponent(p: MathieuParams) -> StabilityResult:
    """特征指数 w：cos πw = 1 - Δ(0)(1 - cos π√U)

    双曲形式 cosh π√U 按虚宗量 i√U 求值（等价于 cos π√U，U < 0 时为 cosh π√|U|）。
    极点带内由 Floquet 判据给出结论，hill_det 标记为不可用。
    """
    stable, cos_arg, hill_det = classify(np.asarray([p.U]), np.asarray([p.V]))
    c = float(cos_arg[0])
    is_stable = bool(stable[0])

    # 容差内的边界点按实数 w 处理
    w = _exponent_from_cos(max(-1.0, min(1.0, c)) if is_stable else c, p.U)
    if is_stable:
        w = complex(w.real, 0.0)

    det = float(hill_det[0])
    return StabilityResult(
        stable=is_stable,
        w=w,
        hill_det=None if math.isnan(det) else det,
        cos_arg=c,
    )


def floquet_stable(p: MathieuParams, steps: int = FLOQUET_STEPS) -> FloquetResult:
    """单值矩阵判据：|tr M| ≤ 2 为稳定"""
    if steps < 64:
        raise ValueError(f"Floquet integration needs >= 64 steps per period, got {steps}")
    trace = float(floquet_trace(np.asarray([p.U]), np.asarray([p.V]), steps)[0])
    return FloquetResult(
        monodromy_trace=trace,
        stable=abs(trace) <= 2.0 + 2.0 * STABILITY_TOL,
    )


def _scan_first_change(
    start: np.ndarray,
    V: np.ndarray,
    step: float,
    n_steps: int,
    want_stable: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """从 start 出发按 step 扫描，返回首个判定为 want_stable 的点及其前一点"""
    k = np.arange(n_steps + 1, dtype=float)
    grid = start[:, None] + step * k[None, :]
    verdict = stable_mask(grid, np.broadcast_to(V[:, None], grid.shape))
    hit = verdict if want_stable else ~verdict
    hit[:, 0] = False

    found = hit.any(axis=1)
    idx = np.argmax(hit, axis=1)
    rows = np.arange(len(start))
    at = np.where(found, grid[rows, idx], np.nan)
    before = np.where(found, grid[rows, np.maximum(idx - 1, 0)], np.nan)
    return at, before


def _bisect(
    stable_end: np.ndarray, unstable_end: np.ndarray, V: np.ndarray, tol: float
) -> np.ndarray:
    a, b = stable_end.copy(), unstable_end.copy()
    while np.nanmax(np.abs(b - a), initial=0.0) > tol:
        mid = 0.5 * (a + b)
        ok = stable_mask(mid, V)
        a = np.where(ok, mid, a)
        b = np.where(ok, b, mid)
    return 0.5 * (a + b)


def boundary_values(
    V, step: float = BOUNDARY_SCAN_STEP, tol: float = BISECTION_U_TOL
) -> dict[str, np.ndarray]:
    """沿 U 轴扫描 + 二分，求每个 V 上的 a₀, b₁, a₁

    - a₀：第一稳定区下沿（V=0 截距 0）
    - b₁：第一稳定区上沿，a₁：第二稳定区下沿（V=0 截距都为 1，约定 b₁ ≤ a₁）
    U = 1 对任意 V > 0 都位于 b₁ 与 a₁ 之间的不稳定带内，作为 b₁/a₁ 扫描起点。
    """
    V = np.abs(np.atleast_1d(np.asarray(V, dtype=float)))
    a0 = np.zeros_like(V)
    b1 = np.ones_like(V)
    a1 = np.ones_like(V)

    # U=1 在容差内判为稳定时不稳定带窄于判定分辨率，取截距
    active = (V > 0) & ~stable_mask(np.ones_like(V), V)
    if active.any():
        Va = V[active]

        start = -2.0 * Va - 0.05
        n_steps = int(math.ceil((1.05 - start.min()) / step))
        at, before = _scan_first_change(start, Va, step, n_steps, want_stable=True)
        a0[active] = _bisect(at, before, Va, tol)

        n_band = int(math.ceil((1.0 - a0[active].min()) / step)) + 1
        at, before = _scan_first_change(np.ones_like(Va), Va, -step, n_band, want_stable=True)
        b1[active] = _bisect(at, before, Va, tol)

        n_up = int(math.ceil(Va.max() / step)) + 2
        at, before = _scan_first_change(np.ones_like(Va), Va, step, n_up, want_stable=True)
        a1[active] = _bisect(at, before, Va, tol)

    for name, values in (("a0", a0), ("b1", b1), ("a1", a1)):
        if np.isnan(values).any():
            logger.warning(f"[Boundary] {name}: no transition found for {int(np.isnan(values).sum())} V value(s)")
    return {"a0": a0, "b1": b1, "a1": a1}


def boundary_curve(
    name: CurveName, V: float, v_max: float = BOUNDARY_V_MAX
) -> Result[float, FailureHint]:
    """单点边界曲线值（U 分辨率 1e-6）"""
    if abs(V) > v_max:
        return Err(
            OutOfTabulation(
                f"V={V} 超出边界曲线范围 [0, {v_max}]",
                suggestion="减小 V 或增大 BOUNDARY_V_MAX",
            )
        )
    values = boundary_values(np.asarray([V]))
    U = float(values[name][0])
    logger.debug(f"[Boundary] {name}({V}) = {U:.7f}")
    return Ok(U)


class BoundaryCurves:
    """a₀, a₁, b₁ 的制表与线性插值（构造后只读）"""

    def __init__(self, V: np.ndarray, a0: np.ndarray, a1: np.ndarray, b1: np.ndarray):
        self._V = self._frozen(V)
        self._a0 = self._frozen(a0)
        self._a1 = self._frozen(a1)
        self._b1 = self._frozen(b1)
        self._a0_slope = self._frozen(np.gradient(self._a0, self._V, edge_order=2))

    @staticmethod
    def _frozen(values: np.ndarray) -> np.ndarray:
        array = np.array(values, dtype=float)
        array.flags.writeable = False
        return array

    @property
    def knots(self) -> np.ndarray:
        return self._V

    @property
    def v_max(self) -> float:
        return float(self._V[-1])

    def _interp(self, table: np.ndarray, V):
        result = np.interp(np.abs(V), self._V, table)
        return float(result) if np.ndim(result) == 0 else result

    def a0(self, V):
        return self._interp(self._a0, V)

    def a1(self, V):
        return self._interp(self._a1, V)

    def b1(self, V):
        return self._interp(self._b1, V)

    def a0_slope(self, V):
        """a₀′(V)（节点上的中心差分再线性插值；对 V 取偶延拓时按 |V| 计算）"""
        return self._interp(self._a0_slope, V)

    def table(self) -> dict[str, np.ndarray]:
        return {"V": self._V, "a0": self._a0, "a1": self._a1, "b1": self._b1}

    @classmethod
    def tabulate(
        cls, knots: int = BOUNDARY_KNOTS, v_max: float = BOUNDARY_V_MAX
    ) -> "BoundaryCurves":
        V = np.linspace(0.0, v_max, knots)
        values = boundary_values(V)
        logger.info(f"[Boundary] Tabulated a0/a1/b1 on {knots} knots over V in [0, {v_max}]")
        return cls(V, values["a0"], values["a1"], values["b1"])


def region_label(U, V, curves: BoundaryCurves) -> np.ndarray:
    """点相对边界曲线的位置：below_a0 / first / band_b1_a1 / second"""
    U = np.asarray(U, dtype=float)
    V = np.abs(np.asarray(V, dtype=float))
    in_table = V <= curves.v_max

    a0 = np.where(in_table, curves.a0(V), np.nan)
    b1 = np.where(in_table, curves.b1(V), np.nan)
    a1 = np.where(in_table, curves.a1(V), np.nan)
    if not np.all(in_table):
        outside = boundary_values(V[~in_table])
        a0[~in_table] = outside["a0"]
        b1[~in_table] = outside["b1"]
        a1[~in_table] = outside["a1"]

    return np.select(
        [U < a0, U <= b1, U < a1],
        ["below_a0", "first", "band_b1_a1"],
        default="second",
    )


def load_boundary_curves(
    knots: int = BOUNDARY_KNOTS, v_max: float = BOUNDARY_V_MAX
) -> BoundaryCurves:
    """读取或生成边界曲线制表（缓存在按参数哈希命名的目录中）"""
    key = (
        f"boundary-curves|knots={knots}|vmax={v_max}|N={HILL_TRUNCATION}|tail={HILL_TAIL_TERMS}"
        f"|steps={FLOQUET_STEPS}|scan={BOUNDARY_SCAN_STEP}|tol={BISECTION_U_TOL}"
    )
    cache_dir = file_manager.ensure_dir(file_manager.get_cache_dir(key))
    cache_file = cache_dir / "boundary_curves.npz"

    with FileLock(str(cache_dir / "boundary_curves.lock")):
        if cache_file.exists():
            try:
                with np.load(cache_file) as data:
                    return BoundaryCurves(data["V"], data["a0"], data["a1"], data["b1"])
            except (OSError, KeyError, ValueError) as e:
                logger.warning(f"[Boundary] Cache unreadable, regenerating: {e}")

        curves = BoundaryCurves.tabulate(knots, v_max)
        np.savez(cache_file, **curves.table())
        logger.info(f"[Boundary] Cached tabulation at {cache_file}")
        return curves


@functools.lru_cache(maxsize=1)
def default_boundary_curves() -> BoundaryCurves:
    return load_boundary_curves()
