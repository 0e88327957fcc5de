"""规则三维网格上的单位电压电势、Catmull-Rom 插值、文件读写与场叠加

网格数组按行主序存储，索引 [i, j, k] 对应 (x, y, z)，z 变化最快。
梯度取插值函数的解析导数，因此采样得到的场严格是采样势的梯度。
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rusty_results.prelude import Err, Ok, Result
from scipy.optimize import minimize_scalar

from ..file_manager import read_file, write_file
from ..logger import logger
from .potential import TransferProfile, rf_amplitude_for_mu, transfer_profile_eval
from .validators import (
    FailureHint,
    GeometryError,
    GridMismatch,
    OutOfDomain,
)

GRID_FILE_HEADER = "# paul-junction field grid v1"
LAYERS = ("bottom", "top")
ROLES = ("rf", "control")


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """每个电极施加 1 V（其余接地）时的电势采样，长度单位 µm"""

    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple[int, int, int]
    potentials: dict[str, np.ndarray]
    roles: dict[str, str]
    layers: dict[str, str]
    plane_half_gap: float
    image_order: int = 0
    convergence: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 4:
            raise ValueError(f"Catmull-Rom sampling needs >= 4 points per axis, got {self.dims}")
        if np.any(np.asarray(self.spacing) <= 0):
            raise ValueError(f"Grid spacing must be positive, got {self.spacing}")
        for name, values in self.potentials.items():
            if values.shape != tuple(self.dims):
                raise ValueError(f"Electrode {name}: samples {values.shape} do not match dims {self.dims}")
            if self.roles.get(name) not in ROLES or self.layers.get(name) not in LAYERS:
                raise ValueError(f"Electrode {name} needs a role in {ROLES} and a layer in {LAYERS}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.potentials)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.dims[i])

    def interior_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """4×4×4 模板不越界的采样区域"""
        dims = np.asarray(self.dims)
        return self.origin + self.spacing, self.origin + (dims - 2) * self.spacing

    def electrodes_where(self, layer: str | None = None, role: str | None = None) -> list[str]:
        return [
            name
            for name in self.names
            if (layer is None or self.layers[name] == layer) and (role is None or self.roles[name] == role)
        ]

    def same_lattice(self, other: "FieldGrid") -> bool:
        return (
            tuple(self.dims) == tuple(other.dims)
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.spacing, other.spacing)
        )

    def stack(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else names
        return np.stack([self.potentials[n] for n in names])


@dataclass(frozen=True)
class SampledField:
    potential: float
    gradient: tuple[float, float, float]


def _catmull_rom_weights(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """4 点 Catmull-Rom 基函数及其导数，t ∈ [0, 1] 位于第 2、3 个节点之间"""
    t2 = t * t
    t3 = t2 * t
    w = np.stack(
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        axis=-1,
    )
    dw = np.stack(
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
        axis=-1,
    )
    return w, dw


def sample_stack(
    grid: FieldGrid, values: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """对一组电极数组 values (E, nx, ny, nz) 在 points (n, 3) 处做三次 Catmull-Rom 插值

    Returns:
        (potential (E, n), gradient (E, n, 3), valid (n,))；valid 为 False 的点结果无意义
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dims = np.asarray(grid.dims)
    u = (points - grid.origin) / grid.spacing
    valid = np.all((u >= 1.0) & (u <= dims - 2), axis=1)

    cell = np.clip(np.floor(u).astype(int), 1, dims - 3)
    t = np.where(valid[:, None], u - cell, 0.0)

    wx, dwx = _catmull_rom_weights(t[:, 0])
    wy, dwy = _catmull_rom_weights(t[:, 1])
    wz, dwz = _catmull_rom_weights(t[:, 2])

    offsets = np.arange(-1, 3)
    ix = cell[:, 0, None] + offsets
    iy = cell[:, 1, None] + offsets
    iz = cell[:, 2, None] + offsets
    P = values[:, ix[:, :, None, None], iy[:, None, :, None], iz[:, None, None, :]]

    potential = np.einsum("enabc,na,nb,nc->en", P, wx, wy, wz)
    gradient = np.stack(
        [
            np.einsum("enabc,na,nb,nc->en", P, dwx, wy, wz) / grid.spacing[0],
            np.einsum("enabc,na,nb,nc->en", P, wx, dwy, wz) / grid.spacing[1],
            np.einsum("enabc,na,nb,nc->en", P, wx, wy, dwz) / grid.spacing[2],
        ],
        axis=-1,
    )
    return potential, gradient, valid


def catmull_rom_sample(grid: FieldGrid, electrode: str, point) -> Result[SampledField, FailureHint]:
    """单个电极在单点处的插值电势与梯度"""
    if electrode not in grid.potentials:
        return Err(GridMismatch(f"网格中没有电极 {electrode}", suggestion=f"可用电极: {', '.join(grid.names)}"))

    phi, grad, valid = sample_stack(grid, grid.potentials[electrode][None], np.asarray(point)[None])
    if not valid[0]:
        lo, hi = grid.interior_bounds()
        return Err(
            OutOfDomain(
                f"采样点 {tuple(point)} 超出插值区域 {tuple(lo)} – {tuple(hi)}",
                suggestion="采样点需距网格边界至少一个网格单元",
            )
        )
    return Ok(SampledField(float(phi[0, 0]), tuple(float(g) for g in grad[0, 0])))


def save_field_grid(grid: FieldGrid, path: Path) -> None:
    """文本格式：头部 + 每个电极一个数值块（%.17g，读回逐位一致）"""
    lines = [
        GRID_FILE_HEADER,
        "dims " + " ".join(str(n) for n in grid.dims),
        "origin " + " ".join(f"{v:.17g}" for v in grid.origin),
        "spacing " + " ".join(f"{v:.17g}" for v in grid.spacing),
        f"plane_half_gap {grid.plane_half_gap:.17g}",
        f"image_order {grid.image_order}",
    ]
    for name in grid.names:
        lines.append(f"electrode {name} {grid.roles[name]} {grid.layers[name]}")

    nz = grid.dims[2]
    for name in grid.names:
        lines.append(f"data {name}")
        rows = grid.potentials[name].reshape(-1, nz)
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in rows)

    write_file(path, "\n".join(lines) + "\n")
    logger.info(f"[FieldGrid] Saved {len(grid.names)} electrode(s) on {grid.dims} to {path}")


def load_field_grid(path: Path) -> Result[FieldGrid, FailureHint]:
    if not path.is_file():
        return Err(GridMismatch(f"网格文件不存在: {path}", suggestion="使用 fieldgen 命令生成网格"))
    lines = read_file(path).splitlines()
    if not lines or lines[0] != GRID_FILE_HEADER:
        return Err(GridMismatch(f"{path} 不是网格文件", suggestion="使用 fieldgen 命令生成网格"))

    header: dict[str, list[str]] = {}
    roles: dict[str, str] = {}
    layers: dict[str, str] = {}
    blocks: dict[str, list[str]] = {}
    current: str | None = None
    try:
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            if key == "electrode":
                name, role, layer = rest.split()
                roles[name], layers[name] = role, layer
            elif key == "data":
                current = rest.strip()
                blocks[current] = []
            elif current is not None:
                blocks[current].append(line)
            else:
                header[key] = rest.split()

        dims = tuple(int(n) for n in header["dims"])
        potentials = {
            name: np.array(" ".join(blocks[name]).split(), dtype=float).reshape(dims) for name in roles
        }
        grid = FieldGrid(
            origin=np.array(header["origin"], dtype=float),
            spacing=np.array(header["spacing"], dtype=float),
            dims=dims,  # type: ignore[arg-type]
            potentials=potentials,
            roles=roles,
            layers=layers,
            plane_half_gap=float(header["plane_half_gap"][0]),
            image_order=int(header["image_order"][0]),
        )
    except (KeyError, ValueError) as e:
        logger.warning(f"[FieldGrid] Malformed grid file {path}: {e}")
        return Err(GridMismatch(f"网格文件格式错误: {e}"))
    return Ok(grid)


class GridField:
    """按电压与 f(t) 加权叠加的网格场

    电极权重: 电压 × (下层 1-f / 上层 f) × (RF 电极再乘 cos 2τ)。
    voltages 为 (m, E) 矩阵，m = 1 时所有点共用，否则每条轨迹一行。
    """

    def __init__(self, grid: FieldGrid, voltages: np.ndarray, profile: TransferProfile):
        self.grid = grid
        self.profile = profile
        self._values = grid.stack()
        self._voltages = np.atleast_2d(np.asarray(voltages, dtype=float))
        self._top = np.array([grid.layers[n] == "top" for n in grid.names])
        self._rf = np.array([grid.roles[n] == "rf" for n in grid.names])

    def weights(self, tau: float, which: np.ndarray | None = None) -> np.ndarray:
        f = transfer_profile_eval(self.profile, tau)
        layer = np.where(self._top, f, 1.0 - f)
        role = np.where(self._rf, math.cos(2.0 * tau), 1.0)
        volts = self._voltages if which is None or len(self._voltages) == 1 else self._voltages[which]
        return volts * (layer * role)

    def sample(
        self, points: np.ndarray, tau: float, which: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(potential (n,), gradient (n, 3), valid (n,))，单位 V 与 V/µm"""
        phi, grad, valid = sample_stack(self.grid, self._values, points)
        w = self.weights(tau, which)
        if w.shape[0] == 1:
            w = np.broadcast_to(w, (phi.shape[1], w.shape[1]))
        return np.einsum("en,ne->n", phi, w), np.einsum("enk,ne->nk", grad, w), valid

    def __call__(self, point, t: float) -> Result[SampledField, FailureHint]:
        phi, grad, valid = self.sample(np.asarray(point, dtype=float)[None], t)
        if not valid[0]:
            return Err(OutOfDomain(f"采样点 {tuple(point)} 超出插值区域"))
        return Ok(SampledField(float(phi[0]), tuple(float(g) for g in grad[0])))


def superpose(
    grids: Sequence[FieldGrid],
    voltages: Mapping[str, float] | Sequence[Mapping[str, float]],
    profile: TransferProfile,
) -> Result[GridField, FailureHint]:
    """合并共享网格的多个 FieldGrid，按电压与 f(t) 叠加（未给出电压的电极取 0 V）"""
    if not grids:
        return Err(GridMismatch("至少需要一个网格"))
    base = grids[0]
    for other in grids[1:]:
        if not base.same_lattice(other):
            return Err(
                GridMismatch(
                    "网格原点、步长或尺寸不一致",
                    suggestion="用相同的网格参数重新生成各电极网格",
                )
            )

    potentials: dict[str, np.ndarray] = {}
    roles: dict[str, str] = {}
    layers: dict[str, str] = {}
    for g in grids:
        for name in g.names:
            if name in potentials:
                return Err(GridMismatch(f"电极 {name} 在多个网格中重复出现"))
            potentials[name] = g.potentials[name]
            roles[name], layers[name] = g.roles[name], g.layers[name]

    merged = FieldGrid(
        origin=base.origin,
        spacing=base.spacing,
        dims=base.dims,
        potentials=potentials,
        roles=roles,
        layers=layers,
        plane_half_gap=base.plane_half_gap,
        image_order=base.image_order,
    )

    rows = [voltages] if isinstance(voltages, Mapping) else list(voltages)
    unknown = sorted({k for row in rows for k in row} - set(potentials))
    if unknown:
        return Err(GridMismatch(f"未知电极: {', '.join(unknown)}"))
    matrix = np.array([[row.get(name, 0.0) for name in merged.names] for row in rows])
    return Ok(GridField(merged, matrix, profile))


@dataclass(frozen=True)
class NullReport:
    layer: str
    z: float
    height: float
    gradient_norm: float
    degenerate: bool


def _rf_gradient_along(grid: FieldGrid, layer: str, z: np.ndarray) -> np.ndarray:
    names = grid.electrodes_where(layer=layer, role="rf")
    points = np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
    _, grad, _ = sample_stack(grid, grid.stack(names), points)
    return grad.sum(axis=0)


def find_rf_null(grid: FieldGrid, layer: str = "bottom", scan_points: int = 201) -> Result[NullReport, FailureHint]:
    """沿结轴 (x = y = 0) 最小化单位电压 RF 场的模，定位 RF 零点

    场模在整段上没有明显下凹（最小值贴边或与中位数同量级）时标记为退化。
    """
    if not grid.electrodes_where(layer=layer, role="rf"):
        return Err(GeometryError(f"{layer} 层没有 RF 电极", suggestion="检查电极布局中的 role 字段"))

    lo, hi = grid.interior_bounds()
    for i in (0, 1):
        if not lo[i] <= 0.0 <= hi[i]:
            return Err(GeometryError("网格不包含结轴 x = y = 0"))

    z = np.linspace(lo[2], hi[2], scan_points)
    norms = np.linalg.norm(_rf_gradient_along(grid, layer, z), axis=1)
    k = int(np.argmin(norms))
    bracket = (z[max(k - 1, 0)], z[min(k + 1, scan_points - 1)])

    def objective(zz: float) -> float:
        return float(np.sum(_rf_gradient_along(grid, layer, np.array([zz])) ** 2))

    result = minimize_scalar(objective, bounds=bracket, method="bounded", options={"xatol": 1e-6})
    z_null = float(result.x)
    norm = math.sqrt(objective(z_null))

    at_edge = k in (0, scan_points - 1)
    degenerate = at_edge or norm > 1e-3 * float(np.median(norms))
    height = z_null + grid.plane_half_gap if layer == "bottom" else grid.plane_half_gap - z_null

    if degenerate:
        logger.warning(f"[NullFind] {layer}: no RF minimum along the junction axis (|E|={norm:.3e})")
    else:
        logger.info(f"[NullFind] {layer}: null at z={z_null:.4f} µm, {height:.4f} µm from the surface")
    return Ok(NullReport(layer, z_null, height, norm, degenerate))


def _hessian_diag(grid: FieldGrid, values: np.ndarray, point: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """插值梯度的中心差分给出 (梯度 (E, 3), 二阶导对角 (E, 3))"""
    delta = 0.25 * grid.spacing
    stencil = [point]
    for i in range(3):
        step = np.zeros(3)
        step[i] = delta[i]
        stencil.extend([point + step, point - step])
    _, grad, _ = sample_stack(grid, values, np.array(stencil))

    diag = np.stack(
        [(grad[:, 1 + 2 * i, i] - grad[:, 2 + 2 * i, i]) / (2.0 * delta[i]) for i in range(3)],
        axis=-1,
    )
    return grad[:, 0, :], diag


def rf_curvature(grid: FieldGrid, layer: str, null_z: float) -> float:
    """每伏 RF 电压在零点处的曲率 κ：φ ≈ κ(Z² - r⊥²)，r⊥ 为该层的横向轴"""
    names = grid.electrodes_where(layer=layer, role="rf")
    values = grid.stack(names).sum(axis=0)[None]
    _, diag = _hessian_diag(grid, values, np.array([0.0, 0.0, null_z]))
    transverse = 1 if layer == "bottom" else 0
    return float((diag[0, 2] - diag[0, transverse]) / 4.0)


@dataclass(frozen=True)
class ControlSolution:
    voltages: dict[str, float]
    residual: float


def solve_control_voltages(
    grid: FieldGrid,
    layer: str,
    null_z: float,
    alpha: float,
    beta: float,
    energy_scale: float,
) -> Result[ControlSolution, FailureHint]:
    """最小二乘求该层控制电极电压：零点处电场为零，曲率为 2αE₀（轴向）与 2βE₀（横向）

    下层轴向为 x；上层经旋转反射后轴向为 y。
    """
    names = grid.electrodes_where(layer=layer, role="control")
    if len(names) < 3:
        return Err(
            GeometryError(
                f"{layer} 层控制电极不足（{len(names)} 个）",
                suggestion="至少需要三个独立的控制电极",
            )
        )

    grad, diag = _hessian_diag(grid, grid.stack(names), np.array([0.0, 0.0, null_z]))
    axial, transverse = (0, 1) if layer == "bottom" else (1, 0)

    # 曲率行乘以网格步长，与电场行量纲一致
    ell = float(np.min(grid.spacing))
    A = np.vstack([grad.T, ell * diag[:, axial], ell * diag[:, transverse]])
    b = np.array([0.0, 0.0, 0.0, ell * 2.0 * alpha * energy_scale, ell * 2.0 * beta * energy_scale])

    solution, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < 3:
        return Err(GeometryError(f"{layer} 层控制电极线性相关（秩 {rank}）"))

    residual = float(np.linalg.norm(A @ solution - b))
    logger.debug(f"[Control] {layer} alpha={alpha} beta={beta}: residual {residual:.3e}")
    return Ok(ControlSolution(dict(zip(names, map(float, solution))), residual))


@dataclass(frozen=True, eq=False)
class GridTrapModel:
    """网格模型的零点、RF 曲率与 (μ, α, β) → 电极电压的映射"""

    grid: FieldGrid
    nulls: dict[str, NullReport]
    kappa: float

    @classmethod
    def build(cls, grid: FieldGrid) -> Result["GridTrapModel", FailureHint]:
        nulls: dict[str, NullReport] = {}
        for layer in LAYERS:
            match find_rf_null(grid, layer):
                case Err(e):
                    return Err(e)
                case Ok(report) if report.degenerate:
                    return Err(GeometryError(f"{layer} 层没有 RF 零点", suggestion="检查电极布局"))
                case Ok(report):
                    nulls[layer] = report
        kappa = rf_curvature(grid, "bottom", nulls["bottom"].z)
        return Ok(cls(grid, nulls, kappa))

    def voltages(
        self, mu: float, alpha: float, beta: float, energy_scale: float
    ) -> Result[dict[str, float], FailureHint]:
        rf_volts = rf_amplitude_for_mu(mu, self.kappa, energy_scale)
        result = {name: rf_volts for name in self.grid.electrodes_where(role="rf")}
        for layer in LAYERS:
            match solve_control_voltages(self.grid, layer, self.nulls[layer].z, alpha, beta, energy_scale):
                case Err(e):
                    return Err(e)
                case Ok(solution):
                    result.update(solution.voltages)
        return Ok(result)
