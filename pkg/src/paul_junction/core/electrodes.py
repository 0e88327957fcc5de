"""矩形电极解析模型 - 无缝平面近似 + 对面接地平面的镜像级数

单层解：接地平面上的矩形电极（1 V）在高度 h 处的电势为其立体角 / 2π。
两层之间：另一层视作接地平面，交替镜像级数
    φ = Σ_{n=0}^{K} [φ₁(h + 2nd) - φ₁(2(n+1)d - h)]
截断后的剩余部分用积分近似补齐（对全平面电极给出精确的线性解）。
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from rusty_results.prelude import Err, Ok, Result

from ..config import (
    DEFAULT_GRID_BOX_UM,
    DEFAULT_GRID_DIMS,
    IMAGE_ORDER,
    MAX_WORKERS,
    PLANE_SEPARATION_UM,
)
from ..logger import logger
from .field_grid import FieldGrid
from .validators import FailureHint, GeometryError

Layer = Literal["bottom", "top"]
Role = Literal["rf", "control"]


@dataclass(frozen=True)
class Rect:
    """平面内的矩形 [x1, x2] × [y1, y2]（µm）"""

    x1: float
    x2: float
    y1: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"Degenerate rectangle: {self}")

    def rotoreflected(self) -> "Rect":
        """下层矩形在上层的对应位置：(x, y) → (-y, x)"""
        return Rect(-self.y2, -self.y1, self.x1, self.x2)

    def overlaps(self, other: "Rect") -> bool:
        return self.x1 < other.x2 and other.x1 < self.x2 and self.y1 < other.y2 and other.y1 < self.y2


@dataclass(frozen=True)
class Electrode:
    name: str
    role: Role
    layer: Layer
    rects: tuple[Rect, ...]


@dataclass(frozen=True)
class ElectrodeLayout:
    """两层电极布局，平面位于 z = ∓plane_half_gap（未覆盖的平面区域接地）"""

    name: str
    electrodes: tuple[Electrode, ...]
    plane_half_gap: float = PLANE_SEPARATION_UM / 2

    def plane_z(self, layer: Layer) -> float:
        return -self.plane_half_gap if layer == "bottom" else self.plane_half_gap

    def validate(self) -> Result[None, FailureHint]:
        if not self.plane_half_gap > 0:
            return Err(GeometryError(f"平面间距必须为正: {self.plane_half_gap}"))
        names = [e.name for e in self.electrodes]
        if len(set(names)) != len(names):
            return Err(GeometryError("电极名称重复"))

        for layer in ("bottom", "top"):
            rects = [(e.name, r) for e in self.electrodes if e.layer == layer for r in e.rects]
            for i, (name_a, a) in enumerate(rects):
                for name_b, b in rects[i + 1 :]:
                    if a.overlaps(b):
                        return Err(
                            GeometryError(
                                f"{layer} 层电极 {name_a} 与 {name_b} 重叠",
                                suggestion="同层矩形不能重叠",
                            )
                        )
        return Ok(None)


def two_layer(name: str, bottom: list[Electrode], plane_half_gap: float) -> ElectrodeLayout:
    """由下层电极构造两层布局：上层为下层的旋转反射拷贝"""
    electrodes = [
        Electrode(f"bottom.{e.name}", e.role, "bottom", e.rects) for e in bottom
    ] + [
        Electrode(f"top.{e.name}", e.role, "top", tuple(r.rotoreflected() for r in e.rects))
        for e in bottom
    ]
    return ElectrodeLayout(name, tuple(electrodes), plane_half_gap)


def _linear_trap_layer(
    center_half_width: float = 40.0,
    rail_outer: float = 129.6,
    length: float = 400.0,
    segment_half_length: float = 30.0,
) -> list[Electrode]:
    """沿 x 方向的线性阱：中心控制条（分段）、两条 RF 轨、外侧控制电极

    中心条半宽 c₁ = 40 µm、RF 轨外沿 c₂ = 129.6 µm，在 50 µm 间距下零点高度
    h = (2d/π)·arctan √(tanh(πc₁/2d)·tanh(πc₂/2d)) ≈ 23.7 µm。
    """
    c1, c2, L, w = center_half_width, rail_outer, length, segment_half_length
    return [
        Electrode("rf", "rf", "bottom", (Rect(-L, L, c1, c2), Rect(-L, L, -c2, -c1))),
        Electrode("ctrl_mid", "control", "bottom", (Rect(-w, w, -c1, c1),)),
        Electrode("ctrl_end", "control", "bottom", (Rect(-L, -w, -c1, c1), Rect(w, L, -c1, c1))),
        Electrode("ctrl_outer", "control", "bottom", (Rect(-L, L, c2, L), Rect(-L, L, -L, -c2))),
    ]


def peregrine_junction(plane_half_gap: float = PLANE_SEPARATION_UM / 2) -> ElectrodeLayout:
    return two_layer("peregrine", _linear_trap_layer(), plane_half_gap)


def single_layer(plane_half_gap: float = PLANE_SEPARATION_UM / 2) -> ElectrodeLayout:
    """只有下层电极，上层整面接地"""
    bottom = [
        Electrode(f"bottom.{e.name}", e.role, "bottom", e.rects) for e in _linear_trap_layer()
    ]
    return ElectrodeLayout("single-layer", tuple(bottom), plane_half_gap)


def parallel_plate(plane_half_gap: float = PLANE_SEPARATION_UM / 2, half_width: float = 5000.0) -> ElectrodeLayout:
    """下层一块覆盖整个网格区域的 RF 电极（平行板极限，无 RF 零点）"""
    plate = Rect(-half_width, half_width, -half_width, half_width)
    return ElectrodeLayout(
        "parallel-plate",
        (Electrode("bottom.plate", "rf", "bottom", (plate,)),),
        plane_half_gap,
    )


LAYOUT_PRESETS = {
    "peregrine": peregrine_junction,
    "single-layer": single_layer,
    "parallel-plate": parallel_plate,
}


def layout_text(layout: ElectrodeLayout) -> str:
    """布局文本格式：name / plane_half_gap 行，每个矩形一行 rect <电极> <role> <layer> x1 x2 y1 y2"""
    lines = [f"name {layout.name}", f"plane_half_gap {layout.plane_half_gap!r}"]
    for e in layout.electrodes:
        for r in e.rects:
            lines.append(f"rect {e.name} {e.role} {e.layer} {r.x1!r} {r.x2!r} {r.y1!r} {r.y2!r}")
    return "\n".join(lines) + "\n"


def parse_layout(text: str) -> Result[ElectrodeLayout, FailureHint]:
    name = "custom"
    gap = PLANE_SEPARATION_UM / 2
    rects: dict[str, list[Rect]] = {}
    kinds: dict[str, tuple[str, str]] = {}
    try:
        for lineno, line in enumerate(text.splitlines(), start=1):
            fields = line.split("#", 1)[0].split()
            if not fields:
                continue
            match fields:
                case ["name", value]:
                    name = value
                case ["plane_half_gap", value]:
                    gap = float(value)
                case ["rect", electrode, role, layer, x1, x2, y1, y2]:
                    if role not in ("rf", "control") or layer not in ("bottom", "top"):
                        return Err(GeometryError(f"第 {lineno} 行: role 或 layer 不合法"))
                    if kinds.setdefault(electrode, (role, layer)) != (role, layer):
                        return Err(GeometryError(f"第 {lineno} 行: 电极 {electrode} 的 role/layer 前后不一致"))
                    rects.setdefault(electrode, []).append(Rect(float(x1), float(x2), float(y1), float(y2)))
                case _:
                    return Err(GeometryError(f"第 {lineno} 行无法解析: {line.strip()}"))
    except ValueError as e:
        return Err(GeometryError(f"布局文件格式错误: {e}"))

    if not rects:
        return Err(GeometryError("布局中没有电极"))
    electrodes = tuple(
        Electrode(n, kinds[n][0], kinds[n][1], tuple(rs))  # type: ignore[arg-type]
        for n, rs in rects.items()
    )
    layout = ElectrodeLayout(name, electrodes, gap)
    match layout.validate():
        case Err(e):
            return Err(e)
    return Ok(layout)


def _corner(a: np.ndarray, b: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.arctan(a * b / (h * np.sqrt(a * a + b * b + h * h)))


def rect_potential(rect: Rect, x, y, h) -> np.ndarray:
    """接地平面中的单位电压矩形在 (x, y) 正上方高度 h > 0 处的电势（立体角 / 2π）"""
    x1, x2 = rect.x1 - x, rect.x2 - x
    y1, y2 = rect.y1 - y, rect.y2 - y
    return (
        _corner(x2, y2, h) - _corner(x1, y2, h) - _corner(x2, y1, h) + _corner(x1, y1, h)
    ) / (2.0 * math.pi)


def slab_potential(
    rect: Rect, x, y, h, gap: float, order: int = IMAGE_ORDER
) -> tuple[np.ndarray, float]:
    """两平面（间距 gap）之间、距电极平面 h 处的电势与最后一对镜像项的最大幅度"""
    x, y, h = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, h)))
    total = np.zeros_like(h)
    last = np.zeros_like(h)
    for n in range(order + 1):
        last = rect_potential(rect, x, y, h + 2 * n * gap) - rect_potential(rect, x, y, 2 * (n + 1) * gap - h)
        total += last

    # Σ_{n>K}: 两组镜像高度之间的积分近似，宽度 2(gap - h)，中点高度 (2K+2)·gap
    tail = (1.0 - h / gap) * rect_potential(rect, x, y, np.full_like(h, (2 * order + 2) * gap))
    return total + tail, float(np.max(np.abs(last), initial=0.0))


def electrode_potential(
    layout: ElectrodeLayout, electrode: Electrode, points: np.ndarray, order: int = IMAGE_ORDER
) -> tuple[np.ndarray, float]:
    """points (n, 3) 处的单位电压电势；高度从该电极所在平面量起"""
    gap = 2.0 * layout.plane_half_gap
    z_plane = layout.plane_z(electrode.layer)
    h = np.abs(points[:, 2] - z_plane)

    total = np.zeros(len(points))
    residual = 0.0
    for rect in electrode.rects:
        phi, last = slab_potential(rect, points[:, 0], points[:, 1], h, gap, order)
        total += phi
        residual = max(residual, last)
    return total, residual


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]

    @classmethod
    def centered(
        cls,
        box: tuple[float, float, float] = DEFAULT_GRID_BOX_UM,
        dims: tuple[int, int, int] = DEFAULT_GRID_DIMS,
    ) -> "GridSpec":
        """以结中心为原点、边长 box 的网格"""
        spacing = tuple(b / (n - 1) for b, n in zip(box, dims))
        origin = tuple(-b / 2 for b in box)
        return cls(origin, spacing, dims)  # type: ignore[arg-type]

    def points(self) -> np.ndarray:
        axes = [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.dims)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def generate_rect_electrode_grid(
    layout: ElectrodeLayout,
    spec: GridSpec,
    order: int = IMAGE_ORDER,
    workers: int = MAX_WORKERS,
) -> Result[FieldGrid, FailureHint]:
    """逐电极计算单位电压电势网格（按 x 切片并行）"""
    match layout.validate():
        case Err(e):
            return Err(e)

    if min(spec.dims) < 4:
        return Err(GeometryError(f"网格每个方向至少需要 4 个点: {spec.dims}"))
    z_lo = spec.origin[2]
    z_hi = spec.origin[2] + spec.spacing[2] * (spec.dims[2] - 1)
    if not (-layout.plane_half_gap < z_lo and z_hi < layout.plane_half_gap):
        return Err(
            GeometryError(
                f"网格 z 范围 [{z_lo}, {z_hi}] 与电极平面 ±{layout.plane_half_gap} 相交",
                suggestion="网格必须严格位于两层电极平面之间",
            )
        )

    points = spec.points()
    slabs = np.array_split(np.arange(len(points)), max(1, spec.dims[0]))
    potentials: dict[str, np.ndarray] = {}
    convergence: dict[str, float] = {}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for electrode in layout.electrodes:
            parts = list(pool.map(lambda idx: electrode_potential(layout, electrode, points[idx], order), slabs))
            potentials[electrode.name] = np.concatenate([p[0] for p in parts]).reshape(spec.dims)
            convergence[electrode.name] = max(p[1] for p in parts)
            logger.info(
                f"[FieldGen] {electrode.name}: image order {order}, last image term {convergence[electrode.name]:.2e}"
            )

    grid = FieldGrid(
        origin=np.array(spec.origin, dtype=float),
        spacing=np.array(spec.spacing, dtype=float),
        dims=tuple(spec.dims),  # type: ignore[arg-type]
        potentials=potentials,
        roles={e.name: e.role for e in layout.electrodes},
        layers={e.name: e.layer for e in layout.electrodes},
        plane_half_gap=layout.plane_half_gap,
        image_order=order,
        convergence=convergence,
    )
    return Ok(grid)
