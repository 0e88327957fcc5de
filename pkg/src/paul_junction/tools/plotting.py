"""SVG 图输出（matplotlib Agg 后端，不依赖显示环境）"""

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
import numpy as np  # noqa: E402

from ..core.flight import TrajectoryRecord  # noqa: E402
from ..core.junction import RegionMap3D  # noqa: E402

# 固定元数据，重复运行输出相同的 SVG
_SVG_METADATA = {"Date": None, "Creator": "paul-junction"}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def _extent(a: np.ndarray, b: np.ndarray) -> list[float]:
    pad_a = (a[1] - a[0]) / 2 if a.size > 1 else 0.5
    pad_b = (b[1] - b[0]) / 2 if b.size > 1 else 0.5
    return [a[0] - pad_a, a[-1] + pad_a, b[0] - pad_b, b[-1] + pad_b]


def stability_map_svg(U: np.ndarray, V: np.ndarray, stable: np.ndarray, path: Path) -> Path:
    """(U, V) 稳定性图，横轴 V、纵轴 U；stable 形状为 (nU, nV)"""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(
        stable.astype(float),
        origin="lower",
        extent=_extent(V, U),
        aspect="auto",
        cmap="Greys",
        vmin=0,
        vmax=1,
        interpolation="nearest",
    )
    ax.set_xlabel("V")
    ax.set_ylabel("U")
    ax.set_title("Mathieu stability (black = stable)")
    return _save(fig, path)


def region_slices_svg(region: RegionMap3D, indices: Sequence[int], path: Path) -> Path:
    """固定 μ 的 (β, α) 切片：灰色为单阱稳定，红色为禁区"""
    n = max(1, len(indices))
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 4), squeeze=False)
    for ax, index in zip(axes[0], indices):
        cut = region.slice_mu(index)
        image = np.where(cut["banned"], 2.0, np.where(cut["simple_stable"], 1.0, 0.0))
        ax.imshow(
            image.T,
            origin="lower",
            extent=_extent(region.beta, region.alpha),
            aspect="auto",
            cmap=ListedColormap(["white", "0.7", "tab:red"]),
            vmin=0,
            vmax=2,
            interpolation="nearest",
        )
        ax.set_xlabel("β")
        ax.set_ylabel("α")
        ax.set_title(f"μ = {float(cut['mu']):.3f}")
    return _save(fig, path)


def trajectory_svg(record: TrajectoryRecord, path: Path, title: str = "") -> Path:
    """x / y / z 随时间变化：红实线、绿虚线、蓝点划线"""
    fig, ax = plt.subplots(figsize=(6, 4))
    t_us = record.seconds * 1e6
    styles = (("x", "tab:red", "-"), ("y", "tab:green", "--"), ("z", "tab:blue", "-."))
    for i, (label, color, style) in enumerate(styles):
        ax.plot(t_us, record.position[:, i], style, color=color, label=label, linewidth=0.8)
    ax.set_xlabel("time (µs)")
    ax.set_ylabel("position (µm)")
    ax.set_title(title or record.outcome.describe())
    ax.legend(loc="upper left")
    return _save(fig, path)


def sweep_svg(alphas: Sequence[float], confined: Sequence[bool], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.step(alphas, [int(c) for c in confined], where="mid")
    ax.set_xlabel("α")
    ax.set_ylabel("confined")
    ax.set_yticks([0, 1])
    return _save(fig, path)


def spectrum_svg(freqs: np.ndarray, magnitude: np.ndarray, peak: float, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.semilogy(freqs / 1e6, magnitude, linewidth=0.8)
    ax.axvline(peak / 1e6, color="tab:red", linestyle="--")
    ax.set_xlabel("frequency (MHz)")
    ax.set_ylabel("|FFT|")
    return _save(fig, path)
