"""理想二次势模型 - 控制势、RF 势、转移总势、转移函数 f(t) 与物理量换算

无量纲约定:
- 时间 τ，驱动项为 cos 2τ（RF 周期 π），物理时间 t = 2τ/Ω
- 长度单位 µm
- 运动方程 q'' = -½ ∂Φ/∂q，因此 αx² 项对应 Mathieu 参数 (α, 0)
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..config import (
    DRIVE_FREQUENCY_HZ,
    ELEMENTARY_CHARGE,
    NULL_HALF_SEPARATION_UM,
    PLANE_SEPARATION_UM,
    RF_AMPLITUDE_V,
    YB171_MASS_KG,
)
from .junction import JunctionParams

ProfileKind = Literal["heaviside", "linear", "three_phase", "smoothstep", "constant"]
PROFILE_KINDS: tuple[str, ...] = ("heaviside", "linear", "three_phase", "smoothstep", "constant")


@dataclass(frozen=True)
class QuadraticCoefficients:
    """ax + by + cZ + dxy + eyZ + fZx + αx² + βy² + γZ²（构造时检查 α + β + γ = 0）"""

    alpha: float
    beta: float
    gamma: float
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 0.0
    f: float = 0.0

    def __post_init__(self):
        scale = max(1.0, abs(self.alpha), abs(self.beta), abs(self.gamma))
        if abs(self.alpha + self.beta + self.gamma) > 1e-12 * scale:
            raise ValueError(
                f"Laplace constraint violated: alpha + beta + gamma = "
                f"{self.alpha + self.beta + self.gamma:.3e}"
            )

    @classmethod
    def from_junction(cls, jp: JunctionParams) -> "QuadraticCoefficients":
        return cls(alpha=jp.alpha, beta=jp.beta, gamma=jp.gamma)


@dataclass(frozen=True)
class TwoLayerGeometry:
    """s：两个 RF 零点的半间距；plane_half_gap：两层电极平面的半间距

    上层阱由下层阱经 (x, y, z) → (y, -x, s - z) 得到。
    """

    s: float = NULL_HALF_SEPARATION_UM
    plane_half_gap: float = PLANE_SEPARATION_UM / 2

    def __post_init__(self):
        if not (self.s > 0 and self.plane_half_gap > self.s):
            raise ValueError(f"Need 0 < s < plane_half_gap, got s={self.s}, gap={self.plane_half_gap}")


@dataclass(frozen=True)
class TransferProfile:
    """转移函数 f(t)，T 为无量纲总时长（constant 类型在全程取 level）"""

    kind: ProfileKind
    T: float
    level: float = 0.5

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"Unknown profile kind: {self.kind}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"Profile duration must be positive, got {self.T}")
        if not 0.0 <= self.level <= 1.0:
            raise ValueError(f"Constant level must lie in [0, 1], got {self.level}")

    @classmethod
    def from_seconds(
        cls, kind: ProfileKind, seconds: float, scales: "DimensionlessScales", level: float = 0.5
    ) -> "TransferProfile":
        return cls(kind, seconds / scales.time_scale, level)


def transfer_profile_eval(prof: TransferProfile, t):
    """f(t) ∈ [0, 1]；t 可为标量或数组，超出 [0, T] 时按端点截断"""
    u = np.clip(np.asarray(t, dtype=float) / prof.T, 0.0, 1.0)
    match prof.kind:
        case "heaviside":
            f = np.where(u >= 0.5, 1.0, 0.0)
        case "linear":
            f = u
        case "three_phase":
            f = np.clip(3.0 * u - 1.0, 0.0, 1.0)
        case "smoothstep":
            f = u * u * (3.0 - 2.0 * u)
        case _:
            f = np.full_like(u, prof.level)
    return float(f) if np.ndim(f) == 0 else f


def _split(point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(point, dtype=float)
    return p[..., 0], p[..., 1], p[..., 2]


def control_potential(q: QuadraticCoefficients, point):
    """以 RF 零点为原点（z 分量即 Z）的控制势"""
    x, y, Z = _split(point)
    value = (
        q.a * x + q.b * y + q.c * Z
        + q.d * x * y + q.e * y * Z + q.f * Z * x
        + q.alpha * x**2 + q.beta * y**2 + q.gamma * Z**2
    )
    return float(value) if np.ndim(value) == 0 else value


def control_gradient(q: QuadraticCoefficients, point) -> np.ndarray:
    x, y, Z = _split(point)
    return np.stack(
        [
            q.a + q.d * y + q.f * Z + 2 * q.alpha * x,
            q.b + q.d * x + q.e * Z + 2 * q.beta * y,
            q.c + q.e * y + q.f * x + 2 * q.gamma * Z,
        ],
        axis=-1,
    )


def control_hessian(q: QuadraticCoefficients) -> np.ndarray:
    return np.array(
        [
            [2 * q.alpha, q.d, q.f],
            [q.d, 2 * q.beta, q.e],
            [q.f, q.e, 2 * q.gamma],
        ]
    )


def rf_potential(mu: float, point, t):
    """cos(2t)·2μ(Z² - y²)，无迹"""
    _, y, Z = _split(point)
    value = np.cos(2.0 * np.asarray(t, dtype=float)) * 2.0 * mu * (Z**2 - y**2)
    return float(value) if np.ndim(value) == 0 else value


def rf_gradient(mu: float, point, t) -> np.ndarray:
    x, y, Z = _split(point)
    c = np.cos(2.0 * np.asarray(t, dtype=float))
    return np.stack([np.zeros_like(x), -4.0 * mu * c * y, 4.0 * mu * c * Z], axis=-1)


@dataclass(frozen=True)
class TransferCoefficients:
    """Φ = kx x² + ky y² + k_lo (z+s)² + k_hi (s-z)²"""

    kx: np.ndarray
    ky: np.ndarray
    k_lo: np.ndarray
    k_hi: np.ndarray


def transfer_coefficients(alpha, beta, mu, f, t) -> TransferCoefficients:
    """控制势与同相 RF 势在 f、t 处的各轴二次系数（参数可为数组）"""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    gamma = -alpha - beta
    c = np.cos(2.0 * np.asarray(t, dtype=float))

    z_coef = gamma + 2.0 * mu * c
    return TransferCoefficients(
        kx=(1.0 - f) * alpha + f * beta - 2.0 * mu * f * c,
        ky=(1.0 - f) * beta + f * alpha - 2.0 * mu * (1.0 - f) * c,
        k_lo=(1.0 - f) * z_coef,
        k_hi=f * z_coef,
    )


def _layer_terms(g: TwoLayerGeometry, jp: JunctionParams, prof: TransferProfile, t):
    f = transfer_profile_eval(prof, t)
    return transfer_coefficients(jp.alpha, jp.beta, jp.mu, f, t)


def total_potential(g: TwoLayerGeometry, jp: JunctionParams, prof: TransferProfile, point, t):
    """Φ_C + Φ_RF = (1-f)φ₀ + fφ₁（z 为全局坐标，零点位于 z = ∓s）"""
    k = _layer_terms(g, jp, prof, t)
    x, y, z = _split(point)
    value = k.kx * x**2 + k.ky * y**2 + k.k_lo * (z + g.s) ** 2 + k.k_hi * (g.s - z) ** 2
    return float(value) if np.ndim(value) == 0 else value


def total_gradient(
    g: TwoLayerGeometry, jp: JunctionParams, prof: TransferProfile, point, t
) -> np.ndarray:
    k = _layer_terms(g, jp, prof, t)
    x, y, z = _split(point)
    return np.stack(
        [
            2.0 * k.kx * x,
            2.0 * k.ky * y,
            2.0 * k.k_lo * (z + g.s) - 2.0 * k.k_hi * (g.s - z),
        ],
        axis=-1,
    )


def total_hessian(g: TwoLayerGeometry, jp: JunctionParams, prof: TransferProfile, t) -> np.ndarray:
    """二阶导与位置无关"""
    k = _layer_terms(g, jp, prof, t)
    return np.diag([2.0 * float(k.kx), 2.0 * float(k.ky), 2.0 * float(k.k_lo + k.k_hi)])


def instantaneous_null_z(g: TwoLayerGeometry, f):
    """Φ 的 z 方向零梯度点：z = s(2f - 1)，与 t 无关"""
    return g.s * (2.0 * np.asarray(f, dtype=float) - 1.0)


@dataclass(frozen=True)
class PhysicalTrapSpec:
    """物理参数（SI 单位，separation 为电极平面间距）"""

    drive_frequency: float = DRIVE_FREQUENCY_HZ
    rf_amplitude: float = RF_AMPLITUDE_V
    ion_mass: float = YB171_MASS_KG
    ion_charge: float = ELEMENTARY_CHARGE
    separation: float = PLANE_SEPARATION_UM * 1e-6
    mu: float | None = None

    def __post_init__(self):
        values = {
            "drive_frequency": self.drive_frequency,
            "rf_amplitude": self.rf_amplitude,
            "ion_mass": self.ion_mass,
            "ion_charge": self.ion_charge,
            "separation": self.separation,
        }
        bad = [k for k, v in values.items() if not (math.isfinite(v) and v > 0)]
        if bad:
            raise ValueError(f"Physical parameters must be positive: {bad}")
        if self.mu is not None and not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be non-negative, got {self.mu}")


@dataclass(frozen=True)
class DimensionlessScales:
    """无量纲换算

    - time_scale: 每个无量纲时间单位对应的秒数（2/Ω）
    - length_scale: 每个长度单位对应的米数（1 µm）
    - energy_scale: Φ = 1 对应的物理势曲率 mΩ²/(8c)，单位 V/µm²
    """

    mu: float
    omega: float
    time_scale: float
    energy_scale: float
    length_scale: float = 1e-6
    secular_frequency: float = 0.0

    @property
    def drive_frequency(self) -> float:
        return self.omega / (2.0 * math.pi)

    def velocity_to_dimensionless(self, v_ms) -> np.ndarray:
        """m/s → µm/τ"""
        return np.asarray(v_ms, dtype=float) / self.length_scale * self.time_scale

    def velocity_to_physical(self, v) -> np.ndarray:
        """µm/τ → m/s"""
        return np.asarray(v, dtype=float) * self.length_scale / self.time_scale


def secular_estimate(mu: float, omega: float) -> float:
    """小 μ 近似的久期角频率 μΩ/(2√2)"""
    return abs(mu) * omega / (2.0 * math.sqrt(2.0))


def physical_to_dimensionless(spec: PhysicalTrapSpec, kappa: float | None = None) -> DimensionlessScales:
    """物理参数 → (μ, 时间尺度, 长度尺度, 能量尺度)

    μ 取 spec.mu；未给出时由 RF 曲率 kappa（每伏特 1/µm²）与 rf_amplitude 推出。
    μ 即径向 Mathieu 方程的 V 参数，久期频率估计 ω ≈ μΩ/(2√2)。
    """
    omega = 2.0 * math.pi * spec.drive_frequency
    energy = spec.ion_mass * omega**2 / (8.0 * spec.ion_charge) * 1e-12

    if spec.mu is not None:
        mu = spec.mu
    elif kappa is not None:
        mu = mu_from_curvature(kappa, spec.rf_amplitude, energy)
    else:
        raise ValueError("Either spec.mu or an RF curvature is required to derive mu")

    return DimensionlessScales(
        mu=mu,
        omega=omega,
        time_scale=2.0 / omega,
        energy_scale=energy,
        secular_frequency=secular_estimate(mu, omega) / (2.0 * math.pi),
    )


def mu_from_curvature(kappa: float, rf_amplitude: float, energy_scale: float) -> float:
    """RF 势 V_rf·κ(Z² - y²) 对应的 μ = V_rf·|κ| / (2E₀)"""
    return rf_amplitude * abs(kappa) / (2.0 * energy_scale)


def rf_amplitude_for_mu(mu: float, kappa: float, energy_scale: float) -> float:
    return 2.0 * energy_scale * mu / abs(kappa)
