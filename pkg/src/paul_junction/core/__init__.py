"""核心模块 - 稳定性判据、势场模型与离子动力学"""

from . import electrodes, field_grid, flight, junction, mathieu, potential, validators
from .junction import JunctionParams
from .mathieu import BoundaryCurves, MathieuParams
from .validators import FailureHint

__all__ = [
    "electrodes",
    "field_grid",
    "flight",
    "junction",
    "mathieu",
    "potential",
    "validators",
    "BoundaryCurves",
    "FailureHint",
    "JunctionParams",
    "MathieuParams",
]
