"""配置常量和环境变量加载"""

import os
from pathlib import Path

# Mathieu 稳定性
HILL_TRUNCATION = int(os.getenv("PAUL_JUNCTION_HILL_TRUNCATION", "25"))
HILL_TAIL_TERMS = 128  # 截断外显式求和的行数，其余用积分余项
POLE_TOL = 1e-4  # |U - r²| 小于该值时改用 Floquet 判据
STABILITY_TOL = 1e-9  # cos_arg ∈ [-1 - tol, 1 + tol] 视为稳定
FLOQUET_STEPS = int(os.getenv("PAUL_JUNCTION_FLOQUET_STEPS", "2048"))  # 每个周期的 RK4 步数

# 边界曲线制表
BOUNDARY_KNOTS = 400
BOUNDARY_V_MAX = 2.0
BISECTION_U_TOL = 1e-6
BOUNDARY_SCAN_STEP = 0.005  # 沿 U 轴扫描稳定性转变的步长

# 结转移路径
PATH_SAMPLES = 256
PATH_T_TOL = 1e-4

# 电极与网格（长度单位 µm）
IMAGE_ORDER = 20
PLANE_SEPARATION_UM = 50.0
NULL_HALF_SEPARATION_UM = 1.3  # (50 - 2 * 23.7) / 2
DEFAULT_GRID_DIMS = (81, 81, 41)
DEFAULT_GRID_BOX_UM = (200.0, 200.0, 40.0)

# 物理参数
ELEMENTARY_CHARGE = 1.602176634e-19
YB171_MASS_KG = float(os.getenv("PAUL_JUNCTION_ION_MASS", "2.839e-25"))
DRIVE_FREQUENCY_HZ = 31e6
RF_AMPLITUDE_V = 56.0

# 飞行模拟
STEPS_PER_PERIOD = 256  # 默认 dt = RF 周期 / 256
MIN_STEPS_PER_PERIOD = 64
LOSS_BOX_XY_UM = 100.0
DRIVE_EXCLUSION = 0.05  # 频谱分析时排除驱动频率 ±5% 的谱线
REPLICATION_VELOCITY_MS = (5.0, 5.0, 5.0)
TRANSFER_TIME_S = 2.9e-6
CROSSCHECK_BAND = 0.02  # 解析与模拟允许分歧的边界带宽度
MOMENTUM_ALPHA_MIN = 0.3  # 不低于该 α 时，解析稳定而模拟丢失可归因于转移中的动量

# 并发
MAX_WORKERS = int(os.getenv("PAUL_JUNCTION_WORKERS", "1"))
MAP_CHUNK_CELLS = 2048

CSV_SCHEMA_VERSION = 1
OUTPUT_LOCK_NAME = ".paul-junction.lock"
RUN_HOLDER_NAME = ".paul-junction.run"  # 持锁运行的命令、manifest 与进程号


def cache_root() -> Path:
    """缓存根目录（每次调用时读取环境变量，便于测试重定向）"""
    override = os.getenv("PAUL_JUNCTION_CACHE_DIR")
    if override:
        return Path(override)
    return Path.home() / ".paul-junction"
