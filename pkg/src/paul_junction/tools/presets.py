"""内置 preset（key=value 字符串，与配置文件同一格式）"""

from ..config import (
    DRIVE_FREQUENCY_HZ,
    ELEMENTARY_CHARGE,
    NULL_HALF_SEPARATION_UM,
    REPLICATION_VELOCITY_MS,
    TRANSFER_TIME_S,
    YB171_MASS_KG,
)

_ION = {
    "mass": repr(YB171_MASS_KG),
    "charge": repr(ELEMENTARY_CHARGE),
    "drive_frequency": repr(DRIVE_FREQUENCY_HZ),
}

# 夸大的初速度 (5, 5, 5) m/s，三段式转移 T = 2.9 µs
_FIG6 = {
    **_ION,
    "mu": "0.75",
    "profile": "three_phase",
    "transfer_time_s": repr(TRANSFER_TIME_S),
    "velocity": ",".join(repr(v) for v in REPLICATION_VELOCITY_MS),
}

PRESETS: dict[str, dict[str, str]] = {
    "fig6a": {**_FIG6, "alpha": "0", "beta": "0"},
    "fig6b": {**_FIG6, "alpha": "0.2", "beta": "0"},
    "fig6c": {**_FIG6, "alpha": "0.29", "beta": "0"},
    "fig6d": {**_FIG6, "alpha": "0.29", "beta": "-0.15"},
    # f ≡ 1/2：离子悬停在两层之间，1000 个 RF 周期
    "paused": {
        **_FIG6,
        "alpha": "0.2",
        "beta": "0",
        "profile": "constant",
        "level": "0.5",
        "offset": f"0,0,{NULL_HALF_SEPARATION_UM!r}",
        "duration_s": repr(1000 / DRIVE_FREQUENCY_HZ),
    },
    "secular-quadratic": {
        **_ION,
        "mu": "0.25",
        "alpha": "0",
        "beta": "0",
        "profile": "constant",
        "level": "0",
        "offset": "0,1,0",
        "velocity": "0,0,0",
        "duration_s": "1e-5",
        "record_stride": "4",
        "axis": "y",
    },
    "secular-grid": {
        **_ION,
        "mu": "0.25",
        "alpha": "0.02",
        "beta": "0",
        "profile": "constant",
        "level": "0",
        "offset": "0,1,0",
        "velocity": "0,0,0",
        "duration_s": "1e-5",
        "record_stride": "4",
        "axis": "y",
        "field": "grid",
    },
}
