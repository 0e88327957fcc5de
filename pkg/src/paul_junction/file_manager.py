"""文件管理器 - 负责文件系统 I/O 操作"""

import hashlib
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .config import CSV_SCHEMA_VERSION, OUTPUT_LOCK_NAME, RUN_HOLDER_NAME, cache_root


def get_cache_dir(key: str) -> Path:
    # 使用 SHA256 确保跨进程一致性（不使用内置 hash()，因为有 hash randomization）
    key_hash = hashlib.sha256(key.encode()).hexdigest()[:16]
    return cache_root() / key_hash


def get_output_lock_file(output_dir: Path) -> Path:
    return output_dir / OUTPUT_LOCK_NAME


def get_run_holder_file(output_dir: Path) -> Path:
    return output_dir / RUN_HOLDER_NAME


def ensure_dir(dir: Path) -> Path:
    dir.mkdir(parents=True, exist_ok=True)
    return dir


def read_file(file_path: Path) -> str:
    return file_path.read_text(encoding="utf-8")


def write_file(file_path: Path, content: str) -> None:
    file_path.write_text(content, encoding="utf-8")


def write_csv(
    file_path: Path,
    schema: str,
    columns: Sequence[str],
    rows: np.ndarray,
    fmt: str = "%.10g",
    notes: Sequence[str] = (),
) -> None:
    """写入带版本注释行的 CSV（数值块格式固定，重复运行逐字节一致）

    注释头依次为 schema 行、notes 中的每一行、列名行。
    """
    header_lines = [f"schema: paul-junction/{schema} v{CSV_SCHEMA_VERSION}", *notes, ",".join(columns)]
    header = "\n".join(header_lines)
    np.savetxt(file_path, rows, delimiter=",", header=header, comments="# ", fmt=fmt)


def read_csv(file_path: Path) -> tuple[list[str], np.ndarray]:
    """读取 write_csv 写出的文件，返回 (列名, 数值块)"""
    header = [line for line in read_file(file_path).splitlines() if line.startswith("#")]
    columns = header[-1].removeprefix("# ").split(",")
    data = np.loadtxt(file_path, delimiter=",", comments="#", ndmin=2)
    return columns, data
