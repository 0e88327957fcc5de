"""日志配置（stderr 输出，可选输出到运行目录下的轮转文件）"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

_FORMATTER = logging.Formatter(
    fmt="%(asctime)s | %(levelname)-7s | %(name)s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)


def setup_logger(log_dir: Path | None = None) -> logging.Logger:
    """配置日志系统

    Args:
        log_dir: 运行输出目录；给出时额外写入 run.log（带轮转）

    - 通过环境变量 LOG_LEVEL 控制级别（默认 INFO）
    - 重复调用时清除旧的 handlers，避免重复输出
    """
    root_logger = logging.getLogger()
    root_logger.handlers.clear()

    level = os.getenv("LOG_LEVEL", "INFO").upper()
    root_logger.setLevel(getattr(logging, level, logging.INFO))

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(_FORMATTER)
    root_logger.addHandler(stream_handler)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        # 单个文件最大 1MB，保留 5 个备份
        file_handler = RotatingFileHandler(
            log_dir / "run.log",
            maxBytes=1 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setFormatter(_FORMATTER)
        root_logger.addHandler(file_handler)

    # matplotlib 的字体查找日志会刷屏
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    return root_logger


logger = logging.getLogger("paul-junction")
