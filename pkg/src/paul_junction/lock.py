"""输出目录运行锁（基于 filelock 库）

持锁期间在目录中写一份持有者记录（命令、manifest 路径、进程号），
另一个运行撞上锁时据此报告是谁占用了目录。
"""

import os

from dotenv import dotenv_values
from filelock import FileLock, Timeout
from rusty_results.prelude import Err, Ok, Result

from .core.validators import ConfigError, FailureHint
from .file_manager import get_output_lock_file, get_run_holder_file, write_file
from .logger import logger
from .tools.run_config import MANIFEST_NAME, RunConfig


class RunLock:
    """同一输出目录同时只允许一个运行写入 CSV 与 manifest"""

    def __init__(self, cfg: RunConfig, timeout: float = 0):
        self.cfg = cfg
        self.lock_file = get_output_lock_file(cfg.output_dir)
        self.holder_file = get_run_holder_file(cfg.output_dir)
        self._lock = FileLock(str(self.lock_file), timeout=timeout)

    def holder(self) -> dict[str, str]:
        if not self.holder_file.is_file():
            return {}
        return {k: v for k, v in dotenv_values(self.holder_file).items() if v is not None}

    def acquire(self) -> Result[None, FailureHint]:
        self.cfg.output_dir.mkdir(parents=True, exist_ok=True)
        try:
            self._lock.acquire()
        except Timeout:
            other = self.holder()
            logger.warning(f"[Lock] {self.cfg.output_dir} held by {other or 'unknown run'}")
            return Err(
                ConfigError(
                    f"输出目录正被另一个运行占用: {self.cfg.output_dir}"
                    f"（{other.get('command', '未知命令')}，pid {other.get('pid', '?')}）",
                    suggestion="等待其他运行结束或换一个 --out 目录",
                )
            )
        manifest = self.cfg.output_dir / MANIFEST_NAME
        write_file(self.holder_file, f"command={self.cfg.command}\nmanifest={manifest}\npid={os.getpid()}\n")
        return Ok(None)

    def release(self):
        """删除持有者记录并释放锁"""
        try:
            self.holder_file.unlink(missing_ok=True)
            if self._lock.is_locked:
                self._lock.release()
            self.lock_file.unlink(missing_ok=True)
        except OSError:
            pass
