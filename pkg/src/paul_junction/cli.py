"""命令行入口 paul-junction"""

import argparse
import sys

from dotenv import load_dotenv
from rusty_results.prelude import Err, Ok

from . import __version__
from .file_manager import ensure_dir
from .lock import RunLock
from .logger import logger, setup_logger
from .tools import COMMANDS, EXIT_USAGE
from .tools.run_config import write_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paul-junction",
        description="双层 Paul 阱结：Mathieu 稳定性、转移禁区与离子飞行模拟",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS.values():
        command.add_parser(subparsers)
    return parser


def _fail(message: str, suggestion: str | None = None) -> int:
    print(f"错误: {message}", file=sys.stderr)
    if suggestion:
        print(f"建议: {suggestion}", file=sys.stderr)
    return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    """退出码: 0 成功/约束，2 用法或配置错误，3 离子丢失"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    command = COMMANDS[args.command]

    output_dir = ensure_dir(command.output_dir(args))
    setup_logger(output_dir)

    match command.configure(args):
        case Err(e):
            logger.warning(f"[CLI] {command.name}: configuration rejected: {e.message}")
            return _fail(e.message, e.suggestion)
        case Ok(cfg):
            pass

    lock = RunLock(cfg)
    match lock.acquire():
        case Err(e):
            return _fail(e.message, e.suggestion)
    try:
        write_manifest(cfg)
        result = command.execute(cfg)
    except Exception as e:
        logger.error(f"[CLI] {command.name} failed: {e}", exc_info=True)
        print(f"错误: {e}", file=sys.stderr)
        return 1
    finally:
        lock.release()

    match result:
        case Err(e):
            logger.warning(f"[CLI] {command.name}: {e.message}")
            return _fail(e.message, e.suggestion)
        case Ok(outcome):
            for line in outcome.summary:
                print(line)
            for path in outcome.files:
                print(f"wrote {path}")
            return outcome.exit_code
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
