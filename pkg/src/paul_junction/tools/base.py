"""命令基类 - 所有子命令的共同接口"""

import argparse
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from rusty_results.prelude import Err, Ok, Result

from ..core.validators import FailureHint
from .presets import PRESETS
from .run_config import ConfigKey, RunConfig, parse_overrides, read_config_file, resolve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOST = 3


@dataclass
class CommandResult:
    exit_code: int
    summary: list[str]
    files: list[Path] = field(default_factory=list)


class Command:
    """子命令基类

    子类需要重载 execute() 来实现具体逻辑。
    """

    def __init__(self, name: str, description: str, keys: Sequence[ConfigKey]):
        """
        Args:
            name: 子命令名称（命令行中使用）
            description: --help 中显示的说明
            keys: 该命令接受的配置键
        """
        self.name = name
        self.description = description
        self.keys = tuple(keys)

    def epilog(self) -> str:
        lines = ["配置键（--set key=value 或配置文件中的 key=value 行）:"]
        for key in self.keys:
            default = "必需" if key.required else f"默认 {key.default}" if key.default is not None else "可选"
            choices = f" [{'|'.join(key.choices)}]" if key.choices else ""
            lines.append(f"  {key.name:<18} {key.help}{choices}（{default}）")
        return "\n".join(lines)

    def add_parser(self, subparsers) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(
            self.name,
            help=self.description,
            description=self.description,
            epilog=self.epilog(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        parser.add_argument("--preset", choices=sorted(PRESETS), help="内置参数组")
        parser.add_argument("--config", type=Path, help="key=value 配置文件（可以是之前运行的 manifest.txt）")
        parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        parser.add_argument("--out", type=Path, default=None, help=f"输出目录（默认 runs/{self.name}）")
        parser.add_argument("--svg", action="store_true", help="额外输出 SVG 图（不影响 CSV）")
        parser.add_argument("--seed", type=int, default=None, help="随机抽样的种子")
        return parser

    def output_dir(self, args: argparse.Namespace) -> Path:
        return args.out if args.out is not None else Path("runs") / self.name

    def configure(self, args: argparse.Namespace) -> Result[RunConfig, FailureHint]:
        """合并 preset、配置文件与 --set 覆盖"""
        known = {k.name for k in self.keys} | {"seed"}
        layers: list[dict[str, str]] = []
        if args.preset:
            layers.append({k: v for k, v in PRESETS[args.preset].items() if k in known})
        if args.config is not None:
            match read_config_file(args.config):
                case Err(e):
                    return Err(e)
                case Ok(values):
                    layers.append(values)
        match parse_overrides(args.overrides):
            case Err(e):
                return Err(e)
            case Ok(values):
                if args.seed is not None:
                    values["seed"] = str(args.seed)
                layers.append(values)
        return resolve(self.name, self.keys, layers, self.output_dir(args), svg=args.svg)

    def execute(self, cfg: RunConfig) -> Result[CommandResult, FailureHint]:
        """执行命令（子类必须重载）"""
        raise NotImplementedError(f"Command '{self.name}' 必须实现 execute() 方法")
