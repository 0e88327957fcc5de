"""运行配置 - 默认值 < preset < 配置文件 < --set 覆盖，解析后写回 manifest"""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

from dotenv import dotenv_values
from rusty_results.prelude import Err, Ok, Result

from .. import __version__
from ..config import CSV_SCHEMA_VERSION
from ..core.validators import ConfigError, FailureHint, parse_float, require_keys, validate_finite
from ..file_manager import write_file
from ..logger import logger

KeyKind = Literal["float", "int", "str", "floats", "path"]

# manifest 中由程序写入、读回时忽略的键
RESERVED_KEYS = ("command", "package_version", "schema_version")
MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class ConfigKey:
    """一个配置键：default 为 None 且 required 时必须由 preset / 配置文件 / --set 给出"""

    name: str
    kind: KeyKind
    help: str
    default: str | None = None
    required: bool = False
    choices: tuple[str, ...] = ()

    def parse(self, raw: str) -> Result[Any, FailureHint]:
        raw = raw.strip()
        match self.kind:
            case "float":
                return parse_float({self.name: raw}, self.name)
            case "int":
                try:
                    return Ok(int(raw))
                except ValueError:
                    return Err(ConfigError(f"配置字段 {self.name} 不是整数: {raw!r}"))
            case "floats":
                try:
                    values = tuple(float(v) for v in raw.split(",") if v.strip())
                except ValueError:
                    return Err(ConfigError(f"配置字段 {self.name} 不是逗号分隔的数值: {raw!r}"))
                if not values:
                    return Err(ConfigError(f"配置字段 {self.name} 为空"))
                match validate_finite(**{f"{self.name}[{i}]": v for i, v in enumerate(values)}):
                    case Err(e):
                        return Err(e)
                return Ok(values)
            case "path":
                return Ok(Path(raw).expanduser())
            case _:
                if self.choices and raw not in self.choices:
                    return Err(ConfigError(f"配置字段 {self.name} 只能取 {', '.join(self.choices)}"))
                return Ok(raw)


@dataclass(frozen=True, eq=False)
class RunConfig:
    command: str
    raw: dict[str, str]
    values: dict[str, Any]
    output_dir: Path
    svg: bool = False
    seed: int = 0

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        value = self.values.get(key)
        return default if value is None else value


def parse_overrides(items: Iterable[str]) -> Result[dict[str, str], FailureHint]:
    """解析 --set key=value"""
    result: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            return Err(ConfigError(f"无法解析覆盖项 {item!r}", suggestion="格式为 key=value"))
        result[key.strip()] = value.strip()
    return Ok(result)


def read_config_file(path: Path) -> Result[dict[str, str], FailureHint]:
    """读取 key=value 配置文件（同样可以读取 manifest）"""
    if not path.is_file():
        return Err(ConfigError(f"配置文件不存在: {path}"))
    values = {k: v for k, v in dotenv_values(path).items() if v is not None and k not in RESERVED_KEYS}
    logger.debug(f"[CLI] Loaded {len(values)} key(s) from {path}")
    return Ok(values)


def resolve(
    command: str,
    keys: Sequence[ConfigKey],
    layers: Sequence[Mapping[str, str]],
    output_dir: Path,
    svg: bool = False,
) -> Result[RunConfig, FailureHint]:
    """按顺序合并各层配置并解析类型（收集全部错误后一起报告）"""
    known = {k.name: k for k in keys}
    raw: dict[str, str] = {k.name: k.default for k in keys if k.default is not None}
    for layer in layers:
        unknown = sorted(set(layer) - set(known) - {"seed"})
        if unknown:
            return Err(
                ConfigError(
                    f"{command} 不认识的配置键: {', '.join(unknown)}",
                    suggestion=f"可用的键见 paul-junction {command} --help",
                )
            )
        raw.update(layer)

    match require_keys(raw, [k.name for k in keys if k.required]):
        case Err(e):
            return Err(e)

    values: dict[str, Any] = {}
    problems: list[str] = []
    for key in keys:
        text = raw.get(key.name)
        if text is None or text == "":
            values[key.name] = None
            continue
        match key.parse(text):
            case Err(e):
                problems.append(f"{key.name}={text!r} ({e.message})")
            case Ok(value):
                values[key.name] = value

    try:
        seed = int(raw.get("seed", "0"))
    except ValueError:
        problems.append(f"seed={raw['seed']!r}")
        seed = 0
    if problems:
        return Err(ConfigError(f"配置值无法解析: {'; '.join(problems)}"))

    raw["seed"] = str(seed)
    return Ok(RunConfig(command, raw, values, output_dir, svg, seed))


def manifest_text(cfg: RunConfig) -> str:
    lines = [
        f"command={cfg.command}",
        f"package_version={__version__}",
        f"schema_version={CSV_SCHEMA_VERSION}",
    ]
    lines += [f"{key}={cfg.raw[key]}" for key in sorted(cfg.raw)]
    return "\n".join(lines) + "\n"


def write_manifest(cfg: RunConfig) -> Path:
    path = cfg.output_dir / MANIFEST_NAME
    write_file(path, manifest_text(cfg))
    return path
