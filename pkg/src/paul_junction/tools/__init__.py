"""子命令集合 - 每个命令对应一个核心操作"""

from .alpha_sweep import AlphaSweepCommand
from .base import EXIT_LOST, EXIT_OK, EXIT_USAGE, Command, CommandResult
from .crosscheck import CrosscheckCommand
from .fieldgen import FieldGenCommand, NullFindCommand
from .junction_map import JunctionMapCommand
from .secular import SecularCommand
from .stability_map import StabilityMapCommand
from .transfer_sim import TransferSimCommand

COMMANDS: dict[str, Command] = {
    c.name: c
    for c in (
        StabilityMapCommand(),
        JunctionMapCommand(),
        TransferSimCommand(),
        AlphaSweepCommand(),
        FieldGenCommand(),
        NullFindCommand(),
        SecularCommand(),
        CrosscheckCommand(),
    )
}

__all__ = ["COMMANDS", "Command", "CommandResult", "EXIT_LOST", "EXIT_OK", "EXIT_USAGE"]
