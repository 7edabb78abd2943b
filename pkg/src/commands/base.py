"""
Base dos grupos de comandos.
Cada método marcado com @command vira um subcomando registrado no toolkit.
"""

from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Tuple

Sections = Dict[str, Any]


def command(name: str) -> Callable:
    """Marca um método assíncrono do grupo como o subcomando `name`."""
    def decorator(func: Callable) -> Callable:
        func.__command_name__ = name
        return func
    return decorator


class CommandGroup:
    """Grupo de subcomandos com acesso ao toolkit."""

    def __init__(self, app):
        self.app = app

    def get_commands(self) -> Iterator[Tuple[str, Callable]]:
        for attr in dir(type(self)):
            func = getattr(type(self), attr)
            name = getattr(func, "__command_name__", None)
            if name:
                yield name, getattr(self, attr)

    def output_dir(self, scenario) -> Path:
        out = Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out
