"""
Toolkit de observabilidade regional.
Objeto de aplicação: carrega os grupos de comandos, resolve o cenário, executa,
escreve o relatório e, opcionalmente, arquiva a execução.
"""

import importlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, List, Optional

import structlog

from utils.database import RunArchive
from utils.errors import (
    EXIT_OK,
    ConfigurationError,
    describe_error,
    handle_command_error
)
from utils.reports import build_run_report, error_report, write_report
from utils.scenario import (
    Scenario,
    apply_overrides,
    load_defaults,
    load_scenario,
    scenario_to_flat
)

logger = structlog.get_logger()

COMMAND_MODULES = (
    "commands.analysis",
    "commands.simulation",
    "commands.counterexample",
)

CommandFunc = Callable[[Scenario], Awaitable[Dict[str, Any]]]


@dataclass
class RunResult:
    """Resultado de uma execução de comando."""

    command: str
    exit_code: int
    report: Dict[str, Any]
    report_path: Optional[Path] = None
    message: Optional[str] = None


class ObserverToolkit:
    """Classe principal do toolkit."""

    def __init__(self, defaults: Optional[Dict[str, Any]] = None, archive_url: Optional[str] = None):
        self.default_config = load_defaults() if defaults is None else defaults
        self.archive_url = archive_url
        self.archive: Optional[RunArchive] = None

        self.commands: Dict[str, CommandFunc] = {}
        self.groups: List[Any] = []
        self.builtin_scenarios: Dict[str, Callable[[Dict[str, Any]], Scenario]] = {}

    async def setup_hook(self):
        """Inicialização assíncrona: arquivo de execuções e comandos."""
        await logger.ainfo("Iniciando setup do toolkit...")

        if self.archive_url:
            self.archive = RunArchive(self.archive_url)
            await self.archive.connect()

        await self.load_commands()

    async def load_commands(self):
        """Carrega todos os grupos de comandos."""
        for name in COMMAND_MODULES:
            try:
                module = importlib.import_module(name)
                await module.setup(self)
                await logger.ainfo("Grupo de comandos carregado", module=name)
            except Exception as e:
                await logger.aerror("Erro ao carregar grupo de comandos", module=name, error=str(e))
                raise

    async def add_group(self, group):
        """Registra os subcomandos de um grupo."""
        for name, func in group.get_commands():
            if name in self.commands:
                raise ConfigurationError(f"Comando registrado duas vezes: {name}", field="command")
            self.commands[name] = func
        self.groups.append(group)

    def add_builtin_scenario(self, command: str, factory: Callable[[Dict[str, Any]], Scenario]):
        """Cenário usado por `command` quando nenhum --config é dado."""
        self.builtin_scenarios[command] = factory

    def resolve_scenario(self, command: str, config_path: Optional[Path] = None) -> Scenario:
        """
        Escolhe o cenário de uma execução.

        Args:
            command: Nome do subcomando
            config_path: Arquivo de cenário (opcional)

        Returns:
            O cenário do arquivo, o embutido do comando ou os padrões
        """
        if config_path is not None:
            return load_scenario(Path(config_path), self.default_config)
        factory = self.builtin_scenarios.get(command)
        if factory is not None:
            return factory(self.default_config)
        return load_scenario(None, self.default_config)

    async def run(
        self,
        command: str,
        scenario: Optional[Scenario] = None,
        *,
        config_path: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None
    ) -> RunResult:
        """
        Executa um subcomando e produz seu relatório.

        Erros do toolkit viram um relatório com status `error` e o código de
        saída correspondente; o relatório é escrito mesmo nesse caso.

        Args:
            command: Nome do subcomando
            scenario: Cenário já montado (tem precedência sobre config_path)
            config_path: Arquivo de cenário
            overrides: Opções da linha de comando (out, resolution, seed, workers)

        Returns:
            RunResult
        """
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        out_dir = Path(overrides.get("out") or self.default_config.get("output.dir", "out"))
        config: Dict[str, Any] = {}
        seed = overrides.get("seed")
        message = None

        try:
            func = self.commands.get(command)
            if func is None:
                raise ConfigurationError(f"Comando desconhecido: {command}", field="command")

            if scenario is None:
                scenario = self.resolve_scenario(command, config_path)
            scenario = apply_overrides(scenario, **overrides)
            config = scenario_to_flat(scenario, self.default_config)
            seed = scenario.seed
            out_dir = Path(scenario.output_dir)

            await logger.ainfo("Executando comando", command=command, seed=seed)
            sections = await func(scenario)
            report = build_run_report(command, seed, config, **sections)
            code = EXIT_OK

        except Exception as e:
            code, message = await handle_command_error(command, e)
            report = error_report(command, seed, config, describe_error(e))

        path = write_report(report, out_dir, command)

        if self.archive is not None:
            await self.archive.save_run(command, report, code)

        return RunResult(command=command, exit_code=code, report=report, report_path=path, message=message)

    async def close(self):
        """Fecha o toolkit e limpa recursos."""
        await logger.ainfo("Encerrando toolkit...")

        if self.archive is not None:
            await self.archive.close()
            self.archive = None
