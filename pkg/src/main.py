"""
Toolkit de Observabilidade Regional
Linha de comando: `check`, `simulate`, `counterexample`, `scan` e `verify`.
O relatório JSON vai para stdout; os logs vão para stderr.
"""

import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
import structlog

# Configurar structlog
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.processors.JSONRenderer()
    ],
    context_class=dict,
    logger_factory=structlog.stdlib.LoggerFactory(),
    cache_logger_on_first_use=True,
)

logger = structlog.get_logger()

# Carregar variáveis de ambiente
load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

COMMANDS = ("check", "simulate", "counterexample", "scan", "verify")


def build_parser() -> argparse.ArgumentParser:
    """Parser com um subcomando por operação e as opções comuns."""
    parser = argparse.ArgumentParser(
        prog="neumann-observer",
        description="Observabilidade regional de sistemas de difusão com condições de Neumann"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", type=Path, default=None, help="Arquivo de cenário (JSON plano)")
        sub.add_argument("--out", default=None, help="Diretório de saída")
        sub.add_argument("--seed", type=int, default=None, help="Semente do gerador aleatório")
        sub.add_argument("--archive", default=None, help="Banco SQLite para arquivar a execução")
        if name == "scan":
            sub.add_argument("--resolution", type=int, default=None, help="Nós por eixo da grade")
            sub.add_argument("--workers", type=int, default=None, help="Processos da varredura")

    return parser


def configure_logging(level: str = LOG_LEVEL):
    """Logging padrão em stderr (stdout carrega o relatório)."""
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level.upper(), logging.INFO),
    )


async def run_command(args: argparse.Namespace) -> int:
    """Cria o toolkit, executa o subcomando e imprime o relatório."""
    from app import ObserverToolkit
    from utils.database import archive_url_from_env
    from utils.reports import render_report

    toolkit = ObserverToolkit(archive_url=args.archive or archive_url_from_env())
    try:
        await toolkit.setup_hook()
        result = await toolkit.run(
            args.command,
            config_path=args.config,
            overrides={
                "out": args.out,
                "seed": args.seed,
                "resolution": getattr(args, "resolution", None),
                "workers": getattr(args, "workers", None),
            }
        )
    finally:
        await toolkit.close()

    print(render_report(result.report))
    if result.message:
        print(result.message, file=sys.stderr)
    return result.exit_code


def main(argv: Optional[List[str]] = None):
    """Função principal do CLI."""
    args = build_parser().parse_args(argv)
    configure_logging()

    try:
        code = asyncio.run(run_command(args))
    except KeyboardInterrupt:
        logger.info("Execução interrompida pelo usuário")
        code = 1
    except Exception as e:
        from utils.errors import exit_code_for
        logger.error("Erro fatal", error=str(e))
        code = exit_code_for(e)

    sys.exit(code)


if __name__ == "__main__":
    main()
