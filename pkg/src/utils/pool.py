"""
Execução paralela limitada de tarefas independentes.
Usado pela varredura de posicionamento: cada nó da grade é avaliado isoladamente.
"""

import asyncio
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import structlog

from .errors import ConfigurationError

logger = structlog.get_logger()

T = TypeVar("T")
R = TypeVar("R")

CHUNKS_PER_WORKER = 4


def default_workers() -> int:
    """Número de workers: SCAN_WORKERS ou a contagem de CPUs."""
    value = os.getenv("SCAN_WORKERS")
    if value:
        return parse_workers(value)
    return os.cpu_count() or 1


def parse_workers(value) -> int:
    """Valida um número de workers vindo do ambiente, da configuração ou da linha de comando."""
    try:
        workers = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Número de workers inválido: {value!r}", field="scan.workers")
    if workers < 1:
        raise ConfigurationError(f"Número de workers deve ser ≥ 1: {workers}", field="scan.workers")
    return workers


def _apply_chunk(func: Callable[[T], R], chunk: Sequence[T]) -> List[R]:
    return [func(item) for item in chunk]


async def run_bounded(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """
    Aplica `func` a cada item com no máximo `workers` processos.

    Com um único worker a avaliação é feita no processo atual. O resultado
    preserva a ordem de `items` independentemente do agendamento.

    Args:
        func: Função picklável de um argumento
        items: Itens a processar
        workers: Limite de processos (padrão: default_workers())

    Returns:
        Lista de resultados na ordem dos itens
    """
    items = list(items)
    workers = default_workers() if workers is None else parse_workers(workers)

    if workers <= 1 or len(items) <= 1:
        return _apply_chunk(func, items)

    size = max(1, math.ceil(len(items) / (workers * CHUNKS_PER_WORKER)))
    chunks = [items[k:k + size] for k in range(0, len(items), size)]

    await logger.ainfo("Distribuindo tarefas", items=len(items), chunks=len(chunks), workers=workers)

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [loop.run_in_executor(executor, _apply_chunk, func, chunk) for chunk in chunks]
        results = await asyncio.gather(*futures)

    return [result for chunk in results for result in chunk]
