# workers.py
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Dict, Hashable, List, Optional

from config import Settings

logger = logging.getLogger(__name__)


class WorkerPool:
    """
    Pool de processos para itens de trabalho independentes (nós da grade,
    pontos de γ). Os resultados são montados pela chave do item, nunca pela
    ordem de conclusão, então a saída não depende do escalonamento.
    Com workers == 1 tudo roda no próprio processo.
    """

    def __init__(self, workers: Optional[int] = None,
                 on_progress: Optional[Callable[[int, int], None]] = None):
        self.workers = max(1, int(workers or Settings.DEFAULT_WORKERS))
        self.on_progress = on_progress

    def _progress(self, done: int, total: int):
        if self.on_progress is not None:
            self.on_progress(done, total)

    def run_keyed(self, fn: Callable[..., Any], items: Dict[Hashable, tuple]) -> Dict[Hashable, Any]:
        """Executa fn(*args) para cada item e devolve {chave: resultado} em ordem de chave."""
        keys = sorted(items)
        total = len(keys)
        results: Dict[Hashable, Any] = {}

        if self.workers == 1 or total <= 1:
            for done, key in enumerate(keys, start=1):
                results[key] = fn(*items[key])
                self._progress(done, total)
            return {key: results[key] for key in keys}

        logger.info(f"Distribuindo {total} tarefas em {self.workers} processos")
        with ProcessPoolExecutor(max_workers=self.workers) as executor:
            futures = {executor.submit(fn, *items[key]): key for key in keys}
            for done, future in enumerate(as_completed(futures), start=1):
                key = futures[future]
                try:
                    results[key] = future.result()
                except Exception as e:
                    logger.error(f"Erro na tarefa {key}: {str(e)}")
                    for pending in futures:
                        pending.cancel()
                    raise
                self._progress(done, total)
        return {key: results[key] for key in keys}

    def run(self, fn: Callable[..., Any], args_list: List[tuple]) -> List[Any]:
        keyed = self.run_keyed(fn, dict(enumerate(args_list)))
        return [keyed[i] for i in range(len(args_list))]
