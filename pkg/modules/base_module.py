import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .cut_norm import cut_norm_exact_p2
from .errors import InvalidInputError, LabError, SizeLimitError
from .families import SequenceFamily
from .lab_config import LabSettings, resolve_threads
from .measures import PairMeasure, cut_distance_inputs, total_mass
from .report_utils import ConvergenceReport, Verdict, build_frame, fit_decay_exponent

logger = logging.getLogger(__name__)


class BaseExperiment:
    """Common plumbing for the per-k experiments over a sequence family."""

    name = 'experiment'
    gap_column = 'integral_gap'
    fit_floor = 1e-12

    def __init__(self, family: SequenceFamily, k_list: Sequence[int], settings: Optional[LabSettings] = None,
                 seed: int = 0, threads: Optional[int] = None, compute_cut_norm: bool = True):
        """Initialize the experiment.

        Args:
            family: Sequence family providing (mu_k, g_k) and the limit
            k_list: Indices to evaluate; duplicates are dropped and the list sorted
            settings: Lab settings (solver tolerances, restarts)
            seed: Base seed; every k gets its own stream derived from (seed, k)
            threads: Worker threads for the per-k loop (default: resolve_threads)
            compute_cut_norm: Whether to record ||mu_k - mu|| per row
        """
        k_values = sorted({int(k) for k in k_list})
        if not k_values:
            raise InvalidInputError("k_list must not be empty")
        if k_values[0] < 1:
            raise InvalidInputError(f"Sequence indices must be >= 1, got {k_values[0]}")
        self.family = family
        self.grid = family.grid
        self.k_list = k_values
        self.settings = settings or LabSettings()
        self.seed = int(seed)
        self.threads = resolve_threads(self.settings) if threads is None else max(1, int(threads))
        self.compute_cut_norm = compute_cut_norm
        self._frame = None
        logger.info(f"Initialized {self.__class__.__name__} on family {family.family_id} with k={self.k_list}")

    @property
    def frame(self) -> pd.DataFrame:
        """Per-k rows, computed once and cached."""
        if self._frame is None:
            self._frame = self._compute_frame()
        return self._frame

    @property
    def inner_threads(self) -> int:
        """Threads left for solvers running inside a per-k task."""
        return 1 if self._workers() > 1 else self.threads

    def _workers(self) -> int:
        return min(self.threads, len(self.k_list))

    def seed_for(self, k: int) -> List[int]:
        return [self.seed, int(k)]

    def _compute_frame(self) -> pd.DataFrame:
        return build_frame(map_in_order(self._safe_row, self.k_list, self._workers()))

    def _safe_row(self, k: int) -> Dict[str, Any]:
        try:
            row = self._row(k)
            row.setdefault('verdict', 'ok')
            logger.info(f"{self.name} k={k}: {self.gap_column}={row.get(self.gap_column, float('nan')):.6g}")
            return row
        except LabError as e:
            logger.error(f"{self.name} failed at k={k}: {e}")
            return {'k': k, 'verdict': 'error', 'error': str(e)}
        except (ArithmeticError, np.linalg.LinAlgError) as e:
            logger.error(f"Numerical failure in {self.name} at k={k}: {e}")
            return {'k': k, 'verdict': 'error', 'error': str(e)}

    def _row(self, k: int) -> Dict[str, Any]:
        raise NotImplementedError

    def _verdicts(self, frame: pd.DataFrame) -> Dict[str, Verdict]:
        raise NotImplementedError

    def measure_gaps(self, mu_k: PairMeasure, mu: PairMeasure) -> Dict[str, float]:
        """Cut-norm (exact, p = 2) and mass gaps between mu_k and the limit."""
        gaps = {'mass_gap': abs(total_mass(mu_k) - total_mass(mu)), 'cut_norm_gap': float('nan')}
        if self.compute_cut_norm:
            try:
                gaps['cut_norm_gap'] = cut_norm_exact_p2(cut_distance_inputs(mu_k, mu)).value
            except SizeLimitError as e:
                logger.warning(f"Skipping cut-norm gap: {e}")
        return gaps

    def successful_rows(self, frame: pd.DataFrame) -> pd.DataFrame:
        return frame[frame['verdict'] != 'error']

    def run(self) -> ConvergenceReport:
        """Compute all rows, fit the decay exponent and evaluate the verdicts."""
        logger.info(f"Running {self.name} experiment")
        frame = self.frame
        ok = self.successful_rows(frame)
        exponent = fit_decay_exponent(ok['k'], ok[self.gap_column], self.fit_floor) if len(ok) else float('nan')

        verdicts = {'rows_computed': Verdict(len(ok) == len(frame), float(len(frame) - len(ok)), 0.0,
                                             'number of k that failed')}
        if len(ok):
            verdicts.update(self._verdicts(ok))

        report = ConvergenceReport(
            name=self.name,
            command=self.name,
            rows=frame,
            verdicts=verdicts,
            decay_exponent=exponent,
            metadata=self.metadata(),
        )
        logger.info(f"{self.name} finished: passed={report.passed}, decay exponent {exponent:.4g}")
        return report

    def metadata(self) -> Dict[str, Any]:
        return {
            'family': self.family.family_id,
            'family_params': self.family.params,
            'grid': self.grid.describe(),
            'k_list': self.k_list,
            'seed': self.seed,
            'gap_column': self.gap_column,
        }


def map_in_order(func: Callable[[Any], Any], items: Sequence[Any], threads: int) -> List[Any]:
    """Map ``func`` over ``items`` with up to ``threads`` workers, results in input order."""
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]
