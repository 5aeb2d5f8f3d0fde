"""
Report types and numeric helpers shared by the experiments and the exporter.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

REPORT_COLUMNS = ['k', 'cut_norm_gap', 'mass_gap', 'integral_gap', 'min_k', 'min_limit', 'minimizer_dist', 'verdict']
DEFAULT_FIT_FLOOR = 1e-12


@dataclass
class Verdict:
    """Outcome of one assertion together with the tolerance it was held to."""
    passed: bool
    value: Optional[float]
    tolerance: Optional[float]
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': bool(self.passed),
            'value': json_number(self.value),
            'tolerance': json_number(self.tolerance),
            'detail': self.detail,
        }


@dataclass
class ConvergenceReport:
    """Per-k rows plus verdicts for one experiment or command.

    ``kind`` is 'convergence' for per-k reports (rows carry REPORT_COLUMNS) and
    'scalar' for single-shot commands (rows carry quantity/value pairs).
    """
    name: str
    command: str
    rows: pd.DataFrame
    verdicts: Dict[str, Verdict] = field(default_factory=dict)
    decay_exponent: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    kind: str = 'convergence'

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def csv_frame(self) -> pd.DataFrame:
        if self.kind == 'convergence':
            return self.rows.reindex(columns=REPORT_COLUMNS)
        return self.rows

    def to_dict(self) -> Dict[str, Any]:
        exponent = self.decay_exponent
        return {
            'name': self.name,
            'command': self.command,
            'kind': self.kind,
            'passed': self.passed,
            'decay_exponent': json_number(exponent),
            'decay_at_floor': exponent is not None and math.isinf(exponent),
            'verdicts': {name: verdict.to_dict() for name, verdict in self.verdicts.items()},
            'rows': convert_to_records(self.rows),
            'metadata': self.metadata,
        }


def json_number(value: Any) -> Optional[float]:
    """Float for JSON output; NaN and infinities become None."""
    if value is None:
        return None
    try:
        number = float(value)
    except (TypeError, ValueError):
        return None
    return number if math.isfinite(number) else None


def convert_to_records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    """DataFrame rows as JSON-ready dicts (non-finite floats become None)."""
    if df.empty:
        return []
    records = []
    for record in df.to_dict('records'):
        clean = {}
        for key, value in record.items():
            if isinstance(value, (float, np.floating)):
                clean[key] = json_number(value)
            elif isinstance(value, np.integer):
                clean[key] = int(value)
            elif isinstance(value, np.bool_):
                clean[key] = bool(value)
            else:
                clean[key] = value
        records.append(clean)
    return records


def ensure_numeric(value: Any, default: float = float('nan')) -> float:
    """Float conversion with a fallback for None and unparsable values."""
    if value is None:
        return default
    try:
        return float(value)
    except (ValueError, TypeError):
        return default


def relative_gap(value: float, reference: float, floor: float = 1e-300) -> float:
    return abs(value - reference) / max(abs(reference), floor)


def liminf_window_start(k_list: Sequence[int]) -> int:
    """First k of the liminf window, ceil(max k / 2)."""
    return int(math.ceil(max(k_list) / 2))


def is_nonincreasing(values: Sequence[float], slack: float = 0.0) -> bool:
    values = [float(v) for v in values]
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def fit_decay_exponent(k_values: Sequence[Union[int, float]], gaps: Sequence[float],
                       floor: float = DEFAULT_FIT_FLOOR) -> float:
    """Least-squares slope r in gap ~ C k^-r over the last half of the k list.

    Values at or below ``floor`` are dropped as converged; when fewer than two
    points remain the gap has reached the floor and +inf is returned. NaN is
    returned when the tail holds too few usable points for any other reason.
    """
    k_array = np.asarray(k_values, dtype=float)
    gap_array = np.abs(np.asarray(gaps, dtype=float))
    order = np.argsort(k_array)
    k_array, gap_array = k_array[order], gap_array[order]
    half = len(k_array) // 2
    k_tail, gap_tail = k_array[half:], gap_array[half:]

    finite = np.isfinite(gap_tail)
    if not finite.any():
        return float('nan')
    k_tail, gap_tail = k_tail[finite], gap_tail[finite]
    usable = gap_tail > floor
    if usable.sum() < 2:
        return float('inf') if (~usable).any() else float('nan')
    slope, _ = np.polyfit(np.log(k_tail[usable]), np.log(gap_tail[usable]), 1)
    return float(-slope)


def build_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Rows sorted by k with the report columns first."""
    frame = pd.DataFrame(rows)
    if frame.empty:
        return pd.DataFrame(columns=REPORT_COLUMNS)
    for column in REPORT_COLUMNS:
        if column not in frame.columns:
            frame[column] = 'ok' if column == 'verdict' else np.nan
    extra = [c for c in frame.columns if c not in REPORT_COLUMNS]
    frame = frame[REPORT_COLUMNS + extra].sort_values('k').reset_index(drop=True)
    return frame
