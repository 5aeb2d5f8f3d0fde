"""
Sobolev cut norm of measures on Omega x Omega and the classical graphon cut norm.

||mu||_cut = sup { |int phi(x) psi(y) dmu| : ||phi||_{1,p} <= 1, ||psi||_{1,p} <= 1 }

Three methods are provided and certify each other: the exact p=2 value (top
singular value of the pairing matrix after whitening by the stiffness
Cholesky factor), alternating best responses for any p, and a randomized
brute-force lower bound for small grids.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.sparse.linalg import svds

from .errors import InvalidInputError, NonFiniteValueError, SizeLimitError
from .lab_config import resolve_threads
from .measures import PairMeasure
from .sobolev_core import (DEFAULT_TOLERANCE, Grid, GridFunction, dual_norm_of_load, make_grid,
                           norms_of_columns, validate_exponent)

logger = logging.getLogger(__name__)

EXACT_NODE_LIMIT = 4096
BRUTEFORCE_NODE_LIMIT = 64
SUBSET_CELL_LIMIT = 14
DENSE_SVD_LIMIT = 512
BRUTEFORCE_CHUNK = 4096
POLISHED_CANDIDATES = 8


@dataclass(frozen=True)
class CutNormResult:
    """Cut-norm value with the maximizing pair.

    ``lower_bound`` is set when the value is only certified from below.
    """
    value: float
    phi: GridFunction
    psi: GridFunction
    method: str
    lower_bound: bool = False
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GraphonCutResult:
    value: float
    rows: np.ndarray
    cols: np.ndarray
    mode: str


def _zero_result(grid: Grid, method: str, lower_bound: bool) -> CutNormResult:
    zero = GridFunction.zeros(grid)
    return CutNormResult(0.0, zero, zero, method, lower_bound, {'zero_measure': True})


@lru_cache(maxsize=16)
def _stiffness_cholesky(grid: Grid) -> np.ndarray:
    return cholesky(grid.stiffness.toarray(), lower=True)


def _whitened_pairing(mu: PairMeasure) -> Tuple[np.ndarray, np.ndarray]:
    """(L, L^-1 W L^-T) with K = L L^T."""
    L = _stiffness_cholesky(mu.grid)
    M = solve_triangular(L, mu.pairing_matrix, lower=True)
    M = solve_triangular(L, M.T, lower=True).T
    return L, M


def _top_singular_triplet(matrix: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    if matrix.shape[0] <= DENSE_SVD_LIMIT:
        U, S, Vt = np.linalg.svd(matrix)
        return float(S[0]), U[:, 0], Vt[0]
    start = np.random.default_rng(0).standard_normal(matrix.shape[1])
    U, S, Vt = svds(matrix, k=1, v0=start)
    return float(S[0]), U[:, 0], Vt[0]


def _check_exact_size(grid: Grid, limit: int, what: str) -> None:
    if grid.num_nodes > limit:
        raise SizeLimitError(what, grid.num_nodes, limit)


def cut_norm_exact_p2(mu: PairMeasure) -> CutNormResult:
    """Exact cut norm for p=2 as a generalized singular value.

    Args:
        mu: Measure on a grid with at most 4096 nodes

    Returns:
        CutNormResult with the value and the maximizing pair
    """
    grid = mu.grid
    _check_exact_size(grid, EXACT_NODE_LIMIT, 'exact cut norm grid')
    W = mu.pairing_matrix
    if not np.any(W):
        return _zero_result(grid, 'exact_p2', False)

    L, M = _whitened_pairing(mu)
    sigma, left, right = _top_singular_triplet(M)
    phi = solve_triangular(L.T, left, lower=False)
    psi = solve_triangular(L.T, right, lower=False)
    pairing = float(phi @ W @ psi)
    if pairing < 0:
        phi, pairing = -phi, -pairing
    logger.debug(f"Exact p=2 cut norm {pairing:.6g} (singular value {sigma:.6g})")
    return CutNormResult(pairing, GridFunction(grid, phi), GridFunction(grid, psi), 'exact_p2', False,
                         {'singular_value': sigma})


def _normalize(grid: Grid, vector: np.ndarray, p: float) -> np.ndarray:
    norm = norms_of_columns(grid, vector[:, None], p)[0]
    return vector / norm if norm > 0 else vector


def _alternate(grid: Grid, W: np.ndarray, psi0: np.ndarray, p: float, relative_improvement: float,
               max_alternations: int, tolerance: float) -> Dict[str, Any]:
    psi = _normalize(grid, psi0, p)
    phi = None
    previous = 0.0
    value = 0.0
    alternations = 0
    capped = True
    while alternations < max_alternations:
        response = dual_norm_of_load(grid, W @ psi, p, tolerance=tolerance, initial=phi)
        phi = response.maximizer.values
        response = dual_norm_of_load(grid, W.T @ phi, p, tolerance=tolerance, initial=psi)
        psi = response.maximizer.values
        value = response.value
        alternations += 1
        if value <= 0 or value - previous <= relative_improvement * value:
            capped = False
            break
        previous = value

    if phi is None or not np.any(phi) or not np.any(psi):
        return {'value': 0.0, 'phi': np.zeros(grid.num_nodes), 'psi': np.zeros(grid.num_nodes),
                'alternations': alternations, 'capped': False}
    pairing = float(phi @ W @ psi)
    if pairing < 0:
        phi, pairing = -phi, -pairing
    return {'value': pairing, 'phi': phi, 'psi': psi, 'alternations': alternations, 'capped': capped}


def cut_norm_alternating(mu: PairMeasure, p: float, seed: int = 0, restarts: int = 8,
                         initial: Optional[Sequence[np.ndarray]] = None,
                         relative_improvement: float = 1e-10, max_alternations: int = 1000,
                         tolerance: float = DEFAULT_TOLERANCE,
                         threads: Optional[int] = None) -> CutNormResult:
    """Lower bound on the cut norm by alternating best responses.

    With psi fixed the phi-problem is a dual-norm problem, and vice versa.
    Restart 0 starts from the top right singular vector of the pairing matrix,
    the others from seeded random vectors; extra ``initial`` psi vectors are
    appended. Restarts run concurrently and are merged by max, lowest restart
    index winning ties.
    """
    p = validate_exponent(p)
    if restarts < 1:
        raise InvalidInputError(f"restarts must be >= 1, got {restarts}")
    grid = mu.grid
    W = mu.pairing_matrix
    if not np.any(W):
        return _zero_result(grid, 'alternating', p != 2.0)

    _, _, top_right = _top_singular_triplet(W)
    starts = [top_right]
    for child in np.random.SeedSequence(seed).spawn(restarts - 1):
        starts.append(np.random.default_rng(child).standard_normal(grid.num_nodes))
    for vector in initial or ():
        starts.append(np.asarray(vector, dtype=float).reshape(-1))

    def run(start: np.ndarray) -> Dict[str, Any]:
        return _alternate(grid, W, start, p, relative_improvement, max_alternations, tolerance)

    workers = min(resolve_threads() if threads is None else max(1, threads), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(start) for start in starts]

    best_index = 0
    for index, outcome in enumerate(outcomes):
        if outcome['value'] > outcomes[best_index]['value']:
            best_index = index
    best = outcomes[best_index]
    capped = any(o['capped'] for o in outcomes)
    if capped:
        logger.warning(f"Alternating cut norm hit the cap of {max_alternations} alternations")

    diagnostics = {
        'restart_values': [float(o['value']) for o in outcomes],
        'alternations': [int(o['alternations']) for o in outcomes],
        'best_restart': best_index,
        'capped': capped,
    }
    return CutNormResult(float(best['value']), GridFunction(grid, best['phi']), GridFunction(grid, best['psi']),
                         'alternating', p != 2.0, diagnostics)


def cut_norm_bruteforce(mu: PairMeasure, p: float, budget: int = 100000, seed: int = 0) -> float:
    """Randomized lower bound on the cut norm for small grids.

    Every candidate is an admissible unit pair, so the result never exceeds the
    true norm. Normalized coordinate pairs are always included. At p=2 each
    random psi is paired with its exact best response phi; at other p the best
    random pairs are polished by one best-response step.
    """
    p = validate_exponent(p)
    grid = mu.grid
    _check_exact_size(grid, BRUTEFORCE_NODE_LIMIT, 'brute-force cut norm grid')
    W = mu.pairing_matrix
    if not np.any(W):
        return 0.0

    unit = norms_of_columns(grid, np.eye(grid.num_nodes), p)
    best = float(np.max(np.abs(W) / np.outer(unit, unit)))
    rng = np.random.default_rng(seed)
    remaining = int(budget)

    if p == 2.0:
        _, M = _whitened_pairing(mu)
        while remaining > 0:
            size = min(BRUTEFORCE_CHUNK, remaining)
            Z = rng.standard_normal((grid.num_nodes, size))
            Z /= np.linalg.norm(Z, axis=0)
            best = max(best, float(np.max(np.linalg.norm(M @ Z, axis=0))))
            remaining -= size
        return best

    candidates: List[Tuple[float, np.ndarray]] = []
    while remaining > 0:
        size = min(BRUTEFORCE_CHUNK, remaining)
        Phi = rng.standard_normal((grid.num_nodes, size))
        Psi = rng.standard_normal((grid.num_nodes, size))
        Phi /= norms_of_columns(grid, Phi, p)
        Psi /= norms_of_columns(grid, Psi, p)
        values = np.abs(np.sum(Phi * (W @ Psi), axis=0))
        top = np.argsort(values)[::-1][:POLISHED_CANDIDATES]
        candidates.extend((float(values[i]), Psi[:, i].copy()) for i in top)
        remaining -= size

    candidates.sort(key=lambda item: item[0], reverse=True)
    for value, psi in candidates[:POLISHED_CANDIDATES]:
        best = max(best, value)
        best = max(best, dual_norm_of_load(grid, W @ psi, p).value)
    return best


def product_dual_norm(mu: PairMeasure, p: float = 2.0) -> float:
    """Discrete ||mu||_{-1,q} on the product grid (1D measures only).

    The pairing matrix W is read as a load on the 2D grid with node (i, j)
    carrying W[i, j].
    """
    if mu.grid.dim != 1:
        raise InvalidInputError("The product-grid dual norm is defined for 1D measures only")
    product_grid = make_grid(2, mu.grid.n)
    return dual_norm_of_load(product_grid, np.asarray(mu.pairing_matrix).ravel(), validate_exponent(p)).value


def graphon_from_function(func: Callable[[np.ndarray, np.ndarray], Any], m: int) -> np.ndarray:
    """Sample a kernel on (0,1)^2 at the midpoints of an m x m partition."""
    mids = (np.arange(m) + 0.5) / m
    return np.broadcast_to(np.asarray(func(mids[:, None], mids[None, :]), dtype=float), (m, m)).copy()


def _graphon_subset_exact(A: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    m = A.shape[0]
    # rows of `subsets` in lexicographic order of their indicator strings
    subsets = (np.arange(2 ** m)[:, None] >> np.arange(m)[::-1]) & 1
    column_sums = subsets @ A
    positive = np.clip(column_sums, 0.0, None).sum(axis=1)
    negative = np.clip(-column_sums, 0.0, None).sum(axis=1)
    i_pos, i_neg = int(np.argmax(positive)), int(np.argmax(negative))
    if positive[i_pos] >= negative[i_neg]:
        return float(positive[i_pos]), subsets[i_pos].astype(bool), column_sums[i_pos] > 0
    return float(negative[i_neg]), subsets[i_neg].astype(bool), column_sums[i_neg] < 0


def _graphon_alternating(A: np.ndarray, seed: int, restarts: int) -> Tuple[float, np.ndarray, np.ndarray]:
    m = A.shape[0]
    U, _, Vt = np.linalg.svd(A)
    starts = [np.ones(m, dtype=bool), Vt[0] > 0, Vt[0] < 0, U[:, 0] > 0, U[:, 0] < 0]
    rng = np.random.default_rng(seed)
    starts.extend(rng.random(m) < 0.5 for _ in range(restarts))

    best = (-np.inf, np.zeros(m, dtype=bool), np.zeros(m, dtype=bool))
    for start in starts:
        for sign in (1.0, -1.0):
            cols = np.asarray(start, dtype=bool)
            rows = np.zeros(m, dtype=bool)
            for _ in range(1000):
                new_rows = sign * (A @ cols) > 0
                new_cols = sign * (A.T @ new_rows) > 0
                if np.array_equal(new_rows, rows) and np.array_equal(new_cols, cols):
                    break
                rows, cols = new_rows, new_cols
            value = sign * float(rows @ A @ cols)
            if value > best[0]:
                best = (value, rows, cols)
    return max(best[0], 0.0), best[1], best[2]


def graphon_cut_norm(rho: np.ndarray, mode: str = 'alternating', seed: int = 0,
                     restarts: int = 8) -> GraphonCutResult:
    """Classical cut norm sup |int rho(x, y) phi(x) psi(y)| over [0,1]-valued phi, psi.

    Args:
        rho: m x m cell values of a (possibly signed) kernel on (0,1)^2
        mode: 'subset_exact' (m <= 14) or 'alternating'
        seed: Seed for the random alternating starts
        restarts: Number of random alternating starts

    Returns:
        GraphonCutResult with the value and the maximizing indicators
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInputError(f"Graphon must be a square matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise NonFiniteValueError('graphon')
    m = rho.shape[0]
    A = rho / (m * m)

    if mode == 'subset_exact':
        if m > SUBSET_CELL_LIMIT:
            raise SizeLimitError('subset enumeration', m, SUBSET_CELL_LIMIT)
        value, rows, cols = _graphon_subset_exact(A)
    elif mode == 'alternating':
        value, rows, cols = _graphon_alternating(A, seed, restarts)
    else:
        raise InvalidInputError(f"Unknown graphon cut norm mode {mode!r}")
    return GraphonCutResult(float(value), rows, cols, mode)
