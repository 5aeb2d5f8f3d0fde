import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError
from .functionals import FD_STEP, Energy, grad_energy, total_energy
from .lab_config import resolve_threads
from .sobolev_core import DEFAULT_MAX_ITERATIONS, Grid, GridFunction, check_same_grid

logger = logging.getLogger(__name__)

DESCENT_TOLERANCE = 1e-7
ARMIJO_CONSTANT = 1e-4
SHRINK = 0.5
MAX_STEP = 1e3
MIN_STEP = 1e-14
START_MODES = 4
START_AMPLITUDE = 0.1


class MinimizationResult(NamedTuple):
    u: GridFunction
    value: float
    diagnostics: Dict[str, Any]


def energy_grid(E: Energy, grid: Optional[Grid] = None) -> Grid:
    """Grid an energy lives on (measure or forcing), or the explicit one."""
    candidates = [g for g in (grid,
                              E.measure.grid if E.measure is not None else None,
                              E.forcing.grid if E.forcing is not None else None) if g is not None]
    if not candidates:
        raise InvalidInputError("Energy has no measure or forcing; pass a grid explicitly")
    for other in candidates[1:]:
        check_same_grid(candidates[0], other)
    return candidates[0]


def _is_trivially_minimized_at_zero(E: Energy, grid: Grid) -> bool:
    if E.forcing is not None and np.any(E.forcing.values):
        return False
    if E.g.growth is None or not E.g.vanishes_at_zero(grid):
        return False
    if E.has_nonlocal_part:
        return E.f.nonnegative and E.f.vanishes_at_zero()
    return True


def _random_start(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Smooth random start: a few low sine modes with small amplitudes."""
    values = np.zeros(grid.num_nodes)
    for mode in range(1, START_MODES + 1):
        values += rng.normal(0.0, START_AMPLITUDE / mode) * np.prod(np.sin(mode * np.pi * grid.nodes), axis=1)
    return values


def _descend(E: Energy, grid: Grid, start: np.ndarray, box: Optional[float], max_iter: int,
             tolerance: float, armijo: float, shrink: float, fd_step: float = FD_STEP) -> Dict[str, Any]:
    """Stiffness-preconditioned projected gradient descent with Armijo backtracking."""
    K = grid.stiffness

    def project(values: np.ndarray) -> np.ndarray:
        return values if box is None else np.clip(values, -box, box)

    def energy(values: np.ndarray) -> float:
        return total_energy(E, GridFunction(grid, values))

    u = project(np.asarray(start, dtype=float))
    value = energy(u)
    grad = grad_energy(E, GridFunction(grid, u), fd_step).values
    step = 1.0
    residual = np.inf
    iterations = 0
    stalled = False

    while iterations < max_iter:
        direction = grid.solve_stiffness(grad)
        projected = u - project(u - direction)
        residual = float(np.sqrt(max(projected @ (K @ projected), 0.0)))
        if residual <= tolerance:
            break

        accepted = False
        while step >= MIN_STEP:
            trial = project(u - step * direction)
            trial_value = energy(trial)
            if trial_value <= value - armijo * float(grad @ (u - trial)):
                accepted = True
                break
            step *= shrink
        if not accepted:
            stalled = True
            break

        u, value = trial, trial_value
        grad = grad_energy(E, GridFunction(grid, u), fd_step).values
        step = min(step / shrink, MAX_STEP)
        iterations += 1
        logger.debug(f"descent iteration {iterations}: energy {value:.12g}, residual {residual:.3g}")

    converged = residual <= tolerance
    return {
        'u': u,
        'value': value,
        'iterations': iterations,
        'residual': residual,
        'converged': converged,
        'capped': not converged and iterations >= max_iter,
        'stalled': stalled,
    }


def minimize_energy(E: Energy, restarts: int = 2, seed: Any = 0, max_iter: int = DEFAULT_MAX_ITERATIONS,
                    tolerance: float = DESCENT_TOLERANCE, armijo: float = ARMIJO_CONSTANT,
                    shrink: float = SHRINK, box: Optional[float] = None,
                    initial: Optional[GridFunction] = None, grid: Optional[Grid] = None,
                    threads: Optional[int] = None, fd_step: float = FD_STEP) -> MinimizationResult:
    """Multi-start projected gradient descent for E = F + G - forcing.

    Restart 0 starts from ``initial`` (or zero), the others from seeded smooth
    random functions. The best stationary point is returned; if no restart
    reaches the tolerance the lowest energy found is returned and the
    diagnostics say so. Stationarity is measured in the stiffness dual norm.

    Args:
        E: Energy to minimize
        restarts: Number of starts (>= 1)
        seed: Seed (int or sequence of ints) for the random starts
        max_iter: Iteration cap per start
        tolerance: Stationarity tolerance
        armijo: Armijo sufficient-decrease constant
        shrink: Backtracking factor
        box: Optional bound lam; iterates are projected onto [-lam, lam]
        initial: Optional start for restart 0
        grid: Grid, when the energy has neither measure nor forcing
        threads: Worker threads for the restarts
        fd_step: Central-difference step for integrands without declared derivatives

    Returns:
        MinimizationResult(u, value, diagnostics)
    """
    grid = energy_grid(E, grid if initial is None else initial.grid)
    if restarts < 1:
        raise InvalidInputError(f"restarts must be >= 1, got {restarts}")
    if box is not None and not box > 0:
        raise InvalidInputError(f"Box bound must be positive, got {box}")

    if initial is None and _is_trivially_minimized_at_zero(E, grid):
        zero = GridFunction.zeros(grid)
        return MinimizationResult(zero, total_energy(E, zero), {
            'method': 'trivial', 'converged': True, 'capped': False, 'iterations': 0,
            'residual': 0.0, 'best_restart': 0, 'restarts': [],
        })

    starts: List[np.ndarray] = [initial.values.copy() if initial is not None else np.zeros(grid.num_nodes)]
    for child in np.random.SeedSequence(seed).spawn(restarts - 1):
        starts.append(_random_start(grid, np.random.default_rng(child)))

    def run(start: np.ndarray) -> Dict[str, Any]:
        return _descend(E, grid, start, box, max_iter, tolerance, armijo, shrink, fd_step)

    workers = min(resolve_threads() if threads is None else max(1, threads), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(start) for start in starts]

    pool_candidates = [i for i, o in enumerate(outcomes) if o['converged']] or list(range(len(outcomes)))
    best_index = pool_candidates[0]
    for index in pool_candidates:
        if outcomes[index]['value'] < outcomes[best_index]['value']:
            best_index = index
    best = outcomes[best_index]

    if not best['converged']:
        logger.warning(f"Energy minimization did not reach tolerance {tolerance:g}: "
                       f"residual {best['residual']:.3g} after {best['iterations']} iterations")

    diagnostics = {
        'method': 'projected_gradient',
        'converged': bool(best['converged']),
        'capped': bool(best['capped']),
        'iterations': int(best['iterations']),
        'residual': float(best['residual']),
        'best_restart': best_index,
        'restarts': [{k: (float(v) if isinstance(v, (float, np.floating)) else v)
                      for k, v in o.items() if k != 'u'} for o in outcomes],
    }
    return MinimizationResult(GridFunction(grid, best['u']), float(best['value']), diagnostics)
