"""
Discrete Sobolev space machinery on uniform grids of (0,1)^dim.

Interior nodes carry the values of a grid function, boundary nodes are
implicitly zero. Gradients are forward differences along edges, one edge per
pair of neighbouring nodes (including the edges that touch the boundary). The
discrete norm is

    ||u||_{1,p}^p = h^dim * sum_e |grad_e u|^p

so in 2D the axis contributions are summed edgewise (an l^p-type norm).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import splu, spsolve

from .errors import GridMismatchError, InvalidInputError, NonFiniteValueError, SizeLimitError

logger = logging.getLogger(__name__)

MAX_N_1D = 4096
MAX_N_2D = 256
DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 100000
NEWTON_POLISH_STEPS = 50


@dataclass(frozen=True)
class Grid:
    """Uniform grid of (0,1)^dim with n interior nodes per axis.

    Node ``i*n + j`` sits at ``((i+1)h, (j+1)h)`` in 2D (axis 0 first).
    Quadrature cells are the (n+1)^dim squares between consecutive nodes,
    boundary included.
    """
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidInputError(f"Grid dimension must be 1 or 2, got {self.dim}")
        if self.n < 1:
            raise InvalidInputError(f"Grid needs at least one interior node, got n={self.n}")
        limit = MAX_N_1D if self.dim == 1 else MAX_N_2D
        if self.n > limit:
            raise SizeLimitError(f"{self.dim}D grid", self.n, limit)

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def cell_weight(self) -> float:
        return self.h ** self.dim

    @property
    def num_nodes(self) -> int:
        return self.n ** self.dim

    @property
    def num_cells(self) -> int:
        return (self.n + 1) ** self.dim

    @property
    def num_edges(self) -> int:
        return self.dim * (self.n + 1) * self.n ** (self.dim - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Coordinates of the interior nodes, shape (num_nodes, dim)."""
        axis = (np.arange(self.n) + 1.0) * self.h
        return _tensor_points(axis, self.dim)

    @cached_property
    def cell_midpoints(self) -> np.ndarray:
        """Midpoints of the quadrature cells, shape (num_cells, dim)."""
        axis = (np.arange(self.n + 1) + 0.5) * self.h
        return _tensor_points(axis, self.dim)

    @cached_property
    def edges(self) -> np.ndarray:
        """Oriented edges as (tail, head) node indices; -1 marks a boundary node."""
        n = self.n
        e = np.arange(n + 1)
        tail_1d = e - 1
        head_1d = np.where(e < n, e, -1)
        if self.dim == 1:
            return np.column_stack([tail_1d, head_1d])

        j = np.arange(n)
        # axis 0: edge (e, j) between nodes (e-1, j) and (e, j)
        tail0 = np.where(tail_1d[:, None] >= 0, tail_1d[:, None] * n + j[None, :], -1).ravel()
        head0 = np.where(head_1d[:, None] >= 0, head_1d[:, None] * n + j[None, :], -1).ravel()
        # axis 1: edge (i, e) between nodes (i, e-1) and (i, e)
        tail1 = np.where(tail_1d[None, :] >= 0, j[:, None] * n + tail_1d[None, :], -1).ravel()
        head1 = np.where(head_1d[None, :] >= 0, j[:, None] * n + head_1d[None, :], -1).ravel()
        return np.column_stack([np.concatenate([tail0, tail1]), np.concatenate([head0, head1])])

    @cached_property
    def edge_axis(self) -> np.ndarray:
        per_axis = (self.n + 1) * self.n ** (self.dim - 1)
        return np.repeat(np.arange(self.dim), per_axis)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        """Coordinates where edge gradients live, shape (num_edges, dim)."""
        h = self.h
        half = (np.arange(self.n + 1) + 0.5) * h
        if self.dim == 1:
            return half[:, None]
        full = (np.arange(self.n) + 1.0) * h
        axis0 = np.column_stack([np.repeat(half, self.n), np.tile(full, self.n + 1)])
        axis1 = np.column_stack([np.repeat(full, self.n + 1), np.tile(half, self.n)])
        return np.vstack([axis0, axis1])

    @cached_property
    def difference_matrix(self) -> sp.csr_matrix:
        """Sparse forward-difference operator D with grad = D @ values."""
        edges = self.edges
        rows, cols, vals = [], [], []
        index = np.arange(len(edges))
        for column, sign in ((1, 1.0), (0, -1.0)):
            mask = edges[:, column] >= 0
            rows.append(index[mask])
            cols.append(edges[mask, column])
            vals.append(np.full(mask.sum(), sign / self.h))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.num_edges, self.num_nodes),
        )

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        """K with ||u||_{1,2}^2 = u^T K u."""
        D = self.difference_matrix
        return (self.cell_weight * (D.T @ D)).tocsc()

    @property
    def num_extended_nodes(self) -> int:
        """Nodes including the boundary, (n+2)^dim, ordered like ``nodes``."""
        return (self.n + 2) ** self.dim

    @cached_property
    def interior_index(self) -> np.ndarray:
        """Position of every interior node in the extended node list."""
        k = np.arange(self.n) + 1
        if self.dim == 1:
            return k
        return (k[:, None] * (self.n + 2) + k[None, :]).ravel()

    def extend(self, values: np.ndarray) -> np.ndarray:
        """Nodal values padded with the zero boundary values."""
        extended = np.zeros(self.num_extended_nodes)
        extended[self.interior_index] = values
        return extended

    @cached_property
    def corner_average(self) -> sp.csr_matrix:
        """Averaging operator from extended nodal values to cell averages,
        shape (num_cells, num_extended_nodes); every row sums to one."""
        n = self.n
        c = np.arange(n + 1)
        P1 = sp.csr_matrix((np.full(2 * (n + 1), 0.5), (np.concatenate([c, c]), np.concatenate([c, c + 1]))),
                           shape=(n + 1, n + 2))
        if self.dim == 1:
            return P1
        return sp.kron(P1, P1, format='csr')

    @cached_property
    def cell_average(self) -> sp.csr_matrix:
        """Averaging operator P from nodal values to cell averages of the
        piecewise (bi)linear interpolant."""
        return self.corner_average[:, self.interior_index].tocsr()

    @cached_property
    def _stiffness_lu(self):
        return splu(self.stiffness)

    def solve_stiffness(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K x = rhs (rhs may hold several columns)."""
        return self._stiffness_lu.solve(np.asarray(rhs, dtype=float))

    def describe(self) -> Dict[str, Any]:
        return {'dim': self.dim, 'n': self.n, 'h': self.h}


def _tensor_points(axis: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        return axis[:, None]
    first, second = np.meshgrid(axis, axis, indexing='ij')
    return np.column_stack([first.ravel(), second.ravel()])


def make_grid(dim: int, n: int) -> Grid:
    """Build a uniform grid of (0,1)^dim with n interior nodes per axis."""
    grid = Grid(int(dim), int(n))
    logger.debug(f"Created grid dim={grid.dim} n={grid.n} h={grid.h:.3g}")
    return grid


def check_same_grid(expected: Grid, found: Grid) -> None:
    if expected != found:
        raise GridMismatchError(expected, found)


def _frozen_vector(values: Any, length: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    if array.shape[0] != length:
        raise InvalidInputError(f"{name} expects {length} values, got {array.shape[0]}")
    if not np.all(np.isfinite(array)):
        bad = int(np.flatnonzero(~np.isfinite(array))[0])
        raise NonFiniteValueError(name, (bad, float(array[bad])))
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Member of the discrete W^{1,p}_0: one value per interior node."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_vector(self.values, self.grid.num_nodes, 'GridFunction'))

    @classmethod
    def zeros(cls, grid: Grid) -> 'GridFunction':
        return cls(grid, np.zeros(grid.num_nodes))

    def _combine(self, other: 'GridFunction', sign: float) -> 'GridFunction':
        check_same_grid(self.grid, other.grid)
        return GridFunction(self.grid, self.values + sign * other.values)

    def __add__(self, other: 'GridFunction') -> 'GridFunction':
        return self._combine(other, 1.0)

    def __sub__(self, other: 'GridFunction') -> 'GridFunction':
        return self._combine(other, -1.0)

    def __neg__(self) -> 'GridFunction':
        return GridFunction(self.grid, -self.values)

    def __mul__(self, scalar: float) -> 'GridFunction':
        return GridFunction(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class EdgeField:
    """One gradient component per edge."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_vector(self.values, self.grid.num_edges, 'EdgeField'))


@dataclass(frozen=True)
class SolverDiagnostics:
    """Outcome of an iterative solve. Hitting the cap is reported, never raised."""
    method: str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    capped: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method,
            'iterations': int(self.iterations),
            'residual': float(self.residual),
            'converged': bool(self.converged),
            'capped': bool(self.capped),
        }


class DualNormResult(NamedTuple):
    value: float
    maximizer: GridFunction
    diagnostics: SolverDiagnostics


def grid_function(grid: Grid, values: Union[Sequence[float], np.ndarray, Callable[..., Any]]) -> GridFunction:
    """Sample a callable at the interior nodes, or wrap explicit values.

    A callable receives one coordinate array per axis, ``f(x)`` in 1D and
    ``f(x, y)`` in 2D.
    """
    if callable(values):
        sampled = values(*[grid.nodes[:, d] for d in range(grid.dim)])
        return GridFunction(grid, np.broadcast_to(np.asarray(sampled, dtype=float), (grid.num_nodes,)))
    return GridFunction(grid, values)


def validate_exponent(p: float) -> float:
    """Check 1 < p < inf and flag ill-conditioned exponents."""
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise InvalidInputError(f"Exponent p must satisfy 1 < p < inf, got {p}")
    if is_ill_conditioned(p):
        logger.warning(f"Exponent p={p} is ill-conditioned; results may converge slowly")
    return p


def is_ill_conditioned(p: float) -> bool:
    return p <= 1.1 or p >= 10.0


def stiffness_matrix(grid: Grid) -> sp.csc_matrix:
    """Sparse K with ||u||_{1,2}^2 = u^T K u."""
    return grid.stiffness


def gradient(u: GridFunction) -> EdgeField:
    """Forward-difference gradient, boundary nodes contributing zero."""
    return EdgeField(u.grid, u.grid.difference_matrix @ u.values)


def _edge_power_sum(grid: Grid, grad: np.ndarray, p: float) -> np.ndarray:
    """h^dim * sum_e |grad_e|^p along axis 0 (columns are independent functions)."""
    return grid.cell_weight * np.sum(np.abs(grad) ** p, axis=0)


def norms_of_columns(grid: Grid, values: np.ndarray, p: float) -> np.ndarray:
    """Discrete ||.||_{1,p} of every column of ``values``."""
    grad = grid.difference_matrix @ values
    scale = np.max(np.abs(grad), axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale > 0, safe * _edge_power_sum(grid, grad / safe, p) ** (1.0 / p), 0.0)


def sobolev_norm(u: GridFunction, p: float) -> float:
    """Discrete W^{1,p}_0 norm (sum over edges of h^dim |grad|^p)^(1/p)."""
    p = validate_exponent(p)
    return float(norms_of_columns(u.grid, u.values[:, None], p)[0])


def truncate(u: GridFunction, lam: float) -> GridFunction:
    """Nodewise clamp to [-lam, lam]."""
    if not lam > 0:
        raise InvalidInputError(f"Truncation level must be positive, got {lam}")
    return GridFunction(u.grid, np.clip(u.values, -lam, lam))


def load_vector(functional: Any) -> Tuple[Grid, np.ndarray]:
    """Nodal load b of a linear functional, so that <functional, phi> = b . phi.

    A GridFunction c is read as a density (b = c * h^dim); anything with
    ``grid`` and ``weights`` (a marginal measure) supplies its masses directly.
    """
    if isinstance(functional, GridFunction):
        return functional.grid, functional.values * functional.grid.cell_weight
    grid = getattr(functional, 'grid', None)
    weights = getattr(functional, 'weights', None)
    if grid is None or weights is None:
        raise InvalidInputError(f"Cannot read a linear functional from {type(functional).__name__}")
    return grid, np.asarray(weights, dtype=float)


def solve_dual_norm(functional: Any, p: float, method: str = 'auto',
                    tolerance: float = DEFAULT_TOLERANCE,
                    max_iterations: int = DEFAULT_MAX_ITERATIONS,
                    initial: Optional[np.ndarray] = None) -> DualNormResult:
    """Discrete W^{-1,q} norm with maximizer and solver diagnostics.

    Args:
        functional: GridFunction of density coefficients or a marginal measure
        p: Exponent of the primal space
        method: 'auto', 'closed_form' (p=2 only) or 'ascent'
        tolerance: Relative stationarity tolerance for the ascent
        max_iterations: Iteration cap for the ascent
        initial: Optional warm start for the ascent

    Returns:
        DualNormResult with value, unit-norm maximizer and diagnostics
    """
    p = validate_exponent(p)
    grid, load = load_vector(functional)
    return dual_norm_of_load(grid, load, p, method, tolerance, max_iterations, initial)


def dual_norm(functional: Any, p: float, method: str = 'auto',
              tolerance: float = DEFAULT_TOLERANCE,
              max_iterations: int = DEFAULT_MAX_ITERATIONS) -> Tuple[float, GridFunction]:
    """sup { <functional, phi> : ||phi||_{1,p} <= 1 } and a maximizer."""
    result = solve_dual_norm(functional, p, method, tolerance, max_iterations)
    return result.value, result.maximizer


def dual_norm_of_load(grid: Grid, load: np.ndarray, p: float, method: str = 'auto',
                      tolerance: float = DEFAULT_TOLERANCE,
                      max_iterations: int = DEFAULT_MAX_ITERATIONS,
                      initial: Optional[np.ndarray] = None) -> DualNormResult:
    """Dual norm of a raw nodal load vector (see ``solve_dual_norm``)."""
    if method not in ('auto', 'closed_form', 'ascent'):
        raise InvalidInputError(f"Unknown dual norm method {method!r}")
    load = np.asarray(load, dtype=float).reshape(-1)
    if load.shape[0] != grid.num_nodes:
        raise InvalidInputError(f"Load has {load.shape[0]} entries, grid has {grid.num_nodes} nodes")
    if not np.all(np.isfinite(load)):
        raise NonFiniteValueError('dual_norm load')

    if not np.any(load):
        return DualNormResult(0.0, GridFunction.zeros(grid), SolverDiagnostics('trivial'))

    if method == 'closed_form' and p != 2.0:
        raise InvalidInputError("Closed-form dual norm is only available for p=2")

    if p == 2.0 and method != 'ascent':
        return _dual_norm_closed_form(grid, load)
    return _dual_norm_ascent(grid, load, p, tolerance, max_iterations, initial)


def _dual_norm_closed_form(grid: Grid, load: np.ndarray) -> DualNormResult:
    phi = grid.solve_stiffness(load)
    energy = float(load @ phi)
    phi_star = phi / np.sqrt(energy)
    residual = float(np.linalg.norm(grid.stiffness @ phi - load) / np.linalg.norm(load))
    value = float(load @ phi_star)
    return DualNormResult(value, GridFunction(grid, phi_star), SolverDiagnostics('closed_form', 1, residual))


def _dual_norm_ascent(grid: Grid, load: np.ndarray, p: float, tolerance: float,
                      max_iterations: int, initial: Optional[np.ndarray]) -> DualNormResult:
    """Minimize J(phi) = ||phi||^p / p - b.phi; the minimizer normalized is the maximizer."""
    scale = float(np.max(np.abs(load)))
    b = load / scale
    D = grid.difference_matrix
    w = grid.cell_weight
    reference = np.sqrt(max(float(b @ grid.solve_stiffness(b)), np.finfo(float).tiny))

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        g = D @ x
        a = np.abs(g)
        value = w * np.sum(a ** p) / p - b @ x
        grad = D.T @ (w * a ** (p - 1.0) * np.sign(g)) - b
        return float(value), grad

    def stationarity(x: np.ndarray) -> float:
        _, grad = objective(x)
        return float(np.sqrt(max(grad @ grid.solve_stiffness(grad), 0.0))) / reference

    if initial is not None and np.any(initial):
        x0 = np.asarray(initial, dtype=float)
    else:
        x0 = grid.solve_stiffness(b)
    # rescale the start onto the minimizing ray
    norm_p = w * np.sum(np.abs(D @ x0) ** p)
    along = float(b @ x0)
    if along <= 0:
        x0 = grid.solve_stiffness(b)
        norm_p = w * np.sum(np.abs(D @ x0) ** p)
        along = float(b @ x0)
    x0 = x0 * (along / norm_p) ** (1.0 / (p - 1.0))

    result = minimize(objective, x0, jac=True, method='L-BFGS-B',
                      options={'maxiter': max_iterations, 'maxfun': 2 * max_iterations,
                               'gtol': 1e-14, 'ftol': 1e-15})
    x = result.x
    iterations = int(result.nit)
    residual = stationarity(x)

    # damped Newton polish to certify stationarity
    steps = 0
    while residual > tolerance and steps < NEWTON_POLISH_STEPS and iterations < max_iterations:
        x, improved = _newton_step(grid, x, b, p, objective)
        steps += 1
        iterations += 1
        residual = stationarity(x)
        if not improved:
            break

    norm = float(norms_of_columns(grid, x[:, None], p)[0])
    phi_star = x / norm
    value = float(load @ phi_star)
    if value < 0:
        phi_star, value = -phi_star, -value
    converged = residual <= tolerance
    capped = not converged and iterations >= max_iterations
    if not converged:
        logger.warning(f"Dual norm ascent stopped at residual {residual:.2e} after {iterations} iterations (p={p})")
    diagnostics = SolverDiagnostics('ascent', iterations, residual, converged, capped)
    return DualNormResult(value, GridFunction(grid, phi_star), diagnostics)


def _newton_step(grid: Grid, x: np.ndarray, b: np.ndarray, p: float,
                 objective: Callable[[np.ndarray], Tuple[float, np.ndarray]]) -> Tuple[np.ndarray, bool]:
    D = grid.difference_matrix
    g = D @ x
    a = np.abs(g)
    floor = 1e-8 * max(float(a.max()), 1e-300)
    curvature = grid.cell_weight * (p - 1.0) * np.maximum(a, floor) ** (p - 2.0)
    hessian = (D.T @ sp.diags(curvature) @ D).tocsc()
    value, grad = objective(x)
    direction = -spsolve(hessian, grad)
    step = 1.0
    slope = float(grad @ direction)
    while step > 1e-12:
        trial = x + step * direction
        trial_value, _ = objective(trial)
        if trial_value <= value + 1e-4 * step * slope:
            return trial, True
        step *= 0.5
    return x, False


def nearest_node(grid: Grid, point: Union[float, Sequence[float]]) -> int:
    """Index of the interior node closest to ``point``."""
    coords = np.atleast_1d(np.asarray(point, dtype=float))
    if coords.shape[0] != grid.dim:
        raise InvalidInputError(f"Point {point} does not have {grid.dim} coordinates")
    if np.any(coords <= 0) or np.any(coords >= 1):
        raise InvalidInputError(f"Point {point} is not inside the unit domain")
    index = np.clip(np.rint(coords / grid.h).astype(int) - 1, 0, grid.n - 1)
    if grid.dim == 1:
        return int(index[0])
    return int(index[0] * grid.n + index[1])


def _validate_node_set(nodes: Iterable[int], grid: Grid) -> np.ndarray:
    try:
        array = np.unique(np.asarray(list(nodes), dtype=int))
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"Node set must contain integer node indices: {e}")
    if array.size == 0:
        raise InvalidInputError("Capacity needs a nonempty node set")
    if array.min() < 0 or array.max() >= grid.num_nodes:
        raise InvalidInputError(f"Node set contains indices outside 0..{grid.num_nodes - 1}")
    return array


def capacity_minimizer(nodes: Iterable[int], p: float, grid: Grid,
                       tolerance: float = DEFAULT_TOLERANCE,
                       max_iterations: int = DEFAULT_MAX_ITERATIONS) -> Tuple[float, GridFunction, SolverDiagnostics]:
    """Discrete capacity inf{ ||u||_{1,p}^p : u >= 1 on A } with its equilibrium potential.

    Args:
        nodes: Interior node indices forming A
        p: Sobolev exponent
        grid: Grid the nodes belong to
        tolerance: Projected-gradient tolerance (general p)
        max_iterations: Iteration cap (general p)

    Returns:
        Tuple of (capacity, minimizer, diagnostics)
    """
    p = validate_exponent(p)
    active = _validate_node_set(nodes, grid)
    mask = np.zeros(grid.num_nodes, dtype=bool)
    mask[active] = True
    free = ~mask
    u = np.zeros(grid.num_nodes)
    u[mask] = 1.0
    D = grid.difference_matrix
    w = grid.cell_weight

    diagnostics = SolverDiagnostics('direct')
    if free.any():
        K = grid.stiffness.tocsr()
        K_free = K[free][:, free].tocsc()
        rhs = -(K[free][:, mask] @ np.ones(mask.sum()))
        u[free] = np.clip(spsolve(K_free, rhs), 0.0, 1.0)

        if p != 2.0:
            def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
                full = u.copy()
                full[free] = x
                g = D @ full
                a = np.abs(g)
                grad = p * (D.T @ (w * a ** (p - 1.0) * np.sign(g)))
                return float(w * np.sum(a ** p)), grad[free]

            result = minimize(objective, u[free], jac=True, method='L-BFGS-B',
                              bounds=[(0.0, 1.0)] * int(free.sum()),
                              options={'maxiter': max_iterations, 'gtol': tolerance * w, 'ftol': 1e-15})
            u[free] = result.x
            capped = result.nit >= max_iterations
            residual = float(np.max(np.abs(result.jac))) if result.jac is not None else 0.0
            diagnostics = SolverDiagnostics('projected_descent', int(result.nit), residual,
                                            bool(result.success), capped)
            if capped:
                logger.warning(f"Capacity descent hit the iteration cap ({max_iterations})")

    value = float(_edge_power_sum(grid, D @ u, p))
    return value, GridFunction(grid, u), diagnostics


def capacity(nodes: Iterable[int], p: float, grid: Grid) -> float:
    """Discrete p-capacity of a set of interior nodes."""
    value, _, _ = capacity_minimizer(nodes, p, grid)
    return value


def weak_test_sequence(kind: str, k: int, base: GridFunction, p: float = 2.0,
                       center: Union[float, Sequence[float]] = 0.5) -> GridFunction:
    """k-th member of a weakly but not strongly convergent sequence around ``base``.

    'oscillation' adds sin(k pi x)/k (a product of sines in 2D); 'concentration'
    adds a hat of total width 1/k around ``center`` normalized to unit
    ||.||_{1,p}.
    """
    grid = base.grid
    k = int(k)
    if k < 1:
        raise InvalidInputError(f"Sequence index must be >= 1, got {k}")
    if grid.n + 1 < 8 * k:
        raise InvalidInputError(f"Grid with n={grid.n} cannot resolve k={k} (needs n+1 >= {8 * k})")

    coords = grid.nodes
    if kind == 'oscillation':
        profile = np.prod(np.sin(k * np.pi * coords), axis=1) / k
    elif kind == 'concentration':
        half_width = 1.0 / (2 * k)
        centre = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
        profile = np.prod(np.clip(1.0 - np.abs(coords - centre) / half_width, 0.0, None), axis=1)
        profile = profile / norms_of_columns(grid, profile[:, None], validate_exponent(p))[0]
    else:
        raise InvalidInputError(f"Unknown test sequence kind {kind!r}")
    return GridFunction(grid, base.values + profile)
