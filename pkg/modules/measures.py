"""
Finite measures on Omega x Omega and their weighted marginals.

A PairMeasure is the sum of up to three components:

* a cell density over pairs of quadrature cells. Test functions are paired
  with it through cell averages of the nodal interpolant (product midpoint
  rule, weight h^(2 dim)); nonlinear integrands are summed over pairs of grid
  nodes with the weights this rule induces,
* a list of atoms, spread over the grid nodes around them with the (bi)linear
  interpolation weights,
* products of two nodal weight vectors (marginal measures), times a coefficient.

Every pairing used by the lab reduces to the nodal matrix W of
``pairing_matrix``: pair_integral(mu, phi, psi) = phi^T W psi.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidInputError, NonFiniteValueError
from .sobolev_core import Grid, GridFunction, check_same_grid

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]


def _as_point(value: Union[float, Sequence[float]], dim: int) -> Point:
    coords = tuple(float(c) for c in np.atleast_1d(np.asarray(value, dtype=float)))
    if len(coords) != dim:
        raise InvalidInputError(f"Point {value} does not have {dim} coordinates")
    return coords


def interpolation_support(grid: Grid, point: Point) -> Tuple[np.ndarray, np.ndarray]:
    """Extended node indices and (bi)linear weights of the 2^dim nodes around ``point``.

    Boundary nodes may appear in the support; they carry the zero boundary value.
    """
    per_axis = []
    for coordinate in point:
        if not 0.0 <= coordinate <= 1.0:
            raise InvalidInputError(f"Point {point} lies outside the closed unit domain")
        s = coordinate / grid.h
        cell = min(int(np.floor(s)), grid.n)
        frac = s - cell
        per_axis.append((np.array([cell, cell + 1]), np.array([1.0 - frac, frac])))
    if grid.dim == 1:
        return per_axis[0]
    (first, w_first), (second, w_second) = per_axis
    return (first[:, None] * (grid.n + 2) + second[None, :]).ravel(), np.outer(w_first, w_second).ravel()


def interpolation_weights(grid: Grid, point: Point) -> np.ndarray:
    """Nodal weights i(x) with u(x) = i(x) . u for the (bi)linear interpolant."""
    index, weights = interpolation_support(grid, point)
    extended = np.zeros(grid.num_extended_nodes)
    np.add.at(extended, index, weights)
    return extended[grid.interior_index]


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _evaluate_integrand(f: Any, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate a PairIntegrand (anything with ``evaluate``) or a plain callable."""
    if hasattr(f, 'evaluate'):
        return f.evaluate(s, t)
    values = np.broadcast_to(np.asarray(f(s, t), dtype=float), np.broadcast(s, t).shape)
    if not np.all(np.isfinite(values)):
        bad = np.unravel_index(int(np.flatnonzero(~np.isfinite(values))[0]), values.shape)
        witness = (float(np.broadcast_to(s, values.shape)[bad]), float(np.broadcast_to(t, values.shape)[bad]))
        raise NonFiniteValueError('integrand', witness)
    return values


@dataclass(frozen=True)
class Atom:
    x: Point
    y: Point
    mass: float


@dataclass(frozen=True, eq=False)
class MarginalMeasure:
    """Measure on Omega stored as nodal masses; int phi dm = weights . phi."""
    grid: Grid
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != self.grid.num_nodes:
            raise InvalidInputError(f"Marginal expects {self.grid.num_nodes} weights, got {weights.shape[0]}")
        if not np.all(np.isfinite(weights)):
            raise NonFiniteValueError('MarginalMeasure')
        object.__setattr__(self, 'weights', _read_only(weights))

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, phi: GridFunction) -> float:
        check_same_grid(self.grid, phi.grid)
        return float(self.weights @ phi.values)


@dataclass(frozen=True, eq=False)
class ProductFactor:
    first: np.ndarray
    second: np.ndarray
    coeff: float = 1.0


@dataclass(frozen=True, eq=False)
class PairMeasure:
    """Finite measure on Omega x Omega (see module docstring)."""
    grid: Grid
    density: Optional[np.ndarray] = None
    atoms: Tuple[Atom, ...] = ()
    factors: Tuple[ProductFactor, ...] = ()
    signed: bool = False

    def __post_init__(self):
        grid = self.grid
        if self.density is not None:
            density = np.array(self.density, dtype=float)
            if density.shape != (grid.num_cells, grid.num_cells):
                raise InvalidInputError(
                    f"Cell density must have shape {(grid.num_cells, grid.num_cells)}, got {density.shape}")
            if not np.all(np.isfinite(density)):
                raise NonFiniteValueError('cell density')
            if not self.signed and np.any(density < 0):
                raise InvalidInputError("Unsigned measure has negative cell weights")
            object.__setattr__(self, 'density', _read_only(density))

        atoms = []
        for atom in self.atoms:
            x, y = _as_point(atom.x, grid.dim), _as_point(atom.y, grid.dim)
            if not all(0.0 < c < 1.0 for c in x + y):
                raise InvalidInputError(f"Atom at {(x, y)} is not strictly inside the domain")
            if not np.isfinite(atom.mass):
                raise NonFiniteValueError('atom mass', (x, y))
            if not self.signed and atom.mass < 0:
                raise InvalidInputError("Unsigned measure has a negative atom")
            atoms.append(Atom(x, y, float(atom.mass)))
        object.__setattr__(self, 'atoms', tuple(atoms))

        factors = []
        for factor in self.factors:
            first = np.array(factor.first, dtype=float).reshape(-1)
            second = np.array(factor.second, dtype=float).reshape(-1)
            if first.shape[0] != grid.num_nodes or second.shape[0] != grid.num_nodes:
                raise InvalidInputError("Product factors must have one weight per interior node")
            if not (np.all(np.isfinite(first)) and np.all(np.isfinite(second)) and np.isfinite(factor.coeff)):
                raise NonFiniteValueError('product factor')
            if not self.signed and (factor.coeff < 0 or np.any(first < 0) or np.any(second < 0)):
                raise InvalidInputError("Unsigned measure has a negative product factor")
            factors.append(ProductFactor(_read_only(first), _read_only(second), float(factor.coeff)))
        object.__setattr__(self, 'factors', tuple(factors))

    @property
    def representations(self) -> List[str]:
        names = []
        if self.density is not None:
            names.append('cell_density')
        if self.atoms:
            names.append('atoms')
        if self.factors:
            names.append('product')
        return names

    @cached_property
    def _atom_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.atoms:
            empty = np.zeros((0, self.grid.num_nodes))
            return empty, empty, np.zeros(0)
        ix = np.array([interpolation_weights(self.grid, a.x) for a in self.atoms])
        iy = np.array([interpolation_weights(self.grid, a.y) for a in self.atoms])
        masses = np.array([a.mass for a in self.atoms])
        return ix, iy, masses

    @cached_property
    def atom_supports(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per atom: extended node pairs (A, K, 2) around (x, y), their weights
        mass * w_x * w_y (A, K) with K = 4^dim."""
        if not self.atoms:
            return np.zeros((0, 0, 2), dtype=int), np.zeros((0, 0))
        pairs, weights = [], []
        for atom in self.atoms:
            jx, wx = interpolation_support(self.grid, atom.x)
            jy, wy = interpolation_support(self.grid, atom.y)
            pairs.append(np.stack(np.broadcast_arrays(jx[:, None], jy[None, :]), axis=-1).reshape(-1, 2))
            weights.append(atom.mass * np.outer(wx, wy).ravel())
        return np.array(pairs), np.array(weights)

    @cached_property
    def node_pair_weights(self) -> Optional[np.ndarray]:
        """Weights w_ij over pairs of extended nodes carrying the cell density:
        h^(2 dim) P_ext^T rho P_ext. Nonnegative whenever the density is."""
        if self.density is None:
            return None
        grid = self.grid
        P = grid.corner_average
        W = grid.cell_weight ** 2 * (P.T @ (P.T @ self.density.T).T)
        W.setflags(write=False)
        return W

    @cached_property
    def pairing_matrix(self) -> np.ndarray:
        """Dense nodal matrix W with pair_integral = phi^T W psi."""
        grid = self.grid
        W = np.zeros((grid.num_nodes, grid.num_nodes))
        if self.density is not None:
            interior = grid.interior_index
            W += self.node_pair_weights[np.ix_(interior, interior)]
        ix, iy, masses = self._atom_arrays
        if masses.size:
            W += (ix * masses[:, None]).T @ iy
        for factor in self.factors:
            W += factor.coeff * np.outer(factor.first, factor.second)
        W.setflags(write=False)
        return W


def lebesgue(grid: Grid) -> PairMeasure:
    """Lebesgue measure on the unit square (total mass exactly 1)."""
    return PairMeasure(grid, density=np.ones((grid.num_cells, grid.num_cells)))


def zero_measure(grid: Grid) -> PairMeasure:
    return PairMeasure(grid)


def _midpoint_coordinates(grid: Grid) -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]:
    mids = grid.cell_midpoints
    x = tuple(mids[:, d][:, None] for d in range(grid.dim))
    y = tuple(mids[:, d][None, :] for d in range(grid.dim))
    return x, y


def density_measure(grid: Grid, density: Union[np.ndarray, Callable[..., Any]], signed: bool = False) -> PairMeasure:
    """Measure with a cell density given as an array or as a callable.

    A callable is sampled at pairs of cell midpoints: ``rho(x, y)`` in 1D and
    ``rho(x, y)`` with x, y tuples of coordinate arrays in 2D.
    """
    if callable(density):
        x, y = _midpoint_coordinates(grid)
        values = density(x[0], y[0]) if grid.dim == 1 else density(x, y)
        density = np.broadcast_to(np.asarray(values, dtype=float), (grid.num_cells, grid.num_cells))
    return PairMeasure(grid, density=density, signed=signed)


def dirac(grid: Grid, x: Union[float, Sequence[float]], y: Union[float, Sequence[float]],
          mass: float = 1.0) -> PairMeasure:
    """Point mass at (x, y)."""
    return PairMeasure(grid, atoms=(Atom(_as_point(x, grid.dim), _as_point(y, grid.dim), mass),),
                       signed=mass < 0)


def atom_measure(grid: Grid, atoms: Iterable[Tuple[Tuple[Any, Any], float]]) -> PairMeasure:
    """Measure from ``[((x, y), mass), ...]``."""
    parsed = tuple(Atom(_as_point(xy[0], grid.dim), _as_point(xy[1], grid.dim), float(mass))
                   for xy, mass in atoms)
    return PairMeasure(grid, atoms=parsed, signed=any(a.mass < 0 for a in parsed))


def marginal_from_density(grid: Grid, density: Callable[..., Any]) -> MarginalMeasure:
    """Nodal masses of the one-variable measure m(x) dx, integrated with the
    same midpoint rule as cell densities."""
    mids = grid.cell_midpoints
    values = np.broadcast_to(np.asarray(density(*[mids[:, d] for d in range(grid.dim)]), dtype=float),
                             (grid.num_cells,))
    return MarginalMeasure(grid, grid.cell_weight * (grid.cell_average.T @ values))


def product_measure(first: Union[MarginalMeasure, np.ndarray], second: Union[MarginalMeasure, np.ndarray],
                    coeff: float = 1.0, grid: Optional[Grid] = None) -> PairMeasure:
    """Product m1 (x) m2 of two marginal measures."""
    if isinstance(first, MarginalMeasure):
        grid = first.grid
        first = first.weights
    if isinstance(second, MarginalMeasure):
        if grid is not None:
            check_same_grid(grid, second.grid)
        grid = second.grid
        second = second.weights
    if grid is None:
        raise InvalidInputError("A grid is required when product factors are raw arrays")
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    signed = coeff < 0 or bool(np.any(first < 0)) or bool(np.any(second < 0))
    return PairMeasure(grid, factors=(ProductFactor(first, second, coeff),), signed=signed)


def total_mass(mu: PairMeasure) -> float:
    """mu(Omega x Omega)."""
    mass = 0.0
    if mu.density is not None:
        mass += mu.grid.cell_weight ** 2 * float(np.sum(mu.density))
    mass += sum(atom.mass for atom in mu.atoms)
    mass += sum(f.coeff * float(np.sum(f.first)) * float(np.sum(f.second)) for f in mu.factors)
    return float(mass)


def pair_integral(mu: PairMeasure, phi: GridFunction, psi: GridFunction) -> float:
    """int phi(x) psi(y) dmu(x, y)."""
    check_same_grid(mu.grid, phi.grid)
    check_same_grid(mu.grid, psi.grid)
    grid = mu.grid
    value = 0.0
    if mu.density is not None:
        P = grid.cell_average
        value += grid.cell_weight ** 2 * float((P @ phi.values) @ mu.density @ (P @ psi.values))
    ix, iy, masses = mu._atom_arrays
    if masses.size:
        value += float(np.sum(masses * (ix @ phi.values) * (iy @ psi.values)))
    for f in mu.factors:
        value += f.coeff * float(f.first @ phi.values) * float(f.second @ psi.values)
    return value


def double_integral(mu: PairMeasure, f: Any, u: GridFunction, v: GridFunction) -> float:
    """int f(u(x), v(y)) dmu(x, y).

    The cell density and the atoms are integrated as sums over pairs of grid
    nodes, boundary nodes included, with the nonnegative weights of
    ``node_pair_weights`` and ``atom_supports``; product factors as sums over
    interior node pairs. For f(s, t) = s t this is ``pair_integral`` and for
    f = 1 it is ``total_mass``.
    """
    check_same_grid(mu.grid, u.grid)
    check_same_grid(mu.grid, v.grid)
    grid = mu.grid
    value = 0.0
    if mu.density is not None:
        ue, ve = grid.extend(u.values), grid.extend(v.values)
        values = _evaluate_integrand(f, ue[:, None], ve[None, :])
        value += float(np.sum(mu.node_pair_weights * values))
    pairs, weights = mu.atom_supports
    if weights.size:
        ue, ve = grid.extend(u.values), grid.extend(v.values)
        value += float(np.sum(weights * _evaluate_integrand(f, ue[pairs[..., 0]], ve[pairs[..., 1]])))
    for factor in mu.factors:
        values = _evaluate_integrand(f, u.values[:, None], v.values[None, :])
        value += factor.coeff * float(factor.first @ values @ factor.second)
    return value


def marginal_weighted_by(mu: PairMeasure, psi: GridFunction) -> MarginalMeasure:
    """mu_psi(B) = int_{B x Omega} psi(y) dmu(x, y) as nodal masses."""
    check_same_grid(mu.grid, psi.grid)
    grid = mu.grid
    weights = np.zeros(grid.num_nodes)
    if mu.density is not None:
        P = grid.cell_average
        weights += grid.cell_weight ** 2 * (P.T @ (mu.density @ (P @ psi.values)))
    ix, iy, masses = mu._atom_arrays
    if masses.size:
        weights += ix.T @ (masses * (iy @ psi.values))
    for f in mu.factors:
        weights += f.coeff * float(f.second @ psi.values) * f.first
    return MarginalMeasure(grid, weights)


def comarginal_weighted_by(mu: PairMeasure, u: GridFunction) -> MarginalMeasure:
    """mu^u(B) = int_{Omega x B} u(x) dmu(x, y) as nodal masses."""
    check_same_grid(mu.grid, u.grid)
    grid = mu.grid
    weights = np.zeros(grid.num_nodes)
    if mu.density is not None:
        P = grid.cell_average
        weights += grid.cell_weight ** 2 * (P.T @ (mu.density.T @ (P @ u.values)))
    ix, iy, masses = mu._atom_arrays
    if masses.size:
        weights += iy.T @ (masses * (ix @ u.values))
    for f in mu.factors:
        weights += f.coeff * float(f.first @ u.values) * f.second
    return MarginalMeasure(grid, weights)


def marginal_pairing(m: MarginalMeasure, phi: GridFunction) -> float:
    """<m, phi>; a marginal measure is its own representative in the dual space."""
    return m.integrate(phi)


def transpose(mu: PairMeasure) -> PairMeasure:
    """Image of mu under (x, y) -> (y, x)."""
    return PairMeasure(
        mu.grid,
        density=None if mu.density is None else mu.density.T,
        atoms=tuple(Atom(a.y, a.x, a.mass) for a in mu.atoms),
        factors=tuple(ProductFactor(f.second, f.first, f.coeff) for f in mu.factors),
        signed=mu.signed,
    )


def combine(mu: PairMeasure, nu: PairMeasure, alpha: float = 1.0, beta: float = 1.0) -> PairMeasure:
    """alpha*mu + beta*nu; signed whenever a coefficient or an input is."""
    check_same_grid(mu.grid, nu.grid)
    densities = [c * m.density for c, m in ((alpha, mu), (beta, nu)) if m.density is not None]
    density = sum(densities[1:], densities[0]) if densities else None
    atoms = tuple(Atom(a.x, a.y, c * a.mass) for c, m in ((alpha, mu), (beta, nu)) for a in m.atoms)
    factors = tuple(ProductFactor(f.first, f.second, c * f.coeff) for c, m in ((alpha, mu), (beta, nu))
                    for f in m.factors)
    signed = mu.signed or nu.signed or alpha < 0 or beta < 0
    return PairMeasure(mu.grid, density=density, atoms=atoms, factors=factors, signed=signed)


def scaled(mu: PairMeasure, c: float) -> PairMeasure:
    return combine(mu, zero_measure(mu.grid), c, 0.0)


def cut_distance_inputs(mu: PairMeasure, nu: PairMeasure) -> PairMeasure:
    """Signed difference mu - nu, ready for cut-norm evaluation."""
    return combine(mu, nu, 1.0, -1.0)


def require_nonnegative(mu: PairMeasure) -> None:
    if mu.signed:
        raise InvalidInputError("Energy evaluation requires a nonnegative measure")


def truncation_tail_mass(mu: PairMeasure, u: GridFunction, v: GridFunction, lam: float) -> float:
    """mu{(x, y) : |u(x)| > lam or |v(y)| > lam}, the mass left out by truncating at lam."""
    if not lam > 0:
        raise InvalidInputError(f"Truncation level must be positive, got {lam}")

    def outside(s: np.ndarray, t: np.ndarray) -> np.ndarray:
        return ((np.abs(s) > lam) | (np.abs(t) > lam)).astype(float)

    return double_integral(mu, outside, u, v)


def reweighted(mu: PairMeasure, phi: GridFunction, psi: GridFunction) -> PairMeasure:
    """The measure phi(x) psi(y) dmu(x, y).

    Densities are multiplied by the cell averages of phi and psi, atoms by the
    interpolated values and product factors by the nodal values.
    """
    check_same_grid(mu.grid, phi.grid)
    check_same_grid(mu.grid, psi.grid)
    grid = mu.grid
    density = None
    if mu.density is not None:
        P = grid.cell_average
        density = mu.density * np.outer(P @ phi.values, P @ psi.values)
    ix, iy, _ = mu._atom_arrays
    atoms = tuple(Atom(a.x, a.y, a.mass * float(ix[i] @ phi.values) * float(iy[i] @ psi.values))
                  for i, a in enumerate(mu.atoms))
    factors = tuple(ProductFactor(f.first * phi.values, f.second * psi.values, f.coeff) for f in mu.factors)
    signed = mu.signed or bool(np.any(phi.values < 0)) or bool(np.any(psi.values < 0))
    return PairMeasure(grid, density=density, atoms=atoms, factors=factors, signed=signed)
