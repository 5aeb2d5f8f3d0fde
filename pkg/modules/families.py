"""
Scripted measure/integrand sequences and named fixtures.

Every family is built on a grid and produces, for each k, a nonnegative measure
mu_k and (optionally) a local integrand g_k, together with the limit (mu, g).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import InvalidInputError
from .functionals import LocalIntegrand, power, two_phase, weighted_power
from .measures import (PairMeasure, density_measure, dirac, lebesgue, marginal_from_density, product_measure,
                       total_mass)
from .sobolev_core import Grid, make_grid

logger = logging.getLogger(__name__)

DEFAULT_FIXTURE_GRID = (1, 63)
LOGLOG_SUPPORT_RADIUS = 0.05

Member = Tuple[PairMeasure, Optional[LocalIntegrand]]


@dataclass(frozen=True)
class SequenceFamily:
    """A sequence k -> (mu_k, g_k) with its limit (mu, g).

    ``strong_recovery`` records whether the g_k converge in a way that admits
    strongly convergent recovery sequences (false for oscillating coefficients).
    """
    family_id: str
    grid: Grid
    generator: Callable[[int], Member]
    limit: Member
    description: str
    params: Dict[str, Any] = field(default_factory=dict)
    strong_recovery: bool = True

    def member(self, k: int) -> Member:
        if int(k) < 1:
            raise InvalidInputError(f"Sequence index must be >= 1, got {k}")
        return self.generator(int(k))

    def rebuild(self, grid: Grid) -> 'SequenceFamily':
        """Same family on another grid."""
        return make_family(self.family_id, grid, **self.params)


def _sine_product(k: float, coords: Tuple[np.ndarray, ...]) -> np.ndarray:
    result = 1.0
    for c in coords:
        result = result * np.sin(k * np.pi * c)
    return result


def _as_coords(value: Union[np.ndarray, Tuple[np.ndarray, ...]]) -> Tuple[np.ndarray, ...]:
    return value if isinstance(value, tuple) else (value,)


def oscillating_density_measure(grid: Grid, k: int) -> PairMeasure:
    """Density 1 + sin(k pi x) sin(k pi y) (products over axes in 2D)."""
    def rho(x, y):
        return 1.0 + _sine_product(k, _as_coords(x)) * _sine_product(k, _as_coords(y))
    return density_measure(grid, rho)


def _hat_cells(grid: Grid, k: int, center: float) -> np.ndarray:
    mids = grid.cell_midpoints
    half_width = 1.0 / k
    values = np.prod(np.clip(1.0 - np.abs(mids - center) / half_width, 0.0, None), axis=1)
    mass = grid.cell_weight * values.sum()
    if mass <= 0:
        raise InvalidInputError(f"Bump of width {2 / k:g} is not resolved on a grid with n={grid.n}")
    return values / mass


def _constant_family(grid: Grid, measure: str = 'lebesgue', p: float = 2.0) -> SequenceFamily:
    if measure == 'lebesgue':
        mu = lebesgue(grid)
    elif measure == 'dirac':
        mu = dirac(grid, (0.5,) * grid.dim, (0.5,) * grid.dim)
    else:
        raise InvalidInputError(f"Unknown constant-family measure {measure!r}")
    g = power(p)
    return SequenceFamily('constant', grid, lambda k: (mu, g), (mu, g),
                          'mu_k = mu and g_k = g for every k', {'measure': measure, 'p': p})


def _oscillating_family(grid: Grid, p: float = 2.0) -> SequenceFamily:
    g = power(p)
    return SequenceFamily(
        'oscillating_density', grid, lambda k: (oscillating_density_measure(grid, k), g), (lebesgue(grid), g),
        'density 1 + sin(k pi x) sin(k pi y) converging to Lebesgue measure', {'p': p},
    )


def _mollified_dirac_family(grid: Grid, center: float = 0.5, p: float = 2.0) -> SequenceFamily:
    g = power(p)
    point = (float(center),) * grid.dim

    def generator(k: int) -> Member:
        bump = _hat_cells(grid, k, center)
        return density_measure(grid, np.outer(bump, bump)), g

    return SequenceFamily(
        'mollified_dirac', grid, generator, (dirac(grid, point, point), g),
        'unit-mass product of hats of width 2/k converging to the Dirac mass at the center',
        {'center': center, 'p': p},
    )


def _product_family(grid: Grid, p: float = 2.0) -> SequenceFamily:
    g = power(p)
    base = marginal_from_density(grid, lambda *x: np.ones_like(x[0]))

    def generator(k: int) -> Member:
        m_k = marginal_from_density(grid, lambda *x: 1.0 + _sine_product(2 * k, x))
        return product_measure(m_k, m_k), g

    return SequenceFamily(
        'product_sequence', grid, generator, (product_measure(base, base), g),
        'products m_k (x) m_k with m_k = (1 + sin(2 k pi x)) dx converging to Lebesgue measure', {'p': p},
    )


def homogenized_coefficient(alpha: float, beta: float, p: float = 2.0) -> float:
    """Effective coefficient of the 1D two-phase energy a(kx)|u'|^p.

    For p = 2 this is the harmonic mean 2 alpha beta / (alpha + beta).
    """
    if alpha <= 0 or beta <= 0:
        raise InvalidInputError(f"Phase coefficients must be positive, got {alpha}, {beta}")
    exponent = 1.0 / (1.0 - p)
    return float((0.5 * (alpha ** exponent + beta ** exponent)) ** (1.0 - p))


def _homogenization_family(grid: Grid, alpha: float = 1.0, beta: float = 4.0, p: float = 2.0,
                           measure: str = 'lebesgue') -> SequenceFamily:
    if grid.dim != 1:
        raise InvalidInputError("The homogenization family is one-dimensional")
    if measure not in ('lebesgue', 'oscillating'):
        raise InvalidInputError(f"Unknown homogenization measure {measure!r}")
    limit_g = weighted_power(p, homogenized_coefficient(alpha, beta, p))
    limit_mu = lebesgue(grid)

    def generator(k: int) -> Member:
        mu_k = limit_mu if measure == 'lebesgue' else oscillating_density_measure(grid, k)
        return mu_k, two_phase(p, alpha, beta, k)

    return SequenceFamily(
        'homogenization', grid, generator, (limit_mu, limit_g),
        'two-phase coefficient a(kx) in {alpha, beta} with its homogenized limit',
        {'alpha': alpha, 'beta': beta, 'p': p, 'measure': measure},
        strong_recovery=alpha == beta,
    )


FAMILIES: Dict[str, Callable[..., SequenceFamily]] = {
    'constant': _constant_family,
    'homogenization': _homogenization_family,
    'mollified_dirac': _mollified_dirac_family,
    'oscillating_density': _oscillating_family,
    'product_sequence': _product_family,
}


def make_family(family_id: str, grid: Grid, **params: Any) -> SequenceFamily:
    """Build a sequence family by id on ``grid``."""
    if family_id not in FAMILIES:
        raise InvalidInputError(f"Unknown family {family_id!r}; known: {sorted(FAMILIES)}")
    return FAMILIES[family_id](grid, **params)


# ---------------------------------------------------------------------------
# Log-log density
# ---------------------------------------------------------------------------

def loglog_marginal(t: np.ndarray, radius: float = LOGLOG_SUPPORT_RADIUS) -> np.ndarray:
    """m(t) = 1 / (|t| |log|t|| |log|log|t||| log^2|log|log|t|||) for 0 < |t| < radius, else 0."""
    if not 0 < radius < np.exp(-np.e):
        raise InvalidInputError(f"Support radius must lie in (0, e^-e), got {radius}")
    a = np.abs(np.asarray(t, dtype=float))
    inside = (a > 0) & (a < radius)
    safe = np.where(inside, a, 0.5 * radius)
    l1 = np.abs(np.log(safe))
    l2 = np.abs(np.log(l1))
    l3 = np.abs(np.log(l2))
    return np.where(inside, 1.0 / (safe * l1 * l2 * l3 ** 2), 0.0)


def loglog_pair_density(x: np.ndarray, y: np.ndarray, radius: float = LOGLOG_SUPPORT_RADIUS) -> np.ndarray:
    """Density of m (x) m pushed from (-1,1)^2 to (0,1)^2 by t = 2x - 1."""
    return 4.0 * loglog_marginal(2.0 * np.asarray(x) - 1.0, radius) * loglog_marginal(2.0 * np.asarray(y) - 1.0, radius)


def loglog_density(grid: Grid, radius: float = LOGLOG_SUPPORT_RADIUS) -> PairMeasure:
    """Product measure m (x) m with the log-log density on (0,1)."""
    if grid.dim != 1:
        raise InvalidInputError("The log-log density fixture is one-dimensional")
    m = marginal_from_density(grid, lambda x: 2.0 * loglog_marginal(2.0 * x - 1.0, radius))
    return product_measure(m, m)


def loglog_refinement_study(n_list: List[int], radius: float = LOGLOG_SUPPORT_RADIUS) -> pd.DataFrame:
    """Mass and int int w dmu, w = |log|log sqrt(x^2 + y^2)||, on refining grids."""
    rows = []
    for n in sorted(int(n) for n in n_list):
        grid = make_grid(1, n)
        mids = grid.cell_midpoints[:, 0]
        x, y = mids[:, None], mids[None, :]
        rho = loglog_pair_density(x, y, radius)
        r = np.hypot(2.0 * x - 1.0, 2.0 * y - 1.0)
        support = rho > 0
        safe_r = np.where(support, r, 0.5)
        w = np.where(support, np.abs(np.log(np.abs(np.log(safe_r)))), 0.0)
        weight = grid.cell_weight ** 2
        rows.append({
            'n': n,
            'h': grid.h,
            'total_mass': total_mass(loglog_density(grid, radius)),
            'density_mass': float(weight * rho.sum()),
            'weighted_integral': float(weight * np.sum(rho * w)),
        })
        logger.debug(f"log-log refinement n={n}: {rows[-1]}")
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Named fixtures
# ---------------------------------------------------------------------------

FIXTURE_DESCRIPTIONS: Dict[str, str] = {
    'constant': 'constant sequence mu_k = mu, g_k = g (family)',
    'dirac': 'unit Dirac mass at the domain center (measure)',
    'homogenization': 'two-phase coefficient a(kx) with harmonic-mean limit (family)',
    'loglog_density': 'm (x) m with the log-log singular density near the center (measure)',
    'mollified_dirac': 'unit-mass hats of width 2/k converging to the central Dirac mass (family)',
    'oscillating_density': 'density 1 + sin(k pi x) sin(k pi y) converging to Lebesgue (family)',
    'product_sequence': 'products m_k (x) m_k converging to Lebesgue (family)',
}


def example_fixture(fixture_id: str, grid: Optional[Grid] = None,
                    **params: Any) -> Union[SequenceFamily, PairMeasure]:
    """Named measure or sequence family on ``grid`` (default: 1D, n=63)."""
    grid = grid or make_grid(*DEFAULT_FIXTURE_GRID)
    if fixture_id == 'dirac':
        center = (float(params.get('center', 0.5)),) * grid.dim
        return dirac(grid, center, center, params.get('mass', 1.0))
    if fixture_id == 'loglog_density':
        return loglog_density(grid, params.get('radius', LOGLOG_SUPPORT_RADIUS))
    if fixture_id in FAMILIES:
        return make_family(fixture_id, grid, **params)
    raise InvalidInputError(f"Unknown fixture {fixture_id!r}; known: {sorted(FIXTURE_DESCRIPTIONS)}")
