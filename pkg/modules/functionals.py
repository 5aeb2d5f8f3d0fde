"""
Non-local energies F(u) = int int f(u(x), u(y)) dmu, local energies
G(u) = int g(x, grad u) dx, their gradients and structural checks.

Local integrands act on each edge component of the discrete gradient, so
g(x, xi) takes a scalar xi evaluated at edge midpoints.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidInputError, NonFiniteValueError
from .measures import PairMeasure, double_integral, require_nonnegative, total_mass
from .sobolev_core import Grid, GridFunction, check_same_grid, gradient, truncate, validate_exponent

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
DEFAULT_LAMBDAS = (0.25, 0.5, 1.0, 2.0, 4.0)

ArrayFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TruncationConstants:
    """(a, b, Lambda) with f(tau s, tau t) <= a f(s, t) + b for lambda in Lambda."""
    a: float
    b: float
    lambdas: Tuple[float, ...] = DEFAULT_LAMBDAS


@dataclass(frozen=True)
class PairIntegrand:
    """f(s, t) with optional partial derivatives and declared structure."""
    name: str
    func: ArrayFunc
    d1: Optional[ArrayFunc] = None
    d2: Optional[ArrayFunc] = None
    nonnegative: bool = False
    bounded_by: Optional[float] = None
    truncation: Optional[TruncationConstants] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def evaluate(self, s: Any, t: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        values = np.broadcast_to(np.asarray(self.func(s, t), dtype=float), np.broadcast(s, t).shape)
        _check_finite(self.name, values, s, t)
        return values

    def partials(self, s: Any, t: Any, step: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray]:
        """(df/ds, df/dt), central differences where no derivative is declared."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast(s, t).shape
        if self.d1 is not None:
            ds = np.broadcast_to(np.asarray(self.d1(s, t), dtype=float), shape)
        else:
            ds = (self.evaluate(s + step, t) - self.evaluate(s - step, t)) / (2 * step)
        if self.d2 is not None:
            dt = np.broadcast_to(np.asarray(self.d2(s, t), dtype=float), shape)
        else:
            dt = (self.evaluate(s, t + step) - self.evaluate(s, t - step)) / (2 * step)
        _check_finite(f"{self.name} derivative", ds, s, t)
        _check_finite(f"{self.name} derivative", dt, s, t)
        return ds, dt

    def vanishes_at_zero(self) -> bool:
        return float(self.evaluate(0.0, 0.0)) == 0.0


@dataclass(frozen=True)
class GrowthConstants:
    """c0 |xi|^p <= g(x, xi) <= c1 |xi|^p + a(x)."""
    p: float
    c0: float
    c1: float
    a: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.c0 <= 0 or self.c1 <= 0:
            raise InvalidInputError(f"Growth constants must be positive, got c0={self.c0}, c1={self.c1}")
        validate_exponent(self.p)


@dataclass(frozen=True)
class LocalIntegrand:
    """g(x, xi) with x of shape (..., dim) and scalar xi per edge component."""
    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dxi: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    growth: Optional[GrowthConstants] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        values = np.broadcast_to(np.asarray(self.func(x, xi), dtype=float), xi.shape)
        _check_finite(self.name, values, np.asarray(x)[..., 0] if np.ndim(x) else x, xi)
        return values

    def derivative(self, x: np.ndarray, xi: np.ndarray, step: float = FD_STEP) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.dxi is not None:
            values = np.broadcast_to(np.asarray(self.dxi(x, xi), dtype=float), xi.shape)
        else:
            values = (self.evaluate(x, xi + step) - self.evaluate(x, xi - step)) / (2 * step)
        _check_finite(f"{self.name} derivative", values, np.asarray(x)[..., 0], xi)
        return values

    def vanishes_at_zero(self, grid: Grid) -> bool:
        return bool(np.all(self.evaluate(grid.edge_midpoints, np.zeros(grid.num_edges)) == 0.0))


def _check_finite(name: str, values: np.ndarray, s: Any, t: Any) -> None:
    if np.all(np.isfinite(values)):
        return
    index = np.unravel_index(int(np.flatnonzero(~np.isfinite(values))[0]), values.shape)
    s_b = np.broadcast_to(np.asarray(s, dtype=float), values.shape)
    t_b = np.broadcast_to(np.asarray(t, dtype=float), values.shape)
    raise NonFiniteValueError(name, (float(s_b[index]), float(t_b[index])))


@dataclass(frozen=True)
class Energy:
    """E(u) = F(u) + G(u) - h^dim * sum(forcing * u)."""
    measure: Optional[PairMeasure]
    f: Optional[PairIntegrand]
    g: LocalIntegrand
    forcing: Optional[GridFunction] = None

    def __post_init__(self):
        if self.measure is not None:
            require_nonnegative(self.measure)
            if self.forcing is not None:
                check_same_grid(self.measure.grid, self.forcing.grid)

    @property
    def has_nonlocal_part(self) -> bool:
        return self.measure is not None and self.f is not None


# ---------------------------------------------------------------------------
# Built-in integrand families
# ---------------------------------------------------------------------------

def abs_power(p: float = 2.0, lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> PairIntegrand:
    p = validate_exponent(p)

    def d1(s, t):
        d = s - t
        return p * np.abs(d) ** (p - 1.0) * np.sign(d)

    return PairIntegrand(
        'abs_power', lambda s, t: np.abs(s - t) ** p, d1, lambda s, t: -d1(s, t),
        nonnegative=True, truncation=TruncationConstants(1.0, 0.0, tuple(lambdas)), params={'p': p},
    )


def product_integrand() -> PairIntegrand:
    return PairIntegrand('product', lambda s, t: s * t, lambda s, t: t, lambda s, t: s)


def lorentzian(lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> PairIntegrand:
    def d1(s, t):
        d = s - t
        return -2.0 * d / (1.0 + d * d) ** 2

    return PairIntegrand(
        'lorentzian', lambda s, t: 1.0 / (1.0 + (s - t) ** 2), d1, lambda s, t: -d1(s, t),
        nonnegative=True, bounded_by=1.0, truncation=TruncationConstants(0.0, 1.0, tuple(lambdas)),
    )


def square_product(lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> PairIntegrand:
    return PairIntegrand(
        'square_product', lambda s, t: s * s * t * t, lambda s, t: 2.0 * s * t * t, lambda s, t: 2.0 * s * s * t,
        nonnegative=True, truncation=TruncationConstants(1.0, 0.0, tuple(lambdas)),
    )


DEFAULT_POLYNOMIAL = {(2, 2): 1.0, (1, 1): -1.0, (3, 1): 0.5, (0, 4): 0.25, (1, 0): 0.5}


def polynomial(coefficients: Optional[Dict[Tuple[int, int], float]] = None) -> PairIntegrand:
    """P(s, t) = sum c_ij s^i t^j (degree 4 by default)."""
    terms = dict(DEFAULT_POLYNOMIAL if coefficients is None else coefficients)
    for (i, j) in terms:
        if i < 0 or j < 0:
            raise InvalidInputError(f"Polynomial exponents must be nonnegative, got {(i, j)}")

    def value(s, t):
        return sum(c * s ** i * t ** j for (i, j), c in terms.items()) + 0.0 * (s + t)

    def d1(s, t):
        return sum(c * i * s ** (i - 1) * t ** j for (i, j), c in terms.items() if i > 0) + 0.0 * (s + t)

    def d2(s, t):
        return sum(c * j * s ** i * t ** (j - 1) for (i, j), c in terms.items() if j > 0) + 0.0 * (s + t)

    return PairIntegrand('polynomial', value, d1, d2,
                         params={'terms': [[i, j, c] for (i, j), c in sorted(terms.items())]})


def constant_integrand(c: float = 1.0) -> PairIntegrand:
    c = float(c)

    def zero(s, t):
        return np.zeros(np.broadcast(s, t).shape)

    return PairIntegrand('constant', lambda s, t: np.full(np.broadcast(s, t).shape, c), zero, zero,
                         nonnegative=c >= 0, bounded_by=abs(c),
                         truncation=TruncationConstants(1.0, 0.0) if c >= 0 else None, params={'c': c})


def zero_integrand() -> PairIntegrand:
    integrand = constant_integrand(0.0)
    return PairIntegrand('zero', integrand.func, integrand.d1, integrand.d2, nonnegative=True,
                         bounded_by=0.0, truncation=TruncationConstants(1.0, 0.0))


def truncated_integrand(f: PairIntegrand, lam: float) -> PairIntegrand:
    """tau^lam o f: the integrand clamped to [-lam, lam]."""
    if not lam > 0:
        raise InvalidInputError(f"Truncation level must be positive, got {lam}")

    def value(s, t):
        return np.clip(f.evaluate(s, t), -lam, lam)

    def partial(index):
        def derivative(s, t):
            inside = np.abs(f.evaluate(s, t)) < lam
            return np.where(inside, f.partials(s, t)[index], 0.0)
        return derivative

    return PairIntegrand(f"truncated_{f.name}", value, partial(0), partial(1),
                         nonnegative=f.nonnegative, bounded_by=lam, params={'lambda': lam, **f.params})


def _coefficient(alpha: Union[float, Callable[[np.ndarray], np.ndarray]]) -> Callable[[np.ndarray], np.ndarray]:
    if callable(alpha):
        return alpha
    value = float(alpha)
    return lambda x: np.full(np.shape(x)[:-1], value)


def power(p: float = 2.0) -> LocalIntegrand:
    return weighted_power(p, 1.0, name='power')


def weighted_power(p: float = 2.0, alpha: Union[float, Callable[[np.ndarray], np.ndarray]] = 1.0,
                   name: str = 'weighted_power', bounds: Optional[Tuple[float, float]] = None) -> LocalIntegrand:
    """alpha(x) |xi|^p; ``bounds`` declares (min alpha, max alpha) for the growth constants."""
    p = validate_exponent(p)
    coeff = _coefficient(alpha)
    if bounds is None and not callable(alpha):
        bounds = (float(alpha), float(alpha))
    growth = GrowthConstants(p, bounds[0], bounds[1]) if bounds is not None and bounds[0] > 0 else None
    params = {'p': p} if callable(alpha) else {'p': p, 'alpha': float(alpha)}
    return LocalIntegrand(
        name,
        lambda x, xi: coeff(x) * np.abs(xi) ** p,
        lambda x, xi: coeff(x) * p * np.abs(xi) ** (p - 1.0) * np.sign(xi),
        growth, params,
    )


def two_phase_coefficient(alpha: float, beta: float, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """a(kx): alpha where frac(k x_0) < 1/2, beta elsewhere."""
    def coefficient(x: np.ndarray) -> np.ndarray:
        phase = np.mod(k * np.asarray(x)[..., 0], 1.0)
        return np.where(phase < 0.5, alpha, beta)
    return coefficient


def two_phase(p: float = 2.0, alpha: float = 1.0, beta: float = 4.0, k: int = 1) -> LocalIntegrand:
    integrand = weighted_power(p, two_phase_coefficient(alpha, beta, k), name='two_phase',
                               bounds=(min(alpha, beta), max(alpha, beta)))
    return LocalIntegrand(integrand.name, integrand.func, integrand.dxi, integrand.growth,
                          {'p': p, 'alpha': alpha, 'beta': beta, 'k': k})


def shifted_power(p: float = 2.0, shift: float = 1.0) -> LocalIntegrand:
    """|xi|^p - shift (violates the lower growth bound at xi = 0)."""
    p = validate_exponent(p)
    return LocalIntegrand(
        'shifted_power',
        lambda x, xi: np.abs(xi) ** p - shift,
        lambda x, xi: p * np.abs(xi) ** (p - 1.0) * np.sign(xi),
        None, {'p': p, 'shift': shift},
    )


PAIR_INTEGRANDS: Dict[str, Callable[..., PairIntegrand]] = {
    'abs_power': abs_power,
    'product': product_integrand,
    'lorentzian': lorentzian,
    'square_product': square_product,
    'polynomial': polynomial,
    'constant': constant_integrand,
    'zero': zero_integrand,
}

LOCAL_INTEGRANDS: Dict[str, Callable[..., LocalIntegrand]] = {
    'power': power,
    'weighted_power': weighted_power,
    'two_phase': two_phase,
    'shifted_power': shifted_power,
}


def make_pair_integrand(integrand_id: str, params: Optional[Dict[str, Any]] = None) -> PairIntegrand:
    """Build a built-in pair integrand from its id and keyword parameters."""
    if integrand_id not in PAIR_INTEGRANDS:
        raise InvalidInputError(f"Unknown pair integrand {integrand_id!r}; known: {sorted(PAIR_INTEGRANDS)}")
    params = dict(params or {})
    if integrand_id == 'polynomial' and 'terms' in params:
        params = {'coefficients': {(int(i), int(j)): float(c) for i, j, c in params['terms']}}
    return PAIR_INTEGRANDS[integrand_id](**params)


def make_local_integrand(integrand_id: str, params: Optional[Dict[str, Any]] = None) -> LocalIntegrand:
    """Build a built-in local integrand from its id and keyword parameters."""
    if integrand_id not in LOCAL_INTEGRANDS:
        raise InvalidInputError(f"Unknown local integrand {integrand_id!r}; known: {sorted(LOCAL_INTEGRANDS)}")
    return LOCAL_INTEGRANDS[integrand_id](**(params or {}))


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------

def eval_F(mu: PairMeasure, f: PairIntegrand, u: GridFunction) -> float:
    """Non-local energy int int f(u(x), u(y)) dmu."""
    require_nonnegative(mu)
    return double_integral(mu, f, u, u)


def eval_G(g: LocalIntegrand, u: GridFunction) -> float:
    """Local energy sum_e h^dim g(x_e, grad_e u)."""
    grid = u.grid
    return float(grid.cell_weight * np.sum(g.evaluate(grid.edge_midpoints, gradient(u).values)))


def forcing_term(E: Energy, u: GridFunction) -> float:
    if E.forcing is None:
        return 0.0
    check_same_grid(E.forcing.grid, u.grid)
    return float(u.grid.cell_weight * (E.forcing.values @ u.values))


def total_energy(E: Energy, u: GridFunction) -> float:
    value = eval_G(E.g, u) - forcing_term(E, u)
    if E.has_nonlocal_part:
        value += eval_F(E.measure, E.f, u)
    return value


def _grad_F(mu: PairMeasure, f: PairIntegrand, u: GridFunction, step: float = FD_STEP) -> np.ndarray:
    grid = mu.grid
    check_same_grid(grid, u.grid)
    grad = np.zeros(grid.num_nodes)
    extended = np.zeros(grid.num_extended_nodes)
    ue = grid.extend(u.values)
    if mu.density is not None:
        W = mu.node_pair_weights
        d1, d2 = f.partials(ue[:, None], ue[None, :], step)
        extended += np.sum(W * d1, axis=1) + np.sum(W * d2, axis=0)
    pairs, weights = mu.atom_supports
    if weights.size:
        d1, d2 = f.partials(ue[pairs[..., 0]], ue[pairs[..., 1]], step)
        np.add.at(extended, pairs[..., 0], weights * d1)
        np.add.at(extended, pairs[..., 1], weights * d2)
    grad += extended[grid.interior_index]
    for factor in mu.factors:
        d1, d2 = f.partials(u.values[:, None], u.values[None, :], step)
        grad += factor.coeff * (factor.first * (d1 @ factor.second) + factor.second * (factor.first @ d2))
    return grad


def grad_energy(E: Energy, u: GridFunction, step: float = FD_STEP) -> GridFunction:
    """Nodal gradient of F + G - forcing.

    F-part: sum over the pair components of df/ds and df/dt weighted by mu;
    G-part: discrete divergence D^T (h^dim dg/dxi) of the edge fluxes.
    ``step`` is the central-difference step for integrands without declared
    derivatives.
    """
    grid = u.grid
    flux = grid.cell_weight * E.g.derivative(grid.edge_midpoints, gradient(u).values, step)
    grad = grid.difference_matrix.T @ flux
    if E.has_nonlocal_part:
        grad = grad + _grad_F(E.measure, E.f, u, step)
    if E.forcing is not None:
        grad = grad - grid.cell_weight * E.forcing.values
    return GridFunction(grid, grad)


# ---------------------------------------------------------------------------
# Structural checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationReport:
    passed: bool
    worst_violation: float
    witness: Optional[Tuple[float, float, float]]
    trials: int

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'worst_violation': self.worst_violation,
                'witness': list(self.witness) if self.witness else None, 'trials': self.trials}


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    lower_margin: float
    upper_margin: float
    witness: Optional[Tuple[Tuple[float, ...], float]]
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'lower_margin': self.lower_margin, 'upper_margin': self.upper_margin,
                'witness': [list(self.witness[0]), self.witness[1]] if self.witness else None,
                'samples': self.samples}


def check_truncation_condition(f: PairIntegrand, a: float, b: float, lambdas: Sequence[float],
                               sample_box: Tuple[float, float] = (-10.0, 10.0), trials: int = 10000,
                               seed: int = 0, tolerance: float = 1e-12) -> TruncationReport:
    """Scan f(tau s, tau t) <= a f(s, t) + b over random (s, t) and lambda in ``lambdas``."""
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas:
        raise InvalidInputError("The truncation check needs at least one lambda")
    if any(lam <= 0 for lam in lambdas):
        raise InvalidInputError("Truncation levels must be positive")
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")

    rng = np.random.default_rng(seed)
    low, high = sample_box
    s = rng.uniform(low, high, trials)
    t = rng.uniform(low, high, trials)
    worst, witness = -np.inf, None
    for lam in lambdas:
        truncated = f.evaluate(np.clip(s, -lam, lam), np.clip(t, -lam, lam))
        bound = a * f.evaluate(s, t) + b
        violation = truncated - bound
        scale = tolerance * np.maximum(1.0, np.abs(bound))
        excess = violation - scale
        i = int(np.argmax(excess))
        if excess[i] > worst:
            worst = float(excess[i])
            witness = (float(s[i]), float(t[i]), lam)

    passed = worst <= 0.0
    if not passed:
        logger.info(f"Truncation condition fails for {f.name}: worst excess {worst:.3g} at {witness}")
    return TruncationReport(passed, max(worst, 0.0) if passed else worst, witness, trials * len(lambdas))


def check_growth(g: LocalIntegrand, c0: float, c1: float, a: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 p: Optional[float] = None, sample_count: int = 10000, seed: int = 0, dim: int = 1,
                 xi_box: Tuple[float, float] = (-10.0, 10.0), tolerance: float = 1e-12) -> GrowthReport:
    """Randomized check of c0 |xi|^p <= g(x, xi) <= c1 |xi|^p + a(x); xi = 0 is always sampled."""
    if sample_count < 1:
        raise InvalidInputError(f"sample_count must be >= 1, got {sample_count}")
    p = validate_exponent(p if p is not None else g.params.get('p', 2.0))
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, (sample_count, dim))
    xi = rng.uniform(xi_box[0], xi_box[1], sample_count)
    xi[0] = 0.0
    values = g.evaluate(x, xi)
    extra = np.zeros(sample_count) if a is None else np.broadcast_to(np.asarray(a(x), dtype=float), (sample_count,))
    scale = tolerance * np.maximum(1.0, np.abs(values))
    lower = values - c0 * np.abs(xi) ** p + scale
    upper = c1 * np.abs(xi) ** p + extra - values + scale

    worst_lower, worst_upper = int(np.argmin(lower)), int(np.argmin(upper))
    passed = lower[worst_lower] >= 0 and upper[worst_upper] >= 0
    witness = None
    if not passed:
        i = worst_lower if lower[worst_lower] < upper[worst_upper] else worst_upper
        witness = (tuple(float(c) for c in x[i]), float(xi[i]))
    return GrowthReport(bool(passed), float(lower[worst_lower] - scale[worst_lower]),
                        float(upper[worst_upper] - scale[worst_upper]), witness, sample_count)


def truncation_bound_holds(mu: PairMeasure, f: PairIntegrand, u: GridFunction, lam: float,
                           a: float, b: float, tolerance: float = 1e-10) -> bool:
    """eval_F(mu, f, tau^lam u) <= a eval_F(mu, f, u) + b mu(Omega x Omega)."""
    lhs = eval_F(mu, f, truncate(u, lam))
    return lhs <= a * eval_F(mu, f, u) + b * total_mass(mu) + tolerance
