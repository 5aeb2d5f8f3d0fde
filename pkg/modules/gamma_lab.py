"""
Convergence experiments for non-local energies along scripted sequences.

* continuity: int int f(u_k(x), v_k(y)) dmu_k -> int int f(u, v) dmu
* semicontinuity: the liminf inequality for nonnegative f
* gamma: minimum values and minimizers of F_k + G_k - forcing
* mosco: recovery sequences started from the truncated limit minimizer

Weak convergence of the test functions holds by construction; the liminf over
infinitely many k is replaced by the minimum over the window k >= ceil(max k / 2).
"""

import logging
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .base_module import BaseExperiment
from .energy_minimizer import MinimizationResult, minimize_energy
from .errors import InvalidInputError
from .families import (SequenceFamily, example_fixture, homogenized_coefficient, loglog_refinement_study,
                       make_family)
from .functionals import Energy, LocalIntegrand, PairIntegrand, total_energy, truncation_bound_holds
from .measures import PairMeasure, double_integral, reweighted
from .report_utils import Verdict, fit_decay_exponent, is_nonincreasing, liminf_window_start, relative_gap
from .sobolev_core import (Grid, GridFunction, check_same_grid, grid_function, make_grid, sobolev_norm, truncate,
                           weak_test_sequence)

logger = logging.getLogger(__name__)

DEFAULT_K_LIST = (1, 2, 4, 8, 16)
CONTINUITY_TOLERANCE = 1e-3
LIMINF_TOLERANCE = 1e-4
MIN_VALUE_TOLERANCE = 0.02
CROSS_CHECK_TOLERANCE = 0.01
STRONG_DISTANCE_FLOOR = 1e-6
RECOVERY_TRUNCATION_FRACTIONS = (0.25, 0.5, 0.75)
TAIL_LENGTH = 3

Forcing = Union[float, Callable[..., Any], GridFunction]

__all__ = [
    'ContinuityExperiment', 'SemicontinuityExperiment', 'GammaExperiment', 'MoscoCheck',
    'continuity_experiment', 'semicontinuity_experiment', 'gamma_experiment', 'mosco_check',
    'minimize_energy', 'example_fixture', 'make_family', 'homogenized_coefficient',
    'fit_decay_exponent', 'loglog_refinement_study', 'parabola',
]


def parabola(grid: Grid) -> GridFunction:
    """Nodal x(1 - x) (a product over the axes in 2D)."""
    return grid_function(grid, lambda *x: np.prod([c * (1.0 - c) for c in x], axis=0))


class ContinuityExperiment(BaseExperiment):
    """|I_k - I| for I_k = int int f(u_k(x), v_k(y)) dmu_k along weakly converging u_k, v_k."""

    name = 'continuity'

    def __init__(self, family: SequenceFamily, f: PairIntegrand, k_list: Sequence[int] = DEFAULT_K_LIST,
                 u_kind: str = 'oscillation', v_kind: Optional[str] = None,
                 base_u: Optional[GridFunction] = None, base_v: Optional[GridFunction] = None,
                 cutoff: Optional[Tuple[GridFunction, GridFunction]] = None,
                 tolerance: float = CONTINUITY_TOLERANCE, p: float = 2.0, **kwargs: Any):
        super().__init__(family, k_list, **kwargs)
        self.f = f
        self.u_kind = u_kind
        self.v_kind = v_kind or u_kind
        self.base_u = base_u if base_u is not None else parabola(self.grid)
        self.base_v = base_v if base_v is not None else self.base_u
        check_same_grid(self.grid, self.base_u.grid)
        check_same_grid(self.grid, self.base_v.grid)
        if cutoff is not None:
            for weight in cutoff:
                check_same_grid(self.grid, weight.grid)
        self.cutoff = cutoff
        self.tolerance = float(tolerance)
        self.p = p

    def _weighted(self, mu: PairMeasure) -> PairMeasure:
        return mu if self.cutoff is None else reweighted(mu, *self.cutoff)

    @cached_property
    def limit_value(self) -> float:
        return double_integral(self._weighted(self.family.limit[0]), self.f, self.base_u, self.base_v)

    def _compute_frame(self) -> pd.DataFrame:
        _ = self.limit_value
        return super()._compute_frame()

    def _row(self, k: int) -> Dict[str, Any]:
        mu_k, _ = self.family.member(k)
        u_k = weak_test_sequence(self.u_kind, k, self.base_u, self.p)
        v_k = weak_test_sequence(self.v_kind, k, self.base_v, self.p)
        value = double_integral(self._weighted(mu_k), self.f, u_k, v_k)
        row = {'k': k, 'integral': value, 'integral_limit': self.limit_value,
               'integral_gap': abs(value - self.limit_value)}
        row.update(self.measure_gaps(mu_k, self.family.limit[0]))
        return row

    def _verdicts(self, frame: pd.DataFrame) -> Dict[str, Verdict]:
        gaps = frame['integral_gap'].tolist()
        tail = gaps[-TAIL_LENGTH:]
        return {
            'tail_decreasing': Verdict(is_nonincreasing(tail, slack=1e-12), tail[-1], None,
                                       f"|I_k - I| nonincreasing over k={frame['k'].tolist()[-TAIL_LENGTH:]}"),
            'final_gap': Verdict(gaps[-1] <= self.tolerance, gaps[-1], self.tolerance,
                                 f"|I_k - I| at k={int(frame['k'].iloc[-1])}"),
        }

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        metadata.update({'f': self.f.name, 'f_params': _jsonable(self.f.params), 'u_kind': self.u_kind,
                         'v_kind': self.v_kind, 'limit_value': self.limit_value,
                         'cutoff': self.cutoff is not None})
        return metadata


class SemicontinuityExperiment(BaseExperiment):
    """liminf_k int int f(u_k(x), u_k(y)) dmu_k >= int int f(u(x), u(y)) dmu for f >= 0."""

    name = 'semicontinuity'

    def __init__(self, family: SequenceFamily, f: PairIntegrand, k_list: Sequence[int] = DEFAULT_K_LIST,
                 u_kind: str = 'concentration', base_u: Optional[GridFunction] = None,
                 tolerance: float = LIMINF_TOLERANCE, p: float = 2.0, **kwargs: Any):
        if not f.nonnegative:
            raise InvalidInputError(f"Semicontinuity needs a nonnegative integrand, {f.name} is not declared so")
        super().__init__(family, k_list, **kwargs)
        self.f = f
        self.u_kind = u_kind
        self.base_u = base_u if base_u is not None else parabola(self.grid)
        check_same_grid(self.grid, self.base_u.grid)
        self.tolerance = float(tolerance)
        self.p = p

    @cached_property
    def limit_value(self) -> float:
        return double_integral(self.family.limit[0], self.f, self.base_u, self.base_u)

    def _compute_frame(self) -> pd.DataFrame:
        _ = self.limit_value
        return super()._compute_frame()

    def _row(self, k: int) -> Dict[str, Any]:
        mu_k, _ = self.family.member(k)
        u_k = weak_test_sequence(self.u_kind, k, self.base_u, self.p)
        value = double_integral(mu_k, self.f, u_k, u_k)
        row = {'k': k, 'integral': value, 'integral_limit': self.limit_value,
               'integral_gap': abs(value - self.limit_value), 'excess': value - self.limit_value}
        row.update(self.measure_gaps(mu_k, self.family.limit[0]))
        return row

    def _verdicts(self, frame: pd.DataFrame) -> Dict[str, Verdict]:
        start = liminf_window_start(self.k_list)
        window = frame[frame['k'] >= start]
        if window.empty:
            window = frame
        worst = float(window['excess'].min())
        return {
            'liminf': Verdict(worst >= -self.tolerance, worst, self.tolerance,
                              f"min over k >= {start} of I_k - I"),
        }

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        metadata.update({'f': self.f.name, 'f_params': _jsonable(self.f.params), 'u_kind': self.u_kind,
                         'limit_value': self.limit_value, 'liminf_window_start': liminf_window_start(self.k_list)})
        return metadata


class GammaExperiment(BaseExperiment):
    """Minimum values and minimizers of E_k = F_k + G_k - forcing against the limit energy."""

    name = 'gamma'
    gap_column = 'min_gap'

    def __init__(self, family: SequenceFamily, f: Optional[PairIntegrand] = None, forcing: Forcing = 1.0,
                 k_list: Sequence[int] = DEFAULT_K_LIST, tolerance: float = MIN_VALUE_TOLERANCE,
                 liminf_tolerance: float = LIMINF_TOLERANCE, cross_check: Optional[bool] = None,
                 cross_check_n: Optional[int] = None, cross_check_tolerance: float = CROSS_CHECK_TOLERANCE,
                 **kwargs: Any):
        super().__init__(family, k_list, **kwargs)
        if family.limit[1] is None:
            raise InvalidInputError(f"Family {family.family_id} has no local integrand")
        self.f = f
        self.forcing = forcing
        self.forcing_values = self._forcing_on(self.grid)
        self.tolerance = float(tolerance)
        self.liminf_tolerance = float(liminf_tolerance)
        self.cross_check = family.family_id == 'homogenization' if cross_check is None else bool(cross_check)
        self.cross_check_n = cross_check_n
        self.cross_check_tolerance = float(cross_check_tolerance)
        self.p = float(family.params.get('p', 2.0))

    def _forcing_on(self, grid: Grid) -> GridFunction:
        if isinstance(self.forcing, GridFunction):
            check_same_grid(grid, self.forcing.grid)
            return self.forcing
        if callable(self.forcing):
            return grid_function(grid, self.forcing)
        return GridFunction(grid, np.full(grid.num_nodes, float(self.forcing)))

    def energy(self, mu: PairMeasure, g: LocalIntegrand, forcing: Optional[GridFunction] = None) -> Energy:
        return Energy(mu if self.f is not None else None, self.f, g,
                      forcing if forcing is not None else self.forcing_values)

    def minimize(self, E: Energy, seed: Any, **overrides: Any) -> MinimizationResult:
        options = {
            'restarts': self.settings.minimizer_restarts,
            'seed': seed,
            'max_iter': self.settings.max_iterations,
            'tolerance': self.settings.descent_tolerance,
            'armijo': self.settings.armijo_constant,
            'shrink': self.settings.shrink,
            'threads': self.inner_threads,
            'fd_step': self.settings.fd_step,
        }
        options.update(overrides)
        return minimize_energy(E, **options)

    @cached_property
    def limit_solution(self) -> MinimizationResult:
        mu, g = self.family.limit
        result = self.minimize(self.energy(mu, g), self.seed_for(0), threads=self.threads)
        logger.info(f"Limit energy minimum {result.value:.10g} ({result.diagnostics['method']})")
        return result

    def _compute_frame(self) -> pd.DataFrame:
        _ = self.limit_solution
        return super()._compute_frame()

    def _row(self, k: int) -> Dict[str, Any]:
        mu_k, g_k = self.family.member(k)
        result = self.minimize(self.energy(mu_k, g_k), self.seed_for(k))
        limit = self.limit_solution
        row = {
            'k': k,
            'min_k': result.value,
            'min_limit': limit.value,
            'min_gap': abs(result.value - limit.value),
            'relative_gap': relative_gap(result.value, limit.value),
            'minimizer_dist': sobolev_norm(result.u - limit.u, self.p),
            'converged': bool(result.diagnostics['converged']),
            'iterations': int(result.diagnostics['iterations']),
        }
        row.update(self.measure_gaps(mu_k, self.family.limit[0]))
        return row

    def _liminf_verdict(self, frame: pd.DataFrame) -> Verdict:
        start = liminf_window_start(self.k_list)
        window = frame[frame['k'] >= start]
        if window.empty:
            window = frame
        limit = self.limit_solution.value
        tolerance = self.liminf_tolerance + MIN_VALUE_TOLERANCE * abs(limit)
        excess = float(window['min_k'].min()) - limit
        return Verdict(excess >= -tolerance, excess, tolerance, f"min over k >= {start} of E_k(u_k) - min E")

    def _verdicts(self, frame: pd.DataFrame) -> Dict[str, Verdict]:
        final = float(frame['relative_gap'].iloc[-1])
        verdicts = {
            'min_value_convergence': Verdict(final <= self.tolerance, final, self.tolerance,
                                             f"|m_k - m| / |m| at k={int(frame['k'].iloc[-1])}"),
            'gamma_liminf': self._liminf_verdict(frame),
        }
        if self.cross_check:
            verdicts['limit_cross_check'] = self.limit_cross_check()
        return verdicts

    def limit_cross_check(self) -> Verdict:
        """Compare the limit minimum with the k = 2 max(k) minimum on a finer grid."""
        if isinstance(self.forcing, GridFunction):
            logger.warning("Cannot resample a nodal forcing on the cross-check grid")
            return Verdict(False, None, self.cross_check_tolerance, 'forcing given as nodal values')
        fine_n = self.cross_check_n or 4 * (self.grid.n + 1) - 1
        fine_grid = make_grid(self.grid.dim, fine_n)
        fine_family = self.family.rebuild(fine_grid)
        k_check = 2 * max(self.k_list)
        forcing = self._forcing_on(fine_grid)

        mu_k, g_k = fine_family.member(k_check)
        mu, g = fine_family.limit
        oscillating = self.minimize(self.energy(mu_k, g_k, forcing), self.seed_for(k_check), threads=self.threads)
        limit = self.minimize(self.energy(mu, g, forcing), self.seed_for(0), threads=self.threads)
        gap = relative_gap(oscillating.value, limit.value)
        logger.info(f"Cross-check on n={fine_n}, k={k_check}: {oscillating.value:.10g} vs limit {limit.value:.10g}")
        return Verdict(gap <= self.cross_check_tolerance, gap, self.cross_check_tolerance,
                       f"fine grid n={fine_n}, k={k_check}")

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        limit = self.limit_solution
        unconverged = []
        if self._frame is not None and 'converged' in self._frame:
            unconverged = [int(k) for k, c in zip(self._frame['k'], self._frame['converged'])
                           if isinstance(c, (bool, np.bool_)) and not c]
        metadata.update({
            'f': self.f.name if self.f is not None else None,
            'g_limit': self.family.limit[1].name,
            'g_limit_params': _jsonable(self.family.limit[1].params),
            'limit_minimum': limit.value,
            'limit_diagnostics': {k: v for k, v in limit.diagnostics.items() if k != 'restarts'},
            'unconverged_k': unconverged,
            'forcing': self.forcing if isinstance(self.forcing, (int, float)) else 'function',
        })
        return metadata


class MoscoCheck(GammaExperiment):
    """Recovery sequences built from the limit minimizer u*.

    Each k-energy is evaluated at u* and at its truncations tau^lam u* for
    the levels ``truncation_fractions`` * sup|u*|, then minimized by bounded
    descent from u* inside [-box, box].
    """

    name = 'mosco'
    gap_column = 'minimizer_dist'
    fit_floor = STRONG_DISTANCE_FLOOR

    def __init__(self, *args: Any, truncation_fractions: Sequence[float] = RECOVERY_TRUNCATION_FRACTIONS,
                 **kwargs: Any):
        kwargs.setdefault('cross_check', False)
        super().__init__(*args, **kwargs)
        fractions = tuple(sorted({float(c) for c in truncation_fractions}))
        if any(not 0.0 < c < 1.0 for c in fractions):
            raise InvalidInputError(f"Truncation fractions must lie in (0, 1), got {list(fractions)}")
        self.truncation_fractions = fractions

    @property
    def box(self) -> float:
        return 2.0 * self.limit_solution.u.sup_norm()

    @property
    def truncation_levels(self) -> Tuple[float, ...]:
        sup = self.limit_solution.u.sup_norm()
        return tuple(c * sup for c in self.truncation_fractions) if sup > 0 else ()

    def _truncation_columns(self, E_k: Energy, u: GridFunction) -> Dict[str, Any]:
        columns: Dict[str, Any] = {}
        bound_holds = None if self.f is None or self.f.truncation is None else True
        for fraction, lam in zip(self.truncation_fractions, self.truncation_levels):
            columns[f'truncated_energy_{fraction:g}'] = total_energy(E_k, truncate(u, lam))
            if bound_holds:
                a, b = self.f.truncation.a, self.f.truncation.b
                bound_holds = truncation_bound_holds(E_k.measure, self.f, u, lam, a, b)
        columns['truncation_bound'] = bound_holds
        return columns

    def _row(self, k: int) -> Dict[str, Any]:
        mu_k, g_k = self.family.member(k)
        E_k = self.energy(mu_k, g_k)
        limit = self.limit_solution
        start = limit.u
        start_energy = total_energy(E_k, start)
        if self.box > 0:
            result = self.minimize(E_k, self.seed_for(k), restarts=1, initial=start, box=self.box)
        else:
            result = MinimizationResult(start, start_energy, {'converged': True, 'iterations': 0})
        row = {
            'k': k,
            'recovery_start_energy': start_energy,
            'start_gap': relative_gap(start_energy, limit.value),
        }
        row.update(self._truncation_columns(E_k, start))
        row.update({
            'min_k': result.value,
            'min_limit': limit.value,
            'min_gap': abs(result.value - limit.value),
            'relative_gap': relative_gap(result.value, limit.value),
            'minimizer_dist': sobolev_norm(result.u - limit.u, self.p),
            'converged': bool(result.diagnostics['converged']),
            'iterations': int(result.diagnostics['iterations']),
        })
        row.update(self.measure_gaps(mu_k, self.family.limit[0]))
        return row

    def _verdicts(self, frame: pd.DataFrame) -> Dict[str, Verdict]:
        last_k = int(frame['k'].iloc[-1])
        final = float(frame['relative_gap'].iloc[-1])
        verdicts = {
            'recovery_energy': Verdict(final <= self.tolerance, final, self.tolerance,
                                       f"|E_k(u_k) - m| / |m| at k={last_k}"),
        }
        checked = [bool(v) for v in frame.get('truncation_bound', []) if v is not None and not pd.isna(v)]
        if checked:
            failures = checked.count(False)
            verdicts['truncation_bound'] = Verdict(failures == 0, float(failures), 0.0,
                                                   f"F_k(tau u*) <= a F_k(u*) + b mu_k at levels "
                                                   f"{[round(lam, 6) for lam in self.truncation_levels]}")
        if self.family.strong_recovery:
            start_gap = float(frame['start_gap'].iloc[-1])
            verdicts['recovery_start'] = Verdict(start_gap <= self.tolerance, start_gap, self.tolerance,
                                                 f"|E_k(u*) - m| / |m| at k={last_k}")
            exponent = fit_decay_exponent(frame['k'], frame['minimizer_dist'], self.fit_floor)
            at_floor = bool((frame['minimizer_dist'] <= self.fit_floor).all())
            passed = at_floor or (not np.isnan(exponent) and exponent >= 1.0)
            verdicts['strong_convergence'] = Verdict(passed, exponent, 1.0,
                                                     'fitted decay exponent of ||u_k - u||_{1,p}')
        return verdicts

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        metadata.update({'box': self.box, 'strong_recovery_expected': self.family.strong_recovery,
                         'truncation_fractions': list(self.truncation_fractions),
                         'truncation_levels': list(self.truncation_levels)})
        return metadata


def _jsonable(params: Dict[str, Any]) -> Dict[str, Any]:
    return {str(k): (v if isinstance(v, (int, float, str, bool, type(None))) else repr(v)) for k, v in params.items()}


def continuity_experiment(family: SequenceFamily, f: PairIntegrand, u_kind: str = 'oscillation',
                          v_kind: Optional[str] = None, k_list: Sequence[int] = DEFAULT_K_LIST, **kwargs: Any):
    """Run the continuity experiment and return its ConvergenceReport."""
    return ContinuityExperiment(family, f, k_list, u_kind=u_kind, v_kind=v_kind, **kwargs).run()


def semicontinuity_experiment(family: SequenceFamily, f: PairIntegrand, u_kind: str = 'concentration',
                              k_list: Sequence[int] = DEFAULT_K_LIST, **kwargs: Any):
    """Run the liminf experiment for a nonnegative integrand."""
    return SemicontinuityExperiment(family, f, k_list, u_kind=u_kind, **kwargs).run()


def gamma_experiment(family: SequenceFamily, f: Optional[PairIntegrand] = None, forcing: Forcing = 1.0,
                     k_list: Sequence[int] = DEFAULT_K_LIST, **kwargs: Any):
    """Compare minima and minimizers of the k-energies with the limit energy."""
    return GammaExperiment(family, f, forcing, k_list, **kwargs).run()


def mosco_check(family: SequenceFamily, f: Optional[PairIntegrand] = None, forcing: Forcing = 1.0,
                k_list: Sequence[int] = DEFAULT_K_LIST, **kwargs: Any):
    """Recovery-sequence check: energies and strong W^{1,p} distances to the limit minimizer."""
    return MoscoCheck(family, f, forcing, k_list, **kwargs).run()
