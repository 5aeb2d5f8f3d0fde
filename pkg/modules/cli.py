"""
Run configurations: load and validate a JSON run file, execute its command and
export the resulting report.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 for
configuration or runtime errors (no report is written in that case).
"""

import json
import logging
from typing import Any, Dict, List, Optional, Tuple

import jsonschema
import numpy as np
import pandas as pd

from .cut_norm import cut_norm_alternating, cut_norm_bruteforce, cut_norm_exact_p2, product_dual_norm
from .energy_minimizer import minimize_energy
from .errors import ConfigValidationError, InvalidInputError, LabError
from .families import FIXTURE_DESCRIPTIONS, example_fixture, make_family, oscillating_density_measure
from .functionals import (Energy, eval_F, eval_G, forcing_term, make_local_integrand, make_pair_integrand,
                          total_energy)
from .gamma_lab import (CONTINUITY_TOLERANCE, DEFAULT_K_LIST, LIMINF_TOLERANCE, MIN_VALUE_TOLERANCE,
                        RECOVERY_TRUNCATION_FRACTIONS, ContinuityExperiment, GammaExperiment, MoscoCheck,
                        SemicontinuityExperiment, parabola)
from .lab_config import LabSettings
from .measures import PairMeasure, cut_distance_inputs, density_measure, lebesgue
from .report_exporter import ReportExporter
from .report_utils import ConvergenceReport, Verdict
from .schemas import CONFIG_SCHEMA
from .sobolev_core import Grid, GridFunction, capacity_minimizer, grid_function, make_grid, nearest_node

logger = logging.getLogger(__name__)

DEFAULT_EXPECTED_TOLERANCE = 1e-6


def validate_config(document: Any) -> List[Tuple[str, str]]:
    """Schema problems as (JSON pointer, message) pairs, empty when valid."""
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    problems = []
    for error in sorted(validator.iter_errors(document), key=lambda e: list(map(str, e.absolute_path))):
        pointer = ''.join(f"/{part}" for part in error.absolute_path)
        problems.append((pointer, error.message))
    return problems


def load_config(config_path: str) -> Dict[str, Any]:
    """Read and validate a run configuration.

    Raises:
        ConfigValidationError: unreadable JSON or schema violations
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except OSError as e:
        raise ConfigValidationError([('', f"cannot read {config_path}: {e}")])
    except json.JSONDecodeError as e:
        raise ConfigValidationError([('', f"invalid JSON at line {e.lineno}: {e.msg}")])

    problems = validate_config(document)
    if problems:
        raise ConfigValidationError(problems)
    return document


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_grid(document: Dict[str, Any]) -> Grid:
    return make_grid(document['grid']['dim'], document['grid']['n'])


def build_function(entry: Dict[str, Any], grid: Grid) -> GridFunction:
    """Nodal function from {kind: zero|parabola|identity|sine, k, scale}."""
    kind = entry['kind']
    scale = float(entry.get('scale', 1.0))
    if kind == 'zero':
        return GridFunction.zeros(grid)
    if kind == 'parabola':
        return parabola(grid) * scale
    if kind == 'identity':
        return grid_function(grid, lambda *x: scale * np.prod(x, axis=0))
    k = int(entry.get('k', 1))
    return grid_function(grid, lambda *x: scale * np.prod([np.sin(k * np.pi * c) for c in x], axis=0))


def build_measure(entry: Dict[str, Any], grid: Grid, seed: int = 0) -> PairMeasure:
    """Measure from {id, params}; the ids are listed in schemas.MEASURE_IDS."""
    measure_id = entry['id']
    params = dict(entry.get('params', {}))
    if measure_id == 'lebesgue':
        return lebesgue(grid)
    if measure_id in ('dirac', 'loglog_density'):
        return example_fixture(measure_id, grid, **params)
    if measure_id == 'oscillating_difference':
        k = int(params.get('k', 1))
        return cut_distance_inputs(oscillating_density_measure(grid, k), lebesgue(grid))
    if measure_id == 'random_density':
        rng = np.random.default_rng(int(params.get('seed', seed)))
        low, high = float(params.get('low', 0.0)), float(params.get('high', 1.0))
        return density_measure(grid, rng.uniform(low, high, (grid.num_cells, grid.num_cells)), signed=low < 0)

    family_id = params.pop('family', None)
    if family_id is None:
        raise InvalidInputError(f"Measure {measure_id!r} needs params.family")
    k = int(params.pop('k', 1))
    family = make_family(family_id, grid, **params)
    mu_k, _ = family.member(k)
    if measure_id == 'family_member':
        return mu_k
    return cut_distance_inputs(mu_k, family.limit[0])


def build_energy(document: Dict[str, Any], grid: Grid) -> Energy:
    seed = document.get('seed', 0)
    mu = build_measure(document['measure'], grid, seed) if 'measure' in document else None
    f = make_pair_integrand(document['f']['id'], document['f'].get('params')) if 'f' in document else None
    g = make_local_integrand(document['g']['id'], document['g'].get('params'))
    forcing = GridFunction(grid, np.full(grid.num_nodes, float(document.get('forcing', 0.0))))
    return Energy(mu, f, g, forcing)


def _expected_verdict(document: Dict[str, Any], value: float) -> Dict[str, Verdict]:
    if 'expected' not in document:
        return {}
    expected = float(document['expected'])
    tolerance = float(document.get('tolerance', DEFAULT_EXPECTED_TOLERANCE))
    error = abs(value - expected)
    return {'expected_value': Verdict(error <= tolerance, error, tolerance, f"|value - {expected:g}|")}


def _scalar_report(document: Dict[str, Any], rows: List[Dict[str, Any]], verdicts: Dict[str, Verdict],
                   metadata: Optional[Dict[str, Any]] = None) -> ConvergenceReport:
    return ConvergenceReport(
        name=document.get('name', document['command']),
        command=document['command'],
        rows=pd.DataFrame(rows),
        verdicts=verdicts,
        metadata={'config': document, **(metadata or {})},
        kind='scalar',
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def run_cutnorm(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    p = float(document.get('p', 2.0))
    seed = document.get('seed', 0)
    mu = build_measure(document['measure'], grid, seed)
    methods = document.get('methods') or (['exact_p2'] if p == 2.0 else ['alternating'])

    rows = []
    for method in methods:
        lower_bound = method in ('alternating', 'bruteforce') and p != 2.0
        if method == 'exact_p2':
            if p != 2.0:
                raise InvalidInputError("The exact cut norm is only available for p = 2")
            value = cut_norm_exact_p2(mu).value
        elif method == 'alternating':
            value = cut_norm_alternating(mu, p, seed=seed, restarts=document.get('restarts', settings.restarts),
                                         relative_improvement=settings.relative_improvement,
                                         max_alternations=settings.max_alternations,
                                         tolerance=settings.tolerance).value
        elif method == 'bruteforce':
            value = cut_norm_bruteforce(mu, p, budget=document.get('budget', settings.bruteforce_budget), seed=seed)
            lower_bound = True
        else:
            value = product_dual_norm(mu, p)
        logger.info(f"Cut norm ({method}, p={p:g}): {value:.10g}")
        rows.append({'quantity': method, 'value': value, 'lower_bound': lower_bound})

    return _scalar_report(document, rows, _expected_verdict(document, rows[0]['value']),
                          {'representations': mu.representations})


def run_capacity(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    p = float(document.get('p', 2.0))
    nodes = [nearest_node(grid, point) for point in document['points']]
    value, _, diagnostics = capacity_minimizer(nodes, p, grid, settings.tolerance, settings.max_iterations)
    logger.info(f"Capacity of nodes {nodes} (p={p:g}): {value:.10g}")
    rows = [{'quantity': 'capacity', 'value': value}]
    return _scalar_report(document, rows, _expected_verdict(document, value),
                          {'nodes': nodes, 'diagnostics': diagnostics.to_dict()})


def run_eval(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    E = build_energy(document, grid)
    u = build_function(document['u'], grid)
    F = eval_F(E.measure, E.f, u) if E.has_nonlocal_part else 0.0
    rows = [
        {'quantity': 'F', 'value': F},
        {'quantity': 'G', 'value': eval_G(E.g, u)},
        {'quantity': 'forcing', 'value': forcing_term(E, u)},
        {'quantity': 'total', 'value': total_energy(E, u)},
    ]
    return _scalar_report(document, rows, _expected_verdict(document, rows[-1]['value']))


def run_minimize(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    E = build_energy(document, grid)
    result = minimize_energy(E, restarts=settings.minimizer_restarts, seed=document.get('seed', 0),
                             max_iter=settings.max_iterations, tolerance=settings.descent_tolerance,
                             armijo=settings.armijo_constant, shrink=settings.shrink, grid=grid,
                             fd_step=settings.fd_step)
    diagnostics = result.diagnostics
    rows = [
        {'quantity': 'minimum', 'value': result.value},
        {'quantity': 'iterations', 'value': float(diagnostics['iterations'])},
        {'quantity': 'residual', 'value': float(diagnostics['residual'])},
        {'quantity': 'converged', 'value': 1.0 if diagnostics['converged'] else 0.0},
    ]
    return _scalar_report(document, rows, _expected_verdict(document, result.value),
                          {'method': diagnostics['method']})


def _experiment_kwargs(document: Dict[str, Any], settings: LabSettings) -> Dict[str, Any]:
    kwargs = {'settings': settings, 'seed': document.get('seed', 0)}
    if 'compute_cut_norm' in document:
        kwargs['compute_cut_norm'] = document['compute_cut_norm']
    return kwargs


def _family(document: Dict[str, Any], grid: Grid):
    entry = document['family']
    return make_family(entry['id'], grid, **entry.get('params', {}))


def _pair_integrand(document: Dict[str, Any]):
    if 'f' not in document:
        return None
    return make_pair_integrand(document['f']['id'], document['f'].get('params'))


def run_continuity(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    cutoff = None
    if 'cutoff' in document:
        cutoff = (build_function(document['cutoff']['phi'], grid), build_function(document['cutoff']['psi'], grid))
    experiment = ContinuityExperiment(
        _family(document, grid), _pair_integrand(document), document.get('k_list', DEFAULT_K_LIST),
        u_kind=document.get('u_kind', 'oscillation'), v_kind=document.get('v_kind'),
        cutoff=cutoff, tolerance=document.get('tolerance', CONTINUITY_TOLERANCE),
        p=float(document.get('p', 2.0)), **_experiment_kwargs(document, settings),
    )
    return experiment.run()


def run_semicontinuity(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    experiment = SemicontinuityExperiment(
        _family(document, grid), _pair_integrand(document), document.get('k_list', DEFAULT_K_LIST),
        u_kind=document.get('u_kind', 'concentration'), tolerance=document.get('tolerance', LIMINF_TOLERANCE),
        p=float(document.get('p', 2.0)), **_experiment_kwargs(document, settings),
    )
    return experiment.run()


def _gamma_kwargs(document: Dict[str, Any], settings: LabSettings) -> Dict[str, Any]:
    kwargs = _experiment_kwargs(document, settings)
    kwargs['tolerance'] = document.get('tolerance', MIN_VALUE_TOLERANCE)
    for key in ('cross_check', 'cross_check_n'):
        if key in document:
            kwargs[key] = document[key]
    return kwargs


def run_gamma(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    experiment = GammaExperiment(_family(document, grid), _pair_integrand(document),
                                 float(document.get('forcing', 1.0)), document.get('k_list', DEFAULT_K_LIST),
                                 **_gamma_kwargs(document, settings))
    return experiment.run()


def run_mosco(document: Dict[str, Any], settings: LabSettings) -> ConvergenceReport:
    grid = build_grid(document)
    experiment = MoscoCheck(_family(document, grid), _pair_integrand(document),
                            float(document.get('forcing', 1.0)), document.get('k_list', DEFAULT_K_LIST),
                            truncation_fractions=document.get('truncation_fractions', RECOVERY_TRUNCATION_FRACTIONS),
                            **_gamma_kwargs(document, settings))
    return experiment.run()


COMMAND_HANDLERS = {
    'capacity': run_capacity,
    'continuity': run_continuity,
    'cutnorm': run_cutnorm,
    'eval': run_eval,
    'gamma': run_gamma,
    'minimize': run_minimize,
    'mosco': run_mosco,
    'semicontinuity': run_semicontinuity,
}


def execute(document: Dict[str, Any], settings: Optional[LabSettings] = None) -> ConvergenceReport:
    """Run a validated configuration document and return its report."""
    settings = settings or LabSettings()
    command = document['command']
    logger.info(f"Executing command {command}")
    report = COMMAND_HANDLERS[command](document, settings)
    report.name = document.get('name', report.name)
    return report


def run(config_path: str, settings: Optional[LabSettings] = None, export: bool = True) -> int:
    """Execute a run configuration file and export its report.

    Args:
        config_path: Path to the JSON configuration
        settings: Lab settings (default: built-in defaults)
        export: Write JSON/CSV report files

    Returns:
        Exit code (0 all verdicts passed, 2 a verdict failed, 1 error)
    """
    settings = settings or LabSettings()
    try:
        document = load_config(config_path)
    except ConfigValidationError as e:
        for pointer, message in e.problems:
            logger.error(f"Config error at {pointer or '/'}: {message}")
        return 1

    try:
        report = execute(document, settings)
    except LabError as e:
        logger.error(f"Command {document['command']} failed: {e}")
        return 1
    except (ArithmeticError, np.linalg.LinAlgError, MemoryError) as e:
        logger.error(f"Numerical failure in command {document['command']}: {e}", exc_info=True)
        return 1

    for name, verdict in report.verdicts.items():
        level = logging.INFO if verdict.passed else logging.WARNING
        logger.log(level, f"Verdict {name}: {'PASS' if verdict.passed else 'FAIL'} "
                          f"(value={verdict.value}, tolerance={verdict.tolerance})")

    if export:
        exporter = ReportExporter(document.get('output_dir', settings.output_dir), settings.save_plots)
        result = exporter.export_report(report)
        if not result['success']:
            return 1

    return 0 if report.passed else 2


def list_fixtures() -> str:
    """Sorted table of fixture and family ids with descriptions."""
    frame = pd.DataFrame(sorted(FIXTURE_DESCRIPTIONS.items()), columns=['id', 'description'])
    return frame.to_string(index=False)
