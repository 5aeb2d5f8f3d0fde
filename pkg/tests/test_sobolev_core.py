import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from modules.errors import GridMismatchError, InvalidInputError, NonFiniteValueError, SizeLimitError
from modules.measures import MarginalMeasure, marginal_from_density
from modules.sobolev_core import (
    GridFunction, capacity, capacity_minimizer, dual_norm, grid_function, make_grid, nearest_node,
    norms_of_columns, solve_dual_norm, sobolev_norm, stiffness_matrix, truncate, weak_test_sequence,
)

NODES = 9
GRID = make_grid(1, NODES)
values_strategy = arrays(np.float64, (NODES,), elements=st.floats(min_value=-10.0, max_value=10.0))


def test_grid_counts_1d():
    grid = make_grid(1, 7)
    assert grid.num_nodes == 7
    assert grid.num_cells == 8
    assert grid.num_edges == 8
    assert grid.h == pytest.approx(1 / 8)
    assert grid.nodes[:, 0] == pytest.approx(np.arange(1, 8) / 8)


def test_grid_counts_2d():
    grid = make_grid(2, 3)
    assert grid.num_nodes == 9
    assert grid.num_cells == 16
    assert grid.num_edges == 24
    assert grid.nodes.shape == (9, 2)
    # node i*n + j sits at ((i+1)h, (j+1)h)
    assert grid.nodes[1] == pytest.approx([0.25, 0.5])


@pytest.mark.parametrize('dim, n', [(3, 4), (0, 4), (1, 0), (2, -1)])
def test_invalid_grid_rejected(dim, n):
    with pytest.raises(InvalidInputError):
        make_grid(dim, n)


def test_oversized_grid_rejected():
    with pytest.raises(SizeLimitError):
        make_grid(2, 257)
    with pytest.raises(SizeLimitError):
        make_grid(1, 4097)


def test_stiffness_is_scaled_second_difference():
    grid = make_grid(1, 5)
    expected = (2 * np.eye(5) - np.eye(5, k=1) - np.eye(5, k=-1)) / grid.h
    assert np.allclose(grid.stiffness.toarray(), expected)


def test_stiffness_matches_squared_norm(grid_2d, rng):
    u = GridFunction(grid_2d, rng.standard_normal(grid_2d.num_nodes))
    assert u.values @ stiffness_matrix(grid_2d) @ u.values == pytest.approx(sobolev_norm(u, 2.0) ** 2)


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
def test_norm_of_hat_function(p):
    grid = make_grid(1, 7)
    values = np.zeros(7)
    values[3] = 1.0
    expected = (2 * grid.h ** (1 - p)) ** (1 / p)
    assert sobolev_norm(GridFunction(grid, values), p) == pytest.approx(expected, rel=1e-12)


def test_norm_of_zero_is_zero(grid_2d):
    assert sobolev_norm(GridFunction.zeros(grid_2d), 3.0) == 0.0


@pytest.mark.parametrize('p', [1.0, 0.5, float('inf'), float('nan')])
def test_invalid_exponent_rejected(grid_1d, p):
    with pytest.raises(InvalidInputError):
        sobolev_norm(GridFunction.zeros(grid_1d), p)


@seed(7)
@settings(max_examples=50, deadline=None)
@given(values=values_strategy, c=st.floats(min_value=-5.0, max_value=5.0),
       p=st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_norm_is_absolutely_homogeneous(values, c, p):
    u = GridFunction(GRID, values)
    expected = abs(c) * sobolev_norm(u, p)
    assert sobolev_norm(c * u, p) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@seed(11)
@settings(max_examples=50, deadline=None)
@given(first=values_strategy, second=values_strategy, p=st.sampled_from([1.5, 2.0, 3.0]))
def test_norm_satisfies_triangle_inequality(first, second, p):
    u = GridFunction(GRID, first)
    v = GridFunction(GRID, second)
    assert sobolev_norm(u + v, p) <= sobolev_norm(u, p) + sobolev_norm(v, p) + 1e-9


def test_norms_of_columns_matches_single_norms(grid_1d, rng):
    values = rng.standard_normal((grid_1d.num_nodes, 3))
    columns = norms_of_columns(grid_1d, values, 2.5)
    for index in range(3):
        assert columns[index] == pytest.approx(sobolev_norm(GridFunction(grid_1d, values[:, index]), 2.5))


def test_grid_function_values_are_read_only(grid_1d):
    u = grid_function(grid_1d, lambda x: x * (1 - x))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_grid_function_samples_callable_in_2d(grid_2d):
    u = grid_function(grid_2d, lambda x, y: x + 10 * y)
    assert u.values == pytest.approx(grid_2d.nodes[:, 0] + 10 * grid_2d.nodes[:, 1])


def test_grid_function_rejects_wrong_length(grid_1d):
    with pytest.raises(InvalidInputError):
        GridFunction(grid_1d, np.zeros(grid_1d.num_nodes + 1))


def test_grid_function_rejects_non_finite(grid_1d):
    values = np.zeros(grid_1d.num_nodes)
    values[2] = np.nan
    with pytest.raises(NonFiniteValueError):
        GridFunction(grid_1d, values)


def test_mixing_grids_raises():
    u = GridFunction.zeros(make_grid(1, 7))
    v = GridFunction.zeros(make_grid(1, 9))
    with pytest.raises(GridMismatchError):
        u + v


def test_truncate_clamps_values(grid_1d):
    u = GridFunction(grid_1d, np.linspace(-3, 3, grid_1d.num_nodes))
    clipped = truncate(u, 1.0)
    assert clipped.sup_norm() == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        truncate(u, 0.0)


def test_dual_norm_of_constant_density():
    grid = make_grid(1, 63)
    value, maximizer = dual_norm(GridFunction(grid, np.ones(grid.num_nodes)), 2.0)
    # continuum value sqrt(int x(1-x)/2 dx) = sqrt(1/12)
    assert value == pytest.approx(np.sqrt(1 / 12), rel=1e-3)
    assert sobolev_norm(maximizer, 2.0) == pytest.approx(1.0)


def test_closed_form_and_ascent_agree(grid_1d, rng):
    c = GridFunction(grid_1d, rng.uniform(-1, 1, grid_1d.num_nodes))
    closed = solve_dual_norm(c, 2.0, method='closed_form')
    ascent = solve_dual_norm(c, 2.0, method='ascent')
    assert closed.diagnostics.method == 'closed_form'
    assert ascent.diagnostics.method == 'ascent'
    assert ascent.value == pytest.approx(closed.value, rel=1e-8)


def test_closed_form_needs_p2(grid_1d):
    c = GridFunction(grid_1d, np.ones(grid_1d.num_nodes))
    with pytest.raises(InvalidInputError):
        solve_dual_norm(c, 3.0, method='closed_form')


def test_dual_norm_of_zero_is_zero(grid_2d):
    result = solve_dual_norm(GridFunction.zeros(grid_2d), 3.0)
    assert result.value == 0.0
    assert result.diagnostics.method == 'trivial'


@pytest.mark.parametrize('p', [1.5, 3.0])
def test_dual_norm_bounds_every_unit_test_function(grid_1d, rng, p):
    c = GridFunction(grid_1d, rng.uniform(0, 2, grid_1d.num_nodes))
    result = solve_dual_norm(c, p)
    assert sobolev_norm(result.maximizer, p) == pytest.approx(1.0, rel=1e-9)
    load = c.values * grid_1d.cell_weight
    for _ in range(20):
        phi = rng.standard_normal(grid_1d.num_nodes)
        phi = phi / norms_of_columns(grid_1d, phi[:, None], p)[0]
        assert abs(load @ phi) <= result.value * (1 + 1e-9)


def test_marginal_with_unit_density_matches_constant_function(grid_1d):
    marginal = marginal_from_density(grid_1d, lambda x: np.ones_like(x))
    from_marginal, _ = dual_norm(marginal, 2.0)
    from_function, _ = dual_norm(GridFunction(grid_1d, np.ones(grid_1d.num_nodes)), 2.0)
    assert from_marginal == pytest.approx(from_function, rel=1e-12)


def test_nearest_node_in_1d():
    grid = make_grid(1, 127)
    index = nearest_node(grid, 0.5)
    assert grid.nodes[index, 0] == pytest.approx(0.5)


def test_nearest_node_in_2d():
    grid = make_grid(2, 7)
    index = nearest_node(grid, (0.25, 0.75))
    assert grid.nodes[index] == pytest.approx([0.25, 0.75])


@pytest.mark.parametrize('point', [0.0, 1.0, -0.2, (0.5,)])
def test_nearest_node_rejects_points_outside(grid_2d, point):
    with pytest.raises(InvalidInputError):
        nearest_node(grid_2d, point)


def test_capacity_of_center_point_p2():
    grid = make_grid(1, 127)
    assert capacity([nearest_node(grid, 0.5)], 2.0, grid) == pytest.approx(4.0, rel=1e-9)


def test_capacity_of_center_point_p3():
    grid = make_grid(1, 63)
    value, potential, _ = capacity_minimizer([nearest_node(grid, 0.5)], 3.0, grid)
    # 1D p-harmonic potentials are piecewise linear: 2 * (1/0.5)^(p-1)
    assert value == pytest.approx(8.0, rel=1e-6)
    assert potential.values.max() == pytest.approx(1.0)


def test_capacity_is_monotone_in_the_set(grid_2d):
    small = capacity([12], 2.0, grid_2d)
    large = capacity([12, 13], 2.0, grid_2d)
    assert 0 < small <= large


def test_capacity_rejects_bad_node_sets(grid_1d):
    with pytest.raises(InvalidInputError):
        capacity([], 2.0, grid_1d)
    with pytest.raises(InvalidInputError):
        capacity([grid_1d.num_nodes], 2.0, grid_1d)


def test_oscillation_sequence_is_uniformly_close(grid_1d):
    base = GridFunction.zeros(grid_1d)
    u = weak_test_sequence('oscillation', 2, base)
    assert u.sup_norm() <= 0.5 + 1e-12


@pytest.mark.parametrize('p', [2.0, 3.0])
def test_concentration_sequence_has_unit_norm(p):
    grid = make_grid(1, 63)
    base = grid_function(grid, lambda x: x * (1 - x))
    u = weak_test_sequence('concentration', 4, base, p=p)
    assert sobolev_norm(u - base, p) == pytest.approx(1.0, rel=1e-12)


def test_test_sequence_needs_resolution(grid_1d):
    with pytest.raises(InvalidInputError):
        weak_test_sequence('oscillation', 4, GridFunction.zeros(grid_1d))
    with pytest.raises(InvalidInputError):
        weak_test_sequence('spiral', 1, GridFunction.zeros(grid_1d))


@pytest.mark.parametrize('dim, n', [(1, 4), (2, 3)])
def test_extended_nodes_pad_the_boundary(dim, n, rng):
    grid = make_grid(dim, n)
    values = rng.standard_normal(grid.num_nodes)
    extended = grid.extend(values)
    assert extended.shape == (grid.num_extended_nodes,)
    assert extended[grid.interior_index] == pytest.approx(values)
    boundary = np.ones(grid.num_extended_nodes, dtype=bool)
    boundary[grid.interior_index] = False
    assert not np.any(extended[boundary])
    assert np.asarray(grid.corner_average.sum(axis=1)).ravel() == pytest.approx(np.ones(grid.num_cells))
    assert grid.corner_average @ extended == pytest.approx(grid.cell_average @ values)


def test_norm_of_parabola_converges_to_one_over_sqrt3():
    errors = []
    for n in (15, 63, 255):
        grid = make_grid(1, n)
        u = grid_function(grid, lambda x: x * (1 - x))
        value = sobolev_norm(u, 2.0)
        # forward differences of x(1-x) are exact; the midpoint rule loses h^2 / 3
        assert value == pytest.approx(np.sqrt((1 - grid.h ** 2) / 3), rel=1e-12)
        errors.append(abs(value - 1 / np.sqrt(3)))
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] < 1e-5


@seed(13)
@settings(max_examples=50, deadline=None)
@given(values=values_strategy, lam=st.floats(min_value=0.01, max_value=12.0), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_truncation_does_not_increase_the_norm(values, lam, p):
    u = GridFunction(GRID, values)
    assert sobolev_norm(truncate(u, lam), p) <= sobolev_norm(u, p) * (1 + 1e-12)


def test_dual_norm_of_point_evaluation_at_center():
    grid = make_grid(1, 63)
    weights = np.zeros(grid.num_nodes)
    weights[nearest_node(grid, 0.5)] = 1.0
    value, _ = dual_norm(MarginalMeasure(grid, weights), 2.0)
    # discrete Green's function of -u'' is exact at the nodes: G(x, x) = x (1 - x)
    assert value == pytest.approx(0.5, rel=1e-10)


def test_dual_norm_of_first_sine():
    grid = make_grid(1, 63)
    value, _ = dual_norm(grid_function(grid, lambda x: np.sin(np.pi * x)), 2.0)
    eigenvalue = 4 / grid.h ** 2 * np.sin(np.pi * grid.h / 2) ** 2
    assert value == pytest.approx(1 / np.sqrt(2 * eigenvalue), rel=1e-10)
    assert value == pytest.approx(1 / (np.pi * np.sqrt(2)), rel=1e-3)


def test_capacity_off_center_p2():
    grid = make_grid(1, 7)
    # 1 / 0.25 + 1 / 0.75
    assert capacity([nearest_node(grid, 0.25)], 2.0, grid) == pytest.approx(16 / 3, rel=1e-12)


@pytest.mark.parametrize('n, p, slack', [(8, 2.0, 1e-12), (6, 3.0, 1e-6)])
def test_capacity_is_subadditive(n, p, slack):
    grid = make_grid(1, n)
    values = {}
    for mask in range(1, 2 ** n):
        values[mask] = capacity([i for i in range(n) if mask >> i & 1], p, grid)
    for first in values:
        for second in values:
            assert values[first | second] <= (values[first] + values[second]) * (1 + slack)
