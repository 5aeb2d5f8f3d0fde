import numpy as np
import pytest

from modules.errors import GridMismatchError, InvalidInputError, NonFiniteValueError
from modules.functionals import product_integrand
from modules.measures import (
    atom_measure, combine, comarginal_weighted_by, cut_distance_inputs, density_measure, dirac, double_integral,
    lebesgue, marginal_from_density, marginal_weighted_by, pair_integral, product_measure, require_nonnegative,
    reweighted, scaled, total_mass, transpose, truncation_tail_mass, zero_measure,
)
from modules.sobolev_core import GridFunction, grid_function, make_grid


def random_function(grid, rng):
    return GridFunction(grid, rng.standard_normal(grid.num_nodes))


def mixed_measure(grid, rng):
    """Density, atoms and a product factor in one measure."""
    density = rng.uniform(0, 1, (grid.num_cells, grid.num_cells))
    mu = density_measure(grid, density)
    atoms = atom_measure(grid, [(((0.3,) * grid.dim, (0.55,) * grid.dim), 0.7),
                                (((0.81,) * grid.dim, (0.2,) * grid.dim), 0.4)])
    factor = product_measure(rng.uniform(0, 1, grid.num_nodes), rng.uniform(0, 1, grid.num_nodes), 0.5, grid=grid)
    return combine(combine(mu, atoms), factor)


@pytest.mark.parametrize('dim, n', [(1, 7), (2, 3)])
def test_lebesgue_has_unit_mass(dim, n):
    assert total_mass(lebesgue(make_grid(dim, n))) == pytest.approx(1.0, rel=1e-14)


def test_lebesgue_pairing_factorizes(grid_1d, rng):
    phi, psi = random_function(grid_1d, rng), random_function(grid_1d, rng)
    h = grid_1d.h
    expected = (h * phi.values.sum()) * (h * psi.values.sum())
    assert pair_integral(lebesgue(grid_1d), phi, psi) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize('dim, n', [(1, 9), (2, 4)])
def test_pairing_matrix_reproduces_pair_integral(dim, n, rng):
    grid = make_grid(dim, n)
    mu = mixed_measure(grid, rng)
    phi, psi = random_function(grid, rng), random_function(grid, rng)
    assert phi.values @ mu.pairing_matrix @ psi.values == pytest.approx(pair_integral(mu, phi, psi), rel=1e-10)


def test_dirac_at_node_reads_nodal_values():
    grid = make_grid(1, 7)
    phi = grid_function(grid, lambda x: np.sin(3 * x))
    psi = grid_function(grid, lambda x: x ** 2)
    mu = dirac(grid, 3 / 8, 5 / 8)
    assert pair_integral(mu, phi, psi) == pytest.approx(np.sin(9 / 8) * (5 / 8) ** 2)


def test_dirac_between_nodes_interpolates_linearly():
    grid = make_grid(1, 7)
    phi = grid_function(grid, lambda x: x)
    one = GridFunction(grid, np.ones(7))
    assert pair_integral(dirac(grid, 0.3, 0.5), phi, one) == pytest.approx(0.3)


@pytest.mark.parametrize('x', [0.0, 1.0, 1.5])
def test_atoms_must_be_inside(grid_1d, x):
    with pytest.raises(InvalidInputError):
        dirac(grid_1d, x, 0.5)


def test_unsigned_measure_rejects_negative_density(grid_1d):
    density = np.ones((grid_1d.num_cells, grid_1d.num_cells))
    density[0, 0] = -1.0
    with pytest.raises(InvalidInputError):
        density_measure(grid_1d, density)
    assert density_measure(grid_1d, density, signed=True).signed


def test_non_finite_density_rejected(grid_1d):
    density = np.ones((grid_1d.num_cells, grid_1d.num_cells))
    density[1, 2] = np.inf
    with pytest.raises(NonFiniteValueError):
        density_measure(grid_1d, density)


def test_negative_mass_dirac_is_signed(grid_1d):
    mu = dirac(grid_1d, 0.5, 0.5, mass=-2.0)
    assert mu.signed
    with pytest.raises(InvalidInputError):
        require_nonnegative(mu)


def test_density_callable_is_sampled_at_midpoints(grid_1d):
    mu = density_measure(grid_1d, lambda x, y: x + 0 * y)
    mids = grid_1d.cell_midpoints[:, 0]
    assert mu.density[:, 3] == pytest.approx(mids)


def test_transpose_swaps_arguments(grid_2d, rng):
    mu = mixed_measure(grid_2d, rng)
    phi, psi = random_function(grid_2d, rng), random_function(grid_2d, rng)
    assert pair_integral(transpose(mu), phi, psi) == pytest.approx(pair_integral(mu, psi, phi), rel=1e-10)


def test_combine_is_linear(grid_1d, rng):
    mu = mixed_measure(grid_1d, rng)
    nu = lebesgue(grid_1d)
    phi, psi = random_function(grid_1d, rng), random_function(grid_1d, rng)
    mixed = combine(mu, nu, 2.0, -3.0)
    assert mixed.signed
    expected = 2.0 * pair_integral(mu, phi, psi) - 3.0 * pair_integral(nu, phi, psi)
    assert pair_integral(mixed, phi, psi) == pytest.approx(expected, rel=1e-10)


def test_difference_of_equal_measures_is_zero(grid_1d, rng):
    mu = mixed_measure(grid_1d, rng)
    assert not np.any(np.abs(cut_distance_inputs(mu, mu).pairing_matrix) > 1e-14)


def test_scaled_measure(grid_1d, rng):
    mu = mixed_measure(grid_1d, rng)
    assert total_mass(scaled(mu, 3.0)) == pytest.approx(3.0 * total_mass(mu))


def test_zero_measure_has_no_components(grid_2d):
    mu = zero_measure(grid_2d)
    assert mu.representations == []
    assert total_mass(mu) == 0.0


def test_combine_rejects_other_grid(grid_1d):
    with pytest.raises(GridMismatchError):
        combine(lebesgue(grid_1d), lebesgue(make_grid(1, 3)))


def test_weighted_marginals_match_pairing(grid_2d, rng):
    mu = mixed_measure(grid_2d, rng)
    phi, psi = random_function(grid_2d, rng), random_function(grid_2d, rng)
    expected = pair_integral(mu, phi, psi)
    assert marginal_weighted_by(mu, psi).integrate(phi) == pytest.approx(expected, rel=1e-10)
    assert comarginal_weighted_by(mu, phi).integrate(psi) == pytest.approx(expected, rel=1e-10)


def test_product_measure_mass(grid_1d):
    first = marginal_from_density(grid_1d, lambda x: 2 * x)
    second = marginal_from_density(grid_1d, lambda x: np.ones_like(x))
    mu = product_measure(first, second)
    assert total_mass(mu) == pytest.approx(first.total_mass() * second.total_mass())
    assert mu.representations == ['product']


def test_marginal_from_constant_density_mass(grid_2d):
    marginal = marginal_from_density(grid_2d, lambda x, y: np.ones_like(x))
    # boundary cells lose the share of their mass that belongs to boundary nodes
    assert marginal.total_mass() == pytest.approx((grid_2d.n * grid_2d.h) ** 2)


def test_product_integrand_double_integral_is_pairing(grid_1d, rng):
    mu = mixed_measure(grid_1d, rng)
    u, v = random_function(grid_1d, rng), random_function(grid_1d, rng)
    assert double_integral(mu, product_integrand(), u, v) == pytest.approx(pair_integral(mu, u, v), rel=1e-10)


def test_double_integral_accepts_plain_callables(grid_1d):
    one = GridFunction(grid_1d, np.ones(grid_1d.num_nodes))
    value = double_integral(lebesgue(grid_1d), lambda s, t: np.ones_like(s * t), one, one)
    assert value == pytest.approx(1.0)


def test_double_integral_reports_non_finite_values(grid_1d):
    u = GridFunction.zeros(grid_1d)
    with pytest.raises(NonFiniteValueError):
        double_integral(lebesgue(grid_1d), lambda s, t: np.full(np.broadcast(s, t).shape, np.nan), u, u)


def test_tail_mass(grid_1d):
    mu = lebesgue(grid_1d)
    small = GridFunction(grid_1d, np.full(grid_1d.num_nodes, 0.5))
    large = GridFunction(grid_1d, np.full(grid_1d.num_nodes, 5.0))
    assert truncation_tail_mass(mu, small, small, 1.0) == 0.0
    # pairs of boundary nodes keep the value 0 and carry mass h^2
    assert truncation_tail_mass(mu, large, large, 1.0) == pytest.approx(1.0 - grid_1d.h ** 2)
    with pytest.raises(InvalidInputError):
        truncation_tail_mass(mu, small, small, -1.0)


@pytest.mark.parametrize('dim, n', [(1, 9), (2, 4)])
def test_reweighted_mass_is_pairing(dim, n, rng):
    grid = make_grid(dim, n)
    mu = mixed_measure(grid, rng)
    phi, psi = random_function(grid, rng), random_function(grid, rng)
    weighted = reweighted(mu, phi, psi)
    assert weighted.signed
    assert total_mass(weighted) == pytest.approx(pair_integral(mu, phi, psi), rel=1e-10)


def test_cell_density_integral_sums_over_node_pairs():
    grid = make_grid(1, 4)
    density = np.zeros((grid.num_cells, grid.num_cells))
    density[1, 3] = 1.0
    mu = density_measure(grid, density)
    u = GridFunction(grid, [3.0, -1.0, 1.0, 1.0])
    # cells 1 and 3 have the corner values (3, -1) and (1, 1); each node pair weighs h^2 / 4
    value = double_integral(mu, lambda s, t: (s - t) ** 2, u, u)
    assert value == pytest.approx(grid.h ** 2 / 4 * (4 + 4 + 4 + 4))


def test_off_node_atom_spreads_over_neighbouring_nodes():
    grid = make_grid(1, 3)
    mu = dirac(grid, 0.375, 0.75)
    u = GridFunction(grid, [2.0, 0.0, 4.0])
    value = double_integral(mu, lambda s, t: (s - t) ** 2, u, u)
    assert value == pytest.approx(0.5 * (2 - 4) ** 2 + 0.5 * (0 - 4) ** 2)
    assert double_integral(mu, product_integrand(), u, u) == pytest.approx(pair_integral(mu, u, u))


@pytest.mark.parametrize('dim, n', [(1, 9), (2, 4)])
def test_constant_integrand_integrates_to_total_mass(dim, n, rng):
    grid = make_grid(dim, n)
    mu = mixed_measure(grid, rng)
    u, v = random_function(grid, rng), random_function(grid, rng)
    value = double_integral(mu, lambda s, t: np.ones(np.broadcast(s, t).shape), u, v)
    assert value == pytest.approx(total_mass(mu), rel=1e-12)


@pytest.mark.parametrize('dim, n', [(1, 9), (2, 4)])
def test_node_pair_weights_are_nonnegative_and_extend_the_pairing(dim, n, rng):
    grid = make_grid(dim, n)
    mu = density_measure(grid, rng.uniform(0, 1, (grid.num_cells, grid.num_cells)))
    W = mu.node_pair_weights
    assert W.shape == (grid.num_extended_nodes, grid.num_extended_nodes)
    assert np.all(W >= 0)
    assert W.sum() == pytest.approx(total_mass(mu), rel=1e-12)
    interior = grid.interior_index
    assert np.allclose(W[np.ix_(interior, interior)], mu.pairing_matrix)
