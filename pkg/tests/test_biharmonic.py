import math

import numpy as np
import pytest

from vdplate import (build_grid, ClampedOperator, uniform_density, make_density, make_initial_data,
                     laplacian, bilaplacian, boundary_traces, normal_derivative, h4_norm,
                     energy, dissipativity, norm_equivalence_bounds, spectrum,
                     clamped_beam_eigenvalue, project_clamped, InitialData, State)
from vdplate.errors import SpectrumError, EnsembleError, FieldShapeError


def test_laplacian_of_sine(op2d):
    grid = op2d.grid
    x, y = grid.points.T
    u = np.sin(np.pi*x)*np.sin(np.pi*y)
    Lu = laplacian(op2d, u)
    i = grid.interior_index
    err = np.abs(Lu[i] + 2*np.pi**2*u[i]) / np.abs(2*np.pi**2*u[i])
    assert err.max() <= (np.pi*grid.h_min)**2/6


def test_operator_is_symmetric(op2d):
    B = op2d.B
    assert abs(B - B.T).max() == 0


@pytest.fixture(scope='module')
def op33():
    return ClampedOperator(build_grid(2, [1.0, 1.0], [33, 33]))


@pytest.mark.parametrize('seed', range(100))
def test_green_identity(op33, seed):
    grid = op33.grid
    rng = np.random.default_rng(seed)
    u, v = (project_clamped(op33, rng.standard_normal(grid.size)) for _ in range(2))
    lhs = grid.inner(bilaplacian(op33, u), v)
    rhs = grid.inner(laplacian(op33, u), laplacian(op33, v))
    assert abs(lhs - rhs) <= 1e-12*grid.norm(laplacian(op33, u))*grid.norm(laplacian(op33, v))


def test_bilaplacian_vanishes_on_boundary(op1d, mode1):
    Bu = bilaplacian(op1d, mode1.f)
    assert not np.any(Bu[op1d.grid.boundary_index])
    with pytest.raises(FieldShapeError):
        bilaplacian(op1d, np.zeros(5))


def test_traces_of_quartic(op1d):
    x = op1d.grid.points[:, 0]
    u = x**2*(1 - x)**2          # u'' = 2 at both ends, outward (u'')' = 12
    lap, nlap = boundary_traces(op1d, u)
    assert np.allclose(lap, 2.0, rtol=1e-9)
    assert np.allclose(nlap, 12.0, rtol=1e-9)
    assert np.abs(normal_derivative(op1d, u)).max() < 1e-10


def _trace_errors(n):
    grid = build_grid(1, [1.0], [n])
    op = ClampedOperator(grid)
    x = grid.points[:, 0]
    u = x**2*(1 - x)**2*(1 + x)  # Δu = 2, 4 and outward ∂nΔu = 6, 30 at x = 0, 1
    lap, nlap = boundary_traces(op, u)
    return np.abs(lap - [2.0, 4.0]).max(), np.abs(nlap - [6.0, 30.0]).max()


def test_traces_converge_at_second_order():
    errors = [_trace_errors(n) for n in (17, 33, 65)]
    for (lap0, nlap0), (lap1, nlap1) in zip(errors, errors[1:]):
        assert nlap0/nlap1 == pytest.approx(4.0, rel=1e-3)
        assert lap0/lap1 >= 3.9
    assert errors[-1][1] < 0.1


def test_traces_on_square():
    grid = build_grid(2, [1.0, 1.0], [33, 33])
    op = ClampedOperator(grid)
    x, y = grid.points.T
    u = x**2*(1 - x)**2*np.sin(np.pi*y)
    lap, nlap = boundary_traces(op, u)
    left = (grid.points[grid.boundary_index, 0] == 0) & (grid.normal_axis == 0)
    s = np.sin(np.pi*grid.points[grid.boundary_index, 1])
    assert np.allclose(lap[left], 2*s[left], atol=1e-9)
    assert np.allclose(nlap[left], 12*s[left], atol=1e-9)


def test_normal_derivative_sign(op1d):
    x = op1d.grid.points[:, 0]
    dn = normal_derivative(op1d, x*(1 - x))
    assert dn == pytest.approx([-1.0, -1.0])


def test_h4_norm(op1d, mode1):
    assert h4_norm(op1d, op1d.grid.zeros()) == 0.0
    assert h4_norm(op1d, mode1.f) > h4_norm(op1d, 0.5*mode1.f) > 0


def test_energy_of_constant_velocity():
    grid = build_grid(2, [1.0, 1.0], [33, 33])
    op = ClampedOperator(grid)
    v = grid.extend(np.ones(grid.n_interior))
    ev = energy(op, uniform_density(grid), State(u=grid.zeros(), v=v))
    assert ev.bending == 0
    assert ev.kinetic == pytest.approx(0.5, abs=2*grid.h_min)
    assert ev.E == ev.kinetic
    assert ev.energy_norm_sq == pytest.approx(2*ev.E)


def test_dissipativity_identity(op2d):
    grid = op2d.grid
    rho = make_density(grid, 1.0, 2.0, dict(center=[0.5, 0.5], radius=0.3))
    data = make_initial_data(op2d, 'random', seed=5)
    scale = grid.norm(op2d.lap(data.f))*grid.norm(op2d.lap(data.g)) + grid.inner(data.g, data.g)
    for gamma in (0.0, 1.0, 7.5):
        lhs, rhs = dissipativity(op2d, rho, gamma, data.f, data.g)
        assert lhs == pytest.approx(rhs, abs=1e-11*scale)


def test_norm_equivalence(op2d, rho2d):
    C1, C2 = norm_equivalence_bounds(op2d, rho2d, seed=11)
    assert 0 < C1 <= C2
    with pytest.raises(EnsembleError):
        norm_equivalence_bounds(op2d, rho2d, count=3)
    with pytest.raises(EnsembleError):
        norm_equivalence_bounds(op2d, rho2d, ensemble=[make_initial_data(op2d, 'zero')])


def test_norm_equivalence_of_velocity_only_data(op2d, rho2d):
    zero = op2d.grid.zeros()
    ensemble = [InitialData(f=zero, g=make_initial_data(op2d, 'random', seed=s).g) for s in range(10)]
    assert norm_equivalence_bounds(op2d, rho2d, ensemble=ensemble) == pytest.approx((1.0, 1.0))


def test_beam_eigenvalue_oracle():
    assert clamped_beam_eigenvalue(1) == pytest.approx(4.7300408**4, rel=1e-6)
    assert clamped_beam_eigenvalue(2) == pytest.approx(7.8532046**4, rel=1e-6)
    assert clamped_beam_eigenvalue(1, length=2.0, rho=2.0) == pytest.approx(4.7300408**4/32, rel=1e-6)


def test_beam_spectrum_converges():
    grid = build_grid(1, [1.0], [65])
    op = ClampedOperator(grid)
    lam1 = spectrum(op, uniform_density(grid), 1)[0][0]
    assert lam1 == pytest.approx(500.564, rel=0.02)


def test_spectrum_pairs(op2d):
    grid = op2d.grid
    rho = make_density(grid, 1.0, 2.0, dict(center=[0.5, 0.5], radius=0.3))
    pairs = spectrum(op2d, rho, 3)
    lams = [lam for lam, _ in pairs]
    assert lams == sorted(lams)
    for i, (lam, phi) in enumerate(pairs):
        assert grid.inner(rho.values*phi, phi) == pytest.approx(1.0)
        resid = bilaplacian(op2d, phi) - lam*rho.values*grid.extend(phi[grid.interior_index])
        assert np.abs(resid).max() <= 1e-8*lam*np.abs(phi).max()
        assert phi[np.argmax(np.abs(phi))] > 0
        for _, psi in pairs[:i]:
            assert abs(grid.inner(rho.values*phi, psi)) < 1e-10


def test_spectrum_limits(op2d, rho2d, options):
    with pytest.raises(SpectrumError):
        spectrum(op2d, rho2d, op2d.n_interior + 1)
    options.plate_dense_max = 10
    with pytest.raises(SpectrumError):
        spectrum(op2d, rho2d, 1)


def test_spectrum_scales_with_density(op1d):
    grid = op1d.grid
    lam1 = spectrum(op1d, uniform_density(grid, 1.0), 1)[0][0]
    lam4 = spectrum(op1d, uniform_density(grid, 4.0), 1)[0][0]
    assert lam4 == pytest.approx(lam1/4)
    assert math.isfinite(lam1)
