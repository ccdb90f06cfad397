import math

import numpy as np
import pytest

from vicsekbgk.equilibria import solve_L
from vicsekbgk.linstab import (
    SingularOperatorError,
    SingularSymbolError,
    abscissa_candidates,
    alpha2,
    axis_coefficients,
    bound_budget,
    c0_bound,
    c1_bound,
    c2_bound,
    c1_symmetrized,
    default_eps,
    default_z_grid,
    dispersion_coefficients,
    dispersion_sweep,
    fl_solve,
    flux_relaxation_matrix,
    invertibility_sweep,
    lambda_J,
    lattice_wavenumbers,
    phi0,
    phi2,
    spectral_abscissa,
)
from vicsekbgk.sphere import build_sphere_grid, von_mises, von_mises_gradient


def _dense_kernel_moments(z, k, mu, J, n=4096):
    """Trapezoid-rule oracle for the circle integrals behind the coefficients."""
    theta = 2.0 * np.pi * np.arange(n) / n
    w = 2.0 * np.pi / n
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    L = np.linalg.norm(J)
    m = np.exp(nodes @ J - L)
    m /= m.sum() * w
    den = 1.0 + z + 1j * (nodes @ k)
    a = (m / den).sum() * w
    b = (nodes.T * (m / den)).sum(axis=1) * w
    ww = np.einsum("ni,nj,n->ij", nodes, nodes, m / den) * w
    return a, b, ww


# ---------------------------------------------------------------------------
# flux relaxation matrix
# ---------------------------------------------------------------------------

def test_flux_matrix_disordered():
    C = flux_relaxation_matrix(1.0, d=2)
    assert np.max(np.abs(C - (-0.5) * np.eye(2))) < 1e-10
    C3 = flux_relaxation_matrix(3.0, d=3)
    assert np.max(np.abs(C3)) < 1e-10


def test_flux_matrix_on_branch():
    for d in (2, 3):
        mu = d + 0.5
        L = solve_L(mu, d)
        J = np.zeros(d)
        J[0] = L
        C = flux_relaxation_matrix(mu, J, d=d)
        assert np.max(np.abs(C - C.T)) < 1e-12
        evals = np.sort(np.linalg.eigvalsh(C))
        # d-1 conserved directions along J-perp plus the relaxation eigenvalue
        assert np.max(np.abs(evals[1:])) < 1e-10
        assert abs(evals[0] - lambda_J(mu, d)) < 1e-10
        for v in np.eye(d)[1:]:
            assert np.linalg.norm(C @ v) < 1e-10


def test_flux_matrix_rejects_off_manifold():
    with pytest.raises(ValueError):
        flux_relaxation_matrix(2.5, np.array([0.1, 0.0]))


def test_lambda_J_values():
    mu = 2.2
    L = solve_L(mu, 2)
    assert abs(lambda_J(mu, 2) - (mu - 2.0 - L * L / mu)) < 1e-14
    assert abs(lambda_J(mu, 2) - (-0.17595813801387395)) < 1e-10
    with pytest.raises(ValueError):
        lambda_J(2.0, 2)


def test_lambda_J_asymptotics():
    # lambda_J = -2(mu/d - 1) + K_d (mu - d)^2 + O((mu - d)^3) with
    # K_2 = 2/3 and K_3 = 20/63 (from the small-flux series of c)
    gaps = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    errs = np.array([abs(lambda_J(2.0 + g, 2) + g) for g in gaps])
    ratios = errs[:-1] / errs[1:]
    assert np.all((ratios > 3.5) & (ratios < 4.2))
    assert abs(errs[-1] / gaps[-1] ** 2 - 2.0 / 3.0) < 0.04
    err3 = abs(lambda_J(3.05, 3) + 2.0 * 0.05 / 3.0)
    assert abs(err3 / 0.05 ** 2 - 20.0 / 63.0) < 0.04


# ---------------------------------------------------------------------------
# axis coefficients
# ---------------------------------------------------------------------------

def test_axis_coefficients_k_zero():
    for d in (2, 3):
        for z in (0.0, 0.7 + 1.3j, -0.2 - 5.0j):
            c0, c1, c2 = axis_coefficients(z, 0.0, d)
            assert abs(c0 - 1.0 / (1.0 + z)) < 1e-14
            assert abs(c1) < 1e-14
            assert abs(c2 - 1.0 / (d * (1.0 + z))) < 1e-14


def test_axis_coefficients_dense_oracle():
    # direct high-resolution quadrature of Int w1^j M_0 / (1 + z + i k w1)
    for d, n in [(2, 200000), (3, 200000)]:
        if d == 2:
            theta = (np.arange(n) + 0.5) * 2.0 * np.pi / n
            w1 = np.cos(theta)
            wts = np.full(n, 1.0 / n)
        else:
            u, gw = np.polynomial.legendre.leggauss(n // 100)
            w1 = u
            wts = gw / 2.0
        for z, kmag in [(0.3, 2.0), (0.05 + 4.0j, 12.5), (1.5 - 9.0j, 0.03)]:
            den = 1.0 + z + 1j * kmag * w1
            c0, c1, c2 = axis_coefficients(z, kmag, d)
            assert abs(c0 - (wts / den).sum()) < 1e-11
            assert abs(c1 - (wts * w1 / den).sum()) < 1e-11
            assert abs(c2 - (wts * w1 ** 2 / den).sum()) < 1e-11


def test_axis_coefficients_symmetrized_c1():
    for d in (2, 3):
        for z, kmag in [(0.0, 10.0), (0.4 + 7.0j, 25.0), (2.0, 0.5)]:
            _, c1, _ = axis_coefficients(z, kmag, d)
            assert abs(c1 - c1_symmetrized(z, kmag, d)) < 1e-10


def test_axis_coefficients_large_real_part():
    z = 1000.0
    for d in (2, 3):
        c0, c1, c2 = axis_coefficients(z, 10.0, d)
        bound = 1.0 / (1.0 + z)
        assert abs(c0) <= bound and abs(c1) <= bound and abs(c2) <= bound


def test_axis_coefficients_domain():
    with pytest.raises(ValueError):
        axis_coefficients(-1.5, 1.0, 2)


# ---------------------------------------------------------------------------
# explicit bound functions
# ---------------------------------------------------------------------------

def test_phi2_profile():
    assert phi2(0.0) == 0.0
    u = np.linspace(0.0, 30.0, 200)
    v = phi2(u)
    assert np.all(np.diff(v) > 0)
    assert np.all(v < 1.0)
    assert abs(phi2(1.0) - (1.0 - 1.0 / math.sqrt(2.0))) < 1e-15


def test_alpha2_endpoints_and_monotonicity():
    for d in (2, 3):
        assert abs(alpha2(d, 0.0) - 0.5) < 1e-12
        assert alpha2(d, 1.0 - 1e-12) < 2e-6
        eps = np.linspace(0.05, 0.95, 10)
        vals = [alpha2(d, e) for e in eps]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_alpha2_analytic_oracles():
    # d=2: (theta_eps + eps sin(theta_eps))/pi with theta_eps = arccos(eps);
    # d=3: (1 - eps^3)/2
    for eps in (0.1, 0.25, 0.6):
        te = math.acos(eps)
        assert abs(alpha2(2, eps) - (te + eps * math.sin(te)) / math.pi) < 1e-12
        assert abs(alpha2(3, eps) - 0.5 * (1.0 - eps ** 3)) < 1e-12


def test_default_eps_solves_budget_split():
    for d, frozen in [(2, 0.7727548630617058), (3, 0.6299605249474366)]:
        eps = default_eps(d)
        assert abs(alpha2(d, eps) - 0.375) < 1e-10
        assert abs(eps - frozen) < 1e-10
    # d = 3 closed form: (1 - eps^3)/2 = 3/8 gives eps = 4^{-1/3}
    assert abs(default_eps(3) - 0.25 ** (1.0 / 3.0)) < 1e-10


def test_phi0_values():
    assert phi0(1e6, 2) > 0.99
    assert abs(phi0(10.0, 2) - (1.0 - (2.0 / math.pi + 0.5) / math.sqrt(10.0))) < 1e-14
    assert phi0(1.0, 2) == 0.0
    # c_3 = Gamma(3/2)/(sqrt(pi) Gamma(1)) = 1/2
    assert abs(phi0(10.0, 3) - (1.0 - 0.5 * math.pi / 10.0)) < 1e-14
    assert phi0(1.0, 3) == 0.0


def test_bound_budget_fields():
    budget = bound_budget(10.0, 2)
    assert budget.gamma == 10.0 and budget.d == 2
    assert abs(budget.alpha2 - 0.375) < 1e-10
    assert 0.0 < budget.phi0 < 1.0 and 0.0 < budget.phi2 < 1.0
    assert abs(budget.re_c0_max - (1.0 - budget.phi0)) < 1e-15
    assert abs(budget.abs_c1_max - (0.5 / math.sqrt(2.0) + 0.1)) < 1e-15


def test_coefficient_bounds_sampled():
    # zero violations over a small deterministic sample (the full sample is
    # exercised by the acceptance suite)
    rng = np.random.default_rng(1)
    d = 2
    eps = default_eps(d)
    for _ in range(100):
        z = complex(rng.uniform(0.0, 2.0), rng.uniform(-50.0, 50.0))
        kmag = rng.uniform(10.0, 50.0)
        c0, c1, c2 = axis_coefficients(z, kmag, d)
        assert c0.real <= c0_bound(kmag, d) + 1e-12
        assert abs(c1) <= c1_bound(kmag, d) + 1e-12
        assert d * abs(c2) <= d * c2_bound(kmag, d, eps) + 1e-12


# ---------------------------------------------------------------------------
# dispersion coefficients
# ---------------------------------------------------------------------------

def test_dispersion_coefficient_relations():
    # A = Int w (x) w M / den - b (x) J/mu and bbar = b - a J/mu
    mu = 2.5
    L = solve_L(mu, 2)
    J = np.array([L * math.cos(0.4), L * math.sin(0.4)])
    for z, k in [(0.3 + 2.1j, np.array([3.7, -1.2])),
                 (0.0 - 11.0j, np.array([0.0, 10.0]))]:
        coeff = dispersion_coefficients(z, k, mu, J)
        a, b, ww = _dense_kernel_moments(z, k, mu, J)
        assert abs(coeff.a - a) < 1e-10
        assert np.max(np.abs(coeff.b - b)) < 1e-10
        assert np.max(np.abs(coeff.A - (ww - np.outer(b, J) / mu))) < 1e-10
        assert np.max(np.abs(coeff.b_bar - (b - a * J / mu))) < 1e-10


def test_dispersion_scalar_symbol_disordered():
    # with J = 0 the symbol reduces to 1 - c0 - mu c1^2 / (1 - mu c2)
    rng = np.random.default_rng(3)
    for _ in range(25):
        mu = rng.uniform(0.5, 1.95)
        z = complex(rng.uniform(-0.05, 2.0), rng.uniform(-50.0, 50.0))
        k = rng.normal(size=2) * 7.0
        coeff = dispersion_coefficients(z, k, mu)
        c0, c1, c2 = axis_coefficients(z, float(np.linalg.norm(k)), 2)
        href = 1.0 - c0 - mu * c1 * c1 / (1.0 - mu * c2)
        assert abs(coeff.h - href) < 1e-10


def test_dispersion_k_zero():
    mu = 1.0
    z = 0.5 + 1.0j
    coeff = dispersion_coefficients(z, np.zeros(2), mu)
    assert abs(coeff.a - 1.0 / (1.0 + z)) < 1e-12
    assert np.max(np.abs(coeff.A - 0.5 / (1.0 + z) * np.eye(2))) < 1e-12


def test_dispersion_large_real_part():
    z = 1000.0
    coeff = dispersion_coefficients(z, np.array([10.0, 0.0]), 1.0)
    bound = 1.0 / (1.0 + z)
    assert abs(coeff.a) <= bound
    assert np.linalg.norm(coeff.b) <= bound
    assert np.linalg.norm(coeff.A, 2) <= bound * (1.0 + 1e-12)
    assert abs(coeff.h - 1.0) < 2e-3


def test_dispersion_singular_operator():
    # at k = 0 the operator Id - mu A degenerates along z = mu/2 - 1
    with pytest.raises(SingularOperatorError) as info:
        dispersion_coefficients(-0.5, np.zeros(2), 1.0)
    assert info.value.sigma_min <= 1e-12


def test_dispersion_d3_grid_path():
    # grid quadrature (d = 3) against the axis reduction at an axis-aligned k
    mu = 1.2
    z = 0.3 + 4.0j
    kmag = 6.0
    coeff = dispersion_coefficients(z, np.array([0.0, 0.0, kmag]), mu)
    c0, c1, c2 = axis_coefficients(z, kmag, 3)
    assert abs(coeff.a - c0) < 1e-11
    assert abs(coeff.b[2] - c1) < 1e-11
    assert abs(coeff.A[2, 2] - c2) < 1e-11
    href = 1.0 - c0 - mu * c1 * c1 / (1.0 - mu * c2)
    assert abs(coeff.h - href) < 1e-10


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_lattice_wavenumbers():
    ks = lattice_wavenumbers(10.0, 30.0)
    mags = np.linalg.norm(ks, axis=1)
    assert np.all(mags > 0) and np.all(mags <= 30.0 + 1e-9)
    scaled = ks / 10.0
    assert np.max(np.abs(scaled - np.round(scaled))) < 1e-12
    # half lattice keeps exactly one of each +-k pair
    seen = {tuple(np.round(k, 9)) for k in ks}
    assert not any(tuple(np.round(-k, 9)) in seen for k in ks)
    full = lattice_wavenumbers(10.0, 30.0, half=False)
    assert full.shape[0] == 2 * ks.shape[0]


def test_default_z_grid():
    zs = default_z_grid(delta=0.05)
    assert np.min(zs.real) >= -0.05 - 1e-12
    assert np.max(zs.real) <= 2.0 + 1e-12
    assert np.max(np.abs(zs.imag)) <= 50.0 + 1e-12


def test_invertibility_sweep_disordered():
    zs = default_z_grid(delta=0.05, im_max=10.0)
    ks = lattice_wavenumbers(10.0, 20.0)
    report = invertibility_sweep(1.0, np.zeros(2), zs, ks)
    assert report.invertible
    assert report.min_singular > 0.5
    assert report.n_points == zs.size * ks.shape[0]
    assert not report.singular_points


def test_invertibility_trivial_at_large_real_part():
    report = invertibility_sweep(1.0, np.zeros(2), [1000.0 + 3.0j],
                                 np.array([[10.0, 0.0]]))
    assert report.min_singular > 1.0 - 2.0 / 1001.0


def test_invertibility_refinement_stability():
    ks = lattice_wavenumbers(10.0, 20.0)
    coarse = invertibility_sweep(1.0, np.zeros(2),
                                 default_z_grid(im_max=10.0, step=0.25), ks)
    fine = invertibility_sweep(1.0, np.zeros(2),
                               default_z_grid(im_max=10.0, step=0.125), ks)
    assert abs(fine.min_singular - coarse.min_singular) <= 0.05 * coarse.min_singular


def test_dispersion_sweep_structure():
    sweep = dispersion_sweep(1.0, 10.0, z_values=default_z_grid(im_max=5.0),
                             k_max=10.0)
    assert sweep.re_h.shape == (sweep.k_vectors.shape[0], sweep.z_values.size)
    assert sweep.min_re_h == sweep.re_h.min()
    assert sweep.min_sigma == sweep.sigma_min.min()
    assert sweep.min_re_h > 0.2


# ---------------------------------------------------------------------------
# resolvent solve
# ---------------------------------------------------------------------------

def _dense_resolvent_oracle(z, k, mu, J, f0, grid):
    """Solve the mode problem as one dense linear system in the nodal values:
    (1 + z + i k.w) f = rho_f M + mu J_f . grad M + f0."""
    n = grid.n
    den = 1.0 + z + 1j * (grid.nodes @ k)
    M = von_mises(J, grid)
    G = von_mises_gradient(J, grid)
    K = np.outer(M, grid.weights).astype(complex)
    for i in range(grid.nodes.shape[1]):
        K += mu * np.outer(G[i], grid.weights * grid.nodes[:, i])
    A_full = np.diag(den) - K
    f = np.linalg.solve(A_full, f0)
    rho = complex(grid.weights @ f)
    Jf = (grid.weights * f) @ grid.nodes
    return f, rho, Jf


def test_fl_solve_zero_data():
    grid = build_sphere_grid(2, 128)
    sol = fl_solve(0.3 + 1.0j, np.array([10.0, 0.0]), 1.5, None,
                   np.zeros(grid.n, dtype=complex), grid)
    assert sol.rho_tilde == 0.0
    assert np.all(sol.J_tilde == 0.0)
    assert np.max(np.abs(sol.f_tilde)) == 0.0


def test_fl_solve_residual_and_oracle():
    rng = np.random.default_rng(7)
    mu = 2.5
    L = solve_L(mu, 2)
    J = np.array([L, 0.0])
    grid = build_sphere_grid(2, 256)
    theta = grid.angles
    # band-limited random datum
    f0 = np.zeros(grid.n, dtype=complex)
    for m in range(-6, 7):
        f0 += rng.normal() * np.exp(1j * m * theta) + 1j * rng.normal() * np.cos(m * theta)
    for z, k in [(0.2 + 3.0j, np.array([10.0, 0.0])),
                 (0.1 - 1.5j, np.array([7.0, 7.0]))]:
        sol = fl_solve(z, k, mu, J, f0, grid)
        assert sol.residual < 1e-10
        _, rho_ref, J_ref = _dense_resolvent_oracle(z, k, mu, J, f0, grid)
        assert abs(sol.rho_tilde - rho_ref) < 1e-9 * max(1.0, abs(rho_ref))
        assert np.max(np.abs(sol.J_tilde - J_ref)) < 1e-9


def test_fl_solve_linearity():
    mu = 1.5
    grid = build_sphere_grid(2, 128)
    rng = np.random.default_rng(11)
    g1 = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    g2 = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    z, k = 0.4 + 5.0j, np.array([10.0, -10.0])
    s1 = fl_solve(z, k, mu, None, g1, grid)
    s2 = fl_solve(z, k, mu, None, g2, grid)
    s12 = fl_solve(z, k, mu, None, 2.0 * g1 - 0.7j * g2, grid)
    assert abs(s12.rho_tilde - (2.0 * s1.rho_tilde - 0.7j * s2.rho_tilde)) < 1e-12 \
        * max(1.0, abs(s12.rho_tilde))
    assert np.max(np.abs(s12.f_tilde - (2.0 * s1.f_tilde - 0.7j * s2.f_tilde))) < 1e-12


def test_fl_solve_at_conserved_mode():
    # z = 0, k = 0 is the mass pole: the symbol vanishes there
    grid = build_sphere_grid(2, 64)
    with pytest.raises(SingularSymbolError):
        fl_solve(0.0, np.zeros(2), 1.0, None, np.ones(grid.n, dtype=complex), grid)


# ---------------------------------------------------------------------------
# spectral abscissa
# ---------------------------------------------------------------------------

def test_spectral_abscissa_disordered():
    assert abs(spectral_abscissa(1.5, 10.0, 2, k_max=20.0) - 0.25) < 1e-12
    assert abs(spectral_abscissa(1.0, 10.0, 2, k_max=20.0) - 0.5) < 1e-12


def test_spectral_abscissa_ordered():
    rate = spectral_abscissa(2.2, 10.0, 2, k_max=20.0)
    assert abs(rate - (-lambda_J(2.2, 2))) < 1e-9


def test_abscissa_candidates_structure():
    out = abscissa_candidates(1.5, 10.0, 2, k_max=10.0)
    assert out["k0_rates"] == [-1.0, -0.25]
    assert out["rate"] == -max(out["candidates"])
    for r in out["symbol_roots"]:
        assert r.real >= -out["delta"] - 1e-9
