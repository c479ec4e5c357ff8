import numpy as np
import pytest

from bvpcomplete.errors import ApplicabilityError
from bvpcomplete.evolve import (
    check_asymptotics,
    fundamental_many,
    gauge_transform,
    integrate_fundamental,
)
from bvpcomplete.model import (
    BlockStructure,
    BoundaryPair,
    ConstantPotential,
    GridPotential,
    PolynomialPotential,
    SystemProblem,
    ZeroPotential,
)
from bvpcomplete.numcore import det, mat_exp
from bvpcomplete.regularity import selection_matrix


def dirac_blocks():
    return BlockStructure([1, 1], [-1.0, 1.0])


def periodic_bc():
    return BoundaryPair(np.eye(2), -np.eye(2))


def free_problem(potential):
    return SystemProblem(dirac_blocks(), potential, periodic_bc())


# ---------------------------------------------------------------------------
# fundamental matrix against closed forms


def test_zero_potential_diagonal_exponentials():
    prob = free_problem(ZeroPotential(2))
    for lam in (2.0 + 0.5j, -7.3, 11.0 - 1.0j):
        sol = integrate_fundamental(prob, lam)
        ref = np.diag([np.exp(-1j * lam), np.exp(1j * lam)])
        assert np.abs(sol.at_one() - ref).max() < 1e-9


def test_zero_potential_three_blocks():
    blocks = BlockStructure([1, 2], [1j, 2.0])
    prob = SystemProblem(blocks, ZeroPotential(3), BoundaryPair(np.eye(3), -np.eye(3)))
    lam = 1.3 - 0.2j
    sol = integrate_fundamental(prob, lam)
    b = blocks.coordinate_weights()
    ref = np.diag(np.exp(1j * b * lam))
    assert np.abs(sol.at_one() - ref).max() < 1e-9


def test_constant_potential_matches_mat_exp():
    q = np.array([[0.2, 1.0], [0.7, -0.1]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    b = np.diag([-1.0, 1.0])
    for lam in (0.0, 3.0 + 1.0j, -6.0):
        sol = integrate_fundamental(prob, lam)
        ref = mat_exp(1j * b @ (lam * np.eye(2) - q))
        assert np.abs(sol.at_one() - ref).max() < 1e-9


def test_polynomial_potential_matches_reference():
    # linear-in-x coupling; compare against a tightly resolved grid sampling
    pot = PolynomialPotential(
        [[[0.0], [0.5, 1.0]], [[0.3, -0.5], [0.0]]]
    )
    xs = np.linspace(0, 1, 4097)
    vals = np.stack([pot(x) for x in xs])
    prob_poly = free_problem(pot)
    prob_grid = free_problem(GridPotential(xs, vals))
    lam = 2.0 + 0.1j
    a = integrate_fundamental(prob_poly, lam).at_one()
    b = integrate_fundamental(prob_grid, lam).at_one()
    assert np.abs(a - b).max() < 1e-6


def test_first_derivative_zero_potential():
    prob = free_problem(ZeroPotential(2))
    lam = 1.7 - 0.3j
    sol = integrate_fundamental(prob, lam, order=1)
    b = np.array([-1.0, 1.0])
    ref = np.diag(1j * b * np.exp(1j * b * lam))
    assert np.abs(sol.at_one(1) - ref).max() < 1e-8


def test_initial_values_exact():
    prob = free_problem(ConstantPotential([[0, 1.0], [1.0, 0]]))
    sol = integrate_fundamental(prob, 2.0, order=2, grid=np.linspace(0, 1, 5))
    assert np.array_equal(sol.values[0, 0], np.eye(2))
    assert np.array_equal(sol.values[1, 0], np.zeros((2, 2)))
    assert np.array_equal(sol.values[2, 0], np.zeros((2, 2)))


def test_derivative_matches_finite_differences_with_order():
    q = np.array([[0, 0.7], [0.7, 0]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    lam = 1.0 + 0.5j
    d_exact = integrate_fundamental(prob, lam, order=1, rtol=1e-12).at_one(1)
    errs = []
    for h in (1e-3, 1e-4):
        plus = integrate_fundamental(prob, lam + h, rtol=1e-12).at_one()
        minus = integrate_fundamental(prob, lam - h, rtol=1e-12).at_one()
        fd = (plus - minus) / (2 * h)
        errs.append(np.abs(fd - d_exact).max())
    order = np.log10(errs[0] / errs[1])
    assert order >= 1.8


def test_semigroup_restart_consistency():
    # one-pass value at x = 1 versus a fresh integration restarted from the
    # midpoint state (run through the independent generic stepper)
    from bvpcomplete._dopri import dopri_integrate

    q = np.array([[0, 1.0], [0.5, 0]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    lam = 4.0 - 0.5j
    full = integrate_fundamental(prob, lam, grid=np.array([0.0, 0.5, 1.0]))
    phi_half = full.values[0, 1]
    phi_one = full.values[0, 2]
    b = np.diag([-1.0, 1.0])

    def rhs(x, y):
        return 1j * b @ ((lam * np.eye(2) - q) @ y)

    restarted = dopri_integrate(rhs, phi_half, np.array([0.5, 1.0]), rtol=1e-12)[-1]
    assert np.abs(restarted - phi_one).max() < 1e-9


def test_liouville_trace_identity():
    q = np.array([[0.3, 1.0], [0.2, -0.4]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    lam = 2.5 + 0.3j
    grid = np.linspace(0, 1, 9)
    sol = integrate_fundamental(prob, lam, grid=grid)
    b = np.diag([-1.0, 1.0])
    for g, x in enumerate(grid):
        lhs = det(sol.values[0, g])
        rhs = np.exp(np.trace(1j * b @ (lam * np.eye(2) - q)) * x)
        assert abs(lhs - rhs) < 1e-8 * abs(rhs)


def test_determinant_never_vanishes_on_grid():
    prob = free_problem(ConstantPotential([[0, 2.0], [2.0, 0]]))
    sol = integrate_fundamental(prob, 5.0 + 1.0j, grid=np.linspace(0, 1, 33))
    for g in range(33):
        assert abs(det(sol.values[0, g])) > 1e-6


def test_batched_matches_single():
    q = np.array([[0, 1.0], [1.0, 0]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    lams = [1.0, 2.0 + 1.0j, -3.0]
    batch = fundamental_many(prob, lams)
    for i, lam in enumerate(lams):
        single = integrate_fundamental(prob, lam)
        assert np.abs(batch[i, 0, -1] - single.at_one()).max() < 1e-10


# ---------------------------------------------------------------------------
# gauge transform


def test_gauge_identity_for_offdiagonal_potential():
    q = ConstantPotential([[0, 1.0], [1.0, 0]])
    prob = free_problem(q)
    gt = gauge_transform(prob, grid_points=65)
    assert np.abs(gt.w_values - np.eye(2)).max() < 1e-12
    for g in range(gt.grid.size):
        assert np.allclose(gt.transformed.potential(gt.grid[g]), q.matrix, atol=1e-12)


def test_gauge_scalar_closed_form():
    c = 0.8
    prob = free_problem(ConstantPotential([[c, 0], [0, c]]))
    gt = gauge_transform(prob, grid_points=129)
    x = gt.grid
    expected = np.stack(
        [np.stack([np.exp(1j * c * x), np.zeros_like(x)], axis=1),
         np.stack([np.zeros_like(x), np.exp(-1j * c * x)], axis=1)],
        axis=1,
    )
    assert np.abs(gt.w_values - expected).max() < 1e-10
    # the transformed potential is exactly zero here (Q = Q_1)
    assert np.abs(gt.transformed.potential(0.5)).max() < 1e-10


def test_gauge_commutes_with_weight_matrix():
    blocks = BlockStructure([2, 1], [-1.0, 2.0])
    q = np.zeros((3, 3), dtype=complex)
    q[:2, :2] = [[0.5, 0.2], [0.1, -0.3]]
    q[2, 2] = 1.0
    q[0, 2] = 0.7  # off-diagonal block
    prob = SystemProblem(blocks, ConstantPotential(q), BoundaryPair(np.eye(3), -np.eye(3)))
    gt = gauge_transform(prob, grid_points=65)
    b_mat = blocks.weight_matrix()
    for g in range(gt.grid.size):
        w = gt.w_values[g]
        assert np.abs(w @ b_mat - b_mat @ w).max() < 1e-12
    # transformed potential has zero block diagonal
    for x in (0.0, 0.3, 1.0):
        qt = gt.transformed.potential(x)
        assert np.abs(qt[:2, :2]).max() < 1e-10
        assert abs(qt[2, 2]) < 1e-10


def test_gauge_boundary_pair_uses_w_one():
    q = np.array([[1.0, 0.3], [0.3, 1.0]], dtype=complex)
    prob = free_problem(ConstantPotential(q))
    gt = gauge_transform(prob)
    expected_w1 = np.diag([np.exp(1j), np.exp(-1j)])
    assert np.abs(gt.w_one - expected_w1).max() < 1e-10
    assert np.allclose(gt.transformed.bc.C, prob.bc.C)
    assert np.allclose(gt.transformed.bc.D, prob.bc.D @ gt.w_one)


# ---------------------------------------------------------------------------
# ray behaviour checker


def test_asymptotics_zero_potential_exact():
    prob = free_problem(ZeroPotential(2))
    rep = check_asymptotics(prob, 1.0, [5.0, 10.0])
    for entry in rep.entries:
        for b in entry["blocks"]:
            assert b["diag_deviation"] < 1e-8
            assert b["offdiag_deviation"] < 1e-8


def test_asymptotics_offdiagonal_coupling_shrinks():
    pot = PolynomialPotential([[[0.0], [0.5, 0.4]], [[0.8, -0.3], [0.0]]])
    prob = free_problem(pot)
    rep = check_asymptotics(prob, 1.0, [20.0, 40.0, 80.0])
    devs = []
    for entry in rep.entries:
        assert all(b["reliable"] for b in entry["blocks"])
        devs.append(
            max(max(b["diag_deviation"], b["offdiag_deviation"]) for b in entry["blocks"])
        )
    assert devs[1] < devs[0] and devs[2] < devs[1]
    assert rep.component_trend_decreasing


def test_asymptotics_determinant_ratio():
    prob = free_problem(ZeroPotential(2))
    rep = check_asymptotics(prob, 1.0, [10.0, 20.0, 40.0])
    t_sel = selection_matrix(prob.bc, prob.blocks, 1.0)
    target = det(t_sel.matrix)
    last = rep.entries[-1]
    assert abs(last["det_ratio"] - target) < 0.05 * abs(target)
    assert rep.det_trend_decreasing


def test_asymptotics_requires_zero_blockdiagonal():
    prob = free_problem(ConstantPotential([[1.0, 0], [0, 1.0]]))
    with pytest.raises(ApplicabilityError):
        check_asymptotics(prob, 1.0, [10.0])


def test_asymptotics_rejects_boundary_direction():
    prob = free_problem(ZeroPotential(2))
    with pytest.raises(ApplicabilityError):
        check_asymptotics(prob, 1j, [10.0])  # Re(b z) = 0 for both blocks
