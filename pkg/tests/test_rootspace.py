import numpy as np
import pytest

from bvpcomplete.errors import ApplicabilityError
from bvpcomplete.model import (
    BlockStructure,
    BoundaryPair,
    ConstantPotential,
    SystemProblem,
    ZeroPotential,
)
from bvpcomplete.numcore import mat_exp
from bvpcomplete.presets import get_preset
from bvpcomplete.rootspace import (
    adjoint_chains,
    adjoint_problem,
    build_chains,
    chain_functions,
    completeness_residuals,
    criteria_2x2,
    default_probes,
    degenerate_family,
    grid_inner,
    grid_norm,
    minimality_metric,
    simpson_weights,
    witness_T_minus,
    witness_dirac_degenerate,
)
from bvpcomplete.spectrum import CharFunction, find_eigenvalues

GRID_POINTS = 2001


def uniform_grid():
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    return grid, simpson_weights(GRID_POINTS, grid[1] - grid[0])


def dirac_blocks():
    return BlockStructure([1, 1], [-1.0, 1.0])


@pytest.fixture(scope="module")
def periodic_data():
    prob = get_preset("dirac-periodic")
    rep = find_eigenvalues(CharFunction(prob), (-20, 20, -2, 2))
    chains = build_chains(prob, rep)
    return prob, rep, chains


@pytest.fixture(scope="module")
def dirichlet_q1_data():
    prob = get_preset("dirac-dirichlet-q1")
    rep = find_eigenvalues(CharFunction(prob), (-10.5, 10.5, -2, 2))
    chains = build_chains(prob, rep)
    return prob, rep, chains


# ---------------------------------------------------------------------------
# chain construction


def test_periodic_chains_structure(periodic_data):
    prob, rep, chains = periodic_data
    assert len(chains) == 14  # two one-element chains per double eigenvalue
    assert all(ch.length == 1 for ch in chains)
    grid, w = uniform_grid()
    for ch in chains:
        k = round(ch.lam.real / (2 * np.pi))
        u = ch.functions[0]
        # the eigenspace is spanned by (e^{-2 pi i k x}, 0) and (0, e^{2 pi i k x});
        # each chain element lies in it: project and compare
        e1 = np.stack([np.exp(-2j * np.pi * k * grid), np.zeros_like(grid)], axis=1)
        e2 = np.stack([np.zeros_like(grid), np.exp(2j * np.pi * k * grid)], axis=1)
        c1 = grid_inner(u, e1, w) / grid_inner(e1, e1, w)
        c2 = grid_inner(u, e2, w) / grid_inner(e2, e2, w)
        recon = c1 * e1 + c2 * e2
        assert grid_norm(u - recon, w) < 1e-7 * grid_norm(u, w)


def test_chain_bc_residual(periodic_data, dirichlet_q1_data):
    for prob, rep, chains in (periodic_data, dirichlet_q1_data):
        for ch in chains:
            for p in range(ch.length):
                u = ch.functions[p]
                res = np.linalg.norm(prob.bc.C @ u[0] + prob.bc.D @ u[-1])
                norm = max(np.abs(u).max(), 1e-300)
                assert res <= 1e-8 * norm


def test_dirichlet_q1_eigenfunctions_match_closed_form(dirichlet_q1_data):
    prob, rep, chains = dirichlet_q1_data
    grid, w = uniform_grid()
    b = np.diag([-1.0, 1.0])
    q = prob.potential.matrix
    for ch in chains[:4]:
        lam = ch.lam
        u = ch.functions[0]
        # closed form: u is proportional to Phi(x) v where v spans ker(C + D Phi(1))
        phi_one = mat_exp(1j * b @ (lam * np.eye(2) - q))
        a = prob.bc.C + prob.bc.D @ phi_one
        _, _, vh = np.linalg.svd(a)
        v = vh[-1].conj()
        ref = np.stack(
            [mat_exp(1j * x * b @ (lam * np.eye(2) - q)) @ v for x in grid]
        )
        c = grid_inner(u, ref, w) / grid_inner(ref, ref, w)
        assert grid_norm(u - c * ref, w) < 1e-6 * grid_norm(u, w)


def test_jordan_chain_for_rank_one_coupling():
    # periodic rows perturbed by a nilpotent coupling: same double zeros of
    # the characteristic function but one-dimensional kernel, so a genuine
    # two-element chain must come out
    eps = 0.7
    d = -np.array([[1.0, 0.0], [eps, 1.0]], dtype=complex)
    prob = SystemProblem(dirac_blocks(), ZeroPotential(2), BoundaryPair(np.eye(2), d))
    rep = find_eigenvalues(CharFunction(prob), (-7, 7, -1, 1))
    assert all(ev.multiplicity == 2 for ev in rep.eigenvalues)
    chains = build_chains(prob, rep)
    by_lam = {}
    for ch in chains:
        by_lam.setdefault(round(ch.lam.real, 6), []).append(ch)
    for lam_key, group in by_lam.items():
        assert sum(ch.length for ch in group) == 2
        longest = max(ch.length for ch in group)
        assert longest == 2  # eigenfunction + one associated function
    grid, w = uniform_grid()
    ch = next(c for c in chains if c.length == 2)
    lam = ch.lam
    u0, u1 = ch.functions
    # chain relation (L - lam) u1 = u0 via the derivative of the grid data
    du1 = np.gradient(u1, grid, axis=0, edge_order=2)
    weight = np.diag([-1.0, 1.0])  # diag(1/b) for weights (-1, 1)
    lhs = (-1j) * (du1 @ weight.T) - lam * u1
    interior = slice(5, -5)
    err = np.abs(lhs[interior] - u0[interior]).max()
    assert err < 1e-4 * max(np.abs(u0).max(), 1.0)


def test_eigenfunction_ode_residual(dirichlet_q1_data):
    prob, rep, chains = dirichlet_q1_data
    grid, w = uniform_grid()
    weight = np.diag([-1.0, 1.0])  # diag(1/b_j)
    q = prob.potential.matrix
    for ch in chains[:3]:
        u = ch.functions[0]
        du = _high_order_derivative(u, grid)
        resid = (-1j) * (du @ weight.T) + u @ q.T - ch.lam * u
        interior = slice(8, -8)
        rel = np.abs(resid[interior]).max() / max(np.abs(u).max(), 1e-300)
        assert rel < 1e-7


def _high_order_derivative(u, grid):
    """Sixth-order central differences in the interior, one-sided at ends."""
    h = grid[1] - grid[0]
    du = np.zeros_like(u)
    c = np.array([-1, 9, -45, 0, 45, -9, 1]) / (60 * h)
    for k, ck in zip(range(-3, 4), c):
        du[3:-3] += ck * u[3 + k : u.shape[0] - 3 + k]
    du[:3] = (u[1:4] - u[0:3]) / h
    du[-3:] = (u[-3:] - u[-4:-1]) / h
    return du


def test_chain_count_matches_multiplicity(periodic_data):
    _, rep, chains = periodic_data
    for ev in rep.eigenvalues:
        total = sum(ch.length for ch in chains if abs(ch.lam - ev.lam) < 1e-9)
        assert total == ev.multiplicity


# ---------------------------------------------------------------------------
# adjoint chains, biorthogonality, minimality


def test_adjoint_chains_selfadjoint_case(periodic_data):
    prob, rep, chains = periodic_data
    adj, adj_rep, dual = adjoint_chains(prob, rep)
    grid, w = uniform_grid()
    # the periodic problem is selfadjoint: the adjoint chains span the same
    # per-eigenvalue subspaces
    for ev in rep.eigenvalues:
        prim = [f for ch in chains if abs(ch.lam - ev.lam) < 1e-8 for f in ch.functions]
        du = [f for ch in dual if abs(ch.lam - ev.lam.conjugate()) < 1e-8 for f in ch.functions]
        assert len(prim) == len(du)
        basis = np.stack([p.ravel() for p in prim], axis=1)
        qmat, _ = np.linalg.qr(basis)
        for v in du:
            vec = v.ravel()
            proj = qmat @ (qmat.conj().T @ vec)
            assert np.linalg.norm(vec - proj) < 1e-6 * np.linalg.norm(vec)


def test_biorthogonality_across_eigenvalues(dirichlet_q1_data):
    prob, rep, chains = dirichlet_q1_data
    adj, adj_rep, dual = adjoint_chains(prob, rep)
    gram = minimality_metric(chains, dual)
    for entry in gram:
        assert entry["cross_gram_max"] < 1e-7
        assert entry["sigma_min"] > 1e-6


def test_minimality_periodic_identity_gram(periodic_data):
    prob, rep, chains = periodic_data
    adj, adj_rep, dual = adjoint_chains(prob, rep)
    gram = minimality_metric(chains, dual)
    for entry in gram:
        assert entry["dimension"] == 2
        assert entry["sigma_min"] > 0.5  # orthogonal eigenfunctions
        assert entry["condition"] < 2.0


def test_minimality_flags_duplicate():
    # a fabricated duplicate chain drives the smallest singular value to zero
    prob = get_preset("dirac-periodic")
    rep = find_eigenvalues(CharFunction(prob), (-1, 1, -1, 1))
    chains = build_chains(prob, rep)
    dup = chains + [chains[0]]
    dual = chains + [chains[1]]
    with pytest.raises(Exception):
        # dimensions no longer match between primary and dual clusters
        minimality_metric(dup, chains)


# ---------------------------------------------------------------------------
# completeness residuals


def test_probe_inside_span_reaches_zero(periodic_data):
    prob, rep, chains = periodic_data
    fns = chain_functions(chains)
    probe = fns[2][1]
    table = completeness_residuals(fns, {"self": probe}, [1, 2, 3, 4, 14])
    assert table["residuals"]["self"][-1] < 1e-10


def test_periodic_polynomial_probe_decay(periodic_data):
    prob, rep, chains = periodic_data
    fns = chain_functions(chains)
    grid, _ = uniform_grid()
    probes = default_probes(2, grid)
    table = completeness_residuals(fns, probes, [2, 6, 10, 14])
    poly = table["residuals"]["poly"]
    assert all(b <= a + 1e-12 for a, b in zip(poly, poly[1:]))
    assert poly[-1] < 0.05  # 14 functions already reach the target band


def test_residual_monotone_under_nested_spans(dirichlet_q1_data):
    prob, rep, chains = dirichlet_q1_data
    fns = chain_functions(chains)
    grid, _ = uniform_grid()
    probes = default_probes(2, grid)
    table = completeness_residuals(fns, probes, [1, 2, 3, 4, 5, 6])
    for key in probes:
        r = table["residuals"][key]
        assert all(b <= a + 1e-12 for a, b in zip(r, r[1:]))


def test_incomplete_case_witness_residual_stays_high():
    prob = get_preset("tminus-degenerate")
    wit = witness_T_minus(prob)
    rep = find_eigenvalues(CharFunction(prob), (-40, 40, -1, 1))
    chains = build_chains(prob, rep)
    fns = chain_functions(chains)
    table = completeness_residuals(fns, {"wit": wit.function}, [4, 8, len(fns)])
    assert all(r > 0.9 for r in table["residuals"]["wit"])


# ---------------------------------------------------------------------------
# witnesses


def test_witness_t_minus_orthogonal_to_constrained_solutions():
    prob = get_preset("tminus-degenerate")
    wit = witness_T_minus(prob)
    grid, w = uniform_grid()
    # all solutions of the free equation satisfying the degenerate row
    rng = np.random.default_rng(12)
    for _ in range(50):
        lam = (rng.random() * 100 - 50) + 1j * (rng.random() * 4 - 2)
        y = np.stack(
            [np.exp(-1j * lam * grid), np.exp(-1j * lam) * np.exp(1j * lam * grid)],
            axis=1,
        )
        ip = abs(grid_inner(y, wit.function, w))
        ip /= grid_norm(y, w) * grid_norm(wit.function, w)
        assert ip < 1e-8


def test_witness_t_minus_support_pattern():
    prob = get_preset("tminus-degenerate")
    wit = witness_T_minus(prob)
    grid = wit.grid
    alpha = wit.detail["alpha"]
    f1, f2 = wit.function[:, 0], wit.function[:, 1]
    # weight -1 component anchored at x = 1, weight +1 component at x = 0
    assert np.abs(f1[grid < 1 - alpha - 1e-9]).max() == 0.0
    assert np.abs(f2[grid > alpha + 1e-9]).max() == 0.0
    assert np.abs(f1).max() > 0 and np.abs(f2).max() > 0


def test_witness_t_minus_orthogonal_to_chains():
    prob = get_preset("tminus-degenerate")
    wit = witness_T_minus(prob)
    rep = find_eigenvalues(CharFunction(prob), (-40, 40, -1, 1))
    chains = build_chains(prob, rep)
    grid, w = uniform_grid()
    for ch in chains:
        for u in ch.functions:
            ip = abs(grid_inner(u, wit.function, w))
            ip /= grid_norm(u, w) * grid_norm(wit.function, w)
            assert ip < 1e-8


def test_witness_t_minus_requires_singular_t_minus():
    with pytest.raises(ApplicabilityError):
        witness_T_minus(get_preset("dirac-periodic"))


def test_witness_t_minus_requires_zero_potential():
    with pytest.raises(ApplicabilityError):
        witness_T_minus(get_preset("dirac-dirichlet-q1"))


def test_mirror_witness_zero_potential():
    prob = get_preset("prop512-mirror")
    wit = witness_dirac_degenerate(prob)
    assert wit.detail["self_consistency"] < 1e-12
    grid, w = uniform_grid()
    fam = degenerate_family(prob, [2 * np.pi * k for k in range(-10, 11)])
    assert fam
    for _, u in fam:
        ip = abs(grid_inner(u, wit.function, w))
        ip /= grid_norm(u, w) * grid_norm(wit.function, w)
        assert ip < 1e-7


def test_mirror_witness_with_mirror_coupled_potential():
    prob = get_preset("prop512-mirror-q")
    wit = witness_dirac_degenerate(prob)
    assert wit.detail["eps"] <= 0.25
    cf = CharFunction(prob)
    from bvpcomplete.spectrum import detect_degenerate

    deg = detect_degenerate(cf)
    grid, w = uniform_grid()
    if deg.degenerate:
        functions = [u for _, u in degenerate_family(prob, [2 * np.pi * k for k in range(-8, 9)])]
    else:
        rep = find_eigenvalues(cf, (-25, 25, -3, 3))
        chains = build_chains(prob, rep)
        functions = [f for _, f in chain_functions(chains)]
    assert functions
    for u in functions:
        ip = abs(grid_inner(u, wit.function, w))
        ip /= grid_norm(u, w) * grid_norm(wit.function, w)
        assert ip < 1e-7


def test_mirror_witness_rejects_endpoint_support():
    # constant off-diagonal coupling: the mirror combination stays away
    # from zero near the endpoints even though the minor pattern matches
    prob = SystemProblem(
        dirac_blocks(),
        ConstantPotential([[0, 1.0], [0.5, 0]]),
        BoundaryPair(np.eye(2), np.array([[0, 1.0], [1.0, 0]])),
    )
    with pytest.raises(ApplicabilityError):
        witness_dirac_degenerate(prob)


# ---------------------------------------------------------------------------
# named criteria


def test_criteria_dirichlet_with_coupling_predicts_complete():
    crit = criteria_2x2(get_preset("dirac-dirichlet-q1"))
    assert crit["verdict"] == "predicted-complete (endpoint-coupling)"
    entry = crit["criteria"]["endpoint-coupling"]
    assert entry["holds"]
    assert entry["first"] == pytest.approx(1.0)
    assert entry["second"] == pytest.approx(1.0)


def test_criteria_dirichlet_zero_potential_incomplete():
    crit = criteria_2x2(get_preset("dirac-dirichlet"))
    assert crit["verdict"].startswith("certified-incomplete")
    assert crit["criteria"]["degenerate-determinant"]["holds"]


def test_criteria_nonreal_two_point():
    crit = criteria_2x2(get_preset("th71-nonreal"))
    assert crit["verdict"] == "predicted-complete (nonreal-two-point)"
    assert crit["adjoint_verdict"] == "certified-incomplete (volterra-row in adjoint)"
    entry = crit["criteria"]["nonreal-two-point"]
    assert entry["holds"]
    assert entry["h0"] == pytest.approx(1.0)
    assert entry["h1"] == pytest.approx(1.0)


def test_criteria_adjoint_consistency_endpoint_coupling():
    # when the endpoint-coupling criterion passes, it also passes for the
    # constructed adjoint problem
    prob = get_preset("dirac-dirichlet-q1")
    crit = criteria_2x2(prob)
    assert crit["verdict"].startswith("predicted-complete")
    adj = adjoint_problem(prob)
    crit_adj = criteria_2x2(adj)
    assert crit_adj["verdict"].startswith("predicted-complete")


def test_criteria_regular_pair():
    crit = criteria_2x2(get_preset("dirac-periodic"))
    assert crit["verdict"] == "predicted-complete (regular-selection)"


def test_criteria_tminus():
    crit = criteria_2x2(get_preset("tminus-degenerate"))
    assert crit["verdict"] == "certified-incomplete (t-minus-defect)"
    assert crit["criteria"]["t-minus-defect"]["holds"]
