import json

import numpy as np
import pytest

from bvpcomplete.errors import DimensionError
from bvpcomplete.model import (
    BlockStructure,
    BoundaryPair,
    ConstantPotential,
    GridPotential,
    PolynomialPotential,
    SystemProblem,
    ZeroPotential,
    eval_potential,
    j_minors,
    minor_of_stacked,
    problem_from_json,
    problem_to_json,
    validate,
)
from bvpcomplete.presets import get_preset, preset_names


def dirac_blocks():
    return BlockStructure([1, 1], [-1.0, 1.0])


# ---------------------------------------------------------------------------
# validation


def test_validate_identity_pair_ok():
    prob = SystemProblem(
        dirac_blocks(), ZeroPotential(2), BoundaryPair(np.eye(2), np.eye(2))
    )
    rep = validate(prob)
    assert rep.ok
    assert rep.zero_block_diagonal


def test_validate_flags_maximality():
    prob = SystemProblem(
        dirac_blocks(), ZeroPotential(2), BoundaryPair(np.zeros((2, 2)), np.zeros((2, 2)))
    )
    rep = validate(prob)
    assert not rep.ok
    assert any("maximality" in issue for issue in rep.issues)


def test_validate_flags_repeated_weights():
    blocks = BlockStructure([1, 1], [1.0, 1.0])
    prob = SystemProblem(blocks, ZeroPotential(2), BoundaryPair(np.eye(2), np.eye(2)))
    rep = validate(prob)
    assert any("distinct" in issue for issue in rep.issues)


def test_validate_blockdiag_flag():
    blocks = dirac_blocks()
    q = ConstantPotential([[1.0, 0.5], [0.5, 1.0]])
    prob = SystemProblem(blocks, q, BoundaryPair(np.eye(2), np.eye(2)))
    assert not validate(prob).zero_block_diagonal
    q_off = ConstantPotential([[0.0, 0.5], [0.5, 0.0]])
    prob2 = SystemProblem(blocks, q_off, BoundaryPair(np.eye(2), np.eye(2)))
    assert validate(prob2).zero_block_diagonal


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        SystemProblem(dirac_blocks(), ZeroPotential(3), BoundaryPair(np.eye(2), np.eye(2)))


# ---------------------------------------------------------------------------
# potentials


def test_zero_potential():
    assert np.allclose(eval_potential(ZeroPotential(2), 0.3), np.zeros((2, 2)))


def test_constant_potential_any_x():
    m = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.allclose(eval_potential(ConstantPotential(m), 0.37), m)


def test_grid_potential_linear_interpolation():
    m = np.array([[1, 2], [3, 4]], dtype=complex)
    pot = GridPotential([0.0, 1.0], [np.zeros((2, 2)), m])
    assert np.allclose(pot(0.5), m / 2)
    assert np.allclose(pot(0.0), 0)
    assert np.allclose(pot(1.0), m)


def test_polynomial_potential():
    pot = PolynomialPotential([[[1.0, 2.0], [0.0]], [[0.0], [3.0, 0.0, 1.0]]])
    x = 0.5
    q = pot(x)
    assert q[0, 0] == pytest.approx(1.0 + 2.0 * x)
    assert q[1, 1] == pytest.approx(3.0 + x**2)


def test_potential_domain_error():
    with pytest.raises(ValueError):
        ZeroPotential(2)(1.5)


def test_grid_potential_requires_full_span():
    with pytest.raises(ValueError):
        GridPotential([0.1, 1.0], np.zeros((2, 2, 2)))


# ---------------------------------------------------------------------------
# column minors


def test_j_minors_separated_rows():
    bc = BoundaryPair(np.array([[1, 0], [0, 0]]), np.array([[0, 0], [1, 0]]))
    jm = j_minors(bc)
    assert jm.j13 == pytest.approx(1.0)
    for val in (jm.j12, jm.j34, jm.j32, jm.j42, jm.j14):
        assert val == pytest.approx(0.0)


def test_j_minors_coupling_pattern():
    a1, a2 = 0.7, -1.3
    bc = BoundaryPair(np.array([[1, 0], [0, 1]]), np.array([[0, a1], [a2, 0]]))
    jm = j_minors(bc)
    assert jm.j13 == pytest.approx(a2)
    assert jm.j42 == pytest.approx(a1)
    assert jm.j14 == pytest.approx(0.0)
    assert jm.j32 == pytest.approx(0.0)


def test_j_minors_periodic():
    # values chosen so that the four-term exponential expansion reproduces
    # 2 - 2 cos(lam) for the periodic pair
    bc = BoundaryPair(np.eye(2), -np.eye(2))
    jm = j_minors(bc)
    assert jm.j12 == pytest.approx(1.0)
    assert jm.j34 == pytest.approx(1.0)
    assert jm.j32 == pytest.approx(-1.0)
    assert jm.j14 == pytest.approx(-1.0)
    assert jm.j13 == pytest.approx(0.0)
    assert jm.j42 == pytest.approx(0.0)


def test_j_minors_requires_n2():
    with pytest.raises(DimensionError):
        j_minors(BoundaryPair(np.eye(3), np.eye(3)))


def test_plucker_relation_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        c = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        d = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        bc = BoundaryPair(c, d)
        jm = j_minors(bc)
        j24 = minor_of_stacked(bc, 2, 4)
        j23 = minor_of_stacked(bc, 2, 3)
        lhs = jm.j12 * jm.j34 - jm.j13 * j24 + jm.j14 * j23
        scale = max(abs(jm.j12 * jm.j34), abs(jm.j13 * j24), abs(jm.j14 * j23), 1.0)
        assert abs(lhs) <= 1e-12 * scale


def test_validate_is_pure():
    prob = get_preset("dirac-periodic")
    rep1 = validate(prob)
    rep2 = validate(prob)
    assert rep1.issues == rep2.issues
    assert rep1.ok and rep2.ok


# ---------------------------------------------------------------------------
# JSON round trip


@pytest.mark.parametrize("name", preset_names())
def test_presets_round_trip_and_validate(name):
    prob = get_preset(name)
    assert validate(prob).ok
    blob = json.dumps(problem_to_json(prob))
    back = problem_from_json(json.loads(blob))
    assert back.blocks.sizes == prob.blocks.sizes
    assert np.allclose(back.blocks.weights, prob.blocks.weights)
    assert np.allclose(back.bc.C, prob.bc.C)
    assert np.allclose(back.bc.D, prob.bc.D)
    xs = np.linspace(0, 1, 7)
    for x in xs:
        assert np.allclose(back.potential(x), prob.potential(x))
    # a second serialization is byte-identical
    assert json.dumps(problem_to_json(back)) == blob


def test_problem_from_json_reports_missing_field():
    with pytest.raises(ValueError, match="missing field"):
        problem_from_json({"blocks": {"sizes": [1], "weights": [[1.0, 0.0]]}})
