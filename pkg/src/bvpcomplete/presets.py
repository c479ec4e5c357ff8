"""Built-in problem presets.

Each preset is a fully validated problem instance exercising one regime of
the classifier / spectrum / completeness pipelines, from plainly regular
pairs to degenerate ones with explicit incompleteness witnesses.
"""

from __future__ import annotations

import numpy as np

from .model import (
    BlockStructure,
    BoundaryPair,
    ConstantPotential,
    PolynomialPotential,
    SystemProblem,
    ZeroPotential,
)

__all__ = ["PRESETS", "preset_names", "get_preset", "preset_catalog"]


def _cyclic_weights(n: int):
    return [np.exp(2j * np.pi * j / n) for j in range(1, n + 1)]


def _dirac_blocks():
    return BlockStructure([1, 1], [-1.0, 1.0])


def _ex1_diagonal():
    blocks = BlockStructure([1, 1, 1], _cyclic_weights(3))
    d = np.diag([1.5, 2.0, 0.5]).astype(complex)
    bc = BoundaryPair(np.eye(3), -d)
    return SystemProblem(blocks, ZeroPotential(3), bc), (
        "n=3 decoupled rows y_j(0) = d_j y_j(1); regular for every weight set"
    )


def _ex_n3_cyclic():
    blocks = BlockStructure([1, 1, 1], _cyclic_weights(3))
    d = np.array([[0, 2.0, 0.5], [1.5, 0, 3.0], [0.7, 1.1, 0]], dtype=complex)
    bc = BoundaryPair(np.eye(3), d)
    return SystemProblem(blocks, ZeroPotential(3), bc), (
        "n=3 cyclic coupling y_j(0) + sum_k d_jk y_k(1) = 0 (zero diagonal); "
        "selection determinant nonzero on one alternating set of sectors only"
    )


def _ex_n3_star():
    blocks = BlockStructure([1, 1, 1], _cyclic_weights(3))
    c1, c2, c3 = 1.0, 2.0, 1.5
    d1, d2, d3 = 0.5, 1.2, 2.5
    C = np.diag([c1, c2, c3]).astype(complex)
    D = np.array([[d1, d2, d3]] * 3, dtype=complex)
    bc = BoundaryPair(C, D)
    return SystemProblem(blocks, ZeroPotential(3), bc), (
        "n=3 star coupling c_j y_j(0) all equal to one combination of the "
        "y_k(1); nonzero selection determinants on the complementary sectors"
    )


def _ex_split_n3():
    blocks = BlockStructure([1, 1, 1], _cyclic_weights(3))
    C = np.array([[1.0, 2.0, 1.5], [0, 0, 0], [0, 0, 0]], dtype=complex)
    D = np.array([[0, 0, 0], [1.0, 0, 2.0], [0, 1.5, 1.0]], dtype=complex)
    bc = BoundaryPair(C, D)
    return SystemProblem(blocks, ZeroPotential(3), bc), (
        "n=3 separated conditions, one at x=0 and two at x=1: never regular "
        "(odd dimension) yet weakly regular"
    )


def _ex_n3_vandermonde():
    blocks = BlockStructure([1, 1, 1], _cyclic_weights(3))
    d = [0.5, 2.0, -1.0]
    C = np.array([[1.0, 1.0, 1.0], [0, 0, 0], [0, 0, 0]], dtype=complex)
    D = np.array([[0, 0, 0], [1.0, 1.0, 1.0], d], dtype=complex)
    bc = BoundaryPair(C, D)
    return SystemProblem(blocks, ZeroPotential(3), bc), (
        "n=3 separated conditions with Vandermonde-type rows: all alternating "
        "sector determinants are products of distinct-node minors"
    )


def _dirac_periodic():
    bc = BoundaryPair(np.eye(2), -np.eye(2))
    return SystemProblem(_dirac_blocks(), ZeroPotential(2), bc), (
        "periodic 2x2 problem with weights (-1, 1), zero potential; "
        "double eigenvalues at 2 pi k"
    )


def _dirac_dirichlet():
    C = np.array([[1, 0], [0, 0]], dtype=complex)
    D = np.array([[0, 0], [1, 0]], dtype=complex)
    return SystemProblem(_dirac_blocks(), ZeroPotential(2), BoundaryPair(C, D)), (
        "y1(0) = y1(1) = 0 with zero potential: degenerate characteristic "
        "function, incomplete root system"
    )


def _dirac_dirichlet_q1():
    C = np.array([[1, 0], [0, 0]], dtype=complex)
    D = np.array([[0, 0], [1, 0]], dtype=complex)
    q = ConstantPotential([[0, 1.0], [1.0, 0]])
    return SystemProblem(_dirac_blocks(), q, BoundaryPair(C, D)), (
        "y1(0) = y1(1) = 0 with unit off-diagonal coupling: endpoint-coupling "
        "criterion applies, eigenvalues at +-sqrt(1 + pi^2 k^2)"
    )


def _tminus_degenerate():
    C = np.array([[1, -1], [0, -1]], dtype=complex)
    D = np.array([[0, 0], [1, 0]], dtype=complex)
    return SystemProblem(_dirac_blocks(), ZeroPotential(2), BoundaryPair(C, D)), (
        "y1(0) = y2(0), y1(1) = y2(0) with zero potential: T- singular, "
        "simple eigenvalues at 2 pi k, explicit orthogonal witness"
    )


def _prop512_mirror():
    C = np.eye(2, dtype=complex)
    D = np.array([[0, 1.0], [1.0, 0]], dtype=complex)
    return SystemProblem(_dirac_blocks(), ZeroPotential(2), BoundaryPair(C, D)), (
        "y1(0) + y2(1) = 0, y2(0) + y1(1) = 0 with zero potential: degenerate, "
        "mirror-symmetric witness with infinite defect"
    )


def _prop512_mirror_q():
    C = np.eye(2, dtype=complex)
    D = np.array([[0, 1.0], [1.0, 0]], dtype=complex)
    # q12(x) = q21(x) = x(1 - x): the mirror combinations J13 q12(x)
    # - J42 q21(1 - x) vanish identically, so the witness hypotheses hold
    # with any endpoint margin
    coeff = [0.0, 1.0, -1.0]
    pot = PolynomialPotential([[[0.0], coeff], [coeff, [0.0]]])
    return SystemProblem(_dirac_blocks(), pot, BoundaryPair(C, D)), (
        "mirror-coupled polynomial potential q12 = q21 = x(1-x); the mirror "
        "witness construction applies with any endpoint margin"
    )


def _th71_nonreal():
    blocks = BlockStructure([1, 1], [1j, 1.0])
    C = np.array([[1, -1], [0, -1]], dtype=complex)
    D = np.array([[0, 0], [1, 0]], dtype=complex)
    return SystemProblem(blocks, ZeroPotential(2), BoundaryPair(C, D)), (
        "weights (i, 1) with rows y1(0) = y2(0), y1(1) = y2(0): not weakly "
        "regular, complete primary system on the lattice 2 pi i k, "
        "incomplete adjoint (Volterra row)"
    )


_BUILDERS = {
    "ex1-diagonal": _ex1_diagonal,
    "ex-n3-cyclic": _ex_n3_cyclic,
    "ex-n3-star": _ex_n3_star,
    "ex-split-n3": _ex_split_n3,
    "ex-n3-vandermonde": _ex_n3_vandermonde,
    "dirac-periodic": _dirac_periodic,
    "dirac-dirichlet": _dirac_dirichlet,
    "dirac-dirichlet-q1": _dirac_dirichlet_q1,
    "tminus-degenerate": _tminus_degenerate,
    "prop512-mirror": _prop512_mirror,
    "prop512-mirror-q": _prop512_mirror_q,
    "th71-nonreal": _th71_nonreal,
}

PRESETS = tuple(_BUILDERS)


def preset_names():
    return list(PRESETS)


def get_preset(name: str) -> SystemProblem:
    try:
        problem, _ = _BUILDERS[name]()
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(PRESETS)}"
        ) from None
    return problem


def preset_catalog() -> list:
    out = []
    for name, builder in _BUILDERS.items():
        problem, description = builder()
        out.append(
            {
                "name": name,
                "description": description,
                "n": problem.n,
                "weights": [[w.real, w.imag] for w in problem.blocks.weights],
                "potential": problem.potential.variant,
            }
        )
    return out
