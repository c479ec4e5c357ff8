"""Problem data model: block weights, potential, boundary pair.

A problem instance couples a diagonal weight structure (r blocks of sizes
n_j with nonzero pairwise-distinct complex weights b_j), an n x n potential
matrix Q(x) on [0, 1], and a boundary pair (C, D) imposing
``C y(0) + D y(1) = 0``.  The weight matrix acting on derivatives is
``diag(1/b_j)`` blockwise; we store the b_j themselves because every
downstream formula (exponentials e^{i b_j lam x}, column picks by
Re(z b_j), exponential sums) consumes them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .numcore import Tolerance

__all__ = [
    "BlockStructure",
    "ZeroPotential",
    "ConstantPotential",
    "GridPotential",
    "PolynomialPotential",
    "BoundaryPair",
    "SystemProblem",
    "ValidationReport",
    "validate",
    "eval_potential",
    "JMinors",
    "j_minors",
    "problem_to_json",
    "problem_from_json",
]


# --------------------------------------------------------------------------
# block structure


@dataclass(frozen=True)
class BlockStructure:
    """Block sizes n_1..n_r and nonzero, pairwise distinct weights b_1..b_r."""

    sizes: tuple
    weights: tuple

    def __init__(self, sizes: Sequence[int], weights: Sequence[complex]):
        object.__setattr__(self, "sizes", tuple(int(s) for s in sizes))
        object.__setattr__(self, "weights", tuple(complex(w) for w in weights))
        if len(self.sizes) != len(self.weights):
            raise ValueError("sizes and weights must have equal length")
        if not self.sizes:
            raise ValueError("at least one block is required")
        if any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be >= 1")

    @property
    def r(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def coordinate_weights(self) -> np.ndarray:
        """Weight b_j repeated n_j times, one entry per coordinate."""
        return np.repeat(np.asarray(self.weights, dtype=complex), self.sizes)

    def block_of_coordinate(self) -> np.ndarray:
        """Block index of each coordinate."""
        return np.repeat(np.arange(self.r), self.sizes)

    def weight_matrix(self) -> np.ndarray:
        """The diagonal derivative-weight matrix diag(1/b_j) blockwise."""
        return np.diag(1.0 / self.coordinate_weights())

    def conjugate(self) -> "BlockStructure":
        """Block structure of the adjoint problem (conjugated weights)."""
        return BlockStructure(self.sizes, tuple(np.conj(w) for w in self.weights))


# --------------------------------------------------------------------------
# potentials


class _Potential:
    """Common interface: ``dim`` and evaluation at x in [0, 1]."""

    variant = "abstract"

    def __call__(self, x: float) -> np.ndarray:
        raise NotImplementedError

    def block_diagonal_part(self, blocks: BlockStructure, x: float) -> np.ndarray:
        q = self(x)
        out = np.zeros_like(q)
        pos = 0
        for s in blocks.sizes:
            out[pos : pos + s, pos : pos + s] = q[pos : pos + s, pos : pos + s]
            pos += s
        return out


def _check_x(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"potential argument x={x} outside [0, 1]")
    return x


@dataclass(frozen=True)
class ZeroPotential(_Potential):
    dim: int
    variant = "zero"

    def __call__(self, x):
        _check_x(x)
        return np.zeros((self.dim, self.dim), dtype=complex)


class ConstantPotential(_Potential):
    variant = "constant"

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionError("constant potential must be a square matrix")
        if not np.all(np.isfinite(self.matrix.real)) and np.all(np.isfinite(self.matrix.imag)):
            raise ValueError("potential entries must be finite")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, x):
        _check_x(x)
        return self.matrix.copy()


class GridPotential(_Potential):
    """Matrix samples on strictly increasing abscissae spanning [0, 1],
    evaluated by per-entry linear interpolation."""

    variant = "grid"

    def __init__(self, abscissae, values):
        self.abscissae = np.asarray(abscissae, dtype=float)
        self.values = np.asarray(values, dtype=complex)
        if self.abscissae.ndim != 1 or self.abscissae.size < 2:
            raise ValueError("grid potential needs at least two abscissae")
        if self.abscissae[0] != 0.0 or self.abscissae[-1] != 1.0:
            raise ValueError("grid abscissae must start at 0 and end at 1")
        if np.any(np.diff(self.abscissae) <= 0):
            raise ValueError("grid abscissae must be strictly increasing")
        if self.values.ndim != 3 or self.values.shape[0] != self.abscissae.size:
            raise DimensionError("values must have shape (len(abscissae), n, n)")
        if self.values.shape[1] != self.values.shape[2]:
            raise DimensionError("grid potential values must be square matrices")
        if not np.all(np.isfinite(self.values.real)) and np.all(np.isfinite(self.values.imag)):
            raise ValueError("potential entries must be finite")

    @property
    def dim(self):
        return self.values.shape[1]

    def __call__(self, x):
        x = _check_x(x)
        idx = np.searchsorted(self.abscissae, x, side="right") - 1
        idx = min(max(idx, 0), self.abscissae.size - 2)
        x0, x1 = self.abscissae[idx], self.abscissae[idx + 1]
        w = (x - x0) / (x1 - x0)
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]


class PolynomialPotential(_Potential):
    """Per-entry polynomials in x, given as ascending coefficient lists."""

    variant = "poly"

    def __init__(self, coefficients):
        self.coefficients = [
            [list(map(complex, c)) for c in row] for row in coefficients
        ]
        n = len(self.coefficients)
        if any(len(row) != n for row in self.coefficients):
            raise DimensionError("coefficient table must be square")
        self._n = n

    @property
    def dim(self):
        return self._n

    def __call__(self, x):
        x = _check_x(x)
        out = np.zeros((self._n, self._n), dtype=complex)
        for i in range(self._n):
            for j in range(self._n):
                acc = 0.0 + 0.0j
                for c in reversed(self.coefficients[i][j]):
                    acc = acc * x + c
                out[i, j] = acc
        return out


def eval_potential(spec: _Potential, x: float) -> np.ndarray:
    """Evaluate a potential spec at x in [0, 1]."""
    return spec(x)


# --------------------------------------------------------------------------
# boundary pair and full problem


class BoundaryPair:
    """The matrices (C, D) of the two-point condition C y(0) + D y(1) = 0."""

    def __init__(self, C, D):
        self.C = np.asarray(C, dtype=complex)
        self.D = np.asarray(D, dtype=complex)
        for name, m in (("C", self.C), ("D", self.D)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionError(f"{name} must be square, got {m.shape}")
            if not np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag)):
                raise ValueError(f"{name} entries must be finite")
        if self.C.shape != self.D.shape:
            raise DimensionError("C and D must have identical shape")

    @property
    def n(self):
        return self.C.shape[0]

    def stacked(self) -> np.ndarray:
        """The n x 2n array (C D)."""
        return np.hstack([self.C, self.D])

    def rank(self, tol: Tolerance = Tolerance()) -> int:
        s = np.linalg.svd(self.stacked(), compute_uv=False)
        return int(np.sum(s > tol.rel * s[0] + tol.abs))

    def is_maximal(self, tol: Tolerance = Tolerance()) -> bool:
        return self.rank(tol) == self.n


@dataclass(frozen=True)
class SystemProblem:
    """A full two-point problem instance: blocks, potential and BC pair."""

    blocks: BlockStructure
    potential: _Potential
    bc: BoundaryPair

    def __post_init__(self):
        n = self.blocks.n
        if self.potential.dim != n:
            raise DimensionError(
                f"potential dimension {self.potential.dim} != n = {n}"
            )
        if self.bc.n != n:
            raise DimensionError(f"boundary pair dimension {self.bc.n} != n = {n}")

    @property
    def n(self):
        return self.blocks.n


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)
    zero_block_diagonal: bool = False

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(problem: SystemProblem, tol: Tolerance = Tolerance()) -> ValidationReport:
    """Check every structural invariant; an empty issue list means valid.

    Also flags whether the potential has zero block-diagonal (the diagonal
    gauge transform can then be skipped).
    """
    report = ValidationReport()
    blocks = problem.blocks
    if any(abs(w) == 0 for w in blocks.weights):
        report.issues.append("zero block weight")
    for i in range(blocks.r):
        for j in range(i + 1, blocks.r):
            if blocks.weights[i] == blocks.weights[j]:
                report.issues.append(
                    f"weights b_{i + 1} and b_{j + 1} are not distinct"
                )
    if not problem.bc.is_maximal(tol):
        report.issues.append(
            f"maximality violated: rank(C D) = {problem.bc.rank(tol)} < {problem.n}"
        )
    xs = np.linspace(0.0, 1.0, 17)
    diag_mass = 0.0
    for x in xs:
        q = problem.potential(x)
        if not np.all(np.isfinite(q.real)) and np.all(np.isfinite(q.imag)):
            report.issues.append(f"potential not finite at x={x}")
            break
        diag_mass = max(
            diag_mass,
            float(
                np.abs(problem.potential.block_diagonal_part(blocks, x)).max(initial=0.0)
            ),
        )
    report.zero_block_diagonal = diag_mass <= tol.abs + tol.rel
    return report


# --------------------------------------------------------------------------
# 2x2 minors of the stacked boundary array


@dataclass(frozen=True)
class JMinors:
    """The six 2x2 column minors of the 2x4 array (C D) for n = 2.

    Columns 1, 2 come from C and columns 3, 4 from D; ``minor(j, k)`` is the
    determinant of columns j and k in that order (1-based).
    """

    j12: complex
    j34: complex
    j32: complex
    j13: complex
    j42: complex
    j14: complex

    def as_dict(self):
        return {
            "J12": self.j12,
            "J34": self.j34,
            "J32": self.j32,
            "J13": self.j13,
            "J42": self.j42,
            "J14": self.j14,
        }


def minor_of_stacked(bc: BoundaryPair, j: int, k: int) -> complex:
    """2x2 determinant of columns j, k (1-based) of the stacked array (C D)."""
    a = bc.stacked()
    return complex(a[0, j - 1] * a[1, k - 1] - a[0, k - 1] * a[1, j - 1])


def j_minors(bc: BoundaryPair) -> JMinors:
    """Named column minors of (C D); only defined for n = 2."""
    if bc.n != 2:
        raise DimensionError(f"j_minors requires n = 2, got n = {bc.n}")
    m = lambda j, k: minor_of_stacked(bc, j, k)
    return JMinors(
        j12=m(1, 2), j34=m(3, 4), j32=m(3, 2), j13=m(1, 3), j42=m(4, 2), j14=m(1, 4)
    )


# --------------------------------------------------------------------------
# JSON round trip (complex numbers as [re, im] pairs throughout)


def _c_to_pair(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def _pair_to_c(p) -> complex:
    if not isinstance(p, (list, tuple)) or len(p) != 2:
        raise ValueError(f"complex number must be a [re, im] pair, got {p!r}")
    return complex(float(p[0]), float(p[1]))


def _matrix_to_json(m: np.ndarray):
    return [[_c_to_pair(z) for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[_pair_to_c(p) for p in row] for row in rows], dtype=complex)


def problem_to_json(problem: SystemProblem) -> dict:
    pot = problem.potential
    if isinstance(pot, ZeroPotential):
        pj = {"variant": "zero"}
    elif isinstance(pot, ConstantPotential):
        pj = {"variant": "constant", "matrix": _matrix_to_json(pot.matrix)}
    elif isinstance(pot, GridPotential):
        pj = {
            "variant": "grid",
            "abscissae": [float(x) for x in pot.abscissae],
            "values": [_matrix_to_json(v) for v in pot.values],
        }
    elif isinstance(pot, PolynomialPotential):
        pj = {
            "variant": "poly",
            "coefficients": [
                [[_c_to_pair(c) for c in entry] for entry in row]
                for row in pot.coefficients
            ],
        }
    else:  # pragma: no cover - internal potentials are not serialized
        raise TypeError(f"potential variant {pot.variant!r} has no JSON form")
    return {
        "blocks": {
            "sizes": list(problem.blocks.sizes),
            "weights": [_c_to_pair(w) for w in problem.blocks.weights],
        },
        "potential": pj,
        "bc": {
            "C": _matrix_to_json(problem.bc.C),
            "D": _matrix_to_json(problem.bc.D),
        },
    }


def problem_from_json(data: dict) -> SystemProblem:
    try:
        blocks = BlockStructure(
            sizes=data["blocks"]["sizes"],
            weights=[_pair_to_c(w) for w in data["blocks"]["weights"]],
        )
        pj = data["potential"]
        variant = pj["variant"]
        if variant == "zero":
            pot = ZeroPotential(blocks.n)
        elif variant == "constant":
            pot = ConstantPotential(_matrix_from_json(pj["matrix"]))
        elif variant == "grid":
            pot = GridPotential(
                pj["abscissae"], [_matrix_from_json(v) for v in pj["values"]]
            )
        elif variant == "poly":
            pot = PolynomialPotential(
                [
                    [[_pair_to_c(c) for c in entry] for entry in row]
                    for row in pj["coefficients"]
                ]
            )
        else:
            raise ValueError(f"unknown potential variant {variant!r}")
        bc = BoundaryPair(
            _matrix_from_json(data["bc"]["C"]), _matrix_from_json(data["bc"]["D"])
        )
    except KeyError as exc:
        raise ValueError(f"problem JSON is missing field {exc}") from exc
    return SystemProblem(blocks=blocks, potential=pot, bc=bc)
