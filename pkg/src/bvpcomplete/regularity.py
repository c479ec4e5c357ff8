"""Algebraic classification of two-point boundary conditions.

The central object is the selection matrix T built at a direction z: column
k is taken from C when Re(z * b_{j(k)}) > 0 and from D when it is negative,
where b_{j(k)} is the weight of the block owning coordinate k.  The plane
splits into sectors (bounded by the lines Re(b_j z) = 0) on which the picks,
and hence det T, are constant, so one representative per sector exhausts
all directions.

Verdicts:

* ``Regular``          -- det T is nonzero at every sector representative.
* ``WeaklyRegularOnly``-- some sector determinant vanishes, but three
  admissible directions with nonzero determinants form a triangle whose
  strict interior contains the origin.
* ``NotWeaklyRegular`` -- no such triple exists (equivalently, the
  nonzero-determinant sectors fit inside a closed half-plane).
* ``RankDeficient``    -- rank (C D) < n, which preempts everything.

A note on the column-pick convention: picking by sign of Re(z * b_k) (the
diagonal of z * diag(b), i.e. the inverse weight matrix scaled by z) is the
convention that matches the large-|lambda| behaviour of the characteristic
determinant along the ray lambda = i z t.  The alternative convention picks
by sign of Re(z / b_k); both are exposed through ``rule`` and they coincide
for real weights and for weight sets closed under conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import AdmissibilityError, ApplicabilityError, StructureError
from .model import BlockStructure, BoundaryPair
from .numcore import Tolerance, det, nullspace

__all__ = [
    "Sector",
    "SectorFan",
    "build_sector_fan",
    "SelectionMatrix",
    "selection_matrix",
    "RegularityReport",
    "classify",
    "SplittingReport",
    "splitting_check",
    "TPlusMinus",
    "selfadjoint_T_pm",
    "adjoint_bc",
    "dissipativity",
]

PICK_RULES = ("weight", "inverse")


def _pick_values(blocks: BlockStructure, z: complex, rule: str) -> np.ndarray:
    """Per-block quantity whose real-part sign drives the column pick."""
    w = np.asarray(blocks.weights, dtype=complex)
    if rule == "weight":
        return z * w
    if rule == "inverse":
        return z * np.conj(w)  # same sign pattern as Re(z / b_j)
    raise ValueError(f"unknown pick rule {rule!r}")


def pick_signs(blocks: BlockStructure, z: complex, rule: str = "weight") -> np.ndarray:
    """Signs of Re(z*b_j) per block; raises for inadmissible z."""
    vals = np.real(_pick_values(blocks, z, rule))
    scale = max(abs(z), 1.0) * max(abs(w) for w in blocks.weights)
    for j, v in enumerate(vals):
        if abs(v) <= 1e-14 * scale:
            raise AdmissibilityError(
                f"direction z={z} lies on the critical line of block {j + 1}",
                block=j,
            )
    return np.sign(vals).astype(int)


# --------------------------------------------------------------------------
# sector fan


@dataclass(frozen=True)
class Sector:
    lo: float
    hi: float
    representative: complex
    ordering: tuple | None = None  # block indices, only in ordering mode


@dataclass(frozen=True)
class SectorFan:
    mode: str
    angles: tuple
    sectors: tuple

    @property
    def representatives(self):
        return [s.representative for s in self.sectors]


def _line_angles(values: np.ndarray) -> list:
    """Boundary directions theta where Re(v * e^{i theta}) = 0, for each v."""
    angles = []
    for v in values:
        base = (np.pi / 2 - np.angle(v)) % np.pi
        angles.extend([base, base + np.pi])
    return angles


def build_sector_fan(
    blocks: BlockStructure, mode: str = "regularity", rule: str = "weight"
) -> SectorFan:
    """Divide the z-plane into sectors of constant behaviour.

    ``regularity`` mode uses the lines Re(b_j z) = 0 (at most 2r sectors):
    the column picks are constant inside each sector.  ``ordering`` mode
    uses the pairwise lines Re((b_j - b_k) z) = 0 (at most r^2 - r
    sectors): the ordering of the Re(b_j z) is constant inside each sector,
    and each sector carries the block permutation sorting them descending
    (equivalently, sorting Re(i b_j lambda) ascending on rays lambda = izt).
    """
    w = np.asarray(blocks.weights, dtype=complex)
    if mode == "regularity":
        vals = _pick_values(blocks, 1.0, rule)
        raw = _line_angles(vals)
    elif mode == "ordering":
        raw = []
        for j in range(blocks.r):
            for k in range(j + 1, blocks.r):
                raw.extend(_line_angles(np.array([w[j] - w[k]])))
    else:
        raise ValueError(f"unknown fan mode {mode!r}")

    raw = sorted(a % (2 * np.pi) for a in raw)
    angles: list = []
    for a in raw:
        if not angles or a - angles[-1] > 1e-12:
            angles.append(a)
    if angles and (2 * np.pi - angles[-1]) + angles[0] <= 1e-12:
        angles.pop()

    sectors = []
    if not angles:
        rep = 1.0 + 0.0j
        ordering = None
        if mode == "ordering":
            ordering = tuple(np.argsort(-np.real(w * rep), kind="stable"))
        sectors.append(Sector(0.0, 2 * np.pi, rep, ordering))
    else:
        for i, lo in enumerate(angles):
            hi = angles[(i + 1) % len(angles)]
            if i == len(angles) - 1:
                hi += 2 * np.pi
            mid = 0.5 * (lo + hi)
            rep = complex(np.cos(mid), np.sin(mid))
            ordering = None
            if mode == "ordering":
                ordering = tuple(np.argsort(-np.real(w * rep), kind="stable"))
            sectors.append(Sector(lo, hi % (2 * np.pi), rep, ordering))
    return SectorFan(mode=mode, angles=tuple(angles), sectors=tuple(sectors))


# --------------------------------------------------------------------------
# selection matrix


@dataclass(frozen=True)
class SelectionMatrix:
    z: complex
    picked: tuple  # "C" or "D" per column
    matrix: np.ndarray


def selection_matrix(
    bc: BoundaryPair, blocks: BlockStructure, z: complex, rule: str = "weight"
) -> SelectionMatrix:
    """Assemble T at direction z: per-block column picks from C or D."""
    signs = pick_signs(blocks, z, rule)
    coord_signs = np.repeat(signs, blocks.sizes)
    cols = []
    picked = []
    for k, s in enumerate(coord_signs):
        if s > 0:
            cols.append(bc.C[:, k])
            picked.append("C")
        else:
            cols.append(bc.D[:, k])
            picked.append("D")
    return SelectionMatrix(z=complex(z), picked=tuple(picked), matrix=np.column_stack(cols))


# --------------------------------------------------------------------------
# classification


@dataclass
class RegularityReport:
    verdict: str
    rule: str
    rank: int
    n: int
    sector_records: list = field(default_factory=list)
    witness: tuple | None = None
    det_threshold: float = 0.0

    @property
    def weakly_regular(self) -> bool:
        return self.verdict in ("Regular", "WeaklyRegularOnly")

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "rule": self.rule,
            "rank": self.rank,
            "n": self.n,
            "det_threshold": self.det_threshold,
            "sectors": [
                {
                    "lo": rec["lo"],
                    "hi": rec["hi"],
                    "z": [rec["z"].real, rec["z"].imag],
                    "det": [rec["det"].real, rec["det"].imag],
                    "abs_det_relative": rec["abs_det_relative"],
                    "nonzero": rec["nonzero"],
                }
                for rec in self.sector_records
            ],
            "witness": None
            if self.witness is None
            else [[z.real, z.imag] for z in self.witness],
        }


def _origin_strictly_inside(z1: complex, z2: complex, z3: complex, tol: float) -> bool:
    def orient(a, b, c):
        return ((b - a).conjugate() * (c - a)).imag

    s1 = orient(z1, z2, 0.0)
    s2 = orient(z2, z3, 0.0)
    s3 = orient(z3, z1, 0.0)
    if min(abs(s1), abs(s2), abs(s3)) <= tol:
        return False
    return (s1 > 0 and s2 > 0 and s3 > 0) or (s1 < 0 and s2 < 0 and s3 < 0)


def _arcs_fit_closed_halfplane(arcs: list) -> bool:
    """True when every arc fits in some closed half-turn [theta, theta+pi]."""
    two_pi = 2 * np.pi
    if not arcs:
        return True
    if any(length > np.pi + 1e-12 for _, length in arcs):
        return False
    for theta, _ in arcs:
        ok = True
        for a, length in arcs:
            start = (a - theta) % two_pi
            if start + length > np.pi + 1e-12:
                ok = False
                break
        if ok:
            return True
    return False


def _witness_triple(good_arcs: list, tol: float):
    """Search a triple of directions (one may share an arc) whose triangle
    strictly contains the origin.  Points sample each arc at fixed
    fractions; determinants are constant on arcs, so any sampled point is
    as good as any other in the same arc."""
    points = []
    for a, length in good_arcs:
        for f in (0.01, 0.25, 0.5, 0.75, 0.99):
            ang = a + f * length
            points.append(complex(np.cos(ang), np.sin(ang)))
    for z1, z2, z3 in combinations(points, 3):
        if _origin_strictly_inside(z1, z2, z3, tol):
            return (z1, z2, z3)
    return None


def classify(
    bc: BoundaryPair,
    blocks: BlockStructure,
    tol: Tolerance = Tolerance(),
    rule: str = "weight",
) -> RegularityReport:
    """Classify the boundary pair as Regular / WeaklyRegularOnly /
    NotWeaklyRegular / RankDeficient.

    det T is evaluated at one representative per sector of the fan; the
    nonzero threshold is scale-free: |det T| > tol.rel * (|C|_F + |D|_F)^n.
    Weak regularity is decided exactly (the nonzero sectors must not fit in
    a closed half-plane) and a witness triple is attached whenever one
    exists, including for plainly Regular pairs.
    """
    n = bc.n
    rank = bc.rank(tol)
    scale = (np.linalg.norm(bc.C, "fro") + np.linalg.norm(bc.D, "fro")) ** n
    threshold = tol.rel * scale + tol.abs
    report = RegularityReport(
        verdict="RankDeficient", rule=rule, rank=rank, n=n, det_threshold=threshold
    )
    if rank < n:
        return report

    fan = build_sector_fan(blocks, "regularity", rule)
    good_arcs = []
    all_good = True
    for sec in fan.sectors:
        t = selection_matrix(bc, blocks, sec.representative, rule)
        d = det(t.matrix)
        nonzero = abs(d) > threshold
        lo, hi = sec.lo, sec.hi
        length = (hi - lo) % (2 * np.pi)
        if length == 0.0:
            length = 2 * np.pi
        report.sector_records.append(
            {
                "lo": lo,
                "hi": hi,
                "z": sec.representative,
                "det": d,
                "abs_det_relative": abs(d) / scale,
                "nonzero": bool(nonzero),
            }
        )
        if nonzero:
            good_arcs.append((lo, length))
        else:
            all_good = False

    feasible = not _arcs_fit_closed_halfplane(good_arcs)
    witness = _witness_triple(good_arcs, 1e-12) if feasible else None
    report.witness = witness

    if all_good:
        report.verdict = "Regular"
    elif feasible and witness is not None:
        report.verdict = "WeaklyRegularOnly"
    else:
        report.verdict = "NotWeaklyRegular"
    return report


# --------------------------------------------------------------------------
# separated (splitting) boundary conditions


@dataclass
class SplittingReport:
    k_at_zero: int
    n: int
    records: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "k_at_zero": self.k_at_zero,
            "n": self.n,
            "sectors": [
                {
                    "z": [r["z"].real, r["z"].imag],
                    "kappa_plus": r["kappa_plus"],
                    "pick_count": r["pick_count"],
                    "matches_k": r["matches_k"],
                    "det_must_vanish": r["det_must_vanish"],
                    "abs_det": r["abs_det"],
                }
                for r in self.records
            ],
        }


def splitting_check(
    bc: BoundaryPair,
    blocks: BlockStructure,
    tol: Tolerance = Tolerance(),
    rule: str = "weight",
) -> SplittingReport:
    """Necessary-condition scan for separated boundary conditions.

    The rows must separate into k conditions at endpoint 0 (zero D-part)
    and n - k at endpoint 1 (zero C-part).  A nonzero det T at direction z
    forces the number of C-columns to equal k; sectors violating that carry
    ``det_must_vanish = True`` and the measured |det T| for verification.
    ``kappa_plus`` is the positive-eigenvalue count of the Hermitian part
    of z times the derivative-weight matrix.
    """
    n = bc.n
    scale = max(
        float(np.abs(bc.C).max(initial=0.0)), float(np.abs(bc.D).max(initial=0.0))
    )
    cut = tol.rel * scale + tol.abs
    rows_at_zero = []
    rows_at_one = []
    for i in range(n):
        c_zero = np.abs(bc.C[i]).max() <= cut
        d_zero = np.abs(bc.D[i]).max() <= cut
        if d_zero and not c_zero:
            rows_at_zero.append(i)
        elif c_zero and not d_zero:
            rows_at_one.append(i)
        else:
            raise StructureError(
                f"row {i + 1} is not separated (both endpoint parts"
                f"{' zero' if c_zero else ' nonzero'})"
            )
    k = len(rows_at_zero)

    sizes = np.asarray(blocks.sizes)
    w = np.asarray(blocks.weights, dtype=complex)
    fan = build_sector_fan(blocks, "regularity", rule)
    report = SplittingReport(k_at_zero=k, n=n)
    for sec in fan.sectors:
        z = sec.representative
        kappa = int(sizes[np.real(z / w) > 0].sum())
        picks = int(sizes[np.real(_pick_values(blocks, z, rule)) > 0].sum())
        t = selection_matrix(bc, blocks, z, rule)
        report.records.append(
            {
                "z": z,
                "kappa_plus": kappa,
                "pick_count": picks,
                "matches_k": kappa == k,
                "det_must_vanish": picks != k,
                "abs_det": abs(det(t.matrix)),
            }
        )
    return report


# --------------------------------------------------------------------------
# selfadjoint weight matrix: T_plus / T_minus, adjoint pair, dissipativity


def _require_real_weights(blocks: BlockStructure):
    for j, w in enumerate(blocks.weights):
        if abs(w.imag) > 1e-14 * abs(w):
            raise ApplicabilityError(
                f"operation requires real weights; block {j + 1} has b = {w}"
            )


@dataclass(frozen=True)
class TPlusMinus:
    t_plus: np.ndarray
    t_minus: np.ndarray
    det_plus: complex
    det_minus: complex


def selfadjoint_T_pm(bc: BoundaryPair, blocks: BlockStructure) -> TPlusMinus:
    """T+ = C P+ + D P- and T- = C P- + D P+ for real weights.

    P+/P- project onto the coordinates with positive/negative weight (the
    sign of b_k equals the sign of the derivative-weight diagonal 1/b_k).
    For n = 2 with b_1 < 0 < b_2, det T+ and det T- equal the column minors
    J32 and J14 of the stacked array (C D).
    """
    _require_real_weights(blocks)
    b = np.real(blocks.coordinate_weights())
    p_plus = np.diag((b > 0).astype(float))
    p_minus = np.diag((b < 0).astype(float))
    t_plus = bc.C @ p_plus + bc.D @ p_minus
    t_minus = bc.C @ p_minus + bc.D @ p_plus
    return TPlusMinus(t_plus, t_minus, det(t_plus), det(t_minus))


def _btilde(blocks: BlockStructure) -> np.ndarray:
    bmat = blocks.weight_matrix()
    n = blocks.n
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = bmat
    out[n:, n:] = -bmat
    return out


def adjoint_bc(
    bc: BoundaryPair, blocks: BlockStructure, tol: Tolerance = Tolerance()
) -> BoundaryPair:
    """Boundary pair of the adjoint problem.

    With V an orthonormal basis of Ker(C D) and Btilde = diag(B, -B) built
    from the derivative-weight matrix B, the rows of (C* D*) are the
    conjugate transpose of Btilde V.  The kernel of (C* D*) is then exactly
    the set of boundary vectors pairing to zero in the two-point boundary
    form <B f(0), g(0)> - <B f(1), g(1)>, and the result is maximal.
    """
    if not bc.is_maximal(tol):
        raise ApplicabilityError("adjoint pair requires the maximality condition")
    v = nullspace(bc.stacked(), tol)
    if v.shape[1] != bc.n:
        raise ApplicabilityError(
            f"kernel of (C D) has dimension {v.shape[1]}, expected {bc.n}"
        )
    k = (_btilde(blocks) @ v).conj().T
    n = bc.n
    return BoundaryPair(k[:, :n], k[:, n:])


def dissipativity(
    bc: BoundaryPair, blocks: BlockStructure, tol: Tolerance = Tolerance()
) -> dict:
    """Sign classification of the boundary quadratic form on Ker(C D).

    G = V^H diag(B, -B) V is Hermitian; the form equals twice the imaginary
    part of the zero-potential operator's quadratic form on its domain.
    Verdicts: ``Accumulative`` (G <= 0), ``Dissipative`` (G >= 0),
    ``Selfadjoint`` (G = 0), else ``Neither``.  Consistency with the
    selection determinants is reported: an accumulative form forces
    det T+ != 0 and a dissipative one forces det T- != 0.
    """
    _require_real_weights(blocks)
    v = nullspace(bc.stacked(), tol)
    g = v.conj().T @ _btilde(blocks) @ v
    g = 0.5 * (g + g.conj().T)
    eig = np.linalg.eigvalsh(g)
    scale = float(np.abs(_btilde(blocks)).max())
    cut = tol.rel * scale + tol.abs
    if np.all(np.abs(eig) <= cut):
        verdict = "Selfadjoint"
    elif np.all(eig <= cut):
        verdict = "Accumulative"
    elif np.all(eig >= -cut):
        verdict = "Dissipative"
    else:
        verdict = "Neither"

    tpm = selfadjoint_T_pm(bc, blocks)
    det_scale = (np.linalg.norm(bc.C, "fro") + np.linalg.norm(bc.D, "fro")) ** bc.n
    consistent = True
    if verdict in ("Accumulative", "Selfadjoint"):
        consistent = consistent and abs(tpm.det_plus) > tol.rel * det_scale
    if verdict in ("Dissipative", "Selfadjoint"):
        consistent = consistent and abs(tpm.det_minus) > tol.rel * det_scale
    return {
        "verdict": verdict,
        "form_eigenvalues": [float(e) for e in eig],
        "det_t_plus": tpm.det_plus,
        "det_t_minus": tpm.det_minus,
        "selection_consistent": bool(consistent),
    }
