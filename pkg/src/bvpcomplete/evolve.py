"""Fundamental matrix propagation, diagonal gauge transform, and
large-parameter behaviour checks.

The first-order system ``(1/i) B y' + Q(x) y = lam y`` with
``B = diag(1/b_j)`` blockwise is integrated as
``y' = i diag(b) (lam I - Q(x)) y``.  Differentiating p times in lam gives
the augmented system for the derivative stack,
``(d/dx) Y_p = i diag(b) ((lam I - Q) Y_p + p Y_{p-1})``, which is what the
compiled kernel propagates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._dopri import dopri_integrate, fundamental_batch
from .errors import ApplicabilityError
from .model import BoundaryPair, GridPotential, SystemProblem, validate
from .numcore import Tolerance, det
from .regularity import selection_matrix

__all__ = [
    "FundamentalSolution",
    "integrate_fundamental",
    "fundamental_many",
    "GaugeTransform",
    "gauge_transform",
    "AsymptoticReport",
    "check_asymptotics",
]

P_MAX = 4


@dataclass(frozen=True)
class FundamentalSolution:
    """Matrix solution with initial value I at x = 0, plus lam-derivatives.

    ``values[p, g]`` is the p-th lambda-derivative of the solution at grid
    point g (an n x n matrix); ``values[0, 0]`` is the identity.
    """

    lam: complex
    order: int
    grid: np.ndarray
    values: np.ndarray  # (order+1, G, n, n)

    def at_one(self, p: int = 0) -> np.ndarray:
        return self.values[p, -1]


def _resolve_grid(grid):
    if grid is None:
        return np.array([0.0, 1.0])
    if np.isscalar(grid):
        return np.linspace(0.0, 1.0, int(grid))
    g = np.asarray(grid, dtype=float)
    if g[0] != 0.0 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must start at 0 and increase strictly")
    return g


def integrate_fundamental(
    problem: SystemProblem,
    lam: complex,
    order: int = 0,
    grid=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> FundamentalSolution:
    """Fundamental solution at one lambda, reported on the requested grid."""
    if order < 0 or order > P_MAX:
        raise ValueError(f"derivative order must be in 0..{P_MAX}")
    g = _resolve_grid(grid)
    out = fundamental_batch(
        problem.blocks, problem.potential, [lam], order=order, grid=g, rtol=rtol, atol=atol
    )
    return FundamentalSolution(lam=complex(lam), order=order, grid=g, values=out[0])


def fundamental_many(
    problem: SystemProblem,
    lams,
    order: int = 0,
    grid=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Batched fundamental solutions; shape (L, order+1, G, n, n)."""
    if order < 0 or order > P_MAX:
        raise ValueError(f"derivative order must be in 0..{P_MAX}")
    g = _resolve_grid(grid)
    return fundamental_batch(
        problem.blocks, problem.potential, lams, order=order, grid=g, rtol=rtol, atol=atol
    )


# --------------------------------------------------------------------------
# diagonal gauge transform


@dataclass(frozen=True)
class GaugeTransform:
    grid: np.ndarray
    w_values: np.ndarray  # (G, n, n), block diagonal
    w_one: np.ndarray
    transformed: SystemProblem


def gauge_transform(problem: SystemProblem, grid_points: int = 1025) -> GaugeTransform:
    """Remove the block-diagonal part of the potential.

    The block-diagonal factor W solves ``W' = -i diag(b) Q_1(x) W`` with
    ``W(0) = I`` blockwise (Q_1 is the block-diagonal part of Q).  The
    returned problem has potential ``W^{-1} (Q - Q_1) W`` (zero
    block-diagonal, stored as a sampled grid) and boundary pair
    ``(C, D W(1))``; it has the same eigenvalues as the original problem.
    """
    blocks = problem.blocks
    n = blocks.n
    grid = np.linspace(0.0, 1.0, int(grid_points))
    w_vals = np.zeros((grid.size, n, n), dtype=complex)

    pos = 0
    for j, size in enumerate(blocks.sizes):
        b_j = blocks.weights[j]
        sl = slice(pos, pos + size)

        def rhs(x, w, b_j=b_j, sl=sl):
            q_jj = problem.potential(x)[sl, sl]
            return -1j * b_j * (q_jj @ w)

        w_block = dopri_integrate(rhs, np.eye(size, dtype=complex), grid, rtol=1e-12)
        w_vals[:, sl, sl] = w_block
        pos += size

    q_tilde = np.zeros_like(w_vals)
    for g, x in enumerate(grid):
        q = problem.potential(x)
        q1 = problem.potential.block_diagonal_part(blocks, x)
        q_tilde[g] = np.linalg.solve(w_vals[g], (q - q1) @ w_vals[g])

    w_one = w_vals[-1]
    new_bc = BoundaryPair(problem.bc.C, problem.bc.D @ w_one)
    transformed = SystemProblem(
        blocks=blocks, potential=GridPotential(grid, q_tilde), bc=new_bc
    )
    return GaugeTransform(grid=grid, w_values=w_vals, w_one=w_one, transformed=transformed)


# --------------------------------------------------------------------------
# behaviour along rays lambda = i z t


@dataclass
class AsymptoticReport:
    z: complex
    ordering: tuple
    entries: list
    det_trend_decreasing: bool
    component_trend_decreasing: bool

    def to_json(self) -> dict:
        return {
            "z": [self.z.real, self.z.imag],
            "ordering": list(self.ordering),
            "det_trend_decreasing": self.det_trend_decreasing,
            "component_trend_decreasing": self.component_trend_decreasing,
            "entries": [
                {
                    "t": e["t"],
                    "det_rel_error": e["det_rel_error"],
                    "blocks": [
                        {
                            "block": b["block"],
                            "diag_deviation": b["diag_deviation"],
                            "offdiag_deviation": b["offdiag_deviation"],
                            "condition": b["condition"],
                            "reliable": b["reliable"],
                        }
                        for b in e["blocks"]
                    ],
                }
                for e in self.entries
            ],
        }


def _triangular_column(phi_one, blocks, ordering, pos, lam):
    """Coefficients c of the triangular family member for one block: rows
    of earlier blocks vanish at 0, the own block starts at I, rows of later
    blocks vanish at 1.  Returns (c, condition estimate of the solve)."""
    n = blocks.n
    coord_block = blocks.block_of_coordinate()
    own = ordering[pos]
    later = ordering[pos + 1 :]
    own_coords = np.where(coord_block == own)[0]
    later_coords = np.concatenate(
        [np.where(coord_block == b)[0] for b in later]
    ) if later else np.array([], dtype=int)
    c = np.zeros((n, len(own_coords)), dtype=complex)
    c[own_coords, :] = np.eye(len(own_coords))
    cond = 1.0
    if later_coords.size:
        m = phi_one[np.ix_(later_coords, later_coords)]
        rhs = -phi_one[np.ix_(later_coords, own_coords)]
        sv = np.linalg.svd(m, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        c[later_coords, :] = np.linalg.lstsq(m, rhs, rcond=None)[0]
    return c, cond


def check_asymptotics(
    problem: SystemProblem,
    z: complex,
    ts,
    grid=None,
    rtol: float = 1e-10,
    tol: Tolerance = Tolerance(),
) -> AsymptoticReport:
    """Measure how the solution family approaches its exponential profile
    along the ray lambda = i z t.

    Two tracks are reported per t:

    * determinant: det(C + D Phi(1; izt)) e^{-beta t} against det T_z,
      where beta sums -b_k z over the coordinates with Re(b_k z) < 0;
    * components: the triangular solution of block K, scaled by
      e^{-i b_K lam x}, has diagonal -> I and off-block -> 0.  Recovering
      the forward-recessive members from the forward propagator is
      ill-conditioned for large t; entries are marked unreliable once the
      recovery condition number passes 1e12 (for two blocks of size one the
      recessive member is instead rebuilt from a backward propagation,
      which stays well conditioned).

    The potential must have zero block-diagonal on the grid.
    """
    report_grid = _resolve_proof_grid(grid)
    vrep = validate(problem, tol)
    if not vrep.zero_block_diagonal:
        raise ApplicabilityError("asymptotic check requires zero block-diagonal Q")
    blocks = problem.blocks
    w = np.asarray(blocks.weights, dtype=complex)
    rez = np.real(w * z)
    gaps = np.abs(np.subtract.outer(rez, rez))
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= 1e-9 * max(1.0, np.abs(w * z).max()):
        raise ApplicabilityError(
            "ray direction too close to an ordering-sector boundary"
        )
    if np.min(np.abs(rez)) <= 1e-9 * max(1.0, np.abs(w * z).max()):
        raise ApplicabilityError("ray direction too close to a pick line")

    ordering = tuple(int(i) for i in np.argsort(-rez, kind="stable"))
    coord_b = blocks.coordinate_weights()
    coord_block = blocks.block_of_coordinate()
    t_sel = selection_matrix(problem.bc, blocks, z)
    det_target = det(t_sel.matrix)
    beta = complex(np.sum(np.where(np.real(coord_b * z) < 0, -coord_b * z, 0)))

    simple_two = blocks.n == 2 and blocks.r == 2

    entries = []
    for t in ts:
        t = float(t)
        lam = 1j * z * t
        fwd = fundamental_batch(
            blocks, problem.potential, [lam], order=0, grid=report_grid, rtol=rtol
        )[0, 0]
        phi_one = fwd[-1]
        delta = det(problem.bc.C + problem.bc.D @ phi_one)
        ratio = delta * np.exp(-beta * t)
        det_rel = abs(ratio - det_target) / max(abs(det_target), 1e-300)

        block_entries = []
        bwd = None
        for pos, blk in enumerate(ordering):
            own_coords = np.where(coord_block == blk)[0]
            if simple_two and pos == 0:
                if bwd is None:
                    bwd = fundamental_batch(
                        blocks,
                        problem.potential,
                        [lam],
                        order=0,
                        grid=report_grid,
                        rtol=rtol,
                        backward=True,
                    )[0, 0]
                col = bwd[:, :, own_coords[0]]
                anchor = col[0, own_coords[0]]
                y = col / anchor
                cond = 1.0
            else:
                c, cond = _triangular_column(phi_one, blocks, ordering, pos, lam)
                y = np.einsum("gij,jk->gik", fwd, c)
                if len(own_coords) == 1:
                    y = y[:, :, 0]
                else:
                    y = y[:, :, :]
            scale = np.exp(-1j * coord_b[own_coords[0]] * lam * report_grid)
            if y.ndim == 2:
                ratios = y * scale[:, None]
                diag_dev = float(
                    np.abs(ratios[:, own_coords[0]] - 1.0).max()
                )
                off = np.delete(ratios, own_coords[0], axis=1)
                off_dev = float(np.abs(off).max()) if off.size else 0.0
            else:
                ratios = y * scale[:, None, None]
                own_part = ratios[:, own_coords, :]
                eye = np.eye(len(own_coords))
                diag_dev = float(np.abs(own_part - eye).max())
                other = np.delete(ratios, own_coords, axis=1)
                off_dev = float(np.abs(other).max()) if other.size else 0.0
            block_entries.append(
                {
                    "block": blk,
                    "diag_deviation": diag_dev,
                    "offdiag_deviation": off_dev,
                    "condition": cond,
                    "reliable": bool(cond < 1e12),
                }
            )
        entries.append(
            {
                "t": t,
                "lam": lam,
                "det_ratio": ratio,
                "det_rel_error": float(det_rel),
                "blocks": block_entries,
            }
        )

    det_errs = [e["det_rel_error"] for e in entries]
    det_trend = all(b <= a * 1.05 + 1e-12 for a, b in zip(det_errs, det_errs[1:]))
    comp_devs = []
    for e in entries:
        rel = [b for b in e["blocks"] if b["reliable"]]
        if len(rel) == len(e["blocks"]):
            comp_devs.append(
                max(max(b["diag_deviation"], b["offdiag_deviation"]) for b in rel)
            )
    comp_trend = len(comp_devs) >= 2 and all(
        b <= a * 1.05 + 1e-12 for a, b in zip(comp_devs, comp_devs[1:])
    )
    return AsymptoticReport(
        z=complex(z),
        ordering=ordering,
        entries=entries,
        det_trend_decreasing=det_trend,
        component_trend_decreasing=comp_trend,
    )


def _resolve_proof_grid(grid):
    if grid is None:
        return np.linspace(0.0, 1.0, 41)
    return _resolve_grid(grid)
