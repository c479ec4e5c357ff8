"""Characteristic determinant and eigenvalue enumeration.

The characteristic function is Delta(lam) = det(C + D Phi(1; lam)); its
zeros, with multiplicities, are the eigenvalues of the two-point problem.
For a zero potential Delta collapses to a finite exponential sum (one term
per subset of columns switched from C to D), which is evaluated exactly;
otherwise each evaluation integrates the fundamental matrix.

Eigenvalues are found by the argument principle: the winding number of
Delta around rectangle boundaries is computed by adaptive phase tracking
(per-segment phase increments are kept below pi/2), rectangles are
quadrisected until they are small and carry winding <= 2, and candidate
roots are polished by Newton iteration.  Double roots get a second polish
pass on Delta' (a secant iteration), which avoids the precision loss of
evaluating Delta in the flat bottom of a double zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import ApplicabilityError, SearchBudgetError
from .evolve import fundamental_many
from .model import SystemProblem, ZeroPotential
from .numcore import adjugate, det

__all__ = [
    "ExponentialSum",
    "closed_form_delta0",
    "CharFunction",
    "char_det",
    "DegeneracyResult",
    "detect_degenerate",
    "Eigenvalue",
    "SpectrumReport",
    "find_eigenvalues",
    "default_window",
]


# --------------------------------------------------------------------------
# exponential-sum closed form for zero potential


@dataclass(frozen=True)
class ExponentialSum:
    """Finite sum  sum_m c_m e^{i w_m lam}  with complex frequencies w_m."""

    coefficients: np.ndarray
    frequencies: np.ndarray

    def eval(self, lams):
        lams = np.asarray(lams, dtype=complex)
        return np.einsum(
            "m,...m->...", self.coefficients, np.exp(1j * np.outer(lams, self.frequencies))
        ).reshape(lams.shape)

    def eval_deriv(self, lams):
        lams = np.asarray(lams, dtype=complex)
        c = 1j * self.frequencies * self.coefficients
        return np.einsum(
            "m,...m->...", c, np.exp(1j * np.outer(lams, self.frequencies))
        ).reshape(lams.shape)

    def magnitude_scale(self, lams):
        """Sum of term magnitudes; the natural noise scale for |Delta|."""
        lams = np.asarray(lams, dtype=complex)
        mags = np.abs(self.coefficients) * np.exp(
            -np.imag(np.outer(lams, self.frequencies))
        )
        return mags.sum(axis=-1).reshape(lams.shape)

    def dominant_term(self, z: complex):
        """(coefficient, frequency) of the term dominating along lam = izt."""
        growth = -np.real(self.frequencies * z)
        idx = int(np.argmax(growth))
        return complex(self.coefficients[idx]), complex(self.frequencies[idx])


def closed_form_delta0(problem: SystemProblem, merge_tol: float = 1e-12) -> ExponentialSum:
    """Expand det(C + D diag(e^{i b_k lam})) by column multilinearity.

    Each subset S of columns contributes det(columns: D on S, C off S)
    times e^{i lam sum_{k in S} b_k}.  Terms with equal frequencies are
    merged.  Requires the zero potential.
    """
    if not isinstance(problem.potential, ZeroPotential):
        raise ApplicabilityError("closed form requires the zero potential")
    n = problem.n
    b = problem.blocks.coordinate_weights()
    C, D = problem.bc.C, problem.bc.D
    coeffs = []
    freqs = []
    for mask in range(2**n):
        cols = []
        freq = 0.0 + 0.0j
        for k in range(n):
            if mask >> k & 1:
                cols.append(D[:, k])
                freq += b[k]
            else:
                cols.append(C[:, k])
        coeffs.append(det(np.column_stack(cols)))
        freqs.append(freq)
    coeffs = np.asarray(coeffs)
    freqs = np.asarray(freqs)
    order = np.lexsort((freqs.imag, freqs.real))
    coeffs, freqs = coeffs[order], freqs[order]
    merged_c, merged_f = [], []
    for c, f in zip(coeffs, freqs):
        if merged_f and abs(f - merged_f[-1]) <= merge_tol:
            merged_c[-1] += c
        else:
            merged_c.append(c)
            merged_f.append(f)
    return ExponentialSum(np.asarray(merged_c), np.asarray(merged_f))


# --------------------------------------------------------------------------
# characteristic function


class CharFunction:
    """Cached evaluator of (Delta, Delta') for one problem.

    Zero-potential problems use the exact exponential sum; everything else
    integrates the fundamental matrix (derivatives via the adjugate trace
    formula Delta' = tr(adj(A) D dPhi/dlam)).  Scan-quality evaluations are
    memoised; refinement evaluations use a tighter integration tolerance
    and bypass the memo.
    """

    def __init__(self, problem: SystemProblem, rtol_scan=1e-8, rtol_refine=1e-11):
        self.problem = problem
        self.rtol_scan = float(rtol_scan)
        self.rtol_refine = float(rtol_refine)
        self.expsum = (
            closed_form_delta0(problem)
            if isinstance(problem.potential, ZeroPotential)
            else None
        )
        self._memo: dict = {}
        self.n_evals = 0

    @property
    def method(self) -> str:
        return "expsum" if self.expsum is not None else "integrate"

    def _eval_integrate(self, lams, need_deriv, rtol):
        order = 1 if need_deriv else 0
        sol = fundamental_many(self.problem, lams, order=order, rtol=rtol)
        C, D = self.problem.bc.C, self.problem.bc.D
        n = self.problem.n
        deltas = np.empty(len(lams), dtype=complex)
        derivs = np.empty(len(lams), dtype=complex) if need_deriv else None
        scales = np.empty(len(lams))
        self.n_evals += len(lams)
        for i in range(len(lams)):
            a = C + D @ sol[i, 0, -1]
            deltas[i] = det(a)
            scales[i] = (np.linalg.norm(a, "fro") / np.sqrt(n)) ** n + 1e-300
            if need_deriv:
                derivs[i] = np.trace(adjugate(a) @ D @ sol[i, 1, -1])
        return deltas, derivs, scales

    def _eval_expsum(self, lams, need_deriv):
        lams = np.asarray(lams, dtype=complex)
        self.n_evals += lams.size
        deltas = self.expsum.eval(lams)
        derivs = self.expsum.eval_deriv(lams) if need_deriv else None
        scales = self.expsum.magnitude_scale(lams) + 1e-300
        return deltas, derivs, scales

    def eval_many(self, lams, need_deriv=False, tight=False):
        """Vector evaluation; returns (Delta, Delta' or None, scale)."""
        lams = np.asarray(list(lams), dtype=complex)
        if self.expsum is not None:
            return self._eval_expsum(lams, need_deriv)
        if tight or need_deriv:
            return self._eval_integrate(lams, need_deriv, self.rtol_refine if tight else self.rtol_scan)
        out_d = np.empty(lams.size, dtype=complex)
        out_s = np.empty(lams.size)
        missing = [i for i, z in enumerate(lams) if complex(z) not in self._memo]
        if missing:
            d, _, s = self._eval_integrate(lams[missing], False, self.rtol_scan)
            for j, i in enumerate(missing):
                self._memo[complex(lams[i])] = (d[j], s[j])
        for i, z in enumerate(lams):
            out_d[i], out_s[i] = self._memo[complex(z)]
        return out_d, None, out_s

    def value(self, lam, tight=False):
        d, _, s = self.eval_many([lam], tight=tight)
        return complex(d[0]), float(s[0])

    def value_and_deriv(self, lam, tight=True):
        d, dd, s = self.eval_many([lam], need_deriv=True, tight=tight)
        return complex(d[0]), complex(dd[0]), float(s[0])


def char_det(cf: CharFunction, lam: complex):
    """(Delta(lam), Delta'(lam)) at refinement quality."""
    d, dd, _ = cf.eval_many([lam], need_deriv=True, tight=True)
    return complex(d[0]), complex(dd[0])


# --------------------------------------------------------------------------
# degeneracy detection


@dataclass(frozen=True)
class DegeneracyResult:
    degenerate: bool
    max_ratio: float
    witness: complex | None

    def to_json(self):
        return {
            "degenerate": self.degenerate,
            "max_ratio": self.max_ratio,
            "witness": None if self.witness is None else [self.witness.real, self.witness.imag],
        }


def detect_degenerate(
    cf: CharFunction, tol: float | None = None, seed: int = 7
) -> DegeneracyResult:
    """Sample |Delta| over the disk |lam| <= 20 and near the axes.

    Degenerate means every sampled |Delta| is below ``tol`` times the local
    magnitude scale; otherwise the sample with the largest normalised value
    is returned as a nondegeneracy witness.  Rank-deficient boundary pairs
    are degenerate without sampling.

    The default tolerance is 1e-12 for the exact exponential-sum evaluator
    and 1e-8 when Delta comes from integration, whose noise floor sits well
    above 1e-12; a vanishing determinant shows up orders of magnitude below
    any genuinely nonzero one either way.
    """
    if tol is None:
        tol = 1e-12 if cf.expsum is not None else 1e-8
    if not cf.problem.bc.is_maximal():
        return DegeneracyResult(True, 0.0, None)
    rng = np.random.default_rng(seed)
    pts = list(
        20.0 * np.sqrt(rng.random(32)) * np.exp(2j * np.pi * rng.random(32))
    )
    for t in (0.7, 1.9, 3.1, 4.3):
        pts.extend([t, -t, 1j * t, -1j * t])
    pts = np.asarray(pts, dtype=complex)
    d, _, s = cf.eval_many(pts, tight=True)
    ratios = np.abs(d) / s
    idx = int(np.argmax(ratios))
    if ratios[idx] < tol:
        return DegeneracyResult(True, float(ratios[idx]), None)
    return DegeneracyResult(False, float(ratios[idx]), complex(pts[idx]))


# --------------------------------------------------------------------------
# eigenvalue search


@dataclass(frozen=True)
class Eigenvalue:
    lam: complex
    multiplicity: int
    residual: float


@dataclass
class SpectrumReport:
    window: tuple
    eigenvalues: list = field(default_factory=list)
    total_winding: int = 0
    degenerate: bool = False
    cells: list = field(default_factory=list)
    n_evals: int = 0
    window_nudged: bool = False
    consistent: bool = True

    def to_json(self):
        return {
            "window": list(self.window),
            "total_winding": self.total_winding,
            "degenerate": self.degenerate,
            "n_evals": self.n_evals,
            "window_nudged": self.window_nudged,
            "consistent": self.consistent,
            "eigenvalues": [
                {
                    "re": ev.lam.real,
                    "im": ev.lam.imag,
                    "multiplicity": ev.multiplicity,
                    "residual": ev.residual,
                }
                for ev in self.eigenvalues
            ],
            "cells": [
                {"rect": list(rect), "winding": w} for rect, w in self.cells[:10000]
            ],
        }

    def csv_rows(self):
        fmt = "{:.17g}"
        yield "re,im,multiplicity,residual"
        for ev in self.eigenvalues:
            yield ",".join(
                [
                    fmt.format(ev.lam.real),
                    fmt.format(ev.lam.imag),
                    str(ev.multiplicity),
                    fmt.format(ev.residual),
                ]
            )


class _EdgeNearZero(Exception):
    pass


class _Scan:
    """Shared state of one rectangle search."""

    def __init__(self, cf, zero_eps=1e-9, max_edge_samples=2**14):
        self.cf = cf
        self.zero_eps = zero_eps
        self.max_edge_samples = max_edge_samples

    def _values(self, pts):
        d, _, s = self.cf.eval_many(pts)
        ratios = np.abs(d) / s
        if np.any(ratios < self.zero_eps):
            bad = pts[int(np.argmin(ratios))]
            raise _EdgeNearZero(bad)
        return d

    def _tracked_phase(self, param, npts0) -> float:
        """Accumulated phase along a parametrised path.

        Segments are bisected until every increment is below pi/2 and every
        magnitude dip is resolved (a sample dropping well below both
        neighbours signals a zero close to the path, whose fast full-turn
        phase swing coarse samples alias away); the clean sample set is
        then doubled once and re-refined as a final validation pass.
        """
        fr = list(np.linspace(0.0, 1.0, npts0))
        vals = list(self._values(param(np.asarray(fr))))

        def insert(new_fr):
            new_vals = self._values(param(np.asarray(new_fr)))
            merged_fr, merged_vals = [], []
            it = iter(sorted(zip(new_fr, new_vals), key=lambda t: t[0]))
            nxt = next(it, None)
            for f, v in zip(fr, vals):
                while nxt is not None and nxt[0] < f:
                    merged_fr.append(nxt[0])
                    merged_vals.append(nxt[1])
                    nxt = next(it, None)
                merged_fr.append(f)
                merged_vals.append(v)
            return merged_fr, merged_vals

        def bad_segments():
            args = np.angle(np.asarray(vals[1:]) / np.asarray(vals[:-1]))
            bad = {i for i, dphi in enumerate(args) if abs(dphi) >= np.pi / 2}
            mags = np.abs(np.asarray(vals))
            for j in range(1, len(mags) - 1):
                if mags[j] < 0.45 * min(mags[j - 1], mags[j + 1]):
                    bad.add(j - 1)
                    bad.add(j)
            if mags[0] < 0.45 * mags[1]:
                bad.add(0)
            if mags[-1] < 0.45 * mags[-2]:
                bad.add(len(mags) - 2)
            return args, sorted(bad)

        validated = False
        while True:
            args, bad = bad_segments()
            if not bad:
                if validated:
                    return float(np.sum(args))
                validated = True
                fr, vals = insert([(fr[i] + fr[i + 1]) / 2 for i in range(len(fr) - 1)])
                continue
            if len(fr) > self.max_edge_samples:
                raise _EdgeNearZero(param(np.asarray([fr[bad[0]]]))[0])
            validated = False
            fr, vals = insert([(fr[i] + fr[i + 1]) / 2 for i in bad])

    def edge_phase(self, a: complex, b: complex) -> float:
        """Phase change of Delta along the segment a -> b."""
        npts = max(5, min(65, int(abs(b - a) / 0.35) + 2))
        return self._tracked_phase(lambda s: a + (b - a) * s, npts)

    def arc_phase(self, center: complex, radius: float, th0: float, th1: float) -> float:
        return self._tracked_phase(
            lambda s: center + radius * np.exp(1j * (th0 + (th1 - th0) * s)), 17
        )

    def winding(self, rect) -> int:
        x0, x1, y0, y1 = rect
        corners = [
            complex(x0, y0),
            complex(x1, y0),
            complex(x1, y1),
            complex(x0, y1),
            complex(x0, y0),
        ]
        total = sum(self.edge_phase(a, b) for a, b in zip(corners, corners[1:]))
        w = total / (2 * np.pi)
        wi = int(round(w))
        if abs(w - wi) > 0.25:
            raise _EdgeNearZero(complex(x0, y0))
        return wi


def _split_rect(rect, fx, fy):
    x0, x1, y0, y1 = rect
    xm = x0 + (x1 - x0) * fx
    ym = y0 + (y1 - y0) * fy
    return [
        (x0, xm, y0, ym),
        (xm, x1, y0, ym),
        (x0, xm, ym, y1),
        (xm, x1, ym, y1),
    ]


_SPLIT_FRACTIONS = [
    (0.5, 0.5),
    (0.5703, 0.5),
    (0.5, 0.5703),
    (0.4297, 0.5),
    (0.5, 0.4297),
    (0.5703, 0.4297),
    (0.4297, 0.5703),
]


def _newton_refine(cf, lam0, rect, max_iter=80):
    """Plain Newton from the cell centre; returns None when the iteration
    escapes far outside the cell."""
    x0, x1, y0, y1 = rect
    diam = max(x1 - x0, y1 - y0)
    lam = complex(lam0)
    for _ in range(max_iter):
        d, dd, s = cf.value_and_deriv(lam)
        if abs(dd) < 1e-300:
            lam += diam * (1e-4 + 1e-4j)
            continue
        step = d / dd
        lam -= step
        if abs(step) < 1e-14 * (1.0 + abs(lam)):
            break
        if (
            lam.real < x0 - 2 * diam
            or lam.real > x1 + 2 * diam
            or lam.imag < y0 - 2 * diam
            or lam.imag > y1 + 2 * diam
        ):
            return None
    return lam


def _secant_on_derivative(cf, lam0, max_iter=60):
    """Polish a double root by driving Delta' to zero (secant iteration)."""
    la = complex(lam0)
    lb = la + 1e-6 * (1.0 + abs(la))
    _, da, _ = cf.value_and_deriv(la)
    for _ in range(max_iter):
        _, db, _ = cf.value_and_deriv(lb)
        denom = db - da
        if abs(denom) < 1e-300:
            break
        step = db * (lb - la) / denom
        la, da = lb, db
        lb = lb - step
        if abs(step) < 1e-14 * (1.0 + abs(lb)):
            break
    return lb


def _multiplicity(scan, center, radius=1e-3):
    for attempt in range(4):
        r = radius * (1.0 + 0.37 * attempt)
        try:
            total = scan.arc_phase(center, r, 0.0, 2 * np.pi)
            return int(round(total / (2 * np.pi)))
        except _EdgeNearZero:
            continue
    return -1


def find_eigenvalues(
    cf: CharFunction,
    window,
    tol: float = 1e-9,
    degeneracy: DegeneracyResult | None = None,
    max_cells: int = 10**5,
    min_cell: float = 0.1,
    merge_radius: float = 1e-6,
) -> SpectrumReport:
    """Enumerate the zeros of Delta inside a rectangle.

    ``window`` is (re_min, re_max, im_min, im_max).  The boundary is nudged
    outward when it passes too close to a zero; quadrisection proceeds until
    cells have winding <= 2 and diameter below ``min_cell``; roots are
    Newton-polished to |Delta| < tol * scale; multiplicities come from the
    winding of a small circle around each refined root, and roots within
    ``merge_radius`` merge with summed multiplicity.
    """
    if degeneracy is None:
        degeneracy = detect_degenerate(cf)
    if degeneracy.degenerate:
        raise ApplicabilityError(
            "characteristic determinant vanishes identically; no discrete spectrum"
        )
    scan = _Scan(cf)
    rect = tuple(float(v) for v in window)
    if rect[0] >= rect[1] or rect[2] >= rect[3]:
        raise ValueError("window must satisfy re_min < re_max and im_min < im_max")

    report = SpectrumReport(window=rect)

    # nudge the outer boundary off any zeros
    w_total = None
    for attempt in range(8):
        try:
            w_total = scan.winding(rect)
            break
        except _EdgeNearZero:
            cx = (rect[0] + rect[1]) / 2
            cy = (rect[2] + rect[3]) / 2
            grow = 1.004 + 0.003 * attempt
            hx = (rect[1] - rect[0]) / 2 * grow
            hy = (rect[3] - rect[2]) / 2 * grow
            rect = (cx - hx, cx + hx, cy - hy, cy + hy)
            report.window_nudged = True
    if w_total is None:
        raise SearchBudgetError("window boundary could not be moved off a zero")
    report.window = rect
    report.total_winding = w_total
    report.cells.append((rect, w_total))

    roots: list[Eigenvalue] = []
    stack = [(rect, w_total)]
    cells_used = 1
    while stack:
        cell, w = stack.pop()
        if w == 0:
            continue
        if cells_used > max_cells:
            report.eigenvalues = _merge_roots(roots, merge_radius)
            report.n_evals = cf.n_evals
            raise SearchBudgetError(
                f"cell budget {max_cells} exceeded", partial=report
            )
        x0, x1, y0, y1 = cell
        diam = max(x1 - x0, y1 - y0)
        if w <= 2 and diam < min_cell:
            recorded = _attempt_refine(cf, scan, cell, w, tol, roots)
            if recorded:
                continue
            if diam < 1e-6:
                _record_share(cf, cell, w, roots)
                continue
        if w > 2 and diam < 1e-6:
            _record_share(cf, cell, w, roots)
            continue
        # subdivide, retrying with shifted split lines when a zero sits on one
        attempts = []
        done = False
        for fx, fy in _SPLIT_FRACTIONS:
            children = _split_rect(cell, fx, fy)
            try:
                ws = [scan.winding(ch) for ch in children]
            except _EdgeNearZero:
                continue
            attempts.append((children, ws))
            if sum(ws) != w:
                continue
            for ch, cw in zip(children, ws):
                report.cells.append((ch, cw))
                cells_used += 1
                if cw:
                    stack.append((ch, cw))
            done = True
            break
        if not done and len(attempts) >= 2:
            # every usable split disagrees with the parent's count; child
            # edges sample more densely, so when the splits agree among
            # themselves the parent's winding was aliased -- trust them.
            sums = [sum(ws) for _, ws in attempts]
            if len(set(sums)) == 1:
                children, ws = attempts[0]
                for ch, cw in zip(children, ws):
                    report.cells.append((ch, cw))
                    cells_used += 1
                    if cw:
                        stack.append((ch, cw))
                done = True
        if not done:
            # a zero sits on an inherited edge that no split line can avoid;
            # for a small cell, polish and record this cell's share of it
            # (sibling shares merge later)
            if diam < min_cell:
                lam = _newton_refine(cf, complex((x0 + x1) / 2, (y0 + y1) / 2), cell)
                if lam is not None and _multiplicity(scan, lam) >= 2:
                    lam = _secant_on_derivative(cf, lam)
                _record_share(cf, cell, w, roots, lam)
            else:
                raise SearchBudgetError(
                    f"could not subdivide cell {cell} without hitting a zero"
                )

    report.eigenvalues = _merge_roots(roots, merge_radius)
    report.n_evals = cf.n_evals
    report.consistent = (
        sum(ev.multiplicity for ev in report.eigenvalues) == report.total_winding
    )
    return report


def _record_share(cf, cell, w, roots, lam=None):
    """Record a cell's share of a root that sits on or near its boundary;
    shares of the same zero held by sibling cells merge afterwards."""
    x0, x1, y0, y1 = cell
    if lam is None:
        lam = complex((x0 + x1) / 2, (y0 + y1) / 2)
    d, s = cf.value(lam, tight=True)
    roots.append(Eigenvalue(lam, w, abs(d) / s))


def _attempt_refine(cf, scan, cell, w, tol, roots) -> bool:
    """Newton-polish the cell's root; returns False to request subdivision."""
    x0, x1, y0, y1 = cell
    center = complex((x0 + x1) / 2, (y0 + y1) / 2)
    lam = _newton_refine(cf, center, cell)
    if lam is None:
        return False
    m = _multiplicity(scan, lam)
    if m >= 2:
        lam = _secant_on_derivative(cf, lam)
        m = _multiplicity(scan, lam)
    if m < w:
        return False  # several distinct roots inside; subdivide further
    d, s = cf.value(lam, tight=True)
    if abs(d) > tol * s:
        return False
    # m == w: the cell's root, fully inside.  m > w: a root sitting on the
    # cell boundary whose winding is shared with neighbours; record this
    # cell's share and let the merge step reassemble the multiplicity.
    roots.append(Eigenvalue(lam, w, abs(d) / s))
    return True


def _sort_key(lam: complex):
    # snap negligible parts so that e.g. a real negative eigenvalue with a
    # -1e-16 imaginary residue sorts at angle +pi, not -pi
    snap = 1e-9 * (1.0 + abs(lam))
    re = 0.0 if abs(lam.real) < snap else lam.real
    im = 0.0 if abs(lam.imag) < snap else lam.imag
    return (abs(lam), np.angle(complex(re, im)))


def _merge_roots(roots, merge_radius):
    merged: list[Eigenvalue] = []
    for ev in sorted(roots, key=lambda e: _sort_key(e.lam)):
        for i, prev in enumerate(merged):
            if abs(prev.lam - ev.lam) <= merge_radius:
                merged[i] = Eigenvalue(
                    prev.lam,
                    prev.multiplicity + ev.multiplicity,
                    max(prev.residual, ev.residual),
                )
                break
        else:
            merged.append(ev)
    merged.sort(key=lambda e: _sort_key(e.lam))
    return merged


def default_window(problem: SystemProblem, cf: CharFunction, n_target: int = 5):
    """Heuristic search window: |Re lam| up to 2 pi (n_target + 1) / min|b|,
    with the imaginary half-height doubled until the boundary stays clearly
    away from zeros (reported, never silently truncated)."""
    b_min = min(abs(w) for w in problem.blocks.weights)
    re_half = 2 * np.pi * (n_target + 1) / b_min
    im_half = 1.0
    for _ in range(6):
        rect = (-re_half, re_half, -im_half, im_half)
        xs = np.linspace(rect[0], rect[1], 41)
        top = xs + 1j * rect[3]
        bot = xs + 1j * rect[2]
        d, _, s = cf.eval_many(np.concatenate([top, bot]))
        if np.min(np.abs(d) / s) > 1e-6:
            return rect
        im_half *= 2
    return (-re_half, re_half, -im_half, im_half)
