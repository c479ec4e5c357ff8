"""Orchestration of the end-to-end runs shared by the CLI and the service.

Every pipeline takes a problem plus plain options and returns a
``PipelineResult`` holding a JSON-ready report and named CSV tables.  The
CLI writes these to files; the HTTP service returns them verbatim.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np

from . import rootspace
from .errors import ApplicabilityError, StructureError
from .evolve import check_asymptotics
from .model import SystemProblem, problem_to_json, validate
from .numcore import Tolerance
from .regularity import (
    adjoint_bc,
    classify,
    dissipativity,
    selfadjoint_T_pm,
    splitting_check,
)
from .spectrum import (
    CharFunction,
    default_window,
    detect_degenerate,
    find_eigenvalues,
)

__all__ = [
    "PipelineResult",
    "ValidationFailure",
    "run_classify",
    "run_spectrum",
    "run_roots",
    "run_complete",
    "run_witness",
    "run_asymptote",
    "DEFAULT_N_SCHEDULE",
]

DEFAULT_N_SCHEDULE = (1, 2, 4, 8, 16, 32, 64, 81)
_FMT = "{:.17g}"


class ValidationFailure(Exception):
    def __init__(self, issues):
        super().__init__("; ".join(issues))
        self.issues = issues


@dataclass
class PipelineResult:
    report: dict
    tables: dict = field(default_factory=dict)


def _stamp(report: dict) -> dict:
    report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return report


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _require_valid(problem: SystemProblem, tol: Tolerance):
    rep = validate(problem, tol)
    if not rep.ok:
        raise ValidationFailure(rep.issues)
    return rep


def _real_weights(problem):
    return all(abs(w.imag) <= 1e-14 * abs(w) for w in problem.blocks.weights)


def run_classify(problem: SystemProblem, tol: Tolerance = Tolerance(), rule="weight"):
    """Regularity classification plus the structural side reports."""
    _require_valid(problem, tol)
    rep = classify(problem.bc, problem.blocks, tol, rule)
    out = {"problem": problem_to_json(problem), "regularity": rep.to_json()}
    try:
        out["splitting"] = splitting_check(problem.bc, problem.blocks, tol, rule).to_json()
    except StructureError:
        out["splitting"] = None
    if _real_weights(problem):
        tpm = selfadjoint_T_pm(problem.bc, problem.blocks)
        diss = dissipativity(problem.bc, problem.blocks, tol)
        out["selfadjoint_weights"] = {
            "det_t_plus": _c(tpm.det_plus),
            "det_t_minus": _c(tpm.det_minus),
            "boundary_form": diss["verdict"],
            "selection_consistent": diss["selection_consistent"],
        }
    else:
        out["selfadjoint_weights"] = None
    adj = adjoint_bc(problem.bc, problem.blocks, tol)
    adj_rep = classify(adj, problem.blocks.conjugate(), tol, rule)
    out["adjoint"] = {
        "C": [[_c(z) for z in row] for row in adj.C],
        "D": [[_c(z) for z in row] for row in adj.D],
        "regularity": adj_rep.to_json(),
        "duality_consistent": rep.weakly_regular == adj_rep.weakly_regular,
    }
    table = ["sector_lo,sector_hi,z_re,z_im,det_re,det_im,abs_det_relative,nonzero"]
    for rec in rep.sector_records:
        table.append(
            ",".join(
                [
                    _FMT.format(rec["lo"]),
                    _FMT.format(rec["hi"]),
                    _FMT.format(rec["z"].real),
                    _FMT.format(rec["z"].imag),
                    _FMT.format(rec["det"].real),
                    _FMT.format(rec["det"].imag),
                    _FMT.format(rec["abs_det_relative"]),
                    str(int(rec["nonzero"])),
                ]
            )
        )
    return PipelineResult(_stamp(out), {"sectors.csv": table})


def _spectrum_core(problem, window, tol, seed):
    cf = CharFunction(problem)
    deg = detect_degenerate(cf, seed=seed)
    if window is None:
        window = default_window(problem, cf)
    rep = None
    if not deg.degenerate:
        rep = find_eigenvalues(cf, window, tol=tol.rel * 10 if tol.rel else 1e-9)
    return cf, deg, window, rep


def run_spectrum(
    problem: SystemProblem,
    window=None,
    tol: Tolerance = Tolerance(),
    seed: int = 7,
):
    """Degeneracy check plus eigenvalue enumeration in a window."""
    _require_valid(problem, tol)
    cf, deg, window, rep = _spectrum_core(problem, window, tol, seed)
    out = {
        "problem": problem_to_json(problem),
        "method": cf.method,
        "degeneracy": deg.to_json(),
        "window": list(window),
    }
    tables = {}
    if rep is not None:
        out["spectrum"] = rep.to_json()
        tables["eigenvalues.csv"] = list(rep.csv_rows())
    else:
        out["spectrum"] = None
    return PipelineResult(_stamp(out), tables)


def run_roots(
    problem: SystemProblem,
    window=None,
    grid_points: int = rootspace.DEFAULT_GRID_POINTS,
    tol: Tolerance = Tolerance(),
    seed: int = 7,
):
    """Spectrum plus root-function chains (summaries and sampled values)."""
    _require_valid(problem, tol)
    cf, deg, window, rep = _spectrum_core(problem, window, tol, seed)
    if deg.degenerate:
        raise ApplicabilityError(
            "problem is degenerate: every lambda admits solutions; "
            "use the witness pipeline instead"
        )
    chains = rootspace.build_chains(problem, rep, grid_points)
    out = {
        "problem": problem_to_json(problem),
        "window": list(window),
        "spectrum": rep.to_json(),
        "chains": [
            {
                "lam": _c(ch.lam),
                "row": ch.j_index,
                "shift": ch.shift,
                "length": ch.length,
                "norms": [float(v) for v in ch.norms],
            }
            for ch in chains
        ],
    }
    grid = np.linspace(0.0, 1.0, grid_points)
    table = ["chain,element,x" + "".join(f",re_{k},im_{k}" for k in range(problem.n))]
    stride = max(1, (grid_points - 1) // 64)
    for ci, ch in enumerate(chains):
        for p in range(ch.length):
            for g in range(0, grid_points, stride):
                row = [str(ci), str(p), _FMT.format(grid[g])]
                for k in range(problem.n):
                    row.append(_FMT.format(ch.functions[p][g, k].real))
                    row.append(_FMT.format(ch.functions[p][g, k].imag))
                table.append(",".join(row))
    return PipelineResult(
        _stamp(out), {"eigenvalues.csv": list(rep.csv_rows()), "chains.csv": table}
    )


def run_complete(
    problem: SystemProblem,
    window=None,
    n_schedule=DEFAULT_N_SCHEDULE,
    grid_points: int = rootspace.DEFAULT_GRID_POINTS,
    tol: Tolerance = Tolerance(),
    seed: int = 7,
    probe_seed: int = 1234,
    with_adjoint: bool = False,
):
    """Completeness evidence: criteria (n = 2), residual curves, and the
    minimality Gram data when the adjoint pipeline is requested."""
    _require_valid(problem, tol)
    out = {"problem": problem_to_json(problem)}
    if problem.n == 2:
        crit = rootspace.criteria_2x2(problem, tol)
        out["criteria"] = _criteria_json(crit)
    else:
        out["criteria"] = None

    cf, deg, window, rep = _spectrum_core(problem, window, tol, seed)
    out["window"] = list(window)
    out["degenerate"] = deg.degenerate
    grid = np.linspace(0.0, 1.0, grid_points)
    probes = rootspace.default_probes(problem.n, grid, probe_seed)
    tables = {}
    if deg.degenerate:
        lams = [2 * np.pi * k for k in range(-25, 26)]
        family = rootspace.degenerate_family(problem, lams, grid_points)
        functions = family
        out["family_size"] = len(family)
        out["spectrum"] = None
    else:
        chains = rootspace.build_chains(problem, rep, grid_points)
        functions = rootspace.chain_functions(chains)
        out["spectrum"] = rep.to_json()
        tables["eigenvalues.csv"] = list(rep.csv_rows())
        if with_adjoint:
            adj, adj_rep, adj_chains = rootspace.adjoint_chains(
                problem, rep, grid_points
            )
            gram = rootspace.minimality_metric(chains, adj_chains, grid_points)
            out["minimality"] = [
                {
                    "lam": _c(g["lam"]),
                    "dimension": g["dimension"],
                    "sigma_min": g["sigma_min"],
                    "condition": g["condition"],
                    "cross_gram_max": g["cross_gram_max"],
                }
                for g in gram
            ]
    table = rootspace.completeness_residuals(functions, probes, n_schedule, grid_points)
    out["residuals"] = table
    rows = ["N,probe_id,residual"]
    for i, N in enumerate(table["N"]):
        for key in table["residuals"]:
            rows.append(f"{N},{key},{_FMT.format(table['residuals'][key][i])}")
    tables["residuals.csv"] = rows
    return PipelineResult(_stamp(out), tables)


def _criteria_json(crit: dict) -> dict:
    def clean(v):
        if isinstance(v, complex):
            return _c(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.floating):
            return float(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v

    return clean(crit)


def run_witness(
    problem: SystemProblem,
    grid_points: int = rootspace.DEFAULT_GRID_POINTS,
    tol: Tolerance = Tolerance(),
    seed: int = 7,
):
    """Build the applicable incompleteness witness and verify its
    orthogonality against the computed root system."""
    _require_valid(problem, tol)
    witness = None
    errors = {}
    if _real_weights(problem):
        try:
            witness = rootspace.witness_T_minus(problem, grid_points, tol)
        except ApplicabilityError as exc:
            errors["t-minus-defect"] = str(exc)
    if witness is None:
        try:
            witness = rootspace.witness_dirac_degenerate(problem, grid_points, tol=tol)
        except ApplicabilityError as exc:
            errors["mirror-symmetric-defect"] = str(exc)
    if witness is None:
        raise ApplicabilityError(
            "no witness construction applies: " + "; ".join(f"{k}: {v}" for k, v in errors.items())
        )

    cf = CharFunction(problem)
    deg = detect_degenerate(cf, seed=seed)
    grid = witness.grid
    weights = rootspace.simpson_weights(grid.size, grid[1] - grid[0])
    if deg.degenerate:
        lams = [2 * np.pi * k for k in range(-25, 26)]
        functions = rootspace.degenerate_family(problem, lams, grid_points)
    else:
        window = default_window(problem, cf)
        rep = find_eigenvalues(cf, window)
        chains = rootspace.build_chains(problem, rep, grid_points)
        functions = rootspace.chain_functions(chains)
    wnorm = rootspace.grid_norm(witness.function, weights)
    max_ip = 0.0
    for _, fn in functions:
        ip = abs(rootspace.grid_inner(fn, witness.function, weights))
        max_ip = max(max_ip, ip / (rootspace.grid_norm(fn, weights) * wnorm))
    table = rootspace.completeness_residuals(
        functions, {"witness": witness.function}, [min(50, len(functions))], grid_points
    )
    out = {
        "problem": problem_to_json(problem),
        "witness_kind": witness.kind,
        "degenerate": deg.degenerate,
        "detail": _criteria_json(witness.detail),
        "functions_tested": len(functions),
        "max_normalized_inner_product": max_ip,
        "witness_residual": table["residuals"]["witness"][-1],
    }
    rows = ["x" + "".join(f",re_{k},im_{k}" for k in range(problem.n))]
    stride = max(1, (grid.size - 1) // 256)
    for g in range(0, grid.size, stride):
        row = [_FMT.format(grid[g])]
        for k in range(problem.n):
            row.append(_FMT.format(witness.function[g, k].real))
            row.append(_FMT.format(witness.function[g, k].imag))
        rows.append(",".join(row))
    return PipelineResult(_stamp(out), {"witness.csv": rows})


def run_asymptote(
    problem: SystemProblem,
    direction: complex = 1.0 + 0.0j,
    ts=(10.0, 20.0, 40.0),
    tol: Tolerance = Tolerance(),
):
    """Ray behaviour report (determinant and component tracks)."""
    _require_valid(problem, tol)
    rep = check_asymptotics(problem, direction, ts, tol=tol)
    out = {"problem": problem_to_json(problem), "asymptotics": rep.to_json()}
    rows = ["t,det_rel_error,block,diag_deviation,offdiag_deviation,condition,reliable"]
    for e in rep.entries:
        for b in e["blocks"]:
            rows.append(
                ",".join(
                    [
                        _FMT.format(e["t"]),
                        _FMT.format(e["det_rel_error"]),
                        str(b["block"]),
                        _FMT.format(b["diag_deviation"]),
                        _FMT.format(b["offdiag_deviation"]),
                        _FMT.format(b["condition"]),
                        str(int(b["reliable"])),
                    ]
                )
            )
    return PipelineResult(_stamp(out), {"asymptote.csv": rows})
