"""Command-line entry point.

Exit codes:
  0  success
  2  invalid parameters or unreadable input
  3  graph file parse error
  4  solver failure (no convergence, singular Jacobian, trivial solution, lost branch)
  5  invariant violation (a ``check`` failed or a post-solve assertion tripped)

Failures print one machine-readable line ``error,<code>,<kind>,<message>`` to
standard error.  Every CSV starts with ``# tool_version,config_hash,seed``
followed by a comment line holding the values.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dirac_op import assemble_dirac, assemble_laplacian_kirchhoff, green_defect, hermiticity_defect, vertex_conditions
from .discretize import fmt, make_grids, write_field_csv
from .errors import BranchLostError, GraphParseError, InvariantViolation, NLDGraphError, ValidationError
from .graph_core import CORPUS, load_corpus_graph, parse_graph, serialize
from .limit_harness import CONVENTIONS, make_schedule, nonzero_floor, run_sweep, write_sweep_csv
from .nld_solver import NLDProblem, criticality_probe, halfline_residual, lift_from_nls, solve_newton, virial_check
from .nls_solver import NLSProblem, halfline_residual_nls, solve_newton_nls
from .spectrum import SpectralWindow, discrete_spectrum, truncated_dirac, verify_spectral_gap

EXIT_CODES = {0: "success", 2: "validation", 3: "parse error", 4: "solver failure", 5: "invariant violation"}


def _load_graph(source: str):
    """A graph file path, or the name of a bundled corpus graph."""
    p = Path(source)
    if p.exists():
        text = p.read_text(encoding="utf-8")
        return parse_graph(text, name=p.stem), text
    if source in CORPUS or source in ("line_interval", "star_halflines"):
        g = load_corpus_graph(source)
        return g, serialize(g)
    raise ValidationError(f"graph file not found: {source}")


def _header(args, graph_text: str) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
    blob = json.dumps(cfg, sort_keys=True, default=str) + "\n" + graph_text
    h = hashlib.sha256(blob.encode("utf-8")).hexdigest()
    return f"# tool_version,config_hash,seed\n# {__version__},{h},{args.seed}\n"


def _positive(name, v):
    if not (math.isfinite(v) and v > 0):
        raise ValidationError(f"--{name} must be positive and finite, got {v}")


# ---------------------------------------------------------------------------
# subcommands; each returns the CSV body


def cmd_spectrum(args) -> str:
    g, text = _load_graph(args.graph)
    for k in ("m", "c", "h"):
        _positive(k, getattr(args, k))
    if not g.bounded_edges:
        raise ValidationError("graph has an empty compact core")
    if args.kind == "laplacian":
        if g.halflines:
            raise ValidationError("the Laplacian spectrum is only computed on compact graphs")
        op = assemble_laplacian_kirchhoff(g, make_grids(g, args.h))
        L_inf = 0.0
    elif g.halflines:
        _positive("L-inf", args.L_inf)
        if args.L_inf < 10 / (args.m * args.c):
            raise ValidationError(f"--L-inf must be at least 10/(m c) = {10 / (args.m * args.c)}")
        op, L_inf = truncated_dirac(g, args.m, args.c, args.L_inf, args.h), args.L_inf
    else:
        op, L_inf = assemble_dirac(g, make_grids(g, args.h), args.m, args.c), 0.0
    if not args.count >= 1:
        raise ValidationError("--count must be at least 1")
    res = discrete_spectrum(op, SpectralWindow(args.lo, args.hi, args.count))
    h = min(gr.h for gr in op.layout.grids.values())
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["graph", "m", "c", "h", "L_inf", "index", "eigenvalue"])
    for i, lam in enumerate(res.eigenvalues):
        w.writerow([g.name, fmt(args.m), fmt(args.c), fmt(h), fmt(L_inf), i, fmt(lam)])
    return _header(args, text) + out.getvalue()


def _nls_guess(g, m, lam, p, grids, tol):
    return solve_newton_nls(NLSProblem(g, m, lam, p, alpha=2 * m, grids=grids), tol=tol)


def cmd_solve_nld(args) -> str:
    g, text = _load_graph(args.graph)
    for k in ("m", "c", "h", "tol"):
        _positive(k, getattr(args, k))
    grids = make_grids(g, args.h) if g.bounded_edges else None
    prob = NLDProblem(g, args.m, args.c, args.omega, args.p, grids=grids)
    lam = 2 * args.m * (args.omega - prob.mc2)
    if not lam < 0:
        raise ValidationError("omega must lie below mc^2 for the nonrelativistic initial guess")
    nls = _nls_guess(g, args.m, lam, args.p, prob.grids, min(args.tol, 1e-10))
    bs = solve_newton(prob, lift_from_nls(nls.u, prob), args.tol, args.max_iter)
    out = io.StringIO()
    write_field_csv(bs.psi, out)
    out.write("omega,c,residual,action,core_mass\n")
    out.write(",".join(fmt(v) for v in (bs.omega, bs.c, bs.residual_norm, bs.action, bs.core_mass)) + "\n")
    return _header(args, text) + out.getvalue()


def cmd_solve_nls(args) -> str:
    g, text = _load_graph(args.graph)
    for k in ("m", "h", "tol"):
        _positive(k, getattr(args, k))
    if args.alpha is not None:
        _positive("alpha", args.alpha)
    prob = NLSProblem(g, args.m, args.lam, args.p, alpha=args.alpha, h=args.h)
    s = solve_newton_nls(prob, tol=args.tol, max_iter=args.max_iter)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["edge", "x", "u"])
    lay = prob.layout
    for e, gr in lay.grids.items():
        for x, v in zip(gr.nodes, lay.edge_node_values(s.u.values, e)):
            w.writerow([e, fmt(x), fmt(v)])
    if s.u.tails:
        w.writerow(["halfline", "amplitude", "decay_rate"])
        for hl in g.halflines:
            t = s.u.tails[hl.name]
            w.writerow([hl.name, fmt(t.amplitude.real), fmt(t.decay)])
    w.writerow(["lambda", "residual", "J"])
    w.writerow([fmt(args.lam), fmt(s.residual_norm), fmt(s.J_value)])
    return _header(args, text) + out.getvalue()


def _parse_c_list(s: str) -> list[float]:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"--c-list must be comma-separated numbers, got {s!r}") from None


def cmd_limit_sweep(args) -> str:
    g, text = _load_graph(args.graph)
    for k in ("m", "h", "tol"):
        _positive(k, getattr(args, k))
    sched = make_schedule(args.m, args.lam, _parse_c_list(args.c_list), args.limit_convention)
    res = run_sweep(sched, g, args.p, args.h, args.tol, probe_seed=args.seed)
    out = io.StringIO()
    write_sweep_csv(res, out)
    body = out.getvalue().splitlines(keepends=True)
    notes = [f"# dropped_first,{str(res.dropped_first).lower()}\n"]
    if res.records:
        notes.append(f"# h1_psi1_floor,{fmt(nonzero_floor(res.records))}\n")
        notes.append(f"# max_c_h1_psi2,{fmt(max(res.c_times_psi2))}\n")
    if res.failure_index is not None:
        notes.append(f"# branch_lost_at_n,{res.failure_index}\n")
    text_out = _header(args, text) + "".join(body[:-1] + notes + body[-1:])
    if res.failure_index is not None:
        _emit(text_out, args.out)
        raise BranchLostError(f"branch lost at n = {res.failure_index}: {res.error}")
    return text_out


# ---------------------------------------------------------------------------
# check


def _check_rows(name: str, seed: int):
    """(graph, check, value, threshold, passed) rows for one corpus graph."""
    g = load_corpus_graph(name)
    rng = np.random.default_rng(seed)
    rows = []

    def add(check, value, threshold, ok=None):
        rows.append((name, check, float(value), float(threshold), bool(value <= threshold if ok is None else ok)))

    grids = make_grids(g, 0.05)
    D = assemble_dirac(g, grids, 1.0, 1.0)
    Lap = assemble_laplacian_kirchhoff(g, grids)
    add("dirac_hermiticity", hermiticity_defect(D), 1e-12)
    add("laplacian_symmetry", hermiticity_defect(Lap), 1e-12)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(D.size) + 1j * rng.standard_normal(D.size)
        y = rng.standard_normal(D.size) + 1j * rng.standard_normal(D.size)
        worst = max(worst, green_defect(D, x, y))
    add("green_identity_100", worst, 1e-12)
    add("vertex_conditions_symmetric", 0.0 if all(vertex_conditions(g, v).is_symmetric() for v in g.core_vertices)
        else 1.0, 0.0)
    e0 = g.bounded_edges[0].name
    gf = g.flipped(e0)
    Df = assemble_dirac(gf, make_grids(gf, 0.05), 1.0, 1.0)
    w1 = np.linalg.eigvalsh(D.matrix if isinstance(D.matrix, np.ndarray) else D.matrix.toarray())
    w2 = np.linalg.eigvalsh(Df.matrix if isinstance(Df.matrix, np.ndarray) else Df.matrix.toarray())
    add("orientation_independence", np.max(np.abs(w1 - w2)), 1e-10)
    if g.halflines:
        rep = verify_spectral_gap(g, 1.0, 1.0, 20.0, 0.05)
        add("gap_no_inner_eigenvalue", rep.in_gap.size, 0)
        add("gap_margin_doubling", abs(rep.margin - rep.margin_doubled), 1e-6)
        grids = make_grids(g, 0.02)
        c, lam, p = 10.0, -1.0, 4.0
        nls = solve_newton_nls(NLSProblem(g, 1.0, lam, p, grids=grids))
        add("nls_residual", nls.residual_norm, 1e-10)
        xs = np.array([0.0, 1.0, 5.0])
        add("nls_tail_exactness", np.max(np.abs(halfline_residual_nls(nls.u, nls.problem, xs))), 1e-12)
        prob = NLDProblem(g, 1.0, c, c * c + lam / 2, p, grids=grids)
        bs = solve_newton(prob, lift_from_nls(nls.u, prob))
        add("nld_residual", bs.residual_norm, 1e-10)
        add("nld_core_mass_positive", bs.core_mass, 0.0, bs.core_mass > 0)
        add("nld_virial", virial_check(bs), 1e-8)
        add("nld_criticality_50", criticality_probe(bs, 50, seed).max_fd, 1e-6)
        k = prob.closure.decay
        hr = halfline_residual(bs.psi, prob, np.array([0.0, 1 / k, 5 / k]))
        add("nld_tail_exactness", np.max(np.abs(hr)), 1e-12)
    return rows


def cmd_check(args) -> str:
    rows = []
    for name in CORPUS:
        rows += _check_rows(name, args.seed)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["graph", "check", "value", "threshold", "status"])
    for name, check, v, t, ok in rows:
        w.writerow([name, check, fmt(v), fmt(t), "pass" if ok else "FAIL"])
    failed = sum(not r[4] for r in rows)
    w.writerow(["summary", "checks", len(rows), failed, "pass" if not failed else "FAIL"])
    text = _header(args, "\n".join(serialize(load_corpus_graph(n)) for n in CORPUS)) + out.getvalue()
    if failed:
        _emit(text, args.out)
        raise InvariantViolation(f"{failed} of {len(rows)} checks failed")
    return text


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    epilog = "exit codes:\n" + "\n".join(f"  {k}  {v}" for k, v in EXIT_CODES.items())
    ap = argparse.ArgumentParser(
        prog="nldgraph",
        description="Dirac and Schroedinger bound states on metric graphs with Kirchhoff-type vertex conditions.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        if graph:
            p.add_argument("--graph", required=True, help="graph file, or the name of a bundled graph")
        p.add_argument("--seed", type=int, default=0, help="seed for random probe directions (default 0)")
        p.add_argument("--out", default=None, help="output file (default: standard output)")
        p.epilog = epilog
        p.formatter_class = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("spectrum", help="eigenvalues of the Dirac operator or the Kirchhoff Laplacian")
    common(p)
    p.add_argument("--kind", choices=("dirac", "laplacian"), default="dirac")
    p.add_argument("--m", type=float, default=1.0, help="mass m > 0")
    p.add_argument("--c", type=float, default=1.0, help="speed of light c > 0")
    p.add_argument("--h", type=float, default=0.01, help="target mesh width")
    p.add_argument("--L-inf", dest="L_inf", type=float, default=20.0, help="half-line truncation length")
    p.add_argument("--lo", type=float, default=-1e12, help="lower end of the spectral window")
    p.add_argument("--hi", type=float, default=1e12, help="upper end of the spectral window")
    p.add_argument("--count", type=int, default=20, help="number of eigenvalues nearest the window centre")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("solve-nld", help="nonlinear Dirac bound state at frequency omega")
    common(p)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--omega", type=float, required=True, help="frequency inside (-mc^2, mc^2)")
    p.add_argument("--p", type=float, required=True, help="nonlinearity power p > 2")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=50)
    p.set_defaults(func=cmd_solve_nld)

    p = sub.add_parser("solve-nls", help="NLS bound state at frequency lambda < 0")
    common(p)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None, help="coupling (default 2m)")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=50)
    p.set_defaults(func=cmd_solve_nls)

    p = sub.add_parser("limit-sweep", help="nonrelativistic limit along a list of c values")
    common(p)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--c-list", dest="c_list", default="4,8,16,32,64", help="increasing c values, comma separated")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--limit-convention", dest="limit_convention", choices=CONVENTIONS, default="half",
                   help="omega - mc^2 = lambda/(2m) (half) or lambda/m (paper)")
    p.set_defaults(func=cmd_limit_sweep)

    p = sub.add_parser("check", help="invariant suite on the bundled graphs")
    common(p, graph=False)
    p.set_defaults(func=cmd_check)
    return ap


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _kind(exc: Exception) -> str:
    if isinstance(exc, GraphParseError):
        return exc.kind
    name = type(exc).__name__
    return "".join("_" + ch.lower() if ch.isupper() else ch for ch in name).lstrip("_")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _emit(args.func(args), args.out)
    except NLDGraphError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error,{exc.exit_code},{_kind(exc)},{msg}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error,2,{_kind(exc)},{exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
