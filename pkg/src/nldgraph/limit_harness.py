"""Nonrelativistic limit sweeps: NLD bound states along c -> infinity versus the NLS state.

Along a schedule (c_n, omega_n) with omega_n - m c_n^2 fixed, the first
component of the NLD bound state should approach the NLS bound state u of

    -u'' - 2m chi_K |u|^(p-2) u = lambda u

and the second component should vanish like 1/c.  With

    b_n = (mc_n^2 + omega_n) / c_n^2,  a_n = (mc_n^2 - omega_n) b_n,

the limit is (a_n, b_n) -> (-lambda, 2m) exactly when omega_n = mc_n^2 + lambda/(2m)
(the ``half`` convention).  The ``paper`` convention omega_n = mc_n^2 + lambda/m
gives a_n -> -2 lambda instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import ExpTail, ScalarField, core_mass, fmt, h1_norm, make_grids
from .errors import ValidationError
from .nld_solver import NLDProblem, continuation_in_c, lift_from_nls
from .nls_solver import NLSProblem, pairing_dual_norm, pairing_vector, probe_directions, solve_newton_nls

CONVENTIONS = ("half", "paper")
SWEEP_COLUMNS = ["n", "c", "omega", "a_n", "b_n", "residual", "h1_psi2", "h1_diff", "h1_psi1", "action", "core_mass"]


@dataclass(frozen=True)
class LimitSchedule:
    m: float
    lam: float
    c: tuple
    omega: tuple
    convention: str = "half"

    @property
    def shift(self) -> float:
        """omega_n - m c_n^2."""
        return self.lam / (2 * self.m) if self.convention == "half" else self.lam / self.m

    def omega_of(self, c: float) -> float:
        return self.m * c * c + self.shift

    @property
    def b(self) -> tuple:
        return tuple((self.m * c * c + w) / (c * c) for c, w in zip(self.c, self.omega))

    @property
    def a(self) -> tuple:
        return tuple((self.m * c * c - w) * b for c, w, b in zip(self.c, self.omega, self.b))


def make_schedule(m: float, lam: float, c_list, convention: str = "half") -> LimitSchedule:
    if convention not in CONVENTIONS:
        raise ValidationError(f"limit convention must be one of {CONVENTIONS}, got {convention!r}")
    if not m > 0:
        raise ValidationError("m must be positive")
    if not lam < 0:
        raise ValidationError(f"lambda must be negative, got {lam}")
    cs = tuple(float(c) for c in c_list)
    if not cs:
        raise ValidationError("empty c list")
    if any(not c > 0 for c in cs) or any(b <= a for a, b in zip(cs, cs[1:])):
        raise ValidationError("c values must be positive and strictly increasing")
    s = LimitSchedule(m, lam, cs, (), convention)
    omegas = tuple(s.omega_of(c) for c in cs)
    for c, w in zip(cs, omegas):
        if not w > -m * c * c:
            raise ValidationError(f"omega = {w} at c = {c} leaves the gap (-{m * c * c}, {m * c * c})")
    return LimitSchedule(m, lam, cs, omegas, convention)


@dataclass
class SweepRecord:
    n: int
    c: float
    omega: float
    a_n: float
    b_n: float
    residual: float
    h1_psi2: float
    h1_diff: float
    h1_psi1: float
    action: float
    core_mass: float
    pairing_sup: float = math.nan  # sup of <A_n(psi1_n)|phi> over the unit ball of the discrete H^1
    pairing_probe: float = math.nan  # max over the fixed probe set
    damped: bool = False

    def row(self) -> list[str]:
        return [str(self.n)] + [fmt(getattr(self, k)) for k in SWEEP_COLUMNS[1:]]


@dataclass
class SweepResult:
    records: list
    slope: float | None
    dropped_first: bool
    nls: object
    schedule: LimitSchedule
    failure_index: int | None = None
    error: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def diff_strictly_decreasing(self) -> bool:
        d = [r.h1_diff for r in self.records]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def c_times_psi2(self) -> list[float]:
        return [r.c * r.h1_psi2 for r in self.records]


def first_component(psi) -> ScalarField:
    tails = {h: ExpTail(tuple(((a1,), k) for (a1, _), k in t.terms)) for h, t in psi.tails.items()}
    return ScalarField(psi.layout, psi.psi1, tails)


def aligned(f: ScalarField, u: ScalarField) -> ScalarField:
    """f times the unit phase that makes its weighted inner product with u real and positive."""
    z = np.vdot(u.values, f.layout.node_weights * f.values)
    return f.scaled(np.conj(z) / abs(z)) if abs(z) > 0 else f


def fit_slope(cs, values) -> float | None:
    if len(cs) < 2:
        return None
    return float(np.polyfit(np.log(cs), np.log(values), 1)[0])


def run_sweep(schedule: LimitSchedule, graph, p: float, h: float, tol: float = 1e-10,
              probe_seed: int = 0, n_probes: int = 50, max_iter: int = 50) -> SweepResult:
    """Solve NLS once, then continue the NLD state from the largest c downwards.

    Records are returned in increasing c.  The slope of log ||psi2||_H1 against
    log c is fitted by least squares; the smallest-c point is left out when
    its Newton solve needed damping or a halved c-step.
    """
    if not 2 < p < 6:
        raise ValidationError(f"limit sweeps need 2 < p < 6, got {p}")
    if not graph.bounded_edges:
        raise ValidationError("limit sweeps need a nonempty compact core")
    if not graph.halflines:
        raise ValidationError("limit sweeps need at least one half-line")
    m, lam = schedule.m, schedule.lam
    grids = make_grids(graph, h)
    nls = solve_newton_nls(NLSProblem(graph, m, lam, p, alpha=2 * m, grids=grids), tol=tol)
    u = nls.u

    def family(c):
        return NLDProblem(graph, m, c, schedule.omega_of(c), p, grids=grids)

    cs = list(schedule.c)[::-1]
    top = family(cs[0])
    cont = continuation_in_c(family, cs, lift_from_nls(u, top), tol=tol, max_iter=max_iter)
    kappa = math.sqrt(-lam)
    probes = probe_directions(u.layout, kappa, n_probes, probe_seed)
    by_c = dict(zip(cs, zip(cont.states, cont.halved)))
    records = []
    for n, (c, w, a, b) in enumerate(zip(schedule.c, schedule.omega, schedule.a, schedule.b)):
        if c not in by_c:
            continue
        bs, halved = by_c[c]
        psi1 = aligned(first_component(bs.psi), u)
        diff = ScalarField(u.layout, psi1.values - u.values,
                           {hn: psi1.tails[hn] - u.tails[hn] for hn in u.tails})
        g = pairing_vector(ScalarField(u.layout, psi1.values.real, psi1.tails), a, b, p, kappa)
        records.append(SweepRecord(
            n=n, c=c, omega=w, a_n=a, b_n=b,
            residual=bs.residual_norm,
            h1_psi2=h1_norm(bs.psi.component(2)),
            h1_diff=h1_norm(diff),
            h1_psi1=h1_norm(psi1),
            action=bs.action,
            core_mass=core_mass(bs.psi, p),
            pairing_sup=pairing_dual_norm(ScalarField(u.layout, psi1.values.real, psi1.tails), a, b, p, kappa),
            pairing_probe=float(max(abs(g @ phi) for phi in probes)),
            damped=bool(bs.diagnostics.get("damped")) or halved,
        ))
    fit = records
    dropped = False
    if len(records) > 2 and records[0].damped:
        fit, dropped = records[1:], True
    slope = fit_slope([r.c for r in fit], [r.h1_psi2 for r in fit])
    failure = None
    if cont.failure_index is not None:
        failure = schedule.c.index(cs[cont.failure_index])
    return SweepResult(records, slope, dropped, nls, schedule, failure, cont.error)


def nonzero_floor(records) -> float:
    """Smallest ||psi1||_H1 along the sweep."""
    if not records:
        raise ValidationError("no records")
    return min(r.h1_psi1 for r in records)


def write_sweep_csv(result: SweepResult, fh) -> None:
    fh.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in result.records:
        fh.write(",".join(r.row()) + "\n")
    fh.write(f"slope,{'none' if result.slope is None else fmt(result.slope)}\n")
