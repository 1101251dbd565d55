"""Bound states of the nonlinear Dirac equation with nonlinearity on the compact core.

The stationary equation at frequency omega is

    D psi - omega psi = chi_K |psi|^(p-2) psi,

with D = -i c sigma_1 d/dx + m c^2 sigma_3 and Kirchhoff-type vertex
conditions.  On a half-line the equation is linear and its decaying solution
is known in closed form,

    psi^1 = A e^(-k x),  psi^2 = i r A e^(-k x),
    k = sqrt(m^2 c^4 - omega^2) / c,  r = sqrt((mc^2 - omega) / (mc^2 + omega)),

so every half-line contributes i r psi^1(v) to the sum law at its vertex and
drops out of the discrete system.

Unknowns use the real gauge psi = (u, i w) with u, w real.  The discrete
system is the gradient of the discrete action

    L = 1/2 x^T (R - omega W + C) x - F(x) / p,

R being the real form of the weighted Dirac matrix, W the quadrature weights,
C the half-line closure and F the split-cell core integral of |psi|^p, so the
Jacobian is symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dirac_op import assemble_dirac
from .discretize import ExpTail, Layout, ScalarField, SpinorField, core_mass, h1_norm, make_grids
from .errors import (
    BranchLostError,
    ConvergedToZeroError,
    InvariantViolation,
    MaxIterationsError,
    SingularJacobianError,
    SolverError,
    ValidationError,
)

NONTRIVIAL_MASS = 1e-10
SMALL = 1e-14
VIRIAL_EPS = 1e-30


@dataclass(frozen=True)
class HalflineClosure:
    ratio: float
    decay: float


def halfline_closure(m: float, c: float, omega: float) -> HalflineClosure:
    mc2 = m * c * c
    if not abs(omega) < mc2:
        raise ValidationError(f"omega = {omega} is outside the gap (-{mc2}, {mc2})")
    return HalflineClosure(math.sqrt((mc2 - omega) / (mc2 + omega)), math.sqrt(mc2 * mc2 - omega * omega) / c)


@dataclass
class NLDProblem:
    g: object
    m: float
    c: float
    omega: float
    p: float
    h: float = 0.01
    grids: dict | None = None

    def __post_init__(self):
        if not self.g.bounded_edges:
            raise ValidationError("NLD bound states need a nonempty compact core")
        if not self.g.halflines:
            raise ValidationError("NLD bound states need at least one half-line")
        if not (self.m > 0 and self.c > 0):
            raise ValidationError("m and c must be positive")
        if not self.p > 2:
            raise ValidationError(f"p must exceed 2, got {self.p}")
        self.closure = halfline_closure(self.m, self.c, self.omega)
        if self.grids is None:
            self.grids = make_grids(self.g, self.h)
        self.layout = Layout(self.g, self.grids)
        lay = self.layout
        op = assemble_dirac(self.g, lay, self.m, self.c)
        node_diag = np.zeros(lay.size)
        node_diag[: lay.n_nodes] = self.c * self.closure.ratio * lay.halfline_count
        shift = sp.diags(node_diag - self.omega * lay.weights)
        self.dirac = op
        self.linear_complex = (op.weighted + shift).tocsr()
        self.linear_real = (op.real_form() + shift).tocsr()

    @property
    def mc2(self) -> float:
        return self.m * self.c * self.c


@dataclass
class BoundState:
    psi: SpinorField
    omega: float
    m: float
    c: float
    p: float
    residual_norm: float
    action: float
    core_mass: float
    problem: NLDProblem = field(repr=False)
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# nonlinearity on the split cells


def _split(prob, a1, b):
    """Per-half-cell densities rho_L, rho_R from |psi1|^2 at nodes and |psi2|^2 at midpoints."""
    L, R, K, H = prob.layout.cells
    bk = b[K]
    rl = np.where(L >= 0, a1[np.maximum(L, 0)], 0.0) + bk
    rr = np.where(R >= 0, a1[np.maximum(R, 0)], 0.0) + bk
    return L, R, K, H, rl, rr


def _nonlinear_gradient(prob, psi1, psi2):
    """Gradient of F/p: nodes get (h/2) rho^q psi1, midpoints (h/2)(rho_L^q + rho_R^q) psi2."""
    q = (prob.p - 2) / 2
    L, R, K, H, rl, rr = _split(prob, np.abs(psi1) ** 2, np.abs(psi2) ** 2)
    fl, fr = H / 2 * rl ** q, H / 2 * rr ** q
    n = prob.layout.n_nodes
    g1 = np.zeros(n, dtype=psi1.dtype)
    ok = L >= 0
    np.add.at(g1, L[ok], fl[ok] * psi1[L[ok]])
    ok = R >= 0
    np.add.at(g1, R[ok], fr[ok] * psi1[R[ok]])
    g2 = np.zeros(prob.layout.n_mids, dtype=psi2.dtype)
    np.add.at(g2, K, (fl + fr) * psi2[K])
    return g1, g2


def _nonlinear_hessian(prob, u, w):
    """Hessian of F/p in the real gauge (symmetric, 2x2 block per half cell)."""
    p = prob.p
    q = (p - 2) / 2
    n = prob.layout.n_nodes
    L, R, K, H, rl, rr = _split(prob, u * u, w * w)
    rows, cols, vals = [], [], []
    for J, rho in ((L, rl), (R, rr)):
        s = H / 2
        big = rho > SMALL * SMALL
        rq = rho ** q
        rq1 = np.where(big, 2 * q * np.where(big, rho, 1.0) ** (q - 1), 0.0)
        wk = w[K]
        kk = n + K
        rows.append(kk)
        cols.append(kk)
        vals.append(s * (rq + rq1 * wk * wk))
        ok = J >= 0
        j, kj, sj = J[ok], kk[ok], s[ok]
        uj, wj, rqj, rq1j = u[j], wk[ok], rq[ok], rq1[ok]
        rows += [j, j, kj]
        cols += [j, kj, j]
        vals += [sj * (rqj + rq1j * uj * uj), sj * rq1j * uj * wj, sj * rq1j * uj * wj]
    N = prob.layout.size
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))


# ---------------------------------------------------------------------------
# residuals


def _weighted_complex(prob, psi: SpinorField) -> np.ndarray:
    g1, g2 = _nonlinear_gradient(prob, psi.psi1, psi.psi2)
    return prob.linear_complex @ psi.vector - np.concatenate([g1, g2])


def residual(psi: SpinorField, prob: NLDProblem) -> SpinorField:
    """Pointwise residual of both component equations on the staggered grid.

    Node rows: -i c (psi^2)' + (mc^2 - omega) psi^1 - |psi|^(p-2) psi^1, where at
    a vertex the half-cell balance uses the sum law with each half-line trace
    set to i r psi^1(v).  Midpoint rows: -i c (psi^1)' - (mc^2 + omega) psi^2 -
    |psi|^(p-2) psi^2.  The nonlinear term is the split-cell average.
    """
    F = _weighted_complex(prob, psi)
    return SpinorField.from_vector(prob.layout, F / prob.layout.weights)


def _wnorm(prob, F) -> float:
    return float(np.sqrt(np.sum(np.abs(F) ** 2 / prob.layout.weights)))


def residual_norm(psi: SpinorField, prob: NLDProblem) -> float:
    """Weighted L2 norm of the pointwise residual."""
    return _wnorm(prob, _weighted_complex(prob, psi))


def halfline_residual(psi: SpinorField, prob: NLDProblem, xs) -> np.ndarray:
    """Linear component equations evaluated on every tail at the points xs.

    Rows per half-line: (-i c psi2' + (mc^2 - omega) psi1, -i c psi1' - (mc^2 + omega) psi2).
    """
    mc2, om, c = prob.mc2, prob.omega, prob.c
    out = []
    for t in psi.tails.values():
        v, d = t.values(xs), t.values(xs, 1)
        out.append([-1j * c * d[1] + (mc2 - om) * v[0], -1j * c * d[0] - (mc2 + om) * v[1]])
    return np.array(out)


def closure_tails(prob: NLDProblem, psi1: np.ndarray) -> dict:
    lay, cl = prob.layout, prob.closure
    return {h.name: ExpTail.spinor(psi1[lay.vertex_index[h.v_attach]], cl.decay, cl.ratio) for h in prob.g.halflines}


def _field(prob, u, w) -> SpinorField:
    return SpinorField(prob.layout, u, 1j * w, closure_tails(prob, u))


# ---------------------------------------------------------------------------
# action


def _dirac_tail(prob, t: ExpTail) -> ExpTail:
    """(D - omega) applied to a tail, again a sum of exponentials."""
    mc2, om, c = prob.mc2, prob.omega, prob.c
    return ExpTail(tuple(((1j * c * k * a2 + (mc2 - om) * a1, 1j * c * k * a1 - (mc2 + om) * a2), k)
                         for (a1, a2), k in t.terms))


def action(psi: SpinorField, prob: NLDProblem) -> float:
    """L(psi) = 1/2 int <psi, (D - omega) psi> - 1/p int_K |psi|^p.

    The core part is the weighted quadratic form; at each vertex the half-line
    traces enter the sum law (term -i c conj(psi1(v)) psi2_h(0)) and the tail
    integrals are summed in closed form.  For tails built from the closure the
    tail integrals vanish identically.
    """
    x = psi.vector
    lay = prob.layout
    quad = np.vdot(x, (prob.dirac.weighted - prob.omega * sp.diags(lay.weights)) @ x)
    for h in prob.g.halflines:
        t = psi.tails.get(h.name)
        if t is None:
            continue
        a = psi.psi1[lay.vertex_index[h.v_attach]]
        quad += -1j * prob.c * np.conj(a) * sum(c2 for (_, c2), _ in t.terms)
        quad += _dirac_tail(prob, t).inner(t)
    return float(0.5 * quad.real - core_mass(psi, prob.p) / prob.p)


def virial_check(bs: BoundState) -> float:
    """Relative defect of L = (1/2 - 1/p) int_K |psi|^p."""
    L = action(bs.psi, bs.problem)
    M = core_mass(bs.psi, bs.p)
    return abs(L - (0.5 - 1 / bs.p) * M) / max(abs(L), VIRIAL_EPS)


def random_direction(prob: NLDProblem, rng) -> SpinorField:
    """Random admissible complex direction with closure tails, unit H^1 norm."""
    lay = prob.layout
    a = rng.standard_normal(lay.n_nodes) + 1j * rng.standard_normal(lay.n_nodes)
    b = rng.standard_normal(lay.n_mids) + 1j * rng.standard_normal(lay.n_mids)
    d = SpinorField(lay, a, b, closure_tails(prob, a))
    return d.scaled(1 / h1_norm(d))


@dataclass(frozen=True)
class ProbeReport:
    max_fd: float  # central differences of the action
    max_exact: float  # Re <direction, gradient> from the weighted residual
    n: int
    seed: int
    step: float


def criticality_probe(bs: BoundState, n: int = 50, seed: int = 0, step: float = 1e-4) -> ProbeReport:
    """Directional derivatives of the action along n random unit directions."""
    prob = bs.problem
    rng = np.random.default_rng(seed)
    F = _weighted_complex(prob, bs.psi)
    fd, ex = 0.0, 0.0
    for _ in range(n):
        d = random_direction(prob, rng)
        lp = action(bs.psi + d.scaled(step), prob)
        lm = action(bs.psi - d.scaled(step), prob)
        fd = max(fd, abs(lp - lm) / (2 * step))
        ex = max(ex, abs(np.vdot(d.vector, F).real))
    return ProbeReport(fd, ex, n, seed, step)


# ---------------------------------------------------------------------------
# Newton


def lift_from_nls(u: ScalarField, prob: NLDProblem) -> SpinorField:
    """psi1 = u, psi2 = -i c u' / (mc^2 + omega), tails from the closure."""
    lay = prob.layout
    vals = np.asarray(u.values)
    if vals.shape != (lay.n_nodes,):
        raise ValueError("u does not live on the problem's grid")
    psi2 = -1j * prob.c * lay.node_derivative(vals) / (prob.mc2 + prob.omega)
    return SpinorField(lay, vals, psi2, closure_tails(prob, vals.astype(complex)))


def _gauge(psi: SpinorField):
    """Rotate the global phase so psi1 is real at its largest entry; return (u, w)."""
    a = psi.psi1
    j = int(np.argmax(np.abs(a))) if a.size else 0
    ph = np.exp(-1j * np.angle(a[j])) if a.size and abs(a[j]) > 0 else 1.0
    return (ph * a).real.copy(), (-1j * ph * psi.psi2).real.copy()


def _real_residual(prob, x):
    n = prob.layout.n_nodes
    g1, g2 = _nonlinear_gradient(prob, x[:n], x[n:])
    return prob.linear_real @ x - np.concatenate([g1, g2])


def _factor(J, diag):
    try:
        lu = spla.splu(J.tocsc())
    except RuntimeError as exc:
        cond = np.linalg.cond(J.toarray()) if J.shape[0] <= 3000 else math.inf
        raise SingularJacobianError(f"singular Jacobian (condition estimate {cond:.3g})",
                                    dict(diag, condition=cond)) from exc
    return lu


def solve_newton(prob: NLDProblem, psi0: SpinorField, tol: float = 1e-10, max_iter: int = 50,
                 damping: bool = True) -> BoundState:
    """Damped Newton iteration in the real gauge.

    Armijo backtracking on the squared residual when ``damping`` is set.
    Raises MaxIterationsError, SingularJacobianError or ConvergedToZeroError.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if psi0.psi1.shape != (prob.layout.n_nodes,) or psi0.psi2.shape != (prob.layout.n_mids,):
        raise ValidationError("initial field does not live on the problem's grid")
    u, w = _gauge(psi0)
    x = np.concatenate([u, w])
    n = prob.layout.n_nodes
    diag = {"residuals": [], "steps": [], "damped": False}
    F = _real_residual(prob, x)
    r = _wnorm(prob, F)
    it = 0
    while True:
        diag["residuals"].append(r)
        if r <= tol:
            break
        if it >= max_iter:
            raise MaxIterationsError(f"no convergence after {max_iter} iterations (residual {r:.3e})", diag)
        J = prob.linear_real - _nonlinear_hessian(prob, x[:n], x[n:])
        dx = _factor(J, diag).solve(-F)
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError("Newton step is not finite", dict(diag, condition=math.inf))
        t = 1.0
        while True:
            Fn = _real_residual(prob, x + t * dx)
            rn = _wnorm(prob, Fn)
            if not damping or rn ** 2 <= (1 - 1e-4 * t) * r ** 2 or t < 2 ** -20:
                break
            t /= 2
            diag["damped"] = True
        x = x + t * dx
        F, r = Fn, rn
        diag["steps"].append(float(t * np.sqrt(np.dot(prob.layout.weights, dx * dx))))
        it += 1
    diag["iterations"] = it
    psi = _field(prob, x[:n], x[n:])
    mass = core_mass(psi, prob.p)
    if mass <= NONTRIVIAL_MASS:
        raise ConvergedToZeroError("Newton converged to the trivial solution psi = 0", diag)
    rc = residual_norm(psi, prob)
    if rc > tol * (1 + 1e-6) + 1e-13:
        raise InvariantViolation(f"complex residual {rc:.3e} exceeds tol after real-gauge solve")
    diag["complex_residual"] = rc
    return BoundState(psi, prob.omega, prob.m, prob.c, prob.p, rc, action(psi, prob), mass, prob, diag)


# ---------------------------------------------------------------------------
# continuation in c


def transfer(psi: SpinorField, prob: NLDProblem, c_prev: float) -> SpinorField:
    """Warm start at prob.c from a state at c_prev: psi2 scales like 1/c."""
    u, w = _gauge(psi)
    return _field(prob, u, w * (c_prev / prob.c))


@dataclass
class ContinuationResult:
    states: list
    failure_index: int | None = None
    halved: list = field(default_factory=list)  # per state: c-step needed halving
    error: str | None = None

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def complete(self) -> bool:
        return self.failure_index is None


def continuation_in_c(family, c_values, psi_start: SpinorField, tol: float = 1e-10, max_iter: int = 50,
                      raise_on_failure: bool = False) -> ContinuationResult:
    """Solve along a monotone c schedule, each solve warm-started from the previous.

    ``family(c)`` returns the NLDProblem at c; every problem is built (and
    validated) before any solve.  A failed step is retried once through the
    midpoint c; a second failure ends the branch and the partial result is
    returned with the failure index (or raised if ``raise_on_failure``).
    """
    cs = [float(c) for c in c_values]
    if not cs:
        raise ValidationError("empty c schedule")
    d = np.diff(cs)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValidationError("c schedule must be strictly monotone")
    probs = [family(c) for c in cs]
    res = ContinuationResult([])
    prev, c_prev = psi_start, None
    for i, prob in enumerate(probs):
        guess = prev if c_prev is None else transfer(prev, prob, c_prev)
        try:
            bs = solve_newton(prob, guess, tol, max_iter)
            halved = False
        except SolverError as first:
            bs, halved = None, True
            if c_prev is not None:
                try:
                    mid = family(0.5 * (c_prev + cs[i]))
                    bm = solve_newton(mid, transfer(prev, mid, c_prev), tol, max_iter)
                    bs = solve_newton(prob, transfer(bm.psi, prob, mid.c), tol, max_iter)
                except SolverError:
                    bs = None
            if bs is None:
                res.failure_index, res.error = i, str(first)
                if raise_on_failure:
                    raise BranchLostError(f"branch lost at c = {cs[i]}: {first}",
                                          {"failure_index": i, "partial": res}) from first
                return res
        res.states.append(bs)
        res.halved.append(halved)
        prev, c_prev = bs.psi, cs[i]
    return res
