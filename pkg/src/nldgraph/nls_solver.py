"""Bound states of -u'' - alpha chi_K |u|^(p-2) u = lambda u with Kirchhoff conditions.

Unknowns are the node values of u on the compact core.  On a half-line the
equation is linear, so u = u(v) exp(-sqrt(-lambda) x) there and the
half-line drops out of the discrete system: its derivative -sqrt(-lambda) u(v)
enters the vertex balance as a diagonal term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import ExpTail, Layout, ScalarField, make_grids
from .errors import ConvergedToZeroError, MaxIterationsError, SingularJacobianError, ValidationError

NONTRIVIAL_MASS = 1e-10
SMALL = 1e-14


@dataclass
class NLSProblem:
    g: object
    m: float
    lam: float
    p: float
    alpha: float | None = None
    h: float = 0.01
    grids: dict | None = None

    def __post_init__(self):
        if not self.g.bounded_edges:
            raise ValidationError("NLS bound states need a nonempty compact core")
        if not self.m > 0:
            raise ValidationError("m must be positive")
        if not self.lam < 0:
            raise ValidationError(f"lambda must be negative for decaying tails, got {self.lam}")
        if not self.p > 2:
            raise ValidationError(f"p must exceed 2, got {self.p}")
        if self.alpha is None:
            self.alpha = 2 * self.m
        if self.grids is None:
            self.grids = make_grids(self.g, self.h)
        self.layout = Layout(self.g, self.grids)

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.lam)

    @property
    def stiffness(self) -> sp.csr_matrix:
        """Weighted -u'' with the exact half-line closure on the vertex rows."""
        lay = self.layout
        K = lay.flux @ sp.diags(1 / lay.mid_weights) @ lay.flux.T
        return (K + sp.diags(self.kappa * lay.halfline_count)).tocsr()


@dataclass
class NLSBoundState:
    u: ScalarField
    lam: float
    residual_norm: float
    J_value: float
    problem: NLSProblem = field(repr=False)
    diagnostics: dict = field(default_factory=dict)


def _tails(prob: NLSProblem, u: np.ndarray) -> dict:
    lay = prob.layout
    return {h.name: ExpTail.scalar(u[lay.vertex_index[h.v_attach]], prob.kappa) for h in prob.g.halflines}


def _weighted_residual(prob: NLSProblem, u: np.ndarray) -> np.ndarray:
    w = prob.layout.node_weights
    return prob.stiffness @ u - w * (prob.alpha * np.abs(u) ** (prob.p - 2) + prob.lam) * u


def _norm(prob, F) -> float:
    return float(np.sqrt(np.sum(np.abs(F) ** 2 / prob.layout.node_weights)))


def residual_nls(u: ScalarField, prob: NLSProblem) -> ScalarField:
    """Pointwise residual -u'' - alpha chi_K |u|^(p-2) u - lambda u on the nodes.

    Vertex rows hold the half-cell balance, in which the Kirchhoff sum of
    outgoing derivatives appears with every half-line derivative replaced by
    -sqrt(-lambda) u(v).
    """
    F = _weighted_residual(prob, u.values)
    return ScalarField(prob.layout, F / prob.layout.node_weights)


def halfline_residual_nls(u: ScalarField, prob: NLSProblem, xs) -> np.ndarray:
    """-u'' - lambda u evaluated on every tail at the sample points xs."""
    out = []
    for t in u.tails.values():
        out.append(-t.values(xs, 2)[0] - prob.lam * t.values(xs)[0])
    return np.array(out)


def plateau(prob: NLSProblem, height: float = 1.0) -> ScalarField:
    """Constant ``height`` on the core (with matching tails)."""
    u = np.full(prob.layout.n_nodes, float(height))
    return ScalarField(prob.layout, u, _tails(prob, u))


def petviashvili(prob: NLSProblem, u0: ScalarField | None = None, max_iter: int = 500,
                 rtol: float = 1e-8) -> ScalarField:
    """Stabilised fixed-point iteration u <- M(u)^gamma L^-1 N(u) towards a positive state.

    L is the (positive definite) weighted -d^2/dx^2 - lambda with the half-line
    closure, N(u) = alpha chi_K |u|^(p-2) u, M(u) = <u, L u> / <u, N(u)> and
    gamma = (p - 1) / (p - 2).  Used as the Newton starting point.
    """
    w = prob.layout.node_weights
    Lw = (prob.stiffness - sp.diags(prob.lam * w)).tocsc()
    lu = spla.splu(Lw)
    u = np.abs(np.asarray((u0 or plateau(prob)).values, dtype=float))
    gamma = (prob.p - 1) / (prob.p - 2)
    for _ in range(max_iter):
        N = prob.alpha * w * np.abs(u) ** (prob.p - 2) * u
        den = u @ N
        if not den > 0:
            break
        v = lu.solve(N)
        un = (u @ (Lw @ u) / den) ** gamma * v
        done = np.max(np.abs(un - u)) <= rtol * np.max(np.abs(un))
        u = un
        if done:
            break
    return ScalarField(prob.layout, u, _tails(prob, u))


def default_guess(prob: NLSProblem) -> ScalarField:
    """Positive starting point: a few stabilised fixed-point sweeps from a plateau."""
    return petviashvili(prob, plateau(prob), max_iter=200, rtol=1e-6)


def _jacobian(prob, u):
    p = prob.p
    au = np.abs(u)
    d = np.where(au > SMALL, (p - 1) * au ** (p - 2), 0.0) if p < 3 else (p - 1) * au ** (p - 2)
    w = prob.layout.node_weights
    return (prob.stiffness - sp.diags(w * (prob.alpha * d + prob.lam))).tocsc()


def _lu(J, diagnostics):
    try:
        return spla.splu(J)
    except RuntimeError as exc:
        cond = np.linalg.cond(J.toarray()) if J.shape[0] <= 3000 else math.inf
        raise SingularJacobianError(f"singular Jacobian (condition estimate {cond:.3g})",
                                    dict(diagnostics, condition=cond)) from exc


def solve_newton_nls(prob: NLSProblem, u0: ScalarField | None = None, tol=1e-10, max_iter=50,
                     damping=True) -> NLSBoundState:
    """Damped Newton iteration for a nontrivial NLS bound state."""
    if u0 is None:
        u0 = default_guess(prob)
    u = np.asarray(u0.values)
    if np.iscomplexobj(u):
        if np.any(np.abs(u.imag) > 0):
            raise ValidationError("NLS solver works with real-valued u only")
        u = u.real
    u = u.astype(float).copy()
    diag = {"residuals": [], "steps": [], "damped": False}
    F = _weighted_residual(prob, u)
    r = _norm(prob, F)
    it = 0
    while True:
        diag["residuals"].append(r)
        if r <= tol:
            break
        if it >= max_iter:
            raise MaxIterationsError(f"no convergence after {max_iter} iterations (residual {r:.3e})", diag)
        lu = _lu(_jacobian(prob, u), diag)
        du = lu.solve(-F)
        t = 1.0
        while True:
            Fn = _weighted_residual(prob, u + t * du)
            rn = _norm(prob, Fn)
            if not damping or rn ** 2 <= (1 - 1e-4 * t) * r ** 2 or t < 2 ** -12:
                break
            t /= 2
            diag["damped"] = True
        u = u + t * du
        F, r = Fn, rn
        diag["steps"].append(float(t * np.sqrt(np.dot(prob.layout.node_weights, du ** 2))))
        it += 1
    diag["iterations"] = it
    w = prob.layout.node_weights
    if np.dot(w, np.abs(u) ** prob.p) <= NONTRIVIAL_MASS:
        raise ConvergedToZeroError("Newton converged to the trivial solution u = 0", diag)
    uf = ScalarField(prob.layout, u, _tails(prob, u))
    return NLSBoundState(uf, prob.lam, r, functional_J(uf, prob), prob, diag)


def _core_terms(u: ScalarField, v: ScalarField):
    """(int u' conj(v)', int u conj(v)) over the whole graph, tails in closed form."""
    lay = u.layout
    du, dv = lay.node_derivative(u.values), lay.node_derivative(v.values)
    grad = np.dot(lay.mid_weights, du * np.conj(dv))
    mass = np.dot(lay.node_weights, u.values * np.conj(v.values))
    for h, t in u.tails.items():
        s = v.tails.get(h)
        if s is not None:
            grad += t.inner(s, derivative=1)
            mass += t.inner(s)
    return grad, mass


def functional_J(u: ScalarField, prob: NLSProblem) -> float:
    """1/2 int |u'|^2 - alpha/p int_K |u|^p - lambda/2 int |u|^2."""
    grad, mass = _core_terms(u, u)
    lp = np.dot(prob.layout.node_weights, np.abs(u.values) ** prob.p)
    return float(0.5 * grad.real - prob.alpha / prob.p * lp - 0.5 * prob.lam * mass.real)


def pairing_An(u: ScalarField, phi: ScalarField, a_n: float, b_n: float, p: float) -> float:
    """int u' conj(phi)' - b_n int_K |u|^(p-2) u conj(phi) + a_n int u conj(phi)."""
    grad, mass = _core_terms(u, phi)
    w = u.layout.node_weights
    nl = np.dot(w, np.abs(u.values) ** (p - 2) * u.values * np.conj(phi.values))
    return float((grad - b_n * nl + a_n * mass).real)


def h_space_gram(layout: Layout, kappa: float) -> sp.csr_matrix:
    """H^1 Gram matrix of node-parametrised functions with tails phi(v) e^(-kappa x)."""
    K = layout.flux @ sp.diags(1 / layout.mid_weights) @ layout.flux.T
    tail = layout.halfline_count * (kappa / 2 + 1 / (2 * kappa))
    return (K + sp.diags(layout.node_weights + tail)).tocsr()


def basis_direction(layout: Layout, phi: np.ndarray, kappa: float) -> ScalarField:
    tails = {h.name: ExpTail.scalar(phi[layout.vertex_index[h.v_attach]], kappa) for h in layout.graph.halflines}
    return ScalarField(layout, phi, tails)


def pairing_vector(u: ScalarField, a_n, b_n, p, kappa) -> np.ndarray:
    """Vector g with <A_n(u)|phi> = g . phi for phi with tails at rate kappa."""
    lay = u.layout
    K = lay.flux @ sp.diags(1 / lay.mid_weights) @ lay.flux.T
    vals = np.real(u.values)
    g = K @ vals - b_n * lay.node_weights * np.abs(vals) ** (p - 2) * vals + a_n * lay.node_weights * vals
    for h in lay.graph.halflines:
        t = u.tails.get(h.name)
        if t is None:
            continue
        j = lay.vertex_index[h.v_attach]
        for (c,), k in t.terms:
            g[j] += (c * (k * kappa + a_n) / (k + kappa)).real
    return g


def pairing_dual_norm(u: ScalarField, a_n, b_n, p, kappa) -> float:
    """sup over ||phi||_H <= 1 of <A_n(u)|phi> in the discrete space."""
    g = pairing_vector(u, a_n, b_n, p, kappa)
    M = h_space_gram(u.layout, kappa).tocsc()
    return float(math.sqrt(max(np.dot(g, spla.spsolve(M, g)), 0.0)))


def probe_directions(layout: Layout, kappa: float, n=50, seed=0) -> list[np.ndarray]:
    """Fixed random node vectors, normalised to unit H norm."""
    rng = np.random.default_rng(seed)
    M = h_space_gram(layout, kappa)
    out = []
    for _ in range(n):
        phi = rng.standard_normal(layout.n_nodes)
        out.append(phi / math.sqrt(phi @ (M @ phi)))
    return out
