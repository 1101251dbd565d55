"""Staggered grids on the compact core, fields with analytic half-line tails, norms.

Each bounded edge of length l is split into N equal cells of width h = l / N.
The first spinor component (and scalar fields) lives on the nodes
x_j = j h, the second spinor component on the midpoints x_{j+1/2}.  Node values
at a vertex are a single shared unknown, so continuity of the first component
holds by construction.  Quadrature is the trapezoid rule on nodes and the
midpoint rule on midpoints.

Half-lines carry no grid: a field there is a finite sum of decaying
exponentials (``ExpTail``) and every integral over a half-line is evaluated in
closed form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .graph_core import MetricGraph

MIN_INTERVALS = 4


@dataclass(frozen=True)
class EdgeGrid:
    edge: str
    length: float
    n: int

    def __post_init__(self):
        if self.n < MIN_INTERVALS:
            raise ValueError(f"edge {self.edge}: need at least {MIN_INTERVALS} intervals, got {self.n}")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h


def make_grids(g: MetricGraph, h_target: float) -> dict[str, EdgeGrid]:
    """One grid per bounded edge with N = max(4, ceil(l / h_target))."""
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    grids = {}
    for e in g.bounded_edges:
        # guard against ceil(2.0000000000000004) style round-up
        n = max(MIN_INTERVALS, math.ceil(e.length / h_target - 1e-9))
        grids[e.name] = EdgeGrid(e.name, e.length, n)
    return grids


class Layout:
    """Degree-of-freedom map for staggered fields on the compact core.

    Node unknowns: one per core vertex (skipping ``dirichlet`` vertices, where
    the first component is pinned to zero) followed by the interior nodes of
    each edge.  Midpoint unknowns: all midpoints, edge by edge.
    """

    def __init__(self, g: MetricGraph, grids: dict[str, EdgeGrid], dirichlet=frozenset()):
        if not grids:
            raise ValueError("empty grid set")
        missing = {e.name for e in g.bounded_edges} - set(grids)
        if missing:
            raise ValueError(f"no grid for edges {sorted(missing)}")
        self.graph = g
        self.grids = {e.name: grids[e.name] for e in g.bounded_edges}
        self.dirichlet = frozenset(dirichlet)

        self.vertex_index: dict[str, int] = {}
        for v in g.core_vertices:
            if v not in self.dirichlet:
                self.vertex_index[v] = len(self.vertex_index)
        k = len(self.vertex_index)
        self.node_index: dict[str, np.ndarray] = {}
        self.mid_slice: dict[str, slice] = {}
        m = 0
        for e in g.bounded_edges:
            n = self.grids[e.name].n
            idx = np.empty(n + 1, dtype=np.int64)
            idx[0] = self.vertex_index.get(e.v_from, -1)
            idx[n] = self.vertex_index.get(e.v_to, -1)
            idx[1:n] = np.arange(k, k + n - 1)
            k += n - 1
            self.node_index[e.name] = idx
            self.mid_slice[e.name] = slice(m, m + n)
            m += n
        self.n_nodes = k
        self.n_mids = m

    @property
    def size(self) -> int:
        return self.n_nodes + self.n_mids

    @cached_property
    def node_weights(self) -> np.ndarray:
        w = np.zeros(self.n_nodes)
        for e, idx in self.node_index.items():
            h = self.grids[e].h
            w[idx[1:-1]] = h
            for j in (idx[0], idx[-1]):
                if j >= 0:
                    w[j] += h / 2
        return w

    @cached_property
    def mid_weights(self) -> np.ndarray:
        w = np.empty(self.n_mids)
        for e, s in self.mid_slice.items():
            w[s] = self.grids[e].h
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.node_weights, self.mid_weights])

    @cached_property
    def cells(self):
        """(left node, right node, midpoint, h) per cell; node index -1 means pinned to 0."""
        L, R, K, H = [], [], [], []
        for e, idx in self.node_index.items():
            s = self.mid_slice[e]
            L.append(idx[:-1])
            R.append(idx[1:])
            K.append(np.arange(s.start, s.stop))
            H.append(np.full(s.stop - s.start, self.grids[e].h))
        return np.concatenate(L), np.concatenate(R), np.concatenate(K), np.concatenate(H)

    @cached_property
    def flux(self) -> sp.csr_matrix:
        """Signed node/midpoint incidence B: (B w)_node = sum over cells of +-w_mid.

        B w at a node is the weighted node derivative of a midpoint field, with
        the vertex trace terms removed; -B^T u is h times the midpoint derivative
        of a node field.  The pair is a summation-by-parts identity.
        """
        L, R, K, _ = self.cells
        rows = np.concatenate([L, R])
        cols = np.concatenate([K, K])
        vals = np.concatenate([np.ones(len(L)), -np.ones(len(R))])
        keep = rows >= 0
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(self.n_nodes, self.n_mids))

    @cached_property
    def halfline_count(self) -> np.ndarray:
        """Number of half-lines attached at each node unknown (zero off vertices)."""
        n = np.zeros(self.n_nodes)
        for h in self.graph.halflines:
            j = self.vertex_index.get(h.v_attach)
            if j is not None:
                n[j] += 1
        return n

    def node_derivative(self, u: np.ndarray) -> np.ndarray:
        """Midpoint derivative of a node field, (u_{j+1} - u_j) / h."""
        L, R, _, H = self.cells
        uL = np.where(L >= 0, u[L], 0)
        uR = np.where(R >= 0, u[R], 0)
        return (uR - uL) / H

    def mid_derivative(self, w: np.ndarray):
        """Per-edge node derivative of a midpoint field.

        Interior nodes use centred differences of neighbouring midpoints; the
        two end nodes use second-order extrapolation of those differences.
        Returns a dict edge -> array of length N + 1.
        """
        out = {}
        for e, s in self.mid_slice.items():
            h = self.grids[e].h
            d = np.empty(s.stop - s.start + 1, dtype=np.result_type(w, float))
            d[1:-1] = np.diff(w[s]) / h
            d[0] = 2 * d[1] - d[2]
            d[-1] = 2 * d[-2] - d[-3]
            out[e] = d
        return out

    def vertex_trace_psi2(self, w: np.ndarray) -> dict:
        """Second-order one-sided extrapolation of a midpoint field to edge ends.

        Returns {(vertex, edge, endpoint): signed trace}, the sign being +1 at
        x = 0 and -1 at x = l, i.e. exactly the terms of the vertex sum law.
        """
        out = {}
        for e in self.graph.bounded_edges:
            ws = w[self.mid_slice[e.name]]
            out[(e.v_from, e.name, "start")] = (3 * ws[0] - ws[1]) / 2
            out[(e.v_to, e.name, "end")] = -(3 * ws[-1] - ws[-2]) / 2
        return out

    def edge_node_values(self, u: np.ndarray, e: str) -> np.ndarray:
        idx = self.node_index[e]
        return np.where(idx >= 0, u[idx], 0)

    def sample_nodes(self, funcs) -> np.ndarray:
        """Node vector from per-edge callables f(x) (first edge touching a vertex wins)."""
        u = np.zeros(self.n_nodes, dtype=complex)
        for e, idx in self.node_index.items():
            vals = np.asarray(funcs[e](self.grids[e].nodes), dtype=complex) * np.ones(len(idx))
            keep = idx >= 0
            u[idx[keep]] = vals[keep]
        return u

    def sample_mids(self, funcs) -> np.ndarray:
        w = np.zeros(self.n_mids, dtype=complex)
        for e, s in self.mid_slice.items():
            w[s] = np.asarray(funcs[e](self.grids[e].midpoints), dtype=complex) * np.ones(s.stop - s.start)
        return w


# ---------------------------------------------------------------------------
# half-line tails


@dataclass(frozen=True)
class ExpTail:
    """Field on a half-line: sum_i coef_i * exp(-k_i x), coef_i one entry per component."""

    terms: tuple = ()

    @classmethod
    def spinor(cls, amplitude: complex, decay: float, ratio: float) -> "ExpTail":
        """psi1 = A e^{-kx}, psi2 = i r A e^{-kx}."""
        a = complex(amplitude)
        return cls((((a, 1j * ratio * a), float(decay)),))

    @classmethod
    def scalar(cls, amplitude: complex, decay: float) -> "ExpTail":
        return cls((((complex(amplitude),), float(decay)),))

    @property
    def amplitude(self) -> complex:
        return sum(c[0] for c, _ in self.terms)

    @property
    def decay(self) -> float:
        if len(self.terms) != 1:
            raise ValueError("decay rate defined only for single-exponential tails")
        return self.terms[0][1]

    @property
    def ratio(self) -> float:
        """r with psi2(0) = i r psi1(0)."""
        a1, a2 = self.terms[0][0]
        return (a2 / (1j * a1)).real if a1 != 0 else 0.0

    def component(self, i: int) -> "ExpTail":
        return ExpTail(tuple(((c[i],), k) for c, k in self.terms))

    def values(self, x, derivative: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ncomp = len(self.terms[0][0]) if self.terms else 1
        out = np.zeros((ncomp,) + x.shape, dtype=complex)
        for c, k in self.terms:
            out += np.multiply.outer(np.asarray(c), (-k) ** derivative * np.exp(-k * x))
        return out

    def inner(self, other: "ExpTail", derivative: int = 0) -> complex:
        """Integral over [0, inf) of sum_comp f_comp conj(g_comp) (or of their derivatives)."""
        total = 0j
        for c1, k1 in self.terms:
            for c2, k2 in other.terms:
                total += np.vdot(np.asarray(c2), np.asarray(c1)) * (k1 * k2) ** derivative / (k1 + k2)
        return total

    def sup(self, comp: int) -> float:
        if len(self.terms) == 1:
            return abs(self.terms[0][0][comp])
        kmin = min(k for _, k in self.terms)
        x = np.linspace(0, 40 / kmin, 20001)
        return float(np.max(np.abs(self.values(x)[comp])))

    def lp(self, p: float, comp: int) -> float:
        """Integral of |f_comp|^p over the half-line."""
        if len(self.terms) == 1:
            c, k = self.terms[0]
            return abs(c[comp]) ** p / (p * k)
        kmin = min(k for _, k in self.terms)
        val, _ = integrate.quad(lambda x: abs(self.values(x)[comp]) ** p, 0, np.inf, limit=200)
        return val if kmin > 0 else math.inf

    def scaled(self, s) -> "ExpTail":
        return ExpTail(tuple((tuple(s * a for a in c), k) for c, k in self.terms))

    def __add__(self, other: "ExpTail") -> "ExpTail":
        return ExpTail(self.terms + other.terms)

    def __sub__(self, other: "ExpTail") -> "ExpTail":
        return self + other.scaled(-1)


# ---------------------------------------------------------------------------
# fields


@dataclass
class SpinorField:
    """Two-component field: psi1 on node unknowns, psi2 on midpoints, plus tails."""

    layout: Layout
    psi1: np.ndarray
    psi2: np.ndarray
    tails: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.psi1 = np.asarray(self.psi1, dtype=complex)
        self.psi2 = np.asarray(self.psi2, dtype=complex)
        if self.psi1.shape != (self.layout.n_nodes,) or self.psi2.shape != (self.layout.n_mids,):
            raise ValueError("field dimensions do not match the layout")
        if not (np.all(np.isfinite(self.psi1)) and np.all(np.isfinite(self.psi2))):
            raise ValueError("field values must be finite")

    @classmethod
    def zeros(cls, layout: Layout) -> "SpinorField":
        return cls(layout, np.zeros(layout.n_nodes), np.zeros(layout.n_mids))

    @classmethod
    def from_vector(cls, layout: Layout, x: np.ndarray, **kw) -> "SpinorField":
        return cls(layout, x[: layout.n_nodes], x[layout.n_nodes :], **kw)

    @classmethod
    def from_functions(cls, layout: Layout, f1, f2, tails=None) -> "SpinorField":
        """Sample per-edge callables; a single callable is used on every edge."""
        if callable(f1):
            f1 = {e: f1 for e in layout.grids}
        if callable(f2):
            f2 = {e: f2 for e in layout.grids}
        return cls(layout, layout.sample_nodes(f1), layout.sample_mids(f2), dict(tails or {}))

    @classmethod
    def from_edge_arrays(cls, layout: Layout, arrays: dict, tails=None, atol: float = 1e-12) -> "SpinorField":
        """Build from per-edge (node values, midpoint values); checks continuity at vertices."""
        psi1 = np.zeros(layout.n_nodes, dtype=complex)
        seen = {}
        for e, (a1, a2) in arrays.items():
            idx = layout.node_index[e]
            a1 = np.asarray(a1, dtype=complex)
            for j, val in zip(idx, a1):
                if j < 0:
                    if abs(val) > atol:
                        raise ValueError(f"edge {e}: nonzero value at a pinned vertex")
                    continue
                if j in seen and abs(seen[j] - val) > atol:
                    raise ValueError(f"edge {e}: first component discontinuous at a vertex")
                seen[j] = val
                psi1[j] = val
        psi2 = np.zeros(layout.n_mids, dtype=complex)
        for e, (_, a2) in arrays.items():
            psi2[layout.mid_slice[e]] = a2
        return cls(layout, psi1, psi2, dict(tails or {}))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.psi1, self.psi2])

    def edge_values(self, e: str):
        """(node x, psi1 at nodes, midpoint x, psi2 at midpoints) on one edge."""
        g = self.layout.grids[e]
        return g.nodes, self.layout.edge_node_values(self.psi1, e), g.midpoints, self.psi2[self.layout.mid_slice[e]]

    def continuity_defect(self) -> float:
        """Largest spread of first-component edge-end values meeting at a vertex."""
        ends: dict[str, list] = {}
        for e in self.layout.graph.bounded_edges:
            vals = self.edge_values(e.name)[1]
            ends.setdefault(e.v_from, []).append(vals[0])
            ends.setdefault(e.v_to, []).append(vals[-1])
        for h, t in self.tails.items():
            v = next(hl.v_attach for hl in self.layout.graph.halflines if hl.name == h)
            ends.setdefault(v, []).append(t.values(0.0)[0])
        return max((float(np.ptp(np.abs(np.array(v) - v[0]))) for v in ends.values()), default=0.0)

    def component(self, i: int) -> "SpinorField":
        """The field with the other component set to zero."""
        tails = {h: ExpTail(tuple(((c[0] if i == 1 else 0j, c[1] if i == 2 else 0j), k) for c, k in t.terms))
                 for h, t in self.tails.items()}
        if i == 1:
            return SpinorField(self.layout, self.psi1, np.zeros_like(self.psi2), tails, dict(self.meta))
        return SpinorField(self.layout, np.zeros_like(self.psi1), self.psi2, tails, dict(self.meta))

    def scaled(self, s) -> "SpinorField":
        return SpinorField(self.layout, s * self.psi1, s * self.psi2,
                           {h: t.scaled(s) for h, t in self.tails.items()}, dict(self.meta))

    def __add__(self, other: "SpinorField") -> "SpinorField":
        tails = dict(self.tails)
        for h, t in other.tails.items():
            tails[h] = tails[h] + t if h in tails else t
        return SpinorField(self.layout, self.psi1 + other.psi1, self.psi2 + other.psi2, tails, dict(self.meta))

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        return self + other.scaled(-1)


@dataclass
class ScalarField:
    """Node-based scalar field on the core, plus exponential tails on half-lines."""

    layout: Layout
    values: np.ndarray
    tails: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.layout.n_nodes,):
            raise ValueError("field dimensions do not match the layout")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, layout: Layout, f, tails=None) -> "ScalarField":
        if callable(f):
            f = {e: f for e in layout.grids}
        u = layout.sample_nodes(f)
        if np.all(u.imag == 0):
            u = u.real
        return cls(layout, u, dict(tails or {}))

    def edge_values(self, e: str):
        return self.layout.grids[e].nodes, self.layout.edge_node_values(self.values, e)

    def as_spinor(self) -> SpinorField:
        tails = {h: ExpTail(tuple(((c[0], 0j), k) for c, k in t.terms)) for h, t in self.tails.items()}
        return SpinorField(self.layout, self.values, np.zeros(self.layout.n_mids), tails)

    def scaled(self, s) -> "ScalarField":
        return ScalarField(self.layout, s * self.values, {h: t.scaled(s) for h, t in self.tails.items()})

    def __add__(self, other: "ScalarField") -> "ScalarField":
        tails = dict(self.tails)
        for h, t in other.tails.items():
            tails[h] = tails[h] + t if h in tails else t
        return ScalarField(self.layout, self.values + other.values, tails)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self + other.scaled(-1)


# ---------------------------------------------------------------------------
# norms


def _as_spinor(f) -> SpinorField:
    return f.as_spinor() if isinstance(f, ScalarField) else f


def _components(f):
    """Pieces of the squared L2 and derivative integrals, core then tails."""
    s = _as_spinor(f)
    lay = s.layout
    l2 = np.dot(lay.node_weights, np.abs(s.psi1) ** 2) + np.dot(lay.mid_weights, np.abs(s.psi2) ** 2)
    d1 = lay.node_derivative(s.psi1)
    der = np.dot(lay.mid_weights, np.abs(d1) ** 2)
    if not isinstance(f, ScalarField):
        for e, d in lay.mid_derivative(s.psi2).items():
            h = lay.grids[e].h
            a = np.abs(d) ** 2
            der += h * (a.sum() - 0.5 * (a[0] + a[-1]))
    for t in s.tails.values():
        l2 += t.inner(t).real
        der += t.inner(t, derivative=1).real
    return l2, der


def l2_norm(f) -> float:
    return math.sqrt(max(_components(f)[0], 0.0))


def derivative_norm(f) -> float:
    """L2 norm of the first derivative, edge by edge, tails included."""
    return math.sqrt(max(_components(f)[1], 0.0))


def h1_norm(f) -> float:
    l2, der = _components(f)
    return math.sqrt(max(l2 + der, 0.0))


def linf_norm(f) -> float:
    """max over components of the sup norm (core values and tails)."""
    s = _as_spinor(f)
    vals = [np.max(np.abs(s.psi1), initial=0.0), np.max(np.abs(s.psi2), initial=0.0)]
    for t in s.tails.values():
        vals += [t.sup(0), t.sup(1)]
    return float(max(vals))


def lp_core(f, p: float) -> float:
    """(sum over components of the core integral of |component|^p)^(1/p)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    s = _as_spinor(f)
    lay = s.layout
    total = np.dot(lay.node_weights, np.abs(s.psi1) ** p) + np.dot(lay.mid_weights, np.abs(s.psi2) ** p)
    return float(total) ** (1 / p)


def lp_graph_power(f, p: float) -> float:
    """Integral over the whole graph of sum_comp |component|^p (tails in closed form)."""
    s = _as_spinor(f)
    total = lp_core(s, p) ** p
    for t in s.tails.values():
        total += t.lp(p, 0) + t.lp(p, 1)
    return float(total)


def norm(f, kind: str, p: float | None = None) -> float:
    """Discrete norm of a spinor or scalar field.

    kind is one of ``"L2"``, ``"H1"``, ``"Linf"``, ``"Lp_core"`` (needs ``p``).
    Spinor norms follow the componentwise convention: the squared L2/H1 norms
    and the p-th power of the Lp norm add over components, the sup norm is the
    larger component sup.
    """
    if kind == "L2":
        return l2_norm(f)
    if kind == "H1":
        return h1_norm(f)
    if kind == "Linf":
        return linf_norm(f)
    if kind == "Lp_core":
        if p is None:
            raise ValueError("Lp_core needs p")
        return lp_core(f, p)
    raise ValueError(f"unknown norm kind {kind!r}")


def core_mass(f, p: float) -> float:
    """Core integral of |psi|^p with |psi|^2 = |psi1|^2 + |psi2|^2.

    Each cell is split in two halves; each half pairs its end node with the
    cell midpoint.  The same rule generates the discrete nonlinearity, so the
    gradient of this functional is exactly the nonlinear term of the solvers.
    """
    s = _as_spinor(f)
    L, R, K, H = s.layout.cells
    a1 = np.abs(s.psi1) ** 2
    b = np.abs(s.psi2[K]) ** 2
    rl = np.where(L >= 0, a1[L], 0) + b
    rr = np.where(R >= 0, a1[R], 0) + b
    return float(np.dot(H / 2, rl ** (p / 2) + rr ** (p / 2)))


@dataclass(frozen=True)
class GNCheck:
    lp_lhs: float  # ||psi||_p^p over the graph
    lp_rhs: float  # ||psi||_2^(p/2+1) ||psi'||_2^(p/2-1)
    lp_bound: float  # constant-free upper bound ||psi||_inf^(p-2)-route, see gn_check
    linf_lhs: float  # ||psi||_inf^2
    linf_rhs: float  # 2 ||psi||_2 ||psi'||_2 + ||psi||_2^2 / l_min


def gn_check(f, p: float) -> GNCheck:
    """Both sides of the two Gagliardo-Nirenberg inequalities.

    The sup-norm pair uses the explicit one-dimensional embedding
    |u(x)|^2 <= 2 ||u|| ||u'|| + ||u||^2 / l on any interval of length l
    (l = inf on a half-line), applied with the shortest edge; the Lp bound
    follows as ||psi||_p^p <= ||psi||_inf^(p-2) ||psi||_2^2.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    s = _as_spinor(f)
    l2, der = _components(s)
    a, b = math.sqrt(max(l2, 0)), math.sqrt(max(der, 0))
    lmin = s.layout.graph.min_edge_length
    linf_rhs = 2 * a * b + (a * a / lmin if math.isfinite(lmin) else 0.0)
    return GNCheck(
        lp_lhs=lp_graph_power(s, p),
        lp_rhs=a ** (p / 2 + 1) * b ** (p / 2 - 1),
        lp_bound=linf_rhs ** ((p - 2) / 2) * a * a,
        linf_lhs=linf_norm(s) ** 2,
        linf_rhs=linf_rhs,
    )


# ---------------------------------------------------------------------------
# CSV export

FIELD_COLUMNS = ["edge", "x", "re_psi1", "im_psi1", "re_psi2", "im_psi2"]
TAIL_COLUMNS = ["halfline", "amplitude_re", "amplitude_im", "decay_rate", "ratio"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_rows(f: SpinorField):
    """Rows of the field CSV: node rows carry psi1, midpoint rows carry psi2."""
    rows = []
    for e in f.layout.grids:
        xn, v1, xm, v2 = f.edge_values(e)
        entries = [(x, 0, v) for x, v in zip(xn, v1)] + [(x, 1, v) for x, v in zip(xm, v2)]
        for x, comp, v in sorted(entries, key=lambda t: t[0]):
            vals = ["", "", "", ""]
            vals[2 * comp] = fmt(v.real)
            vals[2 * comp + 1] = fmt(v.imag)
            rows.append([e, fmt(x)] + vals)
    return rows


def tail_rows(f: SpinorField):
    rows = []
    for h in (hl.name for hl in f.layout.graph.halflines):
        t = f.tails.get(h)
        if t is None:
            continue
        a = t.amplitude
        rows.append([h, fmt(a.real), fmt(a.imag), fmt(t.decay), fmt(t.ratio)])
    return rows


def write_field_csv(f: SpinorField, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FIELD_COLUMNS)
    w.writerows(field_rows(f))
    if f.tails:
        w.writerow(TAIL_COLUMNS)
        w.writerows(tail_rows(f))


def read_field_csv(fh, layout: Layout) -> SpinorField:
    """Inverse of ``write_field_csv`` (comment lines starting with '#' are skipped)."""
    nodes: dict[str, list] = {e: [] for e in layout.grids}
    mids: dict[str, list] = {e: [] for e in layout.grids}
    tails = {}
    section = None
    for row in csv.reader(line for line in fh if not line.startswith("#")):
        if not row:
            continue
        if row == FIELD_COLUMNS or row == TAIL_COLUMNS:
            section = row[0]
            continue
        if section == "edge":
            e = row[0]
            if row[2] != "":
                nodes[e].append(complex(float(row[2]), float(row[3])))
            else:
                mids[e].append(complex(float(row[4]), float(row[5])))
        elif section == "halfline":
            tails[row[0]] = ExpTail.spinor(complex(float(row[1]), float(row[2])), float(row[3]), float(row[4]))
        else:
            break
    return SpinorField.from_edge_arrays(layout, {e: (nodes[e], mids[e]) for e in layout.grids}, tails)
