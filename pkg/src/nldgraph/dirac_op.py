"""Discrete Dirac operator and Kirchhoff Laplacian on the compact core.

On every bounded edge the Dirac operator acts as

    D psi = -i c sigma_1 psi' + m c^2 sigma_3 psi,

so that (D psi)^1 = -i c (psi^2)' + m c^2 psi^1 and
(D psi)^2 = -i c (psi^1)' - m c^2 psi^2.  On the staggered grid the first
line is evaluated at nodes and the second at midpoints.

Vertex conditions.  Continuity of psi^1 is built into the layout (one shared
unknown per vertex).  The signed sum law for psi^2 enters the vertex row of
the first equation: the half-cell balance at a vertex reads

    sum_e s_e (psi^2_e(near midpoint) - psi^2_e(v)),

and the trace sum sum_e s_e psi^2_e(v) is eliminated with the law, leaving
the signed sum of the nearest midpoint values.  Half-lines attached at the
vertex enter the law through their own traces; this module leaves them to
the caller (exact exterior closure in the solvers, truncation in the
spectral code), see ``closure_diagonal``.

The resulting weighted operator W D is Hermitian, W being the quadrature
weights; the stored matrix is W^(1/2) D W^(-1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretize import Layout, SpinorField, ScalarField
from .graph_core import vertex_star

DENSE_LIMIT = 2000


@dataclass
class DiscreteOperator:
    """Symmetrised matrix of a staggered operator plus the data to use it on fields.

    ``matrix`` is Hermitian in the plain sense.  ``weighted`` is W A (with A
    the operator acting on nodal/midpoint values), i.e. the Gram form
    <phi, A psi> = phi^* weighted psi.  For the Dirac kind the unknowns are
    (psi1 nodes, psi2 midpoints); for the Laplacian only the nodes.
    """

    kind: str
    layout: Layout
    weighted: sp.csr_matrix
    m: float | None = None
    c: float | None = None

    @property
    def weights(self) -> np.ndarray:
        return self.layout.weights if self.kind == "dirac" else self.layout.node_weights

    @property
    def size(self) -> int:
        return self.weighted.shape[0]

    @property
    def matrix(self):
        s = 1 / np.sqrt(self.weights)
        S = sp.diags(s)
        A = (S @ self.weighted @ S).tocsr()
        return A.toarray() if self.size < DENSE_LIMIT else A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Operator applied to a vector of nodal/midpoint values."""
        if x.shape != (self.size,):
            raise ValueError(f"dimension mismatch: expected {self.size}, got {x.shape}")
        return (self.weighted @ x) / self.weights

    def with_diagonal(self, node_diag: np.ndarray) -> "DiscreteOperator":
        """Copy with a (weighted) diagonal term added on the node rows."""
        d = np.zeros(self.size)
        d[: self.layout.n_nodes] = node_diag
        return DiscreteOperator(self.kind, self.layout, (self.weighted + sp.diags(d)).tocsr(), self.m, self.c)

    def real_form(self) -> sp.csr_matrix:
        """Real symmetric weighted matrix for fields psi = (u, i w) with u, w real.

        Only defined for the Dirac kind: the substitution psi^2 = i w removes
        every imaginary unit from the operator.
        """
        if self.kind != "dirac":
            return self.weighted.real.tocsr()
        n = self.layout.n_nodes
        u = np.ones(self.size, dtype=complex)
        u[n:] = 1j
        U = sp.diags(u)
        R = (U.conj().T @ self.weighted @ U).tocsr()
        return R.real.tocsr()


def assemble_dirac(g, grids, m: float, c: float, dirichlet=frozenset()) -> DiscreteOperator:
    """Dirac operator with Kirchhoff-type conditions at every core vertex.

    ``dirichlet`` lists vertices where psi^1 is pinned to zero instead (used
    for truncated half-line tips and for segment tests).  Half-lines of ``g``
    are ignored here.
    """
    if not (m > 0 and c > 0):
        raise ValueError("m and c must be positive")
    lay = grids if isinstance(grids, Layout) else Layout(g, grids, dirichlet)
    B = lay.flux
    Hv = sp.diags(lay.node_weights)
    Hc = sp.diags(lay.mid_weights)
    mc2 = m * c * c
    W = sp.bmat([[mc2 * Hv, -1j * c * B], [1j * c * B.T, -mc2 * Hc]], format="csr")
    return DiscreteOperator("dirac", lay, W, m, c)


def assemble_laplacian_kirchhoff(g, grids, dirichlet=frozenset()) -> DiscreteOperator:
    """-d^2/dx^2 with continuity and the derivative balance at each core vertex."""
    lay = grids if isinstance(grids, Layout) else Layout(g, grids, dirichlet)
    B = lay.flux
    W = (B @ sp.diags(1 / lay.mid_weights) @ B.T).tocsr()
    return DiscreteOperator("laplacian_kirchhoff", lay, W)


def closure_diagonal(layout: Layout, coefficient: float) -> np.ndarray:
    """Weighted node diagonal coefficient * (number of half-lines at the vertex).

    For the Dirac operator with psi^2 = i r psi^1 on each attached half-line the
    coefficient is c r; for the Laplacian with u' = -kappa u it is kappa.
    """
    return coefficient * layout.halfline_count


def apply(op: DiscreteOperator, f):
    """Operator applied to a field; tails are not touched (no half-lines here)."""
    if op.kind == "dirac":
        if f.layout is not op.layout and f.layout.size != op.layout.size:
            raise ValueError("field does not live on the operator's layout")
        y = op.matvec(f.vector)
        return SpinorField.from_vector(op.layout, y)
    if f.values.shape != (op.size,):
        raise ValueError("dimension mismatch")
    return ScalarField(op.layout, op.matvec(np.asarray(f.values, dtype=complex)))


def inner(op: DiscreteOperator, x: np.ndarray, y: np.ndarray) -> complex:
    """Weighted L2 inner product <x, y> (conjugate-linear in x)."""
    return np.vdot(x, op.weights * y)


def quadratic_form(op: DiscreteOperator, psi) -> float:
    """Core integral of <psi, A psi>, *without* a 1/2 prefactor.

    The action functional applies its own 1/2.  Raises if the imaginary
    part is not negligible (it vanishes for a Hermitian operator).
    """
    x = psi.vector if isinstance(psi, SpinorField) else np.asarray(psi.values, dtype=complex)
    q = np.vdot(x, op.weighted @ x)
    scale = max(abs(q), np.vdot(x, np.abs(op.weighted) @ np.abs(x)).real, 1e-300)
    if abs(q.imag) > 1e-12 * scale:
        raise ArithmeticError(f"quadratic form not real: {q}")
    return float(q.real)


def hermiticity_defect(op: DiscreteOperator) -> float:
    """max |A - A^*| / max |A| of the symmetrised matrix."""
    A = op.matrix
    A = sp.csr_matrix(A)
    D = A - A.conj().T
    big = abs(A).max()
    return float(abs(D).max() / big) if big else 0.0


def green_defect(op: DiscreteOperator, x: np.ndarray, y: np.ndarray) -> float:
    """|<A x, y> - <x, A y>| / (||x|| ||y||) in the weighted inner product."""
    ax, ay = op.matvec(x), op.matvec(y)
    lhs = inner(op, ax, y) - inner(op, x, ay)
    nx = np.sqrt(inner(op, x, x).real)
    ny = np.sqrt(inner(op, y, y).real)
    return float(abs(lhs) / (nx * ny))


@dataclass(frozen=True)
class VertexConditionSet:
    """Per-vertex conditions A Gamma0 psi = B Gamma1 psi.

    Gamma0 collects the psi^1 traces of the incident edge ends, Gamma1 the
    signed psi^2 traces; rows of A encode continuity, the last row of B the
    sum law.
    """

    vertex: str
    incidences: tuple
    A: np.ndarray
    B: np.ndarray

    def is_symmetric(self, tol: float = 1e-14) -> bool:
        P = self.A @ self.B.conj().T
        return bool(np.allclose(P, P.conj().T, atol=tol))

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(np.hstack([self.A, self.B])))


def vertex_conditions(g, v: str) -> VertexConditionSet:
    star = vertex_star(g, v)
    d = len(star)
    A = np.zeros((d, d))
    B = np.zeros((d, d))
    for i in range(1, d):
        A[i - 1, 0] = 1
        A[i - 1, i] = -1
    B[d - 1, :] = 1
    return VertexConditionSet(v, tuple(star), A, B)


def dump_operator(op: DiscreteOperator, fh) -> None:
    """Coordinate-format text, one ``row col re im`` line per stored entry."""
    A = sp.coo_matrix(op.matrix)
    order = np.lexsort((A.col, A.row))
    for k in order:
        v = complex(A.data[k])
        fh.write(f"{A.row[k]} {A.col[k]} {v.real:.17g} {v.imag:.17g}\n")
