"""Closed-form segment spectra, numerical eigensolves, and the spectral-gap check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dirac_op import DENSE_LIMIT, DiscreteOperator, assemble_dirac
from .discretize import Layout, make_grids
from .errors import SpectrumError, ValidationError

BOUNDARY_CONDITIONS = ("first_component_dirichlet", "kirchhoff_type_deg1", "mixed")


def segment_dirac_eigenvalues_closed_form(m, c, length, j_max, bc="first_component_dirichlet"):
    """Eigenvalues of -i c sigma_1 d/dx + m c^2 sigma_3 on [0, length].

    Away from +-mc^2 the first component solves -c^2 (psi^1)'' =
    (lambda^2 - m^2 c^4) psi^1, so lambda = +-sqrt(c^2 k^2 + m^2 c^4) with k
    fixed by the end conditions:

    - ``first_component_dirichlet``: psi^1 = 0 at both ends, k = j pi / l
      (j >= 1), plus lambda = -mc^2 (psi^1 = 0, psi^2 constant);
    - ``kirchhoff_type_deg1``: psi^2 = 0 at both ends, k = j pi / l (j >= 1),
      plus lambda = +mc^2 (psi^1 constant, psi^2 = 0);
    - ``mixed``: psi^1(0) = 0 and psi^2(l) = 0, k = (j + 1/2) pi / l (j >= 0),
      no threshold eigenvalue.
    """
    if not (m > 0 and c > 0 and length > 0):
        raise ValueError("m, c and length must be positive")
    mc2 = m * c * c
    if bc == "mixed":
        ks = [(j + 0.5) * math.pi / length for j in range(j_max + 1)]
        extra = []
    elif bc in ("first_component_dirichlet", "kirchhoff_type_deg1"):
        ks = [j * math.pi / length for j in range(1, j_max + 1)]
        extra = [-mc2] if bc == "first_component_dirichlet" else [mc2]
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    vals = extra[:]
    for k in ks:
        lam = math.sqrt(c * c * k * k + mc2 * mc2)
        vals += [lam, -lam]
    return sorted(vals)


@dataclass(frozen=True)
class SpectralWindow:
    lo: float
    hi: float
    count: int = 10

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    h: float | None = None
    L_inf: float | None = None
    diagnostics: dict = field(default_factory=dict)


def _start(n: int) -> np.ndarray:
    """Fixed ARPACK starting vector so repeated solves are bit-identical."""
    return np.random.default_rng(0).standard_normal(n)


def _symmetric_matrix(op: DiscreteOperator):
    """Real symmetric matrix similar to the operator (Dirac: after psi2 = i w)."""
    W = op.real_form()
    s = sp.diags(1 / np.sqrt(op.weights))
    return (s @ W @ s).tocsr()


def discrete_spectrum(op: DiscreteOperator, window: SpectralWindow, k: int | None = None,
                      vectors: bool = False) -> EigenResult:
    """The k eigenvalues inside ``window`` nearest to its centre, ascending.

    Dense LAPACK below the dense limit, shift-invert Lanczos about the window
    centre above it.  Eigenvectors, when kept, are in the symmetric basis.
    """
    k = window.count if k is None else k
    hs = [g.h for g in op.layout.grids.values()]
    res = EigenResult(np.empty(0), None, min(hs))
    if not window.lo < window.hi or k < 1:
        return res
    A = _symmetric_matrix(op)
    n = A.shape[0]
    if n < DENSE_LIMIT:
        w, V = la.eigh(A.toarray(), subset_by_value=(window.lo, window.hi))
        res.diagnostics["method"] = "dense"
    else:
        kk = min(k, n - 2)
        try:
            w, V = spla.eigsh(A.tocsc(), k=kk, sigma=window.center, which="LM", tol=1e-13,
                              v0=_start(A.shape[0]))
        except spla.ArpackNoConvergence as exc:
            raise SpectrumError(
                "shift-invert Lanczos did not converge",
                {"converged": len(exc.eigenvalues), "requested": kk, "n": n},
            ) from exc
        res.diagnostics["method"] = "shift-invert"
        inside = (w > window.lo) & (w < window.hi)
        w, V = w[inside], V[:, inside]
    order = sorted(range(len(w)), key=lambda i: (abs(w[i] - window.center), w[i], i))[:k]
    order = sorted(order, key=lambda i: (w[i], i))
    res.eigenvalues = np.asarray(w)[order]
    if vectors:
        res.eigenvectors = np.asarray(V)[:, order]
    return res


def eigen_residuals(op: DiscreteOperator, res: EigenResult) -> np.ndarray:
    """||A v - lambda v|| / ||v|| for each kept eigenpair."""
    A = _symmetric_matrix(op)
    V = res.eigenvectors
    R = A @ V - V * res.eigenvalues
    return np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)


def truncated_dirac(g, m, c, L_inf, h) -> DiscreteOperator:
    """Dirac operator with each half-line cut at L_inf and psi^1 = 0 at the tip."""
    gt, tips = g.truncated(L_inf)
    return assemble_dirac(gt, Layout(gt, make_grids(gt, h), tips), m, c)


def _smallest_abs(op, mc2, k0=8):
    A = _symmetric_matrix(op).tocsc()
    n = A.shape[0]
    k = min(k0, n - 2)
    while True:
        if n < DENSE_LIMIT:
            w = la.eigh(A.toarray(), eigvals_only=True)
        else:
            try:
                w = spla.eigsh(A, k=k, sigma=0.0, which="LM", tol=1e-13, v0=_start(n),
                                   return_eigenvectors=False)
            except spla.ArpackNoConvergence as exc:
                raise SpectrumError("gap eigensolve did not converge", {"k": k, "n": n}) from exc
        # every eigenvalue of modulus < mc^2 is captured once some |lambda| exceeds it
        if n < DENSE_LIMIT or np.max(np.abs(w)) > mc2 or k >= n - 2:
            return np.sort(w)
        k = min(2 * k, n - 2)


@dataclass
class GapReport:
    margin: float  # min |lambda| - mc^2; >= -tol certifies the gap
    margin_doubled: float
    in_gap: np.ndarray  # eigenvalues with |lambda| < mc^2 - tol
    stable: bool  # margin unchanged (< 1e-6) when L_inf is doubled
    mc2: float
    smallest: np.ndarray

    @property
    def certified(self) -> bool:
        return self.stable and self.in_gap.size == 0


def verify_spectral_gap(g, m, c, L_inf, h, tol=1e-3, stability_tol=1e-6) -> GapReport:
    """Check numerically that no eigenvalue enters (-mc^2 + tol, mc^2 - tol).

    Half-lines are truncated at ``L_inf`` with psi^1 = 0 at the tip; the run is
    repeated at 2 ``L_inf`` and the margin must agree to ``stability_tol``.
    """
    if not g.bounded_edges:
        raise ValidationError("spectral gap check needs a nonempty compact core")
    if not g.halflines:
        raise ValidationError("spectral gap check needs at least one half-line (noncompact graph)")
    if L_inf < 10 / (m * c):
        raise ValidationError(f"L_inf = {L_inf} is below 10/(m c) = {10 / (m * c)}")
    mc2 = m * c * c
    margins, evs = [], []
    for L in (L_inf, 2 * L_inf):
        w = _smallest_abs(truncated_dirac(g, m, c, L, h), mc2)
        evs.append(w)
        margins.append(float(np.min(np.abs(w)) - mc2))
    w = evs[0]
    return GapReport(
        margin=margins[0],
        margin_doubled=margins[1],
        in_gap=w[np.abs(w) < mc2 - tol],
        stable=abs(margins[0] - margins[1]) < stability_tol,
        mc2=mc2,
        smallest=w,
    )


def convergence_order(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
