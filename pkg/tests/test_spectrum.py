import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nldgraph.dirac_op import assemble_dirac, assemble_laplacian_kirchhoff
from nldgraph.discretize import Layout, make_grids
from nldgraph.errors import ValidationError
from nldgraph.graph_core import parse_graph
from nldgraph.spectrum import (
    SpectralWindow,
    convergence_order,
    discrete_spectrum,
    eigen_residuals,
    segment_dirac_eigenvalues_closed_form,
    verify_spectral_gap,
)

PI_SEG = parse_graph(f"vertex a\nvertex b\nedge e a b {math.pi!r}\n")


def seg_op(n, m=1.0, c=1.0, dirichlet=("a", "b"), g=PI_SEG):
    lay = Layout(g, make_grids(g, g.bounded_edges[0].length / n), frozenset(dirichlet))
    return assemble_dirac(g, lay, m, c)


def test_closed_form_examples():
    ev = segment_dirac_eigenvalues_closed_form(1, 1, math.pi, 2)
    assert ev == pytest.approx([-math.sqrt(5), -math.sqrt(2), -1, math.sqrt(2), math.sqrt(5)])
    ev = segment_dirac_eigenvalues_closed_form(1, 1, math.pi, 2, "kirchhoff_type_deg1")
    assert ev == pytest.approx([-math.sqrt(5), -math.sqrt(2), 1, math.sqrt(2), math.sqrt(5)])
    ev = segment_dirac_eigenvalues_closed_form(1, 1, math.pi, 0, "mixed")
    assert ev == pytest.approx([-math.sqrt(1.25), math.sqrt(1.25)])
    with pytest.raises(ValueError):
        segment_dirac_eigenvalues_closed_form(1, 1, 1, 2, "robin")


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.01, 100), st.floats(0.01, 10),
       st.sampled_from(["first_component_dirichlet", "kirchhoff_type_deg1", "mixed"]))
def test_closed_form_above_threshold(m, c, length, bc):
    ev = segment_dirac_eigenvalues_closed_form(m, c, length, 5, bc)
    assert all(abs(v) >= m * c * c * (1 - 1e-15) for v in ev)
    assert ev == sorted(ev)


@pytest.mark.parametrize("bc, dirichlet", [("first_component_dirichlet", ("a", "b")),
                                           ("kirchhoff_type_deg1", ()),
                                           ("mixed", ("a",))])
def test_discrete_matches_characteristic_roots(bc, dirichlet):
    op = seg_op(2000, dirichlet=dirichlet)
    exact = np.array(segment_dirac_eigenvalues_closed_form(1, 1, math.pi, 3, bc))
    exact = exact[np.abs(exact) < 3.3]
    res = discrete_spectrum(op, SpectralWindow(-3.3, 3.3, 20), vectors=True)
    assert len(res.eigenvalues) == len(exact)
    assert np.all(np.abs(res.eigenvalues - exact) <= 1e-4 * np.abs(exact))
    assert np.max(eigen_residuals(op, res)) <= 1e-8


def test_mesh_convergence_order():
    hs, errs = [], []
    for n in (250, 500, 1000):
        res = discrete_spectrum(seg_op(n), SpectralWindow(0.5, 2.0, 1))
        errs.append(abs(res.eigenvalues[0] - math.sqrt(2)))
        hs.append(math.pi / n)
    assert 1.8 <= convergence_order(hs, errs) <= 2.2


def test_symmetry_about_zero():
    res = discrete_spectrum(seg_op(400), SpectralWindow(-5, 5, 50))
    w = res.eigenvalues[np.abs(res.eigenvalues + 1) > 1e-9]  # drop the threshold mode
    assert np.allclose(np.sort(w), np.sort(-w), atol=1e-12)


def test_neumann_laplacian():
    op = assemble_laplacian_kirchhoff(PI_SEG, make_grids(PI_SEG, math.pi / 2000))
    res = discrete_spectrum(op, SpectralWindow(-0.5, 9.5, 4))
    assert res.eigenvalues == pytest.approx([0, 1, 4, 9], abs=1e-4)


def test_empty_window():
    res = discrete_spectrum(seg_op(50), SpectralWindow(1.0, 1.0, 5))
    assert res.eigenvalues.size == 0


def test_ordering_nearest_to_centre():
    res = discrete_spectrum(seg_op(200), SpectralWindow(-10, 10, 3))
    # nearest to 0 are -1 and +-sqrt(2); ties on |lambda| broken by the smaller value
    assert res.eigenvalues == pytest.approx([-math.sqrt(2), -1, math.sqrt(2)], rel=1e-4)


def test_sparse_and_dense_agree():
    op = seg_op(1200)  # 2399 unknowns: sparse path
    a = discrete_spectrum(op, SpectralWindow(-3, 3, 6)).eigenvalues
    assert discrete_spectrum(op, SpectralWindow(-3, 3, 6)).diagnostics == {"method": "shift-invert"}
    small = seg_op(900)  # dense path
    b = discrete_spectrum(small, SpectralWindow(-3, 3, 6)).eigenvalues
    assert np.allclose(a, b, rtol=1e-5)


def test_gap_three_star(star):
    rep = verify_spectral_gap(star, 1.0, 1.0, 20.0, 0.05)
    assert rep.in_gap.size == 0
    assert rep.certified
    assert rep.margin >= -1e-3


def test_gap_preconditions(segment, star):
    with pytest.raises(ValidationError):
        verify_spectral_gap(segment, 1.0, 1.0, 20.0, 0.05)
    with pytest.raises(ValidationError):
        verify_spectral_gap(star, 1.0, 1.0, 5.0, 0.05)
    empty = parse_graph("vertex o\nhalfline a o\nhalfline b o\n")
    with pytest.raises(ValidationError):
        verify_spectral_gap(empty, 1.0, 1.0, 20.0, 0.05)
