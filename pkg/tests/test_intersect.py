import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpsparent import MpsTensor, Subspace, random_mps
from mpsparent.budget import memory_budget
from mpsparent.intersect import (
    brute_force_intersection,
    dim_lower_bound,
    int_holds,
    intersect_subspaces,
    intersection_space,
    one_minus_cos,
    principal_angles,
    same_span,
    transitivity_check,
)
from mpsparent.models import aklt_tensor


def random_basis(rng, n, k):
    m = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return np.linalg.qr(m)[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 4), st.integers(0, 3), st.integers(0, 3))
def test_planted_intersection(seed, k, a, b):
    rng = np.random.default_rng(seed)
    n = 14
    common = random_basis(rng, n, k + a + b)
    W, X, Y = common[:, :k], common[:, k:k + a], common[:, k + a:]
    U = Subspace(n, np.linalg.qr(np.hstack([W, X]) @ random_basis(rng, k + a, k + a))[0]
                 if k + a else np.zeros((n, 0)))
    V = Subspace(n, np.linalg.qr(np.hstack([W, Y]))[0] if k + b else np.zeros((n, 0)))
    I = intersect_subspaces(U, V)
    assert I.dim == k
    if k:
        assert same_span(I, Subspace(n, W))


def test_principal_angles_small_and_large():
    n = 3
    e = np.eye(n)
    t = 1e-6
    U = Subspace(n, e[:, :1])
    V = Subspace(n, (np.cos(t) * e[:, 0] + np.sin(t) * e[:, 1])[:, None])
    assert principal_angles(U, V)[0] == pytest.approx(t, rel=1e-6)
    W = Subspace(n, e[:, 2:])
    assert principal_angles(U, W)[0] == pytest.approx(np.pi / 2)


def test_one_minus_cos_is_stable():
    import mpmath
    mpmath.mp.dps = 50
    lam = np.array([0.0, 1e-12, 1e-17, 0.5, 1.0])
    exact = [float(1 - mpmath.sqrt(1 - mpmath.mpf(x))) for x in lam]
    np.testing.assert_allclose(one_minus_cos(lam), exact, rtol=1e-12, atol=0)


@pytest.mark.parametrize("d,D,L,value", [(5, 4, 3, 35), (6, 5, 3, 84), (5, 4, 4, -50)])
def test_lower_bound(d, D, L, value):
    assert dim_lower_bound(d, D, L) == value


@pytest.mark.parametrize("d,D", [(3, 2), (4, 3)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_iterative_matches_brute_force(d, D, seed):
    A = random_mps(d, D, seed)
    for L in (2, 3, 4):
        I, rep = intersection_space(A, 2, L)
        B = brute_force_intersection(A, 2, L)
        assert I.dim == B.dim
        assert same_span(I, B)
        assert rep.status == "ok"


def test_brute_force_edge_cases():
    A = random_mps(3, 2, 0)
    from mpsparent import mps_space
    assert same_span(brute_force_intersection(A, 3, 3), mps_space(A, 3))
    # every 1-site window is trivial when S_1 is the whole space
    assert brute_force_intersection(random_mps(4, 2, 0), 1, 3).dim == 64


def test_routes_and_streaming_agree():
    A = random_mps(5, 4, 3)
    ref, _ = intersection_space(A, 2, 4, route="gram")
    for kw in ({"route": "projector"}, {"route": "gram", "block_rows": 7},
               {"route": "projector", "block_rows": 3}):
        I, rep = intersection_space(A, 2, 4, **kw)
        assert [x[1] for x in rep.dims] == [16, 35, 31]
        assert same_span(I, ref)


def test_table_row_4_5():
    _, rep = intersection_space(random_mps(5, 4, 1), 2, 5)
    assert [x[1] for x in rep.dims] == [16, 35, 31, 16]
    assert rep.verdicts[-1] == (5, True) and not rep.borderline
    for L, dim in rep.dims:
        assert dim >= dim_lower_bound(5, 4, L)


def test_padding_physical_dimension_keeps_dims():
    for d, D in ((3, 2), (4, 3)):
        A = random_mps(d, D, 5)
        padded = MpsTensor(np.concatenate([A.entries, np.zeros((1, D, D))]))
        _, r1 = intersection_space(A, 2, 4)
        _, r2 = intersection_space(padded, 2, 4)
        assert r1.dims == r2.dims


def test_int_holds_and_transitivity():
    A = aklt_tensor()
    assert int_holds(A, 2, 3)
    ok, v = transitivity_check(A, 2, 3, 4)
    assert ok and all(v.values())
    B = random_mps(5, 4, 0)
    assert not int_holds(B, 2, 3)
    ok, v = transitivity_check(B, 2, 3, 4)
    assert ok and not v[(2, 3)]


def test_resource_limit_is_reported():
    with memory_budget(200_000):
        _, rep = intersection_space(random_mps(5, 4, 0), 2, 5)
    assert rep.status == "resource-limit"
    assert rep.dims and rep.dims[0] == (2, 16)
    assert rep.peak_memory > 200_000


def test_report_serialises():
    import json
    _, rep = intersection_space(aklt_tensor(), 2, 3, timings=False)
    d = rep.to_dict()
    assert json.loads(json.dumps(d))["dims"] == [[2, 4], [3, 4]]
    assert d["wall_time"] is None
