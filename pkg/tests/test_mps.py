import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpsparent import (
    DomainError,
    MpsTensor,
    Subspace,
    blocking_map,
    injectivity_length,
    mps_space,
    random_mps,
    state_vector,
)
from mpsparent.budget import ResourceLimitError, memory_budget
from mpsparent.models import aklt_tensor
from mpsparent.mps import gram_rank, transfer_gram


def naive_state(A, N, X):
    """Coefficients tr[A^{i1}...A^{iN} X] by explicit loop over configurations."""
    d = A.d
    out = np.zeros(d**N, complex)
    for idx in range(d**N):
        digits = np.unravel_index(idx, (d,) * N)
        m = np.eye(A.D)
        for i in digits:
            m = m @ A.entries[i]
        out[idx] = np.trace(m @ X)
    return out


def test_random_mps_is_deterministic():
    a, b = random_mps(3, 2, 7), random_mps(3, 2, 7)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert not np.allclose(a.entries, random_mps(3, 2, 8).entries)
    assert np.iscomplexobj(a.entries)


def test_json_roundtrip(tmp_path):
    A = random_mps(4, 3, 1)
    assert np.array_equal(MpsTensor.loads(A.dumps()).entries, A.entries)
    A.save(tmp_path / "a.json")
    assert np.array_equal(MpsTensor.load(tmp_path / "a.json").entries, A.entries)


def test_tensor_validation():
    with pytest.raises(DomainError):
        MpsTensor(np.zeros((2, 2, 3)))
    with pytest.raises(DomainError):
        MpsTensor(np.full((2, 2, 2), np.nan))


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_state_vector_matches_naive(N):
    A = random_mps(3, 2, 3)
    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_allclose(state_vector(A, N, X), naive_state(A, N, X), atol=1e-12)


def test_blocking_map_convention():
    A = random_mps(3, 2, 5)
    X = np.arange(4).reshape(2, 2) + 1j
    P = blocking_map(A, 3)
    np.testing.assert_allclose(P @ X.ravel(), naive_state(A, 3, X), atol=1e-12)


def test_aklt_spaces():
    A = aklt_tensor()
    assert mps_space(A, 1).dim == 3
    assert mps_space(A, 2).dim == 4
    assert mps_space(A, 3).dim == 4
    assert injectivity_length(A) == 2


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32), st.integers(1, 3))
def test_gram_rank_matches_svd(d, D, seed, ell):
    A = random_mps(d, D, seed)
    S = mps_space(A, ell)
    assert gram_rank(A, ell)[0] == S.dim
    assert S.orthonormality_error() < 1e-10
    assert S.dim <= min(d**ell, D * D)


def test_transfer_gram_is_p_dagger_p():
    A = random_mps(3, 2, 11)
    P = blocking_map(A, 3)
    np.testing.assert_allclose(transfer_gram(A, 3), P.conj().T @ P, atol=1e-10)


def test_generic_injectivity_lengths():
    # generic tensors are injective once d^ell >= D^2
    assert injectivity_length(random_mps(4, 2, 0)) == 1
    assert injectivity_length(random_mps(3, 2, 0)) == 2
    assert injectivity_length(random_mps(2, 3, 0)) == 4


def test_non_injective_returns_none():
    # block-diagonal tensor never reaches full rank
    e = np.zeros((2, 2, 2), complex)
    e[0] = np.diag([1.0, 0.5])
    e[1] = np.diag([0.3, -1.0])
    assert injectivity_length(MpsTensor(e), ell_max=5) is None


def test_subspace_helpers():
    v = np.array([[1.0, 1.0], [0.0, 1e-14], [0.0, 0.0]])
    S = Subspace.from_vectors(v)
    assert S.dim == 1
    assert S.residual(np.array([0.0, 1.0, 0.0])) == pytest.approx(1.0)
    assert S.residual(np.array([2.0, 0.0, 0.0])) < 1e-14
    np.testing.assert_allclose(S.projector() @ S.projector(), S.projector(), atol=1e-14)
    assert Subspace.full(3).dim == 3


def test_budget_refuses_large_allocation():
    with memory_budget(1024):
        with pytest.raises(ResourceLimitError):
            state_vector(random_mps(3, 2, 0), 8)
