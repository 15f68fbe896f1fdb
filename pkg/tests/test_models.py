import numpy as np
import pytest

from mpsparent import ConsistencyError, DomainError, injectivity_length, mps_space
from mpsparent.intersect import int_holds, principal_angles
from mpsparent.models import (
    AkltSpec,
    aklt_tensor,
    bond_sequence_count,
    degenerate_family,
    find_exceptional,
    generalized_aklt,
    psd_threshold,
    spin2_family,
    two_site_map,
    weight_vector,
)
from mpsparent.parent import apply_pbc_hamiltonian, f_det, parent_term
from mpsparent.spinalg import HalfInt


def test_spec_parsing_and_validation():
    s = AkltSpec.parse("j=3/2 J=2 Q=0")
    assert (s.d, s.D) == (5, 4)
    assert str(s) == "j=3/2 J=2 Q=0"
    for bad in ("j=1 J=3", "j=1 J=1 Q=3", "j=1 J=1/2"):
        with pytest.raises(DomainError):
            AkltSpec.parse(bad)


def test_aklt_is_generalized_aklt_up_to_gauge():
    S1 = mps_space(aklt_tensor(), 2)
    S2 = mps_space(generalized_aklt(AkltSpec("1/2", 1)), 2)
    assert np.max(principal_angles(S1, S2)) < 1e-10


@pytest.mark.parametrize("j", ["1/2", "1", "3/2"])
def test_full_spin_models(j):
    spec = AkltSpec(j, HalfInt.of(j) + HalfInt.of(j))
    A = generalized_aklt(spec)
    assert np.linalg.norm(A.entries) == pytest.approx(1.0)
    assert injectivity_length(A) == 2
    assert int_holds(A, 2, 3)


def test_weights_aklt_and_exceptional():
    w = weight_vector(AkltSpec("1/2", 1))
    assert not w.zero_flags and all(abs(x) > 0.1 for _, x in w.weights)
    w = weight_vector(AkltSpec("3/2", 2))
    assert [str(s) for s in w.zero_flags] == ["2"]
    assert w.residual < 1e-10
    assert abs(w.weight(2)) < 1e-12 * max(abs(x) for _, x in w.weights)


def test_weight_reconstruction_is_independent():
    # rebuild the two-site map from the weights by direct CG sums
    from mpsparent.spinalg import cg
    spec = AkltSpec("1", 2)
    W = two_site_map(spec)
    w = weight_vector(spec)
    rebuilt = np.zeros_like(W)
    ms_j, ms_J = spec.j.ms(), spec.J.ms()
    for S, ws in w.weights:
        for Ms in S.ms():
            for i1, M1 in enumerate(ms_J):
                for i2, M2 in enumerate(ms_J):
                    for a, ma in enumerate(ms_j):
                        for b, mb in enumerate(ms_j):
                            c = cg(spec.J, M1, spec.J, M2, S, Ms) * cg(spec.j, ma, spec.j, mb, S, Ms) \
                                if M1 + M2 == Ms and ma + mb == Ms else 0.0
                            rebuilt[i1 * 5 + i2, a * 3 + b] += ws * c
    np.testing.assert_allclose(rebuilt, W, atol=1e-12)


def test_weights_need_singlet():
    with pytest.raises(DomainError):
        weight_vector(AkltSpec("1", 1, 2))


@pytest.mark.parametrize("tol", [1e-11, 1e-12, 1e-13])
def test_exceptional_scan_stable_in_tolerance(tol):
    found = {(str(j), str(J)) for j, J, _ in find_exceptional(5, tol)}
    assert found == {("3/2", "2"), ("3", "5"), ("5", "9")}


def test_exceptional_scan_small():
    assert find_exceptional(1) == []


def test_exceptional_spaces():
    A = generalized_aklt(AkltSpec("3/2", 2))
    assert mps_space(A, 2).dim == 11
    assert mps_space(A, 3).dim == 15
    assert injectivity_length(A) == 4


def test_spin2_family():
    for lam in (0.0, 0.5, 1.0):
        _, rep = spin2_family(lam)
        assert rep.kernel_dim == 11 and rep.kernel_is_013
        assert rep.min_eig > -1e-10
    assert spin2_family(1.2)[1].min_eig < 0
    assert psd_threshold() == pytest.approx(60 / 53, abs=1e-6)


def test_degenerate_family():
    fam = degenerate_family(3, 3, 1, 1, seed=4)
    A = fam.tensor
    for i in range(3):
        np.testing.assert_allclose(fam.X @ A.entries[i], A.entries[i] @ fam.Y, atol=1e-10)
    np.testing.assert_allclose(fam.X @ fam.X, fam.X, atol=1e-8)
    assert injectivity_length(A) == 2
    assert fam.witness_count(5) > fam.witness_count(3)
    assert fam.witness_count(6) > fam.witness_count(4)
    term = parent_term(A, 2)
    for N in (3, 4, 5):
        W = fam.witnesses[N]
        assert np.linalg.norm(apply_pbc_hamiltonian(term, N, W)) < 1e-9 * np.linalg.norm(W)
    assert f_det(A, 2, 3).zero
    assert not int_holds(A, 2, 3) and not int_holds(A, 2, 4)


def test_degenerate_family_rejects_bad_ranks():
    with pytest.raises(DomainError):
        degenerate_family(3, 3, 0, 1, seed=0)
    with pytest.raises(ConsistencyError):
        # d=1 can never be injective on two sites with D=3
        degenerate_family(1, 3, 1, 1, seed=0, retries=2)


def test_bond_sequence_count():
    # J = 2 j_cap forces every bond to j_cap
    assert bond_sequence_count(2, 1, 6) == 1
    assert bond_sequence_count(2, 1, 6, "periodic") == 1
    counts = [bond_sequence_count(1, 2, N) for N in range(2, 12)]
    assert all(b > a for a, b in zip(counts, counts[1:]))
    T = np.array([[1 if abs(a - b) <= 2 <= a + b and (a + b) % 2 == 0 else 0
                   for b in range(5)] for a in range(5)])
    assert bond_sequence_count(1, 2, 7, "periodic") == int(np.trace(np.linalg.matrix_power(T, 7)))
    rho = max(abs(np.linalg.eigvals(T)))
    ratio = bond_sequence_count(1, 2, 61) / bond_sequence_count(1, 2, 60)
    assert ratio == pytest.approx(rho, rel=1e-3)
