import numpy as np
import pytest

from ksdiv.pauli import min_eig_coords
from ksdiv.witness import (
    KSReport, SesquilinearMargin, Verdict, coords_to_params, params_to_coords,
    search_min_margin,
)


def sandwich(k):
    """F(X) coordinates: (conj(c) K_0 c, 0, 0, conj(c) K_3 c) for Hermitian K."""
    def f(c):
        out = np.zeros(c.shape, dtype=complex)
        out[:, 0] = np.einsum("ni,ij,nj->n", c.conj(), k[0], c)
        out[:, 3] = np.einsum("ni,ij,nj->n", c.conj(), k[1], c)
        return out
    return f


def test_params_roundtrip(rng):
    c = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    back = params_to_coords(coords_to_params(c))
    norms = np.sqrt(2 * np.sum(np.abs(c) ** 2, axis=1, keepdims=True))
    assert np.allclose(back, c / norms)


def test_forms_reproduce_objective(rng):
    k = rng.standard_normal((2, 4, 4)) + 1j * rng.standard_normal((2, 4, 4))
    k = k + np.conj(np.swapaxes(k, 1, 2))
    obj = SesquilinearMargin(sandwich(k))
    x = rng.standard_normal((6, 8))
    c = x[:, 0::2] + 1j * x[:, 1::2]
    direct = min_eig_coords(sandwich(k)(c)) / (2 * np.sum(np.abs(c) ** 2, axis=1))
    assert np.allclose(obj.params(x), direct)
    assert np.allclose(obj(c), direct)


def test_non_sesquilinear_rejected():
    with pytest.raises(ValueError):
        SesquilinearMargin(lambda c: c ** 2)


def test_search_finds_known_minimum():
    # margin = min over unit c of the smallest eigenvalue of diag(1, 2, 3, -1)
    k = np.zeros((2, 4, 4), dtype=complex)
    k[0] = np.diag([1.0, 2.0, 3.0, -1.0])
    report = search_min_margin(SesquilinearMargin(sandwich(k)), seed=3, budget=200)
    # normalization ||X||_F^2 = 2 |c|^2 halves the eigenvalue
    assert report.verdict is Verdict.VIOLATION
    assert report.margin == pytest.approx(-0.5, abs=1e-8)


def test_search_never_certifies():
    k = np.zeros((2, 4, 4), dtype=complex)
    k[0] = np.eye(4)
    report = search_min_margin(SesquilinearMargin(sandwich(k)), budget=50)
    assert report.verdict is Verdict.UNDECIDED
    assert report.margin == pytest.approx(0.5)


def test_search_is_deterministic():
    k = np.zeros((2, 4, 4), dtype=complex)
    k[0] = np.diag([1.0, -0.3, 0.2, 0.0])
    k[1] = np.diag([0.0, 0.5, 0.0, 1.0])
    obj = SesquilinearMargin(sandwich(k))
    a = search_min_margin(obj, seed=11, budget=100)
    b = search_min_margin(obj, seed=11, budget=100)
    assert a.margin == b.margin
    assert np.array_equal(a.witness.as_array(), b.witness.as_array())


def test_violation_needs_witness():
    with pytest.raises(AssertionError):
        KSReport(Verdict.VIOLATION, None, -1.0)


def test_budget_validation():
    k = np.zeros((2, 4, 4), dtype=complex)
    with pytest.raises(ValueError):
        search_min_margin(SesquilinearMargin(sandwich(k)), budget=0)
