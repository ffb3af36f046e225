"""Qubit linear maps in the Pauli transfer representation, and their
classification: positivity, Kadison-Schwarz, complete positivity.

A Hermiticity-preserving map Phi is stored as the real 4x4 matrix M with
``Phi(w0*I + w.s) = (M @ (w0, w))`` in Pauli coordinates. Complex coordinates
are handled by linearity, so ``apply`` works for every operator, not just
Hermitian ones.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .pauli import (
    PAULIS, InvalidInputError, QubitOperator, coords_dagger, coords_product,
    min_eig_coords, min_eig_hermitian, pauli_decompose,
)
from .witness import KSReport, SesquilinearMargin, Verdict, search_min_margin

__all__ = [
    "QubitMap", "PauliDiagonalMap", "PauliMixtureMap", "NonInvertibleError",
    "NotPositiveError", "InvalidModeError", "KSReport", "Verdict",
    "mixture_to_eigenvalues", "eigenvalues_to_mixture", "apply", "dual",
    "compose", "invert", "choi_matrix", "is_cp", "is_positive_diag",
    "ks_closed_form_diag", "ppp_margin", "ks_witness_search", "ks_margin",
    "ks2_check", "qks_check", "identity_map", "transposition_map",
    "unitary_map", "HADAMARD4",
]

CP_TOL = 1e-10
POSITIVE_TOL = 1e-12
PPP_TOL = 1e-12
DET_TOL = 1e-12

# p = HADAMARD4 @ (1, l1, l2, l3) / 4 and (1, l1, l2, l3) = HADAMARD4 @ p
HADAMARD4 = np.array([
    [1, 1, 1, 1],
    [1, 1, -1, -1],
    [1, -1, 1, -1],
    [1, -1, -1, 1],
], dtype=float)


class NonInvertibleError(ArithmeticError):
    """The map (or dynamics) is singular where an inverse is needed."""


class NotPositiveError(ValueError):
    pass


class InvalidModeError(ValueError):
    pass


class QubitMap:
    """Hermiticity-preserving linear map on 2x2 operators."""

    def __init__(self, transfer):
        m = np.array(transfer, dtype=float).reshape(4, 4)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("transfer matrix must be finite")
        m.setflags(write=False)
        self._transfer = m

    @property
    def transfer(self) -> np.ndarray:
        return self._transfer

    @classmethod
    def from_action(cls, action: Callable[[np.ndarray], np.ndarray]) -> "QubitMap":
        """Transfer matrix ``M_ij = tr(s_i action(s_j)) / 2`` from a matrix action.

        Raises if the action is not Hermiticity-preserving.
        """
        m = np.empty((4, 4), dtype=complex)
        for j in range(4):
            out = np.asarray(action(PAULIS[j]), dtype=complex)
            for i in range(4):
                m[i, j] = np.trace(PAULIS[i] @ out) / 2
        if np.max(np.abs(m.imag)) > 1e-12:
            raise InvalidInputError("action is not Hermiticity-preserving")
        return cls(m.real)

    def __call__(self, x) -> QubitOperator:
        return apply(self, x)

    def __matmul__(self, other: "QubitMap") -> "QubitMap":
        return compose(self, other)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(transfer={self._transfer.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, QubitMap) and np.array_equal(self._transfer, other._transfer)

    __hash__ = None

    def is_trace_preserving(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self._transfer[0] - [1, 0, 0, 0])) <= tol)

    def is_unital(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self._transfer[:, 0] - [1, 0, 0, 0])) <= tol)

    def apply_coords(self, c) -> np.ndarray:
        """Apply to (batched) complex Pauli coordinates, shape ``(..., 4)``."""
        return np.asarray(c, dtype=complex) @ self._transfer.T

    def diagonal_q(self, tol: float = 1e-12):
        """``(q1, q2, q3)`` if this is a unital trace-preserving Pauli-diagonal map, else None."""
        m = self._transfer
        if np.max(np.abs(m - np.diag(np.diag(m)))) > tol or abs(m[0, 0] - 1) > tol:
            return None
        return np.diag(m)[1:].copy()


class PauliDiagonalMap(QubitMap):
    """Unital trace-preserving map with ``Phi(s_k) = q_k s_k``."""

    def __init__(self, q, _trace: float = 1.0):
        q = np.asarray(q, dtype=float).reshape(3)
        super().__init__(np.diag([_trace, *q]))
        self.q = q
        self.q.setflags(write=False)

    def __repr__(self) -> str:
        return f"PauliDiagonalMap(q={self.q.tolist()!r})"


class PauliMixtureMap(PauliDiagonalMap):
    """``Lambda(rho) = sum_a p_a s_a rho s_a`` with ``s_0 = I``."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float).reshape(4)
        # unnormalized weights give Phi(I) = sum(p) I
        diag = HADAMARD4 @ p
        super().__init__(diag[1:], _trace=diag[0])
        self.p = p
        self.p.setflags(write=False)

    def is_cptp(self, tol: float = CP_TOL) -> bool:
        return bool(self.p.min() >= -tol and abs(self.p.sum() - 1) <= 1e-12)

    def __repr__(self) -> str:
        return f"PauliMixtureMap(p={self.p.tolist()!r})"


def mixture_to_eigenvalues(p) -> np.ndarray:
    """``(l1, l2, l3)`` of the Pauli mixture with weights ``p``."""
    return (HADAMARD4 @ np.asarray(p, dtype=float))[1:]


def eigenvalues_to_mixture(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return HADAMARD4 @ np.concatenate([[1.0], lam]) / 4


def identity_map() -> QubitMap:
    return QubitMap(np.eye(4))


def transposition_map() -> QubitMap:
    # s2^T = -s2, the other Paulis are symmetric
    return QubitMap(np.diag([1.0, 1.0, -1.0, 1.0]))


def unitary_map(u) -> QubitMap:
    """``X -> U X U^dag``."""
    u = np.asarray(u, dtype=complex)
    return QubitMap.from_action(lambda x: u @ x @ u.conj().T)


def _as_map(phi) -> QubitMap:
    if not isinstance(phi, QubitMap):
        raise TypeError(f"expected a QubitMap, got {type(phi).__name__}")
    return phi


def apply(phi: QubitMap, x) -> QubitOperator:
    c = pauli_decompose(x).as_array()
    return QubitOperator.from_coords(_as_map(phi).apply_coords(c))


def dual(phi: QubitMap) -> QubitMap:
    """``tr(X Phi(Y)) = tr(Phi#(X) Y)``; the Pauli basis is orthogonal, so this is the transpose."""
    m = _as_map(phi).transfer
    if isinstance(phi, PauliDiagonalMap) and phi.is_trace_preserving():
        return PauliDiagonalMap(np.diag(m)[1:])
    return QubitMap(m.T)


def compose(phi: QubitMap, psi: QubitMap) -> QubitMap:
    """``phi o psi`` (psi acts first)."""
    m = _as_map(phi).transfer @ _as_map(psi).transfer
    if isinstance(phi, PauliDiagonalMap) and isinstance(psi, PauliDiagonalMap):
        if np.allclose(m - np.diag(np.diag(m)), 0.0, atol=0.0) and m[0, 0] == 1.0:
            return PauliDiagonalMap(np.diag(m)[1:])
    return QubitMap(m)


def invert(phi: QubitMap) -> QubitMap:
    m = _as_map(phi).transfer
    det = np.linalg.det(m)
    if abs(det) <= DET_TOL:
        raise NonInvertibleError(f"transfer matrix is singular (det = {det:.3e})")
    if isinstance(phi, PauliDiagonalMap) and phi.is_trace_preserving():
        return PauliDiagonalMap(1.0 / phi.q)
    return QubitMap(np.linalg.inv(m))


def choi_matrix(phi: QubitMap) -> np.ndarray:
    """``(id (x) Phi)(|W><W|)`` with the normalized ``|W> = (|00> + |11>)/sqrt(2)``."""
    phi = _as_map(phi)
    c = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            c[2 * i:2 * i + 2, 2 * j:2 * j + 2] = apply(phi, e).matrix / 2
    return c


def is_cp(phi: QubitMap, tol: float = CP_TOL) -> bool:
    return min_eig_hermitian(choi_matrix(phi)) >= -tol


def is_positive_diag(q) -> bool:
    """Positivity of the unital Pauli-diagonal map: ``max |q_k| <= 1``."""
    q = np.asarray(q, dtype=float)
    return bool(np.max(np.abs(q)) <= 1 + POSITIVE_TOL)


def ppp_margin(q) -> float:
    """``1 + 2 q1 q2 q3 - (q1^2 + q2^2 + q3^2)``; nonnegative inside the KS region."""
    q1, q2, q3 = np.asarray(q, dtype=float)
    return float(1 + 2 * q1 * q2 * q3 - (q1 * q1 + q2 * q2 + q3 * q3))


def ks_closed_form_diag(q) -> dict:
    """Sufficient Kadison-Schwarz conditions for a unital Pauli-diagonal map.

    Returns ``certified`` (the cubic condition) and ``general_certified``
    (the three conditions ``A <= beta gamma``, ``B <= alpha gamma``,
    ``C <= alpha beta``), which coincide once ``|q_k| <= 1``. Failing both does
    not prove a violation.
    """
    q = np.asarray(q, dtype=float).reshape(3)
    if not is_positive_diag(q):
        raise NotPositiveError(f"map with q={q.tolist()} is not positive, so it cannot be KS")
    q1, q2, q3 = q
    alpha, beta, gamma = abs(1 - q1 ** 2), abs(1 - q2 ** 2), abs(1 - q3 ** 2)
    a_, b_, c_ = (q1 - q2 * q3) ** 2, (q2 - q1 * q3) ** 2, (q3 - q1 * q2) ** 2
    margin = ppp_margin(q)
    general = [beta * gamma - a_, alpha * gamma - b_, alpha * beta - c_]
    certified = margin >= -PPP_TOL
    general_certified = min(general) >= -PPP_TOL
    # A <= beta*gamma expands to exactly the cubic condition (same for B, C)
    assert certified == general_certified or abs(margin) < 1e-9, (q, margin, general)
    return {
        "certified": certified,
        "general_certified": general_certified,
        "margin": margin,
        "general_margins": general,
    }


def _ks_operator(m: np.ndarray):
    """``c -> coords of Phi(X^dag X) - Phi(X^dag) Phi(X)``."""
    mt = m.T

    def f(c):
        cd = coords_dagger(c)
        return coords_product(cd, c) @ mt - coords_product(cd @ mt, c @ mt)
    return f


def _inverse_coords(y: np.ndarray) -> np.ndarray:
    det = y[0] ** 2 - np.sum(y[1:] ** 2)
    return np.concatenate([[y[0]], -y[1:]]) / det


def _ks2_operator(m: np.ndarray):
    """``c -> coords of Phi(X X^dag) - Phi(X) Phi(I)^-1 Phi(X^dag)``."""
    mt = m.T
    y = m[:, 0]
    if min_eig_coords(y) <= 1e-10:
        raise InvalidInputError("KS-2 requires Phi(I) > 0")
    yinv = _inverse_coords(y).astype(complex)

    def f(c):
        cd = coords_dagger(c)
        return coords_product(c, cd) @ mt - coords_product(coords_product(c @ mt, yinv), cd @ mt)
    return f


def _qks_operator(m: np.ndarray):
    """``c -> coords of Phi(X^dag X) - Phi(X^dag) X - X^dag Phi(X) + X^dag Phi(I) X``."""
    mt = m.T
    y = m[:, 0].astype(complex)

    def f(c):
        cd = coords_dagger(c)
        return (coords_product(cd, c) @ mt
                - coords_product(cd @ mt, c)
                - coords_product(cd, c @ mt)
                + coords_product(coords_product(cd, y), c))
    return f


def _margin_at(f, x) -> float:
    c = pauli_decompose(x).as_array()
    return float(min_eig_coords(f(c[None, :]))[0])


def ks_margin(phi: QubitMap, x) -> float:
    """``min eig(Phi(X^dag X) - Phi(X^dag) Phi(X))`` at one operator X (not normalized)."""
    return _margin_at(_ks_operator(_as_map(phi).transfer), x)


def ks_witness_search(phi: QubitMap, *, mode: str = "ks", seed: int = 0,
                      budget: int = 2000, refine: int = 4) -> KSReport:
    """Search for X with ``Phi(X^dag X) < Phi(X^dag) Phi(X)``.

    ``mode="ks"`` needs a unital map; ``mode="ks2"`` uses the generalized
    inequality ``Phi(X X^dag) >= Phi(X) Phi(I)^-1 Phi(X^dag)`` and only needs
    ``Phi(I) > 0``. Sampling refutes but never certifies. Margins refer to
    unit-Frobenius-norm X.
    """
    phi = _as_map(phi)
    if mode == "ks":
        if not phi.is_unital():
            raise InvalidModeError("map is not unital; use mode='ks2'")
        operator = _ks_operator(phi.transfer)
    elif mode == "ks2":
        operator = _ks2_operator(phi.transfer)
    else:
        raise InvalidModeError(f"unknown mode {mode!r}")
    return search_min_margin(SesquilinearMargin(operator), seed=seed, budget=budget, refine=refine)


def ks2_check(phi: QubitMap, x) -> float:
    """``min eig(Phi(X X^dag) - Phi(X) Phi(I)^-1 Phi(X^dag))``."""
    return _margin_at(_ks2_operator(_as_map(phi).transfer), x)


def qks_check(phi: QubitMap, x) -> float:
    """``min eig(Phi(X^dag X) - Phi(X^dag) X - X^dag Phi(X) + X^dag Phi(I) X)``."""
    return _margin_at(_qks_operator(_as_map(phi).transfer), x)
