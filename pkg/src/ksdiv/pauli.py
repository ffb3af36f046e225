"""Pauli-coordinate calculus for 2x2 complex operators.

Every X in M_2(C) is written as ``X = w0*I + w1*s1 + w2*s2 + w3*s3`` with the
standard computational-basis Pauli matrices. Internally coordinates are kept
as a complex array ``(w0, w1, w2, w3)`` of shape ``(..., 4)`` so that batches
of operators can be pushed through the same formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IDENTITY", "SX", "SY", "SZ", "PAULIS",
    "InvalidInputError", "PauliCoordinates", "QubitOperator",
    "pauli_decompose", "pauli_compose", "complex_cross", "coords_product",
    "coords_dagger", "min_eig_hermitian", "min_eig_coords", "trace_norm",
    "jacobi_eigvalsh",
]

IDENTITY = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([IDENTITY, SX, SY, SZ])

HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-14


class InvalidInputError(ValueError):
    """Raised for non-finite or structurally invalid operator input."""


@dataclass(frozen=True)
class PauliCoordinates:
    w0: complex
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex).reshape(3)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "w0", complex(self.w0))

    @classmethod
    def from_array(cls, c) -> "PauliCoordinates":
        c = np.asarray(c, dtype=complex).reshape(4)
        return cls(c[0], c[1:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.w0], self.w])

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.as_array().imag) <= tol))


@dataclass(frozen=True)
class QubitOperator:
    """A 2x2 complex operator with its Pauli coordinates cached alongside."""

    matrix: np.ndarray
    coords: PauliCoordinates = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex).reshape(2, 2)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("operator entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "coords", pauli_decompose(m))

    @classmethod
    def from_coords(cls, c) -> "QubitOperator":
        return pauli_compose(c)

    @property
    def dag(self) -> "QubitOperator":
        return QubitOperator(self.matrix.conj().T)

    def __matmul__(self, other: "QubitOperator") -> "QubitOperator":
        return QubitOperator(self.matrix @ _as_matrix(other))

    def __add__(self, other):
        return QubitOperator(self.matrix + _as_matrix(other))

    def __sub__(self, other):
        return QubitOperator(self.matrix - _as_matrix(other))

    def __mul__(self, scalar):
        return QubitOperator(self.matrix * scalar)

    __rmul__ = __mul__


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, QubitOperator):
        return x.matrix
    return np.asarray(x, dtype=complex)


def _as_coords(c) -> np.ndarray:
    if isinstance(c, PauliCoordinates):
        return c.as_array()
    if isinstance(c, QubitOperator):
        return c.coords.as_array()
    return np.asarray(c, dtype=complex)


def pauli_decompose(x) -> PauliCoordinates:
    """Coordinates ``w0 = tr(X)/2``, ``w_k = tr(s_k X)/2``."""
    m = _as_matrix(x)
    if m.shape != (2, 2):
        raise InvalidInputError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("operator entries must be finite")
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    return PauliCoordinates((a + d) / 2, [(b + c) / 2, 1j * (b - c) / 2, (a - d) / 2])


def pauli_compose(c) -> QubitOperator:
    w0, w1, w2, w3 = _as_coords(c)
    if not np.all(np.isfinite([w0, w1, w2, w3])):
        raise InvalidInputError("coordinates must be finite")
    return QubitOperator([[w0 + w3, w1 - 1j * w2], [w1 + 1j * w2, w0 - w3]])


def complex_cross(a, b) -> np.ndarray:
    """Bilinear cross product of complex 3-vectors; no conjugation applied."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def coords_product(a, b) -> np.ndarray:
    """Pauli coordinates of the product ``A @ B``, batched over leading axes.

    Uses ``(a0 + a.s)(b0 + b.s) = a0 b0 + a.b + (a0 b + b0 a + i a x b).s``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    a0, av = a[..., :1], a[..., 1:]
    b0, bv = b[..., :1], b[..., 1:]
    scalar = a0 * b0 + np.sum(av * bv, axis=-1, keepdims=True)
    vector = a0 * bv + b0 * av + 1j * complex_cross(av, bv)
    return np.concatenate([scalar, vector], axis=-1)


def coords_dagger(a) -> np.ndarray:
    return np.conj(np.asarray(a, dtype=complex))


def min_eig_coords(c) -> np.ndarray:
    """Smallest eigenvalue of Hermitian operators given by Pauli coordinates.

    Imaginary parts (which must be rounding noise) are dropped, i.e. the
    operator is symmetrized before the closed form ``w0 - |w|`` is applied.
    """
    c = np.asarray(c)
    r = c.real
    return r[..., 0] - np.sqrt(np.sum(r[..., 1:] ** 2, axis=-1))


def _check_hermitian(m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix entries must be finite")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > HERMITIAN_TOL:
        raise InvalidInputError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return (m + m.conj().T) / 2


def jacobi_eigvalsh(a, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small Hermitian matrix by cyclic Jacobi rotations.

    The complex n x n problem is embedded as the real symmetric 2n x 2n matrix
    ``[[Re, -Im], [Im, Re]]``, whose spectrum is that of ``a`` with every
    eigenvalue doubled. Sweeps stop once the off-diagonal Frobenius mass falls
    below ``tol`` (scaled by the matrix norm when that exceeds one).
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    s = np.block([[a.real, -a.imag], [a.imag, a.real]])
    m = 2 * n
    scale = max(1.0, float(np.linalg.norm(s)))
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(s ** 2) - np.sum(np.diag(s) ** 2))
        if off < tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = s[p, q]
                if apq == 0.0:
                    continue
                theta = (s[q, q] - s[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                sp = s[:, p].copy()
                sq = s[:, q].copy()
                s[:, p] = c * sp - sn * sq
                s[:, q] = sn * sp + c * sq
                rp = s[p, :].copy()
                rq = s[q, :].copy()
                s[p, :] = c * rp - sn * rq
                s[q, :] = sn * rp + c * rq
    else:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    ev = np.sort(np.diag(s))
    # each eigenvalue appears twice in the real embedding
    return (ev[0::2] + ev[1::2]) / 2


def min_eig_hermitian(x) -> float:
    """Smallest eigenvalue of a Hermitian 2x2 or 4x4 matrix.

    2x2 input goes through the closed form on Pauli coordinates; larger input
    through :func:`jacobi_eigvalsh`.
    """
    m = _check_hermitian(_as_matrix(x))
    if m.shape == (2, 2):
        return float(min_eig_coords(pauli_decompose(m).as_array()))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    return float(jacobi_eigvalsh(m)[0])


def trace_norm(x) -> float:
    """``||X||_1 = Tr sqrt(X^dag X)``, the sum of singular values."""
    m = _as_matrix(x)
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("operator entries must be finite")
    c = pauli_decompose(m).as_array()
    if np.all(np.abs(c.imag) <= 1e-12):
        w0 = c[0].real
        r = float(np.linalg.norm(c[1:].real))
        return abs(w0 + r) + abs(w0 - r)
    # singular values of a 2x2 from the invariants of X^dag X
    fro2 = float(np.sum(np.abs(m) ** 2))
    det = abs(np.linalg.det(m))
    return float(np.sqrt(max(fro2 + 2 * det, 0.0)))
