"""Derivative-free search for operators violating a matrix inequality.

The objects searched over are 2x2 complex operators X, parametrized by the
eight real numbers ``(Re w0, Im w0, ..., Re w3, Im w3)`` of their Pauli
coordinates and normalized to unit Frobenius norm. An objective maps a batch
of normalized coordinates, shape ``(n, 4)``, to the smallest eigenvalue of the
inequality's "LHS - RHS" operator, shape ``(n,)``. Negative values refute
the inequality.

Objectives are :class:`SesquilinearMargin` instances, evaluated directly on
the raw parameters.

Search: ``budget`` Gaussian random starts evaluated in one batch, then
golden-section line descent from the best few of them.
"""
from __future__ import annotations

import math

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .pauli import PauliCoordinates, min_eig_coords

VIOLATION_TOL = 1e-8
ACCEPT_TOL = 1e-10

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class Verdict(str, Enum):
    KS_CERTIFIED = "KS_CERTIFIED"
    VIOLATION = "VIOLATION"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class KSReport:
    verdict: Verdict
    witness: Optional[PauliCoordinates]
    margin: float
    evaluations: int = 0

    def __post_init__(self):
        if self.verdict is Verdict.VIOLATION:
            assert self.witness is not None and self.margin < -VIOLATION_TOL


def params_to_coords(x: np.ndarray) -> np.ndarray:
    """Real ``(n, 8)`` parameters to unit-Frobenius complex coordinates ``(n, 4)``."""
    c = x[..., 0::2] + 1j * x[..., 1::2]
    # ||X||_F^2 = 2 (|w0|^2 + |w|^2)
    norm = np.sqrt(2.0 * np.sum(np.abs(c) ** 2, axis=-1, keepdims=True))
    norm = np.where(norm == 0.0, 1.0, norm)
    return c / norm


def coords_to_params(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    x = np.empty(c.shape[:-1] + (8,))
    x[..., 0::2] = c.real
    x[..., 1::2] = c.imag
    return x


class SesquilinearMargin:
    """Margin objective for an operator inequality that is sesquilinear in X.

    ``func`` maps complex coordinates ``(n, 4)`` of X to the Pauli coordinates
    ``(n, 4)`` of the Hermitian operator ``F(X)`` whose positivity is tested;
    every term of ``F`` must be of the form ``conj(c_i) c_j``. The coordinates
    of ``F`` are then real quadratic forms in the eight real parameters of X,
    which are extracted once by polarization and evaluated with one einsum.
    The margin ``min eig F(X / ||X||_F)`` follows by homogeneity.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray]):
        self.func = func
        e = np.eye(4, dtype=complex)
        diag = func(e).real
        kmat = np.zeros((4, 4, 4), dtype=complex)
        for i in range(4):
            kmat[:, i, i] = diag[i]
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        plus = func(np.array([e[i] + e[j] for i, j in pairs]))
        twist = func(np.array([e[i] + 1j * e[j] for i, j in pairs]))
        for (i, j), gp, gt in zip(pairs, plus, twist):
            # f(e_i + e_j) = K_ii + K_jj + 2 Re K_ij, f(e_i + i e_j) = K_ii + K_jj - 2 Im K_ij
            re = (gp - diag[i] - diag[j]).real / 2
            im = -(gt - diag[i] - diag[j]).real / 2
            kmat[:, i, j] = re + 1j * im
            kmat[:, j, i] = re - 1j * im
        # conj(c) K c with c = u + i v, parameters interleaved (u0, v0, u1, v1, ...)
        forms = np.empty((4, 8, 8))
        forms[:, 0::2, 0::2] = kmat.real
        forms[:, 1::2, 1::2] = kmat.real
        forms[:, 0::2, 1::2] = -kmat.imag
        forms[:, 1::2, 0::2] = kmat.imag
        self.forms = forms
        gen = np.random.default_rng(12345)
        probe = gen.standard_normal((3, 4)) + 1j * gen.standard_normal((3, 4))
        direct = func(probe)
        via_forms = np.einsum("ni,kij,nj->nk", coords_to_params(probe), forms, coords_to_params(probe))
        if not np.allclose(direct.real, via_forms, atol=1e-10 * max(1.0, np.abs(direct).max())):
            raise ValueError("objective is not sesquilinear in the operator coordinates")

    def params(self, x: np.ndarray) -> np.ndarray:
        f = np.einsum("ni,kij,nj->nk", x, self.forms, x)
        norm2 = np.sum(x * x, axis=1)
        norm2 = np.where(norm2 == 0.0, 1.0, norm2)
        lam = f[:, 0] - np.sqrt(np.sum(f[:, 1:] ** 2, axis=1))
        # ||X||_F^2 = 2 |c|^2
        return lam / (2.0 * norm2)

    def line_coefficients(self, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Coefficients of ``t -> F(x + t d)`` and of the squared norm, per start.

        Row layout: ``[f0 (4), linear (4), quadratic (4), n0, 2 x.d]``; every
        Pauli coordinate of F is an exact quadratic in ``t``.
        """
        rx = np.einsum("kij,nj->nki", self.forms, x)
        f0 = np.einsum("ni,nki->nk", x, rx)
        lin = 2.0 * rx @ direction
        quad = np.broadcast_to(direction @ self.forms @ direction, f0.shape)
        n0 = np.sum(x * x, axis=1)
        xd = 2.0 * (x @ direction)
        return np.column_stack([f0, lin, quad, n0, xd])

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        return min_eig_coords(self.func(c)) / (2.0 * np.sum(np.abs(c) ** 2, axis=-1))


def _line_margin(c, t: float) -> float:
    f0 = c[0] + t * (c[4] + t * c[8])
    f1 = c[1] + t * (c[5] + t * c[9])
    f2 = c[2] + t * (c[6] + t * c[10])
    f3 = c[3] + t * (c[7] + t * c[11])
    norm2 = c[12] + t * (c[13] + t)
    if norm2 <= 0.0:
        norm2 = 1.0
    return (f0 - math.sqrt(f1 * f1 + f2 * f2 + f3 * f3)) / (2.0 * norm2)


def _golden_line(c, radius: float, steps: int) -> tuple[float, float]:
    """Golden-section search of the line margin on ``[-radius, radius]``."""
    lo, hi = -radius, radius
    a = hi - _GOLDEN * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)
    fa = _line_margin(c, a)
    fb = _line_margin(c, b)
    for _ in range(steps):
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - _GOLDEN * (hi - lo)
            fa = _line_margin(c, a)
        else:
            lo, a, fa = a, b, fb
            b = lo + _GOLDEN * (hi - lo)
            fb = _line_margin(c, b)
    return (a, fa) if fa < fb else (b, fb)


def _golden_refine(objective: SesquilinearMargin, x: np.ndarray, f: np.ndarray, max_sweeps: int,
                   rng: np.random.Generator, gs_steps: int = 12) -> tuple[np.ndarray, np.ndarray, int]:
    """Direction-wise golden-section descent on a batch of starting points.

    The first sweep runs along the eight parameter axes; later sweeps use a
    fresh random orthonormal basis each, which stops the zigzagging that axis
    directions show along the non-smooth ridges of a minimum eigenvalue.
    """
    x = x.copy()
    f = f.copy()
    n, dim = x.shape
    radius = np.full(n, 0.5)
    basis = np.eye(dim)
    evals = 0
    for sweep in range(max_sweeps):
        if sweep:
            basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        f_start = f.copy()
        x_start = x.copy()
        for i in range(dim):
            direction = basis[:, i]
            coefs = objective.line_coefficients(x, direction).tolist()
            for k in range(n):
                t, ft = _golden_line(coefs[k], float(radius[k]), gs_steps)
                if ft < f[k]:
                    x[k] += t * direction
                    f[k] = ft
            evals += n * (gs_steps + 2)
        # renormalize so the bracket radius keeps a fixed meaning
        scale = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(scale == 0.0, 1.0, scale)
        step = np.linalg.norm(x - x_start, axis=1)
        # positive margins crawling along a ridge count as stalled too
        stalled = (((f_start - f) <= np.maximum(1e-13, 5e-2 * np.maximum(f, 0.0)))
                   | ((f >= 0) & (f < ACCEPT_TOL)))
        # next bracket: a few times the last move, never growing
        radius = np.where(stalled, radius * 0.25, np.clip(4.0 * step, 0.1 * radius, radius))
        if np.all(radius < 1e-9):
            break
    return x, f, evals


def search_min_margin(objective: SesquilinearMargin, seed: int = 0, budget: int = 2000,
                      refine: int = 4, max_sweeps: int = 200) -> KSReport:
    """Minimize an inequality margin over unit-norm qubit operators.

    Sampling alone never certifies: the verdict is VIOLATION when the best
    margin is below ``-VIOLATION_TOL`` and UNDECIDED otherwise.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((budget, 8))
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)
    f0 = objective.params(starts)
    order = np.argsort(f0, kind="stable")[:min(refine, budget)]
    x, f, evals = _golden_refine(objective, starts[order], f0[order], max_sweeps, rng)
    evals += budget
    # lowest margin wins; ties go to the lexicographically smallest parameters
    keys = [(round(float(fi), 15), tuple(np.round(xi, 15))) for fi, xi in zip(f, x)]
    best = min(range(len(keys)), key=keys.__getitem__)
    margin = float(f[best])
    witness = PauliCoordinates.from_array(params_to_coords(x[best]))
    if margin < -VIOLATION_TOL:
        return KSReport(Verdict.VIOLATION, witness, margin, evals)
    return KSReport(Verdict.UNDECIDED, witness, margin, evals)
