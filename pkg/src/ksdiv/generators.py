"""Time-local qubit generators and their classification.

Builders for GKSL generators (Schrodinger and Heisenberg pictures), the
rate-triple Pauli generator ``L(rho) = 1/2 sum_k g_k (s_k rho s_k - rho)``, the
sign conditions for P-, KS- and CP-divisibility, and a numerical
dissipativity test ``L#(X^dag X) >= L#(X^dag) X + X^dag L#(X)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .maps import QubitMap, _margin_at
from .pauli import (
    InvalidInputError, QubitOperator, complex_cross, coords_dagger, coords_product,
)
from .witness import KSReport, SesquilinearMargin, search_min_margin

SIGN_TOL = 1e-12
TP_TOL = 1e-12

# ordered pairs (i, j), i != j, in the order the margins are reported
ORDERED_PAIRS = [(i, j) for i in range(3) for j in range(3) if i != j]
UNORDERED_PAIRS = [(1, 2), (0, 2), (0, 1)]


class InvalidGeneratorError(ValueError):
    pass


class DegenerateGeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GKSLData:
    """Hamiltonian plus weighted jump operators ``(V_k, gamma_k)``.

    Rates are not required to be nonnegative.
    """

    H: np.ndarray
    jumps: Sequence[tuple] = ()

    def __post_init__(self):
        h = np.asarray(self.H.matrix if isinstance(self.H, QubitOperator) else self.H, dtype=complex)
        if h.shape != (2, 2) or not np.all(np.isfinite(h)):
            raise InvalidInputError("H must be a finite 2x2 matrix")
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise InvalidInputError("H must be Hermitian")
        jumps = []
        for v, g in self.jumps:
            v = np.asarray(v.matrix if isinstance(v, QubitOperator) else v, dtype=complex)
            jumps.append((v, float(g)))
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "jumps", tuple(jumps))


def generator_schrodinger(g: GKSLData) -> QubitMap:
    """``L(rho) = -i[H, rho] + sum_k g_k (V rho V^dag - 1/2 {V^dag V, rho})``."""
    def action(rho):
        out = -1j * (g.H @ rho - rho @ g.H)
        for v, rate in g.jumps:
            vd = v.conj().T
            out = out + rate * (v @ rho @ vd - 0.5 * (vd @ v @ rho + rho @ vd @ v))
        return out
    return QubitMap.from_action(action)


def generator_heisenberg(g: GKSLData) -> QubitMap:
    """``L#(X) = i[H, X] + Phi#(X) - 1/2 {Phi#(I), X}`` with ``Phi#(X) = sum g_k V^dag X V``."""
    def action(x):
        out = 1j * (g.H @ x - x @ g.H)
        for v, rate in g.jumps:
            vd = v.conj().T
            out = out + rate * (vd @ x @ v - 0.5 * (vd @ v @ x + x @ vd @ v))
        return out
    return QubitMap.from_action(action)


def pauli_generator(gamma) -> QubitMap:
    """Transfer matrix ``diag(0, -(g2+g3), -(g3+g1), -(g1+g2))``; self-dual."""
    g1, g2, g3 = np.asarray(gamma, dtype=float)
    return QubitMap(np.diag([0.0, -(g2 + g3), -(g3 + g1), -(g1 + g2)]))


@dataclass(frozen=True)
class DissipativityVerdict:
    """Generator-level divisibility verdicts for a rate triple at one instant.

    ``ks_margins`` are ``g_i + 2 g_j`` over ordered pairs, ``p_margins`` are
    ``g_j + g_k`` for ``i = 1, 2, 3`` and ``cp_margins`` the rates themselves.
    ``dissipative_now`` is the exact dissipativity of the Pauli generator
    (pair sums and ``g1 g2 + g2 g3 + g3 g1`` nonnegative), which the
    ``ks_divisible_now`` sign conditions imply but do not exhaust.
    """

    p_divisible_now: bool
    ks_divisible_now: bool
    cp_divisible_now: bool
    ks_margins: tuple
    p_margins: tuple
    cp_margins: tuple
    dissipative_now: bool = field(default=False)
    dissipative_margin: float = field(default=0.0)

    def __post_init__(self):
        assert not self.cp_divisible_now or self.ks_divisible_now
        assert not self.ks_divisible_now or self.dissipative_now
        assert not self.dissipative_now or self.p_divisible_now

    @property
    def min_ks_margin(self) -> float:
        return min(self.ks_margins)

    @property
    def min_p_margin(self) -> float:
        return min(self.p_margins)

    @property
    def min_cp_margin(self) -> float:
        return min(self.cp_margins)


def classify_rates(gamma) -> DissipativityVerdict:
    g = np.asarray(gamma, dtype=float).reshape(3)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("rates must be finite")
    ks = tuple(float(g[i] + 2 * g[j]) for i, j in ORDERED_PAIRS)
    p = tuple(float(g[j] + g[k]) for j, k in UNORDERED_PAIRS)
    cp = tuple(float(x) for x in g)
    e2 = float(g[0] * g[1] + g[1] * g[2] + g[2] * g[0])
    p_ok = min(p) >= -SIGN_TOL
    # the e2 test is scale-dependent, so compare against the squared rate scale
    scale = max(1.0, float(np.max(np.abs(g)))) ** 2
    return DissipativityVerdict(
        p_divisible_now=p_ok,
        ks_divisible_now=min(ks) >= -SIGN_TOL,
        cp_divisible_now=min(cp) >= -SIGN_TOL,
        ks_margins=ks,
        p_margins=p,
        cp_margins=cp,
        dissipative_now=p_ok and e2 >= -SIGN_TOL * scale,
        dissipative_margin=min(min(p), e2),
    )


def _dissipativity_operator(m: np.ndarray):
    """``c -> coords of L#(X^dag X) - L#(X^dag) X - X^dag L#(X)``."""
    mt = m.T

    def f(c):
        cd = coords_dagger(c)
        return (coords_product(cd, c) @ mt
                - coords_product(cd @ mt, c)
                - coords_product(cd, c @ mt))
    return f


def dissipativity_margin(lsharp: QubitMap, x) -> float:
    return _margin_at(_dissipativity_operator(lsharp.transfer), x)


def dissipativity_numeric(lsharp: QubitMap, *, seed: int = 0, budget: int = 2000,
                          refine: int = 4) -> KSReport:
    """Search for X violating dissipativity of a Heisenberg-picture generator.

    The generator must annihilate the identity (trace-preserving dynamics).
    VIOLATION means the generator is not dissipative; UNDECIDED carries the
    best (near-zero) margin found.
    """
    m = lsharp.transfer
    if np.max(np.abs(m[:, 0])) > TP_TOL:
        raise InvalidGeneratorError("L#(I) must vanish for trace-preserving dynamics")
    return search_min_margin(SesquilinearMargin(_dissipativity_operator(m)),
                             seed=seed, budget=budget, refine=refine)


def normalize_rates(gamma) -> tuple[np.ndarray, float]:
    """Rescale so that ``g1 + g2 + g3 = 2``; returns the rates and the factor used."""
    g = np.asarray(gamma, dtype=float)
    total = float(g.sum())
    if total <= 1e-14:
        raise DegenerateGeneratorError(f"total rate {total:.3e} cannot be normalized")
    factor = 2.0 / total
    return g * factor, factor


def mu_lambda_decomposition(gamma) -> dict:
    """Eigenvalues ``l_k``, ``mu_k`` and the coefficients ``1 - l_k`` after normalization.

    With ``g1 + g2 + g3 = 2`` the map ``Phi(X) = 1/2 sum g_k s_k X s_k`` is
    unital with eigenvalues ``l1 = (g1 - g2 - g3)/2`` (and cyclic), and
    ``mu_k = 1 - l_i - l_j + l_k = 2 g_k``.
    """
    g, _ = normalize_rates(gamma)
    g1, g2, g3 = g
    lam = 0.5 * np.array([g1 - g2 - g3, -g1 + g2 - g3, -g1 - g2 + g3])
    l1, l2, l3 = lam
    mu = np.array([1 + l1 - l2 - l3, 1 - l1 + l2 - l3, 1 - l1 - l2 + l3])
    if np.max(np.abs(mu - 2 * g)) > 1e-12:
        raise ArithmeticError("mu_k != 2 g_k after normalization")
    a_coeffs = 1 - lam
    expected = np.array([g2 + g3, g3 + g1, g1 + g2])
    if np.max(np.abs(a_coeffs - expected)) > 1e-12:
        raise ArithmeticError("1 - l_k != g_i + g_j after normalization")
    return {"lambda": lam, "mu": mu, "a_coeffs": a_coeffs, "gamma": g}


def ks_ab_split(gamma, w) -> tuple[float, np.ndarray]:
    """Closed-form ``(a, b)`` with ``a I + b.s`` the operator whose positivity
    encodes dissipativity of the normalized Pauli generator at ``X = w0 + w.s``.

    ``a = 2 sum (1 - l_k)|w_k|^2`` and ``b = S (conj(w) x w)`` up to the factor
    ``i`` that makes ``b`` real, with ``S = diag(mu_k)``.
    """
    d = mu_lambda_decomposition(gamma)
    w = np.asarray(w, dtype=complex)
    a = 2.0 * float(np.sum(d["a_coeffs"] * np.abs(w) ** 2))
    cross = complex_cross(np.conj(w), w)
    # conj(w) x w is purely imaginary
    b = (1j * d["mu"] * cross).real
    return a, b


@dataclass(frozen=True)
class RelaxationTimes:
    T1: float
    T2: float
    T3: float

    def as_tuple(self):
        return (self.T1, self.T2, self.T3)


def relaxation_times(gamma) -> RelaxationTimes:
    """``T_i = 1 / (g_j + g_k)``; non-decaying directions get ``inf``.

    When the rates satisfy the KS sign conditions with ``g3 < 0`` the bounds
    ``T1, T2 <= 1/|g3|`` and ``T3 <= 1/(4|g3|)`` are asserted.
    """
    g = np.asarray(gamma, dtype=float)
    times = []
    for j, k in UNORDERED_PAIRS:
        s = g[j] + g[k]
        times.append(1.0 / s if s > 0 else math.inf)
    out = RelaxationTimes(*times)
    verdict = classify_rates(g)
    if verdict.ks_divisible_now and g[2] < 0:
        margins = relaxation_bound_margins(g)
        assert min(margins) >= -1e-12 * max(1.0, max(times)), margins
    return out


def relaxation_bound_margins(gamma) -> tuple[float, float, float]:
    """Relative margins of ``T1, T2 <= 1/|g3|`` and ``T3 <= 1/(4|g3|)`` for ``g3 < 0``."""
    g = np.asarray(gamma, dtype=float)
    if not g[2] < 0:
        raise ValueError("bounds apply only when g3 < 0")
    t = [1.0 / (g[j] + g[k]) if g[j] + g[k] > 0 else math.inf for j, k in UNORDERED_PAIRS]
    c = abs(g[2])
    bounds = (1.0 / c, 1.0 / c, 1.0 / (4.0 * c))
    return tuple(float((b - ti) / b) for b, ti in zip(bounds, t))


def amgm_margin(alpha: float, beta: float, bound: float = 10.0) -> float:
    """``min (alpha x + beta y)/2 - sqrt(x y)`` over ``(x, y)`` in ``(0, bound]^2``.

    The objective is positively homogeneous, so the minimum sits on the face
    ``x = bound`` or ``y = bound``; along each face it is convex with the
    stationary point ``y = bound / beta^2`` (resp. ``x = bound / alpha^2``).
    Nonnegative exactly when ``alpha beta >= 1``.
    """
    if alpha <= 0 or beta <= 0:
        raise InvalidInputError("alpha and beta must be positive")

    def face(a, b):
        # x = bound fixed, y free in (0, bound]
        y = min(bound, bound / (b * b))
        return 0.5 * (a * bound + b * y) - math.sqrt(bound * y)
    return min(face(alpha, beta), face(beta, alpha), 0.0)


# Rate functions ------------------------------------------------------------

@dataclass(frozen=True)
class RateFunction:
    """A scalar rate ``t -> gamma(t)``, optionally with an exact antiderivative."""

    name: str
    func: Callable[[float], float]
    antiderivative: Callable[[float], float] | None = None
    params: tuple = ()

    def __call__(self, t: float) -> float:
        return float(self.func(t))

    def integral(self, a: float, b: float):
        if self.antiderivative is None:
            return None
        return float(self.antiderivative(b) - self.antiderivative(a))


def constant(c: float) -> RateFunction:
    c = float(c)
    return RateFunction("constant", lambda t: c, lambda t: c * t, (c,))


def tanh_scaled(a: float, b: float) -> RateFunction:
    """``a tanh(b t)``; antiderivative ``(a/b) log cosh(b t)``."""
    a, b = float(a), float(b)

    def anti(t):
        if b == 0:
            return 0.0
        x = abs(b * t)
        # log cosh x = x + log1p(exp(-2x)) - log 2, stable for large x
        return (a / b) * (x + math.log1p(math.exp(-2 * x)) - math.log(2.0))
    return RateFunction("tanh", lambda t: a * math.tanh(b * t), anti, (a, b))


def exponential(a: float, b: float) -> RateFunction:
    """``a exp(-b t)``."""
    a, b = float(a), float(b)

    def anti(t):
        if b == 0:
            return a * t
        return -(a / b) * math.expm1(-b * t)
    return RateFunction("exp", lambda t: a * math.exp(-b * t), anti, (a, b))


def tabulated(times, values) -> RateFunction:
    """Piecewise-linear interpolation of a tabulated rate on ``[times[0], times[-1]]``."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
        raise InvalidInputError("tabulated rate needs matching 1-d arrays of length >= 2")
    if np.any(np.diff(ts) <= 0):
        raise InvalidInputError("tabulated times must be strictly increasing")
    if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(vs))):
        raise InvalidInputError("tabulated rate must be finite")

    def f(t):
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise InvalidInputError(f"t={t} outside tabulated range [{ts[0]}, {ts[-1]}]")
        return float(np.interp(t, ts, vs))

    def anti(t):
        # exact integral of the linear interpolant from ts[0] to t
        t = min(max(t, ts[0]), ts[-1])
        k = int(np.searchsorted(ts, t, side="right")) - 1
        k = min(k, ts.size - 2)
        seg = 0.5 * np.sum((vs[1:k + 1] + vs[:k]) * np.diff(ts[:k + 1]))
        vt = float(np.interp(t, ts, vs))
        return float(seg + 0.5 * (vs[k] + vt) * (t - ts[k]))
    return RateFunction("table", f, anti, (ts.size,))


RATE_REGISTRY = {
    "constant": constant,
    "tanh": tanh_scaled,
    "exp": exponential,
}


@dataclass(frozen=True)
class RateFunctions:
    """Three rate functions on ``[0, t_max]``."""

    rates: tuple
    t_max: float = math.inf

    def __post_init__(self):
        if len(self.rates) != 3:
            raise InvalidInputError("need exactly three rate functions")

    def __call__(self, t: float) -> np.ndarray:
        return np.array([r(t) for r in self.rates])

    @classmethod
    def constant(cls, gamma, t_max: float = math.inf) -> "RateFunctions":
        return cls(tuple(constant(g) for g in gamma), t_max)


def erika_rates(t_max: float = math.inf) -> RateFunctions:
    """``g1 = g2 = 1``, ``g3 = -tanh t``: eternally non-Markovian, P- but not KS-divisible."""
    return RateFunctions((constant(1.0), constant(1.0), tanh_scaled(-1.0, 1.0)), t_max)


def modified_rates(t_max: float = math.inf) -> RateFunctions:
    """``g1 = g2 = 1``, ``g3 = -tanh(t)/2``: eternally non-Markovian yet KS-divisible."""
    return RateFunctions((constant(1.0), constant(1.0), tanh_scaled(-0.5, 1.0)), t_max)


def dephasing_rates(gamma: float = 1.0, t_max: float = math.inf) -> RateFunctions:
    """``L(rho) = gamma (s3 rho s3 - rho)`` written as the triple ``(0, 0, 2 gamma)``."""
    return RateFunctions((constant(0.0), constant(0.0), constant(2.0 * gamma)), t_max)


__all__ = [
    "GKSLData", "generator_schrodinger", "generator_heisenberg", "pauli_generator",
    "DissipativityVerdict", "classify_rates", "dissipativity_numeric",
    "dissipativity_margin", "mu_lambda_decomposition", "normalize_rates",
    "ks_ab_split", "amgm_margin", "RelaxationTimes", "relaxation_times", "relaxation_bound_margins",
    "RateFunction", "RateFunctions", "constant", "tanh_scaled", "exponential",
    "tabulated", "RATE_REGISTRY", "erika_rates", "modified_rates", "dephasing_rates",
    "InvalidGeneratorError", "DegenerateGeneratorError", "ORDERED_PAIRS",
    "UNORDERED_PAIRS",
]
