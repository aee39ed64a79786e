"""
Special functions on integer arguments.

Evaluates psi(n), E_1(x), g_n(a), G_n and G_n(a) by recursion, plus an
independent quadrature path for g_n(a) used to validate the recursion.

Conventions:
- g_n(a) := (-1)^n * integral_0^a x^(n-1)/(x+1) dx
- G_n(a) := psi(n) + g_n(a),  G_n := G_n(1)
- g_1(a) = -ln(1+a),  g_(n+1)(a) = g_n(a) + (-1)^(n+1) a^n / n

psi(n) and G_n are memoized up to the largest n requested. Tables grow under a
lock and are append-only, so concurrent readers always see a valid prefix.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from boxentropy.errors import DomainError, GOverflowError, NumericalError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061

_E1_MAX_ITER = 10_000
_E1_SERIES_EPS = 1e-17
_E1_CF_EPS = 1e-15
_FPMIN = 1e-300


@dataclass(frozen=True)
class SpecialFnConfig:
    """Numerical knobs for E_1 evaluation and the quadrature oracle."""

    quadrature_abs_tol: float = 1e-12
    quadrature_rel_tol: float = 1e-13
    quadrature_limit: int = 200
    e1_switch_point: float = 1.0

    def __post_init__(self) -> None:
        if not self.quadrature_abs_tol > 0:
            raise DomainError(f"quadrature_abs_tol must be > 0, got {self.quadrature_abs_tol}")
        if not self.quadrature_rel_tol >= 0:
            raise DomainError(f"quadrature_rel_tol must be >= 0, got {self.quadrature_rel_tol}")
        if self.quadrature_limit < 1:
            raise DomainError(f"quadrature_limit must be >= 1, got {self.quadrature_limit}")
        if not self.e1_switch_point > 0:
            raise DomainError(f"e1_switch_point must be > 0, got {self.e1_switch_point}")


DEFAULT_CONFIG = SpecialFnConfig()


def _check_order(n: int) -> None:
    if isinstance(n, bool) or int(n) != n:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")


def _check_upper_limit(a: float) -> None:
    if not a >= 0 or math.isinf(a):
        raise DomainError(f"a must be a finite real >= 0, got {a!r}")


class _DigammaTable:
    """psi(1..n) via psi(n+1) = psi(n) + 1/n with Neumaier-compensated accumulation."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._values: list[float] = [-EULER_GAMMA]
        self._sum = -EULER_GAMMA
        self._comp = 0.0

    def get(self, n: int) -> float:
        values = self._values
        if n <= len(values):
            return values[n - 1]
        self._extend(n)
        return self._values[n - 1]

    def prefix(self, n_max: int) -> list[float]:
        if n_max > len(self._values):
            self._extend(n_max)
        return self._values[:n_max]

    def _extend(self, n: int) -> None:
        with self._lock:
            values = self._values
            start = len(values)
            if n <= start:
                return
            s, c = self._sum, self._comp
            for k in range(start, n):
                step = 1.0 / k
                t = s + step
                if abs(s) >= step:
                    c += (s - t) + step
                else:
                    c += (step - t) + s
                s = t
                values.append(s + c)
            self._sum, self._comp = s, c
            logger.debug("digamma table grown from %d to %d entries", start, n)


class _GOneTable:
    """g_n(1) and G_n for n = 1.. (the a = 1 member of the family, cached)."""

    def __init__(self, digamma: _DigammaTable) -> None:
        self._lock = threading.Lock()
        self._digamma = digamma
        self._g: list[float] = []
        self._big_g: list[float] = []

    def g(self, n: int) -> float:
        if n > len(self._g):
            self._extend(n)
        return self._g[n - 1]

    def big_g(self, n: int) -> float:
        if n > len(self._big_g):
            self._extend(n)
        return self._big_g[n - 1]

    def big_g_prefix(self, n_max: int) -> list[float]:
        if n_max > len(self._big_g):
            self._extend(n_max)
        return self._big_g[:n_max]

    def _extend(self, n: int) -> None:
        with self._lock:
            start = len(self._g)
            if n <= start:
                return
            g_values = _g_sequence(n, 1.0, start_values=self._g)
            psi = self._digamma.prefix(n)
            for k in range(start, n):
                self._g.append(g_values[k])
                self._big_g.append(psi[k] + g_values[k])
            logger.debug("G_n table grown from %d to %d entries", start, n)


_DIGAMMA = _DigammaTable()
_G_ONE = _GOneTable(_DIGAMMA)


def _g_sequence(n_max: int, a: float, start_values: list[float] | None = None) -> list[float]:
    """Return [g_1(a), ..., g_n_max(a)], continuing from ``start_values`` when given."""
    values = list(start_values) if start_values else [-math.log1p(a)]
    g = values[-1]
    for k in range(len(values), n_max):
        # k is the order of the value being extended: g_(k+1) = g_k + (-1)^(k+1) a^k / k
        try:
            term = a**k / k
        except OverflowError:
            raise GOverflowError(k + 1, a) from None
        g = g + term if k % 2 == 1 else g - term
        if not math.isfinite(g):
            raise GOverflowError(k + 1, a)
        values.append(g)
    return values


def digamma(n: int) -> float:
    """psi(n) = H_(n-1) - gamma for positive integer n."""
    _check_order(n)
    return _DIGAMMA.get(int(n))


def digamma_table(n_max: int) -> np.ndarray:
    """Array ``t`` with ``t[n] = psi(n)`` for 1 <= n <= n_max; ``t[0]`` is NaN."""
    _check_order(n_max)
    out = np.empty(n_max + 1)
    out[0] = np.nan
    out[1:] = _DIGAMMA.prefix(int(n_max))
    return out


def exp_integral_e1(x: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """
    Exponential integral E_1(x) = integral_1^inf exp(-x t)/t dt for x > 0.

    Power series below ``cfg.e1_switch_point``, modified-Lentz continued
    fraction above it. Returns 0.0 once exp(-x) underflows.
    """
    if not x > 0 or math.isnan(x):
        raise DomainError(f"E_1(x) requires x > 0, got {x!r}")
    if math.isinf(x):
        return 0.0
    if x <= cfg.e1_switch_point:
        return _e1_series(x)
    return _e1_continued_fraction(x)


def _e1_series(x: float) -> float:
    total = 0.0
    factorial = 1.0
    power = 1.0
    for k in range(1, _E1_MAX_ITER):
        factorial *= k
        power *= x
        term = power / (k * factorial)
        total = total + term if k % 2 == 1 else total - term
        if term < _E1_SERIES_EPS * abs(total):
            return -EULER_GAMMA - math.log(x) + total
    raise NumericalError("E_1 power series did not converge", {"x": x, "iterations": _E1_MAX_ITER})


def _e1_continued_fraction(x: float) -> float:
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _E1_MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _E1_CF_EPS:
            return h * math.exp(-x)
    raise NumericalError("E_1 continued fraction did not converge", {"x": x, "iterations": _E1_MAX_ITER})


def g_signed(n: int, a: float) -> float:
    """g_n(a) by recursion; raises GOverflowError instead of returning infinity."""
    _check_order(n)
    _check_upper_limit(a)
    if a == 0.0:
        return 0.0
    if a == 1.0:
        return _G_ONE.g(int(n))
    return _g_sequence(int(n), float(a))[-1]


def big_g_a(n: int, a: float) -> float:
    """G_n(a) = psi(n) + g_n(a); G_n(0) = psi(n) and G_n(1) = G_n."""
    return digamma(n) + g_signed(n, a)


def big_g(n: int) -> float:
    """Grassberger's G_n, memoized. G_(2k+1) = G_2k and G_(2k+2) = G_2k + 2/(2k+1)."""
    _check_order(n)
    return _G_ONE.big_g(int(n))


def n_big_g_table(n_max: int, a: float) -> np.ndarray:
    """
    Array ``t`` with ``t[n] = n * G_n(a)`` for 0 <= n <= n_max and ``t[0] = 0``.

    Entries whose G_n(a) overflows are NaN, so vectorised callers can count the
    affected replicates instead of aborting. The a = 1 table comes from the cache.
    """
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    _check_upper_limit(a)
    out = np.zeros(n_max + 1)
    if n_max == 0:
        return out
    psi = np.asarray(_DIGAMMA.prefix(n_max))
    if a == 1.0:
        g = np.asarray(_G_ONE.big_g_prefix(n_max)) - psi
    elif a == 0.0:
        g = np.zeros(n_max)
    else:
        g = np.full(n_max, np.nan)
        try:
            g[:] = _g_sequence(n_max, float(a))
        except GOverflowError as exc:
            valid = exc.n - 1
            if valid > 0:
                g[:valid] = _g_sequence(valid, float(a))
    orders = np.arange(1, n_max + 1, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        values = orders * (psi + g)
    values[~np.isfinite(values)] = np.nan
    out[1:] = values
    return out


def quadrature_g(n: int, a: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """(-1)^n * integral_0^a x^(n-1)/(x+1) dx by adaptive Gauss-Kronrod quadrature."""
    _check_order(n)
    _check_upper_limit(a)
    if a == 0.0:
        return 0.0
    power = int(n) - 1

    def integrand(x: float) -> float:
        return x**power / (x + 1.0)

    result = integrate.quad(
        integrand,
        0.0,
        float(a),
        epsabs=cfg.quadrature_abs_tol,
        epsrel=cfg.quadrature_rel_tol,
        limit=cfg.quadrature_limit,
        full_output=1,
    )
    value, abserr, info = result[0], result[1], result[2]
    tolerance = max(cfg.quadrature_abs_tol, cfg.quadrature_rel_tol * abs(value))
    # a quad warning with an error estimate this small is still accepted
    if abserr > 1e4 * tolerance:
        message = result[3] if len(result) > 3 else "error estimate above tolerance"
        raise NumericalError(
            f"quadrature for g_{n}({a:g}) did not converge: {message}",
            {"n": n, "a": a, "value": value, "abserr": abserr, "neval": info.get("neval"), "tolerance": tolerance},
        )
    return value if n % 2 == 0 else -value
