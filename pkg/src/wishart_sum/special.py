"""Gamma/Laguerre machinery and the capacity kernel integral.

The capacity kernel ``I(n, b) = int_0^inf x^n exp(-b x) log(1 + x) dx`` and
its derivatives with respect to ``b`` replace a general Meijer-G evaluator:
the determinant entries of the closed-form capacity only ever need this one
family.  Two independent routes are provided for the kernel, a closed form
built on generalised exponential integrals and adaptive quadrature, and they
are cross-checked on request.
"""

from __future__ import annotations

import math
import threading
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalFailure

__all__ = [
    "log_gamma",
    "recip_gamma",
    "gen_binomial",
    "assoc_laguerre",
    "derivative_column",
    "scaled_expn",
    "capacity_kernel",
    "log_capacity_kernel",
    "capacity_kernel_quadrature",
    "KernelIntegralTable",
    "gcal",
    "FLOAT",
    "MP",
]

_EULER_GAMMA = 0.57721566490153286061
_LN2 = math.log(2.0)


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def recip_gamma(k: int) -> float:
    """``1 / Gamma(k)`` for integer ``k``; exactly 0 at the poles ``k <= 0``."""
    k = int(k)
    if k <= 0:
        return 0.0
    return 1.0 / math.factorial(k - 1)


@lru_cache(maxsize=4096)
def gen_binomial(n: int, k: int) -> int:
    """Generalised binomial ``n (n-1) ... (n-k+1) / k!`` for any integer ``n``."""
    if k < 0:
        return 0
    num = 1
    for t in range(k):
        num *= n - t
    return num // math.factorial(k)


def assoc_laguerre(k: int, alpha: int, x: float) -> float:
    """Associated Laguerre polynomial ``L_k^{(alpha)}(x)``.

    Uses the finite sum with generalised binomials, which stays valid for
    negative integer ``alpha``.
    """
    if k < 0:
        raise DomainError(f"Laguerre degree must be non-negative, got {k}")
    return float(_laguerre(k, alpha, x, FLOAT))


def _laguerre(k, alpha, x, ops, absolute=False):
    total = ops.num(0)
    xr = ops.num(1)
    for r in range(k + 1):
        c = gen_binomial(k + alpha, k - r)
        if c:
            term = ops.num(c) * xr / ops.factorial(r)
            if absolute:
                total += abs(term)
            else:
                total += -term if r % 2 else term
        xr *= x
    return total


def derivative_column(r: int, m: int, u: float, lam: float) -> float:
    """``d^r/du^r (u^m exp(-u lam))`` by the product rule.

    Equal to ``r! u^(m-r) exp(-u lam) L_r^{(m-r)}(u lam)`` (Rodrigues).
    """
    if not u > 0:
        raise DomainError(f"derivative_column needs u > 0, got {u!r}")
    if lam < 0:
        raise DomainError(f"derivative_column needs lam >= 0, got {lam!r}")
    return float(_derivative_column(r, m, u, lam, FLOAT))


def _derivative_column(r, m, u, lam, ops, absolute=False):
    total = ops.num(0)
    for s in range(min(r, m) + 1):
        e = r - s
        if e and lam == 0:
            continue
        term = ops.num(math.comb(r, s) * (math.factorial(m) // math.factorial(m - s)))
        term *= u ** (m - s) * lam ** e
        if absolute or e % 2 == 0:
            total += term
        else:
            total -= term
    return total * ops.exp(-u * lam)


# --------------------------------------------------------------------------
# generalised exponential integrals, scaled by exp(x)
# --------------------------------------------------------------------------

def _scaled_e1_series(x: float) -> float:
    # x <= 1: E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    s = 0.0
    term = 1.0
    for k in range(1, 60):
        term *= -x / k
        s += term / k
        if abs(term) < 1e-18:
            break
    return math.exp(x) * (-_EULER_GAMMA - math.log(x) - s)


def _scaled_expn_cf(n: int, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for exp(x) E_n(x), x > 1
    tiny = 1e-300
    b = x + n
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        a = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericalFailure(f"continued fraction for E_{n}({x}) did not converge")


def scaled_expn(nmax: int, x: float) -> np.ndarray:
    """``exp(x) E_k(x)`` for ``k = 1..nmax`` as a float array (index k-1).

    For ``x <= 1`` the values come from the E1 series followed by the
    upward recurrence ``E_{k+1} = (exp(-x) - x E_k) / k``, which is stable
    there; for ``x > 1`` each order is evaluated by its continued fraction.
    """
    if not x > 0:
        raise DomainError(f"exponential integral needs x > 0, got {x!r}")
    out = np.empty(nmax)
    if nmax == 0:
        return out
    if x <= 1.0:
        s = _scaled_e1_series(x)
        out[0] = s
        for k in range(1, nmax):
            s = (1.0 - x * s) / k
            out[k] = s
    else:
        for k in range(1, nmax + 1):
            out[k - 1] = _scaled_expn_cf(k, x)
    return out


# --------------------------------------------------------------------------
# scalar arithmetic back ends
# --------------------------------------------------------------------------

class _FloatOps:
    extended = False

    @staticmethod
    def num(x):
        return float(x)

    exp = staticmethod(math.exp)
    log = staticmethod(math.log)

    @staticmethod
    def factorial(n):
        return float(math.factorial(n))

    @staticmethod
    def ln2():
        return _LN2

    @staticmethod
    def eps():
        return 2.0 ** -52


class _MpOps:
    extended = True

    @staticmethod
    def num(x):
        return mpmath.mpf(x)

    exp = staticmethod(mpmath.exp)
    log = staticmethod(mpmath.log)

    @staticmethod
    def factorial(n):
        return mpmath.mpf(math.factorial(n))

    @staticmethod
    def ln2():
        return mpmath.ln2

    @staticmethod
    def eps():
        return mpmath.mpf(2) ** (-mpmath.mp.prec)


FLOAT = _FloatOps()
MP = _MpOps()


# --------------------------------------------------------------------------
# capacity kernel I(n, b)
# --------------------------------------------------------------------------

def _check_kernel_args(n, beta):
    if n < 0:
        raise DomainError(f"kernel order must be non-negative, got {n}")
    if not beta > 0:
        raise DomainError(f"kernel needs beta > 0, got {beta!r}")


def log_capacity_kernel(n: int, beta: float) -> float:
    """``log I(n, beta)`` from the closed form.

    ``I(n, b) = n! b^-(n+1) sum_{k=1}^{n+1} exp(b) E_k(b)``: integrating by
    parts turns the log into ``1/(1+x)`` moments, each a scaled ``E_k``.
    """
    _check_kernel_args(n, beta)
    s = float(np.sum(scaled_expn(n + 1, beta)))
    return math.lgamma(n + 1) - (n + 1) * math.log(beta) + math.log(s)


def capacity_kernel_quadrature(n: int, beta: float, rtol: float = 1e-12) -> float:
    """``log I(n, beta)`` by adaptive quadrature on ``[0, 1)``.

    Substitutes ``x = s t / (1 - t)`` with ``s`` placing the integrand peak
    near ``t = 1/2``, and factors out ``n! / beta^(n+1)`` to keep the
    integrand O(1).
    """
    _check_kernel_args(n, beta)
    s = max(1.0, (n + 1) / beta)
    log_norm = math.lgamma(n + 1) - (n + 1) * math.log(beta)

    def integrand(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        x = s * t / (1.0 - t)
        log_val = n * math.log(x) - beta * x - log_norm + math.log(s) - 2.0 * math.log1p(-t)
        return math.exp(log_val) * math.log1p(x)

    peak = n / beta / s
    t_peak = peak / (1.0 + peak)
    pts = sorted({min(max(t_peak, 1e-6), 1 - 1e-6), 0.5})
    val, err, *rest = integrate.quad(integrand, 0.0, 1.0, points=pts, epsabs=0.0,
                                     epsrel=rtol, limit=500, full_output=1)
    if not val > 0 or err > 100 * rtol * val:
        raise NumericalFailure(f"kernel quadrature for I({n}, {beta}) did not converge (err {err:.2e})")
    return log_norm + math.log(val)


def capacity_kernel(n: int, beta: float, verify: bool = True) -> float:
    """Capacity kernel ``I(n, beta) = int_0^inf x^n e^{-beta x} ln(1+x) dx``.

    With ``verify`` the closed form is checked against quadrature and a
    disagreement above 1e-8 relative raises :class:`NumericalFailure`.
    """
    log_cf = log_capacity_kernel(n, beta)
    if verify:
        log_q = capacity_kernel_quadrature(n, beta)
        if abs(math.expm1(log_q - log_cf)) > 1e-8:
            raise NumericalFailure(f"kernel routes disagree for I({n}, {beta}): "
                                   f"{log_cf!r} vs {log_q!r} (log scale)")
    try:
        return math.exp(log_cf)
    except OverflowError as exc:
        raise NumericalFailure(f"I({n}, {beta}) overflows float64; use log_capacity_kernel") from exc


class KernelIntegralTable:
    """Cache of kernel values keyed by ``(n, beta)``.

    The closed form evaluates all orders up to ``n`` in one sweep, so the
    table stores cumulative sums of ``exp(b) E_k(b)`` per ``beta``.  Extended
    entries are additionally keyed by the working precision.  Lookups are
    guarded by a lock so one table can be shared between threads.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._float_sums: dict[float, np.ndarray] = {}
        self._mp_sums: dict[tuple, list] = {}

    def _float_cumsum(self, beta: float, n: int) -> np.ndarray:
        with self._lock:
            cs = self._float_sums.get(beta)
            if cs is None or len(cs) < n + 1:
                size = max(n + 1, 2 * len(cs) if cs is not None else 0)
                cs = np.cumsum(scaled_expn(size, beta))
                self._float_sums[beta] = cs
            return cs

    def log_value(self, n: int, beta: float) -> float:
        _check_kernel_args(n, beta)
        cs = self._float_cumsum(float(beta), n)
        return math.lgamma(n + 1) - (n + 1) * math.log(beta) + math.log(cs[n])

    def value(self, n: int, beta: float) -> float:
        return math.exp(self.log_value(n, beta))

    def mp_value(self, n: int, beta):
        """Kernel value as an mpf at the active working precision."""
        _check_kernel_args(n, beta)
        b = mpmath.mpf(beta)
        key = (b, mpmath.mp.prec)
        with self._lock:
            cs = self._mp_sums.setdefault(key, [])
            if len(cs) < n + 1:
                eb = mpmath.exp(b)
                for k in range(len(cs) + 1, n + 2):
                    cs.append(eb * mpmath.expint(k, b) + (cs[-1] if cs else 0))
            total = cs[n]
        return mpmath.factorial(n) / b ** (n + 1) * total


_DEFAULT_TABLE = KernelIntegralTable()


def _gcal_terms(i, j, u, m, ops, table, absolute=False):
    """Sum over the product rule for the (j-1)-th u-derivative of u^m I(m-i, u).

    Returns the value without the common 1/(ln 2 (m-i)!) prefactor.
    """
    total = ops.num(0)
    for s in range(min(j - 1, m) + 1):
        n = m - i + (j - 1) - s
        coeff = math.comb(j - 1, s) * (math.factorial(m) // math.factorial(m - s))
        if ops.extended:
            term = ops.num(coeff) * u ** (m - s) * table.mp_value(n, u)
        else:
            term = math.exp(math.log(coeff) + (m - s) * math.log(u) + table.log_value(n, u))
        if absolute or (j - 1 - s) % 2 == 0:
            total += term
        else:
            total -= term
    return total


def gcal(i: int, j: int, v: float, m: int, table: KernelIntegralTable | None = None) -> float:
    """Capacity entry for row ``i`` and within-block column ``j``.

    The integral of ``g_i(lam) f_j(v, lam) log2(1 + lam)`` over ``lam > 0``,
    i.e. the ``(j-1)``-th derivative with respect to ``u = 1/v`` of
    ``u^m I(m-i, u) / (ln 2 (m-i)!)``.  Zero for ``i > m``.
    """
    if i < 1 or j < 1:
        raise DomainError("gcal indices start at 1")
    if not v > 0:
        raise DomainError(f"gcal needs v > 0, got {v!r}")
    if i > m:
        return 0.0
    table = table or _DEFAULT_TABLE
    total = _gcal_terms(i, j, 1.0 / v, m, FLOAT, table)
    return total / (_LN2 * math.factorial(m - i))
