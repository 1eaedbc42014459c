"""Marginal eigenvalue density of the weighted Wishart sum.

The exact density is a ratio of a bordered ``(p+1) x (p+1)`` determinant and
the ``p x p`` normalisation determinant built from the block entries
``f_j``, ``g_i`` and ``h_ij``.  Columns belonging to one variance are
derivatives of a single column with respect to ``u = 1/v``, which makes the
matrices nearly singular: for the larger examples float64 loses every digit.
The evaluator therefore monitors the attainable accuracy and, unless told
otherwise, switches to mpmath with enough digits to cover the condition
number.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy import integrate

from ._core import (DEFAULT_MAX_DIGITS, STRICT_DIGITS, ConfluentLayout, DistinctLayout, FloatSolver,
                    MpSolverCache, mp_density_point, normalisation, resolve_precision)
from .errors import ConditioningError, DomainError, NumericalFailure, ValidationError
from .model import SumSpec
from .numeric import SignedLogValue
from .special import derivative_column, recip_gamma

__all__ = [
    "entry_f",
    "entry_g",
    "entry_h",
    "DensityEvaluator",
    "DistinctSpec",
    "build_evaluator",
    "density",
    "density_grid",
    "cdf",
    "integrate_density",
    "density_distinct",
    "perturbed_distinct",
]

NEG_CLAMP = 1e-9
DENSITY_RTOL = 1e-10
DISTINCT_SEPARATION = 1e-6


# --------------------------------------------------------------------------
# determinant entries
# --------------------------------------------------------------------------

def entry_f(j: int, v: float, lam: float, m: int) -> float:
    """Border-row entry ``Gamma(j) v^(j-m-1) exp(-lam/v) L_{j-1}^{(m-j+1)}(lam/v)``.

    Evaluated as the ``(j-1)``-th derivative of ``u^m exp(-u lam)`` at
    ``u = 1/v``, which is the same polynomial without the Laguerre
    parameter ever becoming a Gamma-function pole.
    """
    if j < 1:
        raise DomainError(f"column index starts at 1, got {j}")
    return derivative_column(j - 1, m, 1.0 / v, lam)


def entry_g(i: int, lam: float, m: int) -> float:
    """Border-column entry ``lam^(m-i) / Gamma(m-i+1)``; zero for ``i > m``."""
    if i < 1:
        raise DomainError(f"row index starts at 1, got {i}")
    if i > m:
        return 0.0
    return lam ** (m - i) * recip_gamma(m - i + 1)


def entry_h(i: int, j: int, v: float) -> float:
    """Block entry ``Gamma(i) / Gamma(i-j+1) v^(j-i)``; zero for ``j > i``."""
    if i < 1 or j < 1:
        raise DomainError("block indices start at 1")
    if j > i:
        return 0.0
    return math.factorial(i - 1) * recip_gamma(i - j + 1) * v ** (j - i)


# --------------------------------------------------------------------------
# evaluator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityEvaluator:
    """Precomputed normalisation and factorisations for one :class:`SumSpec`.

    ``precision_mode`` is the mode the evaluator settled on at build time
    (``standard`` or ``extended``); ``digits`` is the significant-digit
    count of the extended solver, or 16 for float64.
    """

    spec: SumSpec
    v: tuple[float, ...]
    mult: tuple[int, ...]
    column_scales: tuple[float, ...]
    log_c: SignedLogValue
    precision_mode: str
    digits: int
    requested_precision: str = "auto"
    _layout: object = field(default=None, repr=False, compare=False)
    _float: object = field(default=None, repr=False, compare=False)
    _mp: object = field(default=None, repr=False, compare=False)
    _max_digits: int = field(default=DEFAULT_MAX_DIGITS, repr=False, compare=False)

    @property
    def scale(self) -> float:
        """Mean eigenvalue ``sigma2 * sum(a_i)``, the natural lambda unit."""
        return self.spec.mean_eigenvalue

    @property
    def atol(self) -> float:
        return 1e-14 / self.scale

    def mp_cache(self) -> MpSolverCache:
        """The extended solver cache, building it on first use."""
        cache = self._mp
        if cache is None:
            cache = MpSolverCache(self._layout, self._max_digits)
            object.__setattr__(self, "_mp", cache)
        return cache


def build_evaluator(spec: SumSpec, precision: str | None = None, balance: bool = True,
                    max_digits: int = DEFAULT_MAX_DIGITS) -> DensityEvaluator:
    """Factorise the normalisation determinant of ``spec``.

    ``precision`` is ``auto`` (float64 when it can deliver about ten
    digits, mpmath otherwise), ``standard`` (float64 only, failing loudly
    with :class:`NumericalFailure` when fewer than six digits survive) or
    ``extended`` (mpmath only).  ``None`` reads ``WISHART_SUM_PRECISION``.
    Variances that coincide are merged into one block first, since equal
    columns would make the determinant vanish identically.
    """
    if not isinstance(spec, SumSpec):
        raise ValidationError(f"expected a SumSpec, got {type(spec).__name__}")
    mode = resolve_precision(precision)
    layout = ConfluentLayout(spec.m, spec.blocks(), balance=balance)
    fsolver = None
    mp_cache = None
    if mode in ("auto", "standard"):
        fsolver = FloatSolver(layout)
        noise = fsolver.rel_noise()
        if mode == "standard" and not noise < 10.0 ** -STRICT_DIGITS:
            raise NumericalFailure(
                f"standard precision cannot evaluate this spec: condition number "
                f"{fsolver.kappa:.3e} of the normalisation matrix leaves fewer than "
                f"{STRICT_DIGITS} significant digits; use extended precision")
        if mode == "auto" and not noise <= DENSITY_RTOL:
            fsolver = None
    if fsolver is None:
        mp_cache = MpSolverCache(layout, max_digits)
        solver, settled = mp_cache.base, "extended"
    else:
        solver, settled = fsolver, "standard"
    sign, log_mag = normalisation(layout, solver)
    if sign == 0 or not math.isfinite(log_mag):
        raise NumericalFailure("normalisation determinant is singular")
    return DensityEvaluator(
        spec=spec,
        v=layout.v,
        mult=layout.mult,
        column_scales=layout.column_scales,
        log_c=SignedLogValue(sign, log_mag),
        precision_mode=settled,
        digits=solver.digits,
        requested_precision=mode,
        _layout=layout,
        _float=fsolver,
        _mp=mp_cache,
        _max_digits=max_digits,
    )


def _clamp(values: np.ndarray) -> np.ndarray:
    bad = values < -NEG_CLAMP
    if np.any(bad):
        raise NumericalFailure(f"density evaluated to {values[bad].min():.3e} < 0 beyond "
                               f"round-off clamp; precision monitor was too optimistic")
    return np.where(values < 0, 0.0, values)


def _check_lams(lams) -> np.ndarray:
    arr = np.asarray(lams, dtype=float)
    if arr.ndim > 1:
        raise ValidationError("lambda values must be a scalar or a 1-d sequence")
    arr = arr.reshape(-1)
    if arr.size and not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
        raise DomainError("the density is defined for finite lambda > 0")
    return arr


def _float_density(layout, solver: FloatSolver, lams: np.ndarray):
    """Literal bordered determinants over a grid plus the per-point error bound."""
    n, p = lams.size, layout.p
    F = layout.f_matrix_float(lams)
    Fa = layout.f_matrix_float(lams, absolute=True)
    G = layout.g_matrix_float(lams)
    B = np.zeros((n, p + 1, p + 1))
    B[:, 0, 1:] = F
    B[:, 1:, 0] = G
    B[:, 1:, 1:] = solver.H
    sB, lB = np.linalg.slogdet(B)
    with np.errstate(over="ignore", under="ignore"):
        P = -sB * solver.sign * np.exp(lB - solver.logdet) / layout.n_eff
    mag = np.sum((Fa @ solver.W) * np.abs(G[:, :layout.n_eff]), axis=1)
    est = solver.eps * mag / layout.n_eff
    return P, est


def _extended_point(ev: DensityEvaluator, lam: float):
    cache = ev.mp_cache()
    solver = cache.base
    target = None
    for _ in range(6):
        P, est = mp_density_point(ev._layout, solver, lam)
        target = DENSITY_RTOL * abs(P) + ev.atol
        if est <= target:
            return float(P), float(est)
        solver = cache.refine(solver, est, target)
    raise NumericalFailure(f"density at lambda={lam!r} did not reach the requested accuracy")


def _evaluate(ev: DensityEvaluator, lams: np.ndarray, with_error: bool = False):
    out = np.empty(lams.size)
    err = np.empty(lams.size)
    if lams.size == 0:
        return (out, err) if with_error else out
    if ev._float is not None:
        P, est = _float_density(ev._layout, ev._float, lams)
        target = DENSITY_RTOL * np.abs(P) + ev.atol
        ok = np.isfinite(P) & (est <= target)
        if ev.requested_precision == "standard":
            strict = np.isfinite(P) & (est <= 10.0 ** -STRICT_DIGITS * np.abs(P) + 1e4 * ev.atol)
            if not np.all(strict):
                bad = lams[~strict][0]
                raise NumericalFailure(f"fewer than {STRICT_DIGITS} significant digits at "
                                       f"lambda={bad!r} in standard precision")
            ok = strict
        out[ok], err[ok] = P[ok], est[ok]
        todo = np.flatnonzero(~ok)
    else:
        todo = range(lams.size)
    for idx in todo:
        out[idx], err[idx] = _extended_point(ev, float(lams[idx]))
    out = _clamp(out)
    return (out, err) if with_error else out


def density(ev: DensityEvaluator, lam: float) -> float:
    """Marginal density of one unordered eigenvalue at ``lam > 0``."""
    arr = _check_lams([lam])
    return float(_evaluate(ev, arr)[0])


def density_grid(ev: DensityEvaluator, lams: Sequence[float]) -> np.ndarray:
    """:func:`density` over many points, sharing the factorisations."""
    return _evaluate(ev, _check_lams(lams))


def density_with_error(ev: DensityEvaluator, lams: Sequence[float]):
    """``(values, error_estimates)`` over a grid."""
    return _evaluate(ev, _check_lams(lams), with_error=True)


# --------------------------------------------------------------------------
# integrals of the density
# --------------------------------------------------------------------------

_BREAKS = (1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def integrate_density(fun, scale: float, upper: float = math.inf, rtol: float = 1e-10,
                      atol: float = 1e-13):
    """``int_0^upper fun(t) dt`` by adaptive quadrature on ``scale``-spaced pieces.

    Returns ``(value, abs_error)``.  The pieces cover the bulk of an
    eigenvalue density whose mean is ``scale``.
    """
    pts = [0.0] + [scale * b for b in _BREAKS if scale * b < upper] + [upper]
    total, err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, e, *info = integrate.quad(fun, lo, hi, epsrel=rtol, epsabs=atol, limit=200, full_output=1)
        if len(info) > 1 and e > 1e3 * max(atol, rtol * abs(val)):
            raise NumericalFailure(f"quadrature on [{lo}, {hi}] did not converge: {info[1]}")
        total += val
        err += e
    return total, err


def cdf(ev: DensityEvaluator, lam: float) -> float:
    """``P(eigenvalue <= lam)`` by quadrature of the density."""
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError("cdf needs finite lambda > 0")
    val, _ = integrate_density(lambda t: density(ev, t), ev.scale, upper=lam, rtol=1e-10, atol=1e-12)
    return min(1.0, max(0.0, val))


# --------------------------------------------------------------------------
# distinct-variance formula
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DistinctSpec:
    """``m`` and ``p`` pairwise distinct variances ``vhat``.

    ``min_separation`` is the smallest ``|x_i - x_j| / max(x_i, x_j)`` over
    pairs of ``x = 1/vhat``.
    """

    m: int
    vhat: tuple[float, ...]
    min_separation: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        vhat = tuple(float(v) for v in self.vhat)
        if not vhat:
            raise ValidationError("vhat needs at least one value")
        if not all(math.isfinite(v) and v > 0 for v in vhat):
            raise ValidationError("vhat values must be positive and finite")
        object.__setattr__(self, "vhat", vhat)
        x = [1.0 / v for v in vhat]
        sep = math.inf
        for a in range(len(x)):
            for b in range(a):
                sep = min(sep, abs(x[a] - x[b]) / max(x[a], x[b]))
        if sep == 0:
            raise ValidationError("vhat values must be pairwise distinct")
        object.__setattr__(self, "min_separation", sep)

    @property
    def p(self) -> int:
        return len(self.vhat)


def perturbed_distinct(spec: SumSpec, eps: float) -> DistinctSpec:
    """Split each repeated variance ``v_k`` into ``v_k (1 + (j-1) eps)``, ``j = 1..n_k``."""
    if not (eps > 0 and math.isfinite(eps)):
        raise ValidationError(f"eps must be positive, got {eps!r}")
    vhat = []
    for v, n in spec.blocks():
        vhat.extend(v * (1.0 + (j - 1) * eps) for j in range(1, n + 1))
    return DistinctSpec(spec.m, tuple(vhat))


def _distinct_cache(ds: DistinctSpec, max_digits: int) -> MpSolverCache:
    if ds.min_separation <= DISTINCT_SEPARATION:
        raise ConditioningError(
            f"variances are separated by only {ds.min_separation:.3e} (relative) which is below "
            f"{DISTINCT_SEPARATION:g}; use the repeated-variance (confluent) formula instead")
    return _DISTINCT_CACHES.get(ds, max_digits)


class _CacheRegistry:
    """Small memo of extended solvers keyed by :class:`DistinctSpec`."""

    def __init__(self, size: int = 32):
        self._lock = threading.Lock()
        self._items: dict = {}
        self._size = size

    def get(self, ds, max_digits):
        key = (ds, max_digits)
        with self._lock:
            cache = self._items.get(key)
        if cache is None:
            cache = MpSolverCache(DistinctLayout(ds.m, ds.vhat), max_digits)
            with self._lock:
                if len(self._items) >= self._size:
                    self._items.pop(next(iter(self._items)))
                self._items[key] = cache
        return cache


_DISTINCT_CACHES = _CacheRegistry()


def density_distinct(ds: DistinctSpec, lam: float, max_digits: int = DEFAULT_MAX_DIGITS) -> float:
    """Density for pairwise distinct variances, always in extended precision.

    The Vandermonde normalisation cancels many digits when the variances
    are close, so the working precision follows the condition number.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError("the density is defined for finite lambda > 0")
    cache = _distinct_cache(ds, max_digits)
    solver = cache.base
    scale = ds.m * sum(ds.vhat) / min(ds.p, ds.m)
    atol = 1e-14 / scale
    for _ in range(6):
        P, est = mp_density_point(cache.layout, solver, lam)
        target = DENSITY_RTOL * abs(P) + atol
        if est <= target:
            val = float(P)
            if val < -NEG_CLAMP:
                raise NumericalFailure(f"distinct density evaluated to {val:.3e} < 0")
            return max(val, 0.0)
        solver = cache.refine(solver, est, target)
    raise NumericalFailure(f"distinct density at lambda={lam!r} did not reach the requested accuracy")


def vandermonde_log(ds: DistinctSpec) -> SignedLogValue:
    """``prod_{i>j} (x_i - x_j)`` with ``x = 1/vhat`` in signed-log form."""
    x = [mpmath.mpf(1) / mpmath.mpf(v) for v in ds.vhat]
    sign, log_mag = 1, 0.0
    for i in range(len(x)):
        for j in range(i):
            d = x[i] - x[j]
            sign *= 1 if d > 0 else -1
            log_mag += float(mpmath.log(abs(d)))
    return SignedLogValue(sign, log_mag)
