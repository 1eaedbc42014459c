"""Ergodic sum capacity ``E[log2 det(I + Wbar)]`` from the exact density.

Three analytic routes are offered: the closed determinantal form (row
``mu`` of the normalisation matrix replaced by the integrated entries
``Gcal``), quadrature of ``m * P(lambda) * log2(1 + lambda)``, and the
distinct-variance formula, which is only used to check the first two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._core import (DEFAULT_MAX_DIGITS, STRICT_DIGITS, mp_capacity)
from .density import (DensityEvaluator, DistinctSpec, build_evaluator, density_grid, density_distinct,
                      integrate_density, _distinct_cache)
from .errors import NumericalFailure, ValidationError
from .model import SumSpec, equivalent_spec
from .special import FLOAT, KernelIntegralTable, _DEFAULT_TABLE

__all__ = [
    "CapacityResult",
    "capacity_determinantal",
    "capacity_quadrature",
    "capacity_distinct",
    "relay_upper_bound",
    "capacity_approx",
    "approximation_error",
]

METHODS = ("determinantal", "quadrature", "monte_carlo", "approx", "distinct")
CAPACITY_RTOL = 1e-10
CAPACITY_ATOL = 1e-12
QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class CapacityResult:
    """Capacity in bits per channel use with the route that produced it."""

    bits: float
    method: str
    err_estimate: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown capacity method {self.method!r}")
        if not (math.isfinite(self.bits) and self.bits >= 0):
            raise NumericalFailure(f"capacity evaluated to {self.bits!r}, expected a non-negative number")
        if not self.err_estimate >= 0:
            raise ValidationError(f"err_estimate must be non-negative, got {self.err_estimate!r}")


def _as_evaluator(obj, precision, max_digits) -> DensityEvaluator:
    if isinstance(obj, DensityEvaluator):
        return obj
    if isinstance(obj, SumSpec):
        return build_evaluator(obj, precision=precision, max_digits=max_digits)
    raise ValidationError(f"expected a SumSpec or DensityEvaluator, got {type(obj).__name__}")


def _float_capacity(layout, solver, table):
    """Literal row-replaced determinant ratios in float64, one per ``mu``."""
    m, p = layout.n_eff, layout.p
    stack = np.repeat(solver.H[None, :, :], m, axis=0)
    mag = 0.0
    for mu in range(1, m + 1):
        stack[mu - 1, mu - 1, :] = layout.gcal_row(mu, FLOAT, table)
        row_abs = np.array(layout.gcal_row(mu, FLOAT, table, absolute=True))
        mag += float(row_abs @ solver.W[:, mu - 1])
    signs, logs = np.linalg.slogdet(stack)
    with np.errstate(over="ignore"):
        ratios = signs * solver.sign * np.exp(logs - solver.logdet)
    return float(np.sum(ratios)), solver.eps * mag


def capacity_determinantal(spec, precision: str | None = None, max_digits: int = DEFAULT_MAX_DIGITS,
                           table: KernelIntegralTable | None = None) -> CapacityResult:
    """Closed-form ergodic capacity.

    ``spec`` may be a :class:`SumSpec` or a :class:`DensityEvaluator` whose
    factorisations are then reused.  The same precision policy as the
    density applies; the error estimate comes from the precision monitor.
    """
    ev = _as_evaluator(spec, precision, max_digits)
    table = table or _DEFAULT_TABLE
    layout = ev._layout
    if ev._float is not None:
        C, est = _float_capacity(layout, ev._float, table)
        if est <= CAPACITY_RTOL * abs(C) + CAPACITY_ATOL:
            return CapacityResult(max(C, 0.0), "determinantal", est)
        if ev.requested_precision == "standard":
            if est <= 10.0 ** -STRICT_DIGITS * abs(C):
                return CapacityResult(max(C, 0.0), "determinantal", est)
            raise NumericalFailure(f"capacity keeps fewer than {STRICT_DIGITS} significant digits "
                                   f"in standard precision")
    cache = ev.mp_cache()
    solver = cache.base
    for _ in range(6):
        C, est = mp_capacity(layout, solver, table)
        target = CAPACITY_RTOL * abs(C) + CAPACITY_ATOL
        if est <= target:
            return CapacityResult(max(float(C), 0.0), "determinantal", float(est))
        solver = cache.refine(solver, est, target)
    raise NumericalFailure("determinantal capacity did not reach the requested accuracy")


def capacity_quadrature(ev, precision: str | None = None,
                        max_digits: int = DEFAULT_MAX_DIGITS) -> CapacityResult:
    """``m * int_0^inf P(lambda) log2(1 + lambda) dlambda`` by adaptive quadrature."""
    ev = _as_evaluator(ev, precision, max_digits)
    m = ev.spec.m

    def integrand(t):
        return density_grid(ev, [t])[0] * math.log1p(t)

    val, err = integrate_density(integrand, ev.scale, rtol=QUAD_RTOL, atol=1e-13)
    bits = m * val / math.log(2.0)
    return CapacityResult(max(bits, 0.0), "quadrature", m * err / math.log(2.0))


def capacity_distinct(ds: DistinctSpec, max_digits: int = DEFAULT_MAX_DIGITS,
                      table: KernelIntegralTable | None = None) -> CapacityResult:
    """Capacity from the distinct-variance formula (extended precision).

    The row-replaced Vandermonde determinants are divided by the
    Vandermonde determinant itself; the sign makes the result positive.
    """
    cache = _distinct_cache(ds, max_digits)
    table = table or _DEFAULT_TABLE
    solver = cache.base
    for _ in range(6):
        C, est = mp_capacity(cache.layout, solver, table)
        target = CAPACITY_RTOL * abs(C) + CAPACITY_ATOL
        if est <= target:
            return CapacityResult(max(float(C), 0.0), "distinct", float(est))
        solver = cache.refine(solver, est, target)
    raise NumericalFailure("distinct capacity did not reach the requested accuracy")


def capacity_distinct_quadrature(ds: DistinctSpec) -> float:
    """Quadrature of the distinct density, as a cross-check of :func:`capacity_distinct`."""
    n = min(ds.p, ds.m)
    scale = ds.m * sum(ds.vhat) / n
    val, _ = integrate_density(lambda t: density_distinct(ds, t) * math.log1p(t), scale,
                               rtol=1e-10, atol=1e-13)
    return n * val / math.log(2.0)


def relay_upper_bound(bc: SumSpec, mac: SumSpec, approx: bool = False,
                      precision: str | None = None) -> CapacityResult:
    """Cut-set bound ``min(C_BC, C_MAC)`` of the two-hop relay channel.

    With ``approx`` both cuts use the single-Wishart approximation.  The
    returned result carries the method tag of the smaller branch.
    """
    fn = capacity_approx if approx else capacity_determinantal
    c_bc = fn(bc, precision=precision)
    c_mac = fn(mac, precision=precision)
    return c_bc if c_bc.bits <= c_mac.bits else c_mac


def capacity_approx(spec: SumSpec, precision: str | None = None,
                    max_digits: int = DEFAULT_MAX_DIGITS) -> CapacityResult:
    """Capacity of the equivalent single Wishart matrix with ``p_s`` degrees of freedom."""
    if not isinstance(spec, SumSpec):
        raise ValidationError(f"expected a SumSpec, got {type(spec).__name__}")
    res = capacity_determinantal(equivalent_spec(spec), precision=precision, max_digits=max_digits)
    return CapacityResult(res.bits, "approx", res.err_estimate)


def approximation_error(spec: SumSpec, precision: str | None = None) -> float:
    """Relative error of the approximation in percent, ``100 |C - C_approx| / C``."""
    exact = capacity_determinantal(spec, precision=precision).bits
    approx = capacity_approx(spec, precision=precision).bits
    if exact == 0:
        raise NumericalFailure("exact capacity is zero; relative error undefined")
    return 100.0 * abs(exact - approx) / exact
