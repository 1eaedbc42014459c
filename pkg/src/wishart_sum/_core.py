"""Shared machinery behind the density and capacity determinants.

Both the repeated-variance (confluent) formula and the distinct-variance
formula have the same shape: a ``p x p`` matrix ``H`` whose columns are
indexed by the covariance values, a border row ``f(lambda)`` and a border
column ``g(lambda)`` that is non-zero only in its first ``m`` entries.  With
``c^-1 = -n det H`` the density is

    P(lambda) = c det [[0, f], [g, H]] = f^T H^-1 g / n,

and the capacity, by Cramer's rule on the row-replaced determinants, is
``sum_mu (Gcal_mu^T H^-1)_mu``.  A layout object supplies the entries, a
solver object holds the factorised ``H`` in float64 or in mpmath at a given
number of digits.
"""

from __future__ import annotations

import math
import os
import threading

import mpmath
import numpy as np

from . import special
from .errors import NumericalFailure, ValidationError
from .numeric import MpLU
from .special import FLOAT, MP

PRECISION_ENV = "WISHART_SUM_PRECISION"
PRECISION_MODES = ("auto", "standard", "extended")

FLOAT_EPS = float(np.finfo(float).eps)
GUARD_DIGITS = 30
DEFAULT_MAX_DIGITS = 1500
STRICT_DIGITS = 6


def resolve_precision(precision: str | None) -> str:
    """Explicit argument first, then the environment variable, then ``auto``."""
    if precision is None:
        precision = os.environ.get(PRECISION_ENV, "auto")
    mode = str(precision).strip().lower()
    if mode not in PRECISION_MODES:
        raise ValidationError(f"precision must be one of {PRECISION_MODES}, got {precision!r}")
    return mode


# --------------------------------------------------------------------------
# layouts
# --------------------------------------------------------------------------

class ConfluentLayout:
    """Block columns ``(v_k, j)``, ``j = 1..n_k``, for repeated variances.

    With ``balance`` every column is divided by ``Gamma(j) v_k^j`` and row
    ``i`` by ``w^i`` (``w`` the largest ``1/v_k``), which turns the entries
    into ``C(i-1, j-1) (u_k / w)^i`` and leaves every determinant ratio
    unchanged.
    """

    def __init__(self, m: int, blocks, balance: bool = True):
        self.m = int(m)
        self.v = tuple(float(v) for v, _ in blocks)
        self.mult = tuple(int(n) for _, n in blocks)
        self.p = sum(self.mult)
        self.n_eff = self.m
        self.balance = balance
        self.cols = [(k, j) for k, n in enumerate(self.mult) for j in range(1, n + 1)]
        log_u_max = max(-math.log(v) for v in self.v)
        self.log_w = log_u_max if balance else 0.0
        # log of the factor that has been taken out of each column
        self.column_scales = tuple(
            (math.lgamma(j) + j * math.log(self.v[k])) if balance else 0.0 for k, j in self.cols
        )

    # -- common helpers ----------------------------------------------------
    def _u(self, ops):
        if ops.extended:
            return [1 / mpmath.mpf(v) for v in self.v]
        return [1.0 / v for v in self.v]

    def _colfac(self, k, j, ops):
        # multiplies a balanced entry back to the plain one when balance=False
        if self.balance:
            return ops.num(1)
        return ops.factorial(j - 1) * ops.num(self.v[k]) ** j

    def _row_ratio(self, ops):
        return ops.exp(ops.num(-self.log_w)) if self.log_w else ops.num(1)

    def log_row_scale_sum(self) -> float:
        """``sum_i i * log w``: log of the product of the removed row factors."""
        return self.log_w * self.p * (self.p + 1) / 2.0

    # -- entries -------------------------------------------------------------
    def h_rows(self, ops):
        u = self._u(ops)
        inv_w = self._row_ratio(ops)
        ratio = [uk * inv_w for uk in u]
        colfac = [self._colfac(k, j, ops) for k, j in self.cols]
        rows = []
        for i in range(1, self.p + 1):
            row = []
            for c, (k, j) in enumerate(self.cols):
                if j > i:
                    row.append(ops.num(0))
                else:
                    row.append(ops.num(math.comb(i - 1, j - 1)) * ratio[k] ** i * colfac[c])
            rows.append(row)
        return rows

    def f_row(self, lam, ops, absolute=False):
        u = self._u(ops)
        out = []
        for k, j in self.cols:
            d = special._derivative_column(j - 1, self.m, u[k], lam, ops, absolute)
            out.append(d * u[k] ** j / ops.factorial(j - 1) * self._colfac(k, j, ops))
        return out

    def f_matrix_float(self, lams: np.ndarray, absolute: bool = False) -> np.ndarray:
        """Vectorised float64 border rows, shape ``(len(lams), p)``, in log form."""
        lams = np.asarray(lams, dtype=float)
        log_lam = np.log(lams)
        out = np.zeros((lams.size, self.p))
        m = self.m
        for c, (k, j) in enumerate(self.cols):
            v = self.v[k]
            log_u = -math.log(v)
            log_col = 0.0 if self.balance else math.lgamma(j) + j * math.log(v)
            acc = np.zeros(lams.size)
            for s in range(min(j - 1, m) + 1):
                e = j - 1 - s
                log_coef = (math.log(math.comb(j - 1, s)) - math.lgamma(j)
                            + math.lgamma(m + 1) - math.lgamma(m - s + 1))
                log_term = log_coef + (m - s + j) * log_u + e * log_lam - lams / v + log_col
                term = np.exp(log_term)
                acc += term if (absolute or e % 2 == 0) else -term
            out[:, c] = acc
        return out

    def g_col(self, lam, ops):
        inv_w = self._row_ratio(ops)
        out = []
        r = ops.num(1)
        for i in range(1, self.p + 1):
            r = r * inv_w
            if i <= self.m:
                out.append(lam ** (self.m - i) / ops.factorial(self.m - i) * r)
            else:
                out.append(ops.num(0))
        return out

    def g_matrix_float(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=float)
        log_lam = np.log(lams)
        out = np.zeros((lams.size, self.p))
        for i in range(1, self.m + 1):
            out[:, i - 1] = np.exp((self.m - i) * log_lam - math.lgamma(self.m - i + 1) - i * self.log_w)
        return out

    def gcal_row(self, mu, ops, table, absolute=False):
        """Capacity row ``mu`` in the same scaling as :meth:`h_rows`."""
        u = self._u(ops)
        r_mu = self._row_ratio(ops) ** mu
        pref = 1 / (ops.ln2() * ops.factorial(self.m - mu))
        out = []
        for k, j in self.cols:
            t = special._gcal_terms(mu, j, u[k], self.m, ops, table, absolute)
            out.append(t * pref * u[k] ** j / ops.factorial(j - 1) * self._colfac(k, j, ops) * r_mu)
        return out


class DistinctLayout:
    """Columns ``x_j = 1/vhat_j`` for pairwise distinct variances.

    ``H_ij = x_j^(i-1)`` (a Vandermonde matrix), ``f_j = x_j^m e^(-lambda x_j)``
    and the prefactor divides by ``min(p, m)``.
    """

    balance = False
    log_w = 0.0

    def __init__(self, m: int, vhat):
        self.m = int(m)
        self.vhat = tuple(float(v) for v in vhat)
        self.p = len(self.vhat)
        self.n_eff = min(self.p, self.m)
        self.column_scales = (0.0,) * self.p

    def log_row_scale_sum(self) -> float:
        return 0.0

    def _x(self, ops):
        if ops.extended:
            return [1 / mpmath.mpf(v) for v in self.vhat]
        return [1.0 / v for v in self.vhat]

    def h_rows(self, ops):
        x = self._x(ops)
        return [[xj ** (i - 1) for xj in x] for i in range(1, self.p + 1)]

    def f_row(self, lam, ops, absolute=False):
        return [xj ** self.m * ops.exp(-lam * xj) for xj in self._x(ops)]

    def g_col(self, lam, ops):
        out = []
        for i in range(1, self.p + 1):
            if i <= self.m:
                out.append(lam ** (self.m - i) / ops.factorial(self.m - i))
            else:
                out.append(ops.num(0))
        return out

    def gcal_row(self, mu, ops, table, absolute=False):
        pref = 1 / (ops.ln2() * ops.factorial(self.m - mu))
        return [special._gcal_terms(mu, 1, xj, self.m, ops, table, absolute) * pref for xj in self._x(ops)]


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------

class FloatSolver:
    """``H`` factorised in float64 with its first ``n_eff`` inverse columns."""

    extended = False
    digits = 16

    def __init__(self, layout):
        self.layout = layout
        self.eps = FLOAT_EPS
        H = np.array(layout.h_rows(FLOAT), dtype=float)
        self.H = H
        sign, logdet = np.linalg.slogdet(H)
        self.sign = int(sign)
        self.logdet = float(logdet)
        if self.sign == 0 or not np.all(np.isfinite(H)):
            self.kappa = math.inf
            self.Z = None
            return
        with np.errstate(all="ignore"):
            kappa = float(np.linalg.cond(H, 1))
        self.kappa = kappa if math.isfinite(kappa) else math.inf
        n = layout.n_eff
        if not math.isfinite(self.kappa):
            self.Z = None
            return
        Hinv = np.linalg.inv(H)
        self.Z = Hinv[:, :n]
        # componentwise bound for x^T H^-1 y from a backward-stable solve:
        # |delta| <= eps x^T (|H^-1| |H| |H^-1| + p |H^-1|) |y|
        absZ = np.abs(self.Z)
        self.W = np.abs(Hinv) @ (np.abs(H) @ absZ) + layout.p * absZ
        skeel = np.abs(Hinv) @ np.abs(H)
        self.skeel = float(np.max(np.sum(skeel, axis=1)))

    def rel_noise(self) -> float:
        """Worst relative error scale of products with ``H^-1``."""
        if self.Z is None:
            return math.inf
        return self.eps * (self.skeel + self.layout.p)


class MpSolver:
    """``H`` factorised by :class:`MpLU` at ``digits`` significant digits."""

    extended = True

    def __init__(self, layout, digits: int):
        self.layout = layout
        self.digits = int(digits)
        with mpmath.workdps(self.digits):
            self.eps = mpmath.mpf(2) ** (-mpmath.mp.prec)
            lu = MpLU(layout.h_rows(MP))
            if lu.singular:
                raise NumericalFailure(f"normalisation determinant is singular at {self.digits} digits "
                                       f"(p={layout.p}, m={layout.m})")
            ld = lu.logdet()
            self.sign = ld.sign
            self.logdet = ld.log_magnitude
            self.kappa = lu.condition_1norm()
            n = layout.n_eff
            cols = []
            for i in range(n):
                e = [mpmath.mpf(0)] * layout.p
                e[i] = mpmath.mpf(1)
                cols.append(lu.solve(e))
            # Z[j][i] = (H^-1)_{j,i}
            self.Z = [[cols[i][j] for i in range(n)] for j in range(layout.p)]
            self.absZ = [[abs(z) for z in row] for row in self.Z]

    @property
    def log10_kappa(self) -> float:
        return float(mpmath.log10(self.kappa)) if self.kappa > 0 else 0.0

    def rel_noise(self):
        return self.eps * (self.kappa + self.layout.p)


class MpSolverCache:
    """Extended solvers for one layout, keyed by digit count, built on demand."""

    def __init__(self, layout, max_digits: int = DEFAULT_MAX_DIGITS, min_digits: int | None = None):
        self.layout = layout
        self.max_digits = int(max_digits)
        self._lock = threading.Lock()
        self._by_digits: dict[int, MpSolver] = {}
        start = min_digits or (GUARD_DIGITS + 10 + layout.p // 2)
        self.base = self._settle(start)

    def _settle(self, digits: int) -> MpSolver:
        # raise the working precision until it covers log10(kappa) + guard
        for _ in range(8):
            if digits > self.max_digits:
                raise NumericalFailure(f"extended precision would need more than max_digits="
                                       f"{self.max_digits} digits")
            solver = self.get(digits)
            need = int(math.ceil(solver.log10_kappa)) + GUARD_DIGITS
            if digits >= need:
                return solver
            digits = need + 10
        raise NumericalFailure("condition estimate did not stabilise while raising precision")

    def get(self, digits: int) -> MpSolver:
        digits = int(digits)
        if digits > self.max_digits:
            raise NumericalFailure(f"extended precision would need {digits} digits "
                                   f"(max_digits={self.max_digits})")
        with self._lock:
            solver = self._by_digits.get(digits)
            if solver is None:
                solver = MpSolver(self.layout, digits)
                self._by_digits[digits] = solver
            return solver

    def refine(self, solver: MpSolver, est, target) -> MpSolver:
        """A solver with enough extra digits to bring ``est`` under ``target``."""
        gap = float(mpmath.log10(est / target)) if target > 0 else 20.0
        return self.get(solver.digits + int(math.ceil(max(gap, 1.0))) + 10)


def normalisation(layout, solver):
    """``(sign, log|c|)`` with ``c^-1 = -n det H`` for the unscaled ``H``."""
    log_det = solver.logdet + sum(layout.column_scales) + layout.log_row_scale_sum()
    return -solver.sign, -math.log(layout.n_eff) - log_det


# --------------------------------------------------------------------------
# Schur-form evaluations in extended precision
# --------------------------------------------------------------------------

def mp_density_point(layout, solver: MpSolver, lam: float):
    """``(P, est)`` at one point, in the solver's precision, returned as mpf."""
    n = layout.n_eff
    with mpmath.workdps(solver.digits):
        x = mpmath.mpf(lam)
        f = layout.f_row(x, MP)
        fa = layout.f_row(x, MP, absolute=True)
        g = layout.g_col(x, MP)
        val = mpmath.mpf(0)
        mag = mpmath.mpf(0)
        for i in range(n):
            s = mpmath.fsum(f[j] * solver.Z[j][i] for j in range(layout.p))
            sa = mpmath.fsum(fa[j] * solver.absZ[j][i] for j in range(layout.p))
            val += g[i] * s
            mag += abs(g[i]) * sa
        P = val / n
        est = solver.rel_noise() * mag / n
        return +P, +est


def mp_capacity(layout, solver: MpSolver, table):
    """``(C, est)`` as mpf from the Cramer sum over the ``n`` replaced rows."""
    with mpmath.workdps(solver.digits):
        total = mpmath.mpf(0)
        mag = mpmath.mpf(0)
        for mu in range(1, layout.n_eff + 1):
            row = layout.gcal_row(mu, MP, table)
            row_abs = layout.gcal_row(mu, MP, table, absolute=True)
            total += mpmath.fsum(row[j] * solver.Z[j][mu - 1] for j in range(layout.p))
            mag += mpmath.fsum(row_abs[j] * solver.absZ[j][mu - 1] for j in range(layout.p))
        return +total, +(solver.rel_noise() * mag)
