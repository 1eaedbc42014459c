"""Dense linear algebra and random sampling primitives.

Determinants are only ever exposed in signed-log form so that products of
Gamma-function sized entries never overflow.  Two LU back ends exist: LAPACK
(through scipy/numpy) for float64, and a pure-Python partial-pivoting LU over
:mod:`mpmath` numbers for the extended-precision path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np
from scipy import linalg

from .errors import DimensionError, NumericalFailure, ValidationError

__all__ = [
    "SignedLogValue",
    "MpLU",
    "lu_logdet",
    "lu_logdet_batch",
    "hermitian_eigenvalues",
    "stream_generator",
    "sample_complex_gaussian",
]

_MASK64 = (1 << 64) - 1
_LIMIT128 = 1 << 128


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    sign: int
    log_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValidationError(f"sign must be -1, 0 or +1, got {self.sign!r}")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise ValidationError("sign 0 is used exactly for log_magnitude = -inf")

    @classmethod
    def from_value(cls, x) -> "SignedLogValue":
        """Build from a float or an :class:`mpmath.mpf`."""
        if x == 0:
            return cls(0, -math.inf)
        if isinstance(x, mpmath.mpf):
            return cls(1 if x > 0 else -1, float(mpmath.log(abs(x))))
        x = float(x)
        if not math.isfinite(x):
            raise ValidationError(f"cannot represent non-finite value {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @property
    def value(self) -> float:
        """The represented number as a float (may overflow to +/-inf)."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_magnitude)
        except OverflowError:
            return self.sign * math.inf

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue(0, -math.inf)
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: "SignedLogValue") -> "SignedLogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return self
        return SignedLogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.log_magnitude)

    def scaled(self, log_factor: float) -> "SignedLogValue":
        """Multiply by ``exp(log_factor)``."""
        if self.sign == 0:
            return self
        return SignedLogValue(self.sign, self.log_magnitude + log_factor)


def _as_square(M) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    return A


def _real_sign(phase: complex, what: str) -> int:
    if abs(phase.imag) > 1e-9:
        raise ValidationError(f"{what} is not real (phase {phase})")
    return 1 if phase.real > 0 else -1


def lu_logdet(M) -> SignedLogValue:
    """Signed log-determinant of a square matrix by LU with partial pivoting.

    Complex input is accepted as long as the determinant is real, which is
    the case for every matrix this package builds.
    """
    A = _as_square(M)
    n = A.shape[0]
    if n == 0:
        return SignedLogValue(1, 0.0)
    with warnings.catch_warnings():
        # an exactly singular factor is reported through sign 0 below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A, check_finite=False)
    diag = np.diagonal(lu)
    if np.any(diag == 0):
        return SignedLogValue(0, -math.inf)
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    log_mag = float(np.sum(np.log(np.abs(diag))))
    if np.iscomplexobj(lu):
        phase = complex(np.prod(diag / np.abs(diag))) * (-1) ** swaps
        sign = _real_sign(phase, "determinant")
    else:
        sign = (-1) ** swaps * int(np.prod(np.sign(diag)))
    return SignedLogValue(sign, log_mag)


def lu_logdet_batch(stack) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`lu_logdet` over a ``(..., n, n)`` real stack.

    Returns ``(signs, log_magnitudes)`` arrays; LAPACK ``getrf`` (partial
    pivoting) underlies both this and the scalar version.
    """
    A = np.asarray(stack, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"expected a stack of square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix stack has non-finite entries")
    sign, logdet = np.linalg.slogdet(A)
    return sign, logdet


class MpLU:
    """LU factorisation ``P A = L U`` with partial pivoting in mpmath.

    Arithmetic happens at whatever ``mpmath.mp.dps`` is active while the
    methods run; callers wrap construction and use in ``mpmath.workdps``.
    """

    def __init__(self, rows: Sequence[Sequence]):
        a = [list(r) for r in rows]
        n = len(a)
        if any(len(r) != n for r in a):
            raise DimensionError("MpLU needs a square matrix")
        self.n = n
        self._norm1 = max((sum(abs(a[i][j]) for i in range(n)) for j in range(n)), default=mpmath.mpf(0))
        perm = list(range(n))
        sign = 1
        singular = False
        for k in range(n):
            piv = max(range(k, n), key=lambda i: abs(a[i][k]))
            if a[piv][k] == 0:
                singular = True
                continue
            if piv != k:
                a[k], a[piv] = a[piv], a[k]
                perm[k], perm[piv] = perm[piv], perm[k]
                sign = -sign
            rowk = a[k]
            akk = rowk[k]
            tail = range(k + 1, n)
            for i in tail:
                ri = a[i]
                if ri[k]:
                    f = ri[k] / akk
                    ri[k] = f
                    for j in tail:
                        ri[j] -= f * rowk[j]
        self._a = a
        self.perm = perm
        self._sign = sign
        self.singular = singular

    def det(self):
        if self.singular:
            return mpmath.mpf(0)
        d = mpmath.mpf(self._sign)
        for k in range(self.n):
            d *= self._a[k][k]
        return d

    def logdet(self) -> SignedLogValue:
        if self.singular:
            return SignedLogValue(0, -math.inf)
        sign = self._sign
        log_mag = mpmath.mpf(0)
        for k in range(self.n):
            u = self._a[k][k]
            if u < 0:
                sign = -sign
            log_mag += mpmath.log(abs(u))
        return SignedLogValue(sign, float(log_mag))

    def _check(self):
        if self.singular:
            raise NumericalFailure("matrix is singular to working precision")

    def solve(self, b: Sequence) -> list:
        """Solve ``A x = b``."""
        self._check()
        a, n = self._a, self.n
        y = [b[self.perm[i]] for i in range(n)]
        for i in range(n):
            ri = a[i]
            s = y[i]
            for j in range(i):
                s -= ri[j] * y[j]
            y[i] = s
        for i in reversed(range(n)):
            ri = a[i]
            s = y[i]
            for j in range(i + 1, n):
                s -= ri[j] * y[j]
            y[i] = s / ri[i]
        return y

    def solve_transpose(self, b: Sequence) -> list:
        """Solve ``A^T x = b``."""
        self._check()
        a, n = self._a, self.n
        z = list(b)
        for i in range(n):  # U^T z = b
            s = z[i]
            for j in range(i):
                s -= a[j][i] * z[j]
            z[i] = s / a[i][i]
        for i in reversed(range(n)):  # L^T w = z, unit diagonal
            s = z[i]
            for j in range(i + 1, n):
                s -= a[j][i] * z[j]
            z[i] = s
        x = [None] * n
        for i in range(n):
            x[self.perm[i]] = z[i]
        return x

    def inverse_norm1_estimate(self):
        """Hager/Higham lower estimate of ``||A^{-1}||_1``."""
        self._check()
        n = self.n
        if n == 0:
            return mpmath.mpf(0)
        x = [mpmath.mpf(1) / n] * n
        est = mpmath.mpf(0)
        last_j = None
        for _ in range(5):
            y = self.solve(x)
            est = max(est, sum(abs(t) for t in y))
            xi = [mpmath.mpf(1) if t >= 0 else mpmath.mpf(-1) for t in y]
            z = self.solve_transpose(xi)
            j = max(range(n), key=lambda i: abs(z[i]))
            if j == last_j or abs(z[j]) <= sum(zi * xi_ for zi, xi_ in zip(z, x)):
                break
            last_j = j
            x = [mpmath.mpf(0)] * n
            x[j] = mpmath.mpf(1)
        if n > 1:
            b = [mpmath.mpf((-1) ** i) * (1 + mpmath.mpf(i) / (n - 1)) for i in range(n)]
            alt = 2 * sum(abs(t) for t in self.solve(b)) / (3 * n)
            est = max(est, alt)
        return est

    def condition_1norm(self):
        """Estimated 1-norm condition number of the factorised matrix."""
        if self.singular:
            return mpmath.inf
        return self._norm1 * self.inverse_norm1_estimate()


def hermitian_eigenvalues(A, eigenvectors: bool = False, tol: float = 1e-10):
    """Eigenvalues (ascending) of a Hermitian matrix or a stack of them.

    ``A`` may have shape ``(m, m)`` or ``(..., m, m)``.  The asymmetry
    ``max|A - A^H|`` must not exceed ``tol * max(1, max|A|)``.  With
    ``eigenvectors=True`` returns ``(w, U)`` with ``A = U diag(w) U^H``.
    """
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    asym = np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2)))) if A.size else 0.0
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if asym > tol * scale:
        raise ValidationError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    if eigenvectors:
        return np.linalg.eigh(A)
    return np.linalg.eigvalsh(A)


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one ``(seed, stream)`` pair.

    Philox keyed by ``seed`` with ``stream`` placed in the upper 128 bits of
    the counter, so every stream owns a disjoint counter range and the draws
    do not depend on which other streams were consumed, or in what order.
    """
    if not (isinstance(seed, (int, np.integer)) and 0 <= seed < _LIMIT128):
        raise ValidationError(f"seed must be an integer in [0, 2**128), got {seed!r}")
    if not (isinstance(stream, (int, np.integer)) and 0 <= stream < _LIMIT128):
        raise ValidationError(f"stream must be an integer in [0, 2**128), got {stream!r}")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(stream) << 128))


def sample_complex_gaussian(seed: int, stream: int, rows: int, cols: int, variance: float = 1.0) -> np.ndarray:
    """``rows x cols`` matrix of i.i.d. circularly-symmetric CN(0, variance) entries."""
    if not variance > 0:
        raise ValidationError(f"variance must be positive, got {variance!r}")
    if rows < 0 or cols < 0:
        raise DimensionError("rows and cols must be non-negative")
    z = stream_generator(seed, stream).standard_normal((rows, cols, 2))
    z *= math.sqrt(variance / 2.0)
    return z[..., 0] + 1j * z[..., 1]
