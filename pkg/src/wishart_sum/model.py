"""Model description for the weighted Wishart sum and its one-term approximation.

The random matrix is ``Wbar = sum_i (a_i / p_i) W_i`` with independent
``W_i ~ CW_m(p_i, sigma2 I)``.  Every quantity the density and capacity need
is a function of ``m``, the block sizes ``p_i`` and ``v_i = a_i sigma2 / p_i``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ValidationError

__all__ = [
    "WishartTerm",
    "SumSpec",
    "AntennaConfig",
    "db_to_linear",
    "from_antennas",
    "compute_ps",
    "equivalent_spec",
    "moment_summary",
]


def db_to_linear(db: float) -> float:
    """Power ratio in dB to linear scale."""
    return 10.0 ** (db / 10.0)


def _positive_int(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, numbers.Integral) or x < 1:
        raise ValidationError(f"{what} must be a positive integer, got {x!r}")
    return int(x)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


@dataclass(frozen=True)
class WishartTerm:
    """One summand: ``p`` degrees of freedom and linear SNR weight ``a``."""

    p: int
    a: float

    def __post_init__(self):
        object.__setattr__(self, "p", _positive_int(self.p, "degrees of freedom p"))
        if not (isinstance(self.a, numbers.Real) and math.isfinite(self.a) and self.a > 0):
            raise ValidationError(f"weight a must be a positive finite number, got {self.a!r}")
        object.__setattr__(self, "a", float(self.a))


@dataclass(frozen=True)
class SumSpec:
    """Weighted sum of ``K`` complex central Wishart matrices of size ``m``."""

    m: int
    terms: tuple[WishartTerm, ...]
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "m", _positive_int(self.m, "matrix dimension m"))
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValidationError("a SumSpec needs at least one term")
        for t in self.terms:
            if not isinstance(t, WishartTerm):
                raise ValidationError(f"terms must be WishartTerm instances, got {type(t).__name__}")
            if t.p < self.m:
                raise ValidationError(f"each term needs p_i >= m (got p_i={t.p}, m={self.m})")
        if not (isinstance(self.sigma2, numbers.Real) and math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2!r}")
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @classmethod
    def from_lists(cls, m: int, p: Sequence[int], a: Sequence[float], sigma2: float = 1.0) -> "SumSpec":
        if len(p) != len(a):
            raise ValidationError("p and a must have the same length")
        return cls(m, tuple(WishartTerm(int(pi), float(ai)) for pi, ai in zip(p, a)), float(sigma2))

    @property
    def K(self) -> int:
        return len(self.terms)

    @property
    def p(self) -> int:
        """Total degrees of freedom."""
        return sum(t.p for t in self.terms)

    @property
    def v(self) -> tuple[float, ...]:
        """Per-term variances ``a_i sigma2 / p_i``."""
        return tuple(t.a * self.sigma2 / t.p for t in self.terms)

    @property
    def total_snr(self) -> float:
        return sum(t.a for t in self.terms)

    @property
    def mean_eigenvalue(self) -> float:
        """``E[lambda] = sigma2 * sum(a_i)``."""
        return self.sigma2 * self.total_snr

    def blocks(self, rtol: float = 1e-12) -> list[tuple[float, int]]:
        """Distinct variances with their total multiplicity.

        Terms whose ``v_i`` agree to ``rtol`` are one Wishart matrix with the
        summed degrees of freedom, so they share one block of columns.
        """
        out: list[list] = []
        for v, t in zip(self.v, self.terms):
            for blk in out:
                if abs(blk[0] - v) <= rtol * max(blk[0], v):
                    blk[1] += t.p
                    break
            else:
                out.append([v, t.p])
        return [(v, p) for v, p in out]


@dataclass(frozen=True)
class AntennaConfig:
    """Link with ``M`` transmit and ``N`` receive antennas at SNR ``a_db``."""

    M: int
    N: int
    a_db: float

    def __post_init__(self):
        for name in ("M", "N"):
            object.__setattr__(self, name, _positive_int(getattr(self, name), f"antenna count {name}"))
        if not (isinstance(self.a_db, numbers.Real) and math.isfinite(self.a_db)):
            raise ValidationError(f"a_db must be a finite number, got {self.a_db!r}")


def from_antennas(configs: Iterable[AntennaConfig], sigma2: float = 1.0) -> SumSpec:
    """Build a :class:`SumSpec` from antenna counts and SNRs in dB.

    ``W_i`` is ``H_i^H H_i`` or ``H_i H_i^H`` whichever is smaller, so
    ``m = min(M_i, N_i)`` and ``p_i = max(M_i, N_i)``.
    """
    configs = list(configs)
    if not configs:
        raise ValidationError("at least one antenna configuration is required")
    ms = {min(c.M, c.N) for c in configs}
    if len(ms) != 1:
        raise ValidationError(f"the sum is defined only for identical m_i, got {sorted(ms)}")
    m = ms.pop()
    terms = tuple(WishartTerm(max(c.M, c.N), db_to_linear(c.a_db)) for c in configs)
    return SumSpec(m, terms, float(sigma2))


def _ps_real(spec: SumSpec) -> float:
    s = spec.total_snr
    return s * s / sum(t.a * t.a / t.p for t in spec.terms)


def compute_ps(spec: SumSpec) -> int:
    """Degrees of freedom of the single equivalent Wishart matrix.

    Matches the diagonal variance of ``Wbar``:
    ``round((sum a_i)^2 / sum(a_i^2 / p_i))``, ties away from zero.
    """
    return _round_half_away(_ps_real(spec))


def equivalent_spec(spec: SumSpec) -> SumSpec:
    """One-term spec with ``p_1 = p_s`` and ``a_1 = sum a_i``."""
    return SumSpec(spec.m, (WishartTerm(compute_ps(spec), spec.total_snr),), spec.sigma2)


def moment_summary(spec: SumSpec) -> tuple[float, float]:
    """Mean and variance of each diagonal entry of ``Wbar``."""
    mean = spec.sigma2 * spec.total_snr
    var = spec.sigma2 ** 2 * sum(t.a * t.a / t.p for t in spec.terms)
    return mean, var
