"""Monte Carlo simulation of ``Wbar`` and the experiment sweeps.

Every realization ``i`` draws its stacked channel from its own counter-based
stream ``base XOR i``, so results are bit-identical whatever the chunking or
the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .capacity import CapacityResult, approximation_error, capacity_approx
from .density import DensityEvaluator, density_grid
from .errors import ValidationError
from .model import AntennaConfig, SumSpec, from_antennas
from .numeric import hermitian_eigenvalues, sample_complex_gaussian, stream_generator

__all__ = [
    "McConfig",
    "EmpiricalDensity",
    "sample_wbar",
    "sample_eigenvalues",
    "empirical_density",
    "empirical_capacity",
    "histogram_agreement",
    "relay_specs",
    "sweep_relay",
    "sweep_error",
]

_CHUNK = 2048


@dataclass(frozen=True)
class McConfig:
    """Simulation settings; ``lambda_max=None`` means ``4 sigma2 sum(a_i)``."""

    realizations: int = 40_000
    seed: int = 0
    bins: int = 60
    lambda_max: float | None = None
    workers: int = 1
    stream_base: int = 0

    def __post_init__(self):
        for name in ("realizations", "bins", "workers"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)) or val < 1:
                raise ValidationError(f"{name} must be a positive integer, got {val!r}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.lambda_max is not None and not (math.isfinite(self.lambda_max) and self.lambda_max > 0):
            raise ValidationError(f"lambda_max must be positive, got {self.lambda_max!r}")


@dataclass(frozen=True)
class EmpiricalDensity:
    """Histogram of the pooled eigenvalues of ``n`` sampled matrices.

    ``heights`` are ``count / (total * width)``, so their area equals the
    in-range fraction ``1 - tail_fraction``.
    """

    bin_edges: np.ndarray
    heights: np.ndarray
    counts: np.ndarray
    n: int
    seed: int
    total: int
    tail_fraction: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)


def _weights(spec: SumSpec) -> np.ndarray:
    return np.concatenate([np.full(t.p, t.a / t.p) for t in spec.terms])


def sample_wbar(spec: SumSpec, seed: int, stream: int) -> np.ndarray:
    """One draw of ``Wbar = H^H D H`` with ``H`` stacked ``p x m``, ``D = diag(a_i/p_i)``."""
    H = sample_complex_gaussian(seed, stream, spec.p, spec.m, spec.sigma2)
    W = H.conj().T @ (_weights(spec)[:, None] * H)
    return 0.5 * (W + W.conj().T)


def _chunk_eigs(spec: SumSpec, seed: int, base: int, start: int, stop: int, diag: bool):
    p, m = spec.p, spec.m
    z = np.empty((stop - start, p, m, 2))
    for k, i in enumerate(range(start, stop)):
        z[k] = stream_generator(seed, base ^ i).standard_normal((p, m, 2))
    z *= math.sqrt(spec.sigma2 / 2.0)
    H = z[..., 0] + 1j * z[..., 1]
    w = _weights(spec)
    W = np.einsum("nki,k,nkj->nij", H.conj(), w, H)
    W = 0.5 * (W + np.conj(np.swapaxes(W, -1, -2)))
    eigs = hermitian_eigenvalues(W)
    if diag:
        return eigs, np.real(np.diagonal(W, axis1=-2, axis2=-1)).copy()
    return eigs, None


def sample_eigenvalues(spec: SumSpec, mc: McConfig, diag: bool = False):
    """Eigenvalues of every realization, shape ``(realizations, m)``.

    With ``diag`` also returns the real diagonals of the sampled matrices.
    """
    if not isinstance(spec, SumSpec):
        raise ValidationError(f"expected a SumSpec, got {type(spec).__name__}")
    bounds = [(s, min(s + _CHUNK, mc.realizations)) for s in range(0, mc.realizations, _CHUNK)]

    def run(b):
        return _chunk_eigs(spec, mc.seed, mc.stream_base, b[0], b[1], diag)

    if mc.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=mc.workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    eigs = np.concatenate([e for e, _ in parts])
    if diag:
        return eigs, np.concatenate([d for _, d in parts])
    return eigs


def empirical_density(spec: SumSpec, mc: McConfig) -> EmpiricalDensity:
    """Histogram of all ``m * realizations`` eigenvalues on ``[0, lambda_max]``."""
    lam_max = mc.lambda_max if mc.lambda_max is not None else 4.0 * spec.mean_eigenvalue
    eigs = sample_eigenvalues(spec, mc).ravel()
    edges = np.linspace(0.0, lam_max, mc.bins + 1)
    counts, _ = np.histogram(eigs, bins=edges)
    total = eigs.size
    heights = counts / (total * np.diff(edges))
    tail = float(np.count_nonzero(eigs > lam_max)) / total
    return EmpiricalDensity(edges, heights, counts, mc.realizations, mc.seed, total, tail)


def empirical_capacity(spec: SumSpec, mc: McConfig) -> CapacityResult:
    """Sample mean of ``log2 det(I + Wbar) = sum_k log2(1 + lambda_k)``."""
    eigs = sample_eigenvalues(spec, mc)
    per = np.sum(np.log1p(np.clip(eigs, 0.0, None)), axis=1) / math.log(2.0)
    mean = float(np.mean(per))
    stderr = float(np.std(per, ddof=1) / math.sqrt(per.size)) if per.size > 1 else 0.0
    return CapacityResult(mean, "monte_carlo", stderr)


def histogram_agreement(emp: EmpiricalDensity, ev: DensityEvaluator, n_sigma: float = 3.0):
    """Fraction of bins whose count lies within ``n_sigma`` multinomial bands.

    Bin probabilities are integrals of the analytic density;  returns
    ``(fraction, expected_probabilities)``.
    """
    probs = np.empty(emp.counts.size)
    for b, (lo, hi) in enumerate(zip(emp.bin_edges[:-1], emp.bin_edges[1:])):
        val, _ = integrate.quad(lambda t: density_grid(ev, [t])[0], lo, hi, epsrel=1e-9, epsabs=1e-14)
        probs[b] = val
    expected = emp.total * probs
    sigma = np.sqrt(emp.total * probs * (1.0 - probs))
    ok = np.abs(emp.counts - expected) <= n_sigma * np.maximum(sigma, 1.0)
    return float(np.mean(ok)), probs


# --------------------------------------------------------------------------
# experiment sweeps
# --------------------------------------------------------------------------

def relay_specs(a2_db: float, geometry: tuple[int, int] = (2, 2)) -> tuple[SumSpec, SumSpec]:
    """BC and MAC cuts for ``a_1 = 10 a_2`` and ``a_3 = a_2`` (all links ``M x N``)."""
    M, N = geometry
    bc = from_antennas([AntennaConfig(M, N, a2_db + 10.0), AntennaConfig(M, N, a2_db)])
    mac = from_antennas([AntennaConfig(M, N, a2_db), AntennaConfig(M, N, a2_db)])
    return bc, mac


def sweep_relay(a2_grid_db: Sequence[float], mc: McConfig, geometry: tuple[int, int] = (2, 2)):
    """Rows ``(a2_dB, C_upper_mc, C_upper_approx)`` along the grid."""
    rows = []
    for k, a2 in enumerate(a2_grid_db):
        a2 = float(a2)
        if not 0.0 <= a2 <= 30.0:
            raise ValidationError(f"a2 grid values must lie in [0, 30] dB, got {a2}")
        bc, mac = relay_specs(a2, geometry)
        mc_bits = []
        for cut, spec in enumerate((bc, mac)):
            cfg = McConfig(mc.realizations, mc.seed, mc.bins, mc.lambda_max, mc.workers,
                           stream_base=mc.stream_base ^ (((2 * k + cut) + 1) << 64))
            mc_bits.append(empirical_capacity(spec, cfg).bits)
        approx = min(capacity_approx(bc).bits, capacity_approx(mac).bits)
        rows.append((a2, min(mc_bits), approx))
    return rows


def sweep_error(ratio_grid_db: Sequence[float], a2_db: float = 5.0, geometry: tuple[int, int] = (2, 2)):
    """Rows ``(ratio_dB, error_pct)`` for ``K = 2`` with ``a_1 = a_2 10^(ratio/10)``."""
    M, N = geometry
    rows = []
    for r in ratio_grid_db:
        r = float(r)
        spec = from_antennas([AntennaConfig(M, N, a2_db + r), AntennaConfig(M, N, a2_db)])
        rows.append((r, approximation_error(spec)))
    return rows
