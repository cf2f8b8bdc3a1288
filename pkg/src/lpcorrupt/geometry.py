"""Analytic and Monte Carlo geometry of p-norm balls.

Closed-form (log-scale) volumes and volume factors, rejection-sampling volume
estimates, radial concentration summaries, and pairwise overlap curves: the
fraction of uniform samples from one ball that land inside another, swept over
a severity grid.

Log-scale volumes keep d=3072 tractable; the rejection estimator is for low
dimension, where the enclosing cube still gets hit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .norms import PNorm
from .rng import RngStream
from .sampler import BALL, CorruptionSpec, RadialMode, l0_count, sample_ball_block

__all__ = [
    "BallSpec",
    "OverlapCurve",
    "VolumeEstimate",
    "RadiusSummary",
    "log_volume",
    "volume_factor",
    "log_volume_factor",
    "ball_contains",
    "sample_from_ball",
    "ball_family",
    "overlap_curve",
    "concentration_check",
    "mc_volume",
]

# Membership tolerance: samples from a ball must test as members of that ball
# despite float round-off in the recomputed norm.
_MEMBERSHIP_RTOL = 1e-9


@dataclass(frozen=True)
class BallSpec:
    """A p-norm ball: parameter p, radius (or L0 ratio) epsilon, dimension d."""

    p: PNorm
    epsilon: float
    d: int

    def __post_init__(self) -> None:
        if int(self.d) < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d!r}")
        if not float(self.epsilon) > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.p.is_zero and float(self.epsilon) > 1.0:
            raise ValueError("L0 ratio must lie in (0, 1]")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "d", int(self.d))


def log_volume(ball: BallSpec) -> float:
    """Natural log of the Lebesgue volume of a p-norm ball.

    For finite p: log V = d*log(2*Gamma(1/p + 1)*eps) - log Gamma(d/p + 1);
    for p=inf: d*log(2*eps). p=0 is rejected (measure-zero support).
    """
    if ball.p.is_zero:
        raise ValueError("the L0 support has Lebesgue measure zero; no volume is defined")
    d, eps = ball.d, ball.epsilon
    if ball.p.is_inf:
        return d * math.log(2.0 * eps)
    p = ball.p.value
    return d * (math.log(2.0) + float(gammaln(1.0 / p + 1.0)) + math.log(eps)) - float(
        gammaln(d / p + 1.0)
    )


def log_volume_factor(d: int, p_hi: PNorm, p_lo: PNorm) -> float:
    """log of the equal-epsilon volume ratio of two p-norm balls (epsilon cancels)."""
    return log_volume(BallSpec(p_hi, 1.0, d)) - log_volume(BallSpec(p_lo, 1.0, d))


def volume_factor(d: int, p_hi: PNorm, p_lo: PNorm) -> float:
    return math.exp(log_volume_factor(d, p_hi, p_lo))


def _row_lp_norms(points: np.ndarray, p: PNorm) -> np.ndarray:
    a = np.abs(np.asarray(points, dtype=np.float64))
    if a.ndim != 2:
        raise ValueError("expected an (n, d) sample block")
    if p.is_inf:
        return a.max(axis=1)
    m = a.max(axis=1)
    safe = np.where(m > 0.0, m, 1.0)
    sums = np.sum((a / safe[:, None]) ** p.value, axis=1)
    return np.where(m > 0.0, safe * sums ** (1.0 / p.value), 0.0)


def ball_contains(ball: BallSpec, points: np.ndarray) -> np.ndarray:
    """Boolean membership of each row of ``points`` in the ball.

    The L0 ball of ratio epsilon contains a vector iff it has at most
    round(epsilon*d) nonzero components. Membership allows 1e-9 relative
    slack so a ball's own samples always test as members.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != ball.d:
        raise ValueError(f"expected shape (n, {ball.d}), got {pts.shape}")
    if ball.p.is_zero:
        budget = l0_count(ball.epsilon, ball.d)
        return np.count_nonzero(pts, axis=1) <= budget
    return _row_lp_norms(pts, ball.p) <= ball.epsilon * (1.0 + _MEMBERSHIP_RTOL)


def _ball_salt(ball: BallSpec, mode: RadialMode) -> int:
    """Stable per-ball stream salt, so a given ball always yields the same samples
    under one base stream regardless of which role (first/second) it plays."""
    text = f"{ball.p}|{ball.epsilon!r}|{ball.d}|{mode}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def sample_from_ball(
    ball: BallSpec,
    n_samples: int,
    rng: RngStream | np.random.Generator,
    mode: RadialMode = BALL,
) -> np.ndarray:
    """Draw n uniform samples from the ball as an (n, d) array.

    L0 samples are the replacement corruption applied at the origin: the
    selected components take values in {0, 1}, the rest stay zero.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    gen = rng.generator(_ball_salt(ball, mode)) if isinstance(rng, RngStream) else rng
    d = ball.d
    if ball.p.is_zero:
        k = l0_count(ball.epsilon, d)
        if k == 0:
            raise ValueError(f"L0 ratio {ball.epsilon!r} selects zero of {d} components")
        out = np.zeros((n_samples, d))
        for i in range(n_samples):
            idx = gen.choice(d, size=k, replace=False)
            out[i, idx] = gen.integers(0, 2, size=k).astype(np.float64)
        return out
    if ball.p.is_inf:
        block = gen.uniform(-ball.epsilon, ball.epsilon, size=(n_samples, d))
        if mode.kind == "sphere":
            rows = np.arange(n_samples)
            cols = gen.integers(0, d, size=n_samples)
            signs = gen.integers(0, 2, size=n_samples).astype(np.float64) * 2.0 - 1.0
            block[rows, cols] = signs * ball.epsilon
        return block
    spec = CorruptionSpec(ball.p, ball.epsilon, mode, clamp=False)
    return sample_ball_block(d, spec, n_samples, gen)


def ball_family(p: PNorm, epsilons: Sequence[float], d: int) -> tuple[BallSpec, ...]:
    """Same-p balls over a severity grid."""
    return tuple(BallSpec(p, e, d) for e in epsilons)


@dataclass(frozen=True)
class OverlapCurve:
    """Monte Carlo overlap fractions of a family of balls against one fixed ball."""

    fixed_ball: BallSpec
    varying_p: PNorm
    epsilon_grid: tuple[float, ...]
    frac_first_in_second: tuple[float, ...]
    frac_second_in_first: tuple[float, ...]
    n_samples: int

    def __post_init__(self) -> None:
        k = len(self.epsilon_grid)
        if len(self.frac_first_in_second) != k or len(self.frac_second_in_first) != k:
            raise ValueError("fraction lists must match the epsilon grid length")


def overlap_curve(
    first_family: Sequence[BallSpec],
    second: BallSpec,
    n_samples: int = 1000,
    rng: RngStream | None = None,
) -> OverlapCurve:
    """For each first ball: the fraction of its samples inside the second ball,
    and the fraction of the second ball's samples inside it.

    Samples for a given ball are derived from a per-ball stream, so the fixed
    ball is sampled once and swapping roles reproduces the same fractions.
    """
    if not first_family:
        raise ValueError("first_family must be nonempty")
    p = first_family[0].p
    for ball in first_family:
        if ball.d != second.d:
            raise ValueError(f"dimension mismatch: {ball.d} vs {second.d}")
        if ball.p != p:
            raise ValueError("first_family must share one p")
    if rng is None:
        rng = RngStream(0)

    second_samples = sample_from_ball(second, n_samples, rng)
    first_in_second: list[float] = []
    second_in_first: list[float] = []
    for ball in first_family:
        first_samples = sample_from_ball(ball, n_samples, rng)
        first_in_second.append(float(np.mean(ball_contains(second, first_samples))))
        second_in_first.append(float(np.mean(ball_contains(ball, second_samples))))
    return OverlapCurve(
        fixed_ball=second,
        varying_p=p,
        epsilon_grid=tuple(b.epsilon for b in first_family),
        frac_first_in_second=tuple(first_in_second),
        frac_second_in_first=tuple(second_in_first),
        n_samples=n_samples,
    )


@dataclass(frozen=True)
class RadiusSummary:
    """Distribution summary of ||v||_p / epsilon over n samples."""

    mean: float
    median: float
    q05: float
    q95: float
    min: float
    max: float
    n_samples: int


def concentration_check(
    ball: BallSpec,
    n_samples: int,
    rng: RngStream | np.random.Generator,
    mode: RadialMode = BALL,
) -> RadiusSummary:
    """Radial concentration: in ball mode the median radius is 0.5**(1/d),
    which approaches 1 in high dimension; sphere mode gives radius 1 exactly."""
    samples = sample_from_ball(ball, n_samples, rng, mode)
    if ball.p.is_zero:
        radii = np.count_nonzero(samples, axis=1) / (l0_count(ball.epsilon, ball.d) or 1)
    else:
        radii = _row_lp_norms(samples, ball.p) / ball.epsilon
    return RadiusSummary(
        mean=float(radii.mean()),
        median=float(np.median(radii)),
        q05=float(np.quantile(radii, 0.05)),
        q95=float(np.quantile(radii, 0.95)),
        min=float(radii.min()),
        max=float(radii.max()),
        n_samples=int(n_samples),
    )


@dataclass(frozen=True)
class VolumeEstimate:
    volume: float
    std_error: float
    hits: int
    n_samples: int


def mc_volume(
    ball: BallSpec,
    n_samples: int,
    rng: RngStream | np.random.Generator,
    chunk_size: int = 1 << 16,
) -> VolumeEstimate:
    """Rejection-sampling volume estimate: uniform draws in the enclosing cube
    [-eps, eps]^d, counting the fraction inside the ball.

    Intended for low dimension; the hit rate decays rapidly with d.
    """
    if ball.p.is_zero:
        raise ValueError("the L0 support has Lebesgue measure zero; no volume is defined")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    gen = rng.generator(_ball_salt(ball, BALL), 2) if isinstance(rng, RngStream) else rng
    hits = 0
    remaining = int(n_samples)
    while remaining > 0:
        m = min(chunk_size, remaining)
        pts = gen.uniform(-ball.epsilon, ball.epsilon, size=(m, ball.d))
        hits += int(np.count_nonzero(ball_contains(ball, pts)))
        remaining -= m
    cube = (2.0 * ball.epsilon) ** ball.d
    p_hat = hits / n_samples
    volume = cube * p_hat
    std_error = cube * math.sqrt(p_hat * (1.0 - p_hat) / n_samples)
    return VolumeEstimate(volume=volume, std_error=std_error, hits=hits, n_samples=int(n_samples))
