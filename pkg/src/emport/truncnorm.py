"""Exact truncated-Gaussian distribution.

The exploratory policies of this package are normal laws with location
``alpha`` and scale ``beta`` restricted to a compact allocation interval
[a, b].  This module carries the closed forms everything else relies on:
density, cdf, first two moments, differential entropy, inverse-cdf sampling
and the location-sensitivity of the log density.

All quantities are computed in log space so that locations sitting many
scales outside [a, b] (which happens early in training) stay exact instead
of collapsing to 0/0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import nmath


class DomainError(ValueError):
    """Invalid parameter or argument for a distribution operation."""


class DegenerateSupportError(DomainError):
    """Support is so deep in one tail that double precision gives up."""


# beyond this standardized distance the moment ratios are no longer
# representable in double precision
_DEGENERATE_LIMIT = 1e6


@dataclass(frozen=True)
class TruncNormParams:
    """Truncated Gaussian policy: parent N(alpha, beta^2) restricted to [a, b]."""

    alpha: float
    beta: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("alpha", "beta", "a", "b"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.beta <= 0.0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not self.a < self.b:
            raise DomainError(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def A(self) -> float:
        return (self.a - self.alpha) / self.beta

    @property
    def B(self) -> float:
        return (self.b - self.alpha) / self.beta

    def _check_representable(self):
        if min(abs(self.A), abs(self.B)) > _DEGENERATE_LIMIT:
            raise DegenerateSupportError(
                f"support is {min(abs(self.A), abs(self.B)):.3g} scales into "
                "one tail; moment ratios are not representable"
            )


def log_pdf(p: TruncNormParams, x: float) -> float:
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x!r}")
    if x < p.a or x > p.b:
        return -math.inf
    lnz = nmath.tn_lnz(p.A, p.B)
    z = (x - p.alpha) / p.beta
    return nmath.log_norm_pdf(z) - math.log(p.beta) - lnz


def pdf(p: TruncNormParams, x: float) -> float:
    """Density at x; zero outside [a, b], integrates to one over [a, b]."""
    lp = log_pdf(p, x)
    return 0.0 if lp == -math.inf else math.exp(lp)


def cdf(p: TruncNormParams, x: float) -> float:
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x!r}")
    if x <= p.a:
        return 0.0
    if x >= p.b:
        return 1.0
    lnz = nmath.tn_lnz(p.A, p.B)
    num = nmath.tn_lnz(p.A, (x - p.alpha) / p.beta)
    return math.exp(num - lnz)


def moments(p: TruncNormParams) -> tuple[float, float]:
    """(mean, variance). The mean lies in [a, b] and the variance below beta^2."""
    p._check_representable()
    mean, var, _, _ = nmath.tn_stats(p.alpha, p.beta, p.a, p.b)
    # clip away the last ulp of cancellation noise at the contract boundary
    mean = min(max(mean, p.a), p.b)
    return mean, max(var, 0.0)


def entropy(p: TruncNormParams) -> float:
    """Differential entropy in nats: ln(sqrt(2*pi*e)*beta*Z) + (A phi(A) - B phi(B))/(2Z)."""
    p._check_representable()
    _, _, ent, _ = nmath.tn_stats(p.alpha, p.beta, p.a, p.b)
    return ent


def sample(p: TruncNormParams, u: float) -> float:
    """Inverse-cdf draw from a uniform u in (0, 1); returned value is in [a, b]."""
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    return nmath.tn_ppf(u, p.alpha, p.beta, p.a, p.b)


def log_pdf_mean_grad(p: TruncNormParams, x: float) -> float:
    """d ln pdf(x) / d alpha = (x - alpha)/beta^2 + (phi(B) - phi(A))/(beta Z)."""
    if not (p.a <= x <= p.b):
        raise DomainError(f"x={x!r} outside support [{p.a}, {p.b}]")
    return nmath.tn_logpdf_dmu(x, p.alpha, p.beta, p.a, p.b)


# ---------------------------------------------------------------------------
# vectorized twins (numpy/scipy) used by the batch simulation paths
# ---------------------------------------------------------------------------

_GL_X01 = nmath.GL_X01
_GL_W01 = nmath.GL_W01


def lnz_vec(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Vectorized ln(Phi(B) - Phi(A)) for A < B elementwise."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    # mirror so intervals sit in the lower half line
    flip = A + B > 0.0
    A2 = np.where(flip, -B, A)
    B2 = np.where(flip, -A, B)
    w = B2 - A2
    out = np.empty_like(A2)

    narrow = w <= 1.0
    if np.any(narrow):
        out[narrow] = _lnz_narrow_vec(A2[narrow], B2[narrow], w[narrow])
    wide = ~narrow
    if np.any(wide):
        Aw, Bw = A2[wide], B2[wide]
        res = np.empty(Aw.shape)
        neg = Bw <= 0.0
        if np.any(neg):
            lb = log_ndtr(Bw[neg])
            la = log_ndtr(Aw[neg])
            res[neg] = lb + np.log1p(-np.exp(la - lb))
        std = ~neg
        if np.any(std):
            res[std] = np.log(ndtr(Bw[std]) - ndtr(Aw[std]))
        out[wide] = res
    return out


def _lnz_narrow_vec(A, B, w):
    anchor = np.where(A >= 0.0, A, np.where(B <= 0.0, -B, np.nan))
    out = np.empty_like(A)
    plain = ~np.isnan(anchor)
    if np.any(plain):
        out[plain] = (-0.5 * anchor[plain] ** 2 - nmath.LOG_SQRT_2PI
                      + _ln_seg_vec(anchor[plain], w[plain]))
    strad = ~plain
    if np.any(strad):
        la = -nmath.LOG_SQRT_2PI + _ln_seg_vec(np.zeros(np.sum(strad)), -A[strad])
        lb = -nmath.LOG_SQRT_2PI + _ln_seg_vec(np.zeros(np.sum(strad)), B[strad])
        out[strad] = np.logaddexp(la, lb)
    return out


def _ln_seg_vec(c, w):
    t = w[..., None] * _GL_X01
    s = np.sum(_GL_W01 * np.exp(-c[..., None] * t - 0.5 * t * t), axis=-1)
    return np.log(s * w)


def stats_vec(alpha, beta, a: float, b: float):
    """Vectorized (mean, var, entropy, lnZ) for arrays of locations/scales.

    Valid while min(|A|, |B|) stays below ~40 standard units, which holds for
    every simulation path in this package; the scalar ``nmath.tn_stats``
    carries the far-tail branch.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    lnz = lnz_vec(A, B)
    ra = np.exp(-0.5 * A * A - nmath.LOG_SQRT_2PI - lnz)
    rb = np.exp(-0.5 * B * B - nmath.LOG_SQRT_2PI - lnz)
    d = ra - rb
    mean = alpha + beta * d
    var = beta * beta * (1.0 + A * ra - B * rb - d * d)
    ent = nmath.LOG_SQRT_2PI + 0.5 + np.log(beta) + lnz + 0.5 * (A * ra - B * rb)
    return mean, var, ent, lnz


def entropy_dmu_vec(alpha, beta, a: float, b: float):
    """Vectorized derivative of the entropy in the location parameter."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    lnz = lnz_vec(A, B)
    ra = np.exp(-0.5 * A * A - nmath.LOG_SQRT_2PI - lnz)
    rb = np.exp(-0.5 * B * B - nmath.LOG_SQRT_2PI - lnz)
    d = ra - rb
    return (d + 0.5 * (rb * (1.0 - B * B) - ra * (1.0 - A * A))
            - 0.5 * (A * ra - B * rb) * d) / beta


def logpdf_dmu_vec(x, alpha, beta, a: float, b: float):
    """Vectorized d ln pdf / d alpha at sampled points x."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    lnz = lnz_vec(A, B)
    ra = np.exp(-0.5 * A * A - nmath.LOG_SQRT_2PI - lnz)
    rb = np.exp(-0.5 * B * B - nmath.LOG_SQRT_2PI - lnz)
    return (x - alpha) / (beta * beta) + (rb - ra) / beta


def ppf_vec(u, alpha, beta, a: float, b: float):
    """Vectorized inverse-cdf sampling (mirrors ``nmath.tn_ppf``)."""
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    flip = A + B > 0.0
    A2 = np.where(flip, -B, A)
    B2 = np.where(flip, -A, B)
    u2 = np.where(flip, 1.0 - u, u)
    p = ndtr(A2) + u2 * np.exp(lnz_vec(A2, B2))
    p = np.clip(p, 5e-324, 1.0 - 1e-16)
    from scipy.special import ndtri

    x = ndtri(p)
    x = np.where(flip, -x, x)
    return np.clip(alpha + beta * x, a, b)
