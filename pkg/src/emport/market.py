"""Stochastic-volatility market model and exploratory wealth simulation.

Model coefficients, with ``z = y + delta_star`` kept strictly positive:

    sigma(y)      = sqrt(y^2 + sigma_star^2)        asset volatility
    delta(y)      = k1 * sqrt(y + delta_star)       factor volatility
    mu(y) - r     = k2 * sqrt(y + delta_star) * sigma(y)   excess drift
    drift_y(y)    = c * (y0 - y)                    factor mean reversion

The shifted factor z follows a square-root mean-reverting diffusion
(dz = c(y0 + delta_star - z) dt + k1 sqrt(z) dU), so its transition law is a
scaled noncentral chi-square and can be sampled exactly.  Two factor steps
are provided behind one interface:

  * exact transition sampling (pass ``rng``): positive by construction and
    distributionally exact, but not driven by a Gaussian increment, so it
    cannot carry the asset/factor correlation;
  * a Gaussian-driven step (pass ``dU``): matches the Euler conditional mean
    and variance through a lognormal perturbation, stays positive for any
    draw, and consumes the correlated increment U = rho W + sqrt(1-rho^2) Wbar.
    This is the step used inside batch simulation.

Wealth and price updates are exponential (log-Euler / midpoint), so paths
stay positive for every draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rngstreams, truncnorm
from .truncnorm import DomainError, TruncNormParams


@dataclass(frozen=True)
class MarketParams:
    """Model constants, horizon and grid resolution."""

    k1: float = 0.015
    k2: float = 0.23
    delta_star: float = 0.3
    sigma_star: float = 0.3
    r: float = 0.02
    c: float = 2.0
    y0: float = 0.5
    rho: float = 0.5
    s0: float = 1.0
    m: float = 1.0
    eta: float = 0.5
    T: float = 1.0
    n_steps: int = 252
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.sigma_star <= 0.0:
            raise DomainError("sigma_star must be positive")
        if self.delta_star <= 0.0:
            raise DomainError("delta_star must be positive")
        if self.k1 < 0.0 or self.k2 < 0.0:
            raise DomainError("k1 and k2 must be nonnegative")
        if not 0.0 < self.rho < 1.0:
            raise DomainError("rho must lie in (0, 1)")
        if not 0.0 < self.eta < 1.0:
            raise DomainError("eta must lie in (0, 1)")
        if not self.a < self.b:
            raise DomainError("portfolio bounds need a < b")
        if self.T <= 0.0 or self.n_steps < 1:
            raise DomainError("need T > 0 and n_steps >= 1")
        if self.s0 <= 0.0 or self.c <= 0.0:
            raise DomainError("need s0 > 0 and c > 0")
        if self.m < 0.0:
            raise DomainError("temperature m must be nonnegative")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def feller_ok(self) -> bool:
        """Feller check for the shifted factor: 2 c (y0 + delta_star) >= k1^2."""
        return 2.0 * self.c * (self.y0 + self.delta_star) >= self.k1 ** 2

    def with_(self, **kw) -> "MarketParams":
        return replace(self, **kw)


def coeffs(p: MarketParams, t: float, y: float):
    """(sigma, delta, mu_excess, drift_y) at (t, y)."""
    z = y + p.delta_star
    if z <= 0.0:
        raise DomainError(f"y + delta_star must be positive, got {z}")
    sigma = math.sqrt(y * y + p.sigma_star ** 2)
    delta = p.k1 * math.sqrt(z)
    mu_excess = p.k2 * math.sqrt(z) * sigma
    drift_y = p.c * (p.y0 - y)
    return sigma, delta, mu_excess, drift_y


def sigma2(p: MarketParams, y):
    return np.asarray(y) ** 2 + p.sigma_star ** 2


def mu_excess(p: MarketParams, y):
    y = np.asarray(y)
    return p.k2 * np.sqrt(y + p.delta_star) * np.sqrt(sigma2(p, y))


def factor_step(p: MarketParams, y_k: float, dt: float, rng=None, dU=None) -> float:
    """One factor step; ``y_next + delta_star > 0`` for every draw.

    With ``rng``: exact transition sampling of the shifted square-root
    process (noncentral chi-square via one normal plus a chi-square, or a
    Poisson mixture of gammas when the degrees of freedom are small).

    With ``dU`` (Brownian increment over dt): Gaussian-driven lognormal step
    matching the Euler conditional mean and variance; reduces to the
    deterministic Euler update when k1 = 0.
    """
    z = y_k + p.delta_star
    if z <= 0.0:
        raise DomainError(f"y + delta_star must be positive, got {z}")
    if (rng is None) == (dU is None):
        raise DomainError("pass exactly one of rng (exact) or dU (Gaussian-driven)")
    theta = p.y0 + p.delta_star
    if dU is not None:
        return _factor_step_gaussian(z, theta, p.c, p.k1, dt, dU) - p.delta_star
    if p.k1 == 0.0:
        return theta + (z - theta) * math.exp(-p.c * dt) - p.delta_star
    ed = math.exp(-p.c * dt)
    cbar = p.k1 ** 2 * (1.0 - ed) / (4.0 * p.c)
    nu = 4.0 * p.c * theta / p.k1 ** 2
    lam = z * ed / cbar
    if nu > 1.0:
        w = (rng.standard_normal() + math.sqrt(lam)) ** 2
        if nu > 1.0 + 1e-12:
            w += rng.chisquare(nu - 1.0)
        z_next = cbar * w
    else:
        n = rng.poisson(0.5 * lam)
        z_next = cbar * rng.chisquare(nu + 2.0 * n) if nu + 2 * n > 0 else 0.0
    # floor at a few ulps of the shift so y + delta_star stays positive in
    # floating point even for deep-sub-Feller draws
    floor = 1e-14 * (p.delta_star + theta)
    return max(z_next, floor) - p.delta_star


def _factor_step_gaussian(z, theta, c, k1, dt, dU):
    m_e = z + c * (theta - z) * dt
    if k1 == 0.0:
        return m_e
    s2 = math.log1p(k1 * k1 * z * dt / (m_e * m_e))
    return m_e * math.exp(-0.5 * s2 + math.sqrt(s2) * dU / math.sqrt(dt))


def factor_step_gaussian_vec(p: MarketParams, y, dt: float, dU):
    """Vectorized Gaussian-driven factor step (arrays over paths)."""
    z = np.asarray(y) + p.delta_star
    theta = p.y0 + p.delta_star
    m_e = z + p.c * (theta - z) * dt
    if p.k1 == 0.0:
        return m_e - p.delta_star
    s2 = np.log1p(p.k1 ** 2 * z * dt / (m_e * m_e))
    z_next = m_e * np.exp(-0.5 * s2 + np.sqrt(s2) * np.asarray(dU) / math.sqrt(dt))
    return z_next - p.delta_star


def cir_conditional_mean(p: MarketParams, y: float, dt: float) -> float:
    """Exact conditional mean of the shifted factor transition, in y units."""
    theta = p.y0 + p.delta_star
    z = y + p.delta_star
    return theta + (z - theta) * math.exp(-p.c * dt) - p.delta_star


def cir_conditional_var(p: MarketParams, y: float, dt: float) -> float:
    """Exact conditional variance of the shifted factor transition."""
    theta = p.y0 + p.delta_star
    z = y + p.delta_star
    ed = math.exp(-p.c * dt)
    return (z * p.k1 ** 2 / p.c * (ed - ed * ed)
            + theta * p.k1 ** 2 / (2.0 * p.c) * (1.0 - ed) ** 2)


def asset_step(p: MarketParams, s_k: float, y_k: float, y_next: float,
               t_k: float, dt: float, dW: float) -> float:
    """Midpoint log update for the price over one step; positive output."""
    if s_k <= 0.0:
        raise DomainError("price must be positive")
    y_bar = 0.5 * (y_k + y_next)
    sig2 = y_bar * y_bar + p.sigma_star ** 2
    mu_bar = p.r + p.k2 * math.sqrt(y_bar + p.delta_star) * math.sqrt(sig2)
    return s_k * math.exp((mu_bar - 0.5 * sig2) * dt + math.sqrt(sig2) * dW)


def exploratory_wealth_step(p: MarketParams, x_k: float, y_k: float,
                            policy_mean: float, policy_var: float,
                            dt: float, dW: float, dWhat: float) -> float:
    """Exponential wealth update under the first two policy moments.

    The exploitation leg rides the asset shock dW, the exploration leg an
    independent shock dWhat scaled by the policy standard deviation.
    """
    if x_k <= 0.0:
        raise DomainError("wealth must be positive")
    if policy_var < 0.0:
        raise DomainError("policy variance must be nonnegative")
    sig = math.sqrt(y_k * y_k + p.sigma_star ** 2)
    mu_ex = p.k2 * math.sqrt(y_k + p.delta_star) * sig
    m1 = policy_mean
    drift = p.r + mu_ex * m1 - 0.5 * sig * sig * (m1 * m1 + policy_var)
    shock = sig * (m1 * dW + math.sqrt(policy_var) * dWhat)
    return x_k * math.exp(drift * dt + shock)


@dataclass
class PathBatch:
    """Simulated factor/price/wealth paths on the uniform time grid."""

    times: np.ndarray
    y: np.ndarray
    s: np.ndarray
    x: np.ndarray
    seed: int
    delta_star: float = field(default=0.3, repr=False)

    def check_invariants(self):
        if not np.all(self.y + self.delta_star > 0.0):
            raise DomainError("factor positivity violated")
        if not (np.all(self.s > 0.0) and np.all(self.x > 0.0)):
            raise DomainError("price/wealth positivity violated")

    def to_csv(self, path):
        """Write (path, step, t, y, s, x) rows; header row, '.' decimals."""
        n, k1 = self.y.shape
        with open(path, "w", newline="\n") as fh:
            fh.write("path,step,t,y,s,x\n")
            for i in range(n):
                for k in range(k1):
                    fh.write(f"{i},{k},{self.times[k]:.10g},{self.y[i, k]:.12g},"
                             f"{self.s[i, k]:.12g},{self.x[i, k]:.12g}\n")


def simulate_batch(p: MarketParams, policy, N: int, seed: int,
                   x0: float = 1.0, increments=None,
                   tag: int = rngstreams.TAG_GENERIC) -> PathBatch:
    """Simulate N exploratory paths under a feedback policy.

    ``policy(t, y) -> TruncNormParams`` supplies the allocation law at each
    step.  Drivers: the factor consumes U = rho W + sqrt(1-rho^2) Wbar; the
    price and the wealth exploitation leg consume W; the exploration leg an
    independent What.  ``increments`` is a test hook: an array of shape
    (N, n_steps, 3) of standard normals replacing the seeded draws.
    """
    if N < 1:
        raise DomainError("need N >= 1")
    K = p.n_steps
    dt = p.dt
    sq = math.sqrt(dt)
    if increments is None:
        zmat = rngstreams.batch_normals(seed, tag, 0, N, K, 3)
    else:
        zmat = np.asarray(increments, dtype=float)
        if zmat.shape != (N, K, 3):
            raise DomainError(f"increments must have shape {(N, K, 3)}")
    times = np.linspace(0.0, p.T, K + 1)
    y = np.empty((N, K + 1))
    s = np.empty((N, K + 1))
    x = np.empty((N, K + 1))
    y[:, 0] = p.y0
    s[:, 0] = p.s0
    x[:, 0] = x0
    root1m = math.sqrt(1.0 - p.rho * p.rho)
    for k in range(K):
        t_k = times[k]
        yk = y[:, k]
        dW = zmat[:, k, 0] * sq
        dU = (p.rho * zmat[:, k, 0] + root1m * zmat[:, k, 1]) * sq
        dWhat = zmat[:, k, 2] * sq
        means = np.empty(N)
        varis = np.empty(N)
        for i in range(N):
            q = policy(t_k, yk[i])
            if not isinstance(q, TruncNormParams):
                raise DomainError(
                    f"policy returned {type(q).__name__} at path {i}, step {k}")
            try:
                means[i], varis[i] = truncnorm.moments(q)
            except DomainError as exc:
                raise DomainError(f"invalid policy at path {i}, step {k}: {exc}") from exc
        y_next = factor_step_gaussian_vec(p, yk, dt, dU)
        sig2 = yk * yk + p.sigma_star ** 2
        sig = np.sqrt(sig2)
        mu_ex = p.k2 * np.sqrt(yk + p.delta_star) * sig
        y_bar = 0.5 * (yk + y_next)
        sig2_bar = y_bar * y_bar + p.sigma_star ** 2
        mu_bar = p.r + p.k2 * np.sqrt(y_bar + p.delta_star) * np.sqrt(sig2_bar)
        s[:, k + 1] = s[:, k] * np.exp((mu_bar - 0.5 * sig2_bar) * dt
                                       + np.sqrt(sig2_bar) * dW)
        drift = p.r + mu_ex * means - 0.5 * sig2 * (means ** 2 + varis)
        x[:, k + 1] = x[:, k] * np.exp(drift * dt
                                       + sig * (means * dW + np.sqrt(varis) * dWhat))
        y[:, k + 1] = y_next
    out = PathBatch(times=times, y=y, s=s, x=x, seed=seed, delta_star=p.delta_star)
    out.check_invariants()
    return out
