"""Out-of-sample Monte Carlo evaluation of a trained policy.

Deterministic mode deploys the conditional mean of the truncated-Gaussian
policy as an ordinary allocation (one Brownian leg, no exploration noise);
stochastic mode keeps the full exploratory dynamics, propagating the policy
mean and variance with the extra independent leg exactly as in training.
The benchmark is the critic's value at the initial state, and the gap is
the Monte Carlo mean utility minus that benchmark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rngstreams, truncnorm
from .actor_critic import ActorParams, CriticParams, _actor_tables, critic_value
from .market import MarketParams, factor_step_gaussian_vec
from .truncnorm import DomainError

_CHUNK = 8192


@dataclass(frozen=True)
class EvalReport:
    n_test: int
    mean_u: float
    std_u: float
    median_u: float
    benchmark: float
    gap: float
    mode: str
    seed: int

    def lines(self):
        return [
            f"mode        {self.mode}",
            f"n_test      {self.n_test}",
            f"E[U]        {self.mean_u:.5f}",
            f"Std(U)      {self.std_u:.5f}",
            f"Median(U)   {self.median_u:.5f}",
            f"benchmark   {self.benchmark:.5f}",
            f"gap         {self.gap:.5f}",
        ]

    def csv_row(self):
        return (f"{self.n_test},{self.mean_u:.10g},{self.std_u:.10g},"
                f"{self.median_u:.10g},{self.benchmark:.10g},{self.gap:.10g},"
                f"{self.mode},{self.seed}")


def _policy_path_moments(p, at, k, y):
    s2 = y * y + p.sigma_star ** 2
    C = np.sqrt(y + p.delta_star) / (p.eta * np.sqrt(s2))
    mu_th = C * at["mu_fac"][k]
    sth = np.sqrt(p.m / (p.eta * s2))
    m1, v, _, _ = truncnorm.stats_vec(mu_th, sth, p.a, p.b)
    return m1, v


def simulate_utilities(theta: ActorParams, p: MarketParams, n: int, seed: int,
                       mode: str, x0: float = 1.0, increments=None) -> np.ndarray:
    """Terminal CRRA utilities of n test paths, one substream per path."""
    if mode not in ("deterministic", "stochastic"):
        raise DomainError(f"unknown evaluation mode {mode!r}")
    if n < 1:
        raise DomainError("need n >= 1")
    K = p.n_steps
    dt = p.dt
    sqdt = math.sqrt(dt)
    r1m = math.sqrt(1.0 - p.rho ** 2)
    at = _actor_tables(theta.as_array(), p, K)
    out = np.empty(n)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        nn = hi - lo
        if increments is None:
            z = rngstreams.batch_normals(seed, rngstreams.TAG_EVAL, 0,
                                         nn, K, 3, path_offset=lo)
        else:
            z = np.asarray(increments, dtype=float)[lo:hi]
        y = np.full(nn, p.y0)
        x = np.full(nn, x0)
        for k in range(K):
            dW = z[:, k, 0] * sqdt
            dU = (p.rho * z[:, k, 0] + r1m * z[:, k, 1]) * sqdt
            m1, v = _policy_path_moments(p, at, k, y)
            s2 = y * y + p.sigma_star ** 2
            sig = np.sqrt(s2)
            mu_ex = p.k2 * np.sqrt(y + p.delta_star) * sig
            if mode == "deterministic":
                x = x * np.exp((p.r + mu_ex * m1 - 0.5 * s2 * m1 * m1) * dt
                               + sig * m1 * dW)
            else:
                dWhat = z[:, k, 2] * sqdt
                x = x * np.exp((p.r + mu_ex * m1 - 0.5 * s2 * (m1 * m1 + v)) * dt
                               + sig * (m1 * dW + np.sqrt(v) * dWhat))
            y = factor_step_gaussian_vec(p, y, dt, dU)
        out[lo:hi] = (np.power(x, 1.0 - p.eta) - 1.0) / (1.0 - p.eta)
    return out


def _exact_median(u: np.ndarray) -> float:
    """Order statistic at index (n-1)//2: exact selection, no interpolation."""
    k = (len(u) - 1) // 2
    return float(np.partition(u, k)[k])


def evaluate(theta: ActorParams, psi: CriticParams, p: MarketParams,
             n_test: int, seed: int, mode: str = "deterministic",
             increments=None) -> EvalReport:
    u = simulate_utilities(theta, p, n_test, seed, mode, increments=increments)
    bench = critic_value(psi, p, 0.0, 1.0, p.y0)
    mean = float(np.mean(u))
    return EvalReport(
        n_test=n_test, mean_u=mean,
        std_u=float(np.std(u, ddof=1)) if n_test > 1 else 0.0,
        median_u=_exact_median(u), benchmark=float(bench),
        gap=mean - float(bench), mode=mode, seed=seed)


def mc_convergence_curve(theta: ActorParams, psi: CriticParams, p: MarketParams,
                         n_max: int, checkpoints, seed: int,
                         mode: str = "deterministic"):
    """Running-mean estimates at the given path counts; the entry at n equals
    ``evaluate`` at the same seed and n."""
    checkpoints = [int(c) for c in checkpoints]
    if any(c < 1 for c in checkpoints) or sorted(checkpoints) != checkpoints:
        raise DomainError("checkpoints must be increasing positive counts")
    if checkpoints and checkpoints[-1] > n_max:
        raise DomainError("checkpoints must not exceed n_max")
    u = simulate_utilities(theta, p, n_max, seed, mode)
    bench = float(critic_value(psi, p, 0.0, 1.0, p.y0))
    csum = np.cumsum(u)
    return [(c, float(csum[c - 1] / c), bench) for c in checkpoints]


def curve_csv(path, series, header_comment: str = ""):
    with open(path, "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("n,estimate,benchmark\n")
        for n, est, bench in series:
            fh.write(f"{n},{est:.10g},{bench:.10g}\n")


def report_csv(path, reports, header_comment: str = ""):
    with open(path, "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("n_test,mean_u,std_u,median_u,benchmark,gap,mode,seed\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")
