"""Actor-critic learner for the exploratory allocation problem.

The critic is a six-parameter exponential-family surrogate for the value
function,

    V(t, x, y) = x^(1-eta)/(1-eta) * exp( L(t) y + M(t)
                 + m/2 (1-eta)(T-t) ln m ) - 1/(1-eta),

with L and M the parametric curves of :mod:`emport.classical`.  The actor is
a truncated Gaussian whose location rides the same curve family,

    mu(t, y) = sqrt(y+d*) / (eta sigma(y)) * (theta4 + theta5 L(t)),
    scale^2  = m / (eta sigma(y)^2),

restricted to the allocation interval.  Training simulates batches of
exploratory paths, accumulates the temporal-difference critic direction and
the score-function actor direction (the critic is held fixed inside the
actor update), and applies a decaying step j^(-lr_exponent).

``mode="merton"`` drops every temperature/entropy term from both
accumulators while keeping the exploratory parametrization: the agent then
fits the plain expected-utility objective with a randomized policy.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import classical, rngstreams
from .backend import NUMBA_ENABLED
from .market import MarketParams
from .truncnorm import DomainError, TruncNormParams

log = logging.getLogger("emport")


@dataclass(frozen=True)
class CriticParams:
    psi: tuple

    def __post_init__(self):
        if len(self.psi) != 6:
            raise DomainError("psi must have six components")

    def as_array(self):
        return np.asarray(self.psi, dtype=float)


@dataclass(frozen=True)
class ActorParams:
    theta: tuple

    def __post_init__(self):
        if len(self.theta) != 6:
            raise DomainError("theta must have six components")

    def as_array(self):
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class TrainConfig:
    """Episode loop settings.

    ``grad_clip`` caps the norm of each per-episode update direction.  The
    raw accumulators carry enough martingale noise at the default batch size
    that the unclipped recursion blows up within a handful of episodes, so
    clipping defaults on; set it to None to run the raw update.
    """

    episodes: int = 5000
    batch_n: int = 32
    lr_exponent: float = 0.51
    seed: int = 1
    mode: str = "entropy"
    grad_clip: float | None = 2e-4

    def __post_init__(self):
        if self.episodes < 1 or self.batch_n < 1:
            raise DomainError("episodes and batch_n must be >= 1")
        if not 0.5 < self.lr_exponent <= 1.0:
            raise DomainError("lr_exponent must lie in (0.5, 1]")
        if self.mode not in ("entropy", "merton"):
            raise DomainError(f"unknown training mode {self.mode!r}")
        if self.grad_clip is not None and self.grad_clip <= 0.0:
            raise DomainError("grad_clip must be positive")


@dataclass
class TrainHistory:
    psi: np.ndarray
    theta: np.ndarray
    loss: np.ndarray
    wall: np.ndarray = field(repr=False, default=None)
    rejected: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def to_csv(self, path, header_comment: str = ""):
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            cols = (["episode"] + [f"psi{i}" for i in range(6)]
                    + [f"theta{i}" for i in range(6)] + ["loss_proxy"])
            fh.write(",".join(cols) + "\n")
            for j in range(len(self.loss)):
                row = ([str(j + 1)] + [f"{v:.12g}" for v in self.psi[j]]
                       + [f"{v:.12g}" for v in self.theta[j]]
                       + [f"{self.loss[j]:.12g}"])
                fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _curve_pieces(p6, T, t):
    p0, p1, p2, p3, p4, p5 = p6
    tau = T - t
    E = np.exp(p0 * tau)
    D = -p2 + p3 * E
    B = -p2 + p3
    if np.any(np.abs(D) < 1e-12) or abs(B) < 1e-12 or np.any(D / B <= 0.0):
        raise DomainError("curve denominator degenerate on [0, T]")
    L = p1 * (E - 1.0) / D
    M = p4 * tau + p5 * np.log(D / B)
    return tau, E, D, B, L, M


def critic_value(psi: CriticParams, p: MarketParams, t, x, y):
    """Surrogate value at (t, x, y); the ln-m row vanishes at m = 1."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("wealth must be positive")
    tau, _, _, _, L, M = _curve_pieces(psi.psi, p.T, np.asarray(t, dtype=float))
    ex = L * np.asarray(y) + M + 0.5 * p.m * (1.0 - p.eta) * tau * math.log(p.m)
    out = (np.power(x, 1.0 - p.eta) * np.exp(ex) - 1.0) / (1.0 - p.eta)
    return float(out) if out.ndim == 0 else out


def critic_grad(psi: CriticParams, p: MarketParams, t, x, y):
    """The six partial derivatives of the surrogate value in psi."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("wealth must be positive")
    p0, p1, p2, p3, p4, p5 = psi.psi
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tau, E, D, B, L, M = _curve_pieces(psi.psi, p.T, t)
    ex = L * y + M + 0.5 * p.m * (1.0 - p.eta) * tau * math.log(p.m)
    G = np.power(x, 1.0 - p.eta) * np.exp(ex) / (1.0 - p.eta)
    g = np.stack([
        G * tau * E * (y * p1 * (p3 - p2) / D ** 2 + p5 * p3 / D),
        G * y * (E - 1.0) / D,
        G * (E - 1.0) * (y * p1 / D ** 2 + p3 * p5 / (D * B)),
        G * (E - 1.0) * (-y * p1 * E / D ** 2 - p2 * p5 / (D * B)),
        G * tau,
        G * np.log(D / B),
    ], axis=-1)
    return g


def actor_location_scale(theta: ActorParams, p: MarketParams, t, y):
    """(mu, scale) of the policy before truncation."""
    y = np.asarray(y, dtype=float)
    if np.any(y + p.delta_star <= 0.0):
        raise DomainError("y + delta_star must be positive")
    _, _, _, _, Lth, _ = _curve_pieces(theta.theta, p.T, np.asarray(t, dtype=float))
    s2 = y * y + p.sigma_star ** 2
    C = np.sqrt(y + p.delta_star) / (p.eta * np.sqrt(s2))
    mu = C * (theta.theta[4] + theta.theta[5] * Lth)
    scale = np.sqrt(p.m / (p.eta * s2))
    return mu, scale


def actor_policy(theta: ActorParams, p: MarketParams, t: float, y: float) -> TruncNormParams:
    mu, scale = actor_location_scale(theta, p, t, y)
    return TruncNormParams(alpha=float(mu), beta=float(scale), a=p.a, b=p.b)


def _actor_mu_jac(theta: ActorParams, p: MarketParams, t, y):
    """d mu / d theta_k, shape (..., 6)."""
    th0, th1, th2, th3, th4, th5 = theta.theta
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tau, E, D, B, Lth, _ = _curve_pieces(theta.theta, p.T, t)
    s2 = y * y + p.sigma_star ** 2
    C = np.sqrt(y + p.delta_star) / (p.eta * np.sqrt(s2))
    return np.stack([
        C * th5 * tau * E * th1 * (th3 - th2) / D ** 2,
        C * th5 * (E - 1.0) / D,
        C * th5 * th1 * (E - 1.0) / D ** 2,
        -C * th5 * th1 * (E - 1.0) * E / D ** 2,
        C * np.ones_like(D),
        C * Lth,
    ], axis=-1)


def actor_log_pdf_grad(theta: ActorParams, p: MarketParams, t: float, y: float,
                       pi: float):
    """Score of the sampled allocation in theta: g_mu * d mu / d theta."""
    q = actor_policy(theta, p, t, y)
    if not (q.a <= pi <= q.b):
        raise DomainError(f"allocation {pi!r} outside [{q.a}, {q.b}]")
    from . import nmath

    gmu = nmath.tn_logpdf_dmu(pi, q.alpha, q.beta, q.a, q.b)
    return gmu * _actor_mu_jac(theta, p, t, y)


def entropy_and_grad(theta: ActorParams, p: MarketParams, t: float, y: float):
    """Policy entropy and its theta-gradient (the scale is theta-free)."""
    from . import nmath

    q = actor_policy(theta, p, t, y)
    _, _, ent, _ = nmath.tn_stats(q.alpha, q.beta, q.a, q.b)
    dmu = nmath.tn_entropy_dmu(q.alpha, q.beta, q.a, q.b)
    return ent, dmu * _actor_mu_jac(theta, p, t, y)


# ---------------------------------------------------------------------------
# per-episode time tables shared by both lanes
# ---------------------------------------------------------------------------

def _critic_tables(psi6, p: MarketParams, K: int):
    t = np.linspace(0.0, p.T, K + 1)
    p0, p1, p2, p3, p4, p5 = psi6
    tau, E, D, B, L, M = _curve_pieces(tuple(psi6), p.T, t)
    Mfull = M + 0.5 * p.m * (1.0 - p.eta) * tau * math.log(p.m)
    return {
        "L": L, "M": Mfull,
        "ga0": (tau * E * p1 * (p3 - p2) / D ** 2)[:-1],
        "gb0": (tau * E * p5 * p3 / D)[:-1],
        "ga1": ((E - 1.0) / D)[:-1],
        "ga2": (p1 * (E - 1.0) / D ** 2)[:-1],
        "gb2": ((E - 1.0) * p3 * p5 / (D * B))[:-1],
        "ga3": (-p1 * (E - 1.0) * E / D ** 2)[:-1],
        "gb3": (-(E - 1.0) * p2 * p5 / (D * B))[:-1],
        "gtau": tau[:-1],
        "glnDB": np.log(D / B)[:-1],
    }


def _actor_tables(theta6, p: MarketParams, K: int):
    t = np.linspace(0.0, p.T, K + 1)[:-1]
    th0, th1, th2, th3, th4, th5 = theta6
    tau, E, D, B, Lth, _ = _curve_pieces(tuple(theta6), p.T, t)
    return {
        "mu_fac": th4 + th5 * Lth,
        "c0": th5 * tau * E * th1 * (th3 - th2) / D ** 2,
        "c1": th5 * (E - 1.0) / D,
        "c2": th5 * th1 * (E - 1.0) / D ** 2,
        "c3": -th5 * th1 * (E - 1.0) * E / D ** 2,
        "Lth": Lth,
    }


def default_initialization(p: MarketParams):
    """Deterministic starting point: the critic curves are fit to the
    zero-temperature backbone (well-conditioned gauge), the actor borrows
    the same shape with a zero location scale (pure exploration)."""
    t, L, M = classical.solve_lm_odes(p, 4 * p.n_steps)
    fit = classical.fit_parametric(L, M, p.T, t_grid=t, fix_ratio=0.015)
    psi = fit.psi.psi
    theta = (psi[0], psi[1], psi[2], psi[3], 0.0, 0.0)
    return CriticParams(tuple(psi)), ActorParams(theta)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def train(config: TrainConfig, p: MarketParams,
          psi0: CriticParams | None = None,
          theta0: ActorParams | None = None,
          increments_fn=None):
    """Run the batched episode loop; returns (psi, theta, history).

    ``increments_fn(episode, N, K) -> (normals(N,K,3), uniforms(N,K))`` is a
    test hook replacing the seeded noise.
    """
    if psi0 is None or theta0 is None:
        d_psi, d_theta = default_initialization(p)
        psi0 = psi0 or d_psi
        theta0 = theta0 or d_theta
    psi = psi0.as_array().copy()
    theta = theta0.as_array().copy()
    K, N = p.n_steps, config.batch_n
    entropy_on = config.mode == "entropy"
    if p.m <= 0.0:
        raise DomainError("training needs a positive temperature")

    if NUMBA_ENABLED:
        from ._train_numba import episode_numba as episode_fn
    else:
        from ._train_numpy import episode_numpy as episode_fn

    hist_psi = np.empty((config.episodes, 6))
    hist_theta = np.empty((config.episodes, 6))
    hist_loss = np.empty(config.episodes)
    hist_wall = np.empty(config.episodes)
    rejected = []

    for j in range(1, config.episodes + 1):
        t0 = time.perf_counter()
        if increments_fn is None:
            zmat = rngstreams.batch_normals(config.seed, rngstreams.TAG_TRAIN,
                                            j, N, K, 3)
            upi = rngstreams.batch_uniforms(config.seed, rngstreams.TAG_TRAIN,
                                            j, N, K)
        else:
            zmat, upi = increments_fn(j, N, K)
        ct = _critic_tables(psi, p, K)
        at = _actor_tables(theta, p, K)
        h_psi, h_theta, loss = episode_fn(p, psi, theta, ct, at, zmat, upi,
                                          entropy_on)
        lr = float(j) ** (-config.lr_exponent)
        step_psi = h_psi / N
        step_theta = h_theta / N
        if config.grad_clip is not None:
            for s in (step_psi, step_theta):
                nrm = float(np.linalg.norm(s))
                if nrm > config.grad_clip:
                    s *= config.grad_clip / nrm
        finite = (np.all(np.isfinite(step_psi)) and np.all(np.isfinite(step_theta))
                  and math.isfinite(loss))
        if finite:
            psi = psi + lr * step_psi
            theta = theta + lr * step_theta
        else:
            rejected.append(j)
            log.warning("episode %d rejected: non-finite accumulator", j)
            loss = float("nan")
        hist_psi[j - 1] = psi
        hist_theta[j - 1] = theta
        hist_loss[j - 1] = loss
        hist_wall[j - 1] = time.perf_counter() - t0
    history = TrainHistory(psi=hist_psi, theta=hist_theta, loss=hist_loss,
                           wall=hist_wall, rejected=rejected)
    return CriticParams(tuple(psi)), ActorParams(tuple(theta)), history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, psi: CriticParams, theta: ActorParams,
                    episode: int, seed: int, mode: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"episode={episode}\n")
        fh.write(f"seed={seed}\n")
        fh.write(f"mode={mode}\n")
        for i, v in enumerate(psi.psi):
            fh.write(f"psi{i}={float(v)!r}\n")
        for i, v in enumerate(theta.theta):
            fh.write(f"theta{i}={float(v)!r}\n")


def load_checkpoint(path):
    kv = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
    psi = CriticParams(tuple(float(kv[f"psi{i}"]) for i in range(6)))
    theta = ActorParams(tuple(float(kv[f"theta{i}"]) for i in range(6)))
    return psi, theta, int(kv["episode"]), int(kv["seed"]), kv["mode"]
