"""Vectorized (pure numpy) episode for the actor-critic loop.

Reference semantics for the jitted kernel: identical update order per path,
with path-wise sums replaced by vector reductions at each step.
"""
from __future__ import annotations

import math

import numpy as np

from . import truncnorm
from .market import MarketParams, factor_step_gaussian_vec


def episode_numpy(p: MarketParams, psi, theta, ct, at, zmat, upi, entropy_on):
    N, K, _ = zmat.shape
    dt = p.dt
    sqdt = math.sqrt(dt)
    r1m = math.sqrt(1.0 - p.rho ** 2)
    one_eta = 1.0 - p.eta
    L, M = ct["L"], ct["M"]

    y = np.full(N, p.y0)
    x = np.ones(N)
    G = np.power(x, one_eta) * np.exp(L[0] * y + M[0]) / one_eta
    V = G - 1.0 / one_eta

    H_psi = np.zeros(6)
    H_theta = np.zeros(6)
    loss = 0.0
    for k in range(K):
        dW = zmat[:, k, 0] * sqdt
        dU = (p.rho * zmat[:, k, 0] + r1m * zmat[:, k, 1]) * sqdt
        dWhat = zmat[:, k, 2] * sqdt

        s2 = y * y + p.sigma_star ** 2
        sig = np.sqrt(s2)
        rz = np.sqrt(y + p.delta_star)
        mu_ex = p.k2 * rz * sig
        C = rz / (p.eta * sig)
        mu_th = C * at["mu_fac"][k]
        sth = np.sqrt(p.m / (p.eta * s2))
        m1, v, ent, _ = truncnorm.stats_vec(mu_th, sth, p.a, p.b)

        x_next = x * np.exp((p.r + mu_ex * m1 - 0.5 * s2 * (m1 * m1 + v)) * dt
                            + sig * (m1 * dW + np.sqrt(v) * dWhat))
        y_next = factor_step_gaussian_vec(p, y, dt, dU)

        G_next = np.power(x_next, one_eta) * np.exp(L[k + 1] * y_next + M[k + 1]) / one_eta
        V_next = G_next - 1.0 / one_eta
        dV = V_next - V
        if entropy_on:
            delta = dV + dt * p.m * (one_eta * V + 1.0) * ent
        else:
            delta = dV

        H_psi[0] += np.sum(G * (y * ct["ga0"][k] + ct["gb0"][k]) * delta)
        H_psi[1] += np.sum(G * y * ct["ga1"][k] * delta)
        H_psi[2] += np.sum(G * (y * ct["ga2"][k] + ct["gb2"][k]) * delta)
        H_psi[3] += np.sum(G * (y * ct["ga3"][k] + ct["gb3"][k]) * delta)
        H_psi[4] += np.sum(G * ct["gtau"][k] * delta)
        H_psi[5] += np.sum(G * ct["glnDB"][k] * delta)

        pi_s = truncnorm.ppf_vec(upi[:, k], mu_th, sth, p.a, p.b)
        gmu = truncnorm.logpdf_dmu_vec(pi_s, mu_th, sth, p.a, p.b)
        scal = gmu * dV
        if entropy_on:
            dent = truncnorm.entropy_dmu_vec(mu_th, sth, p.a, p.b)
            scal = scal + p.m * dt * (one_eta * V + 1.0) * dent
        H_theta[0] += np.sum(scal * C * at["c0"][k])
        H_theta[1] += np.sum(scal * C * at["c1"][k])
        H_theta[2] += np.sum(scal * C * at["c2"][k])
        H_theta[3] += np.sum(scal * C * at["c3"][k])
        H_theta[4] += np.sum(scal * C)
        H_theta[5] += np.sum(scal * C * at["Lth"][k])

        loss += float(np.sum(delta * delta))
        x, y, V, G = x_next, y_next, V_next, G_next
    return H_psi, H_theta, loss / (N * K)
