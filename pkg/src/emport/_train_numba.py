"""Jitted episode kernel for the actor-critic loop.

Scalar twin of :mod:`emport._train_numpy`; paths are accumulated in path
index order, so results are bit-deterministic for a fixed backend.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .nmath import tn_entropy_dmu, tn_logpdf_dmu, tn_ppf, tn_stats


@njit(cache=True)
def _kernel(r, k2, dstar, sstar, cc, y0v, rho, m, eta, a, b, dt, k1f,
            L, M, ga0, gb0, ga1, ga2, gb2, ga3, gb3, gtau, glnDB,
            mu_fac, c0, c1, c2, c3, Lth,
            zW, zWbar, zWhat, upi, entropy_on):
    N, K = zW.shape
    sqdt = np.sqrt(dt)
    r1m = np.sqrt(1.0 - rho * rho)
    one_eta = 1.0 - eta
    H_psi = np.zeros(6)
    H_theta = np.zeros(6)
    loss = 0.0
    theta_z = y0v + dstar
    for i in range(N):
        y = y0v
        x = 1.0
        G = x ** one_eta * np.exp(L[0] * y + M[0]) / one_eta
        V = G - 1.0 / one_eta
        for k in range(K):
            dW = zW[i, k] * sqdt
            dU = (rho * zW[i, k] + r1m * zWbar[i, k]) * sqdt
            dWhat = zWhat[i, k] * sqdt

            s2 = y * y + sstar * sstar
            sig = np.sqrt(s2)
            rz = np.sqrt(y + dstar)
            mu_ex = k2 * rz * sig
            C = rz / (eta * sig)
            mu_th = C * mu_fac[k]
            sth = np.sqrt(m / (eta * s2))
            m1, v, ent, _ = tn_stats(mu_th, sth, a, b)

            x_next = x * np.exp((r + mu_ex * m1 - 0.5 * s2 * (m1 * m1 + v)) * dt
                                + sig * (m1 * dW + np.sqrt(v) * dWhat))
            z = y + dstar
            m_e = z + cc * (theta_z - z) * dt
            if k1f == 0.0:
                y_next = m_e - dstar
            else:
                s2f = np.log1p(k1f * k1f * z * dt / (m_e * m_e))
                y_next = m_e * np.exp(-0.5 * s2f + np.sqrt(s2f) * dU / sqdt) - dstar

            G_next = x_next ** one_eta * np.exp(L[k + 1] * y_next + M[k + 1]) / one_eta
            V_next = G_next - 1.0 / one_eta
            dV = V_next - V
            if entropy_on:
                delta = dV + dt * m * (one_eta * V + 1.0) * ent
            else:
                delta = dV

            H_psi[0] += G * (y * ga0[k] + gb0[k]) * delta
            H_psi[1] += G * y * ga1[k] * delta
            H_psi[2] += G * (y * ga2[k] + gb2[k]) * delta
            H_psi[3] += G * (y * ga3[k] + gb3[k]) * delta
            H_psi[4] += G * gtau[k] * delta
            H_psi[5] += G * glnDB[k] * delta

            pi_s = tn_ppf(upi[i, k], mu_th, sth, a, b)
            gmu = tn_logpdf_dmu(pi_s, mu_th, sth, a, b)
            scal = gmu * dV
            if entropy_on:
                scal += m * dt * (one_eta * V + 1.0) * tn_entropy_dmu(mu_th, sth, a, b)
            H_theta[0] += scal * C * c0[k]
            H_theta[1] += scal * C * c1[k]
            H_theta[2] += scal * C * c2[k]
            H_theta[3] += scal * C * c3[k]
            H_theta[4] += scal * C
            H_theta[5] += scal * C * Lth[k]

            loss += delta * delta
            x, y, V, G = x_next, y_next, V_next, G_next
    return H_psi, H_theta, loss / (N * K)


def episode_numba(p, psi, theta, ct, at, zmat, upi, entropy_on):
    return _kernel(p.r, p.k2, p.delta_star, p.sigma_star, p.c, p.y0, p.rho,
                   p.m, p.eta, p.a, p.b, p.dt, p.k1,
                   ct["L"], ct["M"], ct["ga0"], ct["gb0"], ct["ga1"],
                   ct["ga2"], ct["gb2"], ct["ga3"], ct["gb3"], ct["gtau"],
                   ct["glnDB"],
                   at["mu_fac"], at["c0"], at["c1"], at["c2"], at["c3"],
                   at["Lth"],
                   np.ascontiguousarray(zmat[:, :, 0]),
                   np.ascontiguousarray(zmat[:, :, 1]),
                   np.ascontiguousarray(zmat[:, :, 2]),
                   np.ascontiguousarray(upi), bool(entropy_on))
