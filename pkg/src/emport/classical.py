"""Zero-temperature (no-exploration) machinery.

At temperature zero the reduced value exponent is affine in the factor,
u0(t, y) = L(t) y + M(t), with L and M solving a Riccati pair backward from
L(T) = M(T) = 0.  This module integrates that pair, fits the low-dimensional
parametric curves used by the learner, and carries the unconstrained optimal
fraction together with the risk-premium band that keeps it inside [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .market import MarketParams, mu_excess, sigma2
from .truncnorm import DomainError


class IntegrationError(RuntimeError):
    pass


class FitError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class PsiParams:
    """Six-parameter exponential-ratio curve family for (L, M)."""

    psi: tuple

    def __post_init__(self):
        if len(self.psi) != 6:
            raise DomainError("psi must have six components")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.psi, dtype=float)


def _lm_rhs(p: MarketParams, L: float):
    q = (1.0 - p.eta) / (2.0 * p.eta)
    bracket = p.k2 ** 2 + 2.0 * p.rho * p.k1 * p.k2 * L + (p.rho * p.k1 * L) ** 2
    dL = p.c * L - 0.5 * p.k1 ** 2 * L * L - q * bracket
    dM = -(p.r * (1.0 - p.eta) + 0.5 * p.k1 ** 2 * p.delta_star * L * L
           + p.c * p.y0 * L + q * p.delta_star * bracket)
    return dL, dM


def solve_lm_odes(p: MarketParams, n_t: int):
    """Backward fourth-order integration of the Riccati pair.

    Returns (t, L, M) on n_t+1 uniform nodes over [0, T], with
    L(T) = M(T) = 0 exact.
    """
    if n_t < 2:
        raise DomainError("need n_t >= 2")
    t = np.linspace(0.0, p.T, n_t + 1)
    h = p.T / n_t
    L = np.zeros(n_t + 1)
    M = np.zeros(n_t + 1)
    for i in range(n_t, 0, -1):
        Li, Mi = L[i], M[i]
        k1L, k1M = _lm_rhs(p, Li)
        k2L, k2M = _lm_rhs(p, Li - 0.5 * h * k1L)
        k3L, k3M = _lm_rhs(p, Li - 0.5 * h * k2L)
        k4L, k4M = _lm_rhs(p, Li - h * k3L)
        L[i - 1] = Li - h / 6.0 * (k1L + 2.0 * k2L + 2.0 * k3L + k4L)
        M[i - 1] = Mi - h / 6.0 * (k1M + 2.0 * k2M + 2.0 * k3M + k4M)
        if not (math.isfinite(L[i - 1]) and math.isfinite(M[i - 1])):
            raise IntegrationError(f"integration blew up at node {i - 1}")
    return t, L, M


def lm_residuals(p: MarketParams, t: np.ndarray, L: np.ndarray, M: np.ndarray):
    """Pointwise defect of the pair on its grid.

    Time derivatives come from five-point central stencils (one-sided at the
    ends), so the defect measures integrator plus stencil error together.
    """
    h = t[1] - t[0]
    dL = _fd5(L, h)
    dM = _fd5(M, h)
    rhs = np.array([_lm_rhs(p, Li) for Li in L])
    return dL - rhs[:, 0], dM - rhs[:, 1]


def _fd5(f: np.ndarray, h: float) -> np.ndarray:
    n = len(f)
    d = np.empty(n)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    for i in (0, 1):
        d[i] = (-25 * f[i] + 48 * f[i + 1] - 36 * f[i + 2]
                + 16 * f[i + 3] - 3 * f[i + 4]) / (12 * h)
    for i in (n - 2, n - 1):
        d[i] = (25 * f[i] - 48 * f[i - 1] + 36 * f[i - 2]
                - 16 * f[i - 3] + 3 * f[i - 4]) / (12 * h)
    return d


def parametric_lm(psi: PsiParams, t, T: float):
    """Parametric curves L(t) = Psi1 (E-1)/(-Psi2 + Psi3 E) and
    M(t) = Psi4 (T-t) + Psi5 ln((-Psi2 + Psi3 E)/(-Psi2 + Psi3)),
    with E = exp(Psi0 (T-t))."""
    p0, p1, p2, p3, p4, p5 = psi.psi
    tau = T - np.asarray(t, dtype=float)
    E = np.exp(p0 * tau)
    D = -p2 + p3 * E
    B = -p2 + p3
    if np.any(np.abs(D) < 1e-14) or abs(B) < 1e-14 or np.any(D / B <= 0.0):
        raise DomainError("parametric denominator degenerate on [0, T]")
    L = p1 * (E - 1.0) / D
    M = p4 * tau + p5 * np.log(D / B)
    return L, M


@dataclass(frozen=True)
class FitResult:
    psi: PsiParams
    sup_err_L: float
    sup_err_M: float


def fit_parametric(L_grid, M_grid, T: float, t_grid=None, x0=None,
                   fix_ratio=None) -> FitResult:
    """Damped least-squares fit of the parametric curves to (L, M) samples.

    The L shape is fit first (the family is scale-invariant in the last
    three shape parameters, so the result is gauge-normalized to Psi3 = 1);
    the two M parameters then solve an exact linear least-squares problem.

    ``fix_ratio`` pins Psi2/Psi3 instead of fitting it.  Near-exponential L
    curves leave that ratio unidentified near zero, where the M design
    degenerates; pinning it at a moderate value costs a few 1e-5 of L
    accuracy and keeps all six parameters O(1), which matters when the fit
    seeds a learner.
    """
    L_grid = np.asarray(L_grid, dtype=float)
    M_grid = np.asarray(M_grid, dtype=float)
    if t_grid is None:
        t_grid = np.linspace(0.0, T, len(L_grid))
    tau = T - np.asarray(t_grid, dtype=float)
    if x0 is None:
        x0 = np.array([2.0, 0.01, 0.01, 1.0])

    def shape(v):
        if fix_ratio is None:
            p0, p1, p2, p3 = v
        else:
            p0, p1 = v
            p2, p3 = fix_ratio, 1.0
        E = np.exp(p0 * tau)
        D = -p2 + p3 * E
        B = -p2 + p3
        if np.any(np.abs(D) < 1e-14) or abs(B) < 1e-14 or np.any(D / B <= 0.0):
            return None
        return p0, p1, p2, p3, E, D, B

    def resid_L(v):
        s = shape(v)
        if s is None:
            return np.full(len(tau), 1e6)
        _, p1, _, _, E, D, _ = s
        return p1 * (E - 1.0) / D - L_grid

    start = x0 if fix_ratio is None else x0[:2]
    sol = least_squares(resid_L, np.asarray(start, dtype=float), method="lm",
                        gtol=1e-12, xtol=1e-15, ftol=1e-15, max_nfev=5000)
    s = shape(sol.x)
    if s is None or sol.status <= 0:
        raise FitError(f"L-shape fit did not converge: {sol.message}",
                       best=tuple(sol.x))
    p0, p1, p2, p3, E, D, B = s
    # gauge normalization: divide the shape triplet by Psi3
    p1, p2, p3 = p1 / p3, p2 / p3, 1.0
    E = np.exp(p0 * tau)
    D = -p2 + E
    design = np.column_stack([tau, np.log(D / (1.0 - p2))])
    coef, *_ = np.linalg.lstsq(design, M_grid, rcond=None)
    psi = PsiParams((p0, p1, p2, p3, float(coef[0]), float(coef[1])))
    L, M = parametric_lm(psi, t_grid, T)
    return FitResult(psi, float(np.max(np.abs(L - L_grid))),
                     float(np.max(np.abs(M - M_grid))))


def merton_fraction(p: MarketParams, t: float, y: float, u_y: float) -> float:
    """Unconstrained optimal fraction sqrt(y+d*)/(eta sigma(y)) (k2 + rho k1 u_y)."""
    z = y + p.delta_star
    if z <= 0.0:
        raise DomainError(f"y + delta_star must be positive, got {z}")
    sig = math.sqrt(y * y + p.sigma_star ** 2)
    return math.sqrt(z) / (p.eta * sig) * (p.k2 + p.rho * p.k1 * u_y)


def admissibility_band(p: MarketParams, R: float):
    """Risk-premium interval [lo, hi] for k2 such that the unconstrained
    fraction stays in [0, 1] for every y >= 0 and |u_y| <= R.

    hi < lo means the band is empty; that is reported, not raised.
    """
    if R < 0.0:
        raise DomainError("R must be nonnegative")
    Delta = math.sqrt(p.delta_star ** 2 + p.sigma_star ** 2)
    lo = p.rho * p.k1 * R
    hi = p.eta * math.sqrt(2.0 * (Delta - p.delta_star)) - p.rho * p.k1 * R
    return lo, hi


def v0_pde_residual(p: MarketParams, y_lo: float = 0.0, y_hi: float = 1.0,
                    n_y: int = 100, n_t: int = 252) -> float:
    """Max defect of the affine zero-temperature surface in the reduced PDE,
    over nodes where the unconstrained fraction lies inside [a, b] (the
    region where the zero-temperature entropy limit vanishes).

    Time derivatives are taken from the pair's own right-hand sides, so this
    checks the algebraic identity between the pair and the PDE rather than a
    stencil."""
    t, L, M = solve_lm_odes(p, 4 * n_t)
    idx = np.linspace(0, len(t) - 1, n_t + 1).astype(int)
    t, L = t[idx], L[idx]
    y = np.linspace(y_lo, y_hi, n_y + 1)
    q = (1.0 - p.eta) / (2.0 * p.eta)
    worst = 0.0
    for ti, Li in zip(t, L):
        dL, dM = _lm_rhs(p, Li)
        s2 = sigma2(p, y)
        mu_ex = mu_excess(p, y)
        delta2 = p.k1 ** 2 * (y + p.delta_star)
        res = (dL * y + dM + p.r * (1.0 - p.eta)
               + 0.5 * delta2 * Li * Li + p.c * (p.y0 - y) * Li
               + q * (mu_ex ** 2 / s2
                      + 2.0 * p.rho * mu_ex * np.sqrt(delta2) / np.sqrt(s2) * Li
                      + p.rho ** 2 * delta2 * Li * Li))
        pim = np.array([merton_fraction(p, ti, yi, Li) for yi in y])
        interior = (pim >= p.a) & (pim <= p.b)
        if np.any(interior):
            worst = max(worst, float(np.max(np.abs(res[interior]))))
    return worst


def lm_curves_csv(path, t, L, M, L_psi, M_psi, header_comment: str = ""):
    with open(path, "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("t,L,M,L_psi,M_psi\n")
        for row in zip(t, L, M, L_psi, M_psi):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
