"""Reduced value PDE for the exploratory problem, and its policy iteration.

With the homothetic substitution V = (x^(1-eta) e^u - 1)/(1-eta), the value
exponent u(t, y) solves a one-dimensional quasilinear parabolic equation

    u_t + r(1-eta) + 1/2 delta^2 (u_yy + u_y^2) + varpi u_y
        + (1-eta)/(2 eta) [ mu_ex^2/sigma^2 + 2 rho mu_ex (delta/sigma) u_y
                            + rho^2 delta^2 u_y^2 ]
        + (1-eta) (m/2) [ ln(2 pi m / (eta sigma^2)) + 2 ln Z(y, u_y; m) ] = 0

backward from u(T, .) = 0, where Z is the normalizer of the optimal
truncated-Gaussian policy.  At temperature zero the bracketed entropy row is
replaced by the one-sided quadratic penalty of the vanishing-temperature
limit.

Solved with backward Euler in time: the diffusion and first-order rows are
implicit (tridiagonal), the gradient-squared and entropy rows relax through
an inner fixed-point iteration, so the converged step satisfies the
one-sided-in-time / central-in-space defect identically.  Boundaries carry
zero-slope closures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import conditions, truncnorm
from .market import MarketParams
from .truncnorm import DomainError, TruncNormParams


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    y_lo: float = 0.0
    y_hi: float = 1.0
    n_y: int = 100
    T: float = 1.0
    n_t: int = 252

    def __post_init__(self):
        if not self.y_lo < self.y_hi:
            raise DomainError("need y_lo < y_hi")
        if self.n_y < 3 or self.n_t < 2:
            raise DomainError("need n_y >= 3 and n_t >= 2")
        if self.T <= 0.0:
            raise DomainError("need T > 0")

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_lo, self.y_hi, self.n_y + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.n_y

    @property
    def dt(self) -> float:
        return self.T / self.n_t


@dataclass
class ValueSurface:
    u: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        if self.u.shape != (self.grid.n_t + 1, self.grid.n_y + 1):
            raise DomainError("surface shape does not match the grid")
        if not np.all(np.isfinite(self.u)):
            raise DomainError("surface has non-finite entries")

    def value(self, x: float, eta: float) -> np.ndarray:
        """Recover V(t, x, y) on the grid from the exponent surface."""
        return (np.power(x, 1.0 - eta) * np.exp(self.u) - 1.0) / (1.0 - eta)

    def u_y(self) -> np.ndarray:
        """Central first derivative with the solver's zero-slope closure."""
        dy = self.grid.dy
        d = np.empty_like(self.u)
        d[:, 1:-1] = (self.u[:, 2:] - self.u[:, :-2]) / (2.0 * dy)
        d[:, 0] = 0.0
        d[:, -1] = 0.0
        return d

    def to_csv(self, path, header_comment: str = ""):
        t, y = self.grid.t, self.grid.y
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("t,y,u\n")
            for i, ti in enumerate(t):
                for j, yj in enumerate(y):
                    fh.write(f"{ti:.10g},{yj:.10g},{self.u[i, j]:.12g}\n")


class _Coeffs:
    """Frozen y-dependent model coefficients on a grid column."""

    def __init__(self, p: MarketParams, y: np.ndarray):
        self.y = y
        self.s2 = y * y + p.sigma_star ** 2
        self.sig = np.sqrt(self.s2)
        z = y + p.delta_star
        if np.any(z <= 0.0):
            raise DomainError("grid extends below -delta_star")
        self.delta2 = p.k1 ** 2 * z
        self.delta = p.k1 * np.sqrt(z)
        self.mu_ex = p.k2 * np.sqrt(z) * self.sig
        self.varpi = p.c * (p.y0 - y)
        self.q = (1.0 - p.eta) / (2.0 * p.eta)
        # premium coefficient on u_y: 2 q rho mu_ex delta / sigma
        self.prem_lin = 2.0 * self.q * p.rho * self.mu_ex * self.delta / self.sig
        self.prem_const = self.q * self.mu_ex ** 2 / self.s2
        self.prem_quad = self.q * p.rho ** 2 * self.delta2


def z_ab(p: MarketParams, y: float, u_y: float):
    """Truncation normalizer of the optimal policy at one state.

    Returns (Z, D, F) where D and F standardize the lower and upper
    allocation bounds around the unconstrained fraction.  The difference
    Phi(D) - Phi(F) taken in that order is negative for a < b; the positive
    orientation |Phi(F) - Phi(D)| is returned here.
    """
    if p.m <= 0.0:
        raise DomainError("temperature must be positive")
    s2 = y * y + p.sigma_star ** 2
    pim = (p.k2 * math.sqrt(y + p.delta_star) * math.sqrt(s2)
           + p.rho * p.k1 * math.sqrt(y + p.delta_star) * math.sqrt(s2) * u_y) / (p.eta * s2)
    scale = math.sqrt(p.eta * s2 / p.m)
    D = (p.a - pim) * scale
    F = (p.b - pim) * scale
    from . import nmath

    return math.exp(nmath.tn_lnz(D, F)), D, F


def _entropy_row(p: MarketParams, co: _Coeffs, u_y: np.ndarray, m: float,
                 zero_temp: bool) -> np.ndarray:
    pim = (co.mu_ex + p.rho * co.delta * co.sig * u_y) / (p.eta * co.s2)
    if zero_temp:
        out = np.zeros_like(u_y)
        lowm = pim < p.a
        high = pim > p.b
        out[lowm] = -0.5 * (p.a - pim[lowm]) ** 2 * p.eta * co.s2[lowm]
        out[high] = -0.5 * (p.b - pim[high]) ** 2 * p.eta * co.s2[high]
        return (1.0 - p.eta) * out
    scale = np.sqrt(p.eta * co.s2 / m)
    lnz = truncnorm.lnz_vec((p.a - pim) * scale, (p.b - pim) * scale)
    return (1.0 - p.eta) * 0.5 * m * (np.log(2.0 * math.pi * m / (p.eta * co.s2))
                                      + 2.0 * lnz)


def _rhs_full(p: MarketParams, co: _Coeffs, grid: Grid1D, row: np.ndarray,
              m: float, zero_temp: bool) -> np.ndarray:
    """All non-time terms of the PDE at one time level (ghost closures)."""
    dy = grid.dy
    u_y = np.empty_like(row)
    u_y[1:-1] = (row[2:] - row[:-2]) / (2.0 * dy)
    u_y[0] = 0.0
    u_y[-1] = 0.0
    u_yy = np.empty_like(row)
    u_yy[1:-1] = (row[2:] - 2.0 * row[1:-1] + row[:-2]) / (dy * dy)
    u_yy[0] = 2.0 * (row[1] - row[0]) / (dy * dy)
    u_yy[-1] = 2.0 * (row[-2] - row[-1]) / (dy * dy)
    return (p.r * (1.0 - p.eta) + 0.5 * co.delta2 * (u_yy + u_y ** 2)
            + co.varpi * u_y + co.prem_const + co.prem_lin * u_y
            + co.prem_quad * u_y ** 2
            + _entropy_row(p, co, u_y, m, zero_temp))


def _build_implicit(co: _Coeffs, grid: Grid1D, lin_uy: np.ndarray,
                    dt: float | None = None):
    """Pentadiagonal matrix for I/dt - [1/2 delta^2 d_yy + lin_uy d_y]
    plus a fourth-difference stabilizer.

    The transport term dominates the tiny factor diffusion (cell Peclet far
    above one), so a plain central scheme leaves a two-cell sawtooth in the
    kernel of the discrete operator.  An implicit fourth difference with
    coefficient O(|a| dy^3) damps that mode strongly per step while adding
    only O(dy^3 u'''') to the defect, two orders below the stencil error.
    Zero-slope boundaries use even reflection ghosts.
    """
    if dt is None:
        dt = grid.dt
    n = grid.n_y + 1
    dy = grid.dy
    diff = 0.5 * co.delta2 / (dy * dy)
    adv = lin_uy / (2.0 * dy)
    amax = float(np.max(np.abs(lin_uy)))
    hyper = amax / (16.0 * dy)

    main = np.full(n, 1.0 / dt) + 2.0 * diff + 6.0 * hyper
    sup1 = -(diff[:-1] + adv[:-1]) - 4.0 * hyper
    sub1 = -(diff[1:] - adv[1:]) - 4.0 * hyper
    sup2 = np.full(n - 2, hyper)
    sub2 = np.full(n - 2, hyper)
    # zero-slope closures: ghosts fold back, advection drops at the wall
    main[0] = 1.0 / dt + 2.0 * diff[0] + 6.0 * hyper
    sup1[0] = -2.0 * diff[0] - 8.0 * hyper
    sup2[0] = 2.0 * hyper
    main[1] += hyper          # rows 1 and n-1 see their reflected ghost
    main[-1] = 1.0 / dt + 2.0 * diff[-1] + 6.0 * hyper
    sub1[-1] = -2.0 * diff[-1] - 8.0 * hyper
    sub2[-1] = 2.0 * hyper
    main[-2] += hyper
    ab = np.zeros((5, n))
    ab[0, 2:] = sup2
    ab[1, 1:] = sup1
    ab[2, :] = main
    ab[3, :-1] = sub1
    ab[4, :-2] = sub2
    return ab


def _explicit_part(p: MarketParams, co: _Coeffs, grid: Grid1D, row: np.ndarray,
                   m: float, zero_temp: bool, lin_uy: np.ndarray) -> np.ndarray:
    """F_full minus the implicit rows, at the current inner iterate."""
    dy = grid.dy
    u_y = np.empty_like(row)
    u_y[1:-1] = (row[2:] - row[:-2]) / (2.0 * dy)
    u_y[0] = 0.0
    u_y[-1] = 0.0
    return (p.r * (1.0 - p.eta) + 0.5 * co.delta2 * u_y ** 2
            + co.prem_const + (co.varpi + co.prem_lin - lin_uy) * u_y
            + co.prem_quad * u_y ** 2
            + _entropy_row(p, co, u_y, m, zero_temp))


def _step_back(p, co, grid, u_next, m, zero_temp, lin_uy, ab, tol=1e-10,
               max_inner=50, depth=0):
    dt = grid.dt / (2 ** depth)
    guess = u_next.copy()
    if depth > 0:
        ab = _build_implicit(co, grid, lin_uy, dt=dt)
    for _ in range(max_inner):
        rhs = u_next / dt + _explicit_part(p, co, grid, guess, m, zero_temp, lin_uy)
        new = solve_banded((2, 2), ab, rhs)
        change = float(np.max(np.abs(new - guess)))
        guess = new
        if change <= tol:
            return guess
    if depth < 3:
        half = _step_back(p, co, grid, u_next, m, zero_temp, lin_uy, ab,
                          tol, max_inner, depth + 1)
        return _step_back(p, co, grid, half, m, zero_temp, lin_uy, ab,
                          tol, max_inner, depth + 1)
    raise SolverError("inner fixed point failed to converge")


def _solve_reduced(p: MarketParams, grid: Grid1D, m: float,
                   zero_temp: bool = False, inner_tol: float = 1e-10) -> ValueSurface:
    co = _Coeffs(p, grid.y)
    lin_uy = co.varpi + co.prem_lin
    ab = _build_implicit(co, grid, lin_uy)
    u = np.zeros((grid.n_t + 1, grid.n_y + 1))
    for k in range(grid.n_t - 1, -1, -1):
        u[k] = _step_back(p, co, grid, u[k + 1], m, zero_temp, lin_uy, ab,
                          tol=inner_tol)
    return ValueSurface(u=u, grid=grid)


def solve_hjb(p: MarketParams, grid: Grid1D) -> ValueSurface:
    """Backward solve of the reduced PDE at the model temperature.

    Raises if the existence conditions fail on the grid's factor range.
    """
    if p.m <= 0.0:
        raise DomainError("solve_hjb needs a positive temperature")
    rep = conditions.build_report(p, y_lo=grid.y_lo, y_hi=grid.y_hi)
    if not (rep.cond_i_pass and rep.cond_ii_pass):
        raise DomainError("existence conditions fail for these parameters")
    return _solve_reduced(p, grid, p.m)


def hjb_residual(p: MarketParams, surf: ValueSurface, m: float | None = None,
                 zero_temp: bool = False, collar: int = 0) -> np.ndarray:
    """Pointwise defect (u[k+1]-u[k])/dt + F(y, u[k]) on interior nodes,
    with one-sided first differences in time and central differences in
    space.

    The zero-slope wall closure is incompatible with the free-space slope of
    the transport-dominated solution, so an O(1e-3) defect footprint is
    intrinsic to the two or three cells nearest each wall regardless of the
    solve quality; ``collar`` drops that many additional nodes per side from
    the returned array when assessing the interior solve.
    """
    if m is None:
        m = p.m
    grid = surf.grid
    co = _Coeffs(p, grid.y)
    out = np.empty((grid.n_t, grid.n_y - 1))
    for k in range(grid.n_t):
        f = _rhs_full(p, co, grid, surf.u[k], m, zero_temp)
        out[k] = ((surf.u[k + 1, 1:-1] - surf.u[k, 1:-1]) / grid.dt + f[1:-1])
    if collar > 0:
        out = out[:, collar:-collar]
    return out


def optimal_policy_from_u(p: MarketParams, t: float, y: float,
                          u_y: float) -> TruncNormParams:
    """Truncated-Gaussian policy induced by the value gradient at one state."""
    if p.m <= 0.0:
        raise DomainError("positive temperature required")
    s2 = y * y + p.sigma_star ** 2
    root_z = math.sqrt(y + p.delta_star)
    sig = math.sqrt(s2)
    alpha = (p.k2 * root_z * sig + p.rho * p.k1 * root_z * sig * u_y) / (p.eta * s2)
    beta = math.sqrt(p.m / (p.eta * s2))
    return TruncNormParams(alpha=alpha, beta=beta, a=p.a, b=p.b)


def limit_m_lnz(p: MarketParams, y: float, u_y: float) -> float:
    """Vanishing-temperature limit of m ln Z at one state.

    Zero when the unconstrained fraction lies in [a, b]; otherwise the
    one-sided quadratic penalty -(bound - fraction)^2 eta sigma^2 / 2.
    Bound hits are assigned to the interior branch (the three branches are
    continuous there)."""
    z = y + p.delta_star
    if z <= 0.0:
        raise DomainError("y + delta_star must be positive")
    s2 = y * y + p.sigma_star ** 2
    pim = math.sqrt(z) / (p.eta * math.sqrt(s2)) * (p.k2 + p.rho * p.k1 * u_y)
    if p.a <= pim <= p.b:
        return 0.0
    if pim < p.a:
        return -0.5 * (p.a - pim) ** 2 * p.eta * s2
    return -0.5 * (p.b - pim) ** 2 * p.eta * s2


# ---------------------------------------------------------------------------
# policy evaluation / improvement
# ---------------------------------------------------------------------------

def policy_evaluation_pde(p: MarketParams, grid: Grid1D, alpha_prev: np.ndarray,
                          beta2_prev: np.ndarray | None = None,
                          inner_tol: float = 1e-10) -> ValueSurface:
    """Value exponent of a frozen truncated-Gaussian feedback policy.

    ``alpha_prev``: location surface, shape (n_t+1, n_y+1).  ``beta2_prev``:
    squared-scale column over y (defaults to m/(eta sigma^2)).  Solves

        u_t + 1/2 delta^2 (u_yy + u_y^2) + [varpi + (1-eta) rho delta sigma m1] u_y
            + (1-eta)(r + mu_ex m1) - eta(1-eta)/2 sigma^2 (m1^2 + v)
            + m (1-eta) E = 0,  u(T, .) = 0,

    with m1, v, E the policy mean, variance and entropy at each node.
    """
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    if alpha_prev.shape != (grid.n_t + 1, grid.n_y + 1):
        raise DomainError("alpha_prev shape does not match the grid")
    if not np.all(np.isfinite(alpha_prev)):
        raise DomainError("alpha_prev must be finite")
    co = _Coeffs(p, grid.y)
    if beta2_prev is None:
        beta2_prev = p.m / (p.eta * co.s2)
    beta = np.sqrt(np.broadcast_to(np.asarray(beta2_prev, dtype=float),
                                   co.s2.shape))
    u = np.zeros((grid.n_t + 1, grid.n_y + 1))
    dy, dt = grid.dy, grid.dt
    for k in range(grid.n_t - 1, -1, -1):
        m1, v, ent, _ = truncnorm.stats_vec(alpha_prev[k], beta, p.a, p.b)
        lin_uy = co.varpi + (1.0 - p.eta) * p.rho * co.delta * co.sig * m1
        const = ((1.0 - p.eta) * (p.r + co.mu_ex * m1)
                 - 0.5 * p.eta * (1.0 - p.eta) * co.s2 * (m1 * m1 + v)
                 + p.m * (1.0 - p.eta) * ent)
        ab = _build_implicit(co, grid, lin_uy)
        guess = u[k + 1].copy()
        for it in range(50):
            u_y = np.empty_like(guess)
            u_y[1:-1] = (guess[2:] - guess[:-2]) / (2.0 * dy)
            u_y[0] = 0.0
            u_y[-1] = 0.0
            rhs = u[k + 1] / dt + const + 0.5 * co.delta2 * u_y ** 2
            new = solve_banded((2, 2), ab, rhs)
            change = float(np.max(np.abs(new - guess)))
            guess = new
            if change <= inner_tol:
                break
        else:
            raise SolverError(f"policy evaluation stalled at step {k}")
        u[k] = guess
    return ValueSurface(u=u, grid=grid)


@dataclass
class PolicyIterationResult:
    surfaces: list
    alphas: list
    sup_diffs: list
    converged: bool


def policy_iteration(p: MarketParams, grid: Grid1D, kappa: float, chi: float,
                     tol: float = 1e-6, max_iter: int = 30) -> PolicyIterationResult:
    """Alternate policy evaluation and the truncated-Gaussian update.

    Starts from the location kappa/sigma^2(y) with squared scale
    chi^2/sigma^2(y); every later iterate carries the temperature-scaled
    variance m/(eta sigma^2).  Stops when successive exponent surfaces agree
    to ``tol`` in sup norm.
    """
    if chi <= 0.0:
        raise DomainError("chi must be positive")
    co = _Coeffs(p, grid.y)
    shape = (grid.n_t + 1, grid.n_y + 1)
    alpha = np.broadcast_to(kappa / co.s2, shape).copy()
    beta2 = chi * chi / co.s2
    surfaces, alphas, sup_diffs = [], [alpha], []
    prev = None
    converged = False
    for it in range(max_iter):
        surf = policy_evaluation_pde(p, grid, alpha, beta2)
        surfaces.append(surf)
        alpha = _alpha_from_surface(p, co, surf)
        alphas.append(alpha)
        beta2 = None  # temperature-scaled from the first improvement on
        if prev is not None:
            d = float(np.max(np.abs(surf.u - prev.u)))
            sup_diffs.append(d)
            if d <= tol:
                converged = True
                break
        prev = surf
    return PolicyIterationResult(surfaces, alphas, sup_diffs, converged)


def _alpha_from_surface(p: MarketParams, co: _Coeffs, surf: ValueSurface):
    u_y = surf.u_y()
    return (co.mu_ex + p.rho * co.delta * co.sig * u_y) / (p.eta * co.s2)


# ---------------------------------------------------------------------------
# low-temperature expansion
# ---------------------------------------------------------------------------

def solve_first_corrector(p: MarketParams, grid: Grid1D,
                          u0: ValueSurface) -> ValueSurface:
    """First-order temperature corrector: the linear PDE

        w_t + 1/2 delta^2 w_yy + [varpi + delta^2 u0_y
            + (1-eta)/eta (rho mu_ex delta/sigma + rho^2 delta^2 u0_y)] w_y
            + (1-eta)/2 ln(2 pi / (eta sigma^2)) = 0,  w(T, .) = 0.
    """
    co = _Coeffs(p, grid.y)
    src = 0.5 * (1.0 - p.eta) * np.log(2.0 * math.pi / (p.eta * co.s2))
    u0_y = u0.u_y()
    w = np.zeros((grid.n_t + 1, grid.n_y + 1))
    for k in range(grid.n_t - 1, -1, -1):
        lin = (co.varpi + co.delta2 * u0_y[k]
               + (1.0 - p.eta) / p.eta * (p.rho * co.mu_ex * co.delta / co.sig
                                          + p.rho ** 2 * co.delta2 * u0_y[k]))
        ab = _build_implicit(co, grid, lin)
        w[k] = solve_banded((2, 2), ab, w[k + 1] / grid.dt + src)
    return ValueSurface(u=w, grid=grid)


def mean_policy_corrector_residual(p: MarketParams, grid: Grid1D,
                                   u0: ValueSurface, phi: np.ndarray) -> np.ndarray:
    """Defect of the order-one corrector equation for the frozen-mean value.

    The equation is homogeneous with zero terminal data, so the zero surface
    has residual exactly zero; its unique solution vanishes identically.
    """
    phi = np.asarray(phi, dtype=float)
    co = _Coeffs(p, grid.y)
    u0_y = u0.u_y()
    dy, dt = grid.dy, grid.dt
    out = np.empty((grid.n_t, grid.n_y - 1))
    for k in range(grid.n_t):
        p_y = (phi[k, 2:] - phi[k, :-2]) / (2.0 * dy)
        p_yy = (phi[k, 2:] - 2.0 * phi[k, 1:-1] + phi[k, :-2]) / (dy * dy)
        lin = ((1.0 - p.eta) * p.rho * co.delta / (p.eta * co.sig)
               * (co.mu_ex + p.rho * co.delta * co.sig * u0_y[k])
               + co.delta2 * u0_y[k] + co.varpi)
        out[k] = ((phi[k + 1, 1:-1] - phi[k, 1:-1]) / dt
                  + 0.5 * co.delta2[1:-1] * p_yy + lin[1:-1] * p_y)
    return out


def expansion_check(p: MarketParams, grid: Grid1D, m_values,
                    m_extract: float = 1e-4) -> dict:
    """Remainder diagnostics of the low-temperature expansion
    u_m = u0 + (1-eta)/2 m ln m (T-t) + m u1 + O(m^2 and truncation tails).

    For each listed temperature the remainder sup norm r(m) and the halving
    ratio r(m/2)/r(m) are reported, together with the leading-coefficient
    extraction at ``m_extract`` and the frozen-mean corrector residual of
    the zero surface.
    """
    m_values = sorted(float(m) for m in m_values)
    if any(m <= 0 for m in m_values):
        raise DomainError("temperatures must be positive")
    u0 = _solve_reduced(p, grid, 0.0, zero_temp=True)
    u1 = solve_first_corrector(p, grid, u0)
    tau = (grid.T - grid.t)[:, None]
    co = _Coeffs(p, grid.y)

    def remainder(m):
        um = _solve_reduced(p, grid, m)
        pred = u0.u + 0.5 * (1.0 - p.eta) * m * math.log(m) * tau + m * u1.u
        return um, float(np.max(np.abs(um.u - pred)))

    rows = []
    for m in m_values:
        um, r_m = remainder(m)
        _, r_half = remainder(0.5 * m)
        rows.append({"m": m, "r_m": r_m, "r_half": r_half,
                     "ratio": r_half / r_m if r_m > 0 else float("nan"),
                     "mean_expansion_err": _mean_expansion_err(p, co, grid, u0, u1, um, m)})

    um_x = _solve_reduced(p, grid, m_extract)
    j0 = int(np.argmin(np.abs(grid.y - p.y0)))
    num = um_x.u[0, j0] - u0.u[0, j0] - m_extract * u1.u[0, j0]
    lead = num / (m_extract * math.log(m_extract))
    phi_res = mean_policy_corrector_residual(
        p, grid, u0, np.zeros((grid.n_t + 1, grid.n_y + 1)))
    return {
        "rows": rows,
        "mlnm_coefficient": lead,
        "mlnm_coefficient_target": 0.5 * (1.0 - p.eta) * grid.T,
        "phi1_zero_residual": float(np.max(np.abs(phi_res))),
    }


def _mean_expansion_err(p, co, grid, u0, u1, um, m):
    """Sup distance between the truncated policy mean at temperature m and
    its first-order prediction, on nodes at least five policy scales inside
    the allocation interval."""
    alpha_m = _alpha_from_surface(p, co, um)
    beta = np.sqrt(m / (p.eta * co.s2))
    mean_m, _, _, _ = truncnorm.stats_vec(alpha_m, np.broadcast_to(beta, alpha_m.shape),
                                          p.a, p.b)
    alpha0 = _alpha_from_surface(p, co, u0)
    pred = alpha0 + m * p.rho * co.delta / (p.eta * co.sig) * u1.u_y()
    margin = 5.0 * beta[None, :]
    ok = (alpha0 - p.a >= margin) & (p.b - alpha0 >= margin)
    if not np.any(ok):
        return float("nan")
    return float(np.max(np.abs(mean_m - pred)[ok]))


def policy_surface_csv(p: MarketParams, surf: ValueSurface, path,
                       header_comment: str = ""):
    """Write (t, y, alpha_star, beta_star2) induced by the surface."""
    co = _Coeffs(p, surf.grid.y)
    alpha = _alpha_from_surface(p, co, surf)
    beta2 = p.m / (p.eta * co.s2)
    t, y = surf.grid.t, surf.grid.y
    with open(path, "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("t,y,alpha_star,beta_star2\n")
        for i, ti in enumerate(t):
            for j, yj in enumerate(y):
                fh.write(f"{ti:.10g},{yj:.10g},{alpha[i, j]:.12g},{beta2[j]:.12g}\n")
