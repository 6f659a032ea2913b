"""Zero-temperature curve pair, parametric fit, Merton fraction and band."""
from __future__ import annotations

import math

import numpy as np
import pytest

from emport import classical
from emport.classical import PsiParams
from emport.market import MarketParams
from emport.truncnorm import DomainError

PM = MarketParams()


class TestOdes:
    def test_terminal_values_exact(self):
        t, L, M = classical.solve_lm_odes(PM, 64)
        assert L[-1] == 0.0 and M[-1] == 0.0

    def test_terminal_slope(self):
        dL, _ = classical._lm_rhs(PM, 0.0)
        assert dL == pytest.approx(-(1 - PM.eta) * PM.k2 ** 2 / (2 * PM.eta),
                                   rel=1e-14)
        assert dL == pytest.approx(-0.02645, abs=1e-10)

    def test_residuals_small(self):
        t, L, M = classical.solve_lm_odes(PM, 4 * PM.n_steps)
        rL, rM = classical.lm_residuals(PM, t, L, M)
        assert np.abs(rL).max() <= 1e-8
        assert np.abs(rM).max() <= 1e-8

    def test_fourth_order_halving(self):
        def maxres(n):
            t, L, M = classical.solve_lm_odes(PM, n)
            rL, rM = classical.lm_residuals(PM, t, L, M)
            return max(np.abs(rL).max(), np.abs(rM).max())

        assert maxres(32) / maxres(64) >= 8.0

    def test_no_premium_degenerate(self):
        p = PM.with_(k2=0.0)
        t, L, M = classical.solve_lm_odes(p, 128)
        assert np.abs(L).max() <= 1e-14
        assert np.allclose(M, p.r * (1 - p.eta) * (p.T - t), atol=1e-12)

    def test_bad_grid_rejected(self):
        with pytest.raises(DomainError):
            classical.solve_lm_odes(PM, 1)


class TestParametric:
    def test_terminal_collapse(self):
        psi = PsiParams((1.9, 0.02, 0.01, 0.95, -8.0, 4.0))
        L, M = classical.parametric_lm(psi, 1.0, 1.0)
        assert L == 0.0 and M == 0.0

    def test_zero_numerator(self):
        psi = PsiParams((1.9, 0.0, 0.01, 0.95, 0.3, 0.0))
        L, _ = classical.parametric_lm(psi, np.linspace(0, 1, 11), 1.0)
        assert np.all(L == 0.0)

    def test_published_parameter_set_is_finite(self):
        psi = PsiParams((1.9950, 0.0169, 0.0137, 0.9587, -8.0055, 4.0010))
        L, M = classical.parametric_lm(psi, 0.0, 1.0)
        assert math.isfinite(L) and math.isfinite(M)
        # and it tracks the integrated pair at the loose level the final
        # learned parameters are expected to
        t, Lg, Mg = classical.solve_lm_odes(PM, 252)
        Lp, Mp = classical.parametric_lm(psi, t, 1.0)
        assert np.abs(Lp - Lg).max() <= 2e-2

    def test_degenerate_denominator_rejected(self):
        with pytest.raises(DomainError):
            classical.parametric_lm(PsiParams((1.0, 0.1, 1.0, 1.0, 0.0, 0.0)),
                                    np.linspace(0, 1, 5), 1.0)


class TestFit:
    def test_roundtrip_on_own_output(self):
        t = np.linspace(0.0, 1.0, 400)
        truth = PsiParams((1.99, 0.017, 0.014, 0.96, -8.0, 4.0))
        L, M = classical.parametric_lm(truth, t, 1.0)
        fit = classical.fit_parametric(L, M, 1.0, t_grid=t)
        assert fit.sup_err_L <= 1e-10
        assert fit.sup_err_M <= 1e-10

    def test_fit_quality_on_integrated_pair(self):
        t, L, M = classical.solve_lm_odes(PM, 1008)
        fit = classical.fit_parametric(L, M, PM.T, t_grid=t)
        assert fit.sup_err_L <= 1e-2
        assert fit.sup_err_M <= 1e-2

    def test_zero_curves(self):
        t = np.linspace(0.0, 1.0, 100)
        fit = classical.fit_parametric(np.zeros(100), np.zeros(100), 1.0, t_grid=t)
        L, M = classical.parametric_lm(fit.psi, t, 1.0)
        assert np.abs(L).max() <= 1e-12 and np.abs(M).max() <= 1e-12

    def test_pinned_ratio_stays_conditioned(self):
        t, L, M = classical.solve_lm_odes(PM, 1008)
        fit = classical.fit_parametric(L, M, PM.T, t_grid=t, fix_ratio=0.015)
        assert fit.sup_err_L <= 1e-4 and fit.sup_err_M <= 1e-4
        assert np.abs(fit.psi.as_array()).max() <= 10.0


class TestMertonFraction:
    def test_default_point(self):
        got = classical.merton_fraction(PM, 0.0, 0.5, 0.0)
        oracle = math.sqrt(0.8) * 0.23 / (0.5 * math.sqrt(0.34))
        assert got == pytest.approx(oracle, rel=1e-14)
        assert got == pytest.approx(0.7056, abs=2e-4)

    def test_zero_premium(self):
        assert classical.merton_fraction(PM.with_(k2=0.0), 0.0, 0.5, 0.0) == 0.0

    def test_bracket_zero(self):
        u_y = -PM.k2 / (PM.rho * PM.k1)
        assert classical.merton_fraction(PM, 0.0, 0.5, u_y) == pytest.approx(0.0, abs=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            classical.merton_fraction(PM, 0.0, -0.3, 0.0)


class TestBand:
    def test_zero_gradient_bound(self):
        lo, _ = classical.admissibility_band(PM, 0.0)
        assert lo == 0.0

    def test_contains_default_premium(self):
        t, L, _ = classical.solve_lm_odes(PM, 1008)
        R = float(np.abs(L).max())
        lo, hi = classical.admissibility_band(PM, R)
        assert lo <= PM.k2 <= hi

    def test_brute_force_membership(self):
        rng = np.random.default_rng(12)
        t, L, _ = classical.solve_lm_odes(PM, 1008)
        R = float(np.abs(L).max())
        lo, hi = classical.admissibility_band(PM, R)
        for k2 in np.linspace(lo, hi, 7):
            p = PM.with_(k2=float(k2))
            y = rng.uniform(0.0, 10.0, size=1500)
            u_y = rng.uniform(-R, R, size=1500)
            pim = np.array([classical.merton_fraction(p, 0.0, yi, ui)
                            for yi, ui in zip(y, u_y)])
            assert np.all(pim >= -1e-12) and np.all(pim <= 1.0 + 1e-12)

    def test_empty_band_reported(self):
        lo, hi = classical.admissibility_band(PM, 1e6)
        assert hi < lo  # reported, not raised


class TestValuePde:
    def test_affine_surface_satisfies_reduced_pde(self):
        # the zero-temperature surface solves the reduced equation on the
        # region where the unconstrained fraction stays inside [a, b]
        assert classical.v0_pde_residual(PM, n_y=40, n_t=64) <= 1e-6


def test_curves_csv(tmp_path):
    t, L, M = classical.solve_lm_odes(PM, 64)
    fit = classical.fit_parametric(L, M, PM.T, t_grid=t)
    Lp, Mp = classical.parametric_lm(fit.psi, t, PM.T)
    out = tmp_path / "lm.csv"
    classical.lm_curves_csv(out, t, L, M, Lp, Mp, header_comment="config=abc")
    lines = out.read_text().splitlines()
    assert lines[0] == "# config=abc"
    assert lines[1] == "t,L,M,L_psi,M_psi"
    assert len(lines) == 2 + len(t)
