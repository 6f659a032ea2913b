"""Existence-condition checks: root function, thresholds, report."""
from __future__ import annotations

import math

import numpy as np
import pytest

from emport import conditions
from emport.market import MarketParams

PM = MarketParams()
MU_BAR = conditions.mu_excess_bar(PM)


class TestFab:
    def test_unconstrained_reduction(self):
        # widening bounds removes the normalizer term
        for q in np.geomspace(0.05, 50.0, 12):
            full = conditions.f_ab(float(q), 1.0, MU_BAR, -1e4, 1e4)
            plain = MU_BAR ** 2 / q + math.log(2 * math.pi / q)
            assert full == pytest.approx(plain, abs=1e-8)

    def test_one_sided_reduction(self):
        # a = 0, b -> inf keeps a single cdf factor
        from scipy.stats import norm

        for q in [0.1, 0.5, 2.0]:
            got = conditions.f_ab(q, 1.0, MU_BAR, 0.0, 1e8)
            expect = (MU_BAR ** 2 / q + math.log(2 * math.pi / q)
                      + 2.0 * math.log(norm.cdf(MU_BAR / math.sqrt(q))))
            assert got == pytest.approx(expect, rel=1e-10)

    def test_monotone_decrease_unconstrained(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            q1, q2 = sorted(rng.uniform(0.05, 100.0, size=2))
            if q2 - q1 < 1e-6:
                continue
            f1 = conditions.f_ab(q1, 1.0, MU_BAR, -1e4, 1e4)
            f2 = conditions.f_ab(q2, 1.0, MU_BAR, -1e4, 1e4)
            assert f2 < f1

    def test_wide_convergence_to_unconstrained(self):
        qs = np.geomspace(0.05, 10.0, 30)
        worst = max(abs(conditions.f_ab(float(q), 1.0, MU_BAR, -1e3, 1e3)
                        - (MU_BAR ** 2 / q + math.log(2 * math.pi / q)))
                    for q in qs)
        assert worst <= 1e-8

    def test_temperature_limit_of_normalizer_term(self):
        # at fixed q the m ln Z part approaches the one-sided quadratic limit
        q = 0.045
        for side, pi_ref in [("inside", 0.6), ("below", -0.4), ("above", 1.7)]:
            mu = pi_ref * q  # places (mu_excess)/q at pi_ref
            prev = None
            for m in (1e-2, 1e-4, 1e-6):
                sq = math.sqrt(q / m)
                A = 0.0 * sq - mu / math.sqrt(m * q)
                B = 1.0 * sq - mu / math.sqrt(m * q)
                from emport import nmath

                val = m * nmath.tn_lnz(A, B)
                if side == "inside":
                    limit = 0.0
                elif side == "below":
                    limit = -0.5 * (0.0 - pi_ref) ** 2 * q
                else:
                    limit = -0.5 * (1.0 - pi_ref) ** 2 * q
                err = abs(val - limit)
                if prev is not None:
                    assert err <= prev + 1e-12
                prev = err
            assert err <= max(0.02 * abs(limit), 1e-7)


class TestConditionI:
    def test_default_calibration_passes(self):
        value, ok = conditions.check_condition_i(PM, MU_BAR)
        assert ok and value > 0.0

    def test_reference_magnitudes_are_reported(self):
        rep = conditions.build_report(PM)
        assert rep.cond_i_reference == 7.40
        assert rep.q0_reference == 1.62

    def test_dominance_for_large_premium(self):
        value, ok = conditions.check_condition_i(PM, 10.0)
        assert ok

    def test_small_temperature_limit(self):
        # with a small premium the ratio (mu-r)/q sits inside [a, b], so the
        # normalizer term vanishes in the limit and the quadratic term is
        # all that survives
        p = PM.with_(m=1e-10)
        mu_small = 0.03
        assert p.a < mu_small / (p.eta * p.sigma_star ** 2) < p.b
        value, _ = conditions.check_condition_i(p, mu_small)
        assert value == pytest.approx(mu_small ** 2 / (p.eta * p.sigma_star ** 2),
                                      rel=1e-5)


class TestQ0:
    def test_root_contract(self):
        q0 = conditions.find_q0(PM, MU_BAR)
        assert q0 is not None
        assert abs(conditions.f_ab(q0, PM.m, MU_BAR, PM.a, PM.b)) <= 1e-10

    def test_dense_scan_brackets_the_root(self):
        q0 = conditions.find_q0(PM, MU_BAR)
        lo = PM.eta * PM.sigma_star ** 2
        grid = np.arange(lo + 1e-3, 2.0, 1e-3)
        vals = np.array([conditions.f_ab(float(q), PM.m, MU_BAR, PM.a, PM.b)
                         for q in grid])
        sign_change = np.where(np.diff(np.sign(vals)) != 0)[0]
        assert len(sign_change) > 0
        k = sign_change[0]
        assert grid[k] <= q0 <= grid[k + 1]

    def test_condition_ii_boundaries(self):
        q0 = conditions.find_q0(PM, MU_BAR)
        assert conditions.check_condition_ii(PM, q0, q0 / PM.eta)
        assert not conditions.check_condition_ii(PM, q0, q0 / PM.eta + 1e-9)
        assert conditions.check_condition_ii(PM, q0, 1.09)


class TestReport:
    def test_default_report(self):
        rep = conditions.build_report(PM)
        assert rep.mu_ex_bar == pytest.approx(0.27379, abs=1e-4)
        assert rep.sup_sigma2 == 1.09
        assert rep.cond_i_pass and rep.cond_ii_pass
        assert rep.q0 is not None and rep.q0_over_eta == rep.q0 / PM.eta
        assert rep.sup_sigma2 <= rep.q0_over_eta

    def test_invariant_cond_ii_implies_q0(self):
        rep = conditions.build_report(PM)
        if rep.cond_ii_pass and rep.q0 is not None:
            assert rep.sup_sigma2 <= rep.q0 / PM.eta

    def test_csv(self, tmp_path):
        rep = conditions.build_report(PM)
        out = tmp_path / "cond.csv"
        rep.to_csv(out, header_comment="config=xyz")
        lines = out.read_text().splitlines()
        assert lines[0] == "# config=xyz"
        assert lines[1].startswith("mu_ex_bar,cond_i_value")
        assert len(lines) == 3
