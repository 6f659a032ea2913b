"""Out-of-sample evaluation mechanics."""
from __future__ import annotations

import math

import numpy as np
import pytest

from emport import actor_critic as ac
from emport import evaluation as ev
from emport import rngstreams
from emport.market import MarketParams
from emport.truncnorm import DomainError

PM = MarketParams()
PSI = ac.CriticParams((1.9950, 0.0169, 0.0137, 0.9587, -8.0055, 4.0010))
THETA = ac.ActorParams((2.09, 0.3986, 0.0068, 0.8806, 0.1568, 0.0945))


class TestEvaluate:
    def test_bond_only_policy(self):
        # symmetric bounds and a zero location put the policy mean exactly
        # at zero: deterministic deployment holds the riskless asset only
        p = PM.with_(a=-0.5, b=0.5)
        theta0 = ac.ActorParams((2.0, 0.0, 0.01, 1.0, 0.0, 0.0))
        rep = ev.evaluate(theta0, PSI, p, 500, seed=4, mode="deterministic")
        u_expect = (math.exp(p.r * p.T) ** (1 - p.eta) - 1.0) / (1 - p.eta)
        assert rep.mean_u == pytest.approx(u_expect, abs=1e-12)
        assert rep.std_u == pytest.approx(0.0, abs=1e-12)
        assert rep.median_u == pytest.approx(u_expect, abs=1e-12)

    def test_gap_definition(self):
        rep = ev.evaluate(THETA, PSI, PM, 2000, seed=5, mode="deterministic")
        assert rep.gap == pytest.approx(rep.mean_u - rep.benchmark, abs=1e-15)
        assert rep.benchmark == pytest.approx(
            ac.critic_value(PSI, PM, 0.0, 1.0, PM.y0), abs=1e-15)

    def test_deterministic_mode_ignores_exploration_stream(self):
        n, K = 400, PM.n_steps
        z1 = rngstreams.batch_normals(9, rngstreams.TAG_EVAL, 0, n, K, 3)
        z2 = z1.copy()
        z2[:, :, 2] = -z2[:, :, 2] + 0.7  # disturb only the exploration leg
        u1 = ev.simulate_utilities(THETA, PM, n, 9, "deterministic", increments=z1)
        u2 = ev.simulate_utilities(THETA, PM, n, 9, "deterministic", increments=z2)
        assert np.array_equal(u1, u2)
        s1 = ev.simulate_utilities(THETA, PM, n, 9, "stochastic", increments=z1)
        s2 = ev.simulate_utilities(THETA, PM, n, 9, "stochastic", increments=z2)
        assert not np.array_equal(s1, s2)

    def test_stochastic_dominated_by_deterministic(self):
        rep_d = ev.evaluate(THETA, PSI, PM, 20000, seed=6, mode="deterministic")
        rep_s = ev.evaluate(THETA, PSI, PM, 20000, seed=6, mode="stochastic")
        assert rep_s.gap <= rep_d.gap
        assert rep_s.std_u > rep_d.std_u

    def test_exact_median_selection(self):
        assert ev._exact_median(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0
        assert ev._exact_median(np.array([5.0, 1.0, 3.0])) == 3.0

    def test_mode_validation(self):
        with pytest.raises(DomainError):
            ev.evaluate(THETA, PSI, PM, 10, seed=1, mode="wrong")

    def test_determinism(self):
        r1 = ev.evaluate(THETA, PSI, PM, 3000, seed=7, mode="stochastic")
        r2 = ev.evaluate(THETA, PSI, PM, 3000, seed=7, mode="stochastic")
        assert r1 == r2


class TestConvergenceCurve:
    def test_final_checkpoint_matches_evaluate(self):
        series = ev.mc_convergence_curve(THETA, PSI, PM, 4000, [1000, 4000], seed=8)
        rep = ev.evaluate(THETA, PSI, PM, 4000, seed=8)
        assert series[-1][0] == 4000
        assert series[-1][1] == pytest.approx(rep.mean_u, abs=1e-15)
        assert series[-1][2] == pytest.approx(rep.benchmark, abs=1e-15)

    def test_running_error_clt_scaling(self):
        # on synthetic i.i.d. utilities the running standard error follows
        # the square-root law
        rng = np.random.default_rng(31)
        n = 40000
        reps = 200
        errs_n = np.empty(reps)
        errs_4n = np.empty(reps)
        for r in range(reps):
            u = rng.standard_normal(n)
            errs_n[r] = abs(u[: n // 4].mean())
            errs_4n[r] = abs(u.mean())
        ratio = errs_4n.mean() / errs_n.mean()
        assert 0.4 <= ratio <= 0.6

    def test_validation(self):
        with pytest.raises(DomainError):
            ev.mc_convergence_curve(THETA, PSI, PM, 100, [200], seed=1)
        with pytest.raises(DomainError):
            ev.mc_convergence_curve(THETA, PSI, PM, 100, [50, 10], seed=1)


class TestCsv:
    def test_report_and_curve(self, tmp_path):
        rep = ev.evaluate(THETA, PSI, PM, 100, seed=2)
        out = tmp_path / "r.csv"
        ev.report_csv(out, [rep], header_comment="config=e")
        lines = out.read_text().splitlines()
        assert lines[0] == "# config=e"
        assert lines[1] == "n_test,mean_u,std_u,median_u,benchmark,gap,mode,seed"
        series = ev.mc_convergence_curve(THETA, PSI, PM, 100, [50, 100], seed=2)
        out2 = tmp_path / "c.csv"
        ev.curve_csv(out2, series)
        assert out2.read_text().splitlines()[0] == "n,estimate,benchmark"
