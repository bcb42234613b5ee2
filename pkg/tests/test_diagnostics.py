import math

import numpy as np
import pytest

from subsidysim.diagnostics import (
    ConsortiumYearRow,
    common_support,
    cooks_trim,
    functional_form_comparison,
    fwl_hump,
    manski_sensitivity,
    oster_bounds,
    oster_from_stats,
)
from subsidysim.errors import NoControlGroup, NonpositiveValues
from subsidysim.simulate import ScenarioConfig, simulate_panel
from test_estimators import STATES, handmade_panel, mk


class TestOster:
    def test_anchor_values(self):
        rep = oster_from_stats(
            beta_short=-0.261, beta_long=-1.249,
            r2_short=0.043, r2_long=0.387, r2_max=0.502,
        )
        assert -3.9 < rep.delta < -3.6
        assert -1.62 < rep.beta_star < -1.54
        assert rep.verdict == "Computed"

    def test_default_r2max(self):
        rep = oster_from_stats(0.5, 0.4, 0.1, 0.3)
        assert rep.r2_max == pytest.approx(0.39)

    def test_stable_when_no_movement(self):
        rep = oster_from_stats(0.4, 0.4, 0.1, 0.3)
        assert rep.verdict == "Stable"
        assert math.isinf(rep.delta)
        assert rep.beta_star == 0.4

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            oster_from_stats(0.4, 0.4, 0.5, 0.3)

    def test_on_simulated_panel(self):
        rows, _ = simulate_panel(ScenarioConfig(seed=13, n_hcps=150))
        rep = oster_bounds(rows, margin="tau_12")
        assert rep.r2_long >= rep.r2_short
        assert np.isfinite(rep.beta_star)


class TestManski:
    def test_reduces_to_did_at_one(self):
        curve = manski_sensitivity(handmade_panel(), margin="P2")
        i = int(np.argmin(np.abs(curve.g_grid - 1.0)))
        assert curve.g_grid[i] == pytest.approx(1.0)
        assert curve.beta[i] == pytest.approx(curve.beta_did, abs=1e-12)
        assert curve.beta_did == pytest.approx(-1.5, abs=1e-9)
        assert curve.beta0 == pytest.approx(1.0, abs=1e-9)

    def test_affine_in_g(self):
        curve = manski_sensitivity(handmade_panel(), margin="P2c")
        slopes = np.diff(curve.beta) / np.diff(curve.g_grid)
        assert np.allclose(slopes, -curve.beta0, atol=1e-10)

    def test_zero_crossing(self):
        curve = manski_sensitivity(handmade_panel(), margin="P2")
        b, se = curve.at(curve.zero_crossing)
        assert b == pytest.approx(0.0, abs=1e-10)
        assert se > 0

    def test_exact_debias_of_injected_violation(self):
        # switcher trend 1.3 instead of the controls' 1.0; evaluating the
        # robust estimate at g = 1.3 recovers the true -1.5 exactly
        rows = []
        for i in range(12):
            hcp = f"h{i:02d}"
            base = 3.0 + 0.05 * i
            state = STATES[i % 4]
            s2 = 1.0 if i % 2 else 0.0
            dy = 1.3 - 1.5 if s2 else 1.0
            rows.append(mk(hcp, 0, base, state=state, speed=10.0 + i))
            rows.append(mk(hcp, 1, base + dy, s2=s2, state=state, speed=10.0 + i))
        curve = manski_sensitivity(rows, margin="P2")
        b, _ = curve.at(1.3)
        assert b == pytest.approx(-1.5, abs=1e-9)

    def test_simulated_violation_recovery(self):
        cfg = ScenarioConfig(seed=14, n_hcps=300, trend_violation_g=1.3,
                             p2c_fraction=0.0, outcome_noise_scale=0.0)
        rows, truth = simulate_panel(cfg)
        curve = manski_sensitivity(rows, margin="P2")
        b, _ = curve.at(1.3)
        assert b == pytest.approx(truth.tau_12, abs=0.02)

    def test_no_control_group(self):
        rows = []
        for i in range(6):
            rows.append(mk(f"h{i}", 0, 2.0, state=STATES[i % 4]))
            rows.append(mk(f"h{i}", 1, 1.0, s2=1.0, state=STATES[i % 4]))
        with pytest.raises(NoControlGroup):
            manski_sensitivity(rows, margin="P2")


class TestCooks:
    def _noisy_panel(self, outlier=True):
        rng = np.random.default_rng(15)
        rows = []
        for i in range(40):
            hcp = f"h{i:02d}"
            base = 3.0 + 0.05 * i
            state = STATES[i % 4]
            group = i % 3
            s2 = 1.0 if group == 1 else 0.0
            s2c = 1.0 if group == 2 else 0.0
            effect = {0: 0.0, 1: -1.5, 2: 1.0}[group]
            dy = 1.0 + effect + float(rng.normal(scale=0.02))
            rows.append(mk(hcp, 0, base, state=state, speed=10.0 + i))
            rows.append(mk(hcp, 1, base + dy, s2=s2, s2c=s2c, state=state,
                           speed=10.0 + i))
        if outlier:
            rows.append(mk("bad", 0, 3.0, state="KS", speed=30.0))
            rows.append(mk("bad", 1, 9.0, s2=1.0, state="KS", speed=30.0))
        return rows

    def test_outlier_flagged_and_removed(self):
        rep = cooks_trim(self._noisy_panel())
        assert "bad" in rep.flagged_hcps
        assert rep.threshold == pytest.approx(4.0 / rep.n_obs)
        assert abs(rep.trimmed["tau_12"] + 1.5) < 0.02
        # the contaminated fit sits far above the clean value
        assert rep.baseline["tau_12"] > rep.trimmed["tau_12"] + 0.1

    def test_clean_panel_moves_little(self):
        rep = cooks_trim(self._noisy_panel(outlier=False))
        for v in rep.delta_pct.values():
            assert abs(v) < 5.0


class TestCommonSupport:
    def test_restriction_runs(self):
        rows, _ = simulate_panel(ScenarioConfig(seed=16, n_hcps=200))
        rep = common_support(rows)
        assert rep.speed_range[0] < rep.speed_range[1]
        assert rep.n_dropped >= 0
        assert set(rep.delta_pct) <= {"tau_12", "tau_12c"}

    def test_explicit_range(self):
        rows, _ = simulate_panel(ScenarioConfig(seed=16, n_hcps=200))
        wide = common_support(rows, speed_range=(0.0, 1e9))
        assert wide.n_dropped == 0
        for k, v in wide.delta_pct.items():
            assert v == pytest.approx(0.0, abs=1e-9)


class TestHump:
    def _rows(self, shape, n=160, seed=17, noise=0.02):
        rng = np.random.default_rng(seed)
        rows = []
        for i in range(n):
            f = float(rng.uniform(0.05, 0.95))
            bidders = float(rng.uniform(2, 6))
            ln_ms = float(rng.normal(3.0, 0.4))
            ln_ts = ln_ms + float(rng.normal(1.5, 0.2))
            year = 2015 + i % 4
            if shape == "hump":
                sig = -3.0 * (f - 0.5) ** 2
            elif shape == "monotone":
                sig = 0.8 * f
            else:
                sig = 0.0
            price = (4.0 + sig + 0.1 * bidders - 0.05 * ln_ms
                     + 0.02 * (year - 2015) + float(rng.normal(scale=noise)))
            rows.append(ConsortiumYearRow(
                consortium_id=f"c{i % 40:02d}", year=year, ln_price=price,
                frac_ineligible=f, mean_bidders=bidders,
                ln_mean_speed=ln_ms, ln_total_speed=ln_ts,
            ))
        return rows

    def test_detects_hump(self):
        rep = fwl_hump(self._rows("hump"))
        assert rep.verdict == "InvertedU"
        assert 0.3 < rep.max_location < 0.7

    def test_detects_monotone(self):
        rep = fwl_hump(self._rows("monotone"))
        assert rep.verdict == "Monotone"

    def test_detects_flat(self):
        rep = fwl_hump(self._rows("flat", noise=0.05))
        assert rep.verdict == "Flat"

    def test_fwl_identity(self):
        rep = fwl_hump(self._rows("monotone"))
        assert rep.fwl_slope == pytest.approx(rep.full_coef, abs=1e-8)

    def test_degenerate_fraction(self):
        rows = self._rows("flat")
        rows = [ConsortiumYearRow(
            consortium_id=r.consortium_id, year=r.year, ln_price=r.ln_price,
            frac_ineligible=0.4, mean_bidders=r.mean_bidders,
            ln_mean_speed=r.ln_mean_speed, ln_total_speed=r.ln_total_speed,
        ) for r in rows]
        rep = fwl_hump(rows)
        assert rep.degenerate_fraction
        assert rep.verdict == "Flat"

    def test_minimum_rows(self):
        with pytest.raises(ValueError):
            fwl_hump(self._rows("flat")[:30])


class TestFunctionalForms:
    def test_log_log_truth_wins(self):
        rng = np.random.default_rng(18)
        S = rng.lognormal(3.0, 0.7, size=500)
        P = np.exp(5.0 - 0.4 * np.log(S) + rng.normal(scale=0.05, size=500))
        fits = functional_form_comparison(P, S)
        assert len(fits) == 8
        names = [f.name for f in fits]
        assert set(names) == {
            "quadratic", "lin-log", "lin-sqrt", "log-quadratic",
            "log-log", "linear", "log-sqrt", "log-linear",
        }
        # the generating form (or its quadratic superset) ranks first
        assert fits[0].name in ("log-log", "log-quadratic")
        assert fits[0].rank == 1
        assert fits[0].adj_r2 > fits[-1].adj_r2

    def test_rank_by_adjusted_r2(self):
        rng = np.random.default_rng(19)
        S = rng.uniform(1, 100, size=300)
        P = 50.0 + 2.0 * S + rng.normal(scale=5.0, size=300)
        fits = functional_form_comparison(P, S)
        assert fits[0].name in ("linear", "quadratic")
        r2s = [f.adj_r2 for f in fits]
        assert r2s == sorted(r2s, reverse=True)

    def test_nonpositive_rejected(self):
        with pytest.raises(NonpositiveValues):
            functional_form_comparison(np.array([1.0, -2.0]), np.array([1.0, 2.0]))
