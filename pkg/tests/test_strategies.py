import numpy as np
import pytest

from qumimo import channel, metrics, strategies
from qumimo.errors import UndefinedIndexError


class TestAsymmetryIndex:
    def test_single_contributor(self):
        assert abs(metrics.asymmetry_index([1.0, 0.5, 0.5]) - 1 / 3) < 1e-12

    def test_equal_contributions(self):
        assert abs(metrics.asymmetry_index([0.8, 0.8, 0.8]) - 1.0) < 1e-12

    def test_frozen_example(self):
        # direct formula evaluation: F~=(0.72, 0.28, 0), J = 1 / (3 * 0.5968)
        f = [0.9, 0.7, 0.5]
        eff = [0.8 * 0.9, 0.4 * 0.7, 0.0]
        want = sum(eff) ** 2 / (3 * sum(e * e for e in eff))
        got = metrics.asymmetry_index(f)
        assert abs(got - want) < 1e-12
        assert abs(got - 0.55853) < 1e-5

    def test_negative_contributions_clamped(self):
        # F = 0.4 sits below the baseline; acts as if absent
        a = metrics.asymmetry_index([0.9, 0.4])
        b = metrics.asymmetry_index([0.9, 0.5])
        assert abs(a - b) < 1e-12

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            m = int(rng.integers(1, 6))
            f = rng.uniform(0.5 + 1e-6, 1.0, m)
            j = metrics.asymmetry_index(f)
            assert 1 / m - 1e-9 <= j <= 1 + 1e-9

    def test_undefined(self):
        with pytest.raises(UndefinedIndexError):
            metrics.asymmetry_index([0.5, 0.4])


class TestEmpiricalDensity:
    def test_peaks_at_degenerate_value(self):
        grid, dens = metrics.empirical_density([0.7] * 10, (0.5, 1.0))
        assert abs(grid[np.argmax(dens)] - 0.7) < 2e-3

    def test_flat_on_uniform_grid(self):
        values = np.linspace(1 / 3, 1.0, 200)
        grid, dens = metrics.empirical_density(values, (1 / 3, 1.0))
        assert dens.max() / dens.min() < 1.5

    def test_normalized(self):
        rng = np.random.default_rng(1)
        values = rng.uniform(1 / 3, 1.0, 50)
        grid, dens = metrics.empirical_density(values, (1 / 3, 1.0))
        integral = np.trapezoid(dens, grid)
        assert abs(integral - 1.0) < 1e-3

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            metrics.empirical_density([0.5], (0.0, 1.0))
        with pytest.raises(ValueError):
            metrics.empirical_density([0.5, 0.6], (1.0, 0.0))


class TestPurificationGain:
    def test_zero_at_same_p(self):
        assert metrics.purification_gain(0.83, 0.83) == 0.0

    def test_signed(self):
        # clean channel: deterministic decoding wins, gain negative
        assert metrics.purification_gain(0.9, 1.0) == pytest.approx(-0.1)

    def test_record_level(self):
        params = channel.ChannelParams(n=2, eta=0.4, lam=(0.4, 0.3), delta=1.0)
        ch = channel.channel_choi(params)
        rec_p = strategies.run_strategy("sym", params, 2, 2, 0.8, chan=ch, mean_id=0)
        rec_1 = strategies.run_strategy("sym", params, 2, 2, 1.0, chan=ch, mean_id=0)
        g = strategies.purification_gain(rec_p, rec_1)
        assert g == pytest.approx(rec_p.f_avg - rec_1.f_avg)
        assert strategies.purification_gain(rec_1, rec_1) == 0.0

    def test_record_mismatch_rejected(self):
        params_a = channel.ChannelParams(n=2, eta=0.4, lam=(0.4, 0.3), delta=1.0)
        params_b = channel.ChannelParams(n=2, eta=0.6, lam=(0.4, 0.3), delta=1.0)
        rec_p = strategies.run_strategy("sym", params_a, 2, 2, 0.8)
        rec_1 = strategies.run_strategy("sym", params_b, 2, 2, 1.0)
        with pytest.raises(ValueError):
            strategies.purification_gain(rec_p, rec_1)
        rec_bad = strategies.run_strategy("sym", params_a, 2, 2, 0.9)
        with pytest.raises(ValueError):
            strategies.purification_gain(rec_p, rec_bad)


class TestSelectModes:
    def test_argmin_rule(self):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.2, 0.6), delta=1.0)
        ch = channel.channel_choi(params)
        t, r = strategies.select_modes(params.lam, 1, ch)
        assert t == (1,) and r == (1,)

    def test_tie_break_by_index(self):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.3, 0.3), delta=1.0)
        ch = channel.channel_choi(params)
        t, r = strategies.select_modes(params.lam, 1, ch)
        assert t == (1,)

    def test_all_modes(self):
        params = channel.ChannelParams(n=3, eta=0.4, lam=(0.2, 0.2, 0.2), delta=1.0)
        ch = channel.channel_choi(params)
        t, r = strategies.select_modes(params.lam, 3, ch)
        assert sorted(t) == [1, 2, 3] and sorted(r) == [1, 2, 3]

    def test_no_crosstalk_receive_equals_transmit(self):
        params = channel.ChannelParams(n=3, eta=0.0, lam=(0.5, 0.1, 0.3), delta=1.0)
        ch = channel.channel_choi(params)
        t, r = strategies.select_modes(params.lam, 2, ch)
        assert t == (2, 3)
        assert set(r) == set(t)


class TestRunStrategy:
    def test_dir_identity_channel(self):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.0, 0.0), delta=1.0)
        rec = strategies.run_strategy("dir", params, 1, 1, 1.0)
        assert abs(rec.f_avg - 1.0) < 1e-6

    def test_dir_analytic(self):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.2, 0.6), delta=1.0)
        rec = strategies.run_strategy("dir", params, 1, 1, 1.0)
        assert abs(rec.f_avg - 0.9) < 1e-8  # 1 - lam_min / 2

    def test_f_avg_identity(self):
        params = channel.ChannelParams(n=2, eta=0.5, lam=(0.4, 0.2), delta=1.0)
        for s in ("pur", "sym", "div"):
            m = 1 if s == "pur" else 2
            rec = strategies.run_strategy(s, params, m, 2, 0.8)
            assert abs(rec.f_avg - (0.8 * rec.f_success + 0.1)) < 1e-10
            assert 0.5 - 1e-6 <= rec.f_avg <= 1 + 1e-6

    def test_dominance_per_instance(self):
        rng = np.random.default_rng(2)
        for _ in range(3):
            params = channel.ChannelParams(
                n=2, eta=float(rng.uniform(0, 1)), lam=tuple(rng.uniform(0.1, 0.9, 2)),
                delta=1.0,
            )
            ch = channel.channel_choi(params)
            div = strategies.run_strategy("div", params, 2, 2, 0.8, chan=ch)
            sym = strategies.run_strategy("sym", params, 2, 2, 0.8, chan=ch)
            pur = strategies.run_strategy("pur", params, 1, 2, 0.8, chan=ch)
            blind = strategies.run_strategy("blind", params, 2, 2, 0.8, chan=ch)
            assert div.f_avg >= sym.f_avg - 1e-6
            assert div.f_avg >= pur.f_avg - 1e-6
            assert blind.f_avg <= sym.f_avg + 1e-6

    def test_symmetric_channel_invariant_under_mode_relabeling(self):
        base = channel.ChannelParams(n=3, eta=0.5, lam=(0.4, 0.2, 0.3), delta=1.0)
        rolled = channel.ChannelParams(n=3, eta=0.5, lam=(0.2, 0.3, 0.4), delta=1.0)
        a = strategies.run_strategy("sym", base, 3, 3, 0.8)
        b = strategies.run_strategy("sym", rolled, 3, 3, 0.8)
        # cyclic relabeling of a circulant channel leaves fidelity unchanged
        assert abs(a.f_avg - b.f_avg) < 1e-8

    def test_blind_reports_realized_probability(self):
        params = channel.ChannelParams(n=2, eta=0.3, lam=(0.5, 0.2), delta=1.0)
        rec = strategies.run_strategy("blind", params, 2, 2, 0.8)
        assert rec.p_target == 0.8
        assert 0.0 <= rec.p_real <= 1.0
        assert abs(rec.f_avg - (rec.p_real * rec.f_success + (1 - rec.p_real) / 2)) < 1e-9

    def test_rejects_bad_combo(self):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.1, 0.1), delta=1.0)
        with pytest.raises(ValueError):
            strategies.run_strategy("pur", params, 2, 2, 0.8)
        with pytest.raises(ValueError):
            strategies.run_strategy("nope", params, 1, 1, 1.0)


class TestRecordsCsv:
    def test_stable_schema(self, tmp_path):
        params = channel.ChannelParams(n=2, eta=0.0, lam=(0.2, 0.4), delta=1.0)
        rec = strategies.run_strategy(
            "sym", params, 2, 2, 0.8, regime="fixed_z", z=0.6, mean_id=0, seed=7
        )
        path = tmp_path / "records.csv"
        strategies.write_records_csv(path, [rec], m_max=3)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == (
            "strategy,N,M,K,Z,regime,eta,delta,p_target,p_real,mu,mean_id,"
            "realization_id,F_avg,J_index,gamma_1,gamma_2,gamma_3,t,r,seed"
        )
        fields = lines[1].split(",")
        assert fields[0] == "sym" and fields[-1] == "7"
        assert fields[17] == ""  # gamma_3 padded for M = 2
        assert fields[18] == "1;2" and fields[19] == "1;2"
