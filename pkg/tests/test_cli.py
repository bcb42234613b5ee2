import json
import os

import pytest

from subsidysim.cli import main
from subsidysim.panel_io import write_panel_csv
from test_estimators import handmade_panel


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSimulate:
    def test_minimal_config_six_rows(self, tmp_path, capsys):
        cfg = tmp_path / "mini.ini"
        cfg.write_text("[scenario]\nseed = 42\nn_hcps = 3\n"
                       "outcome_noise_scale = 0.0\n")
        out = tmp_path / "run"
        code, _, _ = run(["simulate", "--config", str(cfg), "--out", str(out)],
                         capsys)
        assert code == 0
        lines = (out / "panel.csv").read_text().splitlines()
        assert len(lines) == 7  # header + 3 HCPs x 2 periods
        assert (out / "ground_truth.json").exists()
        assert (out / "manifest.json").exists()

    def test_identical_digests_on_rerun(self, tmp_path, capsys):
        cfg = tmp_path / "mini.ini"
        cfg.write_text("[scenario]\nseed = 5\nn_hcps = 8\n")
        digests = []
        for d in ("r1", "r2"):
            code, _, _ = run(["simulate", "--config", str(cfg),
                              "--out", str(tmp_path / d)], capsys)
            assert code == 0
            man = json.loads((tmp_path / d / "manifest.json").read_text())
            digests.append(man["digests"])
        assert digests[0] == digests[1]

    def test_missing_config_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(["simulate", "--out", str(tmp_path / "x")], capsys)
        assert code == 2
        assert "seed" in err or "config" in err


class TestEstimate:
    @pytest.fixture()
    def panel(self, tmp_path):
        path = tmp_path / "panel.csv"
        write_panel_csv(handmade_panel(), str(path))
        return str(path)

    def test_twfe_on_handcrafted_panel(self, panel, capsys):
        code, out, _ = run(["estimate", "--panel", panel,
                            "--method", "twfe-cont"], capsys)
        assert code == 0
        tau_line = next(l for l in out.splitlines() if l.startswith("tau_12\t"))
        assert float(tau_line.split("\t")[1]) == pytest.approx(-1.5, abs=1e-8)

    def test_structured_record_written(self, panel, tmp_path, capsys):
        out_dir = tmp_path / "est"
        code, _, _ = run(["estimate", "--panel", panel, "--out", str(out_dir)],
                         capsys)
        assert code == 0
        rec = json.loads((out_dir / "estimates.json").read_text())
        assert rec["coefficients"]["tau_12"]["coef"] == pytest.approx(-1.5, abs=1e-8)
        assert rec["contrast"]["estimate"] == pytest.approx(2.5, abs=1e-8)

    def test_fold_too_small_exits_2(self, panel, capsys):
        code, _, err = run(["estimate", "--panel", panel, "--method", "dml",
                            "--k-folds", "15"], capsys)
        # 24-row panel cannot fill 15 folds twice over
        assert code == 2
        assert "folds" in err

    def test_schema_violation_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("foo,bar\n1,2\n")
        code, _, err = run(["estimate", "--panel", str(bad)], capsys)
        assert code == 2
        assert "header" in err


class TestDiagnose:
    def test_oster_stats_direct(self, capsys):
        code, out, _ = run(["diagnose",
                            "--oster-stats=-0.261,-1.249,0.043,0.387,0.502"], capsys)
        assert code == 0
        delta = float(out.split("delta=")[1].split()[0])
        assert delta == pytest.approx(-3.78, abs=0.1)

    def test_manski_plot_data(self, tmp_path, capsys):
        panel = tmp_path / "panel.csv"
        write_panel_csv(handmade_panel(), str(panel))
        out_dir = tmp_path / "diag"
        code, _, _ = run(["diagnose", "--panel", str(panel),
                          "--battery", "manski", "--g-grid", "0:2:21",
                          "--out", str(out_dir)], capsys)
        assert code == 0
        lines = (out_dir / "manski_curve.tsv").read_text().splitlines()
        assert lines[0] == "g\tbeta\tci_low\tci_high"
        assert len(lines) == 22
        rec = json.loads((out_dir / "diagnostics.json").read_text())
        # beta_robust(1) equals the unadjusted estimate
        g, beta = [], []
        for line in lines[1:]:
            parts = line.split("\t")
            g.append(float(parts[0]))
            beta.append(float(parts[1]))
        i = g.index(1.0)
        assert beta[i] == pytest.approx(rec["manski"]["beta_did"], abs=1e-12)

    def test_unknown_battery_exits_2(self, capsys):
        code, _, err = run(["diagnose", "--battery", "nonsense"], capsys)
        assert code == 2
        assert "battery" in err

    def test_nothing_to_do_exits_2(self, capsys):
        code, _, _ = run(["diagnose"], capsys)
        assert code == 2


class TestReplicate:
    def test_hump_scenario(self, tmp_path, capsys):
        out_dir = tmp_path / "hump"
        code, out, _ = run(["replicate", "--scenario", "hump",
                            "--out", str(out_dir)], capsys)
        assert code == 0
        assert "[PASS] hump: classified_inverted_u" in out
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["verdict"] == "InvertedU"

    def test_dominance_sweep(self, tmp_path, capsys):
        out_dir = tmp_path / "dom"
        code, out, _ = run(["replicate", "--scenario", "dominance-sweep",
                            "--out", str(out_dir)], capsys)
        assert code == 0
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["all_pass"]
        assert len(summary["table"]) == 100

    def test_unknown_scenario_exits_2(self, capsys):
        code, _, err = run(["replicate", "--scenario", "nope"], capsys)
        assert code == 2
        assert "nope" in err

    def test_digests_stable_across_thread_counts(self, tmp_path, capsys,
                                                 monkeypatch):
        digests = []
        for d, threads in (("t1", "1"), ("t2", "2")):
            monkeypatch.setenv("SUBSIDYSIM_THREADS", threads)
            code, _, _ = run(["replicate", "--scenario", "dominance-sweep",
                              "--out", str(tmp_path / d)], capsys)
            assert code == 0
            man = json.loads((tmp_path / d / "manifest.json").read_text())
            digests.append(man["digests"])
        assert digests[0] == digests[1]
