import json
import os

import pytest

from subsidysim.errors import ConfigError, SchemaViolation
from subsidysim.panel_io import (
    PANEL_COLUMNS,
    dump_config,
    load_config,
    panel_to_csv,
    read_ground_truth,
    read_panel_csv,
    sha256_of_file,
    write_ground_truth,
    write_panel_csv,
)
from subsidysim.simulate import ScenarioConfig, simulate_panel
from test_estimators import handmade_panel


class TestPanelCsv:
    def test_round_trip_byte_stable(self, tmp_path):
        rows, _ = simulate_panel(ScenarioConfig(seed=23, n_hcps=40))
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        write_panel_csv(rows, str(p1))
        rows2 = read_panel_csv(str(p1))
        write_panel_csv(rows2, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_parsed_values_match(self, tmp_path):
        rows = handmade_panel()
        path = tmp_path / "p.csv"
        write_panel_csv(rows, str(path))
        back = read_panel_csv(str(path))
        assert len(back) == len(rows)
        for a, b in zip(rows, back):
            assert a.hcp_id == b.hcp_id
            assert a.period == b.period
            assert a.ln_price == b.ln_price  # 17 digits round-trips exactly
            assert a.s2 == b.s2 and a.s2c == b.s2c

    def test_header_mandatory(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("")
        with pytest.raises(SchemaViolation):
            read_panel_csv(str(path))

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(SchemaViolation, match="header"):
            read_panel_csv(str(path))

    def _one_row(self, **overrides):
        base = dict(zip(PANEL_COLUMNS, [
            "h0", "0", "3.5", "2.5", "2.0", "0", "0", "3.2",
            "clinic", "dsl", "KS", "2", "25",
        ]))
        base.update(overrides)
        return ",".join(PANEL_COLUMNS) + "\n" + ",".join(
            base[c] for c in PANEL_COLUMNS) + "\n"

    @pytest.mark.parametrize("col,bad,msg", [
        ("ln_price", "", "missing value"),
        ("ln_price", "abc", "not a float"),
        ("ln_price", "nan", "non-finite"),
        ("period", "2", "period"),
        ("s2", "1.5", "outside"),
        ("n_requests", "0", "positive"),
        ("n_requests", "2.5", "integer"),
    ])
    def test_field_validation(self, tmp_path, col, bad, msg):
        path = tmp_path / "p.csv"
        path.write_text(self._one_row(**{col: bad}))
        with pytest.raises(SchemaViolation, match=msg):
            read_panel_csv(str(path))

    def test_field_count_checked(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(",".join(PANEL_COLUMNS) + "\nh0,0,1.0\n")
        with pytest.raises(SchemaViolation, match="fields"):
            read_panel_csv(str(path))

    def test_seventeen_digit_floats(self):
        rows = [handmade_panel()[0]]
        text = panel_to_csv(rows)
        assert format(rows[0].ln_price, ".17g") in text


class TestGroundTruthSidecar:
    def test_round_trip(self, tmp_path):
        _, truth = simulate_panel(ScenarioConfig(seed=24, n_hcps=30))
        path = tmp_path / "gt.json"
        write_ground_truth(truth, str(path))
        back = read_ground_truth(str(path))
        assert back.tau_12 == truth.tau_12
        assert back.tau_12c == truth.tau_12c
        assert back.facility_records == truth.facility_records
        assert back.hcp_switched == truth.hcp_switched


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = ScenarioConfig(seed=9, n_hcps=12, tau=0.7, a_range=(80.0, 120.0))
        path = tmp_path / "s.ini"
        path.write_text(dump_config(cfg))
        back = load_config(str(path))
        assert back == cfg

    def test_minimal(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[scenario]\nseed = 3\nn_hcps = 5\n")
        cfg = load_config(str(path))
        assert cfg.seed == 3 and cfg.n_hcps == 5
        assert cfg.tau == ScenarioConfig(seed=0).tau

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[scenario]\nseed = 3\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config(str(path))

    def test_seed_mandatory(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[scenario]\nn_hcps = 5\n")
        with pytest.raises(ConfigError, match="seed"):
            load_config(str(path))

    def test_bad_value(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[scenario]\nseed = 3\ntau = high\n")
        with pytest.raises(ConfigError, match="tau"):
            load_config(str(path))

    def test_seed_override(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[scenario]\nseed = 3\n")
        assert load_config(str(path), seed_override=77).seed == 77


class TestDigest:
    def test_sha256_matches_content(self, tmp_path):
        p = tmp_path / "x"
        p.write_bytes(b"abc")
        import hashlib
        assert sha256_of_file(str(p)) == hashlib.sha256(b"abc").hexdigest()
