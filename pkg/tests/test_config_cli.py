import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from classd import ConfigError
from classd.cli import main
from classd.config import config_overrides, emit, load_config, parse_config
from classd.experiments import run_compare, run_stability, run_sweep, run_tf

REPO = Path(__file__).resolve().parents[1]


def _doc(**over):
    doc = {
        "params": {"R": 8.0, "L": 1e-5, "C": 5.169e-7, "T": 1.0 / 384000.0,
                   "c1": 1.3318e5, "c2": 1.3763e10, "c3": -1.0747e14,
                   "omega1": 1.3195e5, "k": 0},
        "input": {"kind": "constant", "u0": 0.6},
        "experiment": "steady",
    }
    doc.update(over)
    return doc


def test_shipped_default_config_loads_reference_values():
    cfg = load_config(REPO / "configs" / "default.yaml")
    p = cfg.params
    assert p.R == 8.0
    assert p.L == 1e-5
    assert p.C == 0.5169e-6
    assert p.T == 1.0 / 384000.0
    assert p.c1 == 1.3318e5
    assert p.c2 == 1.3763e10
    assert p.c3 == -1.0747e14
    assert p.omega1 == 1.3195e5
    assert p.k == 0
    assert cfg.experiment == "compare"
    assert cfg.transient_periods == 20


def test_invalid_rc_flag_names_key():
    doc = _doc()
    doc["params"]["k"] = 2
    with pytest.raises(ConfigError, match="k"):
        parse_config(doc)


def test_validation_messages_name_keys():
    with pytest.raises(ConfigError, match="params.R"):
        parse_config(_doc(params={"R": "fast"}))
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(_doc(experiment="warp"))
    with pytest.raises(ConfigError, match="sweep.points"):
        parse_config(_doc(sweep={"parameter": "c1", "lo": 1.0, "hi": 2.0,
                                 "points": 1}))
    with pytest.raises(ConfigError, match="sweep.lo"):
        parse_config(_doc(sweep={"parameter": "c1", "lo": 3.0, "hi": 2.0,
                                 "points": 4}))
    with pytest.raises(ConfigError, match="input.kind"):
        parse_config(_doc(input={"kind": "triangle"}))


def test_emit_csv_roundtrip(tmp_path):
    records = [
        {"n": 1, "value": 0.123456789012345e-7, "coeff": complex(1.5e-3, -2.5)},
        {"n": 2, "value": -3.0, "coeff": complex(0.0, 1.0)},
    ]
    path = tmp_path / "out.csv"
    emit(records, path, "csv", {"experiment": "demo", "alpha": 0.25})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# experiment: demo")
    header = lines[2].split(",")
    assert header == ["n", "value", "coeff_re", "coeff_im"]
    row = lines[3].split(",")
    assert int(row[0]) == 1
    assert float(row[1]) == pytest.approx(0.123456789012345e-7, rel=1e-12)
    assert float(row[3]) == pytest.approx(-2.5, rel=1e-12)


def test_emit_json_precise_variant(tmp_path):
    path = tmp_path / "out.json"
    emit([{"x": 1.0 / 3.0}], path, "json", {"experiment": "demo"})
    doc = json.loads(path.read_text())
    assert doc["metadata"]["experiment"] == "demo"
    assert doc["records"][0]["x"] == pytest.approx(1.0 / 3.0)
    assert doc["precise"][0]["x"] == "3.333333333333e-01"


def test_emitted_output_deterministic(tmp_path):
    cfg = parse_config(_doc(experiment="tf",
                            tf={"f_lo": 100.0, "f_hi": 5000.0, "points": 7}))
    records, meta, _ = run_tf(cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(records, a, "csv", meta)
    emit(records, b, "csv", meta)
    assert a.read_bytes() == b.read_bytes()


def test_config_overrides():
    cfg = parse_config(_doc())
    cfg2 = config_overrides(cfg, c1=2.0e5, k=1, u0=0.25)
    assert cfg2.params.c1 == 2.0e5
    assert cfg2.params.k == 1
    assert cfg2.u0 == 0.25
    assert cfg2.config_hash() != cfg.config_hash()
    with pytest.raises(ConfigError):
        config_overrides(cfg, warp=9)


def test_sweep_with_failing_points():
    cfg = parse_config(_doc(
        experiment="sweep",
        sweep={"parameter": "R", "lo": -1.0, "hi": 8.0, "points": 3},
    ))
    records, meta, ok = run_sweep(cfg)
    assert ok
    assert len(records) == 3
    assert records[0]["error"] != ""          # negative resistance
    assert records[-1]["error"] == ""
    assert "spectral_radius" in records[-1]


def test_stability_runner(tmp_path):
    cfg = parse_config(_doc(experiment="stability"))
    records, meta, ok = run_stability(cfg)
    assert ok and meta["stable"]
    assert len(records) == 5
    mags = [r["abs"] for r in records]
    assert mags == sorted(mags, reverse=True)


def test_compare_constant_input_dc_row():
    cfg = parse_config(_doc(experiment="compare"))
    records, meta, ok = run_compare(cfg)
    assert ok
    assert len(records) == 1
    row = records[0]
    assert row["n"] == 0
    assert row["analytic"].real == pytest.approx(0.6, abs=1e-6)
    assert row["simulated"].real == pytest.approx(0.6, abs=1e-6)


def test_cli_steady_writes_data_and_figure(tmp_path):
    out = tmp_path / "steady.csv"
    code = main(["steady", "--u0", "0.3", "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert out.with_suffix(".png").exists()
    text = out.read_text()
    assert text.startswith("# config_hash:")
    assert "duty_cycle" in text


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(_doc(params={"R": -8.0})))
    code = main(["steady", "--config", str(bad), "--out",
                 str(tmp_path / "x.csv")])
    assert code == 2


def test_cli_compare_exit_codes(tmp_path):
    cfg_path = tmp_path / "cmp.yaml"
    doc = _doc(experiment="compare",
               input={"kind": "sine", "amplitude": 0.8, "frequency": 1000.0},
               transient_periods=2)
    doc["tolerances"] = {"fundamental_abs": 1e-12}
    cfg_path.write_text(yaml.safe_dump(doc))
    out = tmp_path / "cmp.csv"
    code = main(["compare", "--config", str(cfg_path), "--out", str(out),
                 "--no-plot"])
    assert code == 1          # absurd tolerance: tracked check must fail
    assert out.exists()       # the table is still written

    doc["tolerances"] = {"fundamental_abs": 5e-3, "harmonic_rel": 0.5}
    cfg_path.write_text(yaml.safe_dump(doc))
    code = main(["compare", "--config", str(cfg_path), "--out", str(out),
                 "--no-plot"])
    assert code == 0


def test_cli_unknown_config_file(tmp_path):
    code = main(["tf", "--config", str(tmp_path / "missing.yaml")])
    assert code == 2
