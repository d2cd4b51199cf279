import csv
import json
import math

import numpy as np
import pytest

from pinscan.cli import RunConfig, dumps, field_grid, fmt, load_config, main
from pinscan.propagate import ExperimentSetup

PAIR = ExperimentSetup.double(0.5e-6, 2.0, 1e-3, 50e-6, 0.0, 4e-6).to_dict()


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_config_round_trip():
    cfg = RunConfig.from_dict({"setup": PAIR, "seed": 4, "pattern": {"n": 11, "z": 0.3},
                               "analyze": {"s2_values": [0.0, 1e-3]}})
    again = RunConfig.from_dict(json.loads(dumps(cfg.to_dict())))
    assert again == cfg
    assert RunConfig.from_dict({}).to_dict() == load_config(None).to_dict()


@pytest.mark.parametrize(
    "data",
    [
        {"bogus": 1},
        {"field": {"nx": 0}},
        {"field": {"z_min": 0.0}},
        {"count": {"width": -1e-6}},
        {"pattern": {"colour": "red"}},
        {"setup": {"wavelength": -1}},
        {"tolerance": 0},
    ],
)
def test_invalid_config_exit_1(tmp_path, data):
    assert main(["pattern", "--config", write_config(tmp_path, data), "--out", str(tmp_path / "o.csv")]) == 1


def test_malformed_json_and_bad_flags(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["pattern", "--config", str(p), "--out", str(tmp_path / "o.csv")]) == 1
    assert main(["pattern", "--out", str(tmp_path / "o.csv"), "--threads", "0"]) == 1
    assert main(["nonsense"]) == 1


def test_io_errors_exit_3(tmp_path):
    out = tmp_path / "missing" / "o.csv"
    assert main(["pattern", "--out", str(out)]) == 3
    assert main(["pattern", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.csv")]) == 3


def test_field_grid_symmetric_on_axis(tmp_path):
    setup = ExperimentSetup.single(0.5e-6, 2.0, 0.0, 50e-6, 0.0, 4e-6).to_dict()
    cfg = RunConfig.from_dict({"setup": setup, "field": {"x_min": -2e-3, "x_max": 2e-3, "nx": 41, "nz": 9}})
    g = field_grid(cfg)
    assert g.values.shape == (9, 41)
    scale = np.max(np.abs(g.values))
    assert np.max(np.abs(g.values - g.values[:, ::-1])) <= 1e-12 * scale


def test_field_command_writes_grid(tmp_path):
    cfg = write_config(tmp_path, {"field": {"nx": 31, "nz": 7}})
    out = tmp_path / "field.csv"
    assert main(["field", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["z", "x", "field"]
    assert len(rows) == 31 * 7
    meta = json.loads((tmp_path / "field.csv.json").read_text())
    assert meta["config"]["field"]["nx"] == 31
    assert meta["seed"] == 0
    values = np.array([[float(v) for v in r] for r in rows])
    assert np.all(np.isfinite(values))
    # the spindle is pinched near the entrance and widest in the middle
    z = values[:, 0]
    spread = [np.ptp(values[z == zz, 2]) for zz in np.unique(z)]
    assert spread[0] < max(spread)


def test_floats_have_17_digits(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["pattern", "--config", write_config(tmp_path, {"pattern": {"n": 5}}), "--out", str(out)]) == 0
    _, rows = read_csv(out)
    for r in rows:
        for v in r:
            assert float(v) == float(fmt(float(v)))
    assert fmt(0.1) == "0.10000000000000001"
    assert "0.10000000000000001" in dumps({"a": 0.1})


def test_double_slit_pattern_peak(tmp_path):
    out = tmp_path / "p.csv"
    cfg = write_config(tmp_path, {"setup": PAIR, "pattern": {"s2_min": -1e-3, "s2_max": 1e-3, "n": 81}})
    assert main(["pattern", "--config", cfg, "--out", str(out), "--threads", "3"]) == 0
    _, rows = read_csv(out)
    s2, p = np.array(rows, float).T
    assert s2[np.argmax(p)] == 0
    assert p.max() == pytest.approx(0.004122, abs=1e-6)


def test_single_slit_pattern_is_gaussian_about_entrance(tmp_path):
    setup = ExperimentSetup.single(0.5e-6, 2.0, 0.5e-3, 50e-6, 0.0, 4e-6).to_dict()
    out = tmp_path / "p.csv"
    cfg = write_config(tmp_path, {"setup": setup, "pattern": {"s2_min": -2e-3, "s2_max": 3e-3, "n": 101}})
    assert main(["pattern", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    s2, p = np.array(rows, float).T
    assert s2[np.argmax(p)] == pytest.approx(0.5e-3, abs=1e-12)
    # log of a Gaussian is an exact parabola
    coef = np.polyfit(s2, np.log(p), 2)
    assert np.max(np.abs(np.polyval(coef, s2) - np.log(p))) < 1e-9


def test_pattern_reruns_are_bit_exact_and_z_independent(tmp_path):
    def run(z, name):
        out = tmp_path / name
        cfg = write_config(tmp_path, {"setup": PAIR, "pattern": {"n": 41, "z": z}}, name + ".cfg")
        assert main(["pattern", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
        return out.read_text()

    a, b, c = run(0.5, "a.csv"), run(0.5, "b.csv"), run(1.9, "c.csv")
    assert a == b
    va = np.array([r.split(",") for r in a.splitlines()[1:]], float)
    vc = np.array([r.split(",") for r in c.splitlines()[1:]], float)
    assert np.max(np.abs(va[:, 1] / vc[:, 1] - 1)) < 1e-9


def test_analyze_report(tmp_path):
    out = tmp_path / "a.json"
    assert main(["analyze", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert [c["s2"] for c in rep["contours"]] == [0.0, 1e-3, 2e-3, 3e-3]
    assert rep["envelope_maximum"]["z"] == pytest.approx(1.743, abs=2e-3)
    for c in rep["contours"]:
        z = np.array([r["z"] for r in c["rows"]])
        x_pi = np.array([r["x_pi"] for r in c["rows"]])
        assert z[np.argmax(x_pi)] == pytest.approx(1.0, abs=0.03)
        assert np.all(np.diff([r["rms_width"] for r in c["rows"]]) > 0)
    assert rep["metadata"]["config"]["setup"]["exit"]["center"] == 3e-3


def test_analyze_rejects_pairs(tmp_path):
    cfg = write_config(tmp_path, {"setup": PAIR})
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "a.json")]) == 1


def test_verify_passes_and_fails_by_name(tmp_path):
    cfg = write_config(tmp_path, {"verify": {"n_random": 0}})
    out = tmp_path / "v.json"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["failures"] == []
    assert all(c["deviation"] <= c["tolerance"] for c in rep["checks"])
    assert main(["verify", "--config", cfg, "--out", str(out), "--tolerance", "1e-15"]) == 2
    rep = json.loads(out.read_text())
    assert not rep["passed"]
    assert any("quadrature" in name for name in rep["failures"])


def _count(tmp_path, name, **count):
    cfg = write_config(tmp_path, {"count": {"replications": 50, **count}, "seed": 3}, name + ".cfg")
    out = tmp_path / name
    assert main(["count", "--config", cfg, "--out", str(out)]) == 0
    return json.loads(out.read_text())


def test_count_report_and_determinism(tmp_path):
    a = _count(tmp_path, "a.json")
    b = _count(tmp_path, "b.json")
    a.pop("metadata"), b.pop("metadata")
    assert a == b
    assert a["result"]["ratio_estimate"] == pytest.approx(1.20, abs=0.02)
    assert a["error_budget"]["statistical"] == pytest.approx(0.025, rel=0.05)
    assert "PCG64" in a["generator"]


def test_count_scaling(tmp_path):
    small = _count(tmp_path, "s.json", expected_counts=4e4, replications=200)
    big = _count(tmp_path, "b.json", expected_counts=4e6, replications=200)
    ratio = small["replications"]["normalized_rms"] / big["replications"]["normalized_rms"]
    assert ratio == pytest.approx(10, rel=0.2)
    stat = small["error_budget"]["statistical"] / big["error_budget"]["statistical"]
    assert stat == pytest.approx(10, rel=1e-6)


def test_count_without_pin(tmp_path):
    rep = _count(tmp_path, "n.json", pin=False)
    assert rep["result"]["expected_with"] == rep["result"]["expected_without"]
    assert "error_budget" not in rep
    assert math.isclose(rep["replications"]["ratio_mean"], 1.0, abs_tol=3 * math.sqrt(2 / 4e4))
