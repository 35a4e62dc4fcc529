import csv
import json

import pytest

from rarebasis import cli
from rarebasis.report import ANCHORS


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path)]
    if config is not None:
        path = tmp_path / "config.json"
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        argv += ["--config", str(path)]
    return cli.main(argv)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_angles_lacunary(tmp_path):
    assert run(tmp_path, "gen-angles", "--regime", "lacunary") == 0
    doc = json.loads((tmp_path / "angles_lacunary.json").read_text())
    assert len(doc["angles"]) == doc["spec"]["n"] == 24
    assert doc["certificate"]["t_form"] == "k"
    assert float(doc["certificate"]["C"]) == pytest.approx(0.4 * (1 / 0.6 - 1) / 2)
    assert doc["seed"] == 0


def test_gen_angles_power_records_j0(tmp_path):
    assert run(tmp_path, "gen-angles", "--regime", "power") == 0
    doc = json.loads((tmp_path / "angles_power.json").read_text())
    assert doc["j0"] == doc["certificate"]["j0"] == 30
    assert doc["certificate"]["notes"]


@pytest.mark.parametrize("config", ["{not json", "[1, 2]", {"bogus": 1}, {"regime": "spiral"},
                                    {"spec": {"lam": 0.7}}, {"k_min": "two"}])
def test_config_errors_exit_2(tmp_path, config):
    assert run(tmp_path, "gen-angles", config=config) == 2


def test_bad_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["verify", "--regime", "spiral"])
    assert e.value.code == 2


def test_capacity_exit_3(tmp_path):
    assert run(tmp_path, "verify", "--kmax", "25") == 3


def test_unknown_psi_exit_2(tmp_path):
    assert run(tmp_path, "blowup", config={"psis": ["nope"]}) == 2


def test_verify_lacunary_all_pass(tmp_path):
    assert run(tmp_path, "verify", "--regime", "lacunary") == 0
    summary = json.loads((tmp_path / "verify_lacunary.json").read_text())
    assert summary["passed"] and summary["failed"] == 0 and summary["seed"] == 0
    table = rows(tmp_path / "verify_lacunary.csv")
    assert table and all(r["passed"] == "True" for r in table)
    anchors = set(ANCHORS.values())
    assert all(r["anchor"] in anchors for r in table)
    assert all(r["method"] in ("exact", "monte-carlo", "certified-truncation") for r in table)
    assert all(r["seed"] != "None" for r in table)


def test_verify_zero_tolerance_flags_equalities(tmp_path):
    assert run(tmp_path, "verify", "--regime", "lacunary", config={"tolerance": 0, "k_max": 4}) == 1
    failed = [r for r in rows(tmp_path / "verify_lacunary.csv") if r["passed"] == "False"]
    assert failed and {r["check"] for r in failed} <= {"lemmaA.ii", "lemmaA.iii", "propB.ii"}


def test_verify_with_monte_carlo_rows(tmp_path):
    cfg = {"k_max": 4, "samples": 100_000}
    assert run(tmp_path, "verify", "--regime", "superlacunary", config=cfg) == 0
    mc = [r for r in rows(tmp_path / "verify_superlacunary.csv") if r["method"] == "monte-carlo"]
    assert len(mc) == 3


def test_blowup_three_regimes(tmp_path):
    for regime in cli.REGIMES:
        assert run(tmp_path, "blowup", "--regime", regime, config={"k_max": 5}) == 0
        table = rows(tmp_path / f"blowup_{regime}.csv")
        assert [int(r["k"]) for r in table] == [2, 3, 4, 5]
        assert list(table[0]) == cli.BLOWUP_COLUMNS + ["divergence_identity", "seed"]


def test_blowup_plot_data(tmp_path):
    assert run(tmp_path, "blowup", "--plot-data", config={"k_max": 4}) == 0
    pts = rows(tmp_path / "blowup_lacunary_plot.csv")
    assert [r["series"] for r in pts] == ["identity"] * 3
    assert all(float(r["y"]) > 0 for r in pts)


def test_blowup_empty_range(tmp_path):
    assert run(tmp_path, "blowup", config={"k_min": 5, "k_max": 4}) == 0
    text = (tmp_path / "blowup_lacunary.csv").read_text()
    assert text.splitlines() == [",".join(cli.BLOWUP_COLUMNS + ["divergence_identity", "seed"])]


def test_outputs_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        assert run(d, "blowup", "--regime", "power", "--seed", "7", config={"k_max": 4}) == 0
        assert run(d, "stokolos", "--regime", "power", "--seed", "7", config={"k_max": 4}) == 0
    for name in ("blowup_power.csv", "stokolos_power.csv", "stokolos_power.json", "stokolos_power_constants.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_stokolos_outputs(tmp_path):
    assert run(tmp_path, "stokolos", "--regime", "lacunary", config={"k_min": 3, "k_max": 5}) == 0
    table = rows(tmp_path / "stokolos_lacunary_constants.csv")
    assert [int(r["k"]) for r in table] == [3, 4, 5]
    doc = json.loads((tmp_path / "stokolos_lacunary.json").read_text())
    assert set(doc["uniform"]) == {"c1", "c2", "c3"}


def test_stokolos_needs_two_k(tmp_path):
    assert run(tmp_path, "stokolos", config={"k_min": 3, "k_max": 3}) == 2


def test_kakeya_outputs(tmp_path):
    code = run(tmp_path, "kakeya", "--regime", "lacunary", config={"k_max": 4})
    table = rows(tmp_path / "kakeya_lacunary.csv")
    assert [int(r["k"]) for r in table] == [2, 3, 4]
    assert all(float(r["excess"]) > 0 for r in table)
    report = rows(tmp_path / "kakeya_lacunary_report.csv")
    assert report[0]["detail"].startswith("single rectangle") and report[0]["passed"] == "True"
    # the per-k excess over 3 shrinks with k, so the increasing check is red
    assert code == 1


def test_probe_weak11(tmp_path):
    assert run(tmp_path, "probe-weak11", config={"grid": 64, "k_max": 3}) == 0
    doc = json.loads((tmp_path / "weak11_probe.json").read_text())
    assert doc["trials"] == 100 and doc["seed"] == 0 and not doc["unbounded_trend"]
    assert len(rows(tmp_path / "weak11_probe.csv")) == 100


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("RBL_THREADS", "2")
    assert run(tmp_path, "verify", config={"k_max": 4}) == 0
    monkeypatch.setenv("RBL_THREADS", "1")
    single = tmp_path / "one"
    single.mkdir()
    assert run(single, "verify", config={"k_max": 4}) == 0
    assert (tmp_path / "verify_lacunary.csv").read_bytes() == (single / "verify_lacunary.csv").read_bytes()
