import csv
import json

import numpy as np
import pytest

from mcforest import read_csv, save_scenario, scenario_from_tables, EstimatorKind
from mcforest.cli import main


@pytest.fixture(scope="module")
def tiny_scenario_file(tmp_path_factory):
    # small studies keep the fixed-size CLI forests fast
    path = tmp_path_factory.mktemp("scn") / "tiny.json"
    save_scenario(scenario_from_tables("high", "high", n_primary=80, n_aux=80, name="cli-cell"), path)
    return str(path)


def test_generate_writes_both_studies(tmp_path, tiny_scenario_file):
    out = tmp_path / "pair.csv"
    assert main(["generate", "--scenario", tiny_scenario_file, "--seed", "3", "--out", str(out)]) == 0
    data = read_csv(out)
    assert data.n == 160
    assert set(np.unique(data.S)) == {0.0, 1.0}
    assert data.tau_true is not None


def test_generate_accepts_preset_names(tmp_path):
    out = tmp_path / "pair.csv"
    code = main(["generate", "--scenario", "none-heterogeneity/low/rho0.2/diff-ps",
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    assert read_csv(out).n == 1000


def test_fit_writes_per_estimator_columns(tmp_path, tiny_scenario_file):
    pair_csv = tmp_path / "pair.csv"
    main(["generate", "--scenario", tiny_scenario_file, "--seed", "5", "--out", str(pair_csv)])
    data = read_csv(pair_csv)
    primary = data.subset(np.flatnonzero(data.S == 0.0))
    aux = data.subset(np.flatnonzero(data.S == 1.0))
    train_csv, aux_csv, test_csv = tmp_path / "train.csv", tmp_path / "aux.csv", tmp_path / "test.csv"
    from mcforest import write_csv

    write_csv(primary.subset(np.arange(0, 40)), train_csv)
    write_csv(aux, aux_csv)
    write_csv(primary.subset(np.arange(40, 80)), test_csv)

    out = tmp_path / "preds.csv"
    code = main(["fit", "--train", str(train_csv), "--aux", str(aux_csv),
                 "--test", str(test_csv), "--out", str(out), "--seed", "2"])
    assert code == 0
    with open(out, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [k.value for k in EstimatorKind]
    assert len(rows) == 1 + 40
    values = np.array(rows[1:], dtype=float)
    assert np.isfinite(values).all()


def test_simulate_and_report_round_trip(tmp_path, tiny_scenario_file):
    out_dir = tmp_path / "study"
    code = main(["simulate", "--scenario", tiny_scenario_file, "--reps", "2",
                 "--seed", "4", "--out", str(out_dir), "--svg"])
    assert code == 0
    long_csv = out_dir / "results_long.csv"
    assert long_csv.exists()
    assert (out_dir / "results_long_agg.csv").exists()
    assert (out_dir / "results.svg").exists()
    lines = long_csv.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 2 * len(EstimatorKind)

    (out_dir / "results_long_agg.csv").unlink()
    assert main(["report", "--in", str(out_dir), "--svg"]) == 0
    assert (out_dir / "results_long_agg.csv").exists()


def test_errors_are_single_json_lines(tmp_path, capsys):
    code = main(["generate", "--scenario", "nonsense-preset", "--out", str(tmp_path / "x.csv")])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert "error" in payload and "nonsense-preset" in payload["error"]


def test_usage_errors_are_single_json_lines(capsys):
    code = main(["simulate", "--scenario", "x"])  # --out missing
    assert code == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert "--out" in json.loads(err[0])["error"]


def test_missing_file_error_is_nonzero(tmp_path, capsys):
    code = main(["fit", "--train", str(tmp_path / "no.csv"), "--aux", str(tmp_path / "no.csv"),
                 "--test", str(tmp_path / "no.csv"), "--out", str(tmp_path / "o.csv")])
    assert code == 1
    assert json.loads(capsys.readouterr().err.strip())["error"]
