import json
import subprocess
import sys

import numpy as np
import pytest

from gspest.cli import main
from gspest.estimators import estimator_from_json
from gspest.graphs import build_laplacian, read_edge_list
from gspest.moments import read_training_csv
from gspest.rng import generator
from tests.test_harness import small_config, write_grid_csv
from tests.test_models import random_grid


@pytest.fixture()
def config_path(tmp_path):
    config = small_config(tmp_path)
    import dataclasses

    doc = {
        k: list(v) if isinstance(v, tuple) else v
        for k, v in dataclasses.asdict(config).items()
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_entry_point_runs():
    proc = subprocess.run(
        ["gspest", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "graph" in proc.stdout and "experiment" in proc.stdout


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["graph", "build", "--out", "x.csv", "--frobnicate"])
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_missing_config_file_is_config_error(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code = main(
        ["graph", "build", "--out", str(out), "--config", str(tmp_path / "no.json")]
    )
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_graph_build_writes_edge_list(tmp_path, config_path, capsys):
    out = tmp_path / "graph.csv"
    assert main(["graph", "build", "--out", str(out), "--config", config_path]) == 0
    assert "12 vertices" in capsys.readouterr().out
    graph = read_edge_list(out)
    assert graph.n_vertices == 12
    assert build_laplacian(graph).is_connected()


def test_graph_perturb_round_trip(tmp_path, config_path):
    base = tmp_path / "base.csv"
    main(["graph", "build", "--out", str(base), "--config", config_path])
    out = tmp_path / "more.csv"
    code = main(
        [
            "graph", "perturb", "--graph", str(base), "--mode", "add-edges",
            "--count", "2", "--out", str(out), "--config", config_path,
        ]
    )
    assert code == 0
    before = read_edge_list(base)
    after = read_edge_list(out)
    assert after.n_edges == before.n_edges + 2
    assert after.n_vertices == before.n_vertices


def test_graph_perturb_vertices(tmp_path, config_path):
    out = tmp_path / "grown.csv"
    code = main(
        [
            "graph", "perturb", "--mode", "add-vertices", "--count", "1",
            "--out", str(out), "--config", config_path, "--seed", "3",
        ]
    )
    assert code == 0
    assert read_edge_list(out).n_vertices == 13


def test_dataset_fit_eval_flow(tmp_path, config_path, capsys):
    prefix = tmp_path / "train"
    code = main(
        ["dataset", "generate", "--count", "50", "--out", str(prefix),
         "--config", config_path]
    )
    assert code == 0
    x_path, g_path = f"{prefix}-x.csv", f"{prefix}-g.csv"
    from gspest.harness import ExperimentConfig, build_model

    model = build_model(ExperimentConfig.from_file(config_path))
    ts = read_training_csv(model.sg, x_path, g_path)
    assert ts.count == 50

    est_path = tmp_path / "est.json"
    code = main(
        ["fit", "--filter", "lpi", "--dataset", str(prefix), "--out", str(est_path),
         "--config", config_path]
    )
    assert code == 0
    est = estimator_from_json(est_path.read_text())
    assert est.label == "lpi-gsp"
    assert est.spec.kind == "lpi"

    capsys.readouterr()
    code = main(["eval", "--estimator", str(est_path), "--config", config_path])
    assert code == 0
    out = capsys.readouterr().out
    assert "lpi-gsp" in out and "mse" in out


def test_fit_from_seeded_draws(tmp_path, config_path):
    est_path = tmp_path / "gsp.json"
    code = main(
        ["fit", "--filter", "gsp", "--out", str(est_path), "--config", config_path]
    )
    assert code == 0
    est = estimator_from_json(est_path.read_text())
    assert est.label == "gsp-lmmse"
    assert est.gain.shape == (12, 12)


def test_fit_singular_exits_two(tmp_path, capsys):
    grid = random_grid(generator(8, "cli-grid"), 10, extra=0.5)
    grid_path = tmp_path / "grid.csv"
    write_grid_csv(grid, grid_path)
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps({"grid": str(grid_path), "sigma2": 0.0, "training_size": 4})
    )
    est_path = tmp_path / "est.json"
    code = main(
        ["fit", "--filter", "lmmse", "--out", str(est_path), "--config", str(config)]
    )
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_experiment_a_csv(tmp_path, config_path, capsys):
    out = tmp_path / "exp-a.csv"
    code = main(["experiment", "a", "--out", str(out), "--config", config_path])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "estimator,scenario,param,value,mse,stderr,wall_ms"
    assert len(lines) == 1 + 2 * 7 + 1  # two P values x seven estimators + P-infinity
    assert "rows" in capsys.readouterr().out


def test_experiment_b_csv(tmp_path, config_path):
    out = tmp_path / "exp-b.csv"
    code = main(["experiment", "b", "--out", str(out), "--config", config_path])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 2 * 7  # counts x reps x estimators


def test_runtime_csv(tmp_path, config_path, capsys):
    out = tmp_path / "runtime.csv"
    code = main(["runtime", "--out", str(out), "--config", config_path])
    assert code == 0
    text = capsys.readouterr().out
    assert "median fit" in text
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 7


def test_seed_override_changes_dataset(tmp_path, config_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    c = tmp_path / "c"
    for prefix, seed in ((a, None), (b, "123"), (c, "123")):
        argv = ["dataset", "generate", "--count", "20", "--out", str(prefix),
                "--config", config_path]
        if seed:
            argv += ["--seed", seed]
        assert main(argv) == 0
    xa = np.loadtxt(f"{a}-x.csv", delimiter=",")
    xb = np.loadtxt(f"{b}-x.csv", delimiter=",")
    xc = np.loadtxt(f"{c}-x.csv", delimiter=",")
    assert not np.array_equal(xa, xb)
    assert np.array_equal(xb, xc)


def test_bundled_grid_is_default(tmp_path):
    out = tmp_path / "ieee.csv"
    assert main(["graph", "build", "--out", str(out)]) == 0
    assert read_edge_list(out).n_vertices == 118
