import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mog3p.cli import main
from mog3p.config import ConfigError, RunConfig

SVG_NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def blobs_csv(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["id,f1,f2,f3,kind"]
    for i in range(40):
        c = i % 2
        x = rng.normal(size=3) + (6.0 * c, 0.0, 0.0)
        lines.append(f"{i},{x[0]:.6f},{x[1]:.6f},{x[2]:.6f},{'ab'[c]}")
    p = tmp_path / "blobs.csv"
    p.write_text("\n".join(lines) + "\n")
    return p


def tiny_config(tmp_path, csv_path, **extra):
    cfg = {
        "version": 1,
        "dataset": {"path": str(csv_path), "label_column": "kind", "exclude_columns": ["id"]},
        "moea": {"population": 8, "generations": 1, "archive_size": 4},
        "gp": {"max_depth_init": 3},
        "objectives": {"inner_folds": 2},
        "cv": {"repeats": 1, "outer_folds": 2},
    }
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def header_stamp(path):
    return path.read_text().splitlines()[0]


def test_run_outputs_and_determinism(tmp_path, blobs_csv):
    cfg = tiny_config(tmp_path, blobs_csv)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(b), "--threads", "2"]) == 0
    names = ["report.csv", "archive.json", "history.csv", "manifest.json"]
    for n in names:
        assert (a / n).exists()
    assert (a / "archive.json").read_bytes() == (b / "archive.json").read_bytes()
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["seed"] == 7
    archive = json.loads((a / "archive.json").read_text())
    stamp = f"# seed=7 config_hash={manifest['config_hash']}"
    assert archive["config_hash"] == manifest["config_hash"] and archive["seed"] == 7
    assert header_stamp(a / "report.csv") == stamp == header_stamp(a / "history.csv")
    rows = (a / "report.csv").read_text().splitlines()[2:]
    assert [r.split(",")[0] for r in rows] == ["NaiveBayes", "1-NN", "Logistic", "Avg"]
    assert set(archive) >= {"version", "dataset", "seed", "runs"}
    assert {"repeat", "fold", "models"} <= set(archive["runs"][0])


def test_run_missing_label_column(tmp_path, blobs_csv, capsys):
    cfg = tiny_config(tmp_path, blobs_csv, dataset={"path": str(blobs_csv), "label_column": "nope"})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "nope" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, blobs_csv):
    cfg = tiny_config(tmp_path, blobs_csv, moea={"populaton": 8})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_config_round_trip_and_hash():
    cfg = RunConfig.from_dict({"seed": 3})
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again.raw == cfg.raw and again.config_hash() == cfg.config_hash()
    assert RunConfig.from_dict({"seed": 4}).config_hash() != cfg.config_hash()
    assert cfg.with_overrides(output_dir="elsewhere").config_hash() == cfg.config_hash()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"version": 2})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"objectives": {"aggregation": "median"}})
    paper = RunConfig.from_dict({}, paper_scale=True).settings()
    assert (paper.moea.population, paper.moea.generations, paper.plan.repeats, paper.plan.outer_folds) == (400, 100, 10, 10)


def test_unknown_baseline_method_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["baseline", "lda", "crabs", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_baseline_mda_crabs(tmp_path):
    assert main(["baseline", "mda", "crabs", "--out", str(tmp_path)]) == 0
    root = ET.parse(tmp_path / "mda_scatter.svg").getroot()
    circles = [e for e in root.iter(f"{SVG_NS}circle") if e.get("class") == "point"]
    assert len(circles) == 200
    assert len({c.get("fill") for c in circles}) == 4
    acc = (tmp_path / "mda_accuracy.csv").read_text().splitlines()
    assert acc[1] == "classifier,cv_accuracy" and len(acc) == 6
    assert float(acc[-1].split(",")[1]) >= 0.9
    coords = (tmp_path / "mda_coords.csv").read_text().splitlines()
    assert len(coords) == 2 + 200


def test_baseline_pca_rank_one(tmp_path):
    t = np.linspace(-1, 1, 30)
    lines = ["a,b,c"] + [f"{v},{2 * v},{'xy'[i % 2]}" for i, v in enumerate(t)]
    p = tmp_path / "line.csv"
    p.write_text("\n".join(lines) + "\n")
    assert main(["baseline", "pca", str(p), "--folds", "3", "--out", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "pca_coords.csv", delimiter=",", skiprows=2, usecols=(0, 1))
    assert np.max(np.abs(data[:, 1])) < 1e-8 * np.max(np.abs(data[:, 0]))
    root = ET.parse(tmp_path / "pca_scatter.svg").getroot()
    ys = {c.get("cy") for c in root.iter(f"{SVG_NS}circle")}
    assert len(ys) == 1  # second axis collapses onto a line


def test_baseline_missing_label_exits_2(tmp_path, blobs_csv):
    assert main(["baseline", "pca", str(blobs_csv), "--label", "nope", "--out", str(tmp_path)]) == 2


def test_mine_and_plot(tmp_path, blobs_csv):
    cfg = tiny_config(tmp_path, blobs_csv)
    run_dir = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--seed", "1", "--out", str(run_dir)]) == 0
    m1, m2 = tmp_path / "m1", tmp_path / "m2"
    assert main(["mine", str(run_dir / "archive.json"), "--out", str(m1)]) == 0
    assert main(["mine", str(run_dir / "archive.json"), "--out", str(m2)]) == 0
    for n in ("mining.json", "frontier.csv", "feature_frequency.csv", "classifier_summary.csv", "feature_frequency.svg"):
        assert (m1 / n).read_bytes() == (m2 / n).read_bytes()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert header_stamp(m1 / "frontier.csv") == f"# seed=1 config_hash={manifest['config_hash']}"
    bars = [e for e in ET.parse(m1 / "feature_frequency.svg").getroot().iter(f"{SVG_NS}rect") if e.get("class") == "bar"]
    assert len(bars) == 3
    assert main(["plot", str(run_dir / "archive.json"), "--label", "kind", "--exclude", "id", "--out", str(tmp_path / "p")]) == 0
    svgs = list((tmp_path / "p").glob("*.svg"))
    assert len(svgs) == 1
    pts = [e for e in ET.parse(svgs[0]).getroot().iter(f"{SVG_NS}circle") if e.get("class") == "point"]
    assert len(pts) == 40


def test_mine_schema_mismatch(tmp_path):
    p = tmp_path / "archive.json"
    p.write_text(json.dumps({"version": 99, "dataset": {}, "seed": 0, "runs": []}))
    assert main(["mine", str(p), "--out", str(tmp_path / "m")]) == 2


def test_mine_single_record_archive(tmp_path):
    doc = {
        "version": 1,
        "dataset": {"feature_names": ["a", "b", "c"]},
        "seed": 0,
        "runs": [
            {
                "repeat": 0,
                "fold": 0,
                "models": [
                    {
                        "expressions": ["(a + c)", "c"],
                        "objectives": {"c_error": 0.1, "v_index": 0.2, "s_size": 4},
                        "per_classifier": [{"name": "1-NN", "train_accuracy": 0.9, "test_accuracy": 0.8}],
                        "features_used": [0, 2],
                    }
                ],
            }
        ],
    }
    p = tmp_path / "archive.json"
    p.write_text(json.dumps(doc))
    assert main(["mine", str(p), "--out", str(tmp_path / "m")]) == 0
    rep = json.loads((tmp_path / "m" / "mining.json").read_text())
    assert len(rep["frontier"]) == 1
    assert rep["feature_frequency"] == {"a": 1, "b": 0, "c": 1}
