"""End-to-end command-line pipeline, exit codes, and replay determinism."""

import base64
import json

import numpy as np
import pytest

from muse.cli import main
from muse.data import check_musef

SMOKE_CONFIG = """\
seed = 5
data.n = 120
data.noise = 0.1
model.d_h = 4
model.n_linear = 2
model.m_seq = 2
model.epochs = 2
model.retrain_epochs = 2
model.batch_size = 32
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(SMOKE_CONFIG)
    return str(path)


def _pipeline(tmp_path, cfg, monkeypatch=None):
    """synth -> search -> retrain -> eval; returns report path."""
    data = str(tmp_path / "data.musef")
    ckpt = str(tmp_path / "ckpt.json")
    retrained = str(tmp_path / "retrained.json")
    report = str(tmp_path / "report.csv")
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["search", "--config", cfg, "--data", data, "--out", ckpt]) == 0
    assert main(["retrain", "--input", ckpt, "--data", data, "--out", retrained]) == 0
    assert main(["eval", "--input", retrained, "--data", data, "--out", report]) == 0
    return data, ckpt, retrained, report


def test_full_pipeline_and_replay_bytes(tmp_path, cfg, capsys):
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    a = _pipeline(a_dir, cfg)
    b = _pipeline(b_dir, cfg)
    capsys.readouterr()
    for pa, pb in zip(a, b):
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read(), pa
    report_text = open(a[3]).read()
    assert "# muse-report 1" in report_text
    assert "MUSE-discrete," in report_text
    assert "# config: model.d_h = 4" in report_text


def test_synth_writes_valid_musef(tmp_path, cfg, capsys):
    out = str(tmp_path / "d.musef")
    assert main(["synth", "--config", cfg, "--out", out]) == 0
    info = check_musef(out)
    assert info["samples"] == 120 and info["seed"] == 5
    assert info["sha256"] in capsys.readouterr().out


def test_muse_seed_env_overrides_config(tmp_path, cfg, monkeypatch, capsys):
    monkeypatch.setenv("MUSE_SEED", "9")
    out = str(tmp_path / "d.musef")
    assert main(["synth", "--config", cfg, "--out", out]) == 0
    assert check_musef(out)["seed"] == 9
    monkeypatch.setenv("MUSE_SEED", "not-a-number")
    assert main(["synth", "--config", cfg, "--out", out]) == 2
    capsys.readouterr()


def test_corrupt_roundtrip_and_double_corrupt(tmp_path, cfg, capsys):
    data = str(tmp_path / "d.musef")
    partial = str(tmp_path / "p.musef")
    again = str(tmp_path / "pp.musef")
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["corrupt", "--input", data, "--out", partial, "--seed", "4"]) == 0
    info = check_musef(partial)
    assert info["text_absent"] + info["image_absent"] == 120
    # corrupting already-partial data violates the protocol contract
    assert main(["corrupt", "--input", partial, "--out", again, "--seed", "4"]) == 2
    capsys.readouterr()


def test_discretize_and_losses_dump(tmp_path, cfg, capsys):
    data = str(tmp_path / "d.musef")
    ckpt = str(tmp_path / "c.json")
    disc = str(tmp_path / "disc.json")
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["search", "--config", cfg, "--data", data, "--out", ckpt]) == 0
    assert main(["discretize", "--input", ckpt, "--out", disc]) == 0
    payload = json.load(open(disc))
    assert payload["mode"] == "discrete" and "chosen" in payload
    # a discrete checkpoint cannot be discretized again
    assert main(["discretize", "--input", disc, "--out", disc + "2"]) == 2
    capsys.readouterr()
    dump = str(tmp_path / "losses.dat")
    assert main(["report", "--losses", ckpt, "--out", dump]) == 0
    lines = open(dump).read().splitlines()
    assert lines[0].startswith("# epoch")
    assert len(lines) == 3  # header + 2 epochs
    capsys.readouterr()


def test_eval_splits_and_labels(tmp_path, cfg, capsys):
    data, ckpt, _, _ = _pipeline(tmp_path, cfg)
    assert main(["eval", "--input", ckpt, "--data", data, "--split", "valid",
                 "--label", "probe"]) == 0
    out = capsys.readouterr().out
    assert "probe" in out
    assert "wall clock:" in out


def test_report_renders_and_guards(tmp_path, cfg, capsys):
    _, _, _, report = _pipeline(tmp_path, cfg)
    assert main(["report", "--input", report]) == 0
    out = capsys.readouterr().out
    assert "label" in out and "MUSE-discrete" in out
    assert main(["report", "--input", report, "--losses", report]) == 2
    assert main(["report"]) == 2
    capsys.readouterr()


def test_ablate_operators_cli(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(SMOKE_CONFIG + "model.linear_ops = Skip,Tanh\n")
    cfg = str(cfg_path)
    data = str(tmp_path / "d.musef")
    ckpt = str(tmp_path / "c.json")
    report = str(tmp_path / "abl.csv")
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["search", "--config", cfg, "--data", data, "--out", ckpt]) == 0
    assert main(["ablate-operators", "--input", ckpt, "--data", data,
                 "--which", "linear", "--out", report]) == 0
    body = open(report).read()
    assert "All Operators," in body
    assert "1 Operators," in body
    assert "2 Operators," not in body.replace("All Operators,", "")  # 2-op space: All then 1
    capsys.readouterr()


def test_ablate_paths_cli(tmp_path, cfg, capsys):
    report = str(tmp_path / "paths.csv")
    assert main(["ablate-paths", "--config", cfg, "--out", report]) == 0
    body = open(report).read()
    for label in ("MUSE,", "w/o Linear,", "w/o Sequence,", "w/o Auxiliary,"):
        assert label in body
    capsys.readouterr()


def test_exit_codes_for_bad_inputs(tmp_path, cfg, capsys):
    junk = tmp_path / "junk.musef"
    junk.write_bytes(b"definitely not a feature file")
    missing = str(tmp_path / "nope.musef")
    out = str(tmp_path / "x")
    assert main(["synth", "--config", str(tmp_path / "no-such-config"), "--out", out]) == 2
    bad_cfg = tmp_path / "bad.txt"
    bad_cfg.write_text("data.rule = parity\n")
    assert main(["synth", "--config", str(bad_cfg), "--out", out]) == 2
    typo_cfg = tmp_path / "typo.txt"
    typo_cfg.write_text("data.noize = 0.1\n")
    assert main(["synth", "--config", str(typo_cfg), "--out", out]) == 2
    assert main(["corrupt", "--input", str(junk), "--out", out, "--seed", "1"]) == 3
    assert main(["corrupt", "--input", missing, "--out", out, "--seed", "1"]) == 3
    assert main(["search", "--config", cfg, "--data", missing, "--out", out]) == 3
    assert main(["eval", "--input", str(tmp_path / "no.json"), "--data", missing]) == 3
    err = capsys.readouterr().err
    assert "error:" in err


def test_numeric_failures_exit_four(tmp_path, cfg, capsys):
    data = str(tmp_path / "d.musef")
    ckpt = tmp_path / "c.json"
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["search", "--config", cfg, "--data", data, "--out", str(ckpt)]) == 0
    payload = json.loads(ckpt.read_text())
    name, rec = next(iter(payload["params"].items()))
    poisoned = np.full(rec["shape"], np.nan)
    rec["data"] = base64.b64encode(poisoned.astype("<f8").tobytes()).decode("ascii")
    bad = tmp_path / "poisoned.json"
    bad.write_text(json.dumps(payload))
    assert main(["eval", "--input", str(bad), "--data", data]) == 4
    capsys.readouterr()
