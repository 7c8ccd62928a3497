import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from hyperwave import pnm, synthetic
from hyperwave.audio_io import AudioBuffer, write_wav
from hyperwave.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main

SMALL_ARCH = "IC(5,15,4)PF(8)O"


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synthetic.write_corpus(root / "audio", synthetic.make_corpus(n_songs=6, duration_s=6.0))
    config = {"manifest": "audio/manifest.csv", "out_dir": str(root / "out"),
              "snippets_per_song": 2, "k": 2, "epochs": 2, "batch_size": 4,
              "architecture": SMALL_ARCH, "synth_steps": 5}
    (root / "run.json").write_text(json.dumps(config))
    cfg = str(root / "run.json")
    assert main(["extract", "--config", cfg]) == EXIT_OK
    assert main(["train", "--config", cfg]) == EXIT_OK
    return root, cfg


def test_extract_outputs(project):
    root, cfg = project
    store = root / "out" / "store"
    summary = json.loads((store / "summary.json").read_text())
    assert summary["songs"] == 6 and summary["snippets"] == 12 and summary["failures"] == []
    assert len(list(store.glob("*.tnsr"))) == 12
    sidecar = json.loads((store / "song000_s0.json").read_text())
    assert [p["height"] for p in sidecar["planes"]] == [128, 20, 12, 32, 7, 6]
    assert sidecar["song_id"] == "song000" and sidecar["label"] == "low"


def test_extract_rerun_is_byte_identical(project, tmp_path):
    root, cfg = project
    assert main(["extract", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    for path in sorted((root / "out" / "store").iterdir()):
        assert (tmp_path / "store" / path.name).read_bytes() == path.read_bytes(), path.name


def test_train_report_layout(project):
    root, _ = project
    rows = list(csv.DictReader((root / "out" / "train" / "report.csv").open()))
    assert len(rows) == 2
    assert list(rows[0]) == ["fold", "architecture", "test_loss", "precision@1", "precision@3"]
    for row in rows:
        assert row["architecture"] == SMALL_ARCH
        assert 0 <= float(row["precision@1"]) <= 100
        assert 0 <= float(row["precision@3"]) <= 100
    for fold in (0, 1):
        assert (root / "out" / "train" / f"fold{fold}.tnsc").exists()
        assert (root / "out" / "train" / f"fold{fold}_history.csv").exists()


def test_evaluate_reproduces_training_report(project):
    root, cfg = project
    assert main(["evaluate", "--config", cfg]) == EXIT_OK
    train_dir = root / "out" / "train"
    trained = list(csv.DictReader((train_dir / "report.csv").open()))
    evaluated = list(csv.DictReader((train_dir / "evaluation.csv").open()))
    for a, b in zip(trained, evaluated):
        assert a["precision@1"] == b["precision@1"]
        assert float(a["test_loss"]) == pytest.approx(float(b["test_loss"]), abs=2e-4)


def test_embed_pca_synth(project):
    root, cfg = project
    assert main(["embed", "--config", cfg]) == EXIT_OK
    emb = json.loads((root / "out" / "embed" / "embeddings.json").read_text())
    assert len(emb["ids"]) == 12 and emb["layer"] == "fc1"
    assert main(["pca", "--config", cfg]) == EXIT_OK
    lines = (root / "out" / "pca" / "projection.csv").read_text().splitlines()
    assert lines[0] == "id,label,pc1,pc2,pc3" and len(lines) == 13
    assert pnm.read_pnm(root / "out" / "pca" / "scatter.ppm").shape == (300, 900, 3)
    assert main(["synth", "--config", cfg, "--synth-target", "high"]) == EXIT_OK
    traj = list(csv.DictReader((root / "out" / "synth" / "trajectory.csv").open()))
    assert float(traj[-1]["probability"]) > float(traj[0]["probability"])
    assert main(["synth", "--config", cfg, "--synth-target", "polka"]) == EXIT_USAGE


def test_stage_hash_mismatch_is_config_error(project):
    _, cfg = project
    assert main(["train", "--config", cfg, "--n-mels", "64"]) == EXIT_USAGE
    assert main(["embed", "--config", cfg, "--lr", "0.5"]) == EXIT_USAGE


def test_usage_errors(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    (tmp_path / "bad.json").write_text('{"colour": "red"}')
    assert main(["train", "--config", str(tmp_path / "bad.json")]) == EXIT_USAGE
    (tmp_path / "arch.json").write_text('{"architecture": "IC(0,3,8)O"}')
    assert main(["train", "--config", str(tmp_path / "arch.json")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["dance"])
    assert info.value.code == EXIT_USAGE


def test_data_errors(tmp_path):
    (tmp_path / "m.csv").write_text("path,label,song_id\n")
    (tmp_path / "c.json").write_text(json.dumps({"manifest": "m.csv", "out_dir": str(tmp_path)}))
    assert main(["extract", "--config", str(tmp_path / "c.json")]) == EXIT_DATA
    assert main(["train", "--config", str(tmp_path / "c.json")]) == EXIT_DATA
    (tmp_path / "junk.wav").write_bytes(b"not audio")
    (tmp_path / "m.csv").write_text("path,label,song_id\njunk.wav,x,s1\n")
    assert main(["extract", "--config", str(tmp_path / "c.json")]) == EXIT_DATA
    summary = json.loads((tmp_path / "store" / "summary.json").read_text())
    assert summary["failures"][0]["song_id"] == "s1"
    assert main(["inspect", "--config", str(tmp_path / "c.json"),
                 "--audio", str(tmp_path / "junk.wav")]) == EXIT_DATA


def test_divergence_exit_code(project, tmp_path):
    root, cfg = project
    shutil.copytree(root / "out" / "store", tmp_path / "store")
    with np.errstate(all="ignore"):
        code = main(["train", "--config", cfg, "--out", str(tmp_path), "--lr", "1e6",
                     "--momentum", "0.99", "--epochs", "30", "--dtype", "float64"])
    assert code == EXIT_DIVERGED


def _inspect(tmp_path, samples):
    write_wav(tmp_path / "a.wav", AudioBuffer(samples, 22050))
    code = main(["inspect", "--audio", str(tmp_path / "a.wav"), "--out", str(tmp_path)])
    return code, tmp_path / "inspect"


def test_inspect_silence_is_dark(tmp_path):
    code, out = _inspect(tmp_path, np.zeros(5 * 22050))
    assert code == EXIT_OK
    listed = json.loads((out / "inspect.json").read_text())["files"]
    assert len(listed) == 9
    for name in ("stft_linear", "stft_log", "cqt", "chroma", "mel", "waveform"):
        assert not pnm.read_pnm(out / f"{name}.pgm").any(), name


def test_inspect_sine_band(tmp_path):
    t = np.arange(5 * 22050) / 22050
    code, out = _inspect(tmp_path, 0.5 * np.sin(2 * np.pi * 440 * t))
    assert code == EXIT_OK
    panel = pnm.read_pnm(out / "stft_linear.pgm")
    assert panel.shape == (1025, 216)
    # rows are drawn low frequency at the bottom
    bright_bins = 1024 - np.argmax(panel, axis=0)
    # edge frames see reflection padding and may spread one bin further
    assert np.all(np.abs(bright_bins[1:-1] - 440 * 2048 / 22050) <= 1)
    assert np.ptp(bright_bins) <= 2


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("hyperwave")
    cmd = [exe] if exe else [sys.executable, "-m", "hyperwave.cli"]
    result = subprocess.run([*cmd, "bogus"], capture_output=True, text=True)
    assert result.returncode == EXIT_USAGE
    assert "invalid choice" in result.stderr
