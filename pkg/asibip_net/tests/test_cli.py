import json
import subprocess
import sys

import pytest

from asibip_net.cli import main
from conftest import make_synthetic_dataset


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    manifest = make_synthetic_dataset(root / "ds", n_train=24, n_val=12, n_test=12)
    cfg = root / "cfg.yaml"
    cfg.write_text(
        "network: {lstm_hidden: 32, d_model: 64, n_heads: 4, n_layers: 1, tokens_per_branch: 8}\n"
        "train: {epochs: 30, patience: 30, learning_rate: 1.0e-3, batch_size: 8}\n"
    )
    run = root / "run"
    code = main(["train", "--manifest", str(manifest), "--out", str(run),
                 "--config", str(cfg), "--seed", "1"])
    assert code == 0
    return root, manifest, run / "best.pt", cfg


def _records(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.strip()]


def test_train_emits_summary(trained, capsys):
    root, manifest, ckpt, cfg = trained
    assert ckpt.exists()
    code = main(["train", "--manifest", str(manifest), "--out", str(root / "run2"),
                 "--config", str(cfg), "--seed", "1", "--epochs", "2"])
    assert code == 0
    rec = _records(capsys)[-1]
    assert rec["event"] == "training_done"
    assert rec["epochs_run"] == 2


def test_eval_writes_predictions_and_scores(trained, capsys, tmp_path):
    _, manifest, ckpt, _ = trained
    out = tmp_path / "preds.jsonl"
    code = main(["eval", "--manifest", str(manifest), "--checkpoint", str(ckpt), "--out", str(out)])
    assert code == 0
    rec = _records(capsys)[-1]
    assert rec["event"] == "eval_done"
    assert 0.0 <= rec["macro_f1"] <= 1.0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert {"sample_id", "pred", "confidence"} <= set(lines[0])
    assert len(lines[0]["confidence"]) == 6


def test_open_set_command(trained, capsys, tmp_path):
    _, manifest, ckpt, _ = trained
    out = tmp_path / "os_preds.jsonl"
    code = main(["open-set", "--manifest", str(manifest), "--checkpoint", str(ckpt),
                 "--out", str(out), "--threshold", "0.999"])
    assert code == 0
    rec = _records(capsys)[-1]
    assert rec["event"] == "open_set_done"
    assert rec["threshold"] == 0.999
    assert "open_set_auc" in rec  # test split contains following samples
    preds = {json.loads(l)["pred"] for l in out.read_text().splitlines()}
    assert 7 in preds  # something gets rejected at an extreme threshold


def test_console_script_installed():
    proc = subprocess.run([sys.executable, "-m", "asibip_net.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sweep-snr" in proc.stdout
