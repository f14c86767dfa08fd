import hashlib
import json
import os

import numpy as np
import pytest

from wavegraph.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from wavegraph.config import CONFIG_KEYS, RunConfig, build_run_config, parse_config_file, parse_value
from wavegraph.errors import ConfigError


def run_cli(*argv):
    return main(list(argv))


def dir_digest(path):
    h = hashlib.sha256()
    for root, _dirs, files in sorted(os.walk(path)):
        for name in sorted(files):
            with open(os.path.join(root, name), "rb") as fh:
                h.update(name.encode())
                h.update(fh.read())
    return h.hexdigest()


def synth_args(outdir, **over):
    base = {
        "synth_nodes": "60", "synth_classes": "3", "synth_modalities": "2",
        "synth_dims": "6,7", "synth_noise": "0.5", "synth_k": "3",
        "seed": "4",
    }
    base.update(over)
    argv = ["synth", "--out", str(outdir)]
    for k, v in base.items():
        argv += [f"--{k}", v]
    return argv


def train_args(datadir, outdir, **over):
    base = {
        "mode": "gwcn", "data": str(datadir), "out": str(outdir),
        "n_layers": "1", "scales": "0.6", "hidden_dims": "8",
        "cheby_order": "10", "wavelet_threshold": "1e-4",
        "dropout_rate": "0.1", "learning_rate": "0.05", "max_epochs": "15",
        "patience": "15", "seed": "1", "split": "fractional",
        "train_frac": "0.5", "val_frac": "0.3", "row_normalize": "false",
        "beta": "1e-4",
    }
    base.update(over)
    argv = ["train"]
    for k, v in base.items():
        argv += [f"--{k}", v]
    return argv


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "bundle"
    assert run_cli(*synth_args(out)) == EXIT_OK
    return out


class TestCmdSynth:
    def test_writes_bundle_layout(self, synth_dir):
        assert (synth_dir / "modality_0" / "edges.txt").exists()
        assert (synth_dir / "modality_1" / "features.txt").exists()
        assert (synth_dir / "correspondence_0_1.txt").exists()
        assert (synth_dir / "correspondence_1_0.txt").exists()

    def test_seed_repeated_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*synth_args(a)) == EXIT_OK
        assert run_cli(*synth_args(b)) == EXIT_OK
        assert dir_digest(a) == dir_digest(b)

    def test_invalid_class_count_exits_2(self, tmp_path):
        code = run_cli(*synth_args(tmp_path / "x", synth_classes="0"))
        assert code == EXIT_CONFIG


class TestCmdWavelet:
    def test_reports_identity_density_for_scale_zero(self, synth_dir, capsys):
        code = run_cli("wavelet", "--data", str(synth_dir), "--scales", "0",
                       "--cheby_order", "10", "--wavelet_threshold", "1e-4",
                       "--row_normalize", "false")
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        header, rows = lines[0], lines[1:]
        assert header.split() == ["modality", "scale", "q", "threshold",
                                  "nnz", "density", "oracle_err"]
        for row in rows:
            fields = row.split()
            n = 60
            assert int(fields[4]) == n          # identity nnz
            assert float(fields[5]) == pytest.approx(1.0 / n)
            assert float(fields[6]) == 0.0

    def test_small_graph_oracle_error_column(self, synth_dir, capsys):
        code = run_cli("wavelet", "--data", str(synth_dir),
                       "--scales", "0.5,1.0", "--cheby_order", "40",
                       "--wavelet_threshold", "0", "--row_normalize", "false")
        assert code == EXIT_OK
        rows = capsys.readouterr().out.strip().splitlines()[1:]
        assert len(rows) == 4  # 2 modalities x 2 scales
        for row in rows:
            assert float(row.split()[6]) <= 1e-3

    def test_missing_dataset_exits_2(self):
        assert run_cli("wavelet", "--data", "/nonexistent") == EXIT_CONFIG


class TestCmdTrain:
    def test_writes_stream_summary_snapshot(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run"
        code = run_cli(*train_args(synth_dir / "modality_0", out))
        assert code == EXIT_OK
        assert (out / "metrics.txt").exists()
        assert (out / "params.npz").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert 0.0 <= summary["mean_test_accuracy"] <= 1.0
        assert summary["best_epoch"] >= 1
        lines = (out / "metrics.txt").read_text().strip().splitlines()
        assert lines[0].startswith("epoch=1 train_loss=")
        for line in lines:
            parts = dict(kv.split("=") for kv in line.split())
            assert set(parts) == {"epoch", "train_loss", "val_loss", "val_acc"}

    def test_multimodal_with_one_modality_exits_2(self, synth_dir, tmp_path):
        code = run_cli(*train_args(synth_dir / "modality_0", tmp_path / "r",
                                   mode="m-gwcn"))
        assert code == EXIT_CONFIG

    def test_metric_stream_is_deterministic(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run_cli(*train_args(synth_dir, out1, mode="m-gwcn",
                                   alpha="0.001", gamma="0.001")) == EXIT_OK
        assert run_cli(*train_args(synth_dir, out2, mode="m-gwcn",
                                   alpha="0.001", gamma="0.001")) == EXIT_OK
        assert (out1 / "metrics.txt").read_bytes() == \
               (out2 / "metrics.txt").read_bytes()

    def test_mv_mode_trains_with_bundle_correspondences(self, synth_dir, tmp_path):
        code = run_cli(*train_args(synth_dir, tmp_path / "mv", mode="mv-gwcn"))
        assert code == EXIT_OK


class TestCmdEval:
    def test_eval_matches_train_exactly(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(*train_args(synth_dir / "modality_0", out)) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        capsys.readouterr()
        code = run_cli("eval", "--params", str(out / "params.npz"),
                       *train_args(synth_dir / "modality_0", out)[1:])
        assert code == EXIT_OK
        printed = capsys.readouterr().out
        line = [l for l in printed.splitlines() if l.startswith("test_acc_m0=")][0]
        assert float(line.split("=")[1]) == summary["test_accuracy"][0]

    def test_corrupted_snapshot_distinct_error(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(*train_args(synth_dir / "modality_0", out)) == EXIT_OK
        bad = tmp_path / "bad.npz"
        bad.write_bytes(b"not a numpy archive")
        code = run_cli("eval", "--params", str(bad),
                       *train_args(synth_dir / "modality_0", out)[1:])
        assert code == EXIT_RUNTIME

    def test_shape_mismatch_exits_nonzero(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli(*train_args(synth_dir / "modality_0", out)) == EXIT_OK
        code = run_cli("eval", "--params", str(out / "params.npz"),
                       *train_args(synth_dir / "modality_0", out,
                                   hidden_dims="12")[1:])
        assert code == EXIT_RUNTIME

    def test_eval_is_side_effect_free(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli(*train_args(synth_dir / "modality_0", out)) == EXIT_OK
        before = dir_digest(synth_dir)
        assert run_cli("eval", "--params", str(out / "params.npz"),
                       *train_args(synth_dir / "modality_0", out)[1:]) == EXIT_OK
        assert dir_digest(synth_dir) == before


class TestConfigPrecedence:
    NON_DEFAULTS = {
        "mode": "m-gwcn", "data": "somewhere", "out": "elsewhere",
        "scales": "0.1,0.2", "n_layers": "3", "hidden_dims": "4,5,6",
        "cheby_order": "7", "wavelet_threshold": "0.5",
        "coeff_method": "bessel_j", "dropout_rate": "0.25",
        "activation": "identity", "p_init": "uniform",
        "learning_rate": "0.5", "max_epochs": "9", "patience": "3",
        "seed": "123", "alpha": "0.9", "beta": "0.8", "gamma": "0.7",
        "lambda_wm": "0.6", "split": "per-class", "per_class": "2",
        "n_val": "11", "n_test": "12", "train_frac": "0.4",
        "val_frac": "0.2", "row_normalize": "false", "synth_nodes": "33",
        "synth_classes": "5", "synth_modalities": "3",
        "synth_dims": "1,2,3", "synth_noise": "0.05", "synth_k": "2",
    }

    @pytest.mark.parametrize("key", sorted(CONFIG_KEYS))
    def test_flag_beats_file_beats_default(self, key, tmp_path):
        default = getattr(RunConfig(), key)
        file_text = self.NON_DEFAULTS[key]
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(f"{key} = {file_text}\n")
        file_values = parse_config_file(str(cfg_file))
        from_file = build_run_config(file_values, None)
        assert getattr(from_file, key) == parse_value(key, file_text)
        assert getattr(from_file, key) != default or key in ("out",)
        # a flag with the default's textual form wins back over the file
        flag_values = {key: default}
        merged = build_run_config(file_values, flag_values)
        assert getattr(merged, key) == default

    def test_unknown_file_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("no_such_key = 1\n")
        with pytest.raises(ConfigError):
            parse_config_file(str(cfg_file))

    def test_comments_and_blank_lines(self, tmp_path):
        cfg_file = tmp_path / "ok.cfg"
        cfg_file.write_text("# comment\n\nseed = 9  # trailing\n")
        assert parse_config_file(str(cfg_file)) == {"seed": 9}

    def test_presets_parse(self):
        root = os.path.join(os.path.dirname(__file__), "..", "presets")
        for name in ("cora.cfg", "citeseer.cfg", "synth2.cfg"):
            values = parse_config_file(os.path.join(root, name))
            assert "mode" in values and "scales" in values
