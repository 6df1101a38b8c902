import csv
import os

import pytest
from click.testing import CliRunner

from hgfnet.cli import EXIT_CONFIG, EXIT_DATA, load_config, main


@pytest.fixture
def runner():
    return CliRunner()


def write_config(path, **kwargs):
    lines = []
    for key, value in kwargs.items():
        if isinstance(value, (list, tuple)):
            lines.append(f"{key}: [{', '.join(map(str, value))}]")
        else:
            lines.append(f"{key}: {value}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path, runner):
        cfg = write_config(tmp_path / "c.yaml", bogus=1)
        result = runner.invoke(main, ["train", "--config", cfg])
        assert result.exit_code == EXIT_CONFIG
        assert "unknown config key" in result.output

    def test_missing_config_file(self, runner):
        result = runner.invoke(main, ["train", "--config", "/no/such/file.yaml"])
        assert result.exit_code == EXIT_CONFIG

    def test_flags_override_file(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.yaml", depth=3, width=16)
        from hgfnet.cli import merged_config

        merged = merged_config(cfg_path, {"depth": 5, "width": None})
        assert merged["depth"] == 5 and merged["width"] == 16

    def test_load_config_empty(self):
        assert load_config(None) == {}


class TestVerifyCommand:
    def test_all_checks_pass_and_listed_once(self, runner):
        result = runner.invoke(main, ["verify"])
        assert result.exit_code == 0
        lines = [ln for ln in result.output.splitlines() if "PASS" in ln or "FAIL" in ln]
        assert len(lines) == 6
        names = [ln.split("  ")[0].strip() for ln in lines]
        assert len(set(names)) == 6
        assert all("PASS" in ln for ln in lines)


class TestDatasetInfo:
    def test_spiral(self, runner):
        result = runner.invoke(main, ["dataset-info", "--dataset", "spiral"])
        assert result.exit_code == 0
        assert "spiral" in result.output and "2 features" in result.output

    def test_unknown_dataset(self, runner):
        result = runner.invoke(main, ["dataset-info", "--dataset", "imagenet"])
        assert result.exit_code == EXIT_CONFIG

    def test_fashion_without_data_dir(self, runner, monkeypatch):
        monkeypatch.delenv("HGFNET_DATA_DIR", raising=False)
        result = runner.invoke(main, ["dataset-info", "--dataset", "fashion_mnist"])
        assert result.exit_code == EXIT_CONFIG

    def test_fashion_missing_dir(self, runner):
        result = runner.invoke(
            main, ["dataset-info", "--dataset", "fashion_mnist", "--data-dir", "/nope"]
        )
        assert result.exit_code == EXIT_DATA


class TestTrain:
    def _config(self, tmp_path, out_dir):
        return write_config(
            tmp_path / "c.yaml",
            dataset="spiral",
            dataset_n=200,
            method="hgf",
            depth=2,
            width=8,
            lrs=[0.01],
            seeds=[0],
            epochs=2,
            output_dir=str(out_dir),
        )

    def test_writes_csv_and_snapshot(self, tmp_path, runner):
        out = tmp_path / "out"
        cfg = self._config(tmp_path, out)
        result = runner.invoke(main, ["train", "--config", cfg])
        assert result.exit_code == 0, result.output
        assert (out / "train.csv").exists() and (out / "train.npz").exists()
        with open(out / "train.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert all(r["metric"] == "test_accuracy" for r in rows)

    def test_rerun_metric_columns_identical(self, tmp_path, runner):
        out = tmp_path / "out"
        cfg = self._config(tmp_path, out)
        assert runner.invoke(main, ["train", "--config", cfg]).exit_code == 0
        first = (out / "train.csv").read_text()
        assert runner.invoke(main, ["train", "--config", cfg]).exit_code == 0
        second = (out / "train.csv").read_text()

        def metric_cols(text):
            return [row[:9] for row in csv.reader(text.splitlines())]

        assert metric_cols(first) == metric_cols(second)

    def test_requires_single_cell(self, tmp_path, runner):
        cfg = write_config(
            tmp_path / "c.yaml", dataset="spiral", dataset_n=100, lrs=[0.01, 0.02]
        )
        result = runner.invoke(main, ["train", "--config", cfg])
        assert result.exit_code == EXIT_CONFIG

    def test_snapshot_loadable(self, tmp_path, runner):
        from hgfnet.network import HgfNetwork
        from hgfnet.snapshot import load_model

        out = tmp_path / "out"
        cfg = self._config(tmp_path, out)
        assert runner.invoke(main, ["train", "--config", cfg]).exit_code == 0
        model = load_model(out / "train.npz")
        assert isinstance(model, HgfNetwork)
        assert model.input_dim == 2


class TestBench:
    def test_direct_writes_csv(self, tmp_path, runner):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.yaml", dataset="spiral", dataset_n=150, method="hgf",
            depth=2, width=8, lrs=[0.01], seeds=[0], epochs=2, output_dir=str(out),
        )
        result = runner.invoke(main, ["bench", "direct", "--config", cfg])
        assert result.exit_code == 0, result.output
        assert (out / "direct.csv").exists()
        assert not (out / "direct.svg").exists()
        assert "oracle lr" in result.output

    def test_plot_flag(self, tmp_path, runner):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.yaml", dataset="spiral", dataset_n=100, method="mlp",
            depth=2, width=4, lrs=[0.001], seeds=[0], epochs=1, output_dir=str(out),
        )
        result = runner.invoke(main, ["bench", "direct", "--config", cfg, "--plot"])
        assert result.exit_code == 0, result.output
        assert (out / "direct.svg").exists()

    def test_unknown_subcommand_usage_error(self, runner):
        result = runner.invoke(main, ["bench", "quantum"])
        assert result.exit_code == 2

    def test_failure_leaves_no_outputs(self, tmp_path, runner, monkeypatch):
        monkeypatch.delenv("HGFNET_DATA_DIR", raising=False)
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.yaml", dataset="fashion_mnist", output_dir=str(out)
        )
        result = runner.invoke(main, ["bench", "direct", "--config", cfg])
        assert result.exit_code == EXIT_CONFIG
        assert not out.exists() or not os.listdir(out)

    def test_input_data_never_mutated(self, tmp_path, runner):
        # The CLI reads IDX inputs; a run must leave the files byte-identical.
        import numpy as np

        from test_data import write_idx_images, write_idx_labels

        data_dir = tmp_path / "data"
        data_dir.mkdir()
        rng = np.random.default_rng(0)
        for stem_i, stem_l, n in (
            ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", 40),
            ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", 20),
        ):
            write_idx_images(data_dir / stem_i, rng.integers(0, 256, size=(n, 4, 4)).astype("uint8"))
            write_idx_labels(data_dir / stem_l, list(rng.integers(0, 3, size=n)))
        before = {p.name: p.read_bytes() for p in data_dir.iterdir()}
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.yaml", dataset="fashion_mnist", data_dir=str(data_dir),
            method="mlp", depth=2, width=4, lrs=[0.001], seeds=[0], epochs=1,
            output_dir=str(out),
        )
        result = runner.invoke(main, ["bench", "direct", "--config", cfg])
        assert result.exit_code == 0, result.output
        after = {p.name: p.read_bytes() for p in data_dir.iterdir()}
        assert before == after
