"""
Tests for the geardiag command line: exit codes, the stderr error line and
the lighter commands. Full pipeline runs live in test_end_to_end.py.
"""

import json

import pytest

from cli import run
from cli.artifacts import LABEL_COLUMNS


def error_line(capsys) -> str:
    lines = capsys.readouterr().err.strip().splitlines()
    return lines[-1] if lines else ""


def write_labels(path, rows):
    lines = [",".join(["index"] + LABEL_COLUMNS)]
    lines += [",".join([name] + [str(v) for v in labels]) for name, labels in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        assert run([]) == 1
        assert error_line(capsys).startswith("geardiag-error code=1 kind=usage message=")

    def test_unknown_flag(self, capsys):
        assert run(["generate", "--bogus"]) == 1
        assert "code=1 kind=usage" in error_line(capsys)

    def test_unknown_command(self, capsys):
        assert run(["train-stage3"]) == 1

    def test_negative_seed(self, capsys):
        assert run(["--seed", "-1", "schema"]) == 1

    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"forest": {"contamination": 2}}))
        assert run(["--config", str(path), "schema"]) == 2
        line = error_line(capsys)
        assert line.startswith("geardiag-error code=2 kind=config message=")
        assert "forest.contamination" in line

    def test_config_from_environment(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "run.json"
        path.write_text("{broken")
        monkeypatch.setenv("GEARDIAG_CONFIG", str(path))
        assert run(["schema"]) == 2

    def test_error_line_is_single_line(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"forest": {"contamination": 2, "n_trees": 0}}))
        run(["--config", str(path), "schema"])
        err = capsys.readouterr().err.strip()
        assert len(err.splitlines()) == 1

    def test_missing_bundle_is_data_error(self, tmp_path, capsys):
        assert run(["detect", "--model", str(tmp_path / "none"), "--dataset", str(tmp_path / "d.json")]) == 3
        assert error_line(capsys).startswith("geardiag-error code=3 kind=data message=")

    def test_sweep_needs_two_values(self, tmp_path, capsys):
        code = run(["sweep", "--dimension", "window_s", "--values", "0.25", "--resolution-only",
                    "--out", str(tmp_path)])
        assert code == 1

    def test_sweep_rejects_bad_value(self, tmp_path, capsys):
        code = run(["sweep", "--dimension", "batch_size", "--values", "32,zero", "--out", str(tmp_path)])
        assert code == 2


class TestEvaluate:
    def test_label_files(self, tmp_path, capsys):
        predictions = write_labels(tmp_path / "p.csv", [("a", (1, 0, 1)), ("b", (0, 0, 0))])
        truth = write_labels(tmp_path / "t.csv", [("a", (1, 0, 0)), ("b", (0, 0, 0))])
        out = tmp_path / "m.csv"
        assert run(["evaluate", "--predictions", str(predictions), "--truth", str(truth),
                    "--out", str(out), "--json", str(tmp_path / "m.json")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["subset_accuracy"] == 0.5
        assert out.read_text().splitlines()[-1] == "subset,,,,,,,0.5"
        assert json.loads((tmp_path / "m.json").read_text())["count"] == 2

    def test_length_mismatch(self, tmp_path, capsys):
        predictions = write_labels(tmp_path / "p.csv", [("a", (1, 0, 1)), ("b", (0, 0, 0))])
        truth = write_labels(tmp_path / "t.csv", [("a", (1, 0, 0))])
        assert run(["evaluate", "--predictions", str(predictions), "--truth", str(truth),
                    "--out", str(tmp_path / "m.csv")]) == 3
        assert "Length mismatch" in error_line(capsys)
        assert not (tmp_path / "m.csv").exists()

    def test_id_mismatch(self, tmp_path, capsys):
        predictions = write_labels(tmp_path / "p.csv", [("a", (1, 0, 1))])
        truth = write_labels(tmp_path / "t.csv", [("z", (1, 0, 0))])
        assert run(["evaluate", "--predictions", str(predictions), "--truth", str(truth),
                    "--out", str(tmp_path / "m.csv")]) == 3

    def test_non_binary_label(self, tmp_path, capsys):
        predictions = write_labels(tmp_path / "p.csv", [("a", (2, 0, 1))])
        truth = write_labels(tmp_path / "t.csv", [("a", (1, 0, 0))])
        assert run(["evaluate", "--predictions", str(predictions), "--truth", str(truth),
                    "--out", str(tmp_path / "m.csv")]) == 3

    def test_nothing_to_evaluate(self, capsys):
        assert run(["evaluate"]) == 1

    def test_score_listing(self, tmp_path, capsys):
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "split,index,truth,s,signed,mean_path_length,anomalous\n"
            "train,train-0,healthy,0.4,0.1,6.0,0\n"
            "test,test-1,healthy,0.45,0.05,5.5,0\n"
            "test,test-2,damaged,0.7,-0.2,2.0,1\n"
            "test,test-3,damaged,0.48,0.02,5.0,0\n"
        )
        assert run(["evaluate", "--scores", str(scores), "--split", "test", "--out", str(tmp_path / "m.csv")]) == 0
        summary = json.loads(capsys.readouterr().out)
        row = summary["labels"][0]
        assert (row["tp"], row["fp"], row["tn"], row["fn"]) == (1, 0, 1, 1)
        assert row["precision"] == 1.0
        assert row["recall"] == 0.5

    def test_score_listing_without_split_rows(self, tmp_path, capsys):
        scores = tmp_path / "scores.csv"
        scores.write_text("split,index,truth,s,signed,mean_path_length,anomalous\n"
                          "train,train-0,healthy,0.4,0.1,6.0,0\n")
        assert run(["evaluate", "--scores", str(scores), "--split", "test"]) == 3


class TestLightCommands:
    def test_schema(self, capsys):
        assert run(["schema"]) == 0
        schema = json.loads(capsys.readouterr().out)
        assert "master_seed" in schema["properties"]

    def test_deterministic_flag_accepted(self, capsys):
        assert run(["--deterministic", "--log-level", "DEBUG", "schema"]) == 0

    def test_sweep_resolution_table(self, tmp_path, capsys):
        out = tmp_path / "sweep"
        assert run(["sweep", "--dimension", "window_s", "--values", "1/60,0.25", "--resolution-only",
                    "--out", str(out)]) == 0
        lines = (out / "resolution.csv").read_text().splitlines()
        assert lines[0].startswith("window_s,window_samples,bin_spacing_hz")
        assert len(lines) == 3
        assert lines[2].startswith("0.25,10000.0,4.0,")
        assert not (out / "sweep.csv").exists()

    def test_resolution_only_needs_window_dimension(self, tmp_path, capsys):
        assert run(["sweep", "--dimension", "batch_size", "--values", "16,32", "--resolution-only",
                    "--out", str(tmp_path)]) == 1


class TestSignalCommands:
    @pytest.fixture
    def signals(self, tmp_path, desk_config_file, capsys):
        out = tmp_path / "signals"
        assert run(["--config", str(desk_config_file), "generate", "--out", str(out)]) == 0
        capsys.readouterr()
        return out

    def test_generate_writes_six_sources(self, signals):
        files = sorted(signals.glob("*.f32"))
        assert len(files) == 6
        # 4 s at 4 kHz, float32
        assert all(f.stat().st_size == 4 * 4000 * 4 for f in files)
        index = json.loads((signals / "signals.json").read_text())
        assert index["sample_rate_hz"] == 4000.0
        assert {entry["health"] for entry in index["files"]} == {"healthy", "damaged"}

    def test_sweep_refuses_window_too_long_for_the_network(self, tmp_path, desk_config_file, capsys):
        """A 1 s window leaves one frame per 1 s segment; no value runs."""
        out = tmp_path / "sweep"
        code = run(["--config", str(desk_config_file), "sweep", "--dimension", "window_s",
                    "--values", "0.25,1.0", "--out", str(out)])
        assert code == 2
        line = error_line(capsys)
        assert line.startswith("geardiag-error code=2 kind=config message=")
        assert "window_s=1.0" in line
        assert not out.exists()

    def test_generate_csv(self, tmp_path, desk_config_file, capsys):
        out = tmp_path / "csv"
        assert run(["--config", str(desk_config_file), "generate", "--format", "csv", "--duration", "0.5",
                    "--out", str(out)]) == 0
        files = sorted(out.glob("*.csv"))
        assert len(files) == 6
        assert len(files[0].read_text().splitlines()) == 2000

    def test_same_seed_same_signals(self, tmp_path, desk_config_file, capsys):
        for name in ("a", "b"):
            run(["--config", str(desk_config_file), "generate", "--duration", "0.5", "--out", str(tmp_path / name)])
        for f in (tmp_path / "a").glob("*.f32"):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_spectrograms_and_render(self, tmp_path, signals, desk_config_file, capsys):
        out = tmp_path / "spectrograms"
        assert run(["--config", str(desk_config_file), "spectrogram", "--signals", str(signals),
                    "--out", str(out)]) == 0
        written = json.loads(capsys.readouterr().out)["spectrograms"]
        assert len(written) == 6
        target = out / "ring_gear_damaged.json"
        assert str(target) in written

        svg = tmp_path / "ring.svg"
        assert run(["--config", str(desk_config_file), "render", "--input", str(target), "--out", str(svg)]) == 0
        assert "<svg" in svg.read_text()
        table = svg.with_suffix(".csv").read_text().splitlines()
        assert table[0] == "interval_start_s,interval_cv,representativeness"

    def test_single_file_spectrogram(self, tmp_path, signals, desk_config_file, capsys):
        source = signals / "ring_gear_healthy.f32"
        out = tmp_path / "one.json"
        assert run(["--config", str(desk_config_file), "spectrogram", "--input", str(source),
                    "--sample-rate", "4000", "--channel", "ring gear", "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["frames"] == 76
        assert summary["bins"] == 251

    def test_single_file_spectrogram_needs_rate(self, tmp_path, signals, capsys):
        assert run(["spectrogram", "--input", str(signals / "ring_gear_healthy.f32"),
                    "--out", str(tmp_path / "one.json")]) == 1

    def test_render_rejects_unknown_artifact(self, tmp_path, signals, capsys):
        assert run(["render", "--input", str(signals / "signals.json"), "--out", str(tmp_path / "x.svg")]) == 3

    def test_render_manifest_missing_field_is_data_error(self, tmp_path, signals, desk_config_file, capsys):
        """A hand-edited manifest gives exit 3 and one error line, not a traceback."""
        out = tmp_path / "one.json"
        assert run(["--config", str(desk_config_file), "spectrogram", "--input", str(signals / "ring_gear_healthy.f32"),
                    "--sample-rate", "4000", "--channel", "ring gear", "--out", str(out)]) == 0
        capsys.readouterr()
        manifest = json.loads(out.read_text())
        del manifest["stft"]
        out.write_text(json.dumps(manifest))
        assert run(["--config", str(desk_config_file), "render", "--input", str(out),
                    "--out", str(tmp_path / "one.svg")]) == 3
        err = capsys.readouterr().err.strip().splitlines()
        assert err[-1].startswith("geardiag-error code=3 kind=data message=")
        assert "'stft'" in err[-1]
        assert not any(line.startswith("Traceback") for line in err)
