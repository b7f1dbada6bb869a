"""End-to-end command-line tests over the bundled demo assets."""

import json
import os


from focore.cli import (
    EXIT_CONNECTIVITY,
    EXIT_OK,
    EXIT_VALIDATION,
    main,
)

DEMO = os.path.join(os.path.dirname(__file__), "..", "demo")


def demo(name):
    return os.path.join(DEMO, name)


class TestDecode:
    def test_happy_path(self, tmp_path, capsys):
        rc = main(
            [
                "--model", demo("model_dominant.json"),
                "--out", str(tmp_path),
                "decode", demo("task_confidence.json"),
            ]
        )
        assert rc == EXIT_OK
        for name in ("sequence.json", "metrics.json", "trace.jsonl"):
            assert (tmp_path / name).exists()
        seq = json.loads((tmp_path / "sequence.json").read_text())
        assert len(seq["generated"]) == 32

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "--model", demo("model_dominant.json"),
            "decode", demo("task_focore_a.json"),
        ]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        for name in ("sequence.json", "metrics.json", "trace.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_validation_error_names_constraint(self, tmp_path, capsys):
        bad = tmp_path / "bad_task.json"
        bad.write_text(
            json.dumps(
                {"prompt": [0], "gen_length": 30, "block_length": 32,
                 "strategy": "confidence"}
            )
        )
        rc = main(
            ["--model", demo("model_dominant.json"), "--out", str(tmp_path),
             "decode", str(bad)]
        )
        assert rc == EXIT_VALIDATION
        assert "divide" in capsys.readouterr().err

    def test_unreachable_endpoint(self, tmp_path, capsys):
        rc = main(
            ["--endpoint", "http://127.0.0.1:1", "--out", str(tmp_path),
             "decode", demo("task_confidence.json")]
        )
        assert rc == EXIT_CONNECTIVITY
        assert "127.0.0.1" in capsys.readouterr().err

    def test_no_model_source(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("FOCORE_ENDPOINT", raising=False)
        rc = main(["--out", str(tmp_path), "decode", demo("task_confidence.json")])
        assert rc == EXIT_VALIDATION

    def test_endpoint_env_honored(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("FOCORE_ENDPOINT", "http://127.0.0.1:1")
        rc = main(["--out", str(tmp_path), "decode", demo("task_confidence.json")])
        assert rc == EXIT_CONNECTIVITY


class TestBench:
    def test_csv_and_figure(self, tmp_path):
        rc = main(
            [
                "--model", demo("model_dominant.json"),
                "--out", str(tmp_path),
                "--seed", "1",
                "bench", demo("task_confidence.json"),
                "--strategies", "confidence,focore,focore_a",
                "--reference", "confidence",
                "--repeats", "2",
            ]
        )
        assert rc == EXIT_OK
        lines = (tmp_path / "bench.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[:5] == ["strategy", "task", "repeat", "seed", "exact_match"]
        # 3 strategies x 1 task x 2 repeats + 3 aggregates
        assert len(lines) == 1 + 6 + 3
        assert (tmp_path / "bench.png").exists()
        focore_rows = [l for l in lines if l.startswith("focore,")]
        for row in focore_rows:
            cells = dict(zip(header, row.split(",")))
            assert float(cells["steps_speedup"]) == 1.0
            assert float(cells["nfe_ratio"]) == 0.5

    def test_unknown_strategy_rejected(self, tmp_path, capsys):
        rc = main(
            ["--model", demo("model_dominant.json"), "--out", str(tmp_path),
             "bench", demo("task_confidence.json"), "--strategies", "beam"]
        )
        assert rc == EXIT_VALIDATION
        assert "focore" in capsys.readouterr().err  # lists valid names

    def test_jsonl_format(self, tmp_path):
        rc = main(
            ["--model", demo("model_dominant.json"), "--out", str(tmp_path),
             "--format", "jsonl", "--no-plot",
             "bench", demo("task_confidence.json")]
        )
        assert rc == EXIT_OK
        lines = (tmp_path / "bench.jsonl").read_text().splitlines()
        assert all(json.loads(l)["strategy"] for l in lines)

    def test_deterministic_reruns(self, tmp_path):
        args = [
            "--model", demo("model_dominant.json"), "--no-plot", "--seed", "3",
            "bench", demo("task_confidence.json"), "--repeats", "2",
        ]
        assert main(args + ["--out", str(tmp_path / "x")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "y")]) == EXIT_OK
        assert (tmp_path / "x" / "bench.csv").read_bytes() == (
            tmp_path / "y" / "bench.csv"
        ).read_bytes()


class TestAnalyses:
    def test_delta_grid(self, tmp_path):
        rc = main(
            [
                "--model", demo("model_anchored.json"),
                "--out", str(tmp_path),
                "analyze-delta", demo("task_anchored.json"),
                "--ratios", "0.0,0.5,1.0",
                "--analysis-seeds", "5",
            ]
        )
        assert rc == EXIT_OK
        lines = (tmp_path / "delta_confidence.csv").read_text().splitlines()
        assert lines[0] == "mask_ratio,position,mean_delta,hd"
        zero_rows = [l for l in lines[1:] if l.startswith("0.0,")]
        assert all(float(l.split(",")[2]) == 0.0 for l in zero_rows)
        assert (tmp_path / "delta_confidence.png").exists()

    def test_bad_ratio_rejected(self, tmp_path, capsys):
        rc = main(
            ["--model", demo("model_anchored.json"), "--out", str(tmp_path),
             "analyze-delta", demo("task_anchored.json"), "--ratios", "1.5"]
        )
        assert rc == EXIT_VALIDATION

    def test_order_curves_end_at_one(self, tmp_path):
        rc = main(
            [
                "--model", demo("model_anchored.json"),
                "--out", str(tmp_path),
                "analyze-order", demo("task_anchored.json"),
                "--analysis-seeds", "3",
            ]
        )
        assert rc == EXIT_OK
        lines = (tmp_path / "decoding_order.csv").read_text().splitlines()
        assert lines[0] == "step,hd_cum,ld_cum"
        last = lines[-1].split(",")
        assert float(last[1]) == 1.0 and float(last[2]) == 1.0
        assert (tmp_path / "decoding_order.png").exists()

    def test_heuristic_labels_path(self, tmp_path):
        texts = tmp_path / "texts.txt"
        texts.write_text("alpha\nBeta\n7\ngamma\ndelta\n")
        rc = main(
            [
                "--model", demo("model_anchored.json"),
                "--out", str(tmp_path),
                "analyze-order", demo("task_anchored.json"),
                "--analysis-seeds", "2",
                "--label-mode", "heuristic",
                "--token-text", str(texts),
                "--keywords", demo("keywords.txt"),
            ]
        )
        assert rc == EXIT_OK


class TestModelValidation:
    def test_unreadable_model(self, tmp_path, capsys):
        rc = main(
            ["--model", str(tmp_path / "none.json"), "--out", str(tmp_path),
             "decode", demo("task_confidence.json")]
        )
        assert rc == EXIT_VALIDATION

    def test_model_and_endpoint_conflict(self, tmp_path, capsys):
        rc = main(
            ["--model", demo("model_dominant.json"),
             "--endpoint", "http://x", "--out", str(tmp_path),
             "decode", demo("task_confidence.json")]
        )
        assert rc == EXIT_VALIDATION
