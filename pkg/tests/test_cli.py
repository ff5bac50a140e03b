import json

import pytest

from vtprune import load_token_set, save_bundle
from vtprune.cli import cli_main

from conftest import make_bundle


def last_record(stdout: str) -> dict:
    lines = [ln for ln in stdout.strip().splitlines() if ln.startswith("{")]
    return json.loads(lines[-1])


class TestAnalyze:
    def test_p889_report_values(self, capsys):
        assert cli_main(["analyze", "--schedule", "p889"]) == 0
        out = capsys.readouterr().out
        record = last_record(out)
        assert record["record"] == "cost_report"
        assert record["cr_int"] == pytest.approx(0.8974, abs=5e-5)
        assert 0.70e12 <= record["flops_total"] <= 0.95e12
        assert "CR_int" in out
        # every table number also appears in the record
        assert f"{record['flops_total']:.6e}" in out

    def test_intermediate_mode_flag(self, capsys):
        assert cli_main(["analyze", "--schedule", "p889", "--ffn-mode", "intermediate"]) == 0
        record = last_record(capsys.readouterr().out)
        assert record["ffn_mode"] == "intermediate"

    def test_schedule_file(self, tmp_path, capsys):
        from vtprune import preset, save_schedule

        path = str(tmp_path / "sched.json")
        save_schedule(preset("p667"), path)
        assert cli_main(["analyze", "--schedule", path]) == 0
        record = last_record(capsys.readouterr().out)
        assert record["cr_int"] == pytest.approx(0.6795, abs=5e-5)

    def test_unknown_preset(self, capsys):
        assert cli_main(["analyze", "--schedule", "p000"]) == 1
        assert "error" in capsys.readouterr().err


class TestOracleCheck:
    def test_ok_run_and_determinism(self, capsys):
        argv = ["oracle-check", "--trials", "5", "--seed", "7", "--n", "24"]
        assert cli_main(argv) == 0
        first = capsys.readouterr().out
        assert cli_main(argv) == 0
        second = capsys.readouterr().out
        assert first == second
        assert "oracle-check: ok" in first
        assert first.count('"record":"oracle_suite"') == 8

    def test_bad_arguments(self, capsys):
        assert cli_main(["oracle-check", "--trials", "0"]) == 1


class TestPrune:
    @pytest.fixture
    def bundle_file(self, tmp_path):
        path = str(tmp_path / "sample.vtb")
        save_bundle(make_bundle(m=576, seed=0), path)
        return path

    def test_prune_writes_report_and_result(self, bundle_file, tmp_path, capsys):
        out_dir = str(tmp_path / "out")
        rc = cli_main(
            ["prune", bundle_file, "--schedule", "p889", "--out", out_dir]
        )
        assert rc == 0
        report_path = tmp_path / "out" / "sample.report.jsonl"
        records = [json.loads(ln) for ln in report_path.read_text().splitlines()]
        kinds = {r["record"] for r in records}
        assert kinds == {"run_header", "stage_trace", "final_tokens", "cost_report"}
        traces = [r for r in records if r["record"] == "stage_trace"]
        assert [t["output_count"] for t in traces][0] == 172
        assert [t["output_count"] for t in traces][2] == 15
        header = next(r for r in records if r["record"] == "run_header")
        assert "unpruned" in header["note"]

        tokens, meta = load_token_set(str(tmp_path / "out" / "sample.result.vtb"))
        assert len(tokens) == 15
        assert meta["strategy"] == "vitcop"

    def test_prune_directory(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        for i in range(2):
            save_bundle(make_bundle(m=64, seed=i), str(corpus / f"s{i}.vtb"))
        from vtprune import ModelDims, PruneSchedule, save_schedule

        sched = PruneSchedule(0.75, 0.25, 0.06, model=ModelDims(64, 64, 32))
        sched_path = str(tmp_path / "sched.json")
        save_schedule(sched, sched_path)
        out_dir = str(tmp_path / "out")
        assert cli_main(["prune", str(corpus), "--schedule", sched_path, "--out", out_dir]) == 0
        produced = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert produced == [
            "s0.report.jsonl",
            "s0.result.vtb",
            "s1.report.jsonl",
            "s1.result.vtb",
        ]

    def test_prune_reports_byte_identical_across_runs(self, bundle_file, tmp_path):
        outs = []
        for run in ("r1", "r2"):
            out_dir = tmp_path / run
            rc = cli_main(
                [
                    "prune",
                    bundle_file,
                    "--schedule",
                    "p889",
                    "--strategy",
                    "random_baseline",
                    "--seed",
                    "11",
                    "--out",
                    str(out_dir),
                ]
            )
            assert rc == 0
            outs.append((out_dir / "sample.report.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_random_strategy_without_seed(self, bundle_file, tmp_path, capsys):
        rc = cli_main(
            [
                "prune",
                bundle_file,
                "--schedule",
                "p889",
                "--strategy",
                "random_baseline",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert rc == 1
        assert "seed" in capsys.readouterr().err


class TestInspect:
    def test_inspect_clean_bundle(self, tmp_path, capsys):
        path = str(tmp_path / "b.vtb")
        save_bundle(make_bundle(m=8, seed=1), path)
        assert cli_main(["inspect", path]) == 0
        out = capsys.readouterr().out
        assert "validation: ok" in out
        assert "token_features" in out

    def test_inspect_missing_file(self, tmp_path, capsys):
        assert cli_main(["inspect", str(tmp_path / "absent.vtb")]) == 1


class TestUsage:
    def test_unknown_flag_exits_2(self, capsys):
        assert cli_main(["analyze", "--schedule", "p889", "--bogus"]) == 2

    def test_no_command_exits_2(self, capsys):
        assert cli_main([]) == 2

    def test_help_exits_0(self, capsys):
        assert cli_main(["--help"]) == 0
