"""Cross-component conformance: exported bundles drive the engine.

The engine is exercised only through its external interfaces: the bundle
container, the schedule JSON file, and the ``vtprune`` CLI.  A real
576-token model sample must load with zero validation violations and run
the full pipeline with stage counts [172, <=77, 15] under the 88.9%
schedule.
"""

import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from vlmdump import ExportConfig, export_bundles

SCHEDULE_889 = {
    "pi1": 0.3000,
    "pi2": 0.1343,
    "pi3": 0.0269,
    "l_s": 2,
    "l_d": 22,
    "d_c": 8.0,
    "tau": 0.6,
    "alpha": 0.125,
    "model": {"m": 576, "d": 128, "n_layers": 32, "n_text": 40, "ffn_coefficient": 16.0},
}


def vtprune_cmd() -> list[str]:
    exe = shutil.which("vtprune")
    if exe:
        return [exe]
    return [sys.executable, "-m", "vtprune.cli"]


def run_cli(args: list[str]) -> subprocess.CompletedProcess:
    return subprocess.run(
        vtprune_cmd() + args, capture_output=True, text=True, timeout=300
    )


@pytest.fixture(scope="module")
def exported_bundle(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("conformance")
    rng = np.random.default_rng(7)
    img_path = str(tmp / "scene.png")
    Image.fromarray(rng.integers(0, 255, (96, 96, 3), dtype=np.uint8)).save(img_path)
    out_dir = str(tmp / "bundles")
    cfg = ExportConfig(
        model="tiny-lvlm-576", inputs=[img_path], out_dir=out_dir, layers=(2, 22), seed=1
    )
    assert export_bundles(cfg) == 1
    return os.path.join(out_dir, "scene.vtb")


def test_engine_inspect_reports_zero_violations(exported_bundle):
    proc = run_cli(["inspect", exported_bundle])
    assert proc.returncode == 0, proc.stderr
    assert "validation: ok (0 violations)" in proc.stdout


def test_engine_pipeline_trace_counts(exported_bundle, tmp_path):
    sched_path = str(tmp_path / "p889.json")
    with open(sched_path, "w", encoding="utf-8") as fh:
        json.dump(SCHEDULE_889, fh)
    out_dir = str(tmp_path / "results")

    proc = run_cli(["prune", exported_bundle, "--schedule", sched_path, "--out", out_dir])
    assert proc.returncode == 0, proc.stderr

    report = os.path.join(out_dir, "scene.report.jsonl")
    records = [json.loads(line) for line in open(report, encoding="utf-8")]
    traces = {r["stage"]: r for r in records if r["record"] == "stage_trace"}
    assert traces["I"]["output_count"] == 172
    assert traces["II"]["output_count"] <= 77
    assert traces["III"]["output_count"] == 15
    final = next(r for r in records if r["record"] == "final_tokens")
    assert final["count"] == 15
