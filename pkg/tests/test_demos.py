"""The demos double as executable documentation; keep them runnable."""

import os
import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parent.parent / "demos"


def run_demo(script, tmp_home, *args):
    env = dict(os.environ, CONTEXTDB_HOME=str(tmp_home))
    return subprocess.run([sys.executable, str(DEMOS / script), *args],
                          capture_output=True, text=True, env=env,
                          timeout=180)


def test_shoe_semantic_search(tmp_path):
    proc = run_demo("shoe_semantic_search.py", tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "recommendation: Reebok Floatride at $90" in proc.stdout


def test_ann_recall_tradeoffs_small(tmp_path):
    proc = run_demo("ann_recall_tradeoffs.py", tmp_path, "400")
    assert proc.returncode == 0, proc.stderr
    assert "recall@10=1.0000 by definition" in proc.stdout


def test_rag_pipeline_tour(tmp_path):
    proc = run_demo("rag_pipeline_tour.py", tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "cached:  True" in proc.stdout
    assert "stage:   llm" in proc.stdout


def test_storage_tiers_tour(tmp_path):
    proc = run_demo("storage_tiers_tour.py", tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "torn tail discarded" in proc.stdout
    assert "hit-for-hit identical: True" in proc.stdout
