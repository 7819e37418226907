"""Acceptance criteria, one test per criterion, each printing a pass/fail
line. Criteria 1-8 drive the oracle suites directly; criterion 9 runs the
packaged selftest command end to end."""

import subprocess
import sys
import time

import pytest

from pyrflow import selftest


def _run(number, label, fn, budget=None):
    start = time.perf_counter()
    try:
        fn()
    except Exception as exc:
        print(f"FAIL criterion-{number} {label}: {exc}")
        raise
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        print(f"FAIL criterion-{number} {label}: {elapsed:.1f}s > {budget}s budget")
        raise AssertionError(f"criterion {number} exceeded {budget}s: {elapsed:.1f}s")
    print(f"PASS criterion-{number} {label} ({elapsed:.1f}s)")


def test_criterion_1_correlation_oracles():
    # >=100 random pairs, volume + lookup oracle agreement at 1e-5, < 10 s
    _run(1, "correlation-oracles", selftest.suite_correlation_oracles, budget=10.0)


def test_criterion_2_architecture_contract():
    _run(2, "architecture-contract", selftest.suite_architecture_contract)


def test_criterion_3_weight_sharing():
    _run(3, "weight-sharing", selftest.suite_weight_sharing)


def test_criterion_4_convex_upsampling():
    _run(4, "convex-upsample", selftest.suite_convex_upsample)


def test_criterion_5_synthetic_end_to_end():
    _run(5, "end-to-end-synthetic", selftest.suite_end_to_end_synthetic)


def test_criterion_6_metrics_battery():
    _run(6, "metrics-battery", selftest.suite_metrics_battery)


def test_criterion_7_flow_formats():
    _run(7, "flow-formats", selftest.suite_flow_formats)


def test_criterion_8_data_pipeline():
    _run(8, "data-pipeline", selftest.suite_data_pipeline)


def test_criterion_9_selftest_command():
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pyrflow", "selftest"],
        capture_output=True, text=True, timeout=300,
    )
    elapsed = time.perf_counter() - start
    ok = proc.returncode == 0
    passes = [ln for ln in proc.stdout.splitlines() if ln.startswith("PASS ")]
    if not ok or len(passes) != len(selftest.SUITES) or elapsed >= 120.0:
        print(f"FAIL criterion-9 selftest-command ({elapsed:.1f}s)\n{proc.stdout}")
        print(proc.stderr)
    assert ok, f"selftest exited {proc.returncode}: {proc.stderr}"
    assert len(passes) == len(selftest.SUITES), proc.stdout
    assert elapsed < 120.0, f"selftest took {elapsed:.1f}s, budget is 120s"
    print(f"PASS criterion-9 selftest-command ({elapsed:.1f}s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
