"""Acceptance suite: every stated criterion at its stated tolerance.

Runs the built-in oracle suite once at full size (million-event streams)
and asserts each criterion separately so failures point at the exact one.
One pass/fail line per criterion goes to stdout (visible with ``pytest -s``
or in the failure report).  The determinism criterion additionally runs
the command-line self-test twice and compares artifacts byte for byte.
"""

import filecmp
import subprocess
import sys

import pytest

from bookimpact.selftest import run_all


@pytest.fixture(scope="module")
def results():
    res = run_all(fast=False, seed=0, echo=None)
    for r in res:
        print(r.line())
    return {r.number: r for r in res}


def _assert(res):
    print(res.line(), res.details)
    assert res.passed, res.details


def test_criterion_01_exact_reconstruction(results):
    _assert(results[1])


def test_criterion_02_estimator_identities(results):
    _assert(results[2])


def test_criterion_03_propagator_roundtrip(results):
    _assert(results[3])


def test_criterion_04_baseline_exponent(results):
    _assert(results[4])


def test_criterion_05_constant_model_split(results):
    _assert(results[5])


def test_criterion_06_kernel_recovery(results):
    _assert(results[6])


def test_criterion_07_diffusion_closure(results):
    _assert(results[7])


def test_criterion_08_table_sanity(results):
    _assert(results[8])


def test_criterion_09_spread_model(results):
    _assert(results[9])


def test_criterion_10_determinism(results, tmp_path):
    _assert(results[10])
    # the CLI self-test twice in a row: byte-identical artifacts
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "bookimpact.cli", "selftest", "--fast",
             "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), \
            f"artifact {name} differs between runs"
