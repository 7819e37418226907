"""The numba and numpy kernel builds must agree on every kernel, and the
env flag must actually select the fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from pyrflow.kernels import numpy_impl

try:
    from pyrflow.kernels import numba_impl
except ImportError:  # pragma: no cover
    numba_impl = None

pairs = pytest.mark.skipif(numba_impl is None, reason="numba unavailable")


@pairs
def test_conv2d_agreement():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((3, 9, 11)).astype(np.float32)
    ker = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(4).astype(np.float32)
    for stride, pad in ((1, 0), (1, 1), (2, 1)):
        a = numba_impl.conv2d(x, ker, bias, stride, pad)
        b = numpy_impl.conv2d(x, ker, bias, stride, pad)
        assert a.shape == b.shape
        assert np.abs(a - b).max() <= 1e-4


@pairs
def test_bilinear_agreement():
    rng = np.random.default_rng(11)
    img = rng.standard_normal((2, 7, 8)).astype(np.float32)
    xs = rng.uniform(-2, 9, 200)
    ys = rng.uniform(-2, 8, 200)
    a = numba_impl.bilinear_sample(img, xs, ys)
    b = numpy_impl.bilinear_sample(img, xs, ys)
    assert np.abs(a - b).max() <= 1e-6


@pairs
def test_pool_agreement():
    rng = np.random.default_rng(12)
    img = rng.standard_normal((3, 7, 9)).astype(np.float32)
    assert np.array_equal(numba_impl.avg_pool2(img), numpy_impl.avg_pool2(img))


@pairs
def test_lookup_agreement():
    rng = np.random.default_rng(13)
    h1, w1 = 4, 5
    level = rng.standard_normal((h1 * w1, 6, 7)).astype(np.float32)
    cx = rng.uniform(-1, 8, (h1, w1))
    cy = rng.uniform(-1, 7, (h1, w1))
    a = numba_impl.lookup_level(level, cx, cy, 2)
    b = numpy_impl.lookup_level(level, cx, cy, 2)
    assert np.abs(a - b).max() <= 1e-6


@pairs
def test_convex_upsample_agreement():
    rng = np.random.default_rng(14)
    flow = rng.uniform(-4, 4, (2, 5, 6)).astype(np.float32)
    logits = rng.standard_normal((144, 5, 6)).astype(np.float32)
    a = numba_impl.convex_upsample(flow, logits, 4)
    b = numpy_impl.convex_upsample(flow, logits, 4)
    assert np.abs(a - b).max() <= 1e-5


def test_env_flag_selects_numpy():
    env = dict(os.environ, PYRFLOW_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c",
         "from pyrflow.kernels import ACTIVE_BACKEND; print(ACTIVE_BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_env_flag_rejects_garbage():
    env = dict(os.environ, PYRFLOW_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import pyrflow.kernels"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "PYRFLOW_BACKEND" in out.stderr


def test_fallback_runs_pipeline():
    env = dict(os.environ, PYRFLOW_BACKEND="numpy")
    code = (
        "import numpy as np, pyrflow\n"
        "w = pyrflow.init_weights(pyrflow.ModelConfig(levels=2, radius=2), 1)\n"
        "rng = np.random.default_rng(0)\n"
        "a = rng.uniform(0, 255, (3, 16, 24)).astype(np.float32)\n"
        "b = rng.uniform(0, 255, (3, 16, 24)).astype(np.float32)\n"
        "flow, trace = pyrflow.estimate_flow(a, b, w)\n"
        "assert flow.shape == (16, 24) and trace.iteration_counts() == [12, 12]\n"
        "print('ok')\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "ok"
