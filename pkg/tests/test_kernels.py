import math
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from decoyfk import _backend, _fallback

compiled = pytest.importorskip("decoyfk._kernels", reason="compiled kernels not built")

BACKENDS = [_fallback, compiled]


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1e14), st.floats(0.01, 100.0))
def test_invert_exact_backends_agree(chi, beta):
    a = _fallback.invert_exact(chi, beta)
    b = compiled.invert_exact(chi, beta)
    assert a[2] == b[2] == _fallback.OK
    for x, y in zip(a[:2], b[:2]):
        assert x == pytest.approx(y, rel=1e-14, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 0.49), st.floats(1.0, 1e10), st.floats(1.0, 1e10), st.floats(-80.0, -1.0))
def test_sampling_theta_backends_agree(e, nx, nz, log2_eps):
    a = _fallback.sampling_theta(e, nx, nz, log2_eps)
    b = compiled.sampling_theta(e, nx, nz, log2_eps)
    assert a[1] == b[1]
    assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-15)


@given(st.floats(-0.999, 20.0))
def test_g2_backends_agree(d):
    assert _fallback.g2(d) == pytest.approx(compiled.g2(d), rel=1e-15, abs=1e-300)


@given(st.floats(0.0, 1.0))
def test_entropy_backends_agree(x):
    assert _fallback.binary_entropy(x) == pytest.approx(compiled.binary_entropy(x), rel=1e-15, abs=1e-300)


@pytest.mark.parametrize("k", BACKENDS, ids=["python", "compiled"])
def test_zero_observation_returns_beta(k):
    assert k.invert_exact(0.0, 23.0) == (0.0, 23.0, k.OK)


@pytest.mark.parametrize("k", BACKENDS, ids=["python", "compiled"])
def test_far_tail_does_not_overflow(k):
    lo, up, status = k.invert_exact(5e-324, 23.7)
    assert status == k.OK
    assert lo == 0.0
    assert math.isfinite(up) and up == pytest.approx(23.7)


@pytest.mark.parametrize("k", BACKENDS, ids=["python", "compiled"])
@pytest.mark.parametrize("x", [1e-9, 1e-3, 0.049, 0.051, 5.0])
def test_series_and_closed_forms_join_smoothly(k, x):
    assert k.g2(x) == pytest.approx((1 + x) * math.log1p(x) - x, rel=1e-7)


@pytest.mark.parametrize("k", BACKENDS, ids=["python", "compiled"])
def test_status_codes_for_sampling(k):
    assert k.sampling_theta(0.4, 100.0, 100.0, math.log2(0.5))[1] == k.BELOW_PREFACTOR
    theta, status = k.sampling_theta(0.3, 2.0, 2.0, math.log2(1e-30))
    assert status == k.SATURATED and theta == pytest.approx(0.7)


def test_env_switch_forces_python_backend():
    code = "import decoyfk._backend as b; print(b.COMPILED)"
    env = dict(os.environ, DECOYFK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_backend_prefers_compiled():
    assert _backend.COMPILED
    assert _backend.kernels is compiled
