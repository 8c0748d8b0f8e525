import os
import subprocess
import sys

import numpy as np
import pytest

from reeb_systole import _backend, _fallback

core = pytest.importorskip("reeb_systole._core")


def points(rng, n=50):
    p = rng.normal(size=(n, 3))
    return p / np.linalg.norm(p, axis=1)[:, None]


def test_compiled_is_default():
    if os.environ.get("REEB_SYSTOLE_BACKEND", "").lower() != "python":
        assert _backend.BACKEND == "compiled"


@pytest.mark.parametrize("L", [0, 1, 5, 24])
def test_basis_parity(rng, L):
    p = points(rng)
    assert np.allclose(core.basis(L, p), _fallback.basis(L, p), atol=1e-12, rtol=0)
    for a, b in zip(core.basis_grad(L, p), _fallback.basis_grad(L, p)):
        assert np.allclose(a, b, atol=1e-11, rtol=0)


def test_field_parity(rng):
    L = 10
    c = rng.normal(size=(L + 1) ** 2)
    p = points(rng)
    assert np.allclose(core.field_values(c, L, p), _fallback.field_values(c, L, p), atol=1e-12)
    vc, gc = core.field_values_grad(c, L, p)
    vf, gf = _fallback.field_values_grad(c, L, p)
    assert np.allclose(vc, vf, atol=1e-12) and np.allclose(gc, gf, atol=1e-11)


@pytest.mark.parametrize("kind,params,L", [
    (0, np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, -0.1]), 2),
    (1, np.array([0.8, 1.0, 1.4]), 0),
])
def test_integrate_parity(kind, params, L):
    if kind == 0:
        y0 = np.array([1.0, 0, 0, 0, 1.0, 0])
    else:
        y0 = np.array([0.8, 0, 0, 0, 0.6, 0.8])
    rc = core.integrate(kind, params, L, y0, 3.0, 1e-10, 1e-10, 0.0, 10**6, False)
    rf = _fallback.integrate(kind, params, L, y0, 3.0, 1e-10, 1e-10, 0.0, 10**6, False)
    assert np.allclose(rc[1], rf[1], atol=1e-9)


def test_env_switch_selects_fallback():
    env = dict(os.environ, REEB_SYSTOLE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c",
                          "from reeb_systole import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
