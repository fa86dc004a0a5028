import numpy as np
import pytest


def pytest_runtest_logreport(report):
    """Emit one explicit status line per acceptance criterion."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1].split("[")[0]
        print(f"[{status}] {name}", flush=True)


def finite_diff_loss(fn, probs, step=1e-6):
    """Central finite differences of a scalar loss w.r.t. a probability matrix."""
    grad = np.zeros_like(probs)
    it = np.nditer(probs, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = probs.copy()
        minus = probs.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (fn(plus) - fn(minus)) / (2 * step)
        it.iternext()
    return grad


def finite_diff_params(fn, params, step=1e-6):
    """Central finite differences of a scalar w.r.t. a dict of parameter arrays."""
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        it = np.nditer(value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = value[idx]
            value[idx] = orig + step
            hi = fn()
            value[idx] = orig - step
            lo = fn()
            value[idx] = orig
            g[idx] = (hi - lo) / (2 * step)
            it.iternext()
        grads[name] = g
    return grads


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / denom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
