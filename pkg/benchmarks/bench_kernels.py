"""Compare the numba-jitted hot kernels against the pure-numpy fallback.

Runs each kernel in a subprocess twice -- once normally and once with
``CAPML_DISABLE_NUMBA=1`` -- so each process imports exactly one backend.

Usage:  python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json
import sys
import time

import numpy as np

from capml._accel import NUMBA_ENABLED, asym_loss_elementwise, rank_assign

rng = np.random.default_rng(0)
results = {"backend": "numba" if NUMBA_ENABLED else "numpy"}

# elementwise loss/gradient kernel
B, q = 4096, 80
probs = rng.uniform(0.01, 0.99, size=(B, q))
targets = rng.choice([-1.0, 0.0, 1.0], size=(B, q))
asym_loss_elementwise(probs, targets, 1.0, 4.0, 1e-7)  # warm-up / compile
t0 = time.perf_counter()
reps = 50
for _ in range(reps):
    loss, grad = asym_loss_elementwise(probs, targets, 1.0, 4.0, 1e-7)
results["loss_ms"] = (time.perf_counter() - t0) / reps * 1e3
results["loss_checksum"] = float(loss.sum() + grad.sum())

# rank-based assignment kernel
m, q = 20000, 80
scores = rng.random((m, q))
order_desc = np.ascontiguousarray(np.argsort(-scores.T, axis=1, kind="stable"))
order_asc = np.ascontiguousarray(np.argsort(scores.T, axis=1, kind="stable"))
c_pos = rng.integers(0, m // 4, size=q)
c_neg = rng.integers(0, m // 2, size=q)
rank_assign(order_desc, order_asc, c_pos, c_neg, m, q)  # warm-up / compile
t0 = time.perf_counter()
reps = 20
for _ in range(reps):
    out = rank_assign(order_desc, order_asc, c_pos, c_neg, m, q)
results["assign_ms"] = (time.perf_counter() - t0) / reps * 1e3
results["assign_checksum"] = int(out.astype(np.int64).sum())

print(json.dumps(results))
"""


def run(disable_numba: bool) -> dict:
    env = dict(os.environ, CAPML_DISABLE_NUMBA="1" if disable_numba else "")
    out = subprocess.run(
        [sys.executable, "-c", WORKER], env=env, capture_output=True, text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    numba = run(disable_numba=False)
    plain = run(disable_numba=True)
    if numba["backend"] == plain["backend"]:
        print("warning: numba backend unavailable; comparing numpy to itself")
    for key in ("loss_checksum", "assign_checksum"):
        a, b = numba[key], plain[key]
        if abs(a - b) > 1e-6 * max(1.0, abs(a)):
            raise SystemExit(f"backend results disagree on {key}: {a} vs {b}")
    print(f"{'kernel':<28}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for label, key in (
        ("elementwise loss+grad", "loss_ms"),
        ("rank-based assignment", "assign_ms"),
    ):
        a, b = numba[key], plain[key]
        print(f"{label:<28}{a:>12.3f}{b:>12.3f}{b / a:>9.2f}x")


if __name__ == "__main__":
    main()
