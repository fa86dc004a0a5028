"""Hot elementwise kernels, numba-jitted with a pure-numpy fallback.

Set ``CAPML_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for the kernel benchmark in ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("CAPML_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")


def _asym_loss_elementwise_np(probs, targets, lam_pos, lam_neg, clamp):
    """Per-entry asymmetric focal loss and its derivative w.r.t. probs.

    targets entries: 1 (positive), 0 (negative), -1 (ignored -> zero loss/grad).
    Probabilities are clamped to [clamp, 1-clamp] before the logs; the gradient
    passes through unchanged inside the clamp band and is zero outside it.
    """
    f = np.clip(probs, clamp, 1.0 - clamp)
    inside = (probs >= clamp) & (probs <= 1.0 - clamp)
    pos = targets == 1
    neg = targets == 0

    log_f = np.log(f)
    log_1mf = np.log1p(-f)
    omf = 1.0 - f

    loss = np.zeros_like(f)
    grad = np.zeros_like(f)

    w_pos = omf**lam_pos
    loss_pos = -w_pos * log_f
    if lam_pos > 0.0:
        grad_pos = lam_pos * omf ** (lam_pos - 1.0) * log_f - w_pos / f
    else:
        grad_pos = -1.0 / f

    w_neg = f**lam_neg
    loss_neg = -w_neg * log_1mf
    if lam_neg > 0.0:
        grad_neg = -lam_neg * f ** (lam_neg - 1.0) * log_1mf + w_neg / omf
    else:
        grad_neg = 1.0 / omf

    loss[pos] = loss_pos[pos]
    loss[neg] = loss_neg[neg]
    grad[pos] = grad_pos[pos]
    grad[neg] = grad_neg[neg]
    grad[~inside] = 0.0
    return loss, grad


def _rank_assign_np(order_desc, order_asc, c_pos, c_neg, m, q):
    """Fill a pseudo-label column matrix from per-class rank orders.

    order_desc/order_asc: (q, m) instance indices sorted by score descending /
    ascending (stable, so ties fall to the lowest instance index). Top c_pos
    ranks become 1, then the first c_neg non-positive ascending ranks become 0,
    the rest stay -1. Positives take precedence on tie overlap.
    """
    out = np.full((m, q), -1, dtype=np.int8)
    for k in range(q):
        cp = c_pos[k]
        cn = c_neg[k]
        for r in range(cp):
            out[order_desc[k, r], k] = 1
        assigned = 0
        r = 0
        while assigned < cn and r < m:
            j = order_asc[k, r]
            if out[j, k] != 1:
                out[j, k] = 0
                assigned += 1
            r += 1
    return out


njit = None
if not _DISABLE:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None


if njit is not None:

    @njit(cache=True)
    def _asym_loss_elementwise_nb(probs, targets, lam_pos, lam_neg, clamp):
        B, q = probs.shape
        loss = np.zeros((B, q))
        grad = np.zeros((B, q))
        for i in range(B):
            for k in range(q):
                t = targets[i, k]
                if t < 0:
                    continue
                fv = probs[i, k]
                f = min(max(fv, clamp), 1.0 - clamp)
                inside = clamp <= fv <= 1.0 - clamp
                omf = 1.0 - f
                if t == 1:
                    lf = np.log(f)
                    w = omf**lam_pos
                    loss[i, k] = -w * lf
                    if inside:
                        if lam_pos > 0.0:
                            grad[i, k] = lam_pos * omf ** (lam_pos - 1.0) * lf - w / f
                        else:
                            grad[i, k] = -1.0 / f
                else:
                    l1mf = np.log(omf)
                    w = f**lam_neg
                    loss[i, k] = -w * l1mf
                    if inside:
                        if lam_neg > 0.0:
                            grad[i, k] = -lam_neg * f ** (lam_neg - 1.0) * l1mf + w / omf
                        else:
                            grad[i, k] = 1.0 / omf
        return loss, grad

    @njit(cache=True)
    def _rank_assign_nb(order_desc, order_asc, c_pos, c_neg, m, q):
        out = np.full((m, q), -1, dtype=np.int8)
        for k in range(q):
            cp = c_pos[k]
            cn = c_neg[k]
            for r in range(cp):
                out[order_desc[k, r], k] = 1
            assigned = 0
            r = 0
            while assigned < cn and r < m:
                j = order_asc[k, r]
                if out[j, k] != 1:
                    out[j, k] = 0
                    assigned += 1
                r += 1
        return out

    asym_loss_elementwise = _asym_loss_elementwise_nb
    rank_assign = _rank_assign_nb
    NUMBA_ENABLED = True
else:
    asym_loss_elementwise = _asym_loss_elementwise_np
    rank_assign = _rank_assign_np
    NUMBA_ENABLED = False
