"""Per-phase 16-feature vectors.

For a phase with incoming lanes ``l1, l2`` and downstream lanes
``m1..m3`` (of ``l1``) and ``m4..m6`` (of ``l2``), each in left, through,
right order, the vector is::

    x[0:8]  = w(l1), w(l2), w(m1), ..., w(m6)    # waiting (queued) vehicles
    x[8:16] = x(l1), x(l2), x(m1), ..., x(m6)    # all vehicles on the lane

so ``x[i]`` and ``x[i + 8]`` always come from the same lane.
"""

from __future__ import annotations

import numpy as np

from .errors import PhaseMismatch
from .network import PhaseDef, enumerate_phases

N_FEATURES = 16


def extract_features(state, intersection: str, phase: PhaseDef) -> np.ndarray:
    phases = enumerate_phases(state.network, intersection)
    if phase not in phases:
        raise PhaseMismatch(f"phase {phase.id} does not belong to intersection {intersection!r}")
    index = state.layout.index
    lanes = [index[l] for l in phase.feature_lanes]
    w, x = state.queue_len, state.occupancy
    return np.array([w[k] for k in lanes] + [x[k] for k in lanes], dtype=float)


def feature_matrix(state) -> np.ndarray:
    """Features of every phase of every signalized intersection, shape ``(n_signalized * 8, 16)``.

    Rows follow ``state.layout.signalized`` order, phases 1..8 within each.
    """
    idx = state.layout.feature_lanes
    w = np.asarray(state.queue_len, dtype=float)
    x = np.asarray(state.occupancy, dtype=float)
    return np.concatenate([w[idx], x[idx]], axis=1)
