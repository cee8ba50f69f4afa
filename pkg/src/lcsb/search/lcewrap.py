"""Early-stopping wrapper around a single-fidelity algorithm: train each
candidate batch briefly, extrapolate, and finish only the most promising."""

from __future__ import annotations

import numpy as np

from .. import lce
from ..core import encode_matrix
from .algorithms import SearchAlgorithm, top_n
from .benchmark import Session

EXTRAPOLATORS = ("wpm", "model_based")
KEEP_FRACTION = 0.2


def default_e_few(e_max: int) -> int:
    return max(1, int(round(0.2 * e_max)))


def train_full(session: Session, algo: SearchAlgorithm, archs) -> None:
    for a in archs:
        algo.tell(a, session.train(a, session.e_max))


def predict_finals(session: Session, kind: str, archs, prefixes: np.ndarray) -> np.ndarray:
    """Extrapolated final accuracies. The model-based extrapolator is
    refit on every completed architecture; below its minimum record count
    it falls back to WPM."""
    e_few = prefixes.shape[1]
    done = list(session.history.completed)
    if kind == "model_based" and len(done) >= lce.MIN_RECORDS:
        enc = encode_matrix(done, session.benchmark.space)
        triples = [(enc[i], session.curve(a)[:e_few], session.curve(a)[-1]) for i, a in enumerate(done)]
        model = lce.fit_model_extrapolator(triples)
        return model.predict(encode_matrix(archs, session.benchmark.space), prefixes)
    if e_few < 5:
        # too short for curve fitting: rank by the last observed value
        return prefixes[:, -1].copy()
    return np.array([lce.extrapolate_wpm(p, session.e_max) for p in prefixes])


def lce_iteration(session: Session, algo: SearchAlgorithm, archs, kind: str, e_few: int,
                  keep_fraction: float) -> None:
    keep = top_n(keep_fraction, len(archs))
    if keep >= len(archs):
        # nothing to prune: train to E_few first, then resume to the end
        for a in archs:
            session.train(a, e_few)
        train_full(session, algo, archs)
        return
    prefixes = np.array([session.train(a, e_few) for a in archs])
    pred = predict_finals(session, kind, archs, prefixes)
    order = np.argsort(-pred, kind="stable")
    kept = set(order[:keep].tolist())
    # kept ones resume in candidate order
    train_full(session, algo, [a for i, a in enumerate(archs) if i in kept])
    for i, a in enumerate(archs):
        if i not in kept:
            algo.discard(a, float(pred[i]))


def lce_wrap(session: Session, algo: SearchAlgorithm, kind: str = "model_based", e_few: int | None = None,
             keep_fraction: float = KEEP_FRACTION) -> None:
    """Run `algo` under LCE pruning until the budget is exhausted."""
    if kind not in EXTRAPOLATORS:
        raise ValueError(f"unknown extrapolator {kind!r}; expected one of {EXTRAPOLATORS}")
    e_few = default_e_few(session.e_max) if e_few is None else int(e_few)
    if not 1 <= e_few < session.e_max:
        raise ValueError(f"e_few must lie in [1, {session.e_max - 1}]")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must lie in (0, 1]")
    while True:
        archs, warm = algo.ask()
        if warm:
            train_full(session, algo, archs)
        else:
            lce_iteration(session, algo, archs, kind, e_few, keep_fraction)


def run_single_fidelity(session: Session, algo: SearchAlgorithm) -> None:
    while True:
        archs, _ = algo.ask()
        train_full(session, algo, archs)
