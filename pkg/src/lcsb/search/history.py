"""Run history of one search trial: an event log and the best-so-far
trajectory."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from ..core import Architecture


class RunHistory:
    """Events are appended in simulated-time order.

    The validation regret is optimum - (best observed final validation
    accuracy); before any architecture completes it equals the optimum.
    Because observed accuracies are noisy it can dip below zero. The true
    regret uses the true (mean) final accuracy of the current incumbent.
    """

    def __init__(self, optimum: float, budget: float | None = None):
        self.optimum = float(optimum)
        self.budget = budget
        self.events: list[dict] = []
        self.trajectory: list[tuple[float, float, float | None]] = []  # (t, best_val, true of incumbent)
        self.completed: dict[Architecture, float] = {}
        self.incumbent: Architecture | None = None

    # -- recording ----------------------------------------------------------

    def log_train(self, t: float, arch: Architecture, start: int, epoch: int, values, charged: float) -> None:
        if self.events and t < self.events[-1]["t"]:
            raise ValueError("events must be logged in time order")
        self.events.append({
            "t": float(t), "arch": str(arch), "start_epoch": int(start), "epoch": int(epoch),
            "values": [float(v) for v in values], "charged": float(charged),
        })

    def complete(self, t: float, arch: Architecture, final_val: float, true_final: float | None) -> None:
        self.completed[arch] = final_val
        best = self.trajectory[-1][1] if self.trajectory else -np.inf
        if final_val > best:
            self.incumbent = arch
            self.trajectory.append((float(t), float(final_val), None if true_final is None else float(true_final)))

    # -- queries ------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        """True when no architecture was trained to completion."""
        return not self.completed

    @property
    def total_charged(self) -> float:
        return float(sum(e["charged"] for e in self.events))

    @property
    def end_time(self) -> float:
        return self.events[-1]["t"] if self.events else 0.0

    def best_val(self) -> float | None:
        return self.trajectory[-1][1] if self.trajectory else None

    def regret_at(self, times) -> tuple[np.ndarray, np.ndarray]:
        """(validation regret, true regret) at each time in `times`."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        val = np.full(len(times), self.optimum)
        true = np.full(len(times), np.nan)
        if self.trajectory:
            ts = np.array([p[0] for p in self.trajectory])
            idx = np.searchsorted(ts, times, side="right") - 1
            has = idx >= 0
            best = np.array([p[1] for p in self.trajectory])
            tr = np.array([np.nan if p[2] is None else p[2] for p in self.trajectory])
            val[has] = self.optimum - best[idx[has]]
            true[has] = self.optimum - tr[idx[has]]
            true[~has] = self.optimum
        else:
            true[:] = self.optimum
        return val, true

    def final_regret(self) -> float:
        return float(self.optimum - self.best_val()) if self.trajectory else self.optimum

    # -- serialisation -------------------------------------------------------

    def to_csv(self, checkpoints) -> str:
        val, true = self.regret_at(checkpoints)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sim_time", "best_val_regret", "true_regret"])
        for t, v, r in zip(np.atleast_1d(checkpoints), val, true):
            w.writerow(["%.17g" % t, "%.17g" % v, "" if np.isnan(r) else "%.17g" % r])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "optimum": self.optimum,
            "budget": self.budget,
            "empty": self.is_empty,
            "n_completed": len(self.completed),
            "events": self.events,
            "trajectory": [list(p) for p in self.trajectory],
        }, sort_keys=True)


def checkpoints(budget: float, n: int = 20) -> np.ndarray:
    """n log-spaced times from budget/100 to budget."""
    return np.logspace(np.log10(budget / 100.0), np.log10(budget), n)
