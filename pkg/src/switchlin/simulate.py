"""Exact propagation of switched linear systems.

The dynamics are linear and time-invariant between switches, so each
activation period ``(i, tau)`` is crossed with one matrix exponential
``exp(A_i tau)``; intermediate samples use ``exp(A_i s)`` from the segment
start. Nothing is integrated numerically.

Sample events are ``sample`` (grid point or endpoint), ``switch`` (end of an
activation period), and ``pre_jump`` / ``post_jump`` around a hybrid jump.
Times increase strictly except for a ``pre_jump``/``post_jump`` pair, which
share their integer time.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, InvalidPairingError
from .linalg import induced_norm, matrix_exp
from .model import (CONTINUOUS, DISCRETE, ContinuousSignal, DiscreteSignal, Flow,
                    HybridSignal, HybridSystem, Jump, SwitchedSystem, hybrid_segments,
                    iter_segments_up_to)

HYBRID = "hybrid"

#: Slack for the norm-product bound check.
BOUND_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution: ``states[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    events: tuple
    switch_times: tuple
    mode: str
    period: Optional[float] = None

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_norm(self) -> float:
        return float(self.norms[-1])

    def log_norm_slope(self, window: float = None) -> float:
        """Least-squares slope of ``log ||x(t)||`` against ``t``.

        With ``window`` the fit runs through the maximum of each complete
        window ``[k w, (k+1) w)`` (the upper envelope); pass the signal
        period to cancel the within-period oscillation.
        """
        t = self.times
        with np.errstate(divide="ignore"):
            y = np.log(self.norms)
        keep = np.isfinite(y)
        t, y = t[keep], y[keep]
        if window is not None:
            if not window > 0:
                raise InvalidInputError(f"window must be positive, got {window}")
            slot = np.floor(t / window + 1e-9).astype(int)
            last = int(np.floor(self.times[-1] / window + 1e-9))
            ts, ys = [], []
            for k in range(last):
                sel = slot == k
                if np.any(sel):
                    j = np.argmax(y[sel])
                    ts.append(t[sel][j])
                    ys.append(y[sel][j])
            t, y = np.array(ts), np.array(ys)
        if len(t) < 2:
            return math.nan
        return float(np.polyfit(t, y, 1)[0])

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``t,x_1,...,x_m,norm,event`` rows with 17 significant digits.

        Returns the text when ``fh`` is None.
        """
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{j}" for j in range(1, self.dim + 1)] + ["norm", "event"])
        for t, x, nrm, ev in zip(self.times, self.states, self.norms, self.events):
            writer.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in x]
                            + [format(float(nrm), ".17g"), ev])
        return out.getvalue() if fh is None else None


def _initial_state(x0, dim):
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise InvalidInputError(f"dimension mismatch: x0 has {x.shape[0]} entries, system has {dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("initial state has non-finite entries")
    return x


class _ExpCache:
    def __init__(self, system, limit=20000):
        self.system = system
        self.limit = limit
        self._store = {}

    def __call__(self, index, tau):
        key = (index, tau)
        E = self._store.get(key)
        if E is None:
            if len(self._store) >= self.limit:
                self._store.clear()
            E = matrix_exp(self.system.matrix(index), tau)
            self._store[key] = E
        return E


class _Recorder:
    def __init__(self):
        self.times, self.states, self.events, self.switches = [], [], [], []

    def add(self, t, x, event):
        self.times.append(t)
        self.states.append(x)
        self.events.append(event)
        if event == "switch":
            self.switches.append(t)

    def build(self, mode, period=None):
        return Trajectory(times=np.array(self.times, dtype=float),
                          states=np.array(self.states, dtype=float),
                          events=tuple(self.events), switch_times=tuple(self.switches),
                          mode=mode, period=period)


def _flow(rec, expm, index, start, duration, x, step):
    """Propagate one flow piece, recording interior grid samples; return the end state."""
    end = start + duration
    if step:
        tol = 1e-12 * max(1.0, end)
        k = math.floor(start / step + 1e-12) + 1
        while k * step < end - tol:
            s = k * step
            if s > start + tol:
                rec.add(s, expm(index, s - start) @ x, "sample")
            k += 1
    return expm(index, duration) @ x


def simulate_continuous(system: SwitchedSystem, signal: ContinuousSignal, x0, horizon: float,
                        sample_step: float = None) -> Trajectory:
    """Solve ``x' = A_sigma(t) x`` on ``[0, horizon]``.

    Every activation period ends in a ``switch`` sample; ``sample_step``
    adds samples on the global grid ``k * sample_step``.
    """
    x = _initial_state(x0, system.dim)
    if sample_step is not None and not sample_step > 0:
        raise InvalidInputError(f"sample step must be positive, got {sample_step}")
    if not horizon > 0:
        raise InvalidInputError(f"horizon must be positive, got {horizon}")
    expm = _ExpCache(system)
    rec = _Recorder()
    rec.add(0.0, x, "sample")
    segments = list(iter_segments_up_to(signal, horizon))
    for k, (seg, _) in enumerate(segments):
        x = _flow(rec, expm, seg.index, seg.start, seg.duration, x, sample_step)
        last = k == len(segments) - 1
        rec.add(horizon if last else seg.end, x, "sample" if last else "switch")
    return rec.build(CONTINUOUS, signal.period)


def simulate_discrete(system: SwitchedSystem, signal: DiscreteSignal, x0, steps: int) -> Trajectory:
    """Iterate ``x(j+1) = A_sigma(j) x(j)`` for ``steps`` steps.

    A sample at step ``j`` is tagged ``switch`` when the index used next
    differs from the one just applied.
    """
    if int(steps) != steps or steps < 1:
        raise InvalidInputError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    x = _initial_state(x0, system.dim)
    seq = signal.indices_up_to(steps)
    for i in set(seq):
        system.matrix(i)
    rec = _Recorder()
    rec.add(0.0, x, "sample")
    for j, index in enumerate(seq):
        x = system.matrices[index - 1] @ x
        changed = j + 1 < steps and seq[j + 1] != index
        rec.add(float(j + 1), x, "switch" if changed else "sample")
    return rec.build(DISCRETE, signal.period)


def simulate_hybrid(hsys: HybridSystem, hsignal: HybridSignal, x0, horizon: int,
                    sample_step: float = None) -> Trajectory:
    """Flow for one time unit, jump at the integer, repeat up to ``horizon``.

    Both the state reached by the flow (``pre_jump``) and the state after the
    jump (``post_jump``) are recorded at each integer time.
    """
    if int(horizon) != horizon or horizon < 1:
        raise InvalidInputError(f"hybrid horizon must be a positive integer, got {horizon!r}")
    if sample_step is not None and not sample_step > 0:
        raise InvalidInputError(f"sample step must be positive, got {sample_step}")
    x = _initial_state(x0, hsys.dim)
    expm = _ExpCache(hsys.flow)
    rec = _Recorder()
    rec.add(0.0, x, "sample")
    items = hybrid_segments(hsignal, float(horizon))
    t = 0.0
    for k, item in enumerate(items):
        if isinstance(item, Flow):
            x = _flow(rec, expm, item.index, t, item.duration, x, sample_step)
            t += item.duration
            nxt = items[k + 1] if k + 1 < len(items) else None
            if isinstance(nxt, Jump):
                rec.add(float(nxt.time), x, "pre_jump")
            else:
                rec.add(t, x, "switch" if nxt is not None else "sample")
        else:
            x = hsys.jump.matrix(item.index) @ x
            t = float(item.time)
            rec.add(t, x, "post_jump")
    return rec.build(HYBRID, hsignal.sigma1.period)


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    max_ratio: float
    checked: int


def verify_bound(trajectory: Trajectory, system: SwitchedSystem, signal: ContinuousSignal) -> BoundCheck:
    """Check ``||x(t)|| <= prod ||exp(A_i t_ij)|| * ||x0||`` at every period end.

    ``max_ratio`` is the largest left/right ratio; the bound holds when it
    does not exceed ``1 + BOUND_TOL``.
    """
    if trajectory.mode != CONTINUOUS:
        raise InvalidPairingError(f"bound check needs a continuous trajectory, got {trajectory.mode}")
    if trajectory.dim != system.dim:
        raise InvalidPairingError(
            f"trajectory dimension {trajectory.dim} differs from system dimension {system.dim}")
    horizon = float(trajectory.times[-1])
    segments = [seg for seg, _ in iter_segments_up_to(signal, horizon)]
    ends = [seg.end for seg in segments[:-1]]
    if len(ends) != len(trajectory.switch_times) or not np.allclose(
            ends, trajectory.switch_times, rtol=1e-9, atol=1e-9):
        raise InvalidPairingError("trajectory switch times do not match the signal")
    checkpoints = [k for k, ev in enumerate(trajectory.events) if ev == "switch"]
    checkpoints.append(len(trajectory.events) - 1)
    norms = trajectory.norms
    x0_norm = float(norms[0])
    log_rhs = math.log(x0_norm) if x0_norm > 0 else -math.inf
    max_ratio = 0.0
    for seg, k in zip(segments, checkpoints):
        nrm = induced_norm(matrix_exp(system.matrix(seg.index), seg.duration))
        log_rhs += math.log(nrm) if nrm > 0 else -math.inf
        lhs = float(norms[k])
        if lhs == 0.0:
            ratio = 0.0
        elif log_rhs == -math.inf:
            ratio = math.inf
        else:
            ratio = math.exp(math.log(lhs) - log_rhs)
        max_ratio = max(max_ratio, ratio)
    return BoundCheck(holds=max_ratio <= 1.0 + BOUND_TOL, max_ratio=max_ratio,
                      checked=len(checkpoints))
