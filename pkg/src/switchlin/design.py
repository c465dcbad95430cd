"""Switching-signal design: damping insertion and dwell-time planning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .certify import certify_continuous
from .errors import InfeasibleError, InvalidInputError
from .linalg import as_matrix, envelope_bound, induced_norm, matrix_exp, spectral_summary
from .model import ContinuousSignal, SwitchedSystem
from .stats import asymptotics


def damping_time(A0, lambda_target: float, scan_points: int = 4096,
                 scan_bound: float = None, tol: float = 1e-9) -> float:
    """Smallest ``t0`` with ``||exp(t0 A0)|| <= lambda_target``.

    The interval ``(0, scan_bound]`` (default ``100 / |alpha|``) is scanned
    on a uniform grid so transient growth cannot hide the first crossing,
    which is then bisected to ``tol``. The returned time satisfies the
    inequality.
    """
    A = as_matrix(A0)
    if not 0 < lambda_target < 1:
        raise InvalidInputError(f"lambda target must lie in (0, 1), got {lambda_target}")
    spec = spectral_summary(A)
    if not spec.hurwitz:
        raise InfeasibleError(
            f"damping matrix is not Hurwitz (spectral abscissa {spec.abscissa:.6g})")
    bound = scan_bound if scan_bound is not None else 100.0 / abs(spec.abscissa)
    h = bound / scan_points

    def norm_at(t):
        return induced_norm(matrix_exp(A, t))

    step = matrix_exp(A, h)
    E = np.eye(A.shape[0])
    lo = 0.0
    for k in range(1, scan_points + 1):
        E = E @ step
        if induced_norm(E) <= lambda_target:
            hi = k * h
            # the stepped product drifts slightly; confirm with a direct exponential
            if norm_at(hi) > lambda_target:
                continue
            break
        lo = k * h
    else:
        raise InfeasibleError(
            f"norm does not reach {lambda_target} within t <= {bound:.6g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if norm_at(mid) <= lambda_target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class StabilizerPlan:
    """Duty cycle for an added damping subsystem.

    ``N`` is the largest integer with ``lam ** (1/N) * c < 1``; the damping
    subsystem must be on for at least a ``1/N`` share of the time.
    ``repeats`` is how many ``t0`` damping periods follow each pass of the
    base tail in the emitted signal.
    """

    t0: float
    lam: float
    N: int
    c: float
    combined_margin: float
    repeats: int
    damping_index: int

    @property
    def damping_fraction(self) -> float:
        return 1.0 / self.N


def duty_denominator(c: float, lam: float) -> int:
    """Largest ``N >= 1`` with ``lam ** (1/N) * c < 1``, or 0 when none exists."""
    if not c > 1:
        raise InvalidInputError(f"c must exceed 1, got {c}")
    if not 0 < lam < 1:
        raise InvalidInputError(f"lambda must lie in (0, 1), got {lam}")
    N = max(int(math.ceil(-math.log(lam) / math.log(c))) - 1, 0)
    while N >= 1 and not lam ** (1.0 / N) * c < 1:
        N -= 1
    while lam ** (1.0 / (N + 1)) * c < 1:
        N += 1
    return N


def stabilizer_schedule(c: float, lam: float, t0: float, base_signal: ContinuousSignal,
                        damping_index: int) -> tuple[StabilizerPlan, ContinuousSignal]:
    """Insert a damping subsystem into a periodic base signal.

    The emitted tail is the base tail, durations unchanged, followed by
    ``repeats`` periods of ``(damping_index, t0)``. ``repeats`` is the least
    integer that gives the damping subsystem at least a ``1/N`` share of the
    time and makes the per-period log growth negative
    (``P log c + repeats log lam < 0``). A finite base signal is treated as
    its own tail.
    """
    if not t0 > 0:
        raise InvalidInputError(f"t0 must be positive, got {t0}")
    N = duty_denominator(c, lam)
    if N < 1:
        raise InfeasibleError(
            f"no duty cycle works: need lambda < 1/c = {1.0 / c:.6g}, got {lam:.6g}")
    tail = base_signal.tail if base_signal.periodic else base_signal.prefix
    period = math.fsum(d for _, d in tail)
    repeats = int(math.floor(period * math.log(c) / -math.log(lam))) + 1
    if N >= 2:
        repeats = max(repeats, int(math.ceil(period / ((N - 1) * t0) - 1e-12)))
    new_tail = tuple(tail) + ((damping_index, t0),) * repeats
    prefix = base_signal.prefix if base_signal.periodic else ()
    plan = StabilizerPlan(t0=t0, lam=lam, N=N, c=c, combined_margin=lam ** (1.0 / N) * c,
                          repeats=repeats, damping_index=damping_index)
    return plan, ContinuousSignal(prefix=prefix, tail=new_tail)


def stabilize(system: SwitchedSystem, signal: ContinuousSignal, A0, lam: float,
              stabilizing_set=None) -> tuple:
    """Certify, pick ``t0``, and emit a repaired system/signal pair.

    Returns ``(plan, new_system, new_signal, certificate)`` where the
    certificate is recomputed on the emitted signal. Raises
    :class:`InfeasibleError` when no repair is needed (``c <= 1``) or none
    exists.
    """
    base = certify_continuous(asymptotics(system, signal), stabilizing_set)
    c = math.exp(base.log_margin)
    if not base.log_margin > 0:
        raise InfeasibleError(f"no repair needed (c ≤ 1): c = {c:.6g}")
    A0 = as_matrix(A0)
    if A0.shape[0] != system.dim:
        raise InvalidInputError(f"A0 has dimension {A0.shape[0]}, system has {system.dim}")
    t0 = damping_time(A0, lam)
    new_system = SwitchedSystem(tuple(system.matrices) + (A0,), system.role)
    plan, new_signal = stabilizer_schedule(c, lam, t0, signal, system.n + 1)
    cert = certify_continuous(asymptotics(new_system, new_signal))
    return plan, new_system, new_signal, cert


@dataclass(frozen=True)
class DwellPlan:
    """Per-subsystem average dwell times for a round-robin cycle.

    Tuples are indexed by ``i - 1``. ``cycle_log_margin`` bounds the log of
    the flow-norm product over one cycle visiting every subsystem once.
    """

    t_bar: tuple
    k: tuple
    alpha: tuple
    envelope_horizon: tuple
    stable_set: tuple
    cycle_log_margin: float
    scale: float

    @property
    def cycle_duration(self) -> float:
        return math.fsum(self.t_bar)

    def cyclic_signal(self) -> ContinuousSignal:
        return ContinuousSignal(tail=tuple((i + 1, t) for i, t in enumerate(self.t_bar)))


def solve_dwell_scale(log_k: Sequence[float], alpha: Sequence[float], stable_set: Sequence[int],
                      bad_dwell: Mapping[int, float], margin: float = 0.05,
                      seed: Mapping[int, float] = None) -> tuple[float, dict]:
    """Minimal ``s`` with ``sum log k + sum_bad alpha t + s sum_stable alpha r <= -margin``.

    ``r`` is the seed ratio (default 1 for every stable index). Returns ``s``
    and the stable dwell times ``s * r``. When the fixed part is already
    non-positive any ``s > 0`` contracts and the seed is returned unscaled.
    """
    stable = sorted(set(stable_set))
    if not stable:
        raise InfeasibleError("stable set is empty")
    seed = seed or {i: 1.0 for i in stable}
    rate = math.fsum(alpha[i - 1] * seed[i] for i in stable)
    if not rate < 0:
        raise InfeasibleError("stable set has no net decay (sum of abscissa-weighted seeds >= 0)")
    const = math.fsum(log_k) + math.fsum(alpha[j - 1] * t for j, t in bad_dwell.items())
    if const <= 0:
        # every positive scaling contracts; keep the seed as given
        return 1.0, {i: seed[i] for i in stable}
    s = (-margin - const) / rate
    return s, {i: s * seed[i] for i in stable}


def dwell_time_design(system: SwitchedSystem, stable_set: Sequence[int],
                      bad_dwell: Mapping[int, float], T_bounds: Mapping[int, float] = None,
                      margin: float = 0.05, seed: Mapping[int, float] = None,
                      max_rounds: int = 50) -> DwellPlan:
    """Dwell times for which a round-robin cycle contracts.

    Each subsystem gets the envelope ``||exp(A_i t)|| <= k_i exp(alpha_i t)``
    on ``[0, T_i]``. Stable dwell times are a common scaling of ``seed``
    chosen so that ``sum_i (log k_i + alpha_i t_i) <= -margin``. When a
    resulting dwell time exceeds its envelope horizon the horizon is widened
    (at least doubled) and the solve repeated.
    """
    n = system.n
    stable = sorted(set(int(i) for i in stable_set))
    bad = {int(j): float(t) for j, t in bad_dwell.items()}
    if set(stable) & set(bad):
        raise InvalidInputError("a subsystem cannot be both stable and bad")
    if set(stable) | set(bad) != set(range(1, n + 1)):
        missing = sorted(set(range(1, n + 1)) - set(stable) - set(bad))
        raise InvalidInputError(f"subsystems {missing} have neither a stable role nor a dwell time")
    for j, t in bad.items():
        if not t > 0:
            raise InvalidInputError(f"dwell time of subsystem {j} must be positive")
    horizons = {i: 1.0 for i in stable}
    horizons.update(bad)
    if T_bounds:
        horizons.update({int(i): float(v) for i, v in T_bounds.items()})
    envelopes = {}
    for _ in range(max_rounds):
        for i in range(1, n + 1):
            if envelopes.get(i, (None, None, None))[2] != horizons[i]:
                k, a = envelope_bound(system.matrix(i), horizons[i])
                envelopes[i] = (k, a, horizons[i])
        alpha = [envelopes[i][1] for i in range(1, n + 1)]
        for i in stable:
            if not alpha[i - 1] < 0:
                raise InfeasibleError(f"stable-set subsystem {i} is not Hurwitz")
        log_k = [math.log(envelopes[i][0]) for i in range(1, n + 1)]
        s, dwell = solve_dwell_scale(log_k, alpha, stable, bad, margin, seed)
        widen = {i: max(t, 2.0 * horizons[i]) for i, t in dwell.items() if t > horizons[i]}
        widen.update({j: t for j, t in bad.items() if t > horizons[j]})
        if not widen:
            break
        # doubling keeps the number of rounds logarithmic in the final dwell time
        horizons.update(widen)
    else:
        raise InfeasibleError("envelope constants keep growing with the dwell times")
    t_bar = tuple(dwell[i] if i in dwell else bad[i] for i in range(1, n + 1))
    cycle = math.fsum(log_k[i] + alpha[i] * t_bar[i] for i in range(n))
    return DwellPlan(t_bar=t_bar, k=tuple(envelopes[i][0] for i in range(1, n + 1)),
                     alpha=tuple(alpha), envelope_horizon=tuple(horizons[i] for i in range(1, n + 1)),
                     stable_set=tuple(stable), cycle_log_margin=cycle, scale=s)
