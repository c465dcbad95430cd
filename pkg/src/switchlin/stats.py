"""Per-subsystem switching statistics and their asymptotic limits.

For each subsystem ``i`` and time ``t`` this tracks the number of activation
periods ``n_i(t)``, the total active time ``m_i(t)``, the individual period
durations, and the time-weighted geometric mean of the flow norms
``(prod_j ||exp(A_i t_ij)||) ** (1 / m_i)`` over completed periods. Products
are kept as sums of logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidInputError
from .linalg import induced_norm, matrix_exp
from .model import (ContinuousSignal, DiscreteSignal, SwitchedSystem,
                    iter_segments_up_to)

#: Fraction of switch-time samples used for empirical limsup/liminf estimates.
DEFAULT_WINDOW = 0.5


class FlowNormCache:
    """Memoized ``log ||exp(A_i tau)||`` for one system."""

    def __init__(self, system: SwitchedSystem):
        self.system = system
        self._cache = {}

    def log_norm(self, index: int, tau: float) -> float:
        key = (index, tau)
        val = self._cache.get(key)
        if val is None:
            nrm = induced_norm(matrix_exp(self.system.matrix(index), tau))
            val = math.log(nrm) if nrm > 0 else -math.inf
            self._cache[key] = val
        return val


@dataclass(frozen=True)
class SubsystemStats:
    """Statistics of subsystem ``index`` at one evaluation time.

    ``durations`` lists every period, the last one possibly partial;
    ``log_norm_sum`` and ``completed_duration`` cover completed periods only.
    ``log_geo_mean`` is None while no period has completed.
    """

    index: int
    n_i: int
    m_i: float
    durations: tuple
    log_norm_sum: float
    completed_duration: float

    @property
    def log_geo_mean(self) -> Optional[float]:
        if self.completed_duration <= 0:
            return None
        return self.log_norm_sum / self.completed_duration

    @property
    def geo_mean(self) -> Optional[float]:
        lg = self.log_geo_mean
        return None if lg is None else math.exp(lg)


def _check_indices(system, indices):
    bad = sorted(i for i in indices if not 1 <= i <= system.n)
    if bad:
        raise InvalidInputError(f"signal uses indices {bad} outside 1..{system.n}")


def accumulate(system: SwitchedSystem, signal: ContinuousSignal, t: float,
               cache: FlowNormCache = None) -> list:
    """Statistics for every subsystem over ``[0, t]``, in index order."""
    _check_indices(system, signal.indices())
    cache = cache or FlowNormCache(system)
    durations = {i: [] for i in range(1, system.n + 1)}
    log_sum = dict.fromkeys(durations, 0.0)
    done = dict.fromkeys(durations, 0.0)
    for seg, completed in iter_segments_up_to(signal, t):
        durations[seg.index].append(seg.duration)
        if completed:
            log_sum[seg.index] += cache.log_norm(seg.index, seg.duration)
            done[seg.index] += seg.duration
    return [SubsystemStats(index=i, n_i=len(durations[i]), m_i=math.fsum(durations[i]),
                           durations=tuple(durations[i]), log_norm_sum=log_sum[i],
                           completed_duration=done[i])
            for i in durations]


def _exp(x):
    return math.exp(x) if x < 709.0 else math.inf


@dataclass(frozen=True)
class Asymptotics:
    """Asymptotic geometric means and occupancy fractions, one entry per subsystem.

    Position ``i - 1`` of each tuple describes subsystem ``i``. ``log_c``
    entries are None for subsystems that are dropped (absent from the tail)
    or have no completed period in the empirical window. ``exact`` is True
    only for closed-form values from a periodic tail.
    """

    log_c: tuple
    mu: tuple
    nu: tuple
    exact: bool
    dropped: tuple = ()
    window: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def c(self) -> tuple:
        return tuple(None if lc is None else _exp(lc) for lc in self.log_c)

    @property
    def d(self) -> tuple:
        return tuple(None if lc is None else _exp(max(lc, 0.0)) for lc in self.log_c)


def asymptotics(system: SwitchedSystem, signal: ContinuousSignal, horizon: float = None,
                window: float = DEFAULT_WINDOW) -> Asymptotics:
    """Asymptotic statistics of ``signal`` driving ``system``.

    With a periodic tail and no ``horizon`` the values are exact: per index,
    the log-mean over the tail's segments and its share of the period. The
    prefix plays no role.

    Otherwise (finite signal, or an explicit ``horizon``) the running
    geometric means and occupancy fractions are sampled at every switch time
    up to the horizon, and the max/min over the final ``window`` fraction of
    samples stand in for limsup/liminf.
    """
    _check_indices(system, signal.indices())
    if horizon is None and signal.periodic:
        return _exact_asymptotics(system, signal)
    if horizon is None:
        horizon = signal.horizon
    if not 0 < window <= 1:
        raise InvalidInputError(f"window must lie in (0, 1], got {window}")
    return _empirical_asymptotics(system, signal, horizon, window)


def _exact_asymptotics(system, signal):
    cache = FlowNormCache(system)
    n = system.n
    period = signal.period
    log_sum = [0.0] * n
    time = [[] for _ in range(n)]
    for index, tau in signal.tail:
        if tau > 0:
            log_sum[index - 1] += cache.log_norm(index, tau)
            time[index - 1].append(tau)
    log_c, mu, dropped = [], [], []
    for i in range(n):
        total = math.fsum(time[i])
        if total > 0:
            log_c.append(log_sum[i] / total)
            mu.append(total / period)
        else:
            log_c.append(None)
            mu.append(0.0)
            dropped.append(i + 1)
    return Asymptotics(log_c=tuple(log_c), mu=tuple(mu), nu=tuple(mu), exact=True,
                       dropped=tuple(dropped))


def _empirical_asymptotics(system, signal, horizon, window):
    cache = FlowNormCache(system)
    n = system.n
    log_sum = [0.0] * n
    done = [0.0] * n
    samples = []  # (t, [log geo mean or None], [m_i / t])
    for seg, completed in iter_segments_up_to(signal, horizon):
        if not completed:
            break
        k = seg.index - 1
        log_sum[k] += cache.log_norm(seg.index, seg.duration)
        done[k] += seg.duration
        t = seg.end
        samples.append(([log_sum[i] / done[i] if done[i] > 0 else None for i in range(n)],
                        [done[i] / t for i in range(n)]))
    if not samples:
        return Asymptotics(log_c=(None,) * n, mu=(0.0,) * n, nu=(0.0,) * n, exact=False,
                           window=window)
    tail = samples[len(samples) - max(1, int(math.ceil(window * len(samples)))):]
    log_c, mu, nu = [], [], []
    for i in range(n):
        means = [s[0][i] for s in tail if s[0][i] is not None]
        log_c.append(max(means) if means else None)
        fractions = [s[1][i] for s in tail]
        mu.append(min(fractions))
        nu.append(max(fractions))
    return Asymptotics(log_c=tuple(log_c), mu=tuple(mu), nu=tuple(nu), exact=False,
                       window=window)


@dataclass(frozen=True)
class DiscreteCounts:
    """Usage counts ``n_i(t)`` of a discrete signal after ``t`` steps."""

    t: int
    counts: tuple
    fractions: tuple
    exact_fractions: Optional[tuple] = None


def _tail_fractions(signal: DiscreteSignal, n: int):
    if signal.tail is None:
        return None
    L = len(signal.tail)
    return tuple(signal.tail.count(i) / L for i in range(1, n + 1))


def accumulate_discrete(system: SwitchedSystem, signal: DiscreteSignal, t: int) -> DiscreteCounts:
    _check_indices(system, signal.indices())
    if t < 1 or int(t) != t:
        raise InvalidInputError(f"step count must be a positive integer, got {t!r}")
    seq = signal.indices_up_to(int(t))
    counts = tuple(seq.count(i) for i in range(1, system.n + 1))
    return DiscreteCounts(t=int(t), counts=counts, fractions=tuple(c / t for c in counts),
                          exact_fractions=_tail_fractions(signal, system.n))


@dataclass(frozen=True)
class DiscreteAsymptotics:
    """Usage fractions ``mu_i <= nu_i`` of a discrete signal (position ``i - 1``)."""

    mu: tuple
    nu: tuple
    exact: bool
    dropped: tuple = ()


def discrete_asymptotics(system: SwitchedSystem, signal: DiscreteSignal, horizon: int = None,
                         window: float = DEFAULT_WINDOW) -> DiscreteAsymptotics:
    """Exact usage fractions from a periodic tail, else windowed estimates."""
    _check_indices(system, signal.indices())
    n = system.n
    if horizon is None and signal.periodic:
        frac = _tail_fractions(signal, n)
        return DiscreteAsymptotics(mu=frac, nu=frac, exact=True,
                                   dropped=tuple(i + 1 for i in range(n) if frac[i] == 0))
    horizon = int(signal.horizon if horizon is None else horizon)
    seq = signal.indices_up_to(horizon)
    counts = [0] * n
    history = []
    for step, index in enumerate(seq, start=1):
        counts[index - 1] += 1
        history.append([c / step for c in counts])
    if not history:
        return DiscreteAsymptotics(mu=(0.0,) * n, nu=(0.0,) * n, exact=False)
    tail = history[len(history) - max(1, int(math.ceil(window * len(history)))):]
    mu = tuple(min(h[i] for h in tail) for i in range(n))
    nu = tuple(max(h[i] for h in tail) for i in range(n))
    return DiscreteAsymptotics(mu=mu, nu=nu, exact=False)
