"""Switched systems and eventually-periodic switching signals.

Subsystem indices are 1-based throughout, matching how systems are written
down by hand. A signal is a finite prefix followed by an optional tail that
repeats forever; a signal without a tail ends at the sum of its prefix
durations.

Signals are right-continuous: at a switch instant the active index is the
one of the segment that starts there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError, OutOfHorizonError
from .linalg import as_matrix

CONTINUOUS = "continuous"
DISCRETE = "discrete"

# Relative slack when comparing accumulated switch times against a query time.
TIME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    """``n`` real ``m x m`` matrices with a continuous or discrete role."""

    matrices: tuple
    role: str = CONTINUOUS

    def __post_init__(self):
        if self.role not in (CONTINUOUS, DISCRETE):
            raise InvalidInputError(f"role must be 'continuous' or 'discrete', got {self.role!r}")
        mats = tuple(as_matrix(A) for A in self.matrices)
        if not mats:
            raise InvalidInputError("a switched system needs at least one matrix")
        dims = {A.shape[0] for A in mats}
        if len(dims) != 1:
            raise InvalidInputError(f"matrices have mixed dimensions {sorted(dims)}")
        for A in mats:
            A.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def n(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def matrix(self, index: int) -> np.ndarray:
        if not 1 <= index <= self.n:
            raise InvalidInputError(f"subsystem index {index} outside 1..{self.n}")
        return self.matrices[index - 1]

    def __eq__(self, other):
        if not isinstance(other, SwitchedSystem):
            return NotImplemented
        return (self.role == other.role and self.n == other.n
                and all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)))

    __hash__ = None


@dataclass(frozen=True)
class HybridSystem:
    """Continuous flow family plus discrete jump family on a shared state space."""

    flow: SwitchedSystem
    jump: SwitchedSystem

    def __post_init__(self):
        if self.flow.role != CONTINUOUS or self.jump.role != DISCRETE:
            raise InvalidInputError("hybrid system needs a continuous flow and a discrete jump family")
        if self.flow.dim != self.jump.dim:
            raise InvalidInputError(
                f"flow dimension {self.flow.dim} differs from jump dimension {self.jump.dim}")

    @property
    def dim(self) -> int:
        return self.flow.dim


def _segment_tuple(items, what):
    out = []
    for k, item in enumerate(items):
        try:
            index, duration = item
            index_i = int(index)
            duration_f = float(duration)
        except (TypeError, ValueError):
            raise InvalidInputError(f"{what} entry {k + 1} is not an (index, duration) pair: {item!r}") from None
        if index_i != index:
            raise InvalidInputError(f"{what} entry {k + 1} has non-integer index {index!r}")
        out.append((index_i, duration_f))
    return tuple(out)


def _index_tuple(items, what):
    out = []
    for k, item in enumerate(items):
        try:
            index_i = int(item)
        except (TypeError, ValueError):
            raise InvalidInputError(f"{what} entry {k + 1} is not an index: {item!r}") from None
        if index_i != item:
            raise InvalidInputError(f"{what} entry {k + 1} has non-integer index {item!r}")
        out.append(index_i)
    return tuple(out)


@dataclass(frozen=True)
class Segment:
    """One activation period: subsystem ``index`` on ``[start, start + duration)``."""

    index: int
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class ContinuousSignal:
    """Piecewise-constant schedule: ``prefix`` then ``tail`` repeated forever.

    Both are sequences of ``(index, duration)`` pairs. Durations are stored as
    given; non-positive or non-finite durations are reported by
    :func:`validate` rather than rejected here.
    """

    prefix: tuple = ()
    tail: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", _segment_tuple(self.prefix, "prefix"))
        if self.tail is not None:
            tail = _segment_tuple(self.tail, "tail")
            if not tail:
                raise InvalidInputError("a periodic tail must be non-empty")
            object.__setattr__(self, "tail", tail)
        elif not self.prefix:
            raise InvalidInputError("signal has neither prefix nor tail")

    @property
    def periodic(self) -> bool:
        return self.tail is not None

    @property
    def prefix_duration(self) -> float:
        return math.fsum(d for _, d in self.prefix)

    @property
    def period(self) -> Optional[float]:
        if self.tail is None:
            return None
        return math.fsum(d for _, d in self.tail)

    @property
    def horizon(self) -> float:
        return math.inf if self.periodic else self.prefix_duration

    def indices(self) -> set:
        return {i for i, _ in self.prefix} | {i for i, _ in (self.tail or ())}

    def iter_segments(self) -> Iterator[Segment]:
        """Yield segments in order, forever when periodic.

        Start times are computed from absolute positions (prefix length plus
        whole periods plus the offset inside the tail) so rounding does not
        accumulate over long horizons. Zero-length segments are skipped.
        """
        start = 0.0
        for index, duration in self.prefix:
            if duration > 0:
                yield Segment(index, start, duration)
            start = start + duration
        if self.tail is None:
            return
        base = self.prefix_duration
        period = self.period
        if not period > 0:
            raise InvalidInputError("periodic tail has no positive duration")
        offsets = [0.0]
        for _, d in self.tail:
            offsets.append(offsets[-1] + d)
        k = 0
        while True:
            origin = base + k * period
            for j, (index, duration) in enumerate(self.tail):
                if duration > 0:
                    s = origin + offsets[j]
                    e = origin + offsets[j + 1] if j + 1 < len(self.tail) else base + (k + 1) * period
                    yield Segment(index, s, e - s)
            k += 1

    def scaled(self, factor: float) -> "ContinuousSignal":
        """The same pattern with every duration multiplied by ``factor``."""
        if not factor > 0:
            raise InvalidInputError(f"scale factor must be positive, got {factor!r}")
        return ContinuousSignal(
            prefix=tuple((i, d * factor) for i, d in self.prefix),
            tail=None if self.tail is None else tuple((i, d * factor) for i, d in self.tail),
        )


@dataclass(frozen=True)
class DiscreteSignal:
    """Index sequence ``sigma(0), sigma(1), ...``: ``prefix`` then ``tail`` repeated."""

    prefix: tuple = ()
    tail: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", _index_tuple(self.prefix, "prefix"))
        if self.tail is not None:
            tail = _index_tuple(self.tail, "tail")
            if not tail:
                raise InvalidInputError("a periodic tail must be non-empty")
            object.__setattr__(self, "tail", tail)
        elif not self.prefix:
            raise InvalidInputError("signal has neither prefix nor tail")

    @property
    def periodic(self) -> bool:
        return self.tail is not None

    @property
    def horizon(self) -> float:
        return math.inf if self.periodic else len(self.prefix)

    @property
    def period(self) -> Optional[int]:
        return None if self.tail is None else len(self.tail)

    def indices(self) -> set:
        return set(self.prefix) | set(self.tail or ())

    def index_at(self, j: int) -> int:
        if j < 0:
            raise InvalidInputError(f"step must be nonnegative, got {j}")
        if j < len(self.prefix):
            return self.prefix[j]
        if self.tail is None:
            raise OutOfHorizonError(f"step {j} beyond finite signal of length {len(self.prefix)}")
        return self.tail[(j - len(self.prefix)) % len(self.tail)]

    def indices_up_to(self, t: int) -> list:
        """The first ``t`` indices ``sigma(0), ..., sigma(t-1)``."""
        if t > self.horizon:
            raise OutOfHorizonError(f"{t} steps requested from a signal of length {len(self.prefix)}")
        return [self.index_at(j) for j in range(t)]


@dataclass(frozen=True)
class HybridSignal:
    """Flow schedule ``sigma1`` and jump selector ``sigma2``.

    ``sigma2[n]`` selects the jump applied at time ``n + 1``.
    """

    sigma1: ContinuousSignal
    sigma2: DiscreteSignal

    @property
    def horizon(self) -> float:
        return min(self.sigma1.horizon, self.sigma2.horizon)


Signal = Union[ContinuousSignal, DiscreteSignal]


def _tol(t):
    return TIME_TOL * max(1.0, abs(t))


def _check_time(signal: ContinuousSignal, t: float, allow_end: bool):
    if not math.isfinite(t) or t < 0:
        raise InvalidInputError(f"time must be finite and nonnegative, got {t!r}")
    h = signal.horizon
    if t > h + _tol(h) or (not allow_end and t >= h):
        raise OutOfHorizonError(f"time {t} outside signal horizon {h}")


def active_index(signal: ContinuousSignal, t: float) -> int:
    """Index active at time ``t`` (right-continuous at switch instants)."""
    _check_time(signal, t, allow_end=False)
    for seg in signal.iter_segments():
        if seg.end > t:
            return seg.index
    raise OutOfHorizonError(f"time {t} outside signal horizon {signal.horizon}")


def iter_segments_up_to(signal: ContinuousSignal, t: float):
    """Yield ``(segment, completed)`` for the segments covering ``[0, t]``.

    The last segment is clipped at ``t``; ``completed`` is False only for a
    clipped segment.
    """
    _check_time(signal, t, allow_end=True)
    tol = _tol(t)
    for seg in signal.iter_segments():
        if seg.start >= t - tol:
            return
        if seg.end <= t + tol:
            yield seg, True
        else:
            yield Segment(seg.index, seg.start, t - seg.start), False
            return


def segments_up_to(signal: ContinuousSignal, t: float) -> list:
    """``(index, duration)`` pairs covering ``[0, t]``, the last possibly partial."""
    return [(seg.index, seg.duration) for seg, _ in iter_segments_up_to(signal, t)]


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def errors(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors


def validate(system: SwitchedSystem, signal: Signal) -> ValidationReport:
    """Check a signal against a system.

    Errors: index out of range, non-positive or non-finite duration.
    Warnings: a subsystem that is not switched on infinitely often (absent
    from the tail, or the signal is finite). Such subsystems do not affect
    asymptotic stability and are dropped from the analysis.
    """
    findings = []
    n = system.n
    if isinstance(signal, ContinuousSignal):
        entries = list(signal.prefix) + list(signal.tail or ())
        for k, (index, duration) in enumerate(entries, start=1):
            if not 1 <= index <= n:
                findings.append(Finding("error", "index-range",
                                        f"index {index} out of range 1..{n} at segment {k}"))
            if not math.isfinite(duration):
                findings.append(Finding("error", "duration",
                                        f"non-finite duration at segment {k}"))
            elif duration <= 0:
                findings.append(Finding("error", "duration",
                                        f"non-positive duration at segment {k}"))
        tail_indices = {i for i, d in (signal.tail or ()) if d > 0}
    elif isinstance(signal, DiscreteSignal):
        entries = list(signal.prefix) + list(signal.tail or ())
        for k, index in enumerate(entries, start=1):
            if not 1 <= index <= n:
                findings.append(Finding("error", "index-range",
                                        f"index {index} out of range 1..{n} at step {k}"))
        tail_indices = set(signal.tail or ())
    else:
        raise InvalidInputError(f"cannot validate signal of type {type(signal).__name__}")

    if not signal.periodic:
        findings.append(Finding("warning", "finite-signal",
                                "signal has no periodic tail; asymptotic quantities can only be estimated"))
    else:
        for i in range(1, n + 1):
            if i not in tail_indices:
                findings.append(Finding("warning", "unused",
                                        f"subsystem {i} unused asymptotically"))
    return ValidationReport(tuple(findings))


def validate_hybrid(hsys: HybridSystem, hsignal: HybridSignal) -> ValidationReport:
    flow = validate(hsys.flow, hsignal.sigma1)
    jump = validate(hsys.jump, hsignal.sigma2)
    tagged = [Finding(f.severity, f.code, f"flow: {f.message}") for f in flow.findings]
    tagged += [Finding(f.severity, f.code, f"jump: {f.message}") for f in jump.findings]
    return ValidationReport(tuple(tagged))


@dataclass(frozen=True)
class Flow:
    """Continuous evolution under flow subsystem ``index`` for ``duration``."""

    index: int
    duration: float


@dataclass(frozen=True)
class Jump:
    """Instantaneous jump by jump subsystem ``index`` at integer ``time``."""

    index: int
    time: int


def split_at_integers(segments):
    """Split ``(index, start, end)`` triples at integer times.

    Yields ``(index, start, end)`` pieces, none straddling an integer.
    """
    for index, start, end in segments:
        s = start
        while True:
            nxt = math.floor(s + _tol(s)) + 1.0
            if nxt < end - _tol(end):
                yield index, s, nxt
                s = nxt
            else:
                yield index, s, end
                break


def hybrid_segments(signal: HybridSignal, t: float) -> list:
    """Interleave flow pieces and jumps over ``[0, t]``.

    Flow segments of ``sigma1`` are split at integer times; after every
    completed unit interval ``[n, n+1]`` with ``n + 1 <= t`` the jump
    ``sigma2(n)`` is emitted.
    """
    _check_time(signal.sigma1, t, allow_end=True)
    if math.floor(t + _tol(t)) > signal.sigma2.horizon:
        raise OutOfHorizonError(f"jump signal too short for horizon {t}")
    tol = _tol(t)
    triples = ((seg.index, seg.start, seg.end)
               for seg, _ in iter_segments_up_to(signal.sigma1, t))
    out = []
    next_jump = 1
    for index, start, end in split_at_integers(triples):
        out.append(Flow(index, end - start))
        if abs(end - round(end)) <= tol and round(end) == next_jump:
            out.append(Jump(signal.sigma2.index_at(next_jump - 1), next_jump))
            next_jump += 1
    return out


def random_signal(n: int, length: int, seed=None, probabilities: Sequence[float] = None,
                  durations: tuple = (0.1, 1.0), cover_all: bool = True) -> ContinuousSignal:
    """Random periodic signal with i.i.d. indices and uniform durations.

    With ``cover_all`` every index appears in the tail at least once (the
    first ``n`` draws are a random permutation when ``length >= n``).
    """
    if length < 1:
        raise InvalidInputError("tail length must be positive")
    lo, hi = durations
    if not 0 < lo <= hi:
        raise InvalidInputError(f"duration bounds must satisfy 0 < lo <= hi, got {durations}")
    rng = np.random.default_rng(seed)
    indices = rng.choice(np.arange(1, n + 1), size=length, p=probabilities)
    if cover_all:
        if length < n:
            raise InvalidInputError(f"tail of length {length} cannot cover {n} subsystems")
        indices[:n] = rng.permutation(np.arange(1, n + 1))
        rng.shuffle(indices)
    taus = rng.uniform(lo, hi, size=length)
    return ContinuousSignal(tail=tuple((int(i), float(d)) for i, d in zip(indices, taus)))


def random_discrete_signal(n: int, length: int, seed=None, probabilities=None,
                           cover_all: bool = True) -> DiscreteSignal:
    rng = np.random.default_rng(seed)
    indices = rng.choice(np.arange(1, n + 1), size=length, p=probabilities)
    if cover_all:
        if length < n:
            raise InvalidInputError(f"tail of length {length} cannot cover {n} subsystems")
        indices[:n] = rng.permutation(np.arange(1, n + 1))
        rng.shuffle(indices)
    return DiscreteSignal(tail=tuple(int(i) for i in indices))
