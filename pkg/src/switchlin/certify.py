"""Sufficient conditions for asymptotic stability of switched linear systems.

A certificate partitions the subsystems into a stabilizing set ``S`` (each
member contracts on average, ``c_i < 1``) and the rest, and evaluates the
log-margin

    L = sum_{i in S} mu_i log c_i + sum_{i not in S} nu_i log d_i,

with ``d_i = max(c_i, 1)``. ``L < 0`` certifies that every solution decays,
at a per-unit-time rate no worse than ``kappa = exp(L)`` up to a transient
constant. A negative verdict never asserts instability.

Only exact asymptotics (from periodic tails) can certify; empirical
estimates yield an advisory margin with verdict ``not-certified``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import InsufficientDataError, InvalidInputError, InvalidSetError
from .linalg import induced_norm
from .model import (CONTINUOUS, DISCRETE, ContinuousSignal, HybridSignal, HybridSystem,
                    SwitchedSystem, split_at_integers)
from .stats import Asymptotics, DiscreteAsymptotics, asymptotics, discrete_asymptotics

CERTIFIED = "certified-stable"
NOT_CERTIFIED = "not-certified"

#: L must be below -CERT_TOL to certify; guards the strict inequality against rounding.
CERT_TOL = 1e-12

EMPIRICAL_WARNING = "advisory only: empirical estimates"


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class Certificate:
    """Outcome of one stability check.

    In discrete mode ``c`` holds the matrix norms ``||A_i||``. Tuples are
    indexed by ``i - 1``; entries of dropped subsystems are None.
    ``proof_log_margin`` replaces ``d_i`` by ``c_i`` outside ``S``; it is
    reported for comparison and never used for the verdict.
    """

    mode: str
    stabilizing_set: tuple
    c: tuple
    d: tuple
    mu: tuple
    nu: tuple
    log_margin: float
    proof_log_margin: float
    kappa: float
    verdict: str
    exact: bool
    dropped: tuple = ()
    warnings: tuple = ()

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    @property
    def bounded(self) -> bool:
        """Every used subsystem is non-expansive on average (all ``c_i <= 1``)."""
        return all(c <= 1.0 + CERT_TOL for c in self.c if c is not None)


def _margins(log_c, mu, nu, S, dropped):
    L = proof = 0.0
    for k, lc in enumerate(log_c):
        i = k + 1
        if i in dropped:
            continue
        if i in S:
            term = mu[k] * lc if mu[k] > 0 else 0.0
            L += term
            proof += term
        else:
            if nu[k] > 0:
                L += nu[k] * max(lc, 0.0)
                proof += nu[k] * lc
    return L, proof


def _resolve_set(log_c, dropped, stabilizing_set):
    n = len(log_c)
    if stabilizing_set is None:
        return tuple(i for i in range(1, n + 1)
                     if i not in dropped and log_c[i - 1] < 0)
    S = tuple(sorted(set(int(i) for i in stabilizing_set)))
    for i in S:
        if not 1 <= i <= n:
            raise InvalidSetError(f"index {i} outside 1..{n}")
        if i in dropped:
            raise InvalidSetError(f"subsystem {i} is unused asymptotically and cannot stabilize")
        if not log_c[i - 1] < 0:
            raise InvalidSetError(
                f"subsystem {i} has c = {_exp(log_c[i - 1]):.6g} >= 1 and cannot stabilize")
    return S


def _verdict(L, S, exact):
    return CERTIFIED if exact and S and L < -CERT_TOL else NOT_CERTIFIED


def certify_continuous(asym: Asymptotics, stabilizing_set: Iterable[int] = None) -> Certificate:
    """Evaluate the continuous-time condition on precomputed asymptotics.

    Without ``stabilizing_set`` every subsystem with ``c_i < 1`` is used,
    which minimizes ``L`` over all admissible sets.
    """
    dropped = set(asym.dropped)
    missing = [k + 1 for k, lc in enumerate(asym.log_c) if lc is None and k + 1 not in dropped]
    if missing:
        raise InsufficientDataError(
            f"geometric mean undefined for subsystem(s) {missing}: no completed activation period")
    S = _resolve_set(asym.log_c, dropped, stabilizing_set)
    L, proof = _margins(asym.log_c, asym.mu, asym.nu, set(S), dropped)
    warnings = []
    if not asym.exact:
        warnings.append(EMPIRICAL_WARNING)
    for i in sorted(dropped):
        warnings.append(f"subsystem {i} unused asymptotically; dropped from the analysis")
    return Certificate(mode=CONTINUOUS, stabilizing_set=S, c=asym.c, d=asym.d, mu=asym.mu,
                       nu=asym.nu, log_margin=L, proof_log_margin=proof, kappa=_exp(L),
                       verdict=_verdict(L, S, asym.exact), exact=asym.exact,
                       dropped=tuple(sorted(dropped)), warnings=tuple(warnings))


def certify_discrete(system: SwitchedSystem, fractions: DiscreteAsymptotics) -> Certificate:
    """Evaluate the discrete-time condition with the forced set ``{i : ||A_i|| < 1}``."""
    if len(fractions.mu) != system.n:
        raise InvalidInputError(
            f"fractions cover {len(fractions.mu)} subsystems, system has {system.n}")
    norms = tuple(induced_norm(A) for A in system.matrices)
    log_norm = tuple(math.log(v) if v > 0 else -math.inf for v in norms)
    dropped = set(fractions.dropped)
    S = tuple(i for i in range(1, system.n + 1) if norms[i - 1] < 1.0 and i not in dropped)
    L = 0.0
    for k, ln in enumerate(log_norm):
        weight = fractions.mu[k] if k + 1 in S else fractions.nu[k]
        if weight > 0:
            L += weight * ln
    warnings = []
    if not fractions.exact:
        warnings.append(EMPIRICAL_WARNING)
    for i in sorted(dropped):
        warnings.append(f"subsystem {i} unused asymptotically; dropped from the analysis")
    c = tuple(None if k + 1 in dropped else v for k, v in enumerate(norms))
    d = tuple(None if v is None else max(v, 1.0) for v in c)
    return Certificate(mode=DISCRETE, stabilizing_set=S, c=c, d=d, mu=fractions.mu,
                       nu=fractions.nu, log_margin=L, proof_log_margin=L, kappa=_exp(L),
                       verdict=_verdict(L, S, fractions.exact), exact=fractions.exact,
                       dropped=tuple(sorted(dropped)), warnings=tuple(warnings))


BOTH_DECAY = "both-decay"
ONE_BOUNDED = "one-bounded-one-decays"
NO_COMBINATION = "none"


@dataclass(frozen=True)
class HybridCertificate:
    flow_certificate: Certificate
    jump_certificate: Certificate
    combination: str

    @property
    def verdict(self) -> str:
        return NOT_CERTIFIED if self.combination == NO_COMBINATION else CERTIFIED

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED


def split_flow_signal(sigma1: ContinuousSignal, max_multiple: int = 1000) -> Optional[ContinuousSignal]:
    """The flow schedule as the hybrid system experiences it, split at integer times.

    Splitting only ever increases the product of flow norms, so statistics of
    the split schedule bound the hybrid solution soundly. Returns a periodic
    signal when some multiple ``q * period`` (``q <= max_multiple``) is an
    integer, a finite signal for finite input, and None otherwise.
    """
    base = sigma1.prefix_duration
    if sigma1.periodic:
        period = sigma1.period
        length = None
        for q in range(1, max_multiple + 1):
            span = q * period
            if round(span) >= 1 and abs(span - round(span)) <= 1e-9 * span:
                length = span
                break
        if length is None:
            return None
        end = base + length
    else:
        end = sigma1.horizon
    triples = []
    for seg in sigma1.iter_segments():
        if seg.start >= end - 1e-12 * max(1.0, end):
            break
        triples.append((seg.index, seg.start, min(seg.end, end)))
    prefix, tail = [], []
    for index, s, e in split_at_integers(triples):
        (prefix if s < base - 1e-12 * max(1.0, base) else tail).append((index, e - s))
    if not sigma1.periodic:
        return ContinuousSignal(prefix=prefix)
    return ContinuousSignal(prefix=prefix, tail=tail)


def certify_hybrid(hsys: HybridSystem, hsignal: HybridSignal,
                   empirical_horizon: float = 1000.0) -> HybridCertificate:
    """Combine a flow certificate and a jump certificate.

    The flow part is certified on the flow schedule split at integer times.
    ``one-bounded-one-decays`` needs one part certified and every ``c_i``
    (or ``||A_i||``) of the other part at most 1.
    """
    split = split_flow_signal(hsignal.sigma1)
    if split is None:
        flow_asym = asymptotics(hsys.flow, hsignal.sigma1, horizon=empirical_horizon)
    else:
        flow_asym = asymptotics(hsys.flow, split)
    flow = certify_continuous(flow_asym)
    jump = certify_discrete(hsys.jump, discrete_asymptotics(hsys.jump, hsignal.sigma2))
    if flow.certified and jump.certified:
        combo = BOTH_DECAY
    elif (flow.certified and jump.exact and jump.bounded) or (jump.certified and flow.exact and flow.bounded):
        combo = ONE_BOUNDED
    else:
        combo = NO_COMBINATION
    return HybridCertificate(flow_certificate=flow, jump_certificate=jump, combination=combo)


@dataclass(frozen=True)
class SConditionReport:
    """Outcome of the ratio test: ``prod_stable c_i * (prod_bad c_j)**s < 1``
    and ``liminf m_i / m_j > 1/s`` for every stable ``i`` and bad ``j``."""

    holds: bool
    log_product: float
    product_ok: bool
    ratios_ok: bool
    failed_pairs: tuple
    s: float

    @property
    def message(self) -> str:
        if self.holds:
            return "ratio condition holds"
        parts = []
        if not self.product_ok:
            parts.append(f"product clause fails (log product {self.log_product:.6g} >= 0)")
        if not self.ratios_ok:
            pairs = ", ".join(f"({i},{j})" for i, j, _ in self.failed_pairs)
            parts.append(f"usage ratio <= 1/s for stable/bad pairs {pairs}")
        return "; ".join(parts)


def certify_s_condition(asym: Asymptotics, stable_set: Iterable[int], bad_set: Iterable[int],
                        s: float) -> SConditionReport:
    """Check the usage-ratio form of the sufficient condition.

    Exact mode compares ``mu_i / mu_j``; empirical mode uses the conservative
    bound ``mu_i / nu_j``. A bad subsystem with zero usage has ratio +inf.
    """
    if not (math.isfinite(s) and s > 0):
        raise InvalidInputError(f"s must be positive, got {s!r}")
    stable = sorted(set(int(i) for i in stable_set))
    bad = sorted(set(int(j) for j in bad_set))
    if set(stable) & set(bad):
        raise InvalidSetError(f"stable and bad sets overlap: {sorted(set(stable) & set(bad))}")
    n = asym.n
    for i in stable + bad:
        if not 1 <= i <= n:
            raise InvalidSetError(f"index {i} outside 1..{n}")
        if asym.log_c[i - 1] is None:
            raise InsufficientDataError(f"geometric mean undefined for subsystem {i}")
    for i in stable:
        if not asym.log_c[i - 1] < 0:
            raise InvalidSetError(f"stable subsystem {i} has c >= 1")
    log_product = math.fsum(asym.log_c[i - 1] for i in stable) + s * math.fsum(
        asym.log_c[j - 1] for j in bad)
    failed = []
    for i in stable:
        for j in bad:
            denom = asym.mu[j - 1] if asym.exact else asym.nu[j - 1]
            ratio = math.inf if denom == 0 else asym.mu[i - 1] / denom
            if not ratio > 1.0 / s:
                failed.append((i, j, ratio))
    product_ok = log_product < -CERT_TOL
    return SConditionReport(holds=product_ok and not failed, log_product=log_product,
                            product_ok=product_ok, ratios_ok=not failed,
                            failed_pairs=tuple(failed), s=s)
