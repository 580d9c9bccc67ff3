"""Exact stochastic simulation of the individual-based trait dynamics.

Direct-method SSA over per-trait event channels: clear births ``N_v b(v)(1-mu)``,
mutant births into v at ``mu * sum_w N_w b(w) m(w,v)``, and deaths
``N_v (d(v) + sum_w c(v,w) N_w / K)``.  Channel rates are updated
incrementally after each event and re-synchronised from scratch periodically;
the observed relative drift is reported with every record.

Stopping-time detection covers a fixed horizon, the fixation time (a trait
outside the resident neighbourhood reaching size of order ``K**(1/alpha)``),
re-entry into a band around a target stable configuration, and extinction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ModelError, SimulationError
from .esc import EscDescriptor
from .model import TraitGraphModel, distance_map, mu_k
from .tolerances import DEFAULT as TOL

_RESYNC_EVERY = 1_000_000
_SAMPLE_CAP = 4096

# stop reason codes shared with the compiled core
_HORIZON, _FIXATION, _BAND, _EXTINCT, _OVERFLOW, _EVENT_CAP = 0, 1, 2, 3, 4, 5
_REASONS = {
    _HORIZON: "horizon",
    _FIXATION: "fixation",
    _BAND: "band",
    _EXTINCT: "extinct",
    _OVERFLOW: "rate-overflow",
    _EVENT_CAP: "event-cap",
}


@dataclass(frozen=True)
class PopulationState:
    counts: dict[str, int]
    time: float
    K: int

    def beta(self, alpha: float) -> dict[str, float]:
        """Population-size exponents log_K(1 + N)."""
        return {
            v: math.log1p(n) / math.log(self.K) for v, n in self.counts.items()
        }


@dataclass(frozen=True)
class StopCondition:
    """What ends a simulation besides extinction (always on)."""

    horizon: float = math.inf
    fix_watch: frozenset[str] | None = None  # traits whose crossing stops the run
    fix_threshold: int | None = None
    band_target: EscDescriptor | None = None
    band_constant: float | None = None


@dataclass(frozen=True)
class SimulationRecord:
    K: int
    seed: int
    stop_reason: str
    time: float
    trigger: str | None
    final_counts: dict[str, int]
    sample_times: np.ndarray
    sample_counts: np.ndarray  # shape (samples, |V|), same trait order as model
    trait_order: tuple[str, ...]
    events: int
    rate_drift: float
    stride: int
    fix_threshold: int | None = None
    stop: StopCondition = field(default=StopCondition())

    @property
    def final_state(self) -> PopulationState:
        return PopulationState(self.final_counts, self.time, self.K)

    def to_csv(self) -> str:
        header = "t," + ",".join(self.trait_order)
        rows = [
            f"{t!r}," + ",".join(str(int(x)) for x in row)
            for t, row in zip(self.sample_times, self.sample_counts)
        ]
        return "\n".join([header] + rows) + "\n"


def default_fix_threshold(alpha: float, K: int) -> int:
    """Smallest count that counts as reaching size of order K**(1/alpha)."""
    return math.ceil(K ** (1.0 / alpha))


def default_band_constant(esc: EscDescriptor) -> float:
    """Band width constant sized to contain the quasi-stationary prefactors."""
    spread = max(
        (abs(math.log(a)) for a in esc.prefactors.values() if a > 0), default=0.0
    )
    return 2.0 * spread + 1.0


def esc_initial_counts(
    model: TraitGraphModel, esc: EscDescriptor, K: int
) -> dict[str, int]:
    """Quasi-stationary starting counts: round(a_w K mu**d) inside the
    neighbourhood, zero outside."""
    mu = mu_k(model.alpha, K)
    dist = distance_map(model, esc.resident)
    counts = {}
    for v in model.vertices:
        if v in esc.prefactors:
            counts[v] = int(round(esc.prefactors[v] * K * mu ** dist[v]))
        else:
            counts[v] = 0
    return counts


def simulate(
    model: TraitGraphModel,
    K: int,
    initial_counts: dict[str, int],
    stop: StopCondition,
    seed: int,
    *,
    sample_stride: int = 64,
    max_events: int = 2_000_000_000,
) -> SimulationRecord:
    """Run one exact trajectory until a stop condition fires."""
    if K < 2:
        raise ModelError("carrying capacity must be at least 2")
    n = len(model.vertices)
    idx = {v: i for i, v in enumerate(model.vertices)}
    N0 = np.zeros(n, dtype=np.int64)
    for v, c in initial_counts.items():
        model.require_vertex(v)
        if c < 0:
            raise ModelError(f"initial count of {v!r} must be nonnegative")
        N0[idx[v]] = int(c)
    b = np.array([model.b(v) for v in model.vertices])
    d = np.array([model.d(v) for v in model.vertices])
    C = np.array([[model.c(v, w) for w in model.vertices] for v in model.vertices])
    M = np.array([[model.m(v, w) for w in model.vertices] for v in model.vertices])
    mu = mu_k(model.alpha, K)

    watch = np.zeros(n, dtype=np.bool_)
    thresh = np.iinfo(np.int64).max
    fix_threshold = None
    if stop.fix_watch is not None:
        for v in stop.fix_watch:
            model.require_vertex(v)
            watch[idx[v]] = True
        fix_threshold = (
            stop.fix_threshold
            if stop.fix_threshold is not None
            else default_fix_threshold(model.alpha, K)
        )
        thresh = int(fix_threshold)

    band_on = stop.band_target is not None
    band_lo = np.zeros(n, dtype=np.int64)
    band_hi = np.zeros(n, dtype=np.int64)
    if band_on:
        target = stop.band_target
        const = (
            stop.band_constant
            if stop.band_constant is not None
            else default_band_constant(target)
        )
        dist = distance_map(model, target.resident)
        for i, v in enumerate(model.vertices):
            if v in target.v_alpha:
                size = K ** target.beta_profile[v]
                band_lo[i] = max(0, math.floor(size * math.exp(-const) - 1.0) + 1)
                band_hi[i] = max(0, math.ceil(size * math.exp(const) - 1.0) - 1)
            else:
                band_lo[i] = 0
                band_hi[i] = 0

    seed32 = int(seed) % (2**32)
    (
        t, reason, trigger, events, drift,
        sample_times, sample_counts, n_samples, stride,
    ) = _ssa_core(
        seed32, N0.copy(), b, d, C, M, mu, float(K),
        float(stop.horizon), watch, thresh,
        band_on, band_lo, band_hi,
        TOL.rate_overflow, max_events, _RESYNC_EVERY,
        sample_stride, _SAMPLE_CAP,
    )
    if reason == _OVERFLOW:
        raise SimulationError("total event rate exceeded the overflow guard")
    # the core writes the terminal state into the last sample-log row
    return SimulationRecord(
        K=K,
        seed=seed32,
        stop_reason=_REASONS[int(reason)],
        time=float(t),
        trigger=model.vertices[int(trigger)] if trigger >= 0 else None,
        final_counts={
            v: int(sample_counts[n_samples - 1, i])
            for i, v in enumerate(model.vertices)
        },
        sample_times=sample_times[:n_samples].copy(),
        sample_counts=sample_counts[:n_samples].copy(),
        trait_order=model.vertices,
        events=int(events),
        rate_drift=float(drift),
        stride=int(stride),
        fix_threshold=fix_threshold,
        stop=stop,
    )


def detect_t_fix(record: SimulationRecord, esc: EscDescriptor):
    """First time a trait outside the spreading neighbourhood reached the
    fixation size, with the triggering trait; None if it never happened."""
    if record.stop_reason == "fixation" and record.trigger not in esc.v_alpha:
        return record.time, record.trigger
    threshold = record.fix_threshold
    if threshold is None:
        K = record.K
        # fall back to the size-order definition with the record's own K
        threshold = default_fix_threshold(_alpha_from_band(record, esc), K)
    outside = [
        i for i, v in enumerate(record.trait_order) if v not in esc.v_alpha
    ]
    for k in range(len(record.sample_times)):
        for i in outside:
            if record.sample_counts[k, i] >= threshold:
                return float(record.sample_times[k]), record.trait_order[i]
    return None


def detect_t_esc(
    record: SimulationRecord,
    target: EscDescriptor,
    band_constant: float | None = None,
):
    """First sampled time the population sits inside the band around the
    target configuration with all outside traits extinct; None if never."""
    if record.stop_reason == "band":
        return record.time
    const = band_constant if band_constant is not None else default_band_constant(target)
    K = record.K
    lo = np.zeros(len(record.trait_order))
    hi = np.zeros(len(record.trait_order))
    for i, v in enumerate(record.trait_order):
        if v in target.v_alpha:
            size = K ** target.beta_profile[v]
            lo[i] = max(0.0, math.floor(size * math.exp(-const) - 1.0) + 1)
            hi[i] = max(0.0, math.ceil(size * math.exp(const) - 1.0) - 1)
    for k in range(len(record.sample_times)):
        row = record.sample_counts[k]
        if np.all(row >= lo) and np.all(row <= hi):
            return float(record.sample_times[k])
    return None


def _alpha_from_band(record, esc) -> float:
    # the largest non-resident exponent belongs to the first neighbour layer,
    # where beta = 1 - 1/alpha
    best = max(
        (beta for v, beta in esc.beta_profile.items()
         if v not in esc.resident and 0.0 < beta < 1.0),
        default=None,
    )
    if best is None:
        raise ModelError("cannot infer the mutation-scale exponent from the record")
    return 1.0 / (1.0 - best)


@njit(cache=True)
def _ssa_core(
    seed, N, b, d, C, M, mu, K,
    horizon, watch, thresh,
    band_on, band_lo, band_hi,
    rate_cap, max_events, resync_every,
    stride0, sample_cap,
):
    np.random.seed(seed)
    n = N.size
    clearb = np.zeros(n)
    mutin = np.zeros(n)
    death = np.zeros(n)
    comp = np.zeros(n)
    for v in range(n):
        acc = 0.0
        for w in range(n):
            acc += C[v, w] * N[w]
        comp[v] = acc / K
    for v in range(n):
        clearb[v] = N[v] * b[v] * (1.0 - mu)
        acc = 0.0
        for w in range(n):
            acc += N[w] * b[w] * M[w, v]
        mutin[v] = mu * acc
        death[v] = N[v] * (d[v] + comp[v])

    sample_times = np.zeros(sample_cap)
    sample_counts = np.zeros((sample_cap, n), dtype=np.int64)
    n_samples = 0
    stride = stride0
    since = 0
    # record the initial state
    sample_times[0] = 0.0
    for i in range(n):
        sample_counts[0, i] = N[i]
    n_samples = 1

    t = 0.0
    events = 0
    drift = 0.0
    reason = _EVENT_CAP
    trigger = -1

    # immediate band check
    if band_on:
        ok = True
        for i in range(n):
            if N[i] < band_lo[i] or N[i] > band_hi[i]:
                ok = False
                break
        if ok:
            reason = _BAND
            return (
                t, reason, trigger, events, drift,
                sample_times, sample_counts, n_samples, stride,
            )

    while events < max_events:
        total = 0.0
        for i in range(n):
            total += clearb[i] + mutin[i] + death[i]
        if total <= 0.0:
            reason = _EXTINCT
            break
        if total > rate_cap:
            reason = _OVERFLOW
            break
        dt = -math.log(np.random.random()) / total
        if t + dt > horizon:
            t = horizon
            reason = _HORIZON
            break
        t += dt
        # channel selection
        u = np.random.random() * total
        v = -1
        s = 0
        acc = 0.0
        for i in range(n):
            acc += clearb[i]
            if u < acc:
                v = i
                s = 1
                break
        if v < 0:
            for i in range(n):
                acc += mutin[i]
                if u < acc:
                    v = i
                    s = 1
                    break
        if v < 0:
            for i in range(n):
                acc += death[i]
                if u < acc:
                    v = i
                    s = -1
                    break
        if v < 0:
            v = n - 1
            s = -1
        if s < 0 and N[v] == 0:
            # numerically empty death channel; skip the impossible event
            events += 1
            continue
        N[v] += s
        # incremental updates
        clearb[v] += s * b[v] * (1.0 - mu)
        for w in range(n):
            mutin[w] += s * mu * b[v] * M[v, w]
            comp[w] += s * C[w, v] / K
            death[w] = N[w] * (d[w] + comp[w])
        events += 1
        since += 1
        if since >= stride:
            since = 0
            if n_samples == sample_cap:
                # halve the resolution to stay within the buffer
                for k in range(sample_cap // 2):
                    sample_times[k] = sample_times[2 * k]
                    for i in range(n):
                        sample_counts[k, i] = sample_counts[2 * k, i]
                n_samples = sample_cap // 2
                stride *= 2
            sample_times[n_samples] = t
            for i in range(n):
                sample_counts[n_samples, i] = N[i]
            n_samples += 1
        if s > 0 and watch[v] and N[v] >= thresh:
            reason = _FIXATION
            trigger = v
            break
        if band_on:
            ok = True
            for i in range(n):
                if N[i] < band_lo[i] or N[i] > band_hi[i]:
                    ok = False
                    break
            if ok:
                reason = _BAND
                break
        if events % resync_every == 0:
            for v2 in range(n):
                acc2 = 0.0
                for w in range(n):
                    acc2 += C[v2, w] * N[w]
                acc2 /= K
                cb = N[v2] * b[v2] * (1.0 - mu)
                acc3 = 0.0
                for w in range(n):
                    acc3 += N[w] * b[w] * M[w, v2]
                mi = mu * acc3
                de = N[v2] * (d[v2] + acc2)
                for old, new in ((clearb[v2], cb), (mutin[v2], mi), (death[v2], de)):
                    denom = abs(new) if abs(new) > 1e-300 else 1.0
                    rel = abs(old - new) / denom
                    if rel > drift:
                        drift = rel
                comp[v2] = acc2
                clearb[v2] = cb
                mutin[v2] = mi
                death[v2] = de

    # terminal state into the sample log so the caller can read final counts
    if n_samples == sample_cap:
        n_samples -= 1
    sample_times[n_samples] = t
    for i in range(n):
        sample_counts[n_samples, i] = N[i]
    n_samples += 1
    return (
        t, reason, trigger, events, drift,
        sample_times, sample_counts, n_samples, stride,
    )
