"""Event-driven simulation of one chain and of the two-chain hierarchy.

A future-event-list loop drives four event families per chain: Poisson
request arrivals, block-mined events (enabled only while requests are
pending, each mining the oldest ``min(pending, k)`` requests), rejection
events (enabled while pending, each permanently removing the oldest
``min(pending, r)`` requests), and per-link exponential service.  Mining
and rejection clocks are memoryless, so they are re-armed from scratch
whenever the pending pool refills and lazily invalidated, via generation
counters, when it drains.

Confirmations are handled in one of two modes.  ``additive`` adds ``N - 1``
independent exponential block intervals to each request's inclusion time
before it may join the service queue.  ``event-driven`` instead counts
``N - 1`` actual subsequent block-mined events of the same chain, which
can stall when the pending pool goes quiet; the mode exists to quantify
that approximation gap.

The recorded latency of a request is ``service_start - submitted``: the
request's own service time is excluded.

In the hierarchical composition an end-user request first traverses the
secondary chain; the moment its secondary service starts, a corresponding
request is injected into the primary chain, and the end-to-end latency is
the primary service start minus the original submission.  The primary
chain optionally carries its own background Poisson traffic on top of the
injected stream.

A run is strictly single-threaded and bitwise reproducible for a fixed
seed; replications with distinct seeds can run concurrently and be merged
by the caller.
"""

from __future__ import annotations

import csv
import heapq
import math
import random
from dataclasses import dataclass, field
from collections import deque

import numpy as np
from scipy import stats as _scipy_stats

from .config import ChainConfig, HierarchicalConfig, validate

_ARRIVAL, _MINE, _REJECT, _ENTER, _DEPART = range(5)

CONFIRMATION_MODES = ("additive", "event-driven")
DEFAULT_MAX_PENDING = 10**6
_CI_BATCHES = 32


class SimulationUnstableError(RuntimeError):
    """Pending pool exceeded the runaway threshold: the mining stage cannot drain."""


@dataclass(slots=True)
class RequestRecord:
    """Lifecycle timestamps of one request on one chain."""

    request_id: int
    chain: str
    submitted_at: float
    mined_at: float | None = None
    confirmed_at: float | None = None
    service_start_at: float | None = None
    disposition: str = "in-flight"
    origin_submitted_at: float | None = None


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    variance: float
    confidence_interval_95: tuple[float, float]
    count: int


@dataclass
class SimResult:
    """Latency samples and counters from one simulation run.

    ``latency_samples`` holds the post-warm-up samples the statistics are
    computed from.  ``breakdown`` is present for hierarchical runs and maps
    ``secondary``, ``primary`` and ``e2e`` to per-component statistics over
    the same retained requests.
    """

    latency_samples: np.ndarray
    mean: float
    variance: float
    confidence_interval_95: tuple[float, float]
    served_count: int
    rejected_count: int
    generated_count: int
    in_flight_count: int
    max_mined_batch: int
    max_rejected_batch: int
    warmup_discarded: int
    breakdown: dict[str, LatencyStats] | None = None
    aux_counts: dict[str, int] = field(default_factory=dict)
    records: list[RequestRecord] | None = None


def _stats(samples: list[float] | np.ndarray) -> LatencyStats:
    arr = np.asarray(samples, dtype=np.float64)
    n = arr.size
    if n == 0:
        nan = float("nan")
        return LatencyStats(nan, nan, (nan, nan), 0)
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1)) if n > 1 else 0.0
    # Batch means absorb the autocorrelation of queueing output; fall back
    # to the iid interval when there are too few samples to batch.
    if n >= 2 * _CI_BATCHES:
        batch = n // _CI_BATCHES
        means = arr[: batch * _CI_BATCHES].reshape(_CI_BATCHES, batch).mean(axis=1)
        center = float(means.mean())
        spread = float(means.std(ddof=1)) / math.sqrt(_CI_BATCHES)
        tcrit = float(_scipy_stats.t.ppf(0.975, _CI_BATCHES - 1))
        half = tcrit * spread
        return LatencyStats(mean, variance, (center - half, center + half), n)
    spread = math.sqrt(variance / n) if n > 1 else 0.0
    tcrit = float(_scipy_stats.t.ppf(0.975, max(n - 1, 1)))
    half = tcrit * spread
    return LatencyStats(mean, variance, (mean - half, mean + half), n)


class _Chain:
    """Mutable per-chain simulation state."""

    __slots__ = (
        "label", "arrival_rate", "mining_rate", "rejection_rate", "service_rate",
        "servers", "capacity", "reject_batch", "extra_confs", "event_driven",
        "pending", "mine_gen", "reject_gen", "blocks_mined", "conf_groups",
        "ready_queue", "busy", "samples", "generated", "served", "rejected",
        "max_mined_batch", "max_rejected_batch", "on_service_start", "on_reject",
    )

    def __init__(self, label: str, config: ChainConfig, mode: str):
        self.label = label
        self.arrival_rate = config.arrival_rate
        self.mining_rate = config.mining_rate
        self.rejection_rate = config.rejection_rate
        self.service_rate = config.service_rate
        self.servers = config.servers
        self.capacity = config.block_capacity
        self.reject_batch = config.rejection_batch
        self.extra_confs = config.confirmations - 1
        self.event_driven = mode == "event-driven"
        self.pending: deque[RequestRecord] = deque()
        self.mine_gen = 0
        self.reject_gen = 0
        self.blocks_mined = 0
        self.conf_groups: deque[tuple[int, list[RequestRecord]]] = deque()
        self.ready_queue: deque[RequestRecord] = deque()
        self.busy = 0
        self.samples: list[float] = []
        self.generated = 0
        self.served = 0
        self.rejected = 0
        self.max_mined_batch = 0
        self.max_rejected_batch = 0
        self.on_service_start = None
        self.on_reject = None


class _Engine:
    """Shared clock, event heap and RNG for one simulation run."""

    __slots__ = ("rng", "heap", "seq", "now", "max_pending", "stop", "next_id", "records")

    def __init__(self, seed: int, max_pending: int, collect_records: bool):
        self.rng = random.Random(seed)
        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.max_pending = max_pending
        self.stop = False
        self.next_id = 0
        self.records: list[RequestRecord] | None = [] if collect_records else None

    def push(self, t: float, kind: int, chain: _Chain, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, chain, payload))

    def new_record(self, chain: _Chain, t: float, origin: float | None = None) -> RequestRecord:
        rec = RequestRecord(self.next_id, chain.label, t, origin_submitted_at=origin)
        self.next_id += 1
        if self.records is not None:
            self.records.append(rec)
        return rec

    # -- chain mechanics ---------------------------------------------------

    def submit(self, chain: _Chain, rec: RequestRecord, t: float) -> None:
        chain.generated += 1
        chain.pending.append(rec)
        if len(chain.pending) > self.max_pending:
            raise SimulationUnstableError(
                f"chain {chain.label!r}: pending pool exceeded {self.max_pending} requests "
                f"at t={t:.3f}; the configuration cannot drain its arrivals"
            )
        if len(chain.pending) == 1:
            chain.mine_gen += 1
            self.push(t + self.rng.expovariate(chain.mining_rate), _MINE, chain, chain.mine_gen)
            if chain.rejection_rate > 0.0:
                chain.reject_gen += 1
                self.push(
                    t + self.rng.expovariate(chain.rejection_rate),
                    _REJECT, chain, chain.reject_gen,
                )

    def _release(self, chain: _Chain, rec: RequestRecord, t: float) -> None:
        assert rec.submitted_at <= rec.mined_at <= rec.confirmed_at <= t
        if chain.busy < chain.servers:
            self._begin_service(chain, rec, t)
        else:
            chain.ready_queue.append(rec)

    def _begin_service(self, chain: _Chain, rec: RequestRecord, t: float) -> None:
        rec.service_start_at = t
        rec.disposition = "served"
        chain.served += 1
        chain.samples.append(t - rec.submitted_at)
        chain.busy += 1
        self.push(t + self.rng.expovariate(chain.service_rate), _DEPART, chain, None)
        if chain.on_service_start is not None:
            chain.on_service_start(rec, t)

    def _handle_mine(self, chain: _Chain, t: float, gen: int) -> None:
        if gen != chain.mine_gen:
            return
        size = min(len(chain.pending), chain.capacity)
        batch = [chain.pending.popleft() for _ in range(size)]
        chain.blocks_mined += 1
        if size > chain.max_mined_batch:
            chain.max_mined_batch = size
        if chain.event_driven:
            for rec in batch:
                rec.mined_at = t
            chain.conf_groups.append((chain.blocks_mined + chain.extra_confs, batch))
            while chain.conf_groups and chain.conf_groups[0][0] <= chain.blocks_mined:
                _, group = chain.conf_groups.popleft()
                for rec in group:
                    rec.confirmed_at = t
                    self._release(chain, rec, t)
        else:
            expovariate = self.rng.expovariate
            for rec in batch:
                rec.mined_at = t
                if chain.extra_confs:
                    delay = sum(
                        expovariate(chain.mining_rate) for _ in range(chain.extra_confs)
                    )
                    rec.confirmed_at = t + delay
                    self.push(rec.confirmed_at, _ENTER, chain, rec)
                else:
                    rec.confirmed_at = t
                    self._release(chain, rec, t)
        if chain.pending:
            chain.mine_gen += 1
            self.push(t + self.rng.expovariate(chain.mining_rate), _MINE, chain, chain.mine_gen)
        else:
            chain.mine_gen += 1
            chain.reject_gen += 1

    def _handle_reject(self, chain: _Chain, t: float, gen: int) -> None:
        if gen != chain.reject_gen:
            return
        size = min(len(chain.pending), chain.reject_batch)
        batch = [chain.pending.popleft() for _ in range(size)]
        if size > chain.max_rejected_batch:
            chain.max_rejected_batch = size
        for rec in batch:
            rec.disposition = "rejected"
            chain.rejected += 1
            if chain.on_reject is not None:
                chain.on_reject(rec, t)
        if chain.pending:
            chain.reject_gen += 1
            self.push(
                t + self.rng.expovariate(chain.rejection_rate), _REJECT, chain, chain.reject_gen
            )
        else:
            chain.mine_gen += 1
            chain.reject_gen += 1

    def run(self) -> None:
        heap = self.heap
        while heap and not self.stop:
            t, _, kind, chain, payload = heapq.heappop(heap)
            assert t >= self.now, "event processed out of timestamp order"
            self.now = t
            if kind == _ARRIVAL:
                rec = self.new_record(chain, t)
                self.submit(chain, rec, t)
                self.push(t + self.rng.expovariate(chain.arrival_rate), _ARRIVAL, chain, None)
            elif kind == _MINE:
                self._handle_mine(chain, t, payload)
            elif kind == _REJECT:
                self._handle_reject(chain, t, payload)
            elif kind == _ENTER:
                self._release(chain, payload, t)
            else:  # _DEPART
                chain.busy -= 1
                if chain.ready_queue:
                    self._begin_service(chain, chain.ready_queue.popleft(), t)


def _check_args(target_served: int, confirmation_mode: str) -> None:
    if target_served < 1:
        raise ValueError(f"target_served must be >= 1, got {target_served!r}")
    if confirmation_mode not in CONFIRMATION_MODES:
        raise ValueError(
            f"confirmation_mode must be one of {CONFIRMATION_MODES}, got {confirmation_mode!r}"
        )


def simulate_chain(
    config: ChainConfig,
    target_served: int,
    seed: int,
    confirmation_mode: str = "additive",
    *,
    validate_config: bool = True,
    max_pending: int = DEFAULT_MAX_PENDING,
    warmup_fraction: float = 0.1,
    collect_records: bool = False,
) -> SimResult:
    """Simulate one chain until ``target_served`` requests start service.

    The first ``warmup_fraction`` of the served samples is discarded before
    statistics are computed.  Identical arguments produce a bitwise
    identical result.
    """
    _check_args(target_served, confirmation_mode)
    if validate_config:
        validate(config)
    engine = _Engine(seed, max_pending, collect_records)
    chain = _Chain("chain", config, confirmation_mode)

    def stop_when_done(rec: RequestRecord, t: float) -> None:
        if chain.served >= target_served:
            engine.stop = True

    chain.on_service_start = stop_when_done
    engine.push(engine.rng.expovariate(chain.arrival_rate), _ARRIVAL, chain, None)
    engine.run()

    warmup = int(target_served * warmup_fraction)
    kept = np.asarray(chain.samples[warmup:], dtype=np.float64)
    stats = _stats(kept)
    in_flight = chain.generated - chain.served - chain.rejected
    return SimResult(
        latency_samples=kept,
        mean=stats.mean,
        variance=stats.variance,
        confidence_interval_95=stats.confidence_interval_95,
        served_count=chain.served,
        rejected_count=chain.rejected,
        generated_count=chain.generated,
        in_flight_count=in_flight,
        max_mined_batch=chain.max_mined_batch,
        max_rejected_batch=chain.max_rejected_batch,
        warmup_discarded=warmup,
        records=engine.records,
    )


def simulate_hierarchical(
    hconfig: HierarchicalConfig,
    target_served: int,
    seed: int,
    confirmation_mode: str = "additive",
    *,
    include_primary_background: bool = True,
    validate_config: bool = True,
    max_pending: int = DEFAULT_MAX_PENDING,
    warmup_fraction: float = 0.1,
    collect_records: bool = False,
) -> SimResult:
    """Simulate the secondary-into-primary composition.

    Runs until ``target_served`` end-user requests have started primary
    service.  Each retained request contributes an end-to-end sample and
    its secondary and primary components; the three series are reported in
    ``breakdown`` over the same retained set.  With
    ``include_primary_background=False`` the primary chain carries only the
    injected traffic, ignoring its configured arrival rate.
    """
    _check_args(target_served, confirmation_mode)
    if validate_config:
        validate(hconfig)
    engine = _Engine(seed, max_pending, collect_records)
    primary = _Chain("primary", hconfig.primary, confirmation_mode)
    secondary = _Chain("secondary", hconfig.secondary, confirmation_mode)

    e2e: list[float] = []
    sec_component: list[float] = []
    prim_component: list[float] = []
    counters = {"e2e_rejected_at_primary": 0}

    def inject(rec: RequestRecord, t: float) -> None:
        twin = engine.new_record(primary, t, origin=rec.submitted_at)
        engine.submit(primary, twin, t)

    def complete(rec: RequestRecord, t: float) -> None:
        if rec.origin_submitted_at is None:
            return
        e2e.append(t - rec.origin_submitted_at)
        prim_component.append(t - rec.submitted_at)
        sec_component.append(rec.submitted_at - rec.origin_submitted_at)
        if len(e2e) >= target_served:
            engine.stop = True

    def primary_reject(rec: RequestRecord, t: float) -> None:
        if rec.origin_submitted_at is not None:
            counters["e2e_rejected_at_primary"] += 1

    secondary.on_service_start = inject
    primary.on_service_start = complete
    primary.on_reject = primary_reject

    engine.push(engine.rng.expovariate(secondary.arrival_rate), _ARRIVAL, secondary, None)
    if include_primary_background:
        engine.push(engine.rng.expovariate(primary.arrival_rate), _ARRIVAL, primary, None)
    engine.run()

    warmup = int(target_served * warmup_fraction)
    kept = np.asarray(e2e[warmup:], dtype=np.float64)
    stats = _stats(kept)
    breakdown = {
        "e2e": stats,
        "secondary": _stats(sec_component[warmup:]),
        "primary": _stats(prim_component[warmup:]),
    }
    served = len(e2e)
    rejected = secondary.rejected + counters["e2e_rejected_at_primary"]
    in_flight = secondary.generated - served - rejected
    return SimResult(
        latency_samples=kept,
        mean=stats.mean,
        variance=stats.variance,
        confidence_interval_95=stats.confidence_interval_95,
        served_count=served,
        rejected_count=rejected,
        generated_count=secondary.generated,
        in_flight_count=in_flight,
        max_mined_batch=max(primary.max_mined_batch, secondary.max_mined_batch),
        max_rejected_batch=max(primary.max_rejected_batch, secondary.max_rejected_batch),
        warmup_discarded=warmup,
        breakdown=breakdown,
        aux_counts={
            "secondary_rejected": secondary.rejected,
            "e2e_rejected_at_primary": counters["e2e_rejected_at_primary"],
            "primary_background_generated": primary.generated - secondary.served,
            "primary_served_total": primary.served,
        },
        records=engine.records,
    )


_TRACE_COLUMNS = (
    "request_id", "chain", "submitted_at", "mined_at",
    "confirmed_at", "service_start_at", "disposition",
)


def write_trace_csv(records: list[RequestRecord], path) -> None:
    """Dump per-request lifecycle records (one row per request per chain)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_TRACE_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.request_id,
                    rec.chain,
                    repr(rec.submitted_at),
                    "" if rec.mined_at is None else repr(rec.mined_at),
                    "" if rec.confirmed_at is None else repr(rec.confirmed_at),
                    "" if rec.service_start_at is None else repr(rec.service_start_at),
                    rec.disposition,
                ]
            )
