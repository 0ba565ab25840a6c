"""Static per-node monitor agents: observe, detect, suppress.

Each node hosts an agent with three cooperating parts:

  * a communication part that samples channel counters once per
    sampling period and appends the broadcast rate to a compare array;
  * a control part that holds a calibrated reference curve of normal
    burst growth and measures the live deviation from it;
  * a storm handler that, on a confirmed trigger, blocks the offending
    node's port for the remainder of the current one-second window and
    raises a trouble ticket.

Comparison is burst-anchored: a burst begins when the per-tick
broadcast count rises from zero and ends when it returns to zero.
Sample j of the live burst is held against sample j of the reference's
own burst, with deviation |live - ref| / max(ref, eps) where eps is 1%
of the calibrated peak rate.  A trigger requires the deviation to
exceed the threshold on `consecutive_required` successive samples, or
the burst to outlive the reference while still growing.

Suppression windows are wall-aligned: a trigger at t blocks until the
next multiple of the window length, then the port resumes on its own.
Re-triggering after resumption opens a new ticket; triggers during an
active suppression are coalesced into the existing one.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

from .datasets import interpolate
from .growth import FitError, PtrArray, TracePoint, eval_ptr, fit_model, rise_segment
from .metrics import (
    ChannelStats,
    TrafficSample,
    detect_ipid_loop,
    min_ipg,
    node_bandwidth,
    utilization,
)

log = logging.getLogger("stormctl.agents")

DEVIATION_DENOM_FLOOR = 0.01   # denominator floor, as a fraction of the peak rate
CLEAN_WINDOWS_TO_CLOSE = 2     # breach-free windows before a node is healthy again


class AgentError(ValueError):
    """Raised on protocol misuse: unarmed sampling, non-advancing ticks."""


class CalibrationError(AgentError):
    """Raised when a reference cannot be built from the given trace."""


class Policy(enum.Enum):
    """What a blocked port filters: every frame, or broadcast only."""

    PACKET_BASED = "packet"        # software flavor: all incoming traffic
    BANDWIDTH_BASED = "bandwidth"  # hardware flavor: broadcast frames only


class AgentMode(enum.Enum):
    CALIBRATING = "calibrating"
    ARMED = "armed"
    SUPPRESSING = "suppressing"


class TriggerCause(enum.Enum):
    PTR_DEVIATION = "ptr_deviation"
    UTILIZATION_EXCEEDED = "utilization_exceeded"
    NBW_EXCEEDED = "nbw_exceeded"
    IPID_LOOP = "ipid_loop"


@dataclass
class ThresholdDb:
    """Per-agent threshold database; pe and ipg floor fill at calibration."""

    pe: Optional[float] = None              # packets per interval, safe peak
    ipg_floor_ns: Optional[float] = None
    utilization_max: float = 0.60
    nbw_permissible: Optional[float] = None  # bytes per rolling window; None disables
    nbw_factor: float = 2.0
    nbw_window_ticks: int = 10
    byte_threshold_mb: Optional[float] = None  # broadcast MB per window; None disables
    ipid_min_repeats: int = 3
    ipid_window_ms: float = 100.0


@dataclass
class AgentConfig:
    sample_period: float = 1.0          # ms
    deviation_threshold: float = 0.05   # fraction
    consecutive_required: int = 3
    suppression_window: float = 1000.0  # ms, wall-aligned
    policy: Optional[Policy] = Policy.PACKET_BASED  # None: detect only, never block
    thresholds: ThresholdDb = field(default_factory=ThresholdDb)

    def __post_init__(self) -> None:
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.deviation_threshold <= 0:
            raise ValueError("deviation_threshold must be positive")
        if self.consecutive_required < 1:
            raise ValueError("consecutive_required must be at least 1")
        if self.suppression_window <= 0:
            raise ValueError("suppression_window must be positive")


class Trigger(NamedTuple):
    cause: TriggerCause
    node: int
    t: float          # ms
    observed: float
    threshold: float


class TroubleTicket(NamedTuple):
    ticket_id: int
    node: int
    t: float          # ms
    cause: TriggerCause
    observed: float
    threshold: float


class CompareResult(NamedTuple):
    deviation: Optional[float]
    breach: bool
    reason: Optional[str]   # "deviation" or "outlived"
    observed: float
    threshold: float


_NO_RESULT = CompareResult(None, False, None, 0.0, 0.0)


class StaticAgent:
    """One node's monitor; see the module docstring for the protocol."""

    def __init__(
        self,
        config: AgentConfig,
        node_id: int = 0,
        link_rate: Optional[float] = None,
        ticket_ids: Optional[Iterator[int]] = None,
    ) -> None:
        self.config = config
        self.node_id = node_id
        self.link_rate = link_rate
        self.ticket_ids = ticket_ids if ticket_ids is not None else itertools.count(1)
        self.reference: Optional[PtrArray] = None
        self._ref_active: list[float] = []
        self._armed = False
        self._now: Optional[float] = None
        self._pe = 0.0
        self._eps = 0.0
        self._in_burst = False
        self._j = -1
        self._dev_run = 0
        self._count = 0.0
        self._prev_count = 0.0
        self.compare: list[float] = []
        self._last_eval: CompareResult = _NO_RESULT
        self._suppress_until: Optional[float] = None

    # -- state ---------------------------------------------------------

    @property
    def mode(self) -> AgentMode:
        if not self._armed:
            return AgentMode.CALIBRATING
        now = self._now if self._now is not None else -math.inf
        if self._suppress_until is not None and now < self._suppress_until:
            return AgentMode.SUPPRESSING
        return AgentMode.ARMED

    def is_suppressed(self, t: float, is_broadcast: bool = True) -> bool:
        """Whether a frame from this node's port at time t is filtered."""
        if self.config.policy is None:
            return False
        if self._suppress_until is None or t >= self._suppress_until:
            return False
        if self.config.policy is Policy.PACKET_BASED:
            return True
        return is_broadcast

    # -- calibration ---------------------------------------------------

    def calibrate(self, normal_trace: Iterable) -> PtrArray:
        """Fit the growth model to one normal burst and build the reference.

        The reference holds the expected broadcast rate at each sampling
        offset of the burst: the fitted curve over the rise (clamped at
        the observed peak, which becomes the safe threshold pe), and the
        trace itself over the decline.
        """
        points = [TracePoint(float(t), float(c)) for t, c in normal_trace]
        if any(b.t <= a.t for a, b in zip(points, points[1:])):
            raise CalibrationError("calibration trace times must increase")
        if not points or max(p.count for p in points) <= 0:
            raise CalibrationError("calibration trace shows no traffic")
        try:
            fit = fit_model(points)
        except FitError as exc:
            raise CalibrationError(f"cannot fit normal burst: {exc}") from exc
        rise = rise_segment(points if points[0].t == 0
                            else [TracePoint(0.0, 0.0)] + points)
        rise_end, pe = rise[-1].t, rise[-1].count

        step = self.config.sample_period
        span = points[-1].t
        n = int(span / step + 1e-9) + 1
        values = []
        for k in range(n):
            offset = k * step
            if offset <= rise_end + 1e-9:
                values.append(max(0.0, min(eval_ptr(fit.params, offset), pe)))
            else:
                values.append(interpolate(points, offset))
        self._adopt(PtrArray(0.0, step, tuple(values)), pe)
        log.info(
            "agent %s calibrated: pe=%.1f pkts/interval, reference of %d "
            "samples; starting capture", self.node_id, pe, len(values),
        )
        return self.reference

    def _adopt(self, reference: PtrArray, pe: float) -> None:
        self.reference = reference
        self._pe = pe
        self._eps = DEVIATION_DENOM_FLOOR * pe
        first = next((i for i, v in enumerate(reference.values) if v > 0), None)
        self._ref_active = list(reference.values[first:]) if first is not None else []
        self.config.thresholds.pe = pe
        if self.link_rate:
            self.config.thresholds.ipg_floor_ns = 0.5 * min_ipg(self.link_rate)
        self._armed = True

    def arm_threshold_only(self) -> None:
        """Arm without a reference curve; only threshold checks apply."""
        self._armed = True

    # -- sampling and comparison ----------------------------------------

    def sample_channel(
        self, stats: ChannelStats, sample: Optional[TrafficSample] = None
    ) -> TrafficSample:
        """Ingest one sampling tick of channel counters.

        Ticks must arrive in increasing order, and only after the agent
        is armed.  Returns the node-level view of the tick.
        """
        if not self._armed:
            raise AgentError("sample before calibration")
        if self._now is not None and stats.tick <= self._now:
            raise AgentError(
                f"tick {stats.tick} does not advance past {self._now}"
            )
        self._now = stats.tick
        count = float(stats.broadcast_pkts)
        self._prev_count = self._count
        self._count = count

        if self.reference is None:
            self._last_eval = _NO_RESULT
        elif not self._in_burst:
            if count > 0:
                self._in_burst = True
                self._j = 0
                self._dev_run = 0
                self.compare = [count]
                self._last_eval = self._evaluate(first=True)
            else:
                self._last_eval = _NO_RESULT
        elif count == 0:
            self._in_burst = False
            self._j = -1
            self._dev_run = 0
            self.compare = []
            self._last_eval = _NO_RESULT
        else:
            self._j += 1
            if self._j < len(self._ref_active):
                self.compare.append(count)
            self._last_eval = self._evaluate(first=False)

        if sample is not None:
            return sample
        return TrafficSample(
            node=self.node_id,
            bcast_pkts=stats.broadcast_pkts,
            total_pkts=stats.total_pkts,
            bcast_bytes=stats.broadcast_bytes,
            total_bytes=stats.total_bytes,
            attempted_bcast=stats.broadcast_pkts,
            attempted_total=stats.total_pkts,
            suppressed=0,
            ipids=(),
        )

    def _evaluate(self, first: bool) -> CompareResult:
        thr = self.config.deviation_threshold
        if self._j < len(self._ref_active):
            ref = self._ref_active[self._j]
            denom = max(ref, self._eps) if self._eps > 0 else max(ref, 1.0)
            dev = abs(self._count - ref) / denom
            self._dev_run = self._dev_run + 1 if dev > thr else 0
            breach = self._dev_run >= self.config.consecutive_required
            return CompareResult(dev, breach, "deviation" if breach else None,
                                 dev, thr)
        # the burst has outlived the reference; alarm only while it grows
        growing = not first and self._count > self._prev_count
        if growing:
            return CompareResult(None, True, "outlived", self._count, self._pe)
        return CompareResult(None, False, None, 0.0, thr)

    def compare_ptr(self, t: float) -> CompareResult:
        """Deviation and decision for the sample taken at time t."""
        if not self._armed:
            raise AgentError("compare before calibration")
        if self._now is None or t != self._now:
            raise AgentError(f"no sample at t={t}; last sample at {self._now}")
        return self._last_eval

    # -- suppression -----------------------------------------------------

    def handle_storm(self, trigger: Trigger) -> Optional[TroubleTicket]:
        """Apply suppression for a trigger; returns the new ticket.

        While already suppressing, further triggers collapse into the
        open ticket and None is returned.
        """
        if self._suppress_until is not None and trigger.t < self._suppress_until:
            return None
        window = self.config.suppression_window
        self._suppress_until = (math.floor(trigger.t / window) + 1) * window
        ticket = TroubleTicket(
            ticket_id=next(self.ticket_ids),
            node=trigger.node,
            t=trigger.t,
            cause=trigger.cause,
            observed=trigger.observed,
            threshold=trigger.threshold,
        )
        log.info(
            "ticket #%d: %s on node %d at t=%.3f ms (observed %.4g, "
            "threshold %.4g); port blocked until %.1f ms",
            ticket.ticket_id, trigger.cause.value, trigger.node, trigger.t,
            trigger.observed, trigger.threshold, self._suppress_until,
        )
        return ticket

    def reconnect(self, t: Optional[float] = None) -> bool:
        """Operator-forced reconnect; no-op with a warning when not blocked."""
        now = t if t is not None else self._now
        if self._suppress_until is None or (
            now is not None and now >= self._suppress_until
        ):
            log.warning("reconnect of node %s: port is not blocked", self.node_id)
            return False
        self._suppress_until = None
        log.info("node %s reconnected by operator at t=%s ms", self.node_id, now)
        return True


class AgentFleet:
    """All agents on one broadcast domain, with channel-wide checks.

    Every agent samples the same channel counters (the medium is shared),
    so one calibration is fitted and the resulting reference is adopted by
    the rest of the fleet.  Per tick the fleet runs, in priority order,
    the reference comparison, the utilization ceiling, per-node bandwidth
    windows, and the IPID loop scan, attributing each trigger to a node
    and letting that node's agent open the ticket and block the port.
    """

    def __init__(
        self,
        config: AgentConfig,
        node_count: int,
        link_rate: Optional[float] = None,
        capacity_pkts: Optional[float] = None,
    ) -> None:
        if node_count < 1:
            raise ValueError("node_count must be at least 1")
        self.config = config
        self.capacity_pkts = capacity_pkts
        self.ticket_ids = itertools.count(1)
        self.agents = [
            StaticAgent(config, node_id=i, link_rate=link_rate,
                        ticket_ids=self.ticket_ids)
            for i in range(node_count)
        ]
        self.tickets: list[TroubleTicket] = []
        self.trigger_log: list[Trigger] = []
        self._open: dict[int, list[TroubleTicket]] = {i: [] for i in range(node_count)}
        self.closed: list[tuple[TroubleTicket, float]] = []
        self._window_id: Optional[int] = None
        self._breached_this_window: set[int] = set()
        self._clean_streak: dict[int, int] = {i: 0 for i in range(node_count)}
        self._nbw_bytes: dict[int, list[int]] = {i: [] for i in range(node_count)}

    def calibrate(self, normal_trace: Optional[Iterable]) -> None:
        """Build the shared reference, or arm threshold-only when None."""
        if normal_trace is None:
            for agent in self.agents:
                agent.arm_threshold_only()
            return
        lead = self.agents[0]
        reference = lead.calibrate(normal_trace)
        for agent in self.agents[1:]:
            agent._adopt(reference, lead._pe)

    # -- per-tick pipeline ------------------------------------------------

    def observe(
        self,
        t: float,
        stats: ChannelStats,
        node_samples: Sequence[TrafficSample],
        ipid_entries: Sequence[tuple[float, int, int]] = (),
    ) -> list[TroubleTicket]:
        """Run one sampling tick; returns any tickets opened at this tick.

        ipid_entries are (t, ipid, src) for broadcast frames seen inside
        the loop-scan window ending at this tick.
        """
        for agent in self.agents:
            agent.sample_channel(stats)
        verdict = self.agents[0].compare_ptr(t)
        thresholds = self.config.thresholds

        origin = 0
        if node_samples:
            best = max(s.attempted_bcast for s in node_samples)
            origin = min(s.node for s in node_samples if s.attempted_bcast == best)

        triggers: list[Trigger] = []
        if verdict.breach:
            triggers.append(Trigger(TriggerCause.PTR_DEVIATION, origin, t,
                                    verdict.observed, verdict.threshold))
        if self.capacity_pkts:
            util = utilization(stats.total_pkts, self.capacity_pkts)
            if util > thresholds.utilization_max:
                triggers.append(Trigger(TriggerCause.UTILIZATION_EXCEEDED, origin,
                                        t, util, thresholds.utilization_max))
        for sample in node_samples:
            window = self._nbw_bytes[sample.node]
            window.append(sample.bcast_bytes)
            if len(window) > thresholds.nbw_window_ticks:
                del window[0]
            if thresholds.nbw_permissible is not None:
                nb = node_bandwidth(sum(window), 1.0, thresholds.nbw_permissible,
                                    thresholds.nbw_factor)
                if nb.exceeds:
                    triggers.append(Trigger(
                        TriggerCause.NBW_EXCEEDED, sample.node, t, nb.value,
                        thresholds.nbw_factor * thresholds.nbw_permissible))
        if ipid_entries:
            looped, offenders = detect_ipid_loop(
                [(ipid, t_seen) for t_seen, ipid, _ in ipid_entries],
                min_repeats=thresholds.ipid_min_repeats,
                window_ms=thresholds.ipid_window_ms,
            )
            if looped:
                src_of = {e[1]: e[2] for e in ipid_entries}
                src = min(src_of.get(i, 0) for i in offenders)
                triggers.append(Trigger(TriggerCause.IPID_LOOP, src, t,
                                        float(len(offenders)),
                                        float(thresholds.ipid_min_repeats)))

        self.trigger_log.extend(triggers)
        opened = []
        for trigger in triggers:
            self._note_breach(trigger.node, t)
            ticket = self.agents[trigger.node].handle_storm(trigger)
            if ticket is not None:
                opened.append(ticket)
                self.tickets.append(ticket)
                self._open[ticket.node].append(ticket)
        return opened

    def byte_breach(self, node: int, t: float, observed_mb: float
                    ) -> Optional[TroubleTicket]:
        """A frame pushed a node's per-window broadcast bytes over the cap."""
        limit = self.config.thresholds.byte_threshold_mb
        self._note_breach(node, t)
        trigger = Trigger(TriggerCause.NBW_EXCEEDED, node, t, observed_mb,
                          limit if limit is not None else observed_mb)
        self.trigger_log.append(trigger)
        ticket = self.agents[node].handle_storm(trigger)
        if ticket is not None:
            self.tickets.append(ticket)
            self._open[node].append(ticket)
        return ticket

    def is_suppressed(self, node: int, t: float, is_broadcast: bool) -> bool:
        return self.agents[node].is_suppressed(t, is_broadcast)

    # -- ticket lifecycle --------------------------------------------------

    def _note_breach(self, node: int, t: float) -> None:
        self._roll_window(t)
        self._breached_this_window.add(node)

    def _roll_window(self, t: float) -> None:
        wid = math.floor(t / self.config.suppression_window)
        if self._window_id is None:
            self._window_id = wid
            return
        while self._window_id < wid:
            for node in self._clean_streak:
                if node in self._breached_this_window:
                    self._clean_streak[node] = 0
                else:
                    self._clean_streak[node] += 1
                    if (self._clean_streak[node] >= CLEAN_WINDOWS_TO_CLOSE
                            and self._open[node]):
                        when = (self._window_id + 1) * self.config.suppression_window
                        for ticket in self._open[node]:
                            self.closed.append((ticket, when))
                            log.info("ticket #%d closed: node %d healthy for "
                                     "%d windows", ticket.ticket_id, node,
                                     CLEAN_WINDOWS_TO_CLOSE)
                        self._open[node].clear()
            self._breached_this_window.clear()
            self._window_id += 1

    def finish(self, t: float) -> None:
        """Advance window bookkeeping to the end of the run."""
        self._roll_window(t + 2 * self.config.suppression_window)

    @property
    def open_tickets(self) -> list[TroubleTicket]:
        return [tk for per_node in self._open.values() for tk in per_node]


class ReplayDeviation(NamedTuple):
    index: int
    t: float
    observed: float
    expected: float
    deviation: float


OFFLINE_NODE = -1   # ticket origin when replaying a trace with no node ids


def replay_elementwise(
    data: Sequence,
    reference: Sequence,
    config: Optional[AgentConfig] = None,
) -> tuple[list[TroubleTicket], list[ReplayDeviation]]:
    """Offline detection: compare a recorded trace against a reference trace.

    Row j of the data is held against row j of the reference (rates at
    the same offsets; no burst anchoring, no fitting).  Rows where both
    sides are zero deviate by zero.  A run of `consecutive_required`
    breaching rows opens a ticket; further breaches inside the same
    suppression window coalesce into it.

    Returns (tickets, per-row breaching deviations).
    """
    if config is None:
        config = AgentConfig()
    ref_counts = [float(c) for _, c in reference]
    peak = max(ref_counts, default=0.0)
    if peak <= 0:
        raise CalibrationError("reference trace shows no traffic")
    eps = DEVIATION_DENOM_FLOOR * peak
    thr = config.deviation_threshold

    tickets: list[TroubleTicket] = []
    breaches: list[ReplayDeviation] = []
    ids = itertools.count(1)
    run = 0
    suppress_until: Optional[float] = None
    for idx, (t, count) in enumerate(data):
        t, count = float(t), float(count)
        if suppress_until is not None and t < suppress_until:
            continue
        ref = ref_counts[idx] if idx < len(ref_counts) else 0.0
        dev = abs(count - ref) / max(ref, eps)
        if dev > thr:
            run += 1
            breaches.append(ReplayDeviation(idx, t, count, ref, dev))
        else:
            run = 0
        if run >= config.consecutive_required:
            tickets.append(TroubleTicket(
                ticket_id=next(ids), node=OFFLINE_NODE, t=t,
                cause=TriggerCause.PTR_DEVIATION, observed=dev, threshold=thr))
            window = config.suppression_window
            suppress_until = (math.floor(t / window) + 1) * window
            run = 0
    return tickets, breaches
