"""Deterministic broadcast-domain simulator.

Models one shared Ethernet segment as a discrete-event loop: frames are
scheduled onto 0.01 ms internal steps, and every sampling tick the
delivered traffic is rolled up into channel counters, classified, and
offered to the agent fleet.  All randomness flows from one seeded
generator, so a scenario replays bit-identically.

Traffic sources:

  * a background generator producing periodic broadcast bursts (scaled
    to a fraction of channel capacity, with bounded jitter) plus a
    steady unicast floor;
  * injectors modelling a switching loop (frames re-pass the loop every
    pass interval and multiply), a faulty NIC (steady extra broadcast),
    and a smurf attacker (spoofed broadcasts that draw a unicast reply
    from every other node).

Each step applies, in order: the suppression filter (blocked ports drop
frames at ingress), the per-window broadcast byte budget, the carrying
capacity of the link, then delivery.  Delivered loop frames spawn their
replicas; everything filtered dies without offspring, so a storm only
persists while the loop keeps reseeding.  A per-tick conservation
ledger (generated + replicated - suppressed - capped == delivered) is
checked inside the loop.
"""

from __future__ import annotations

import itertools
import logging
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Optional, Sequence

from .agents import AgentConfig, AgentFleet, Policy, ThresholdDb, Trigger, TroubleTicket
from .datasets import interpolate, table4_hump
from .growth import TracePoint
from .metrics import (
    ChannelStats,
    StormClassification,
    TrafficSample,
    classify,
    min_ipg,
)

log = logging.getLogger("stormctl.simulation")

INTERNAL_STEP_MS = 0.01
STEPS_PER_MS = 100
IPG_EQUIV_BYTES = 12            # inter-frame gap charged against capacity
CALIBRATION_STEP_MS = 0.1       # sampling of the ideal burst for calibration


class ScenarioError(ValueError):
    """Raised for scenario definitions the simulator cannot honor."""


class Frame(NamedTuple):
    src: int
    ipid: int
    is_broadcast: bool
    size: int                   # bytes on the wire, excluding the gap
    kind: str                   # data | seed | replica | spoof | reply
    inj: Optional[int]          # owning injector index for loop chains


def saturation_cap(link_rate: float, tick_ms: float, frame_size: int) -> int:
    """Most frames one tick can carry, gap included."""
    if link_rate <= 0 or tick_ms <= 0 or frame_size <= 0:
        raise ScenarioError("link_rate, tick and frame_size must be positive")
    bits = link_rate * tick_ms / 1000.0
    return int(bits // (8 * (frame_size + IPG_EQUIV_BYTES)))


@dataclass(frozen=True)
class NormalBroadcastProfile:
    """Periodic broadcast bursts over a steady unicast floor.

    The burst shape is a trace of one hump; per tick the shape value at
    the current phase is scaled so its peak hits broadcast_peak_fraction
    of channel capacity (or burst_scale times the raw counts when set),
    then jittered by at most +/-jitter.
    """

    burst_period: float = 3.0           # ms
    shape: tuple = ()                   # defaults to the bundled normal hump
    jitter: float = 0.05
    unicast_fraction: float = 0.40
    broadcast_peak_fraction: float = 0.08
    burst_scale: Optional[float] = None

    def __post_init__(self) -> None:
        if self.burst_period <= 0:
            raise ScenarioError("burst_period must be positive")
        if not 0 <= self.jitter < 1:
            raise ScenarioError("jitter must be in [0, 1)")
        if not self.shape:
            object.__setattr__(self, "shape", tuple(table4_hump()))

    def _peak(self) -> float:
        return max(c for _, c in self.shape)

    def ideal_broadcast(self, phase: float, capacity: int) -> float:
        """Jitter-free broadcast frames per tick at this burst phase."""
        raw = interpolate(self.shape, phase)
        if self.burst_scale is not None:
            return raw * self.burst_scale
        peak = self._peak()
        if peak <= 0:
            return 0.0
        return raw / peak * self.broadcast_peak_fraction * capacity

    def ideal_unicast(self, capacity: int) -> float:
        return self.unicast_fraction * capacity

    def ideal_profile(self, capacity: int,
                      step: float = CALIBRATION_STEP_MS) -> list[TracePoint]:
        """One jitter-free burst, finely sampled; calibration input."""
        n = int(self.burst_period / step + 1e-9) + 1
        return [TracePoint(k * step, self.ideal_broadcast(k * step, capacity))
                for k in range(n)]


@dataclass(frozen=True)
class Injector:
    """A fault or attack bound to one node and a time window."""

    kind: str                           # loop | faulty_nic | smurf
    start_t: float = 0.0                # ms
    end_t: Optional[float] = None       # ms; None runs to the end
    origin_node: int = 0
    rate: float = 1.0                   # frames per tick (faulty_nic, smurf)
    pass_interval: float = 0.2          # ms between loop passes (loop)
    factor: int = 2                     # copies per loop pass (loop)
    reuse_ipid: bool = True             # loop replicas keep the seed's IPID

    def __post_init__(self) -> None:
        if self.kind not in ("loop", "faulty_nic", "smurf"):
            raise ScenarioError(f"unknown injector kind {self.kind!r}")
        if self.start_t < 0:
            raise ScenarioError("start_t must be nonnegative")
        if self.end_t is not None and self.end_t <= self.start_t:
            raise ScenarioError("end_t must follow start_t")
        if self.kind in ("faulty_nic", "smurf") and self.rate <= 0:
            raise ScenarioError("rate must be positive")
        if self.kind == "loop":
            if self.pass_interval <= 0:
                raise ScenarioError("pass_interval must be positive")
            if self.factor < 1:
                raise ScenarioError("factor must be at least 1")

    def active(self, t: float) -> bool:
        return self.start_t <= t and (self.end_t is None or t < self.end_t)


@dataclass(frozen=True)
class Scenario:
    name: str = "custom"
    node_count: int = 5
    link_rate: float = 1e9              # bits per second
    tick: float = 1.0                   # ms, the sampling period
    duration: float = 30.0              # ms
    seed: int = 0
    frame_size: int = 512               # bytes
    generator: Optional[NormalBroadcastProfile] = None
    injectors: tuple[Injector, ...] = ()
    agents: Optional[AgentConfig] = None

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ScenarioError("a broadcast domain needs at least 2 nodes")
        if self.link_rate <= 0:
            raise ScenarioError("link_rate must be positive")
        if self.tick <= 0:
            raise ScenarioError("tick must be positive")
        if self.duration < self.tick:
            raise ScenarioError("duration must cover at least one tick")
        if self.frame_size <= 0:
            raise ScenarioError("frame_size must be positive")
        for inj in self.injectors:
            if not 0 <= inj.origin_node < self.node_count:
                raise ScenarioError(
                    f"injector origin {inj.origin_node} outside the domain")
        if saturation_cap(self.link_rate, self.tick, self.frame_size) < 1:
            raise ScenarioError("one tick cannot carry a single frame")


class TickLedger(NamedTuple):
    generated: int
    replicated: int
    suppressed: int
    capped: int
    delivered: int


class TickRecord(NamedTuple):
    t: float
    stats: ChannelStats
    classification: StormClassification
    samples: tuple[TrafficSample, ...]
    ledger: TickLedger
    delivered_by_kind: tuple[tuple[str, int], ...]


@dataclass
class SimTrace:
    scenario: Scenario
    capacity_pkts: int
    records: list[TickRecord]
    tickets: list[TroubleTicket]
    triggers: list[Trigger]
    closed: list[tuple[TroubleTicket, float]]

    def summary(self) -> dict:
        verdicts = Counter(r.classification.verdict.value for r in self.records)
        causes = Counter(t.cause.value for t in self.tickets)
        totals = {
            "generated": sum(r.ledger.generated for r in self.records),
            "replicated": sum(r.ledger.replicated for r in self.records),
            "suppressed": sum(r.ledger.suppressed for r in self.records),
            "capped": sum(r.ledger.capped for r in self.records),
            "delivered": sum(r.ledger.delivered for r in self.records),
        }
        return {
            "scenario": self.scenario.name,
            "node_count": self.scenario.node_count,
            "link_rate": self.scenario.link_rate,
            "tick_ms": self.scenario.tick,
            "duration_ms": self.scenario.duration,
            "seed": self.scenario.seed,
            "capacity_pkts_per_tick": self.capacity_pkts,
            "ticks": len(self.records),
            "frames": totals,
            "max_utilization": round(
                max((r.classification.utilization for r in self.records),
                    default=0.0), 6),
            "verdicts": dict(sorted(verdicts.items())),
            "tickets": len(self.tickets),
            "tickets_by_cause": dict(sorted(causes.items())),
            "tickets_closed": len(self.closed),
        }


class _IpidWindow:
    """Sliding window of delivered broadcast (t, ipid, src) entries."""

    def __init__(self, window_ms: float, min_repeats: int) -> None:
        self.window_ms = window_ms
        self.min_repeats = min_repeats
        self._order: deque[tuple[float, int]] = deque()
        self._per_ipid: dict[int, deque[tuple[float, int]]] = {}

    def add(self, t: float, ipid: int, src: int) -> bool:
        """Record one delivery; True when this IPID now qualifies as a loop."""
        self._order.append((t, ipid))
        times = self._per_ipid.setdefault(ipid, deque())
        times.append((t, src))
        k = self.min_repeats
        return len(times) >= k and t - times[-k][0] <= self.window_ms

    def evict(self, now: float) -> None:
        cutoff = now - self.window_ms
        while self._order and self._order[0][0] < cutoff:
            _, ipid = self._order.popleft()
            times = self._per_ipid[ipid]
            times.popleft()
            if not times:
                del self._per_ipid[ipid]

    def run_entries(self, ipid: int) -> list[tuple[float, int, int]]:
        return [(t, ipid, src) for t, src in self._per_ipid.get(ipid, ())]


def run(scenario: Scenario) -> SimTrace:
    """Execute a scenario and return its full per-tick trace."""
    sc = scenario
    cap = saturation_cap(sc.link_rate, sc.tick, sc.frame_size)
    steps_per_tick = round(sc.tick * STEPS_PER_MS)
    n_ticks = round(sc.duration / sc.tick)
    total_steps = n_ticks * steps_per_tick
    rng = random.Random(sc.seed)
    ipids = itertools.count(1)
    base_ipg = min_ipg(sc.link_rate)

    fleet: Optional[AgentFleet] = None
    thresholds: Optional[ThresholdDb] = None
    if sc.agents is not None:
        fleet = AgentFleet(sc.agents, sc.node_count, link_rate=sc.link_rate,
                           capacity_pkts=cap)
        profile = None
        if sc.generator is not None:
            candidate = sc.generator.ideal_profile(cap)
            if max(p.count for p in candidate) > 0:
                profile = candidate
        fleet.calibrate(profile)
        thresholds = sc.agents.thresholds
    byte_limit = None
    window_ms = sc.agents.suppression_window if sc.agents else 1000.0
    if thresholds is not None and thresholds.byte_threshold_mb is not None:
        byte_limit = thresholds.byte_threshold_mb * 1e6
    enforce = sc.agents is not None and sc.agents.policy is not None

    schedule: dict[int, list[Frame]] = {}
    loop_idx = [i for i, inj in enumerate(sc.injectors) if inj.kind == "loop"]
    pending = {i: 0 for i in loop_idx}
    boundaries: dict[int, set[int]] = {}
    for i in loop_idx:
        inj = sc.injectors[i]
        steps = set()
        t = inj.start_t
        end = inj.end_t if inj.end_t is not None else sc.duration
        while t < min(end, sc.duration):
            steps.add(round(t * STEPS_PER_MS))
            t += inj.pass_interval
        boundaries[i] = steps
    rate_acc = {i: 0.0 for i, inj in enumerate(sc.injectors)
                if inj.kind in ("faulty_nic", "smurf")}
    ipid_win = _IpidWindow(
        thresholds.ipid_window_ms if thresholds else 100.0,
        thresholds.ipid_min_repeats if thresholds else 3,
    )
    byte_acc: dict[int, float] = {n: 0.0 for n in range(sc.node_count)}
    byte_wid: dict[int, int] = {n: -1 for n in range(sc.node_count)}

    def put(step: int, frame: Frame) -> None:
        if 0 <= step < total_steps:
            schedule.setdefault(step, []).append(frame)

    def spread(n: int, base: int) -> Iterator[int]:
        return (base + (i * steps_per_tick) // n for i in range(n))

    bcast_rr = 0
    uni_rr = 0
    records: list[TickRecord] = []
    tickets: list[TroubleTicket] = []
    history: tuple[ChannelStats, ...] = ()

    for t_idx in range(n_ticks):
        t0 = t_idx * sc.tick
        base = t_idx * steps_per_tick

        if sc.generator is not None:
            g = sc.generator
            u_b = 1 + g.jitter * (2 * rng.random() - 1)
            u_u = 1 + g.jitter * (2 * rng.random() - 1)
            phase = math.fmod(t0, g.burst_period)
            n_b = int(g.ideal_broadcast(phase, cap) * u_b + 0.5)
            n_u = int(g.ideal_unicast(cap) * u_u + 0.5)
            for step in spread(n_b, base) if n_b else ():
                put(step, Frame(bcast_rr % sc.node_count, next(ipids), True,
                                sc.frame_size, "data", None))
                bcast_rr += 1
            for step in spread(n_u, base) if n_u else ():
                put(step, Frame(uni_rr % sc.node_count, next(ipids), False,
                                sc.frame_size, "data", None))
                uni_rr += 1
        for i, inj in enumerate(sc.injectors):
            if inj.kind not in ("faulty_nic", "smurf") or not inj.active(t0):
                continue
            rate_acc[i] += inj.rate
            n = int(rate_acc[i])
            rate_acc[i] -= n
            kind = "spoof" if inj.kind == "smurf" else "data"
            for step in spread(n, base) if n else ():
                put(step, Frame(inj.origin_node, next(ipids), True,
                                sc.frame_size, kind, i))

        generated = replicated = suppressed = capped = delivered = 0
        per_node = [
            {"d_b": 0, "d_t": 0, "a_b": 0, "a_t": 0, "sup": 0, "ipids": []}
            for _ in range(sc.node_count)
        ]
        kinds: Counter = Counter()
        ipid_candidate: Optional[int] = None
        candidate_entries: list[tuple[float, int, int]] = []

        for step in range(base, base + steps_per_tick):
            t_s = step / STEPS_PER_MS
            for i in loop_idx:
                if (step in boundaries[i] and pending[i] == 0
                        and sc.injectors[i].active(t_s)):
                    put(step, Frame(sc.injectors[i].origin_node, next(ipids),
                                    True, sc.frame_size, "seed", i))
            batch = schedule.pop(step, None)
            if not batch:
                continue
            for frame in batch:
                if frame.kind == "replica":
                    replicated += 1
                else:
                    generated += 1
                node = per_node[frame.src]
                node["a_t"] += 1
                if frame.is_broadcast:
                    node["a_b"] += 1
                chain = frame.kind in ("seed", "replica") and frame.inj is not None
                if chain and frame.kind == "replica":
                    pending[frame.inj] -= 1

                if fleet is not None and fleet.is_suppressed(
                        frame.src, t_s, frame.is_broadcast):
                    suppressed += 1
                    node["sup"] += 1
                    continue
                if byte_limit is not None and frame.is_broadcast:
                    wid = int(t_s // window_ms)
                    if wid != byte_wid[frame.src]:
                        byte_wid[frame.src] = wid
                        byte_acc[frame.src] = 0.0
                    would = byte_acc[frame.src] + frame.size
                    if would > byte_limit:
                        ticket = fleet.byte_breach(frame.src, t_s, would / 1e6)
                        if ticket is not None:
                            tickets.append(ticket)
                        if enforce:
                            suppressed += 1
                            node["sup"] += 1
                            continue
                if delivered >= cap:
                    capped += 1
                    continue

                delivered += 1
                node["d_t"] += 1
                kinds[frame.kind] += 1
                if frame.is_broadcast:
                    node["d_b"] += 1
                    node["ipids"].append(frame.ipid)
                    if byte_limit is not None:
                        byte_acc[frame.src] += frame.size
                    if ipid_win.add(t_s, frame.ipid, frame.src):
                        ipid_candidate = frame.ipid
                if chain:
                    inj = sc.injectors[frame.inj]
                    if inj.active(t_s):
                        nxt = step + round(inj.pass_interval * STEPS_PER_MS)
                        ipid = frame.ipid if inj.reuse_ipid else None
                        for _ in range(inj.factor):
                            if nxt < total_steps:
                                put(nxt, Frame(frame.src,
                                               ipid if ipid is not None
                                               else next(ipids),
                                               True, sc.frame_size,
                                               "replica", frame.inj))
                                pending[frame.inj] += 1
                elif frame.kind == "spoof":
                    repliers = [n for n in range(sc.node_count)
                                if n != frame.src]
                    for j, replier in enumerate(repliers):
                        put(step + 1 + (j * steps_per_tick) // len(repliers),
                            Frame(replier, next(ipids), False, sc.frame_size,
                                  "reply", None))

        if generated + replicated - suppressed - capped != delivered:
            raise RuntimeError(
                f"conservation broken at t={t0}: {generated}+{replicated}"
                f"-{suppressed}-{capped} != {delivered}")

        tick_end = (t_idx + 1) * sc.tick
        ipid_win.evict(tick_end)
        if ipid_candidate is not None:
            candidate_entries = ipid_win.run_entries(ipid_candidate)

        d_b = sum(n["d_b"] for n in per_node)
        load = min(1.0, delivered / cap) if cap else 0.0
        stats = ChannelStats(
            tick=t0,
            broadcast_pkts=d_b,
            total_pkts=delivered,
            broadcast_bytes=d_b * sc.frame_size,
            total_bytes=delivered * sc.frame_size,
            observed_ipg=base_ipg * max(0.0, 1.0 - load),
            link_rate=sc.link_rate,
            interval_ms=sc.tick,
        )
        classification = classify(stats, history,
                                  ipid_loop=ipid_candidate is not None,
                                  capacity_pkts=cap)
        samples = tuple(
            TrafficSample(
                node=n, bcast_pkts=d["d_b"], total_pkts=d["d_t"],
                bcast_bytes=d["d_b"] * sc.frame_size,
                total_bytes=d["d_t"] * sc.frame_size,
                attempted_bcast=d["a_b"], attempted_total=d["a_t"],
                suppressed=d["sup"], ipids=tuple(d["ipids"]),
            )
            for n, d in enumerate(per_node)
        )
        if fleet is not None:
            tickets.extend(fleet.observe(t0, stats, samples, candidate_entries))
        ledger = TickLedger(generated, replicated, suppressed, capped, delivered)
        records.append(TickRecord(t0, stats, classification, samples, ledger,
                                  tuple(sorted(kinds.items()))))
        history = (stats,)

    if fleet is not None:
        fleet.finish(sc.duration)
    return SimTrace(
        scenario=sc,
        capacity_pkts=cap,
        records=records,
        tickets=tickets,
        triggers=list(fleet.trigger_log) if fleet else [],
        closed=list(fleet.closed) if fleet else [],
    )


def scenario_presets() -> dict[str, Scenario]:
    """Bundled scenarios; built fresh so agent configs are never shared."""
    return {
        "normal": Scenario(
            name="normal", node_count=5, link_rate=1e9, tick=1.0,
            duration=30.0, seed=7,
            generator=NormalBroadcastProfile(),
            agents=AgentConfig(policy=Policy.PACKET_BASED),
        ),
        "loop-storm": Scenario(
            name="loop-storm", node_count=5, link_rate=1e9, tick=1.0,
            duration=40.0, seed=7,
            generator=NormalBroadcastProfile(),
            injectors=(Injector(kind="loop", start_t=10.0, origin_node=1,
                                pass_interval=0.2, factor=2, reuse_ipid=True),),
            agents=AgentConfig(policy=Policy.PACKET_BASED),
        ),
        "smurf": Scenario(
            name="smurf", node_count=6, link_rate=1e9, tick=1.0,
            duration=30.0, seed=7,
            generator=NormalBroadcastProfile(),
            injectors=(Injector(kind="smurf", start_t=5.0, end_t=25.0,
                                origin_node=0, rate=2.0),),
        ),
        "faulty-nic": Scenario(
            name="faulty-nic", node_count=4, link_rate=10e6, tick=1.0,
            duration=50.0, seed=7,
            generator=NormalBroadcastProfile(unicast_fraction=0.10,
                                             broadcast_peak_fraction=0.0),
            injectors=(Injector(kind="faulty_nic", start_t=0.0,
                                origin_node=0, rate=0.5),),
            agents=AgentConfig(
                policy=None,
                thresholds=ThresholdDb(nbw_permissible=1200.0),
            ),
        ),
        "table5-control": Scenario(
            name="table5-control", node_count=3, link_rate=100e6, tick=250.0,
            duration=4000.0, seed=3,
            injectors=(Injector(kind="loop", start_t=50.0, origin_node=0,
                                pass_interval=50.0, factor=2,
                                reuse_ipid=False),),
            agents=AgentConfig(
                sample_period=250.0,
                policy=Policy.PACKET_BASED,
                thresholds=ThresholdDb(byte_threshold_mb=2.5),
            ),
        ),
    }


def preset(name: str, *, seed: Optional[int] = None,
           agents: bool = True) -> Scenario:
    """A bundled scenario, optionally reseeded or stripped of its agents."""
    presets = scenario_presets()
    if name not in presets:
        raise ScenarioError(
            f"unknown scenario {name!r}; choose from {sorted(presets)}")
    sc = presets[name]
    if seed is not None:
        sc = replace(sc, seed=seed)
    if not agents:
        sc = replace(sc, agents=None)
    return sc
