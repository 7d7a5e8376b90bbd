"""Node programs and drivers for the initialization protocol family:

* the probabilistic-backoff transmission game (the basic sender),
* the relay broadcast built on it,
* the search-for-range loop that shrinks the radius until isolation reveals
  the scale of the network,
* the k-way equipartition / labeling recursion on a single-hop channel with
  collision detection, and
* the three-step multihop pipeline combining them.

Multihop programs run on the :mod:`radiosim` engine.  The single-hop
recursion is simulated directly: on a complete graph with collision
detection every station observes the same slot outcome (silence / one
message / collision, a pure function of the transmitter count), so the
global state is replicated at every station and one state machine suffices.
The channel classification is cross-checked against :func:`radiosim.step` in
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geomnet import Network, generate_network
from .limits import (
    SfrSchedule,
    UpperBounds,
    broadcast_time,
    sfr_schedule,
    upper_bounds_from_p0,
)
from .radiosim import (
    ChannelModel,
    IDLE,
    Message,
    ProtocolTrace,
    RngStream,
    Sleep,
    Transmit,
    derive_seed,
    run,
)

__all__ = [
    "SendConfig",
    "BroadcastConfig",
    "SfrResult",
    "InitState",
    "InitResult",
    "MultihopInitResult",
    "send_program",
    "listen_program",
    "broadcast_program",
    "sfr_program",
    "run_send_star",
    "build_star",
    "run_broadcast",
    "run_sfr",
    "SfrRunResult",
    "equipartition",
    "EquipartitionOutcome",
    "initialize_single_hop",
    "initialize_multihop",
    "measure_equipartition_failure",
]


PROBE = "probe"
DECONN = "deconn"


@dataclass(frozen=True)
class SendConfig:
    """One transmission game: payload, trial horizon T, and the base of the
    transmit-probability sequence base^-i."""

    payload: Any
    T: int
    base: float = 2.0

    def __post_init__(self):
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if self.base <= 1.0:
            raise ValueError(f"base must be > 1, got {self.base}")


@dataclass(frozen=True)
class BroadcastConfig:
    """Relay-broadcast parameters: failure budget epsilon and upper bounds on
    max degree and node count, with the derived round length k and round
    count tau."""

    epsilon: float
    delta_bound: int
    n_bound: int

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.delta_bound < 2 or self.n_bound < 2:
            raise ValueError("delta_bound and n_bound must be >= 2")

    @property
    def k(self) -> int:
        return 2 * math.ceil(math.log2(self.delta_bound))

    @property
    def tau(self) -> int:
        return math.ceil(math.log2(self.n_bound / self.epsilon))


# ---------------------------------------------------------------------------
# generator building blocks


def _send_phase(ctx, payload, T, radius, base=2.0):
    """Play the transmission game for slots i = 0..T at the given radius;
    returns the payloads received along the way."""
    received = []
    for i in range(T + 1):
        if ctx.u() < base ** (-i):
            obs = yield Transmit(payload, radius)
        else:
            obs = yield IDLE
        if isinstance(obs, Message):
            received.append(obs.payload)
    return received


def _align(ctx, k):
    """Sleep (ignoring receptions) until the next slot with TIME mod k == 1."""
    while ctx.time % k != 1:
        yield Sleep(ctx.time + ((1 - ctx.time) % k))


def _broadcast_rounds(ctx, msg, cfg: BroadcastConfig, radius):
    """tau rounds, each: align to a k-boundary, then one k-horizon send."""
    starts = []
    for _ in range(cfg.tau):
        yield from _align(ctx, cfg.k)
        starts.append(ctx.time)
        yield from _send_phase(ctx, msg, cfg.k, radius)
    return starts


# ---------------------------------------------------------------------------
# programs


def send_program(cfg: SendConfig, radius: float) -> Callable:
    """Program that plays the transmission game once and terminates."""

    def factory(ctx):
        return _send_only(ctx, cfg, radius)

    return factory


def _send_only(ctx, cfg, radius):
    received = yield from _send_phase(ctx, cfg.payload, cfg.T, radius, cfg.base)
    ctx.result = {"received": received}


def listen_program(until_slot: int) -> Callable:
    """Silent listener up to (and including) the given slot; its result holds
    every payload heard and the slot of the first reception."""

    def factory(ctx):
        return _listen(ctx, until_slot)

    return factory


def _listen(ctx, until_slot):
    heard = []
    first = None
    while ctx.time <= until_slot:
        obs = yield IDLE
        if isinstance(obs, Message):
            heard.append(obs.payload)
            if first is None:
                first = ctx.time - 1
    ctx.result = {"heard": heard, "first_slot": first}


@dataclass
class BroadcastOutcome:
    informed_at: Optional[int]
    send_starts: List[int]
    relayed: bool


def broadcast_program(
    cfg: BroadcastConfig,
    radius: float,
    payload: Any = None,
    initiator: bool = False,
) -> Callable:
    """Relay-broadcast program.  Initiators hold the payload at slot 0 and
    start straight into their rounds; everyone else listens until the first
    reception and then relays what it heard."""
    if initiator and payload is None:
        raise ValueError("an initiator needs a payload")

    def factory(ctx):
        return _broadcast(ctx, cfg, radius, payload, initiator)

    return factory


def _broadcast(ctx, cfg, radius, payload, initiator):
    informed_at = None
    msg = payload
    if not initiator:
        while True:
            obs = yield Sleep(None)
            if isinstance(obs, Message):
                msg = obs.payload
                informed_at = ctx.time - 1
                break
    starts = yield from _broadcast_rounds(ctx, msg, cfg, radius)
    ctx.result = BroadcastOutcome(informed_at=informed_at, send_starts=starts, relayed=not initiator)


@dataclass
class SfrResult:
    """Exit state of one node's search-for-range run."""

    learned_p0: Optional[int]
    deconnected: bool
    was_isolated: bool
    p_exit: int
    radii_used: List[float]
    capped: bool = False


def sfr_program(schedule: SfrSchedule, epsilon: float, p_cap: int) -> Callable:
    """Search-for-range node program.

    Phases at increasing p: probe the neighborhood with t(p) transmission
    games at radius R(p); a node hearing no probe declares itself isolated,
    broadcasts "deconnexion p" C1 times at the re-enlarged radius R(p-1) and
    exits; otherwise it listens for C1*B(p-1) slots, exits (after relaying)
    if a deconnexion message arrives, and moves to p+1 if not.
    """
    if schedule.p_init < 2:
        raise ValueError(f"initial p must be >= 2, got {schedule.p_init}")

    def factory(ctx):
        return _sfr(ctx, schedule, epsilon, p_cap)

    return factory


def _sfr(ctx, sched, eps, p_cap):
    p = sched.p_init
    radii = []
    while True:
        if p > p_cap:
            ctx.result = SfrResult(None, False, False, p, radii, capped=True)
            return
        R_p = sched.R_of_p(p)
        radii.append(R_p)
        counter = 0
        for i in range(1, sched.t_of_p(p, eps) + 1):
            received = yield from _send_phase(ctx, (PROBE, p), i, R_p)
            if any(isinstance(m, tuple) and m[0] == PROBE for m in received):
                counter += 1
        if counter == 0:
            # isolated: re-enlarge to R(p-1) and advertise the deconnexion
            bc = BroadcastConfig(epsilon=eps, delta_bound=max(3 * p, 2), n_bound=2 ** (p + 1))
            relay_r = sched.R_of_p(p - 1)
            radii.append(relay_r)
            for _ in range(sched.C1):
                yield from _broadcast_rounds(ctx, (DECONN, p), bc, relay_r)
            ctx.result = SfrResult(p, True, True, p, radii)
            return
        deadline = ctx.time + sched.C1 * sched.B_of_p(p - 1)
        heard_p = None
        while ctx.time < deadline:
            obs = yield Sleep(deadline)
            if isinstance(obs, Message) and isinstance(obs.payload, tuple) and obs.payload[0] == DECONN:
                heard_p = obs.payload[1]
                break
        if heard_p is not None:
            # join the relay wave before exiting so the advert crosses the net
            bc = BroadcastConfig(epsilon=eps, delta_bound=max(3 * heard_p, 2), n_bound=2 ** (heard_p + 1))
            relay_r = sched.R_of_p(heard_p - 1)
            radii.append(relay_r)
            yield from _broadcast_rounds(ctx, (DECONN, heard_p), bc, relay_r)
            ctx.result = SfrResult(heard_p, True, False, p, radii)
            return
        p += 1


# ---------------------------------------------------------------------------
# star-topology harness (engine route)


def build_star(d: int, radius: float = 1.0) -> Network:
    """Center node 0 plus d leaves placed within 0.9*radius of it."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    side = 4.0 * radius
    cx = cy = side / 2.0
    pts = [(cx, cy)]
    for j in range(d):
        a = 2.0 * math.pi * j / d
        pts.append((cx + 0.9 * radius * math.cos(a), cy + 0.9 * radius * math.sin(a)))
    return Network(side=side, nodes=np.array(pts), radius=radius)


def run_send_star(d: int, T: int, base: float, seed: int, radius: float = 1.0):
    """One engine run of the transmission game on a star; returns the
    listening center's outcome dict (payloads heard, first reception slot)."""
    net = build_star(d, radius)
    model = ChannelModel.multihop(net)
    cfg = SendConfig(payload="m", T=T, base=base)
    programs = [listen_program(T)] + [send_program(cfg, radius)] * d
    rng = RngStream(seed, net.n)
    trace = run(model, programs, max_slots=T + 3, rng=rng, record_trace=False)
    return trace.final_states[0]


def run_broadcast(
    net: Network,
    cfg: BroadcastConfig,
    radius: float,
    seed: int,
    initiators: Sequence[int] = (0,),
    payload: Any = "msg",
    max_slots: Optional[int] = None,
) -> ProtocolTrace:
    """Run the relay broadcast from the given initiators over the network."""
    initiators = set(initiators)
    programs = [
        broadcast_program(cfg, radius, payload=payload, initiator=(i in initiators))
        for i in range(net.n)
    ]
    if max_slots is None:
        max_slots = 4 * cfg.k * cfg.tau * (net.n + 2)
    rng = RngStream(seed, net.n)
    return run(ChannelModel.multihop(net), programs, max_slots=max_slots, rng=rng, record_trace=False)


# ---------------------------------------------------------------------------
# search-for-range driver


@dataclass
class SfrRunResult:
    results: Dict[int, SfrResult]
    slots: int
    truncated: bool

    @property
    def learned_values(self) -> List[Optional[int]]:
        return [r.learned_p0 if r is not None else None for r in self.results.values()]

    @property
    def consensus(self) -> bool:
        vals = set(self.learned_values)
        return len(vals) == 1 and None not in vals

    @property
    def p_hat(self) -> Optional[int]:
        vals = [v for v in self.learned_values if v is not None]
        return max(vals) if vals else None


def _sfr_slot_budget(sched: SfrSchedule, epsilon: float, p_cap: int) -> int:
    total = 0
    for p in range(sched.p_init, p_cap + 1):
        t = sched.t_of_p(p, epsilon)
        inner = t * (t + 3) // 2
        bc = BroadcastConfig(epsilon=epsilon, delta_bound=max(3 * p, 2), n_bound=2 ** (p + 1))
        relay = (sched.C1 + 1) * bc.tau * (2 * bc.k + 2)
        total += inner + sched.C1 * sched.B_of_p(max(p - 1, 1)) + relay
    return 2 * total + 1000


def run_sfr(
    net: Network,
    epsilon: float,
    seed: int,
    r_max: Optional[float] = None,
    p_cap: Optional[int] = None,
    max_slots: Optional[int] = None,
    record_trace: bool = False,
) -> SfrRunResult:
    """Run search-for-range on every node of the network simultaneously."""
    n = net.n
    r_max = net.side if r_max is None else r_max
    sched = sfr_schedule(net.area, epsilon, r_max)
    if p_cap is None:
        p_cap = sched.p_init + 2 * math.ceil(math.log2(max(n, 2)))
    if max_slots is None:
        max_slots = _sfr_slot_budget(sched, epsilon, p_cap)
    factory = sfr_program(sched, epsilon, p_cap)
    rng = RngStream(seed, n)
    trace = run(ChannelModel.multihop(net), [factory] * n, max_slots, rng, record_trace)
    return SfrRunResult(results=trace.final_states, slots=trace.slot_count, truncated=trace.truncated)


# ---------------------------------------------------------------------------
# single-hop initialization (collision-detection channel)


@dataclass
class InitState:
    """Replicated bookkeeping of the labeling recursion: next ID to assign,
    stack depth, and the IDs handed out so far."""

    number: int = 1
    L: int = 1
    assigned: Dict[int, int] = field(default_factory=dict)

    def check(self):
        if self.number - 1 != len(self.assigned):
            raise AssertionError("Number must always equal 1 + #assigned IDs")


@dataclass
class EquipartitionOutcome:
    subsets: List[List[int]]
    number: int
    labels: Dict[int, int]
    rounds: int
    failed_rounds: int
    slots_used: int


def _slot_status(n_tx: int) -> str:
    """Single-hop CD observation for a slot with n_tx transmitters."""
    if n_tx == 0:
        return "silence"
    if n_tx == 1:
        return "message"
    return "collision"


def equipartition(
    channel: ChannelModel,
    members: Sequence[int],
    k: int,
    number: int,
    rng: RngStream,
    start_slot: int = 0,
) -> EquipartitionOutcome:
    """Split ``members`` into k subsets by repeated random choice, one
    k-slot round per attempt, until at least two subsets are non-empty; then
    label singleton subsets (in subset order) with consecutive IDs.

    A subset is non-empty iff its slot shows a message or a collision, which
    with collision detection is exactly observable; stations in the subset
    know their own choice, so every station classifies every subset
    identically and the shared Number counter stays consistent.
    """
    if channel.network is not None or not channel.collision_detection:
        raise ValueError("equipartition needs a single-hop channel with collision detection")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if len(members) < 2:
        raise ValueError("equipartition needs at least two stations")

    slot = start_slot
    rounds = 0
    failed = 0
    while True:
        block = rng.uniforms(slot)
        subsets: List[List[int]] = [[] for _ in range(k)]
        for v in members:
            subsets[int(block[v] * k)].append(v)
        rounds += 1
        slot += k
        if sum(1 for s in subsets if s) >= 2:
            break
        failed += 1

    labels: Dict[int, int] = {}
    for s in subsets:
        if len(s) == 1:
            labels[s[0]] = number
            number += 1
    return EquipartitionOutcome(
        subsets=subsets,
        number=number,
        labels=labels,
        rounds=rounds,
        failed_rounds=failed,
        slots_used=k * rounds,
    )


@dataclass
class InitResult:
    assignment: Dict[int, int]
    slots: int
    rounds: int
    failed_rounds: int
    state: InitState


def initialize_single_hop(
    channel: ChannelModel,
    n_actual: Optional[int] = None,
    k: int = 3,
    seed: int = 0,
    rng: Optional[RngStream] = None,
) -> InitResult:
    """Assign distinct IDs 1..n on a single-hop collision-detection channel
    via the stack-driven equipartition recursion.

    The stack starts with the full station set; a popped set of size 0 or 1
    costs nothing (size-1 sets were labeled when they were split off), any
    larger set is equipartitioned into k subsets pushed in order.  A lone
    station at the top level is labeled 1 directly.  Slot accounting: one
    leading alignment slot, then k slots per equipartition round.
    """
    if channel.network is not None or not channel.collision_detection:
        raise ValueError("initialization needs a single-hop channel with collision detection")
    n = channel.n
    if n_actual is not None and n_actual != n:
        raise ValueError(f"n_actual={n_actual} does not match channel size {n}")
    if rng is None:
        rng = RngStream(seed, n)

    state = InitState()
    if n == 1:
        state.assigned[0] = 1
        state.number = 2
        state.check()
        return InitResult({0: 1}, slots=0, rounds=0, failed_rounds=0, state=state)

    slot = 1  # rounds begin at TIME mod k == 1
    rounds = 0
    failed = 0
    stack: List[List[int]] = [list(range(n))]
    while stack:
        group = stack.pop()
        state.L = len(stack) + 1
        if len(group) <= 1:
            continue
        out = equipartition(channel, group, k, state.number, rng, start_slot=slot)
        slot += out.slots_used
        rounds += out.rounds
        failed += out.failed_rounds
        state.number = out.number
        state.assigned.update(out.labels)
        state.check()
        # P_L := S1 ... P_{L+k-1} := Sk; processing resumes at the top (Sk)
        stack.extend(out.subsets)
    total_slots = 1 + k * rounds
    return InitResult(state.assigned, slots=total_slots, rounds=rounds, failed_rounds=failed, state=state)


def measure_equipartition_failure(m: int, k: int, min_rounds: int, seed: int) -> Tuple[int, int]:
    """Run repeated equipartition calls on fresh m-station sets until at
    least ``min_rounds`` rounds have been played; returns (failed, total)."""
    channel = ChannelModel.single_hop(m, collision_detection=True)
    rng = RngStream(seed, m)
    total = 0
    failed = 0
    slot = 0
    while total < min_rounds:
        out = equipartition(channel, list(range(m)), k, 1, rng, start_slot=slot)
        slot += out.slots_used
        total += out.rounds
        failed += out.failed_rounds
    return failed, total


# ---------------------------------------------------------------------------
# multihop pipeline


@dataclass
class MultihopInitResult:
    assignment: Dict[int, int]
    charged_slots: int
    sfr_slots: int
    emulated_slots: int
    charge_per_slot: int
    p_hat: int
    bounds: UpperBounds
    iterations: int
    consensus: bool


def initialize_multihop(
    net: Network,
    epsilon: float,
    seed: int,
    r_max: Optional[float] = None,
    k: int = 3,
    retry_cap: int = 5,
    verifier: Optional[Callable[[Dict[int, int], int], bool]] = None,
) -> MultihopInitResult:
    """Three-step pipeline: search-for-range for the bounds, then the
    single-hop recursion over an emulated collision-detection channel, then
    an omniscient uniqueness check.

    Each emulated single-hop slot is charged the broadcast termination bound
    derived from the learned range exponent.  On verification failure the
    node-count bound is doubled (p_hat + 1) and the labeling step reruns, up
    to ``retry_cap`` times.
    """
    n = net.n
    if verifier is None:
        verifier = lambda assignment, n_: sorted(assignment.values()) == list(range(1, n_ + 1))

    if n == 1:
        bounds = upper_bounds_from_p0(2)
        return MultihopInitResult(
            assignment={0: 1},
            charged_slots=0,
            sfr_slots=0,
            emulated_slots=0,
            charge_per_slot=0,
            p_hat=2,
            bounds=bounds,
            iterations=1,
            consensus=True,
        )

    sfr = run_sfr(net, epsilon, derive_seed(seed, "sfr"), r_max=r_max)
    p_hat = sfr.p_hat
    if p_hat is None:
        raise RuntimeError("search-for-range terminated without any range estimate")
    p_hat = max(p_hat, 2)

    channel = ChannelModel.single_hop(n, collision_detection=True)
    charged = sfr.slots
    emulated_total = 0
    for iteration in range(1, retry_cap + 1):
        bounds = upper_bounds_from_p0(p_hat)
        charge = broadcast_time(bounds.diam_max, bounds.n_max, bounds.delta_max, epsilon)
        init = initialize_single_hop(
            channel, k=k, rng=RngStream(derive_seed(seed, "init", iteration), n)
        )
        emulated_total += init.slots
        charged += init.slots * charge
        if verifier(init.assignment, n):
            return MultihopInitResult(
                assignment=init.assignment,
                charged_slots=charged,
                sfr_slots=sfr.slots,
                emulated_slots=emulated_total,
                charge_per_slot=charge,
                p_hat=p_hat,
                bounds=bounds,
                iterations=iteration,
                consensus=sfr.consensus,
            )
        p_hat += 1  # double n_max and recompute the dependent bounds
    raise RuntimeError(f"verification still failing after {retry_cap} attempts")
