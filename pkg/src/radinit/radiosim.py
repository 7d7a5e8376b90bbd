"""Slotted synchronous radio channel with collision-without-detection
semantics, plus the execution engine that drives per-node programs on it.

Node programs are generators: they yield an action for the current slot
(transmit, idle, or sleep) and are resumed with the observation from the
previous slot (None for silence, a Message, or COLLISION when the channel
has collision detection).  A transmitting node hears nothing in its own slot
(half duplex).  All randomness is drawn from a counter-based stream keyed by
(seed, node, slot), so traces do not depend on scheduling order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .geomnet import Network

__all__ = [
    "ChannelModel",
    "Message",
    "COLLISION",
    "Transmit",
    "Sleep",
    "IDLE",
    "SlotOutcome",
    "ProtocolTrace",
    "RngStream",
    "derive_seed",
    "step",
    "run",
    "NodeCtx",
]


def derive_seed(master: int, *parts) -> int:
    """Stable sub-seed for (master, parts): independent streams for trials
    and pipeline stages that reproduce across runs."""
    text = repr((int(master),) + tuple(parts)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class Message:
    payload: Any


class _Collision:
    __slots__ = ()

    def __repr__(self):
        return "COLLISION"


COLLISION = _Collision()


@dataclass(frozen=True)
class Transmit:
    """Transmit ``payload`` this slot, optionally at a per-transmission
    radius (defaults to the network radius; ignored in single-hop mode)."""

    payload: Any
    radius: Optional[float] = None


@dataclass(frozen=True)
class Sleep:
    """Listen silently until slot ``until`` (forever if None); a reception
    wakes the node early, on the following slot."""

    until: Optional[int]


class _Idle:
    __slots__ = ()

    def __repr__(self):
        return "IDLE"


IDLE = _Idle()


@dataclass(frozen=True)
class ChannelModel:
    """Channel topology and capability.  Multihop mode (a geometric network)
    forbids collision detection; single-hop mode (complete graph on n nodes)
    permits it."""

    collision_detection: bool
    network: Optional[Network] = None
    n_single_hop: Optional[int] = None

    def __post_init__(self):
        if (self.network is None) == (self.n_single_hop is None):
            raise ValueError("exactly one of network / n_single_hop required")
        if self.network is not None and self.collision_detection:
            raise ValueError("multihop channels have no collision detection")
        if self.n_single_hop is not None and self.n_single_hop < 1:
            raise ValueError("single-hop channel needs n >= 1")

    @classmethod
    def multihop(cls, network: Network) -> "ChannelModel":
        return cls(collision_detection=False, network=network)

    @classmethod
    def single_hop(cls, n: int, collision_detection: bool = True) -> "ChannelModel":
        return cls(collision_detection=collision_detection, n_single_hop=n)

    @property
    def n(self) -> int:
        return self.network.n if self.network is not None else self.n_single_hop


_EMPTY_DICT: Dict[int, Any] = {}
_EMPTY_SET: frozenset = frozenset()


@dataclass(frozen=True)
class SlotOutcome:
    """Observed outcome of one slot: who transmitted, which listeners got a
    clean message, and which observed a collision (empty unless the channel
    detects collisions)."""

    transmitters: Tuple[int, ...] = ()
    messages: Dict[int, Any] = None  # listener -> payload
    collisions: frozenset = None

    def __post_init__(self):
        if self.messages is None:
            object.__setattr__(self, "messages", _EMPTY_DICT)
        if self.collisions is None:
            object.__setattr__(self, "collisions", _EMPTY_SET)

    def observation(self, node: int):
        """What ``node`` observed: None (silence), Message, or COLLISION."""
        if node in self.messages:
            return Message(self.messages[node])
        if node in self.collisions:
            return COLLISION
        return None


_EMPTY_OUTCOME = SlotOutcome()


@dataclass
class ProtocolTrace:
    """Per-slot outcomes of one run plus each node's reported final state."""

    slots: List[SlotOutcome]
    slot_count: int
    final_states: Dict[int, Any]
    terminated: bool
    truncated: bool

    def dump_lines(self, n: int):
        """Trace text: one line per slot with transmitter list and S/M/C
        observation codes for every node."""
        for t, outcome in enumerate(self.slots):
            tx = ",".join(str(i) for i in outcome.transmitters) or "-"
            codes = []
            for v in range(n):
                if v in outcome.messages:
                    codes.append(f"{v}:M")
                elif v in outcome.collisions:
                    codes.append(f"{v}:C")
                else:
                    codes.append(f"{v}:S")
            yield f"slot {t} | tx: {tx} | " + " ".join(codes)


class RngStream:
    """Counter-based uniform stream: the draw for (seed, node, slot, k) is a
    pure function of those values, independent of execution order."""

    def __init__(self, seed: int, n: int):
        self.seed = int(seed)
        self.n = int(n)
        self._key = self.seed % (1 << 128)
        self._cache: Dict[Tuple[int, int], np.ndarray] = {}

    def uniforms(self, slot: int, k: int = 0) -> np.ndarray:
        """Vector of n uniforms for (slot, k); cached per (slot, k)."""
        key = (slot, k)
        blk = self._cache.get(key)
        if blk is None:
            if len(self._cache) > 64:
                self._cache.clear()
            counter = (int(slot) << 192) | (int(k) << 128)
            bitgen = np.random.Philox(key=self._key, counter=counter)
            blk = np.random.Generator(bitgen).random(self.n)
            self._cache[key] = blk
        return blk

    def u(self, node: int, slot: int, k: int = 0) -> float:
        return float(self.uniforms(slot, k)[node])


def step(model: ChannelModel, transmissions: Dict[int, Any]) -> SlotOutcome:
    """Resolve one slot.  ``transmissions`` maps node -> Transmit (or bare
    payload).  A listener gets the message iff exactly one transmitter
    reaches it; two or more reaching it collide (observed as silence without
    collision detection).  Transmitters hear nothing.  In multihop mode a
    transmission reaches the nodes within the *transmitter's* radius."""
    n = model.n
    txs: Dict[int, Transmit] = {}
    for node, t in transmissions.items():
        if not (0 <= node < n):
            raise ValueError(f"transmitter {node} not in topology of size {n}")
        txs[node] = t if isinstance(t, Transmit) else Transmit(t)
    if not txs:
        return _EMPTY_OUTCOME

    counts: Dict[int, int] = {}
    payload_seen: Dict[int, Any] = {}
    if model.network is not None:
        net = model.network
        for u, t in txs.items():
            r = net.radius if t.radius is None else t.radius
            for v in net.neighbor_lists(r)[u]:
                counts[v] = counts.get(v, 0) + 1
                payload_seen[v] = t.payload
    else:
        if len(txs) == 1:
            ((u, t),) = txs.items()
            for v in range(n):
                if v != u:
                    counts[v] = 1
                    payload_seen[v] = t.payload
        else:
            c = len(txs)
            for v in range(n):
                counts[v] = c - 1 if v in txs else c

    messages: Dict[int, Any] = {}
    collided: set = set()
    for v, c in counts.items():
        if v in txs or c == 0:
            continue
        if c == 1:
            messages[v] = payload_seen[v]
        elif model.collision_detection:
            collided.add(v)
    return SlotOutcome(
        transmitters=tuple(sorted(txs)),
        messages=messages,
        collisions=frozenset(collided),
    )


class NodeCtx:
    """Per-node view of the engine: identity, current slot, and the node's
    random stream.  Programs may leave their outcome in ``result``."""

    __slots__ = ("node", "_engine", "result")

    def __init__(self, node: int, engine: "_Engine"):
        self.node = node
        self._engine = engine
        self.result = None

    @property
    def time(self) -> int:
        return self._engine.t

    def u(self, k: int = 0) -> float:
        return self._engine.rng.u(self.node, self._engine.t, k)


class _Engine:
    def __init__(self, model, factories, max_slots, rng, record_trace):
        self.model = model
        self.rng = rng
        self.max_slots = max_slots
        self.record = record_trace
        self.t = 0
        n = model.n
        if len(factories) != n:
            raise ValueError(f"need {n} programs, got {len(factories)}")
        self.ctxs = [NodeCtx(i, self) for i in range(n)]
        self.gens = [factories[i](self.ctxs[i]) for i in range(n)]
        self.done = [False] * n
        self.awake: Dict[int, None] = dict.fromkeys(range(n))
        self.wake_at: Dict[int, Optional[int]] = {}  # sleeping node -> slot or None
        self.pending: Dict[int, Any] = {}  # node -> observation to deliver
        self.started = [False] * n
        self.slots: List[SlotOutcome] = []

    def _advance(self, node: int, obs) -> None:
        gen = self.gens[node]
        try:
            action = gen.send(obs) if self.started[node] else next(gen)
            self.started[node] = True
        except StopIteration:
            self.done[node] = True
            self.awake.pop(node, None)
            self.wake_at.pop(node, None)
            return
        if isinstance(action, Transmit):
            self.tx[node] = action
        elif isinstance(action, Sleep):
            until = action.until
            if until is not None and until <= self.t:
                return  # already due; stays awake
            self.awake.pop(node, None)
            self.wake_at[node] = until
        elif action is IDLE or action is None:
            pass
        else:
            raise TypeError(f"program for node {node} yielded {action!r}")

    def run(self) -> ProtocolTrace:
        while self.t < self.max_slots:
            if all(self.done):
                break
            # wake sleepers that are due
            due = [v for v, w in self.wake_at.items() if w is not None and w <= self.t]
            for v in due:
                del self.wake_at[v]
                self.awake[v] = None
            if not self.awake and not self.pending:
                # nothing can happen before the next timer; jump there
                timers = [w for w in self.wake_at.values() if w is not None]
                if not timers:
                    # every survivor waits on a reception that cannot come
                    return self._finish(terminated=False, truncated=True)
                nxt = min(min(timers), self.max_slots)
                if self.record:
                    self.slots.extend([_EMPTY_OUTCOME] * (nxt - self.t))
                self._skipped = getattr(self, "_skipped", 0) + (nxt - self.t)
                self.t = nxt
                continue

            self.tx: Dict[int, Transmit] = {}
            for node in list(self.awake):
                obs = self.pending.pop(node, None)
                self._advance(node, obs)
            outcome = step(self.model, self.tx) if self.tx else _EMPTY_OUTCOME
            if self.record:
                self.slots.append(outcome)
            else:
                self._skipped = getattr(self, "_skipped", 0) + 1
            # deliver observations; receptions wake sleepers for next slot
            for v in outcome.messages:
                self._deliver(v, Message(outcome.messages[v]))
            for v in outcome.collisions:
                self._deliver(v, COLLISION)
            self.t += 1
        terminated = all(self.done)
        return self._finish(terminated=terminated, truncated=not terminated)

    def _deliver(self, v: int, obs) -> None:
        if self.done[v]:
            return
        self.pending[v] = obs
        if v not in self.awake:
            self.wake_at[v] = self.t + 1

    def _finish(self, terminated: bool, truncated: bool) -> ProtocolTrace:
        return ProtocolTrace(
            slots=self.slots,
            slot_count=self.t,
            final_states={i: self.ctxs[i].result for i in range(len(self.ctxs))},
            terminated=terminated,
            truncated=truncated,
        )


def run(
    model: ChannelModel,
    node_programs: List[Callable[[NodeCtx], Any]],
    max_slots: int,
    rng: RngStream,
    record_trace: bool = True,
) -> ProtocolTrace:
    """Execute the programs slot by slot until all terminate or ``max_slots``
    is reached.  ``node_programs[i]`` is called with node i's context and
    must return a generator (see module docstring for the protocol).

    The trace is deterministic given the stream's seed.  Slots in which every
    node sleeps are fast-forwarded; with ``record_trace`` they still appear
    in the trace as empty outcomes.
    """
    if max_slots < 1:
        raise ValueError(f"max_slots must be >= 1, got {max_slots}")
    return _Engine(model, node_programs, max_slots, rng, record_trace).run()
