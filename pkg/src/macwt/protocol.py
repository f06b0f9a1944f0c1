"""Slotted key-recycling protocol: FIFO key buffers, the protected window and bookkeeping.

Each slot has a wiretap-coded first part of ``n1`` channel uses and a keyed
second part of ``n2 = l * n1`` uses. Everything a user transmits in slot ``k``
is banked as one key segment with origin ``k``; the second part of later
slots is padded with the oldest banked bits.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int
from .exceptions import ProtocolError
from .regions import RampSchedule

USERS = (1, 2)

LEDGER_HEADER = (
    "slot", "user", "wiretap_bits", "keyed_bits", "key_consumed",
    "key_stored", "buffer_after", "oldest_origin_used",
)


def bits_for(n, rate):
    """``floor(n * rate)`` with a tolerance so ``0.29 * 100`` floors to 29, not 28."""
    if rate <= 0:
        return 0
    return int(math.floor(n * rate + 1e-9))


@dataclass(frozen=True)
class SlotConfig:
    n1: int
    l: int
    epsilon: float = 0.01
    N1: int = 0

    def __post_init__(self):
        check_positive_int(self.n1, "n1")
        check_positive_int(self.l, "l")
        check_positive_int(self.N1, "N1", minimum=0)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def n2(self):
        return self.l * self.n1

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def leakage_budget(self):
        """Per-slot leakage budget ``n1 * epsilon`` in bits."""
        return self.n1 * self.epsilon


@dataclass
class KeySegment:
    origin_slot: int
    bits: int


class KeyBuffer:
    """FIFO of key segments ordered by origin slot."""

    def __init__(self):
        self.segments = deque()
        self.total_bits = 0

    def __repr__(self):
        return f"KeyBuffer(total_bits={self.total_bits}, segments={len(self.segments)})"

    def __eq__(self, other):
        if not isinstance(other, KeyBuffer):
            return NotImplemented
        return self.total_bits == other.total_bits and list(self.segments) == list(other.segments)

    @property
    def oldest_origin(self):
        return self.segments[0].origin_slot if self.segments else None

    def append(self, origin_slot, bits):
        if bits <= 0:
            return
        if self.segments and origin_slot <= self.segments[-1].origin_slot:
            raise ProtocolError("segments must be appended in increasing origin order")
        self.segments.append(KeySegment(origin_slot, bits))
        self.total_bits += bits

    def eligible_bits(self, max_origin, limit=None):
        """Bits in segments with origin ``<= max_origin``; stops counting at ``limit``."""
        total = 0
        for seg in self.segments:
            if seg.origin_slot > max_origin or (limit is not None and total >= limit):
                break
            total += seg.bits
        return total if limit is None else min(total, limit)

    def consume(self, bits, max_origin):
        """Remove ``bits`` oldest bits, all from segments with origin ``<= max_origin``.

        Returns ``[(origin, bits_taken), ...]``.
        """
        available = self.eligible_bits(max_origin, limit=bits)
        if available < bits:
            raise ProtocolError(
                f"requested {bits} key bits but only {available} are eligible", shortfall=bits - available
            )
        taken = []
        remaining = bits
        while remaining:
            seg = self.segments[0]
            use = min(seg.bits, remaining)
            taken.append((seg.origin_slot, use))
            remaining -= use
            if use == seg.bits:
                self.segments.popleft()
            else:
                seg.bits -= use
        self.total_bits -= bits
        return taken


@dataclass(frozen=True)
class SlotRates:
    """Per-user first-part (wiretap) and second-part (keyed) rates in bits/use."""

    secrecy: tuple
    capacity: tuple

    @classmethod
    def from_schedule(cls, schedule: RampSchedule):
        return cls(tuple(schedule.first_part), tuple(schedule.saturated))


@dataclass(frozen=True)
class SlotPlan:
    slot: int
    wiretap_bits: tuple
    keyed_bits: tuple
    max_origin: tuple  # per user: newest origin the keys may come from
    strict: tuple  # per user: whether the protected window is enforced


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    user: int
    wiretap_bits: int
    keyed_bits: int
    key_consumed: int
    key_stored: int
    buffer_before: int
    buffer_after: int
    key_origins: tuple
    strict_window: bool

    def as_row(self):
        return {
            "slot": self.slot,
            "user": self.user,
            "wiretap_bits": self.wiretap_bits,
            "keyed_bits": self.keyed_bits,
            "key_consumed": self.key_consumed,
            "key_stored": self.key_stored,
            "buffer_after": self.buffer_after,
            "oldest_origin_used": min(self.key_origins) if self.key_origins else "",
        }


@dataclass
class ProtocolState:
    """Transmitter key buffers, Bob's mirrored copies and the slot counter."""

    cfg: SlotConfig
    buffers: tuple = field(default_factory=lambda: (KeyBuffer(), KeyBuffer()))
    receiver: tuple = field(default_factory=lambda: (KeyBuffer(), KeyBuffer()))
    slot: int = 1
    strict: list = field(default_factory=lambda: [False, False])
    window_start: list = field(default_factory=lambda: [None, None])

    def window_limit(self, k=None):
        k = self.slot if k is None else k
        return k - self.cfg.N1 - 1


def init_protocol(cfg, rates=None):
    """Fresh protocol state: empty buffers, slot 1 next.

    ``rates`` is accepted for symmetry with :func:`run_protocol`; slot 1 has no
    key whatever the rates, so its second part stays idle.
    """
    return ProtocolState(cfg)


def _eligibility(state, user):
    """Window limit and strictness for ``user`` in the current slot.

    Until some buffered segment is old enough for the protected window, keys may
    come from anything already banked (origin <= k - 1). From the first slot where
    an old-enough segment exists, the window ``origin <= k - N1 - 1`` applies for good.
    """
    i = user - 1
    k = state.slot
    limit = state.window_limit()
    if not state.strict[i]:
        oldest = state.buffers[i].oldest_origin
        if oldest is not None and oldest <= limit:
            state.strict[i] = True
            state.window_start[i] = k
    return (limit if state.strict[i] else k - 1), state.strict[i]


def plan_from_bits(state, wiretap_bits, keyed_demand):
    """Plan a slot from per-user bit counts; keyed bits are capped by eligible key."""
    max_origin, strict, keyed = [], [], []
    for user in USERS:
        limit, is_strict = _eligibility(state, user)
        demand = int(keyed_demand[user - 1])
        keyed.append(state.buffers[user - 1].eligible_bits(limit, limit=demand))
        max_origin.append(limit)
        strict.append(is_strict)
    return SlotPlan(
        state.slot,
        tuple(int(b) for b in wiretap_bits),
        tuple(keyed),
        tuple(max_origin),
        tuple(strict),
    )


def plan_slot(state, cfg, rates):
    """Wiretap bits ``floor(n1 * secrecy)`` and keyed bits ``min(eligible, floor(n2 * capacity))``."""
    wiretap = [bits_for(cfg.n1, r) for r in rates.secrecy]
    demand = [bits_for(cfg.n2, r) for r in rates.capacity]
    return plan_from_bits(state, wiretap, demand)


def advance_slot(state, plan):
    """Apply a plan: consume keys FIFO, bank the slot's bits, move to the next slot.

    Bob's buffers receive the identical operations. Returns ``(state, records)``.
    """
    if plan.slot != state.slot:
        raise ProtocolError(f"plan is for slot {plan.slot} but the state is at slot {state.slot}")
    k = state.slot
    records = []
    for user in USERS:
        i = user - 1
        buf, mirror = state.buffers[i], state.receiver[i]
        before = buf.total_bits
        keyed = plan.keyed_bits[i]
        taken = buf.consume(keyed, plan.max_origin[i]) if keyed else []
        if keyed:
            mirror.consume(keyed, plan.max_origin[i])
        stored = plan.wiretap_bits[i] + keyed
        buf.append(k, stored)
        mirror.append(k, stored)
        records.append(
            SlotRecord(
                slot=k,
                user=user,
                wiretap_bits=plan.wiretap_bits[i],
                keyed_bits=keyed,
                key_consumed=keyed,
                key_stored=stored,
                buffer_before=before,
                buffer_after=buf.total_bits,
                key_origins=tuple(o for o, _ in taken),
                strict_window=plan.strict[i],
            )
        )
    state.slot += 1
    return state, records


@dataclass
class ProtocolRun:
    cfg: SlotConfig
    records: list
    buffers: np.ndarray  # (K + 1, 2): B_1 .. B_{K+1}
    n2: tuple  # per user: first slot from which every key obeys the window
    window_start: tuple  # per user: slot where the strict window switched on
    avg_rate: tuple  # bits per channel use over whole slots
    avg_keyed_rate: tuple  # keyed bits per second-part channel use

    @property
    def horizon(self):
        return len(self.buffers) - 1

    def ledger_rows(self):
        return [r.as_row() for r in self.records]


def observed_n2(records, N1, user):
    """Smallest ``k0`` such that every slot ``k >= k0`` only used keys with origin ``<= k - N1 - 1``."""
    last_bad = 0
    for r in records:
        if r.user == user and r.key_origins and max(r.key_origins) > r.slot - N1 - 1:
            last_bad = r.slot
    return last_bad + 1


def run_protocol(cfg, rates, horizon):
    """Deterministic ``horizon``-slot run at constant per-slot rates.

    ``rates`` is a :class:`SlotRates` or a :class:`RampSchedule`; a schedule
    contributes its first-part pair and its saturated second-part pair.
    """
    horizon = check_positive_int(horizon, "horizon")
    if isinstance(rates, RampSchedule):
        rates = SlotRates.from_schedule(rates)
    state = init_protocol(cfg, rates)
    records = []
    buffers = np.zeros((horizon + 1, 2), dtype=np.int64)
    for k in range(horizon):
        plan = plan_slot(state, cfg, rates)
        state, recs = advance_slot(state, plan)
        records.extend(recs)
        buffers[k + 1] = [state.buffers[0].total_bits, state.buffers[1].total_bits]
    return _summarise(cfg, records, buffers, state)


def _summarise(cfg, records, buffers, state):
    K = len(buffers) - 1
    sent = np.zeros(2)
    keyed = np.zeros(2)
    for r in records:
        sent[r.user - 1] += r.wiretap_bits + r.keyed_bits
        keyed[r.user - 1] += r.keyed_bits
    return ProtocolRun(
        cfg=cfg,
        records=records,
        buffers=buffers,
        n2=tuple(observed_n2(records, cfg.N1, u) for u in USERS),
        window_start=tuple(state.window_start),
        avg_rate=tuple(sent / (K * cfg.n)),
        avg_keyed_rate=tuple(keyed / (K * cfg.n2)),
    )
