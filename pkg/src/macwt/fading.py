"""Block-fading Gaussian MAC with an eavesdropper: per-slot capacities, power policies
and long-run rate accounting through the key-buffer protocol.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_positive_int
from .protocol import SlotConfig, advance_slot, init_protocol, observed_n2, plan_from_bits

GAINS = ("h1", "h2", "g1", "g2")

FADING_HEADER = (
    "slot", "h1", "h2", "g1", "g2", "P1", "P2", "C1", "C2", "C1e", "C2e", "C",
    "wiretap_bits_1", "keyed_bits_1", "buffer1", "wiretap_bits_2", "keyed_bits_2", "buffer2",
)


@dataclass(frozen=True)
class FadingDraw:
    h1: float
    h2: float
    g1: float
    g2: float
    slot: int = 1

    def __post_init__(self):
        if min(self.h1, self.h2, self.g1, self.g2) < 0:
            raise ValueError("power gains must be nonnegative")


def _check_noise(noise):
    s1, s2 = (float(v) for v in noise)
    if not (s1 > 0 and s2 > 0):
        raise ValueError(f"noise variances must be positive, got {noise}")
    return s1, s2


def capacity_terms(draw, p, noise=(1.0, 1.0)):
    """``(C1, C2, C1e, C2e, C)`` in bits per channel use.

    Works elementwise when the draw fields and powers are arrays.
    """
    s1, s2 = _check_noise(noise)
    p1, p2 = p
    h1, h2, g1, g2 = draw.h1, draw.h2, draw.g1, draw.g2
    c1 = 0.5 * np.log2(1 + h1 * p1 / s1)
    c2 = 0.5 * np.log2(1 + h2 * p2 / s1)
    c1e = 0.5 * np.log2(1 + g1 * p1 / (s2 + g2 * p2))
    c2e = 0.5 * np.log2(1 + g2 * p2 / (s2 + g1 * p1))
    c = 0.5 * np.log2(1 + (h1 * p1 + h2 * p2) / s1)
    return c1, c2, c1e, c2e, c


def _fresh_bits(n1, h, g, c, ce):
    # zero whenever the legitimate gain does not beat the eavesdropper's
    rate = np.where(np.asarray(h) > np.asarray(g), np.maximum(np.asarray(c) - np.asarray(ce), 0.0), 0.0)
    return np.floor(n1 * rate + 1e-9).astype(np.int64)


def secrecy_increment(draw, p, noise, n1):
    """Fresh wiretap-coded bits per user: ``floor(n1 * (C_i - C_i^e)^+)`` when ``h_i > g_i``."""
    c1, c2, c1e, c2e, _ = capacity_terms(draw, p, noise)
    return (
        int(_fresh_bits(n1, draw.h1, draw.g1, c1, c1e)),
        int(_fresh_bits(n1, draw.h2, draw.g2, c2, c2e)),
    )


# ---------------------------------------------------------------------------
# gain and power models


def _sample_family(spec, rng, size):
    family = spec.get("family")
    if family == "exponential":
        return rng.exponential(float(spec.get("mean", 1.0)), size)
    if family == "constant":
        return np.full(size, float(spec["value"]))
    if family == "uniform":
        return rng.uniform(float(spec.get("low", 0.0)), float(spec.get("high", 1.0)), size)
    raise ValueError(f"unknown gain family {family!r}")


@dataclass(frozen=True)
class GainModel:
    """Independent block-fading power gains, one draw per slot.

    ``families`` maps each of ``h1, h2, g1, g2`` to a dict such as
    ``{"family": "exponential", "mean": 1.0}`` (Rayleigh amplitude),
    ``{"family": "constant", "value": 2.0}`` or
    ``{"family": "uniform", "low": 0.0, "high": 1.0}``.
    """

    families: dict
    seed: int

    def __post_init__(self):
        missing = [g for g in GAINS if g not in self.families]
        if missing:
            raise ValueError(f"gain model missing {missing}")
        probe = np.random.default_rng(0)
        for g in GAINS:
            values = _sample_family(self.families[g], probe, 4)
            if np.any(values < 0):
                raise ValueError(f"gain {g} can be negative")

    @classmethod
    def rayleigh(cls, seed, bob_mean=1.0, eve_mean=1.0):
        return cls(
            {
                "h1": {"family": "exponential", "mean": bob_mean},
                "h2": {"family": "exponential", "mean": bob_mean},
                "g1": {"family": "exponential", "mean": eve_mean},
                "g2": {"family": "exponential", "mean": eve_mean},
            },
            seed,
        )

    def sample(self, horizon):
        """``(horizon, 4)`` array of gains; each gain has its own spawned stream."""
        streams = np.random.SeedSequence(self.seed).spawn(len(GAINS))
        cols = [
            _sample_family(self.families[g], np.random.default_rng(s), horizon)
            for g, s in zip(GAINS, streams)
        ]
        return np.stack(cols, axis=1)

    def to_dict(self):
        return {"families": self.families, "seed": self.seed}


class PowerPolicy:
    """Maps gains to transmit powers; ``budget`` is the long-term average constraint."""

    kind = "custom"

    def __init__(self, budget, fn=None):
        self.budget = tuple(float(b) for b in budget)
        self.fn = fn

    def __call__(self, h1, h2, g1, g2):
        p1, p2 = self.fn(h1, h2, g1, g2)
        return np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "budget": list(self.budget)}


class ConstantPower(PowerPolicy):
    """Always transmit at the budget; needs no channel knowledge at the users."""

    kind = "constant"

    def __call__(self, h1, h2, g1, g2):
        shape = np.shape(h1)
        return np.full(shape, self.budget[0]), np.full(shape, self.budget[1])


class OnOffPower(PowerPolicy):
    """Transmit ``budget / duty`` when ``h_i`` exceeds a threshold, else stay silent.

    ``duty`` should equal ``P(h_i > threshold_i)`` so the average meets the budget.
    """

    kind = "on_off"

    def __init__(self, budget, thresholds, duty):
        super().__init__(budget)
        self.thresholds = tuple(float(t) for t in thresholds)
        self.duty = tuple(float(d) for d in duty)
        if not all(0 < d <= 1 for d in self.duty):
            raise ValueError("duty cycles must lie in (0, 1]")

    def __call__(self, h1, h2, g1, g2):
        p1 = np.where(np.asarray(h1) > self.thresholds[0], self.budget[0] / self.duty[0], 0.0)
        p2 = np.where(np.asarray(h2) > self.thresholds[1], self.budget[1] / self.duty[1], 0.0)
        return p1, p2

    def to_dict(self):
        return {
            "kind": self.kind,
            "budget": list(self.budget),
            "thresholds": list(self.thresholds),
            "duty": list(self.duty),
        }


def policy_from_dict(data):
    kind = data.get("kind", "constant")
    budget = data["budget"]
    if kind == "constant":
        return ConstantPower(budget)
    if kind == "on_off":
        return OnOffPower(budget, data["thresholds"], data["duty"])
    raise ValueError(f"unknown power policy {kind!r}")


# ---------------------------------------------------------------------------
# simulation


@dataclass
class FadingLedger:
    """Per-slot arrays; row ``k - 1`` is slot ``k``."""

    gains: np.ndarray  # (K, 4)
    powers: np.ndarray  # (K, 2)
    terms: np.ndarray  # (K, 5): C1, C2, C1e, C2e, C
    wiretap_bits: np.ndarray  # (K, 2)
    keyed_bits: np.ndarray  # (K, 2)
    keyed_demand: np.ndarray  # (K, 2)
    buffers: np.ndarray  # (K, 2), buffer after each slot
    key_max_origin: np.ndarray  # (K, 2), newest origin consumed, 0 if none

    def __len__(self):
        return len(self.gains)

    def rows(self):
        for k in range(len(self)):
            yield [
                k + 1, *(repr(float(v)) for v in self.gains[k]),
                *(repr(float(v)) for v in self.powers[k]),
                *(repr(float(v)) for v in self.terms[k]),
                int(self.wiretap_bits[k, 0]), int(self.keyed_bits[k, 0]), int(self.buffers[k, 0]),
                int(self.wiretap_bits[k, 1]), int(self.keyed_bits[k, 1]), int(self.buffers[k, 1]),
            ]


@dataclass
class ErgodicReport:
    horizon: int
    csi: str
    avg_power: list
    power_budget: list
    avg_rate: list  # whole-slot bits per channel use
    avg_keyed_rate: list  # keyed bits per second-part channel use
    limsup_rate: list  # max running whole-slot average over the last decade of horizons
    limsup_keyed_rate: list
    target_rate: list  # E[C_i], the l -> infinity slot-average limit
    target_rate_half: list  # 1/2 E[C_i], the halved variant
    target_sum_rate: float  # E[C]
    first_part_rate: list  # E[(C_i - C_i^e)^+ 1{h_i > g_i}]
    dilution_gap: list  # (target - first part) / (l + 1)
    slot_average_target: list  # target - dilution_gap
    secrecy_benchmark: list  # E[(C_i - C_i^e)^+]
    secrecy_sum_benchmark: float  # E[(C - C_1^e - C_2^e)^+]
    frac_h_gt_g: list
    buffer_final: list
    buffer_at_tenth: list
    n2: list
    window_start: list

    def to_dict(self):
        """Flat mapping; per-user lists become ``name_1`` and ``name_2``."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, list):
                for i, v in enumerate(value, start=1):
                    out[f"{key}_{i}"] = v
            else:
                out[key] = value
        return out


def running_average(x):
    x = np.asarray(x, dtype=float)
    return np.cumsum(x, axis=0) / np.arange(1, len(x) + 1).reshape((-1,) + (1,) * (x.ndim - 1))


def run_fading(model, policy, cfg, noise=(1.0, 1.0), horizon=1000, csi="full"):
    """Simulate ``horizon`` slots of the fading scheme.

    ``csi="full"`` lets the policy see all gains; ``csi="receiver"`` replaces it
    by constant power at the budget, as when only Bob knows the channel.
    Returns ``(ErgodicReport, FadingLedger)``.
    """
    horizon = check_positive_int(horizon, "horizon")
    if csi not in ("full", "receiver"):
        raise ValueError(f"csi must be 'full' or 'receiver', got {csi!r}")
    noise = _check_noise(noise)
    if csi == "receiver":
        policy = ConstantPower(policy.budget)

    gains = model.sample(horizon)
    h1, h2, g1, g2 = gains.T
    p1, p2 = policy(h1, h2, g1, g2)
    if np.any(p1 < 0) or np.any(p2 < 0):
        raise ValueError("power policy returned negative power")
    c1, c2, c1e, c2e, c = capacity_terms(_ArrayDraw(h1, h2, g1, g2), (p1, p2), noise)
    wiretap = np.stack(
        [_fresh_bits(cfg.n1, h1, g1, c1, c1e), _fresh_bits(cfg.n1, h2, g2, c2, c2e)], axis=1
    )
    demand = np.floor(cfg.n2 * np.stack([c1, c2], axis=1) + 1e-9).astype(np.int64)

    state = init_protocol(cfg)
    keyed = np.zeros((horizon, 2), dtype=np.int64)
    buffers = np.zeros((horizon, 2), dtype=np.int64)
    max_origin = np.zeros((horizon, 2), dtype=np.int64)
    records = []
    for k in range(horizon):
        plan = plan_from_bits(state, wiretap[k], demand[k])
        state, recs = advance_slot(state, plan)
        for r in recs:
            i = r.user - 1
            keyed[k, i] = r.keyed_bits
            buffers[k, i] = r.buffer_after
            if r.key_origins:
                max_origin[k, i] = max(r.key_origins)
                records.append(r)

    ledger = FadingLedger(
        gains=gains,
        powers=np.stack([p1, p2], axis=1),
        terms=np.stack([c1, c2, c1e, c2e, c], axis=1),
        wiretap_bits=wiretap,
        keyed_bits=keyed,
        keyed_demand=demand,
        buffers=buffers,
        key_max_origin=max_origin,
    )
    report = _report(ledger, policy, cfg, csi, state, records)
    return report, ledger


@dataclass(frozen=True)
class _ArrayDraw:
    h1: np.ndarray
    h2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray


def _report(ledger, policy, cfg, csi, state, records):
    K = len(ledger)
    l = cfg.l
    slot_rate = (ledger.wiretap_bits + ledger.keyed_bits) / cfg.n
    keyed_rate = ledger.keyed_bits / cfg.n2
    run_slot = running_average(slot_rate)
    run_keyed = running_average(keyed_rate)
    tail = slice(max(math.ceil(K / 10) - 1, 0), K)
    c1, c2, c1e, c2e, c = ledger.terms.T
    h1, h2, g1, g2 = ledger.gains.T
    target = [float(np.mean(c1)), float(np.mean(c2))]
    first = [
        float(np.mean(np.where(h1 > g1, np.maximum(c1 - c1e, 0), 0))),
        float(np.mean(np.where(h2 > g2, np.maximum(c2 - c2e, 0), 0))),
    ]
    gap = [(t - f) / (l + 1) for t, f in zip(target, first)]
    tenth = max(K // 10, 1) - 1
    return ErgodicReport(
        horizon=K,
        csi=csi,
        avg_power=[float(v) for v in ledger.powers.mean(axis=0)],
        power_budget=list(policy.budget),
        avg_rate=[float(v) for v in run_slot[-1]],
        avg_keyed_rate=[float(v) for v in run_keyed[-1]],
        limsup_rate=[float(v) for v in run_slot[tail].max(axis=0)],
        limsup_keyed_rate=[float(v) for v in run_keyed[tail].max(axis=0)],
        target_rate=target,
        target_rate_half=[t / 2 for t in target],
        target_sum_rate=float(np.mean(c)),
        first_part_rate=first,
        dilution_gap=gap,
        slot_average_target=[t - g for t, g in zip(target, gap)],
        secrecy_benchmark=[float(np.mean(np.maximum(c1 - c1e, 0))), float(np.mean(np.maximum(c2 - c2e, 0)))],
        secrecy_sum_benchmark=float(np.mean(np.maximum(c - c1e - c2e, 0))),
        frac_h_gt_g=[float(np.mean(h1 > g1)), float(np.mean(h2 > g2))],
        buffer_final=[int(v) for v in ledger.buffers[-1]],
        buffer_at_tenth=[int(v) for v in ledger.buffers[tenth]],
        n2=[observed_n2(records, cfg.N1, u) for u in (1, 2)],
        window_start=list(state.window_start),
    )


@dataclass(frozen=True)
class PowerCheck:
    passed: bool
    running_average: np.ndarray  # (K, 2)
    final: tuple


def check_power_constraint(ledger, policy, rtol=1e-6):
    """Running mean of used power; passes iff the final mean is within the budget."""
    powers = ledger.powers if isinstance(ledger, FadingLedger) else np.asarray(ledger, dtype=float)
    if len(powers) == 0:
        raise ValueError("empty ledger")
    avg = running_average(powers)
    final = tuple(float(v) for v in avg[-1])
    passed = all(f <= b * (1 + rtol) for f, b in zip(final, policy.budget))
    return PowerCheck(passed, avg, final)
