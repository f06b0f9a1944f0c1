"""Random-binning wiretap codes, one-time-pad keying, joint ML decoding and exact leakage.

Everything here works at desk scale: codebooks are explicit tables and every
leakage figure is an exact mutual information obtained by enumerating
messages, confusion indices, keys and channel noise.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_bit_vector, check_positive_int
from .channel import (
    STRUCTURAL_ZERO,
    check_support,
    entropy,
    info_terms,
    mutual_information,
)
from .exceptions import ShapeError

_MAGIC = b"MWCB"
_HEADER = struct.Struct("<4sIIIIIQ")
LEAKAGE_ZERO = 1e-13


def table_size(bits):
    """Number of table entries carrying ``bits`` bits: ``ceil(2**bits)``.

    Integer ``bits`` give powers of two; fractional rates round up.
    """
    if bits < 0:
        raise ValueError("bit counts must be nonnegative")
    return int(math.ceil(2.0**bits - 1e-9))


@dataclass(frozen=True, eq=False)
class BinningCodebook:
    """Codeword table ``codewords[message, confusion] -> length-n input sequence``.

    The table is ``n_messages`` bins of ``n_confusion`` codewords each;
    ``message_bits`` and ``confusion_bits`` are their base-2 logarithms.
    """

    user: int
    n: int
    codewords: np.ndarray
    seed: int
    alphabet_size: int = 2

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.uint8)
        if cw.ndim != 3 or cw.shape[2] != self.n or min(cw.shape[:2]) < 1:
            raise ShapeError(f"codeword table has shape {cw.shape}, expected (M, L, {self.n})")
        if cw.max() >= self.alphabet_size:
            raise ValueError("codeword symbol outside the input alphabet")
        cw = cw.copy()
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def n_messages(self):
        return self.codewords.shape[0]

    @property
    def n_confusion(self):
        return self.codewords.shape[1]

    @property
    def message_bits(self):
        return math.log2(self.n_messages)

    @property
    def confusion_bits(self):
        return math.log2(self.n_confusion)

    @property
    def rows(self):
        """All codewords as a ``(messages * confusion, n)`` array, message-major."""
        return self.codewords.reshape(-1, self.n)

    def __eq__(self, other):
        if not isinstance(other, BinningCodebook):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def to_bytes(self):
        header = _HEADER.pack(
            _MAGIC, self.user, self.n, self.n_messages, self.n_confusion,
            self.alphabet_size, self.seed,
        )
        return header + self.codewords.tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob):
        magic, user, n, m, l, alphabet, seed = _HEADER.unpack_from(blob)
        if magic != _MAGIC:
            raise ValueError("not a serialized codebook")
        body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
        return cls(user, n, body.reshape(m, l, n), seed, alphabet)


def build_codebook(ch, q, user, n, message_bits, confusion_bits, seed):
    """Draw a random-binning codebook with i.i.d. symbols from the user's input law.

    The table has ``ceil(2**message_bits)`` bins of ``ceil(2**confusion_bits)``
    codewords, so fractional bit counts from ``n * rate`` are allowed.
    Reproducible byte-for-byte for a given ``seed``.
    """
    if user not in (1, 2):
        raise ValueError(f"user must be 1 or 2, got {user}")
    n = check_positive_int(n, "n")
    n_messages, n_confusion = table_size(message_bits), table_size(confusion_bits)
    p = q.p1 if user == 1 else q.p2
    alphabet = ch.x1_size if user == 1 else ch.x2_size
    if p.size != alphabet:
        raise ShapeError("input distribution does not match the user's alphabet")
    check_support(alphabet**n, "input sequence space")
    check_support(n_messages * n_confusion * n, "codeword table")

    terms = info_terms(ch, q)
    bound = terms.i_x1_y_given_x2 if user == 1 else terms.i_x2_y_given_x1
    if math.log2(n_messages) / n > bound + 1e-12:
        raise ValueError(
            f"message rate {math.log2(n_messages) / n:.4f} exceeds the user's rate bound {bound:.4f}"
        )
    rng = np.random.default_rng(seed)
    symbols = rng.choice(alphabet, size=(n_messages, n_confusion, n), p=p)
    return BinningCodebook(user, n, symbols, int(seed), alphabet)


def encode_wiretap(cb, message, randomness=None, rng=None):
    """Look up the codeword for ``message``; draws the confusion index if not given."""
    if not 0 <= int(message) < cb.n_messages:
        raise ValueError(f"message {message} outside [0, {cb.n_messages})")
    if randomness is None:
        if rng is None:
            raise ValueError("pass either randomness or a seeded rng")
        randomness = int(rng.integers(cb.n_confusion))
    if not 0 <= int(randomness) < cb.n_confusion:
        raise ValueError(f"randomness {randomness} outside [0, {cb.n_confusion})")
    return cb.codewords[int(message), int(randomness)].copy()


def encode_keyed(message_bits, key_bits):
    """Bitwise one-time pad."""
    m = check_bit_vector(message_bits, "message_bits")
    k = check_bit_vector(key_bits, "key_bits")
    if m.shape != k.shape:
        raise ValueError(f"message has {m.size} bits but key has {k.size}")
    return np.bitwise_xor(m, k)


def int_to_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _sequence_loglik(bob, cw1, cw2, ys):
    """Log-likelihood ``ll[t, r1, r2]`` of each codeword pair for each received row."""
    with np.errstate(divide="ignore"):
        logw = np.log(bob)
    ys = np.atleast_2d(ys)
    ll = np.zeros((ys.shape[0], cw1.shape[0], cw2.shape[0]))
    for t in range(ys.shape[1]):
        ll += logw[cw1[None, :, t, None], cw2[None, None, :, t], ys[:, t, None, None]]
    return ll


def _decode_rows(bob, cb1, cb2, ys):
    ll = _sequence_loglik(bob, cb1.rows, cb2.rows, ys)
    m1, l1, m2, l2 = cb1.n_messages, cb1.n_confusion, cb2.n_messages, cb2.n_confusion
    # reorder to (m1, m2, c1, c2) so argmax returns the lexicographically smallest tie
    ll = ll.reshape(-1, m1, l1, m2, l2).transpose(0, 1, 3, 2, 4).reshape(len(ll), -1)
    best = np.argmax(ll, axis=1)
    msg1 = best // (m2 * l1 * l2)
    msg2 = (best // (l1 * l2)) % m2
    return np.stack([msg1, msg2], axis=1)


def decode_joint(ch, cb1, cb2, y):
    """Joint ML estimate ``(message1, message2)`` of a received sequence.

    Maximises ``p(y | x1(m1, c1), x2(m2, c2))`` over all codeword pairs. Ties go
    to the smallest ``(m1, m2, c1, c2)`` in lexicographic order.
    """
    y = np.asarray(y)
    if y.ndim != 1 or y.size != cb1.n or cb1.n != cb2.n:
        raise ShapeError("received sequence length must match both codebooks")
    m1, m2 = _decode_rows(ch.bob, cb1, cb2, y[None])[0]
    return int(m1), int(m2)


class JointMLDecoder(BaseEstimator):
    """Estimator wrapper around :func:`decode_joint` for batches of received words.

    ``fit`` takes the codebook pair; ``predict`` maps an ``(m, n)`` array of
    received sequences to an ``(m, 2)`` array of message estimates.
    """

    def __init__(self, channel=None):
        self.channel = channel

    def fit(self, codebooks, y=None):
        cb1, cb2 = codebooks
        if cb1.n != cb2.n:
            raise ShapeError("codebooks have different blocklengths")
        if self.channel is None:
            raise ValueError("JointMLDecoder needs a channel")
        self.codebooks_ = (cb1, cb2)
        self.n_ = cb1.n
        return self

    def predict(self, Y):
        check_is_fitted(self, "codebooks_")
        Y = np.atleast_2d(np.asarray(Y))
        if Y.shape[1] != self.n_:
            raise ShapeError(f"expected sequences of length {self.n_}, got {Y.shape[1]}")
        return _decode_rows(self.channel.bob, *self.codebooks_, Y)

    def score(self, Y, messages):
        """Fraction of blocks where both messages are recovered."""
        pred = self.predict(Y)
        return float(np.mean(np.all(pred == np.asarray(messages), axis=1)))


def transmit(ch, x1, x2, rng):
    """Sample Bob's and Eve's outputs for the input sequences ``x1``, ``x2``."""
    flat = ch.law.reshape(ch.x1_size, ch.x2_size, -1)
    cdf = np.cumsum(flat[np.asarray(x1), np.asarray(x2)], axis=-1)
    u = rng.random(cdf.shape[:-1] + (1,))
    idx = np.minimum((u > cdf).sum(axis=-1), cdf.shape[-1] - 1)
    return idx // ch.z_size, idx % ch.z_size


def block_error_rate(ch, cb1, cb2, trials, seed, batch=2000):
    """Monte Carlo probability that the ML decoder misses either message."""
    rng = np.random.default_rng(seed)
    errors = 0
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        w1 = rng.integers(cb1.n_messages, size=size)
        w2 = rng.integers(cb2.n_messages, size=size)
        c1 = rng.integers(cb1.n_confusion, size=size)
        c2 = rng.integers(cb2.n_confusion, size=size)
        y, _ = transmit(ch, cb1.codewords[w1, c1], cb2.codewords[w2, c2], rng)
        est = _decode_rows(ch.bob, cb1, cb2, y)
        errors += int(np.sum((est[:, 0] != w1) | (est[:, 1] != w2)))
        done += size
    return errors / trials


# ---------------------------------------------------------------------------
# exact leakage


@dataclass(frozen=True)
class LeakageReport:
    quantity: str
    value_bits: float
    budget_bits: float
    satisfied: bool

    def __post_init__(self):
        if self.value_bits < 0:
            raise ValueError("leakage cannot be negative")
        if self.satisfied != (self.value_bits <= self.budget_bits):
            raise ValueError("satisfied flag disagrees with value and budget")

    def as_row(self, scenario):
        return {
            "scenario": scenario,
            "quantity": self.quantity,
            "value_bits": repr(self.value_bits),
            "budget_bits": repr(self.budget_bits),
            "satisfied": str(self.satisfied).lower(),
        }


def _report(quantity, value, budget):
    value = 0.0 if value < LEAKAGE_ZERO else float(value)
    budget = float(budget)
    return LeakageReport(quantity, value, budget, value <= budget)


def _eve_block_law(eve, rows1, rows2):
    """``p(z^n | row1, row2)`` for every codeword pair, shape ``(R1, R2, |Z|**n)``."""
    n = rows1.shape[1]
    out = np.ones((rows1.shape[0], rows2.shape[0], 1))
    for t in range(n):
        f = eve[rows1[:, t, None], rows2[None, :, t], :]
        out = (out[:, :, :, None] * f[:, :, None, :]).reshape(out.shape[0], out.shape[1], -1)
    return out


def _class_onehot(rows):
    """One-hot map from codeword index to distinct-codeword class."""
    _, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    onehot = np.zeros((rows.shape[0], inverse.max() + 1))
    onehot[np.arange(rows.shape[0]), inverse] = 1.0
    return onehot


def otp_leakage(message_bits, key_probs=None, message_probs=None):
    """Exact ``I(M; M xor K)`` for independent message and key.

    Defaults to uniform message and key. Streams one message value at a time so
    memory stays ``O(2**message_bits)``.
    """
    message_bits = check_positive_int(message_bits, "message_bits")
    size = 2**message_bits
    check_support(size * size, "one-time-pad joint")
    pk = np.full(size, 1.0 / size) if key_probs is None else np.asarray(key_probs, float)
    pm = np.full(size, 1.0 / size) if message_probs is None else np.asarray(message_probs, float)
    keys = np.arange(size)
    h_joint = 0.0
    p_out = np.zeros(size)
    for m in range(size):
        if pm[m] <= STRUCTURAL_ZERO:
            continue
        row = pm[m] * np.bincount(keys ^ m, weights=pk, minlength=size)
        h_joint += float(entropy(row))
        p_out += row
    return max(float(entropy(pm) + entropy(p_out) - h_joint), 0.0)


def _single_slot_tables(ch, cb1, cb2):
    if cb1.n != cb2.n:
        raise ShapeError("codebooks must share a blocklength")
    rows1, rows2 = cb1.rows, cb2.rows
    check_support(rows1.shape[0] * rows2.shape[0] * ch.z_size**cb1.n, "leakage enumeration")
    law = _eve_block_law(ch.eve, rows1, rows2)
    law /= rows1.shape[0] * rows2.shape[0]
    # axes: (w1, c1, w2, c2, z)
    return law.reshape(cb1.n_messages, cb1.n_confusion, cb2.n_messages, cb2.n_confusion, -1)


def individual_leakage(ch, cb1, cb2, user=1):
    """Exact ``I(W_user; Z^n | X^n_other)`` in bits."""
    joint = _single_slot_tables(ch, cb1, cb2)
    if user == 1:
        # (w1, r2, z) with r2 grouped into codeword classes of user 2
        t = joint.sum(axis=1).reshape(cb1.n_messages, -1, joint.shape[-1])
        t = np.einsum("arz,rk->akz", t, _class_onehot(cb2.rows))
    elif user == 2:
        t = joint.sum(axis=3).transpose(2, 0, 1, 3).reshape(cb2.n_messages, -1, joint.shape[-1])
        t = np.einsum("arz,rk->akz", t, _class_onehot(cb1.rows))
    else:
        raise ValueError(f"user must be 1 or 2, got {user}")
    return mutual_information(t, (0,), (2,), (1,))


def collective_leakage(ch, cb1, cb2):
    """Exact ``I(W1, W2; Z^n)`` in bits."""
    t = _single_slot_tables(ch, cb1, cb2).sum(axis=(1, 3))
    return mutual_information(t, (0, 1), (2,))


def message_leakage(ch, cb1, cb2, user=1):
    """Exact unconditioned ``I(W_user; Z^n)`` in bits."""
    t = _single_slot_tables(ch, cb1, cb2).sum(axis=(1, 3))
    return mutual_information(t, (0,) if user == 1 else (1,), (2,))


@dataclass(frozen=True)
class TwoSlotAudit:
    """Components of the two-slot leakage of user 1's slot-2 message."""

    total: float  # I(W_2; Z_1, Z_2 | X_2 of user 2)
    wiretap_part: float  # I(W_{2,1}; Z_{2,1} | X_{2,1} of user 2)
    keyed_part: float  # I(W_{2,2}; Z_1, Z_{2,2} | X_{2,2} of user 2)
    slot1: float  # I(W_1; Z_1 | X_1 of user 2)
    key_exposure: float  # I(W_1; Z_1), what Eve holds about the recycled key


def two_slot_audit(ch, wiretap, keyed):
    """Exact audit of the first two slots of the key-recycling scheme.

    Slot 1 sends ``W_1`` with the wiretap code; its second part is idle. Slot 2
    sends ``W_{2,1}`` with the same wiretap code and ``W_{2,2} xor W_1`` with a
    deterministic code of length ``n2``. Both users follow the scheme.

    ``wiretap`` and ``keyed`` are ``(codebook_user1, codebook_user2)`` pairs; the
    keyed codebooks must have no confusion bits and as many message bits as the
    wiretap codebooks, because the key is the whole previous message.
    """
    cb1, cb2 = wiretap
    kb1, kb2 = keyed
    for kb, cb in ((kb1, cb1), (kb2, cb2)):
        if kb.n_confusion != 1:
            raise ValueError("keyed codebooks must be deterministic (confusion_bits = 0)")
        if kb.n_messages != cb.n_messages:
            raise ValueError("keyed message length must equal the recycled message length")
        if cb.n_messages & (cb.n_messages - 1):
            raise ValueError("XOR keying needs a power-of-two message set")
    if kb1.n != kb2.n:
        raise ShapeError("keyed codebooks must share a blocklength")
    m1, m2 = cb1.n_messages, cb2.n_messages
    zs1 = ch.z_size**cb1.n
    zs2 = ch.z_size**kb1.n
    # largest dense table built below: (w22, w22', w1', z1, z22) before grouping
    check_support(m1 * m2 * m2 * zs1 * zs2 * m1, "two-slot leakage enumeration")

    slot = _single_slot_tables(ch, cb1, cb2)  # (w, c, w', c', z), normalised

    # slot-2 wiretap block: (w21, r2', z21) grouped by user 2's codeword class
    b = slot.sum(axis=1).reshape(m1, -1, zs1)
    b = np.einsum("arz,rk->akz", b, _class_onehot(cb2.rows))

    # slot-1 block kept jointly with the keyed block: a[w1, w1', z1]
    a = slot.sum(axis=(1, 3))
    d = _eve_block_law(ch.eve, kb1.rows, kb2.rows)  # (u, u', z22), u = w22 ^ w1
    u1 = np.bitwise_xor.outer(np.arange(m1), np.arange(m1))  # [w22, w1]
    u2 = np.bitwise_xor.outer(np.arange(m2), np.arange(m2))  # [w22', w1']
    dg = d[u1[:, :, None, None], u2[None, None, :, :]]  # (w22, w1, w22', w1', z22)
    e = np.einsum("bgz,abcgv->acgzv", a, dg) / (m1 * m2)  # (w22, w22', w1', z1, z22)
    # user 2's keyed codeword depends on w22' ^ w1'
    cls = _class_onehot(kb2.rows)[u2.ravel()]  # rows indexed by (w22', w1')
    e = np.einsum("apzv,pk->akzv", e.reshape(m1, m2 * m2, zs1, zs2), cls)

    joint = np.einsum("akz,bjwv->abkjzwv", b, e)  # (w21, w22, k1, k2, z21, z1, z22)
    total = mutual_information(joint, (0, 1), (4, 5, 6), (2, 3))
    wiretap_part = mutual_information(b, (0,), (2,), (1,))
    keyed_part = mutual_information(e, (0,), (2, 3), (1,))
    slot1 = individual_leakage(ch, cb1, cb2, user=1)
    exposure = mutual_information(a, (0,), (2,))
    return TwoSlotAudit(total, wiretap_part, keyed_part, slot1, exposure)


def leakage_chain_bound(individual1, individual2):
    """Upper bound on collective leakage from the two individual leakages."""
    if individual1 < 0 or individual2 < 0:
        raise ValueError("leakages must be nonnegative")
    return individual1 + individual2


SCENARIOS = ("otp", "individual", "collective", "message", "two_slot")


def exact_leakage(ch, codebooks, scenario, user=1, budget_bits=math.inf, keyed=None, message_bits=None):
    """Exact leakage of a named scenario as a :class:`LeakageReport`.

    ``scenario`` is one of ``SCENARIOS``. ``otp`` ignores the channel and
    needs ``message_bits``; ``two_slot`` needs the ``keyed`` codebook pair.
    """
    if scenario == "otp":
        if message_bits is None:
            raise ValueError("otp scenario needs message_bits")
        return _report("I(M; M xor K)", otp_leakage(message_bits), budget_bits)
    cb1, cb2 = codebooks
    if scenario == "individual":
        other = 2 if user == 1 else 1
        value = individual_leakage(ch, cb1, cb2, user)
        return _report(f"I(W{user}; Z^n | X{other}^n)", value, budget_bits)
    if scenario == "collective":
        return _report("I(W1, W2; Z^n)", collective_leakage(ch, cb1, cb2), budget_bits)
    if scenario == "message":
        return _report(f"I(W{user}; Z^n)", message_leakage(ch, cb1, cb2, user), budget_bits)
    if scenario == "two_slot":
        if keyed is None:
            raise ValueError("two_slot scenario needs the keyed codebooks")
        audit = two_slot_audit(ch, (cb1, cb2), keyed)
        return _report("I(W1_2; Z_1, Z_2 | X2_2)", audit.total, budget_bits)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
