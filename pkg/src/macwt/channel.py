"""Discrete memoryless two-user MAC with an eavesdropper, and exact information terms.

All logarithms are base 2. Probabilities below ``STRUCTURAL_ZERO`` are treated
as exact zeros, so ``0 log 0 = 0`` holds without warnings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import PROB_ATOL, check_positive_int, check_probability_vector
from .exceptions import CapacityError, ShapeError

STRUCTURAL_ZERO = 1e-15
# information terms smaller than this are round-off and reported as exact zeros
INFO_ZERO = 1e-13
SUPPORT_GUARD = 2**24


def entropy(p, axis=None):
    """Shannon entropy in bits; sums over ``axis`` (all axes by default)."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > STRUCTURAL_ZERO, p, 1.0)
    return -np.sum(np.where(p > STRUCTURAL_ZERO, p * np.log2(safe), 0.0), axis=axis)


def binary_entropy(p):
    return float(entropy([p, 1.0 - p]))


def mutual_information(joint, a_axes, b_axes, c_axes=()):
    """Exact I(A; B | C) in bits from a dense joint probability tensor.

    Axes not listed in ``a_axes``, ``b_axes`` or ``c_axes`` are marginalised.
    """
    joint = np.asarray(joint, dtype=float)
    a_axes, b_axes, c_axes = tuple(a_axes), tuple(b_axes), tuple(c_axes)
    groups = a_axes + b_axes + c_axes
    if len(set(groups)) != len(groups):
        raise ValueError("axis groups must be disjoint")
    keep = sorted(groups)
    drop = tuple(ax for ax in range(joint.ndim) if ax not in keep)
    p = joint.sum(axis=drop) if drop else joint
    pos = {ax: i for i, ax in enumerate(keep)}
    a = tuple(pos[ax] for ax in a_axes)
    b = tuple(pos[ax] for ax in b_axes)
    c = tuple(pos[ax] for ax in c_axes)

    def h(over):
        # entropy of the marginal on ``over`` axes
        rest = tuple(ax for ax in range(p.ndim) if ax not in over)
        return float(entropy(p.sum(axis=rest) if rest else p))

    value = h(a + c) + h(b + c) - h(a + b + c) - (h(c) if c else 0.0)
    return max(value, 0.0)


@dataclass(frozen=True, eq=False)
class MacWiretapChannel:
    """Transition law ``p(y, z | x1, x2)`` stored densely as ``law[x1, x2, y, z]``."""

    law: np.ndarray

    def __post_init__(self):
        law = np.array(self.law, dtype=float)
        if law.ndim != 4:
            raise ShapeError(f"law must be 4-D (x1, x2, y, z), got {law.ndim}-D")
        if min(law.shape) < 1:
            raise ShapeError("all alphabet sizes must be >= 1")
        if not np.all(np.isfinite(law)) or np.any(law < 0):
            raise ValueError("law entries must be finite and nonnegative")
        sums = law.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1.0)) > PROB_ATOL:
            raise ValueError(
                f"law is not stochastic: worst row sum deviates by {np.max(np.abs(sums - 1.0)):.3g}"
            )
        law.setflags(write=False)
        object.__setattr__(self, "law", law)

    @property
    def x1_size(self):
        return self.law.shape[0]

    @property
    def x2_size(self):
        return self.law.shape[1]

    @property
    def y_size(self):
        return self.law.shape[2]

    @property
    def z_size(self):
        return self.law.shape[3]

    @property
    def bob(self):
        """Marginal law ``p(y | x1, x2)``."""
        return self.law.sum(axis=3)

    @property
    def eve(self):
        """Marginal law ``p(z | x1, x2)``."""
        return self.law.sum(axis=2)

    def __eq__(self, other):
        if not isinstance(other, MacWiretapChannel):
            return NotImplemented
        return self.law.shape == other.law.shape and np.array_equal(self.law, other.law)

    def __repr__(self):
        return "MacWiretapChannel(x1={}, x2={}, y={}, z={})".format(*self.law.shape)

    def to_dict(self):
        return {
            "x1_size": self.x1_size,
            "x2_size": self.x2_size,
            "y_size": self.y_size,
            "z_size": self.z_size,
            "law": self.law.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            sizes = [data[k] for k in ("x1_size", "x2_size", "y_size", "z_size")]
            flat = data["law"]
        except KeyError as exc:
            raise ShapeError(f"channel definition missing field {exc.args[0]!r}") from None
        sizes = [check_positive_int(s, name) for s, name in zip(sizes, ("x1_size", "x2_size", "y_size", "z_size"))]
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size != int(np.prod(sizes)):
            raise ShapeError(
                f"law has {flat.size} entries, expected {int(np.prod(sizes))} = x1*x2*y*z"
            )
        return cls(flat.reshape(sizes))


def load_channel(path):
    """Read a channel definition JSON file."""
    with open(Path(path), encoding="utf-8") as fh:
        return MacWiretapChannel.from_dict(json.load(fh))


def save_channel(channel, path):
    Path(path).write_text(json.dumps(channel.to_dict()) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """Independent input laws of the two users."""

    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        p1 = check_probability_vector(self.p1, "p1").copy()
        p2 = check_probability_vector(self.p2, "p2").copy()
        p1.setflags(write=False)
        p2.setflags(write=False)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @classmethod
    def uniform(cls, x1_size, x2_size):
        return cls(np.full(x1_size, 1.0 / x1_size), np.full(x2_size, 1.0 / x2_size))

    def __eq__(self, other):
        if not isinstance(other, InputDistribution):
            return NotImplemented
        return np.array_equal(self.p1, other.p1) and np.array_equal(self.p2, other.p2)

    def __repr__(self):
        return f"InputDistribution(p1={self.p1.tolist()}, p2={self.p2.tolist()})"


@dataclass(frozen=True)
class InfoTerms:
    """The five single-letter quantities that define the rate pentagons (bits/use)."""

    i_x1_y_given_x2: float
    i_x2_y_given_x1: float
    i_x12_y: float
    i_x1_z: float
    i_x2_z: float

    def __post_init__(self):
        for name in ("i_x1_y_given_x2", "i_x2_y_given_x1", "i_x12_y", "i_x1_z", "i_x2_z"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _check_shapes(ch, q):
    if q.p1.size != ch.x1_size or q.p2.size != ch.x2_size:
        raise ShapeError(
            f"input distribution sizes ({q.p1.size}, {q.p2.size}) do not match "
            f"channel input alphabets ({ch.x1_size}, {ch.x2_size})"
        )


def marginals(ch, q):
    """Exact joint ``p(x1) p(x2) p(y, z | x1, x2)`` as a 4-D tensor."""
    _check_shapes(ch, q)
    return q.p1[:, None, None, None] * q.p2[None, :, None, None] * ch.law


def _terms_from_joint(joint):
    # joint axes: (x1, x2, y, z); entropies of the required marginals
    p12y = joint.sum(axis=3)
    p1z = joint.sum(axis=(1, 2))
    p2z = joint.sum(axis=(0, 2))
    h_12y = entropy(p12y)
    h_12 = entropy(p12y.sum(axis=2))
    h_y_given_12 = h_12y - h_12
    h_2y = entropy(p12y.sum(axis=0))
    h_1y = entropy(p12y.sum(axis=1))
    h_1 = entropy(p12y.sum(axis=(1, 2)))
    h_2 = entropy(p12y.sum(axis=(0, 2)))
    h_y = entropy(p12y.sum(axis=(0, 1)))
    h_z = entropy(p1z.sum(axis=0))
    vals = (
        (h_2y - h_2) - h_y_given_12,
        (h_1y - h_1) - h_y_given_12,
        h_y - h_y_given_12,
        h_1 + h_z - entropy(p1z),
        h_2 + h_z - entropy(p2z),
    )
    return InfoTerms(*(float(v) if v >= INFO_ZERO else 0.0 for v in vals))


def info_terms(ch, q):
    """Exact I(X1;Y|X2), I(X2;Y|X1), I(X1,X2;Y), I(X1;Z), I(X2;Z) in bits."""
    return _terms_from_joint(marginals(ch, q))


def info_terms_batch(ch, p1, p2):
    """Vectorised ``info_terms`` over ``G`` distribution pairs.

    ``p1`` has shape ``(G, x1_size)`` and ``p2`` shape ``(G, x2_size)``.
    Returns a ``(G, 5)`` array ordered like the ``InfoTerms`` fields.
    """
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    p2 = np.atleast_2d(np.asarray(p2, dtype=float))
    if p1.shape[1] != ch.x1_size or p2.shape[1] != ch.x2_size or len(p1) != len(p2):
        raise ShapeError("batched distributions do not match the channel")
    joint = p1[:, :, None, None, None] * p2[:, None, :, None, None] * ch.law[None]

    def h(arr, axes):
        return entropy(arr, axis=axes)

    p12y = joint.sum(axis=4)
    p1z = joint.sum(axis=(2, 3))
    p2z = joint.sum(axis=(1, 3))
    p12 = p12y.sum(axis=3)
    h_y_given_12 = h(p12y, (1, 2, 3)) - h(p12, (1, 2))
    h_1 = h(p12.sum(axis=2), 1)
    h_2 = h(p12.sum(axis=1), 1)
    h_2y = h(p12y.sum(axis=1), (1, 2))
    h_1y = h(p12y.sum(axis=2), (1, 2))
    h_y = h(p12y.sum(axis=(1, 2)), 1)
    h_z = h(p1z.sum(axis=1), 1)
    out = np.stack(
        [
            h_2y - h_2 - h_y_given_12,
            h_1y - h_1 - h_y_given_12,
            h_y - h_y_given_12,
            h_1 + h_z - h(p1z, (1, 2)),
            h_2 + h_z - h(p2z, (1, 2)),
        ],
        axis=1,
    )
    return np.where(out >= INFO_ZERO, out, 0.0)


def check_support(size, what="joint support"):
    if size > SUPPORT_GUARD:
        raise CapacityError(
            f"{what} has {size} states, above the exact-enumeration guard of 2**24; "
            "shrink the blocklength",
            support_size=size,
        )


def product_extension(ch, n):
    """The ``n``-fold memoryless extension as a channel over length-``n`` sequences.

    Sequences are indexed in row-major order, first symbol most significant.
    """
    n = check_positive_int(n, "n")
    per_letter = ch.x1_size * ch.x2_size * ch.y_size * ch.z_size
    check_support(per_letter**n, f"{n}-fold extension")
    law = ch.law
    for _ in range(n - 1):
        a1, a2, b, c = law.shape
        law = np.einsum("abyz,cdwv->acbdywzv", law, ch.law).reshape(
            a1 * ch.x1_size, a2 * ch.x2_size, b * ch.y_size, c * ch.z_size
        )
    return MacWiretapChannel(law)


def iid_extension(q, n):
    """Product input law on length-``n`` sequences (same indexing as ``product_extension``)."""
    p1, p2 = q.p1, q.p2
    for _ in range(n - 1):
        p1 = np.outer(p1, q.p1).ravel()
        p2 = np.outer(p2, q.p2).ravel()
    return InputDistribution(p1 / p1.sum(), p2 / p2.sum())


def bsc(flip):
    return np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])


def noisy_xor_channel(bob_flip, eve_flip, eve="xor"):
    """Binary MAC with ``Y = X1 ^ X2 ^ N`` and a noisy eavesdropper.

    ``eve="xor"`` gives ``Z = X1 ^ X2 ^ N'``; ``eve="x1"`` gives ``Z = X1 ^ N'``.
    Bob's and Eve's noises are independent.
    """
    if eve not in ("xor", "x1"):
        raise ValueError(f"eve must be 'xor' or 'x1', got {eve!r}")
    law = np.zeros((2, 2, 2, 2))
    for x1 in range(2):
        for x2 in range(2):
            sy = x1 ^ x2
            sz = sy if eve == "xor" else x1
            law[x1, x2] = np.outer(bsc(bob_flip)[sy], bsc(eve_flip)[sz])
    return MacWiretapChannel(law)


def random_channel(rng, x1_size=2, x2_size=2, y_size=4, z_size=4):
    """Channel with every row drawn from a flat Dirichlet."""
    rows = rng.dirichlet(np.ones(y_size * z_size), size=x1_size * x2_size)
    return MacWiretapChannel(rows.reshape(x1_size, x2_size, y_size, z_size))
