"""Slow reference computations written with plain loops and dicts.

Nothing here imports the package, so the tests compare two independent codes.
"""

from itertools import product
from math import ceil, log2


def H(dist):
    return -sum(p * log2(p) for p in dist.values() if p > 0)


def marginal(joint, idx):
    out = {}
    for key, p in joint.items():
        sub = tuple(key[i] for i in idx)
        out[sub] = out.get(sub, 0.0) + p
    return out


def cmi(joint, a, b, c=()):
    a, b, c = tuple(a), tuple(b), tuple(c)
    val = H(marginal(joint, a + c)) + H(marginal(joint, b + c)) - H(marginal(joint, a + b + c))
    if c:
        val -= H(marginal(joint, c))
    return val


def joint_from_law(law, p1, p2):
    """Dict ``(x1, x2, y, z) -> prob`` from a nested-list law."""
    j = {}
    for x1, x2 in product(range(len(p1)), range(len(p2))):
        for y, row in enumerate(law[x1][x2]):
            for z, w in enumerate(row):
                if w > 0:
                    j[(x1, x2, y, z)] = p1[x1] * p2[x2] * w
    return j


def terms(law, p1, p2):
    j = joint_from_law(law, p1, p2)
    return (
        cmi(j, (0,), (2,), (1,)),
        cmi(j, (1,), (2,), (0,)),
        cmi(j, (0, 1), (2,)),
        cmi(j, (0,), (3,)),
        cmi(j, (1,), (3,)),
    )


def ramp_index(c, e):
    return ceil(c / (c - e))


def block_eve_law(eve, row1, row2):
    """Dict ``z-tuple -> p(z | row1, row2)`` for a memoryless eavesdropper."""
    out = {(): 1.0}
    for a, b in zip(row1, row2):
        nxt = {}
        for z, p in out.items():
            for sym, w in enumerate(eve[a][b]):
                if w > 0:
                    nxt[z + (sym,)] = nxt.get(z + (sym,), 0.0) + p * w
        out = nxt
    return out


def individual_leakage(eve, book1, book2):
    """I(W1; Z | X2) by full enumeration; books are nested lists [m][c] -> tuple."""
    m1, l1, m2, l2 = len(book1), len(book1[0]), len(book2), len(book2[0])
    joint = {}
    for w1, c1, w2, c2 in product(range(m1), range(l1), range(m2), range(l2)):
        x2 = tuple(book2[w2][c2])
        base = 1.0 / (m1 * l1 * m2 * l2)
        for z, p in block_eve_law(eve, book1[w1][c1], x2).items():
            key = (w1, x2, z)
            joint[key] = joint.get(key, 0.0) + base * p
    return cmi(joint, (0,), (2,), (1,))


def two_slot_total(eve, wire1, wire2, key1, key2):
    """I(W21, W22; Z1, Z21, Z22 | X21', X22') of the two-slot scheme, by enumeration.

    User 1 sends W1 in slot 1, then W21 (wiretap) and W22 xor W1 (keyed) in slot 2;
    user 2 does the same with primed variables.
    """
    m1, l1 = len(wire1), len(wire1[0])
    m2, l2 = len(wire2), len(wire2[0])
    base = 1.0 / (m1 * l1 * m2 * l2) ** 2 / (m1 * m2)
    joint = {}
    for w1, c1, v1, d1 in product(range(m1), range(l1), range(m2), range(l2)):
        z1s = block_eve_law(eve, wire1[w1][c1], wire2[v1][d1])
        for w21, c21, v21, d21 in product(range(m1), range(l1), range(m2), range(l2)):
            x21p = tuple(wire2[v21][d21])
            z21s = block_eve_law(eve, wire1[w21][c21], x21p)
            for w22, v22 in product(range(m1), range(m2)):
                x22p = tuple(key2[v22 ^ v1][0])
                z22s = block_eve_law(eve, key1[w22 ^ w1][0], x22p)
                for z1, p1 in z1s.items():
                    for z21, p21 in z21s.items():
                        for z22, p22 in z22s.items():
                            k = (w21, w22, x21p, x22p, z1, z21, z22)
                            joint[k] = joint.get(k, 0.0) + base * p1 * p21 * p22
    return cmi(joint, (0, 1), (4, 5, 6), (2, 3))
