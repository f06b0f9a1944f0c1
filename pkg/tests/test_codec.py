import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from macwt.channel import InputDistribution, MacWiretapChannel, noisy_xor_channel
from macwt.codec import (
    BinningCodebook,
    JointMLDecoder,
    block_error_rate,
    build_codebook,
    collective_leakage,
    decode_joint,
    encode_keyed,
    encode_wiretap,
    exact_leakage,
    individual_leakage,
    int_to_bits,
    bits_to_int,
    leakage_chain_bound,
    otp_leakage,
    table_size,
    two_slot_audit,
)
from macwt.exceptions import CapacityError, ShapeError

from _oracle import H, cmi, individual_leakage as oracle_individual, two_slot_total

UNIFORM = InputDistribution.uniform(2, 2)
CH = noisy_xor_channel(0.05, 0.25)


def books(ch, n, mb, cb, seed, q=UNIFORM):
    return (
        build_codebook(ch, q, 1, n, mb, cb, seed),
        build_codebook(ch, q, 2, n, mb, cb, seed + 1000),
    )


def nested(cb):
    return [[tuple(int(s) for s in cb.codewords[m, c]) for c in range(cb.n_confusion)] for m in range(cb.n_messages)]


def test_table_size():
    assert [table_size(b) for b in (0, 1, 2, 1.5, 0.75)] == [1, 2, 4, 3, 2]


def test_codebook_shape_and_determinism():
    a = build_codebook(CH, UNIFORM, 1, 6, 1, 2, seed=9)
    assert a.codewords.shape == (2, 4, 6)
    assert a.rows.shape == (8, 6)
    assert (a.message_bits, a.confusion_bits) == (1.0, 2.0)
    assert a == build_codebook(CH, UNIFORM, 1, 6, 1, 2, seed=9)
    assert a != build_codebook(CH, UNIFORM, 1, 6, 1, 2, seed=10)


def test_codebook_symbol_frequencies():
    q = InputDistribution([0.3, 0.7], [0.5, 0.5])
    ch = noisy_xor_channel(0.05, 0.25)
    ones = 0
    trials = 200
    for seed in range(trials):
        ones += build_codebook(ch, q, 1, 6, 1, 2, seed).codewords.sum()
    count = trials * 48
    sigma = math.sqrt(count * 0.7 * 0.3)
    assert abs(ones - 0.7 * count) <= 3 * sigma


def test_codebook_bytes_round_trip():
    cb = build_codebook(CH, UNIFORM, 2, 5, 2, 1.5, seed=4)
    blob = cb.to_bytes()
    assert blob[:4] == b"MWCB"
    assert len(blob) == 4 + 5 * 4 + 8 + 4 * 3 * 5
    back = BinningCodebook.from_bytes(blob)
    assert back == cb and back.seed == 4 and back.user == 2
    with pytest.raises(ValueError):
        BinningCodebook.from_bytes(b"XXXX" + blob[4:])


def test_codebook_rate_sanity_and_guard():
    with pytest.raises(ValueError, match="rate bound"):
        build_codebook(CH, UNIFORM, 1, 4, 4, 0, seed=0)
    with pytest.raises(CapacityError):
        build_codebook(CH, UNIFORM, 1, 25, 1, 1, seed=0)
    with pytest.raises(ValueError):
        build_codebook(CH, UNIFORM, 3, 4, 1, 1, seed=0)


def test_wiretap_lookup():
    cw = np.array([[[0, 0, 1], [0, 1, 0]], [[1, 0, 0], [1, 1, 1]]], dtype=np.uint8)
    cb = BinningCodebook(1, 3, cw, seed=0)
    np.testing.assert_array_equal(encode_wiretap(cb, 0, 1), [0, 1, 0])
    np.testing.assert_array_equal(encode_wiretap(cb, 1, 0), [1, 0, 0])
    np.testing.assert_array_equal(encode_wiretap(cb, 1, 1), [1, 1, 1])
    assert encode_wiretap(cb, 1, rng=np.random.default_rng(0))[0] == 1
    with pytest.raises(ValueError):
        encode_wiretap(cb, 2, 0)
    with pytest.raises(ValueError):
        encode_wiretap(cb, 0)


def test_keyed_encoding():
    m = np.array([1, 0, 1, 1])
    np.testing.assert_array_equal(encode_keyed(m, np.zeros(4, int)), m)
    np.testing.assert_array_equal(encode_keyed(m, m), np.zeros(4))
    with pytest.raises(ValueError):
        encode_keyed(m, [1, 0])
    assert bits_to_int(int_to_bits(11, 4)) == 11


def test_otp_four_bit_enumeration():
    # 16 x 16 joint table of message and padded output, built by hand
    joint = {}
    for msg in range(16):
        for key in range(16):
            out = bits_to_int(encode_keyed(int_to_bits(msg, 4), int_to_bits(key, 4)))
            joint[(msg, out)] = joint.get((msg, out), 0.0) + 1 / 256
    assert cmi(joint, (0,), (1,)) == pytest.approx(0.0, abs=1e-12)
    assert otp_leakage(4) == pytest.approx(0.0, abs=1e-12)


def test_otp_biased_key_leaks():
    key = np.array([0.7, 0.1, 0.1, 0.1])
    assert otp_leakage(2, key_probs=key) > 0.01


def test_decoder_noiseless_recovers_everything():
    law = np.zeros((2, 2, 4, 1))
    for x1 in range(2):
        for x2 in range(2):
            law[x1, x2, 2 * x1 + x2, 0] = 1.0
    ch = MacWiretapChannel(law)
    cb1 = BinningCodebook(1, 2, np.array([[[0, 0]], [[0, 1]], [[1, 0]], [[1, 1]]]), 0)
    cb2 = BinningCodebook(2, 2, np.array([[[1, 1]], [[0, 1]]]), 0)
    for m1 in range(4):
        for m2 in range(2):
            y = 2 * cb1.codewords[m1, 0] + cb2.codewords[m2, 0]
            assert decode_joint(ch, cb1, cb2, y) == (m1, m2)


def test_decoder_tie_breaks_lexicographically():
    # both messages of user 1 share one codeword, so every observation is a tie
    cb1 = BinningCodebook(1, 3, np.array([[[0, 1, 0]], [[0, 1, 0]]]), 0)
    cb2 = BinningCodebook(2, 3, np.array([[[1, 1, 0], [1, 1, 0]], [[1, 1, 0], [0, 0, 0]]]), 0)
    for y in ([0, 0, 0], [1, 0, 0], [1, 1, 1]):
        m1, m2 = decode_joint(CH, cb1, cb2, np.array(y))
        assert m1 == 0
    assert decode_joint(CH, cb1, cb2, np.array([1, 0, 0])) == (0, 0)


def test_decoder_rates_inside_beat_outside():
    inside = books(CH, 8, 1, 0, seed=1)  # 0.125 bits/use each
    outside = books(CH, 8, 4, 0, seed=1)  # 0.5 each, sum above 1 - h(0.05)
    ber_in = block_error_rate(CH, *inside, trials=10_000, seed=7)
    ber_out = block_error_rate(CH, *outside, trials=10_000, seed=7)
    assert ber_in < ber_out


def test_decoder_estimator():
    cb = books(CH, 6, 1, 1, seed=2)
    est = JointMLDecoder(channel=CH)
    assert clone(est).get_params()["channel"] == CH
    est.fit(cb)
    x1 = cb[0].codewords[1, 0]
    x2 = cb[1].codewords[0, 1]
    y = np.bitwise_xor(x1, x2)[None]
    np.testing.assert_array_equal(est.predict(y), [[1, 0]])
    assert est.score(y, [[1, 0]]) == 1.0
    with pytest.raises(ShapeError):
        est.predict(np.zeros((1, 5), int))


def test_unprotected_message_leaks_fully():
    # Eve sees X1 noiselessly and the code has a single codeword per message
    ch = noisy_xor_channel(0.1, 0.0, eve="x1")
    cb1 = BinningCodebook(1, 3, np.array([[[0, 0, 0]], [[0, 1, 1]], [[1, 0, 1]], [[1, 1, 0]]]), 0)
    cb2 = BinningCodebook(2, 3, np.array([[[0, 1, 0]], [[1, 1, 1]]]), 0)
    assert individual_leakage(ch, cb1, cb2, 1) == pytest.approx(2.0, abs=1e-12)


def test_otp_scenario_report():
    rep = exact_leakage(None, None, "otp", budget_bits=0.0, message_bits=6)
    assert rep.value_bits == 0.0 and rep.satisfied
    assert rep.as_row("otp")["satisfied"] == "true"


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["xor", "x1"]))
def test_individual_leakage_matches_enumeration(seed, eve):
    ch = noisy_xor_channel(0.05, 0.25, eve=eve)
    cb1, cb2 = books(ch, 3, 1, 1, seed)
    for user, (a, b) in ((1, (cb1, cb2)), (2, (cb2, cb1))):
        got = individual_leakage(ch, cb1, cb2, user)
        eve_law = ch.eve.tolist() if user == 1 else ch.eve.transpose(1, 0, 2).tolist()
        assert got == pytest.approx(oracle_individual(eve_law, nested(a), nested(b)), abs=1e-10)


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["xor", "x1"]))
def test_collective_below_chain_bound(seed, eve):
    ch = noisy_xor_channel(0.05, 0.25, eve=eve)
    cb1, cb2 = books(ch, 4, 1, 1, seed)
    bound = leakage_chain_bound(individual_leakage(ch, cb1, cb2, 1), individual_leakage(ch, cb1, cb2, 2))
    assert collective_leakage(ch, cb1, cb2) <= bound + 1e-12


def test_chain_bound_arithmetic():
    assert leakage_chain_bound(0.0, 0.0) == 0.0
    assert leakage_chain_bound(0.1, 0.2) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        leakage_chain_bound(-0.1, 0.0)


def test_leakage_guard():
    cb1, cb2 = books(CH, 14, 1, 5, seed=0)  # 64 * 64 * 2**14 states
    with pytest.raises(CapacityError):
        individual_leakage(CH, cb1, cb2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_slot_total_matches_enumeration(seed):
    ch = noisy_xor_channel(0.05, 0.25)
    wire = books(ch, 2, 1, 1, seed)
    keyed = books(ch, 2, 1, 0, seed + 50)
    audit = two_slot_audit(ch, wire, keyed)
    eve = ch.eve.tolist()
    expect = two_slot_total(eve, *(nested(c) for c in wire), *(nested(c) for c in keyed))
    assert audit.total == pytest.approx(expect, abs=1e-10)
    assert audit.total == pytest.approx(audit.wiretap_part + audit.keyed_part, abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_two_slot_total_within_corrected_bound(seed):
    # Eve's slot-1 output also carries the recycled key, so the key exposure enters the bound
    wire = books(CH, 4, 1, 1, seed)
    keyed = books(CH, 4, 1, 0, seed + 1000)
    audit = two_slot_audit(CH, wire, keyed)
    assert audit.key_exposure <= audit.slot1 + 1e-12
    assert audit.total <= audit.slot1 + audit.key_exposure + 1e-9
    assert audit.total <= 2 * audit.slot1 + 1e-9


def test_two_slot_rejects_bad_keyed_books():
    wire = books(CH, 4, 1, 1, 0)
    with pytest.raises(ValueError):
        two_slot_audit(CH, wire, books(CH, 4, 1, 1, 3))
    with pytest.raises(ValueError):
        two_slot_audit(CH, wire, books(CH, 4, 2, 0, 3))


def test_message_entropy_helper_sanity():
    assert H({0: 0.5, 1: 0.5}) == 1.0
