"""Hsiao SECDED, voters and the relOBI grouping plan."""

import itertools
import json
import random

import pytest
from hypothesis import given, strategies as st

from relobi.codec import (
    DEFAULT_GROUPS, HANDSHAKES, GroupingPlan, HsiaoCode, Status, TriSignal, build_hsiao,
    check_bits_for, default_plan, ecc_decode, ecc_encode, obi_plan, plan_width, rel_phase_width,
    relobi_decode, relobi_encode, vote, vote3,
)
from relobi.conformance import check_secded, corrupt_code
from relobi.obi import ATransfer, BusConfig, RTransfer, total_width, zero_optional_config


def oracle_columns(k):
    """Independent reference: odd-weight (>=3) r-bit columns by (weight, value), then units."""
    r = 1
    while 2 ** (r - 1) < k + r:
        r += 1
    cands = [v for v in range(1, 2 ** r) if bin(v).count("1") % 2 == 1 and bin(v).count("1") >= 3]
    cands.sort(key=lambda v: (bin(v).count("1"), v))
    return r, cands[:k] + [2 ** i for i in range(r)]


def oracle_checks(k, data):
    r, cols = oracle_columns(k)
    c = 0
    for j in range(k):
        if data >> j & 1:
            c ^= cols[j]
    return c


@pytest.mark.parametrize("k,r", [(1, 3), (4, 4), (8, 5), (11, 5), (25, 6), (26, 6), (27, 7),
                                 (29, 7), (32, 7), (36, 7), (57, 7), (58, 8), (64, 8)])
def test_check_bits(k, r):
    assert check_bits_for(k) == r
    assert 2 ** (r - 1) >= k + r and 2 ** (r - 2) < k + r - 1


def test_k8_columns_literal():
    code = build_hsiao(8)
    assert code.r == 5
    assert code.columns[:8] == (0b00111, 0b01011, 0b01101, 0b01110, 0b10011, 0b10101, 0b10110, 0b11001)
    assert code.columns[8:] == (1, 2, 4, 8, 16)


@pytest.mark.parametrize("k", [1, 8, 25, 29, 32, 36])
def test_columns_match_oracle(k):
    code = build_hsiao(k)
    r, cols = oracle_columns(k)
    assert code.r == r and list(code.columns) == cols
    code.validate()


def test_deadbeef_check_bits_fold_columns():
    code = build_hsiao(32)
    want = oracle_checks(32, 0xDEADBEEF)
    assert code.checks(0xDEADBEEF) == want
    assert ecc_encode(code, 0xDEADBEEF) == 0xDEADBEEF | want << 32
    assert ecc_decode(code, ecc_encode(code, 0xDEADBEEF)) == (0xDEADBEEF, Status.OK, None)


def test_r7_data_columns_are_minimum_weight():
    # C(7,3) = 35 >= 32: every data column of the 32-bit code has weight 3
    assert all(bin(c).count("1") == 3 for c in build_hsiao(32).columns[:32])


@pytest.mark.parametrize("k", [8, 25, 29])
def test_exhaustive_single_and_double_errors(k):
    code = build_hsiao(k)
    rng = random.Random(k)
    for _ in range(5):
        data = rng.getrandbits(k)
        word = ecc_encode(code, data)
        for i in range(code.n):
            d = ecc_decode(code, word ^ 1 << i)
            assert d.status == Status.CORRECTED and d.data == data and d.position == i
        for i, j in itertools.combinations(range(code.n), 2):
            assert ecc_decode(code, word ^ 1 << i ^ 1 << j).status == Status.UNCORRECTABLE


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 38))
def test_single_error_property(data, pos):
    code = build_hsiao(32)
    d = ecc_decode(code, ecc_encode(code, data) ^ 1 << pos)
    assert d.data == data and d.status == Status.CORRECTED


@given(st.integers(0, 2 ** 36 - 1), st.integers(0, 42), st.integers(0, 42))
def test_double_error_property(data, i, j):
    code = build_hsiao(36)
    e = ecc_encode(code, data) ^ 1 << i ^ 1 << j
    want = Status.OK if i == j else Status.UNCORRECTABLE
    assert ecc_decode(code, e).status == want


def test_encode_rejects_oversized_data():
    with pytest.raises(ValueError):
        ecc_encode(build_hsiao(8), 256)
    with pytest.raises(ValueError):
        build_hsiao(0)


def test_validate_rejects_bad_columns():
    code = build_hsiao(8)
    with pytest.raises(ValueError, match="distinct"):
        corrupt_code(code, 0, 1).validate()
    bad = HsiaoCode(8, 5, (0b00011,) + code.columns[1:])
    with pytest.raises(ValueError, match="odd-weight"):
        bad.validate()


def test_corrupted_matrix_reports_bit_pair():
    res = check_secded(corrupt_code(build_hsiao(8), 2, 5))
    assert not res.passed
    assert "(2, 5)" in res.detail


def test_secded_check_passes_on_real_codes():
    for k in (8, 29, 32):
        assert check_secded(build_hsiao(k), single_words=10, double_words=2).passed


# --- voters --------------------------------------------------------------------

def test_vote3_truth_table():
    table = {(a, b, c): int(a + b + c >= 2) for a, b, c in itertools.product((0, 1), repeat=3)}
    assert {k: vote3(*k) for k in table} == table


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 2 ** 64 - 1), st.integers(0, 2))
def test_vote3_masks_one_lane(v, noise, lane):
    vals = [v, v, v]
    vals[lane] ^= noise
    assert vote3(*vals) == v
    assert vote(vals) == v


def test_vote_single_and_bad_arity():
    assert vote([5]) == 5
    assert TriSignal.of(1).vote() == 1
    assert TriSignal(1, 0, 0).vote() == 0
    with pytest.raises(ValueError):
        vote([1, 1])


# --- grouping plan -------------------------------------------------------------

def test_default_plan_width_is_177():
    plan = default_plan()
    assert plan_width(plan) == 177
    assert total_width(plan.cfg) == 137
    # 4 handshakes x 2 extra copies + check bits 7+7+6+7+5
    assert [(g.name, g.k, g.r) for g in plan.groups] == [
        ("addr", 32, 7), ("wdata", 36, 7), ("actrl", 25, 6), ("rdata", 32, 7), ("rctrl", 8, 5)]
    assert round(100 * (177 - 137) / 137) == 29


def test_obi_plan_adds_nothing():
    plan = obi_plan()
    assert plan_width(plan) == 137 and plan.lanes == 1 and not plan.protected
    assert all(g.code is None and g.r == 0 for g in plan.groups)


def test_zero_optional_plan_width():
    plan = default_plan(zero_optional_config())
    # 104 + 3 handshakes x 2 + addr 7 + wdata/be 7 + we 3 + rdata 7
    assert plan_width(plan) == 104 + 6 + 24 == 134
    assert "rctrl" not in [g.name for g in plan.groups]


def test_phase_widths_sum_to_plan_width():
    plan = default_plan()
    assert rel_phase_width(plan, "A") + rel_phase_width(plan, "R") == 177


def test_plan_partitions_bus():
    plan = default_plan()
    members = [m for g in plan.groups for m in g.members] + list(plan.tmr_signals)
    assert sorted(members) == sorted(s.name for s in plan.cfg.signals())


def test_plan_rejects_overlap_and_gaps():
    cfg = BusConfig()
    with pytest.raises(ValueError, match="both"):
        GroupingPlan.build(cfg, HANDSHAKES, DEFAULT_GROUPS + (("dup", ("addr",)),))
    with pytest.raises(ValueError, match="partition"):
        GroupingPlan.build(cfg, HANDSHAKES, DEFAULT_GROUPS[:-1])
    with pytest.raises(ValueError, match="mixes"):
        GroupingPlan.build(cfg, HANDSHAKES, (("x", ("addr", "rdata")),) + DEFAULT_GROUPS[1:3]
                           + (("rctrl", ("rid", "err", "exokay", "ruser")),))
    with pytest.raises(ValueError, match="handshake rready"):
        GroupingPlan.build(cfg, ("req", "gnt", "rvalid"), DEFAULT_GROUPS + (("hs", ("rready",)),))


def test_plan_json_round_trip():
    plan = default_plan()
    again = GroupingPlan.from_json(plan.cfg, plan.to_json())
    assert again.to_dict() == plan.to_dict()
    assert plan_width(again) == 177
    d = json.loads(plan.to_json())
    d["groups"][0]["r"] = 6
    with pytest.raises(ValueError):
        GroupingPlan.from_dict(plan.cfg, d)


def test_alternative_grouping_changes_width():
    cfg = BusConfig()
    groups = (("a", ("addr", "we", "be", "wdata", "aid", "atop", "memtype", "prot", "dbg", "auser", "wuser")),
              ("r", ("rdata", "rid", "err", "exokay", "ruser")))
    plan = GroupingPlan.build(cfg, HANDSHAKES, groups)
    # k=89 -> r=8, k=40 -> r=7
    assert [g.r for g in plan.groups] == [8, 7]
    assert plan_width(plan) == 137 + 8 + 15


def test_phase_round_trip_and_single_fault_masking():
    plan = default_plan()
    a = ATransfer(addr=0x2000_0010, we=1, be=0xF, wdata=0xCAFE, aid=5, atop=3, auser=9)
    rel = relobi_encode(plan, a, {"req": 1})
    phase, hs, st_ = relobi_decode(plan, rel)
    assert phase == a and hs == {"req": 1, "gnt": 0}
    assert all(d.status == Status.OK for d in st_.values())
    # flip one bit of one group and one handshake replica
    words = dict(rel.words)
    words["wdata"] ^= 1 << 3
    hsx = dict(rel.handshakes)
    hsx["req"] = (0, 1, 1)
    phase, hs, st_ = relobi_decode(plan, type(rel)(rel.channel, hsx, words))
    assert phase == a and hs["req"] == 1
    assert st_["wdata"].status == Status.CORRECTED


def test_r_phase_round_trip():
    plan = default_plan()
    r = RTransfer(rdata=0x1234_5678, rid=7, err=1, exokay=1, ruser=2)
    phase, hs, _ = relobi_decode(plan, relobi_encode(plan, r, {"rvalid": 1, "rready": 1}))
    assert phase == r and hs == {"rvalid": 1, "rready": 1}
