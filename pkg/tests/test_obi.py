"""Bus configuration, transfers, scripts, protocol agents and scoreboards."""

import pytest
from hypothesis import given, strategies as st

from relobi.agents import ManagerModel, SubordinateModel, default_response, manager_step, splitmix64, subordinate_step
from relobi.obi import (
    ATransfer, BusConfig, EventKind, ManagerScript, RTransfer, ScriptEntry, Side, TraceEvent,
    check_transfer, generate_script, per_port_sequences, scoreboard_verify,
    scoreboard_verify_ordered, total_width, zero_optional_config,
)


# --- widths -------------------------------------------------------------------

def test_default_width_is_137():
    # A: req 1 + addr 32 + we 1 + be 4 + wdata 32 + aid 4 + atop 6 + memtype 2 + prot 3
    #    + dbg 1 + auser 6 + wuser 2 + gnt 1 = 95
    # R: rvalid 1 + rready 1 + rdata 32 + rid 4 + err 1 + exokay 1 + ruser 2 = 42
    assert total_width(BusConfig()) == 95 + 42 == 137


def test_zero_optional_width_is_104():
    # req addr we be wdata gnt = 1+32+1+4+32+1, rvalid rdata = 1+32
    assert total_width(zero_optional_config()) == 71 + 33 == 104


@pytest.mark.parametrize("field,delta", [("auser_width", 5), ("id_width", 3), ("atop_width", 1)])
def test_width_closure(field, delta):
    base = BusConfig()
    bigger = BusConfig.from_dict({**base.to_dict(), field: getattr(base, field) + delta})
    per_signal = 2 if field == "id_width" else 1  # aid and rid
    assert total_width(bigger) - total_width(base) == delta * per_signal


@given(st.integers(0, 16), st.integers(0, 16), st.integers(0, 8))
def test_width_is_sum_of_signals(auser, ruser, idw):
    cfg = BusConfig(auser_width=auser, ruser_width=ruser, id_width=idw)
    assert total_width(cfg) == sum(s.width for s in cfg.signals())
    assert all(s.width > 0 for s in cfg.signals())


@pytest.mark.parametrize("bad", [
    {"data_width": 32, "be_width": 2},
    {"addr_width": 0},
    {"auser_width": -1},
])
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        BusConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        BusConfig.from_dict({"aid_width": 4})


def test_config_dict_round_trip():
    cfg = BusConfig(auser_width=3, has_exokay=False)
    assert BusConfig.from_dict(cfg.to_dict()) == cfg


def test_check_transfer_rejects_oversized_field():
    cfg = BusConfig()
    check_transfer(cfg, ATransfer(addr=0xFFFF_FFFF, aid=15))
    with pytest.raises(ValueError):
        check_transfer(cfg, ATransfer(aid=16))
    with pytest.raises(ValueError):
        check_transfer(cfg, RTransfer(rdata=1 << 32))


# --- scripts -------------------------------------------------------------------

def test_script_deterministic_in_seed():
    cfg = BusConfig()
    a = generate_script(cfg, 7, 50)
    b = generate_script(cfg, 7, 50)
    c = generate_script(cfg, 8, 50)
    assert a == b
    assert a != c
    assert len(a) == 50


def test_script_respects_regions_and_widths():
    cfg = BusConfig()
    regions = [(0x1000_0000, 0x1000), (0x4000_0000, 0x100)]
    s = generate_script(cfg, 1, 300, regions)
    for e in s:
        assert 0 <= e.gap <= 3
        check_transfer(cfg, e.transfer)
        assert any(b <= e.transfer.addr < b + n for b, n in regions)


def test_script_unmapped_fraction():
    cfg = BusConfig()
    regions = [(0, 0x1000)]
    s = generate_script(cfg, 2, 400, regions, unmapped_fraction=0.5)
    outside = sum(1 for e in s if e.transfer.addr >= 0x1000)
    assert 120 < outside < 280


def test_script_zero_width_fields_stay_zero():
    cfg = zero_optional_config()
    for e in generate_script(cfg, 3, 40):
        t = e.transfer
        assert t.aid == t.atop == t.auser == t.wuser == t.prot == 0


# --- agents --------------------------------------------------------------------

def _script(*transfers, gap=0):
    return ManagerScript(tuple(ScriptEntry(gap, t) for t in transfers))


def test_manager_holds_request_until_grant():
    a = ATransfer(addr=0x40, aid=3)
    m = ManagerModel(_script(a))
    req, out, _, ev = manager_step(m, 0, 0, 0, None)
    assert (req, out, ev) == (1, a, [])
    req, out, _, ev = manager_step(m, 1, 0, 0, None)
    assert (req, out, ev) == (1, a, [])
    req, out, _, ev = manager_step(m, 2, 1, 0, None)
    assert req == 1 and out == a
    assert ev == [TraceEvent(2, Side.MANAGER, 0, EventKind.A_ACCEPTED, a)]
    assert m.outstanding == 1


def test_manager_gap_delays_request():
    m = ManagerModel(_script(ATransfer(addr=1), gap=2))
    assert [manager_step(m, c, 1, 0, None)[0] for c in range(3)] == [0, 0, 1]


def test_manager_rready_follows_outstanding():
    m = ManagerModel(_script(ATransfer(addr=1)))
    assert m.outputs()[2] == 0
    m.step(0, 1, 0, None)
    assert m.outputs()[2] == 1
    r = RTransfer(rdata=5)
    ev = m.step(1, 0, 1, r)
    assert ev == [TraceEvent(1, Side.MANAGER, 0, EventKind.R_ACCEPTED, r)]
    assert m.done


def test_manager_records_unexpected_response():
    m = ManagerModel(_script())
    ev = m.step(4, 0, 1, RTransfer())
    assert [e.kind for e in ev] == [EventKind.VIOLATION]


def test_manager_state_round_trip():
    m = ManagerModel(_script(ATransfer(addr=1), ATransfer(addr=2)))
    m.step(0, 1, 0, None)
    st = m.get_state()
    m.step(1, 0, 1, RTransfer())
    m.set_state(st)
    assert m.get_state() == st == (1, 0, 1)


def test_subordinate_echoes_id_one_cycle_later():
    s = SubordinateModel(port=2)
    a = ATransfer(addr=0x1234, aid=9)
    gnt, rvalid, _, ev = subordinate_step(s, 10, 1, a)
    assert gnt == 1 and rvalid == 0
    assert ev == [TraceEvent(10, Side.SUBORDINATE, 2, EventKind.A_ACCEPTED, a)]
    gnt, rvalid, r, ev = subordinate_step(s, 11, 0, None)
    assert rvalid == 1 and r.rid == 9 and r.err == 0 and r.exokay == 0
    assert r.rdata == splitmix64(0x1234) & 0xFFFF_FFFF
    assert ev == [TraceEvent(11, Side.SUBORDINATE, 2, EventKind.R_ACCEPTED, r)]


def test_subordinate_grant_latency():
    s = SubordinateModel(gnt_latency=2)
    assert [subordinate_step(s, c, 1, ATransfer())[0] for c in range(4)] == [0, 0, 1, 0]


def test_subordinate_waits_for_rready():
    s = SubordinateModel()
    subordinate_step(s, 0, 1, ATransfer(aid=1))
    _, rvalid, _, ev = subordinate_step(s, 1, 0, None, rready_in=0)
    assert rvalid == 1 and ev == []
    _, rvalid, _, ev = subordinate_step(s, 2, 0, None, rready_in=1)
    assert rvalid == 1 and ev[0].kind == EventKind.R_ACCEPTED


def test_subordinate_rejects_zero_response_latency():
    with pytest.raises(ValueError):
        SubordinateModel(resp_latency=0)


def test_splitmix64_reference_values():
    # reference outputs of the published SplitMix64 finalizer for state 0 and 1
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_default_response_is_pure():
    a = ATransfer(addr=77, aid=2, we=1, wdata=5)
    assert default_response(a, 32) == default_response(a, 32)
    assert default_response(a, 8).rdata < 256


# --- scoreboards ---------------------------------------------------------------

def _trace():
    return [
        TraceEvent(3, Side.MANAGER, 0, EventKind.A_ACCEPTED, ATransfer(addr=4)),
        TraceEvent(5, Side.SUBORDINATE, 1, EventKind.A_ACCEPTED, ATransfer(addr=4)),
        TraceEvent(6, Side.SUBORDINATE, 1, EventKind.R_ACCEPTED, RTransfer(rdata=9)),
        TraceEvent(8, Side.MANAGER, 0, EventKind.R_ACCEPTED, RTransfer(rdata=9)),
    ]


def test_scoreboard_reflexive():
    t = _trace()
    assert scoreboard_verify(t, list(t))


def test_scoreboard_payload_flip():
    t = _trace()
    bad = list(t)
    bad[3] = bad[3]._replace(payload=RTransfer(rdata=9 ^ 1))
    v = scoreboard_verify(t, bad)
    assert not v and v.first_divergence == 3 and v.golden_event == t[3]


def test_scoreboard_cycle_shift():
    t = _trace()
    shifted = [e._replace(cycle=e.cycle + 1) for e in t]
    v = scoreboard_verify(t, shifted)
    assert not v and v.first_divergence == 0


def test_scoreboard_length_mismatch():
    t = _trace()
    v = scoreboard_verify(t, t[:-1])
    assert not v and v.first_divergence == 3 and v.observed_event is None


def test_ordered_scoreboard_ignores_cycles_but_not_order():
    t = _trace()
    shifted = [e._replace(cycle=e.cycle + 2) for e in t]
    assert scoreboard_verify_ordered(t, shifted)
    extra = t + [TraceEvent(9, Side.MANAGER, 0, EventKind.VIOLATION, None)]
    assert not scoreboard_verify_ordered(t, extra)
    swapped = list(t)
    swapped[3] = swapped[3]._replace(payload=RTransfer(rdata=1))
    assert not scoreboard_verify_ordered(t, swapped)


def test_ordered_scoreboard_allows_a_r_interleaving_change():
    a1, a2 = ATransfer(addr=1), ATransfer(addr=2)
    r1 = RTransfer(rdata=1)
    g = [TraceEvent(1, Side.MANAGER, 0, EventKind.A_ACCEPTED, a1),
         TraceEvent(3, Side.MANAGER, 0, EventKind.A_ACCEPTED, a2),
         TraceEvent(4, Side.MANAGER, 0, EventKind.R_ACCEPTED, r1)]
    o = [g[0], g[2]._replace(cycle=2), g[1]]
    assert scoreboard_verify_ordered(g, o)
    assert set(per_port_sequences(g)) == {(Side.MANAGER, 0, EventKind.A_ACCEPTED),
                                          (Side.MANAGER, 0, EventKind.R_ACCEPTED)}
