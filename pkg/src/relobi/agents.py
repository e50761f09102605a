"""Randomized OBI managers and simply-responding subordinates.

``ManagerModel``/``SubordinateModel`` are plain protocol state machines
working on decoded OBI values.  ``ManagerPort``/``SubordinatePort`` wrap
them with the (rel)OBI encoder/decoder and hook them into an engine;
they sit outside the crossbar and are never fault targets.
"""

from __future__ import annotations

from typing import NamedTuple

from .bundles import AChan, RChan
from .codec import GroupingPlan, Status, vote
from .engine import Engine
from .obi import (
    A_FIELDS, R_FIELDS, ATransfer, EventKind, ManagerScript, RTransfer, Side, TraceEvent,
)

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def default_response(a: ATransfer, data_width: int) -> RTransfer:
    return RTransfer(rdata=splitmix64(a.addr) & ((1 << data_width) - 1), rid=a.aid)


class EccEvent(NamedTuple):
    cycle: int
    where: str
    group: str
    status: Status


class Abort(NamedTuple):
    cycle: int
    manager: int
    addr: int  # corrected address of the held-back transfer


class Recorder:
    """Collects interface trace events, ECC status events and aborts of one run."""

    def __init__(self):
        self.trace: list[TraceEvent] = []
        self.ecc: list[EccEvent] = []
        self.aborts: list[Abort] = []
        self.last_event = 0

    def event(self, ev: TraceEvent) -> None:
        self.trace.append(ev)
        self.last_event = ev.cycle


class ManagerModel:
    """Issues a script in order; at most one request pending on the A channel."""

    def __init__(self, script: ManagerScript, port: int = 0, has_rready: bool = True):
        self.script = script
        self.port = port
        self.has_rready = has_rready
        self.idx = 0
        self.wait = script[0].gap if len(script) else 0
        self.outstanding = 0

    def outputs(self) -> tuple[int, ATransfer, int]:
        req = int(self.idx < len(self.script) and self.wait == 0)
        a = self.script[self.idx].transfer if req else ATransfer()
        rready = int(self.outstanding > 0) if self.has_rready else 1
        return req, a, rready

    def step(self, cycle: int, gnt: int, rvalid: int, r: RTransfer | None) -> list[TraceEvent]:
        req, a, rready = self.outputs()
        events = []
        if req and gnt:
            events.append(TraceEvent(cycle, Side.MANAGER, self.port, EventKind.A_ACCEPTED, a))
            self.idx += 1
            self.outstanding += 1
            if self.idx < len(self.script):
                self.wait = self.script[self.idx].gap
        elif not req and self.idx < len(self.script):
            self.wait -= 1
        if rvalid:
            if self.outstanding == 0:
                events.append(TraceEvent(cycle, Side.MANAGER, self.port, EventKind.VIOLATION, None))
            elif rready:
                events.append(TraceEvent(cycle, Side.MANAGER, self.port, EventKind.R_ACCEPTED, r))
                self.outstanding -= 1
        return events

    @property
    def done(self) -> bool:
        return self.idx >= len(self.script) and self.outstanding == 0

    def get_state(self):
        return (self.idx, self.wait, self.outstanding)

    def set_state(self, s) -> None:
        self.idx, self.wait, self.outstanding = s


def manager_step(model: ManagerModel, cycle: int, gnt_in: int, rvalid_in: int, r_in: RTransfer | None):
    """One cycle of a manager: outputs driven this cycle plus the events it completes."""
    req, a, rready = model.outputs()
    return req, a, rready, model.step(cycle, gnt_in, rvalid_in, r_in)


class SubordinateModel:
    """Grants after a fixed latency and answers in order ``resp_latency`` cycles later."""

    def __init__(self, port: int = 0, data_width: int = 32, gnt_latency: int = 0,
                 resp_latency: int = 1, respond=None):
        if resp_latency < 1:
            raise ValueError("resp_latency must be >= 1")
        self.port = port
        self.data_width = data_width
        self.gnt_latency = gnt_latency
        self.resp_latency = resp_latency
        self.respond = respond or default_response
        self.gwait = 0
        self.queue: tuple[tuple[int, RTransfer], ...] = ()

    def gnt(self, req: int) -> int:
        return int(bool(req) and self.gwait >= self.gnt_latency)

    def r_outputs(self, cycle: int) -> tuple[int, RTransfer]:
        if self.queue and self.queue[0][0] <= cycle:
            return 1, self.queue[0][1]
        return 0, RTransfer()

    def step(self, cycle: int, req: int, a: ATransfer | None, rready: int) -> list[TraceEvent]:
        events = []
        gnt = self.gnt(req)
        rvalid, r = self.r_outputs(cycle)
        queue = self.queue
        if gnt:
            events.append(TraceEvent(cycle, Side.SUBORDINATE, self.port, EventKind.A_ACCEPTED, a))
            queue = queue + ((cycle + self.resp_latency, self.respond(a, self.data_width)),)
            self.gwait = 0
        elif req:
            self.gwait += 1
        else:
            self.gwait = 0
        if rvalid and rready:
            events.append(TraceEvent(cycle, Side.SUBORDINATE, self.port, EventKind.R_ACCEPTED, r))
            queue = queue[1:]
        self.queue = queue
        return events

    @property
    def idle(self) -> bool:
        return not self.queue

    def get_state(self):
        return (self.gwait, self.queue)

    def set_state(self, s) -> None:
        self.gwait, self.queue = s


def subordinate_step(model: SubordinateModel, cycle: int, req_in: int, a_in: ATransfer | None,
                     rready_in: int = 1):
    """One cycle of a subordinate: (gnt, rvalid, r) driven this cycle plus events."""
    gnt = model.gnt(req_in)
    rvalid, r = model.r_outputs(cycle)
    return gnt, rvalid, r, model.step(cycle, req_in, a_in, rready_in)


# --- engine-attached agents --------------------------------------------------

def _decode_phase(plan: GroupingPlan, channel: str, words, rec: Recorder, cycle: int, where: str):
    vals = {}
    for g, word in zip(plan.channel_groups(channel), words):
        d = g.decode(word)
        if d.status != Status.OK:
            rec.ecc.append(EccEvent(cycle, where, g.name, d.status))
        vals.update(g.unpack(d.data))
    if channel == "A":
        return ATransfer(**{n: vals.get(n, 0) for n in A_FIELDS})
    return RTransfer(**{n: vals.get(n, 0) for n in R_FIELDS})


class ManagerPort:
    def __init__(self, eng: Engine, plan: GroupingPlan, model: ManagerModel,
                 a: AChan, r: RChan, rec: Recorder):
        self.eng, self.plan, self.model, self.a, self.r, self.rec = eng, plan, model, a, r, rec
        self.name = f"mgr{model.port}"
        self._groups = plan.channel_groups("A")
        self._zero = [g.encode(ATransfer()) for g in self._groups]
        self._cache: tuple[int, list[int]] = (-1, self._zero)
        eng.add_proc(f"{self.name}.drive", self.drive, (),
                     list(a.req) + list(a.words) + list(r.ready or ()))
        eng.add_commit(self.commit)

    def drive(self):
        eng = self.eng
        req, a, rready = self.model.outputs()
        for wi in self.a.req:
            eng.set(wi, req)
        if req:
            idx = self.model.idx
            if self._cache[0] != idx:
                self._cache = (idx, [g.encode(a) for g in self._groups])
            words = self._cache[1]
        else:
            words = self._zero
        for wi, v in zip(self.a.words, words):
            eng.set(wi, v)
        for wi in self.r.ready or ():
            eng.set(wi, rready)

    def commit(self):
        w = self.eng.w
        cyc = self.eng.cycle
        gnt = vote([w[i] for i in self.a.gnt])
        rvalid = vote([w[i] for i in self.r.valid])
        r = None
        if rvalid and self.model.outputs()[2] and self.model.outstanding:
            r = _decode_phase(self.plan, "R", [w[i] for i in self.r.words], self.rec, cyc, self.name)
        for ev in self.model.step(cyc, gnt, rvalid, r):
            self.rec.event(ev)


class SubordinatePort:
    def __init__(self, eng: Engine, plan: GroupingPlan, model: SubordinateModel,
                 a: AChan, r: RChan, rec: Recorder):
        self.eng, self.plan, self.model, self.a, self.r, self.rec = eng, plan, model, a, r, rec
        self.name = f"sub{model.port}"
        self._groups = plan.channel_groups("R")
        self._zero = [g.encode(RTransfer()) for g in self._groups]
        eng.add_proc(f"{self.name}.gnt", self.drive_gnt, a.req, a.gnt)
        eng.add_proc(f"{self.name}.rdrive", self.drive_r, (), list(r.valid) + list(r.words))
        eng.add_commit(self.commit)

    def drive_gnt(self):
        eng = self.eng
        w = eng.w
        g = self.model.gnt(vote([w[i] for i in self.a.req]))
        for wi in self.a.gnt:
            eng.set(wi, g)

    def drive_r(self):
        eng = self.eng
        rvalid, r = self.model.r_outputs(eng.cycle)
        words = [g.encode(r) for g in self._groups] if rvalid else self._zero
        for wi in self.r.valid:
            eng.set(wi, rvalid)
        for wi, v in zip(self.r.words, words):
            eng.set(wi, v)

    def commit(self):
        w = self.eng.w
        cyc = self.eng.cycle
        req = vote([w[i] for i in self.a.req])
        a = None
        if self.model.gnt(req):
            a = _decode_phase(self.plan, "A", [w[i] for i in self.a.words], self.rec, cyc, self.name)
        rready = vote([w[i] for i in self.r.ready]) if self.r.ready else 1
        for ev in self.model.step(cyc, req, a, rready):
            self.rec.event(ev)
