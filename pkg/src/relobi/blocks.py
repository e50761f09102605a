"""Interconnect blocks: pipeline stages, demultiplexer, round-robin multiplexer.

Every block is written once for ``L`` control lanes.  With ``L == 3``
(relOBI) each lane computes its handshakes and next state only from its
own lane of the inputs, and every control register is rewritten each
cycle with the majority of the three lanes' next values, so one corrupted
lane never survives a clock edge.  Payload words are single copy and
pass through untouched; their load enables and selections are voted.
With ``L == 1`` the same code is the plain OBI baseline.
"""

from __future__ import annotations

from .agents import Abort, EccEvent, Recorder
from .bundles import AChan, RChan, attach
from .codec import GroupingPlan, Status, vote
from .engine import Engine
from .obi import RTransfer


def clog2(n: int) -> int:
    return max(1, (n - 1).bit_length())


class AddressMap:
    """Non-overlapping, naturally aligned power-of-two regions."""

    def __init__(self, regions):
        self.regions = tuple((int(b), int(s), int(i)) for b, s, i in regions)
        for b, s, _ in self.regions:
            if s <= 0 or s & (s - 1):
                raise ValueError(f"region size {s:#x} is not a power of two")
            if b % s:
                raise ValueError(f"region base {b:#x} not aligned to size {s:#x}")
        spans = sorted((b, b + s) for b, s, _ in self.regions)
        for (b0, e0), (b1, _) in zip(spans, spans[1:]):
            if b1 < e0:
                raise ValueError(f"regions overlap at {b1:#x}")

    @classmethod
    def uniform(cls, n: int, size: int = 0x1000_0000, base: int = 0) -> "AddressMap":
        return cls([(base + i * size, size, i) for i in range(n)])

    def route(self, addr: int) -> int | None:
        for b, s, i in self.regions:
            if b <= addr < b + s:
                return i
        return None

    def spans(self) -> list[tuple[int, int]]:
        return [(b, s) for b, s, _ in self.regions]

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.regions]


def route(amap: AddressMap, addr: int) -> int | None:
    return amap.route(addr)


class _Block:
    def __init__(self, eng: Engine, name: str, plan: GroupingPlan, rec: Recorder):
        self.eng, self.name, self.plan, self.rec = eng, name, plan, rec
        self.L = plan.lanes

    def lane_regs(self, field: str, width: int) -> list[int]:
        return [self.eng.add_reg(f"{self.name}.{field}[{l}]", width) for l in range(self.L)]

    def commit_lanes(self, regs: list[int], values: list[int]) -> None:
        v = vote(values)
        nxt = self.eng.nxt
        for ri in regs:
            nxt[ri] = v


class PipeA(_Block):
    """One register stage on the A channel; gnt passes through when occupied."""

    def __init__(self, eng, name, plan, rec, up: AChan, dn: AChan):
        super().__init__(eng, name, plan, rec)
        self.up, self.dn = up, dn
        self.valid = self.lane_regs("valid", 1)
        self.data = [eng.add_reg(f"{name}.{g.name}", g.width) for g in plan.channel_groups("A")]
        attach(eng, name, "in", up)
        attach(eng, name, "out", dn)
        eng.add_proc(f"{name}.fwd", self.fwd, (), list(dn.req) + list(dn.words))
        eng.add_proc(f"{name}.bwd", self.bwd, dn.gnt, up.gnt)
        eng.add_commit(self.commit)

    def fwd(self):
        eng, r = self.eng, self.eng.regs
        for vi, wi in zip(self.valid, self.dn.req):
            eng.set(wi, r[vi])
        for di, wi in zip(self.data, self.dn.words):
            eng.set(wi, r[di])

    def bwd(self):
        eng, r, w = self.eng, self.eng.regs, self.eng.w
        for vi, gi, ui in zip(self.valid, self.dn.gnt, self.up.gnt):
            eng.set(ui, (1 - r[vi]) | w[gi])

    def commit(self):
        r, w, nxt = self.eng.regs, self.eng.w, self.eng.nxt
        nv, ld = [], []
        for vi, dg, uq, ug in zip(self.valid, self.dn.gnt, self.up.req, self.up.gnt):
            v = r[vi]
            fin = w[uq] & w[ug]
            nv.append(fin | (v & (1 - w[dg])))
            ld.append(fin)
        self.commit_lanes(self.valid, nv)
        if vote(ld):
            for di, wi in zip(self.data, self.up.words):
                nxt[di] = w[wi]


class PipeR(_Block):
    """One register stage on the R channel (subordinate side ``up``)."""

    def __init__(self, eng, name, plan, rec, up: RChan, dn: RChan):
        super().__init__(eng, name, plan, rec)
        self.up, self.dn = up, dn
        self.valid = self.lane_regs("valid", 1)
        self.data = [eng.add_reg(f"{name}.{g.name}", g.width) for g in plan.channel_groups("R")]
        attach(eng, name, "in", up)
        attach(eng, name, "out", dn)
        eng.add_proc(f"{name}.fwd", self.fwd, (), list(dn.valid) + list(dn.words))
        if up.ready:
            eng.add_proc(f"{name}.bwd", self.bwd, dn.ready, up.ready)
        eng.add_commit(self.commit)

    def fwd(self):
        eng, r = self.eng, self.eng.regs
        for vi, wi in zip(self.valid, self.dn.valid):
            eng.set(wi, r[vi])
        for di, wi in zip(self.data, self.dn.words):
            eng.set(wi, r[di])

    def bwd(self):
        eng, r, w = self.eng, self.eng.regs, self.eng.w
        for vi, di, ui in zip(self.valid, self.dn.ready, self.up.ready):
            eng.set(ui, (1 - r[vi]) | w[di])

    def commit(self):
        r, w, nxt = self.eng.regs, self.eng.w, self.eng.nxt
        nv, ld = [], []
        for l, vi in enumerate(self.valid):
            v = r[vi]
            if self.up.ready:
                fin = w[self.up.valid[l]] & w[self.up.ready[l]]
                fout = v & w[self.dn.ready[l]]
            else:
                fin = w[self.up.valid[l]]
                fout = v
            nv.append(fin | (v & (1 - fout)))
            ld.append(fin)
        self.commit_lanes(self.valid, nv)
        if vote(ld):
            for di, wi in zip(self.data, self.up.words):
                nxt[di] = w[wi]


class Demux(_Block):
    """Routes one manager to ``M`` multiplexers by address, one transaction in flight.

    Unmapped addresses are answered locally with err=1.  Each lane decodes
    the addr codeword on its own (with correction) to pick the output.  In
    ``abort_retry`` mode a lane that sees any addr ECC error holds the
    request back for a cycle and uses the registered corrected route next.
    """

    def __init__(self, eng, name, plan, rec, amap: AddressMap, up_a: AChan, up_r: RChan,
                 dn_a: list[AChan], dn_r: list[RChan], abort_retry: bool = False, manager: int = 0):
        super().__init__(eng, name, plan, rec)
        self.manager = manager
        self.amap = amap
        self.up_a, self.up_r, self.dn_a, self.dn_r = up_a, up_r, dn_a, dn_r
        self.M = M = len(dn_a)
        self.abort_retry = abort_retry
        self.none = M + 1  # route value: nothing forwarded this cycle
        cfg = plan.cfg
        sw = clog2(M + 1)
        self.cnt = self.lane_regs("cnt", 1)
        self.sel = self.lane_regs("sel", sw)
        self.id_w = cfg.id_width
        self.erid = self.lane_regs("err_rid", self.id_w) if self.id_w else None
        if abort_retry:
            self.retry = self.lane_regs("retry", 1)
            self.rsel = self.lane_regs("retry_sel", sw)
        agroups = plan.channel_groups("A")
        self.addr_g = plan.group_of("addr")
        self.addr_i = agroups.index(self.addr_g)
        self.aid_g = plan.group_of("aid") if self.id_w else None
        self.aid_i = agroups.index(self.aid_g) if self.aid_g else None
        rgroups = plan.channel_groups("R")
        # local error response per possible rid, encoded once
        self._err_words = {}
        for rid in range(1 << self.id_w):
            resp = RTransfer(rid=rid, err=1 if cfg.has_err else 0)
            self._err_words[rid] = [g.encode(resp) for g in rgroups]
        self._zero_r = [g.encode(RTransfer()) for g in rgroups]
        self.route_w = [eng.add_wire(f"{name}.route[{l}]", clog2(M + 2)) for l in range(self.L)]
        self._stat = [Status.OK] * self.L
        self._corr = [None] * self.L
        self._held = 0

        attach(eng, name, "in_a", up_a)
        attach(eng, name, "in_r", up_r)
        for s in range(M):
            attach(eng, name, f"out{s}_a", dn_a[s])
            attach(eng, name, f"out{s}_r", dn_r[s])
        eng.add_proc(f"{name}.a_fwd", self.a_fwd, list(up_a.req) + list(up_a.words),
                     self.route_w + [x for d in dn_a for x in list(d.req) + list(d.words)])
        eng.add_proc(f"{name}.a_bwd", self.a_bwd,
                     self.route_w + [g for d in dn_a for g in d.gnt], up_a.gnt)
        eng.add_proc(f"{name}.r_fwd", self.r_fwd,
                     [x for d in dn_r for x in list(d.valid) + list(d.words)],
                     list(up_r.valid) + list(up_r.words))
        if up_r.ready:
            eng.add_proc(f"{name}.r_bwd", self.r_bwd, up_r.ready,
                         [x for d in dn_r for x in d.ready])
        eng.add_commit(self.commit)

    def _lane_route(self, l, req, word):
        """Route decision of lane ``l`` for the current input (value in 0..M+1)."""
        r = self.eng.regs
        if not req:
            self._stat[l] = Status.OK
            return self.none
        d = self.addr_g.decode(word)
        self._stat[l] = d.status
        M = self.M
        if self.abort_retry:
            if r[self.retry[l]]:
                t = r[self.rsel[l]]
            elif d.status != Status.OK:
                rt = self.amap.route(d.data)
                self._corr[l] = M if rt is None else rt
                self._held = d.data
                return self.none
            else:
                rt = self.amap.route(d.data)
                t = M if rt is None else rt
        else:
            rt = self.amap.route(d.data)
            t = M if rt is None else rt
        if r[self.cnt[l]]:
            return self.none
        return t

    def a_fwd(self):
        eng, w = self.eng, self.eng.w
        word = w[self.up_a.words[self.addr_i]]
        for l in range(self.L):
            t = self._lane_route(l, w[self.up_a.req[l]], word)
            eng.set(self.route_w[l], t)
            for s, d in enumerate(self.dn_a):
                eng.set(d.req[l], 1 if s == t else 0)
        for d in self.dn_a:
            for wi, ui in zip(d.words, self.up_a.words):
                eng.set(wi, w[ui])

    def a_bwd(self):
        eng, w, M = self.eng, self.eng.w, self.M
        for l in range(self.L):
            t = w[self.route_w[l]]
            if t < M:
                g = w[self.dn_a[t].gnt[l]]
            else:
                g = 1 if t == M else 0
            eng.set(self.up_a.gnt[l], g)

    def _lane_r(self, l):
        """(rvalid, payload words) lane ``l`` would return to the manager."""
        r, w = self.eng.regs, self.eng.w
        if not r[self.cnt[l]]:
            return 0, self._zero_r
        s = r[self.sel[l]]
        if s == self.M:
            rid = r[self.erid[l]] if self.erid else 0
            return 1, self._err_words[rid]
        if s > self.M:  # corrupted select: nothing to forward
            return 0, self._zero_r
        d = self.dn_r[s]
        return w[d.valid[l]], [w[i] for i in d.words]

    def r_fwd(self):
        eng = self.eng
        lanes = [self._lane_r(l) for l in range(self.L)]
        for l, (v, _) in enumerate(lanes):
            eng.set(self.up_r.valid[l], v)
        for gi, wi in enumerate(self.up_r.words):
            eng.set(wi, vote([words[gi] for _, words in lanes]))

    def r_bwd(self):
        eng, r, w = self.eng, self.eng.regs, self.eng.w
        for l in range(self.L):
            busy = r[self.cnt[l]]
            s = r[self.sel[l]]
            ready = w[self.up_r.ready[l]]
            for t, d in enumerate(self.dn_r):
                eng.set(d.ready[l], ready if busy and s == t else 0)

    def commit(self):
        eng, r, w = self.eng, self.eng.regs, self.eng.w
        M, cyc = self.M, eng.cycle
        ncnt, nsel, nerid, nretry, nrsel = [], [], [], [], []
        for l in range(self.L):
            req = w[self.up_a.req[l]]
            t = w[self.route_w[l]]
            afire = req & w[self.up_a.gnt[l]] and t <= M
            if self.up_r.ready:
                rfire = w[self.up_r.valid[l]] & w[self.up_r.ready[l]]
            else:
                rfire = w[self.up_r.valid[l]]
            cnt = r[self.cnt[l]]
            ncnt.append(1 if afire else (0 if rfire else cnt))
            nsel.append(t if afire else r[self.sel[l]])
            if self.erid:
                rid = r[self.erid[l]]
                if afire and t == M:
                    d = self.aid_g.decode(w[self.up_a.words[self.aid_i]])
                    if d.status != Status.OK:
                        self.rec.ecc.append(EccEvent(cyc, f"{self.name}[{l}]", self.aid_g.name, d.status))
                    rid = self.aid_g.unpack(d.data)["aid"]
                nerid.append(rid)
            if req and self._stat[l] != Status.OK:
                self.rec.ecc.append(EccEvent(cyc, f"{self.name}[{l}]", self.addr_g.name, self._stat[l]))
            if self.abort_retry:
                rt, rs = r[self.retry[l]], r[self.rsel[l]]
                if afire:
                    rt = 0
                elif req and not rt and self._stat[l] != Status.OK:
                    rt, rs = 1, self._corr[l]
                nretry.append(rt)
                nrsel.append(rs)
        self.commit_lanes(self.cnt, ncnt)
        self.commit_lanes(self.sel, nsel)
        if self.erid:
            self.commit_lanes(self.erid, nerid)
        if self.abort_retry:
            if vote(nretry) and not vote([r[i] for i in self.retry]):
                self.rec.aborts.append(Abort(cyc, self.manager, self._held))
            self.commit_lanes(self.retry, nretry)
            self.commit_lanes(self.rsel, nrsel)


class Mux(_Block):
    """Round-robin arbiter for one subordinate with an in-order response queue."""

    def __init__(self, eng, name, plan, rec, up_a: list[AChan], up_r: list[RChan],
                 dn_a: AChan, dn_r: RChan):
        super().__init__(eng, name, plan, rec)
        self.up_a, self.up_r, self.dn_a, self.dn_r = up_a, up_r, dn_a, dn_r
        self.N = N = len(up_a)
        iw = clog2(N)
        self.ptr = self.lane_regs("ptr", iw)
        self.q = [self.lane_regs(f"q{j}", iw) for j in range(N)]
        self.qn = self.lane_regs("qn", clog2(N + 1))
        self._orders = [[(p + i) % N for i in range(N)] for p in range(1 << iw)]
        self.win_w = [eng.add_wire(f"{name}.win[{l}]", clog2(N + 1)) for l in range(self.L)]
        for m in range(N):
            attach(eng, name, f"in{m}_a", up_a[m])
            attach(eng, name, f"in{m}_r", up_r[m])
        attach(eng, name, "out_a", dn_a)
        attach(eng, name, "out_r", dn_r)
        eng.add_proc(f"{name}.a_fwd", self.a_fwd,
                     [x for u in up_a for x in list(u.req) + list(u.words)],
                     self.win_w + list(dn_a.req) + list(dn_a.words))
        eng.add_proc(f"{name}.a_bwd", self.a_bwd, self.win_w + list(dn_a.gnt),
                     [x for u in up_a for x in u.gnt])
        eng.add_proc(f"{name}.r_fwd", self.r_fwd, list(dn_r.valid) + list(dn_r.words),
                     [x for u in up_r for x in list(u.valid) + list(u.words)])
        if dn_r.ready:
            eng.add_proc(f"{name}.r_bwd", self.r_bwd, [x for u in up_r for x in u.ready],
                         list(dn_r.ready))
        eng.add_commit(self.commit)

    def a_fwd(self):
        eng, r, w, N = self.eng, self.eng.regs, self.eng.w, self.N
        sels = []
        for l in range(self.L):
            win = N
            if r[self.qn[l]] < N:
                for m in self._orders[r[self.ptr[l]]]:
                    if w[self.up_a[m].req[l]]:
                        win = m
                        break
            eng.set(self.win_w[l], win)
            eng.set(self.dn_a.req[l], 1 if win < N else 0)
            sels.append(win)
        for gi, wi in enumerate(self.dn_a.words):
            eng.set(wi, vote([w[self.up_a[m].words[gi]] if m < N else 0 for m in sels]))

    def a_bwd(self):
        eng, w, N = self.eng, self.eng.w, self.N
        for l in range(self.L):
            win = w[self.win_w[l]]
            g = w[self.dn_a.gnt[l]]
            for m in range(N):
                eng.set(self.up_a[m].gnt[l], g if m == win else 0)

    def _head(self, l):
        r = self.eng.regs
        return r[self.q[0][l]] if r[self.qn[l]] else None

    def r_fwd(self):
        eng, w = self.eng, self.eng.w
        for l in range(self.L):
            head = self._head(l)
            v = w[self.dn_r.valid[l]]
            for m, u in enumerate(self.up_r):
                eng.set(u.valid[l], v if m == head else 0)
        for u in self.up_r:
            for wi, di in zip(u.words, self.dn_r.words):
                eng.set(wi, w[di])

    def r_bwd(self):
        eng, w = self.eng, self.eng.w
        for l in range(self.L):
            head = self._head(l)
            if head is None:
                rdy = 1
            elif head < self.N:
                rdy = w[self.up_r[head].ready[l]]
            else:
                rdy = 0
            eng.set(self.dn_r.ready[l], rdy)

    def commit(self):
        r, w, N = self.eng.regs, self.eng.w, self.N
        nptr, nqn = [], []
        nq = [[] for _ in range(N)]
        for l in range(self.L):
            win = w[self.win_w[l]]
            afire = win < N and w[self.dn_a.req[l]] & w[self.dn_a.gnt[l]]
            qn = r[self.qn[l]]
            q = [r[self.q[j][l]] for j in range(N)]
            ready = w[self.dn_r.ready[l]] if self.dn_r.ready else 1
            if qn and w[self.dn_r.valid[l]] & ready:
                q = q[1:] + [0]
                qn -= 1
            if afire:
                if qn < N:
                    q[qn] = win
                    qn += 1
                nptr.append((win + 1) % N)
            else:
                nptr.append(r[self.ptr[l]])
            nqn.append(min(qn, N))
            for j in range(N):
                nq[j].append(q[j])
        self.commit_lanes(self.ptr, nptr)
        self.commit_lanes(self.qn, nqn)
        for j in range(N):
            self.commit_lanes(self.q[j], nq[j])
