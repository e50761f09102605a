"""N x M crossbar assembly, cycle stepping and golden runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .agents import ManagerModel, ManagerPort, Recorder, SubordinateModel, SubordinatePort
from .blocks import AddressMap, Demux, Mux, PipeA, PipeR
from .bundles import make_achan, make_rchan
from .codec import GroupingPlan, default_plan, obi_plan
from .engine import Engine
from .obi import BusConfig, ManagerScript, TraceEvent

DRAIN_CYCLES = 64
WATCHDOG_CYCLES = 1000


class DeadlockError(RuntimeError):
    pass


@dataclass
class CrossbarTopology:
    n_managers: int = 6
    n_subordinates: int = 8
    pipeline_in: int = 1
    pipeline_out: int = 1
    regions: list | None = None  # [(base, size, subordinate)], default 256 MiB each from 0
    gnt_latency: int = 0
    resp_latency: int = 1

    def __post_init__(self):
        if self.n_managers < 1 or self.n_subordinates < 1:
            raise ValueError("need at least one manager and one subordinate")
        if self.pipeline_in < 0 or self.pipeline_out < 0:
            raise ValueError("pipeline stage counts must be >= 0")

    @property
    def address_map(self) -> AddressMap:
        if self.regions is None:
            return AddressMap.uniform(self.n_subordinates)
        return AddressMap(self.regions)

    def to_dict(self) -> dict:
        return {
            "n_managers": self.n_managers, "n_subordinates": self.n_subordinates,
            "pipeline_in": self.pipeline_in, "pipeline_out": self.pipeline_out,
            "regions": self.address_map.to_list(),
            "gnt_latency": self.gnt_latency, "resp_latency": self.resp_latency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrossbarTopology":
        d = dict(d)
        if d.get("regions") is not None:
            d["regions"] = [tuple(r) for r in d["regions"]]
        return cls(**d)


def resolve_plan(cfg_or_plan: BusConfig | GroupingPlan | None, mode: str) -> GroupingPlan:
    if isinstance(cfg_or_plan, GroupingPlan):
        plan = cfg_or_plan
        if (mode == "relobi") != plan.protected:
            raise ValueError(f"plan protection does not match mode {mode!r}")
        return plan
    if mode == "relobi":
        return default_plan(cfg_or_plan)
    if mode == "obi":
        return obi_plan(cfg_or_plan)
    raise ValueError(f"unknown mode {mode!r}")


class Crossbar:
    """Managers -> input stages -> demuxes -> muxes -> output stages -> subordinates."""

    def __init__(self, topology: CrossbarTopology, plan: GroupingPlan,
                 scripts: Sequence[ManagerScript], recovery: str = "inline"):
        if len(scripts) != topology.n_managers:
            raise ValueError("need one script per manager")
        if recovery not in ("inline", "abort-retry"):
            raise ValueError(f"unknown recovery mode {recovery!r}")
        self.topology, self.plan, self.recovery = topology, plan, recovery
        self.mode = "relobi" if plan.protected else "obi"
        self.eng = eng = Engine()
        self.rec = rec = Recorder()
        N, M = topology.n_managers, topology.n_subordinates
        amap = topology.address_map
        cfg = plan.cfg

        self.managers, self.subs, self.blocks = [], [], []

        # manager side: mgr -> pipe_in stages -> demux
        dem_a, dem_r = [], []
        for m in range(N):
            a = make_achan(eng, f"m{m}.a0", plan)
            r = make_rchan(eng, f"m{m}.r0", plan)
            model = ManagerModel(scripts[m], m, cfg.has_rready)
            self.managers.append(ManagerPort(eng, plan, model, a, r, rec))
            for k in range(topology.pipeline_in):
                a2 = make_achan(eng, f"m{m}.a{k + 1}", plan)
                r2 = make_rchan(eng, f"m{m}.r{k + 1}", plan)
                self.blocks.append(PipeA(eng, f"xbar.in{m}_{k}.a", plan, rec, a, a2))
                self.blocks.append(PipeR(eng, f"xbar.in{m}_{k}.r", plan, rec, r2, r))
                a, r = a2, r2
            dem_a.append(a)
            dem_r.append(r)

        # subordinate side: mux -> pipe_out stages -> sub
        mux_a, mux_r = [], []
        for s in range(M):
            a = make_achan(eng, f"s{s}.a0", plan)
            r = make_rchan(eng, f"s{s}.r0", plan)
            model = SubordinateModel(s, cfg.data_width, topology.gnt_latency, topology.resp_latency)
            self.subs.append(SubordinatePort(eng, plan, model, a, r, rec))
            for k in range(topology.pipeline_out):
                a2 = make_achan(eng, f"s{s}.a{k + 1}", plan)
                r2 = make_rchan(eng, f"s{s}.r{k + 1}", plan)
                self.blocks.append(PipeA(eng, f"xbar.out{s}_{k}.a", plan, rec, a2, a))
                self.blocks.append(PipeR(eng, f"xbar.out{s}_{k}.r", plan, rec, r, r2))
                a, r = a2, r2
            mux_a.append(a)
            mux_r.append(r)

        xa = [[make_achan(eng, f"x{m}_{s}.a", plan) for s in range(M)] for m in range(N)]
        xr = [[make_rchan(eng, f"x{m}_{s}.r", plan) for s in range(M)] for m in range(N)]
        abort = recovery == "abort-retry"
        self.demuxes = [Demux(eng, f"xbar.demux{m}", plan, rec, amap, dem_a[m], dem_r[m],
                              xa[m], xr[m], abort, m) for m in range(N)]
        self.muxes = [Mux(eng, f"xbar.mux{s}", plan, rec, [xa[m][s] for m in range(N)],
                          [xr[m][s] for m in range(N)], mux_a[s], mux_r[s]) for s in range(M)]
        self.blocks += self.demuxes + self.muxes
        eng.order = eng.topological_order()

    # -- stepping ----------------------------------------------------------

    @property
    def cycle(self) -> int:
        return self.eng.cycle

    @property
    def trace(self) -> list[TraceEvent]:
        return self.rec.trace

    def step(self, order=None) -> None:
        eng = self.eng
        eng.settle(order)
        eng.commit()
        eng.cycle += 1

    @property
    def done(self) -> bool:
        return all(m.model.done for m in self.managers)

    def snapshot(self):
        return (self.eng.cycle, self.eng.regs[:],
                tuple(m.model.get_state() for m in self.managers),
                tuple(s.model.get_state() for s in self.subs),
                self.rec.last_event)

    def restore(self, snap) -> None:
        cycle, regs, ms, ss, last = snap
        self.eng.cycle = cycle
        self.eng.regs[:] = regs
        for m, st in zip(self.managers, ms):
            m.model.set_state(st)
        for s, st in zip(self.subs, ss):
            s.model.set_state(st)
        self.rec.last_event = last
        self.rec.trace = []
        self.rec.ecc = []
        self.rec.aborts = []

    def fingerprint(self) -> int:
        """Hash of the full state, with response due times made relative to now."""
        now = self.eng.cycle
        subs = tuple((s.model.gwait, tuple((max(0, t - now), r) for t, r in s.model.queue))
                     for s in self.subs)
        return hash((tuple(self.eng.regs), tuple(m.model.get_state() for m in self.managers), subs))

    def hung(self, watchdog: int = WATCHDOG_CYCLES) -> bool:
        return not self.done and self.eng.cycle - self.rec.last_event > watchdog

    def run(self, drain: int = DRAIN_CYCLES, watchdog: int = WATCHDOG_CYCLES,
            order=None, max_cycles: int | None = None) -> list[TraceEvent]:
        """Step until every manager is done plus ``drain`` cycles."""
        done_at = None
        while True:
            if done_at is None and self.done:
                done_at = self.eng.cycle
            if done_at is not None and self.eng.cycle >= done_at + drain:
                break
            if max_cycles is not None and self.eng.cycle >= max_cycles:
                break
            if self.hung(watchdog):
                raise DeadlockError(self.diagnostic(watchdog))
            self.step(order)
        return self.rec.trace

    def diagnostic(self, watchdog: int) -> str:
        pend = [f"m{m.model.port}: idx={m.model.idx}/{len(m.model.script)} out={m.model.outstanding}"
                for m in self.managers if not m.model.done]
        return (f"no interface event for {watchdog} cycles at cycle {self.eng.cycle}; "
                f"pending: {', '.join(pend)}")


def build_crossbar(topology: CrossbarTopology, cfg_or_plan: BusConfig | GroupingPlan | None = None,
                   mode: str = "relobi", scripts: Sequence[ManagerScript] | None = None,
                   recovery: str = "inline") -> Crossbar:
    plan = resolve_plan(cfg_or_plan, mode)
    if scripts is None:
        scripts = [ManagerScript(()) for _ in range(topology.n_managers)]
    return Crossbar(topology, plan, scripts, recovery)


@dataclass
class GoldenRun:
    trace: list[TraceEvent]
    end_cycle: int
    done_cycle: int
    checkpoints: dict = field(default_factory=dict, repr=False)
    fingerprints: list = field(default_factory=list, repr=False)


def golden_run(system: Crossbar, checkpoint_every: int = 0, fingerprints: bool = False,
               drain: int = DRAIN_CYCLES, watchdog: int = WATCHDOG_CYCLES) -> GoldenRun:
    """Fault-free reference run; optionally records checkpoints and per-cycle state hashes.

    ``fingerprints[c]`` is the state hash at the start of cycle ``c``.
    """
    cps: dict = {}
    fps: list = []
    done_at = None
    while True:
        c = system.eng.cycle
        if checkpoint_every and c % checkpoint_every == 0:
            cps[c] = system.snapshot()
        if fingerprints:
            fps.append(system.fingerprint())
        if done_at is None and system.done:
            done_at = c
        if done_at is not None and c >= done_at + drain:
            break
        if system.hung(watchdog):
            raise DeadlockError(system.diagnostic(watchdog))
        system.step()
    return GoldenRun(list(system.trace), system.eng.cycle, done_at, cps, fps)
