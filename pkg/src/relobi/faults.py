"""Transient fault injection (FLOP and PORT), outcome classification and campaigns."""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .agents import EccEvent
from .codec import GroupingPlan, Status
from .crossbar import (
    DRAIN_CYCLES, WATCHDOG_CYCLES, Crossbar, CrossbarTopology, GoldenRun, build_crossbar, golden_run,
)
from .obi import BusConfig, EventKind, Side, TraceEvent, generate_script, scoreboard_verify_ordered


class FaultKind(str, enum.Enum):
    FLOP = "FLOP"
    PORT = "PORT"


class FaultTarget(NamedTuple):
    kind: FaultKind
    path: str
    bit: int
    index: int  # register slot (FLOP) or wire (PORT) in the engine


class FaultSpec(NamedTuple):
    target: FaultTarget
    cycle: int


class Outcome(str, enum.Enum):
    MASKED = "Masked"
    CORRECTED = "Corrected"
    UNCORRECTABLE_CORRECT = "UncorrectableCorrectBehavior"
    UNCORRECTABLE_INCORRECT = "UncorrectableIncorrectBehavior"
    UNDETECTED = "UndetectedIncorrect"

    @property
    def incorrect(self) -> bool:
        return self in (Outcome.UNCORRECTABLE_INCORRECT, Outcome.UNDETECTED)


OUTCOMES = tuple(Outcome)


def enumerate_targets(system: Crossbar, kind: FaultKind | str) -> list[FaultTarget]:
    """Every bit of every crossbar register (FLOP) or block port (PORT)."""
    kind = FaultKind(kind)
    eng = system.eng
    out = []
    if kind == FaultKind.FLOP:
        for i, (name, width, ok) in enumerate(zip(eng.reg_names, eng.reg_widths, eng.reg_faultable)):
            if ok:
                out.extend(FaultTarget(kind, name, b, i) for b in range(width))
    else:
        for p in eng.ports:
            out.extend(FaultTarget(kind, p.path, b, p.wire) for b in range(p.width))
    return out


def sample_faults(targets: Sequence[FaultTarget], cycles: range | Sequence[int], n: int,
                  seed, replace: bool = False) -> list[FaultSpec]:
    """Uniform sample over targets x cycles, deterministic in ``seed``."""
    nt, nc = len(targets), len(cycles)
    total = nt * nc
    if n < 0:
        raise ValueError("n must be >= 0")
    if not replace and n > total:
        raise ValueError(f"cannot draw {n} distinct faults from {total}")
    rng = random.Random(f"faults:{seed}")
    if replace:
        picks = [rng.randrange(total) for _ in range(n)]
    else:
        picks = rng.sample(range(total), n)
    return [FaultSpec(targets[p // nc], cycles[p % nc]) for p in picks]


def evenly_spaced_cycles(end: int, count: int) -> list[int]:
    """``count`` cycles at the midpoints of equal slices of [0, end)."""
    return sorted({(2 * i + 1) * end // (2 * count) for i in range(count)})


def classify(golden: Sequence[TraceEvent], faulty: Sequence[TraceEvent] | bool,
             corrections: int | Sequence = 0, uncorrectables: int | Sequence = 0,
             ordered: bool = False) -> Outcome:
    """Table-style bucket: trace equality crossed with detection events.

    ``faulty`` may be a trace or an already computed equality flag.
    """
    if isinstance(faulty, bool):
        equal = faulty
    elif ordered:
        equal = bool(scoreboard_verify_ordered(golden, faulty))
    else:
        equal = list(golden) == list(faulty)
    nc = corrections if isinstance(corrections, int) else len(corrections)
    nu = uncorrectables if isinstance(uncorrectables, int) else len(uncorrectables)
    if equal:
        if nu:
            return Outcome.UNCORRECTABLE_CORRECT
        return Outcome.CORRECTED if nc else Outcome.MASKED
    return Outcome.UNCORRECTABLE_INCORRECT if nu else Outcome.UNDETECTED


def split_ecc(events: Sequence[EccEvent]):
    corr = [e for e in events if e.status == Status.CORRECTED]
    unc = [e for e in events if e.status == Status.UNCORRECTABLE]
    return corr, unc


@dataclass
class FaultyRun:
    trace: list[TraceEvent]
    corrections: list[EccEvent]
    uncorrectables: list[EccEvent]
    hung: bool = False
    aborts: list = field(default_factory=list)


def run_with_fault(factory: Callable[[], Crossbar], spec: FaultSpec, golden_end: int | None = None,
                   drain: int = DRAIN_CYCLES, watchdog: int = WATCHDOG_CYCLES) -> FaultyRun:
    """Reference injection: fresh system from reset, one fault, run to completion.

    FLOP: the bit is inverted right after the commit of ``spec.cycle`` and
    stays until the register is rewritten.  PORT: the wire reads inverted
    during the settle of ``spec.cycle`` only.
    """
    x = factory()
    eng = x.eng
    t = spec.target
    if t.kind == FaultKind.PORT:
        eng.pf_wire, eng.pf_mask, eng.pf_cycle = t.index, 1 << t.bit, spec.cycle
    done_at = None
    hung = False
    while True:
        c = eng.cycle
        if done_at is None and x.done:
            done_at = c
        if done_at is not None and c >= done_at + drain and (golden_end is None or c >= golden_end):
            break
        if x.hung(watchdog):
            hung = True
            break
        x.step()
        if t.kind == FaultKind.FLOP and c == spec.cycle:
            eng.flip_reg(t.index, 1 << t.bit)
    corr, unc = split_ecc(x.rec.ecc)
    return FaultyRun(list(x.trace), corr, unc, hung, list(x.rec.aborts))


@dataclass
class FaultResult:
    index: int
    spec: FaultSpec
    outcome: Outcome
    corrections: int
    uncorrectables: int
    hung: bool
    converged_at: int | None  # cycle where state rejoined a (possibly time-shifted) golden state
    aborts: int = 0
    abort_delay: int | None = None  # worst completion slip of an aborted transfer vs golden


class FaultSession:
    """Fast repeated injection into one built system against its golden run.

    Each fault restarts from the golden checkpoint at or before the
    injection cycle.  Once the full state (crossbar registers and agent
    state) hashes equal to the golden state of the same cycle and no
    interface event has differed, the rest of the run is identical to
    golden and simulation stops.
    """

    def __init__(self, factory: Callable[[], Crossbar], checkpoint_every: int = 1,
                 drain: int = DRAIN_CYCLES, watchdog: int = WATCHDOG_CYCLES):
        self.factory = factory
        self.drain, self.watchdog = drain, watchdog
        self.system = factory()
        self.golden: GoldenRun = golden_run(self.system, checkpoint_every=checkpoint_every,
                                            fingerprints=True, drain=drain, watchdog=watchdog)
        self.every = checkpoint_every
        self.ordered = self.system.recovery == "abort-retry"
        self.by_cycle: dict[int, list[TraceEvent]] = {}
        self.prefix_len: dict[int, int] = {}
        for i, ev in enumerate(self.golden.trace):
            self.by_cycle.setdefault(ev.cycle, []).append(ev)
        n = 0
        for c in range(self.golden.end_cycle + 1):
            self.prefix_len[c] = n
            n += len(self.by_cycle.get(c, ()))
        self._gold = _manager_streams(self.golden.trace)
        # state -> first golden cycle with that state; the state carries no
        # absolute time, so matching any cycle means a time-shifted replay
        self._fp_at: dict[int, int] = {}
        for cyc, fp in enumerate(self.golden.fingerprints):
            self._fp_at.setdefault(fp, cyc)

    @property
    def window(self) -> range:
        return range(self.golden.end_cycle)

    def targets(self, kind) -> list[FaultTarget]:
        return enumerate_targets(self.system, kind)

    def run(self, spec: FaultSpec, index: int = 0) -> FaultResult:
        x, g = self.system, self.golden
        eng = x.eng
        c = spec.cycle
        if not 0 <= c < g.end_cycle:
            raise ValueError(f"injection cycle {c} outside [0, {g.end_cycle})")
        start = c - c % self.every
        x.restore(g.checkpoints[start])
        while eng.cycle < c:
            x.step()
        x.rec.trace = []
        x.rec.ecc = []
        t = spec.target
        if t.kind == FaultKind.PORT:
            eng.pf_wire, eng.pf_mask, eng.pf_cycle = t.index, 1 << t.bit, c
        try:
            x.step()
        finally:
            eng.pf_wire, eng.pf_cycle = -1, -1
        if t.kind == FaultKind.FLOP:
            eng.flip_reg(t.index, 1 << t.bit)

        fps, by_cycle = g.fingerprints, self.by_cycle
        trace = x.rec.trace
        seen = 0
        diverged = False
        converged_at = None
        done_at = None
        hung = False
        check = c  # next cycle whose events are compared
        visited: set[int] = set()
        while True:
            cyc = eng.cycle
            # compare events of the cycles stepped since the last check
            if not diverged and not self.ordered:
                while check < cyc:
                    gl = by_cycle.get(check, ())
                    n = len(gl)
                    if trace[seen:seen + n] != list(gl) or (
                            len(trace) > seen + n and trace[seen + n].cycle == check):
                        diverged = True
                        break
                    seen += n
                    check += 1
            fp = x.fingerprint()
            if cyc < len(fps) and fp == fps[cyc]:
                rejoin = cyc
            else:
                rejoin = self._fp_at.get(fp)
            if rejoin is not None:
                # the rest replays golden from ``rejoin``, shifted in time
                converged_at = cyc
                break
            if done_at is None and x.done:
                done_at = cyc
            if done_at is not None and cyc >= done_at + self.drain and cyc >= g.end_cycle:
                break
            if done_at is None:
                # a repeated state before completion is a loop that never ends
                if fp in visited or x.hung(self.watchdog):
                    hung = True
                    break
                visited.add(fp)
            x.step()

        corr, unc = split_ecc(x.rec.ecc)
        abort_delay = None
        if hung:
            equal = False
        elif diverged:
            equal = False
        else:
            full = g.trace[:self.prefix_len[c]] + trace
            if converged_at is not None:
                shift = converged_at - rejoin
                tail = g.trace[self.prefix_len[rejoin]:]
                full += [e._replace(cycle=e.cycle + shift) for e in tail] if shift else tail
            if self.ordered:
                equal = bool(scoreboard_verify_ordered(g.trace, full))
                if equal and x.rec.aborts:
                    abort_delay = _abort_delay(self._gold, _manager_streams(full), x.rec.aborts)
            else:
                equal = full == g.trace
        outcome = classify(g.trace, equal, len(corr), len(unc))
        return FaultResult(index, spec, outcome, len(corr), len(unc), hung, converged_at,
                           len(x.rec.aborts), abort_delay)


def _manager_streams(trace) -> dict:
    """port -> (A events, R events) on the manager side."""
    out: dict = {}
    for ev in trace:
        if ev.side == Side.MANAGER and ev.kind != EventKind.VIOLATION:
            out.setdefault(ev.port, ([], []))[ev.kind].append(ev)
    return out


def _abort_delay(golden: dict, faulty: dict, aborts) -> int:
    """Worst R-completion slip over the aborted transfers.

    An abort names the manager and the corrected address of the held-back
    transfer; the transfer is the first one to that address still waiting
    for its response at the abort cycle.
    """
    worst = 0
    for ab in aborts:
        ga, gr = golden.get(ab.manager, ([], []))
        fa, fr = faulty.get(ab.manager, ([], []))
        for k, a in enumerate(fa):
            if a.payload.addr == ab.addr and k < len(fr) and fr[k].cycle > ab.cycle:
                worst = max(worst, fr[k].cycle - gr[k].cycle)
                break
        else:
            raise AssertionError(f"aborted transfer not found: {ab}")
    return worst


# --- campaigns ---------------------------------------------------------------

@dataclass
class CampaignConfig:
    design: str = "relobi"
    topology: CrossbarTopology = field(default_factory=CrossbarTopology)
    bus: BusConfig = field(default_factory=BusConfig)
    plan: dict | None = None  # grouping description; None = default grouping
    txns_per_manager: int = 1000
    fault_classes: tuple[str, ...] = ("FLOP", "PORT")
    n_faults: int = 10_000
    seed: int = 1
    recovery: str = "inline"
    sampling: str = "random"  # or "exhaustive"
    exhaustive_cycles: int = 16
    with_replacement: bool = False
    unmapped_fraction: float = 0.0
    jobs: int = 1

    def __post_init__(self):
        if self.design not in ("obi", "relobi"):
            raise ValueError(f"design must be obi or relobi, got {self.design!r}")
        if self.recovery not in ("inline", "abort-retry"):
            raise ValueError(f"recovery must be inline or abort-retry, got {self.recovery!r}")
        if self.sampling not in ("random", "exhaustive"):
            raise ValueError(f"sampling must be random or exhaustive, got {self.sampling!r}")
        self.fault_classes = tuple(FaultKind(k.upper()).value for k in self.fault_classes)
        if not self.fault_classes:
            raise ValueError("at least one fault class is required")
        if self.txns_per_manager < 0 or self.n_faults < 0:
            raise ValueError("txns_per_manager and n_faults must be >= 0")

    # fields that do not change results
    _NON_SEMANTIC = ("jobs",)

    def to_dict(self) -> dict:
        return {
            "design": self.design, "topology": self.topology.to_dict(), "bus": self.bus.to_dict(),
            "plan": self.plan, "txns_per_manager": self.txns_per_manager,
            "fault_classes": list(self.fault_classes), "n_faults": self.n_faults, "seed": self.seed,
            "recovery": self.recovery, "sampling": self.sampling,
            "exhaustive_cycles": self.exhaustive_cycles, "with_replacement": self.with_replacement,
            "unmapped_fraction": self.unmapped_fraction, "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__) - {"_NON_SEMANTIC"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown campaign config keys: {sorted(unknown)}")
        if "topology" in d and not isinstance(d["topology"], CrossbarTopology):
            d["topology"] = CrossbarTopology.from_dict(d["topology"])
        if "bus" in d and not isinstance(d["bus"], BusConfig):
            d["bus"] = BusConfig.from_dict(d["bus"])
        if "fault_classes" in d:
            fc = d["fault_classes"]
            d["fault_classes"] = tuple([fc] if isinstance(fc, str) else fc)
        return cls(**d)

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self._NON_SEMANTIC}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def grouping(self) -> GroupingPlan:
        from .crossbar import resolve_plan
        if self.plan is None:
            return resolve_plan(self.bus, self.design)
        d = dict(self.plan)
        d["protected"] = self.design == "relobi"
        return GroupingPlan.from_dict(self.bus, d)

    def scripts(self):
        spans = self.topology.address_map.spans()
        return [generate_script(self.bus, f"{self.seed}:{m}", self.txns_per_manager, spans,
                                self.unmapped_fraction)
                for m in range(self.topology.n_managers)]

    def factory(self) -> Callable[[], Crossbar]:
        return _Factory(self.topology, self.grouping(), self.scripts(), self.recovery)


class _Factory:
    """Picklable system constructor."""

    def __init__(self, topology, plan, scripts, recovery):
        self.topology, self.plan, self.scripts, self.recovery = topology, plan, scripts, recovery

    def __call__(self) -> Crossbar:
        return build_crossbar(self.topology, self.plan, "relobi" if self.plan.protected else "obi",
                              self.scripts, self.recovery)


def _pct(count: int, total: int) -> float:
    return round(100.0 * count / total, 2) if total else 0.0


@dataclass
class ClassReport:
    kind: str
    targets: int
    possible: int
    injected: int
    buckets: dict
    hangs: int = 0
    aborted: int = 0
    abort_delay: int | None = None

    def percentages(self) -> dict:
        return {k: _pct(v, self.injected) for k, v in self.buckets.items()}

    def to_dict(self) -> dict:
        d = {"targets": self.targets, "possible": self.possible, "injected": self.injected,
             "buckets": self.buckets, "percentages": self.percentages(), "hangs": self.hangs}
        if self.abort_delay is not None:
            d["aborted_faults"] = self.aborted
            d["max_abort_delay"] = self.abort_delay
        return d


@dataclass
class CampaignReport:
    config: CampaignConfig
    golden_cycles: int
    classes: list[ClassReport]
    results: list[FaultResult] = field(repr=False, default_factory=list)
    runtime_s: float = 0.0

    @property
    def buckets(self) -> dict:
        tot = Counter()
        for c in self.classes:
            tot.update(c.buckets)
        return {o.value: tot.get(o.value, 0) for o in OUTCOMES}

    @property
    def total_injected(self) -> int:
        return sum(c.injected for c in self.classes)

    @property
    def total_possible(self) -> int:
        return sum(c.possible for c in self.classes)

    @property
    def hangs(self) -> int:
        return sum(c.hangs for c in self.classes)

    @property
    def incorrect(self) -> int:
        b = self.buckets
        return b[Outcome.UNCORRECTABLE_INCORRECT.value] + b[Outcome.UNDETECTED.value]

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "design": self.config.design,
            "recovery": self.config.recovery,
            "fault_classes": list(self.config.fault_classes),
            "sampling": self.config.sampling,
            "golden_cycles": self.golden_cycles,
            "buckets": self.buckets,
            "percentages": {k: _pct(v, self.total_injected) for k, v in self.buckets.items()},
            "totals": {"injected": self.total_injected, "possible": self.total_possible},
            "by_class": {c.kind: c.to_dict() for c in self.classes},
            "hangs": self.hangs,
            "watchdog_dominated": 2 * self.hangs > self.total_injected,
            "config": {k: v for k, v in self.config.to_dict().items()
                       if k not in CampaignConfig._NON_SEMANTIC},
        }
        if include_runtime:
            d["runtime_s"] = round(self.runtime_s, 3)
        return d

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True) + "\n"

    def csv_rows(self):
        yield ("fault_index", "kind", "path", "bit", "cycle", "outcome")
        for r in self.results:
            t = r.spec.target
            yield (r.index, t.kind.value, t.path, t.bit, r.spec.cycle, r.outcome.value)

    def table(self) -> str:
        head = (f"{'Design':<8} {'Fault':<6} {'Masked':>8} {'Corrected':>10} {'Uncorr.':>8} | "
                f"{'Uncorr.':>8} {'Undetected':>10} | {'Injected':>9} {'Possible':>12}")
        lines = [f"{'':<16}{'Correct interface behavior':^30}|{'Incorrect behavior':^21}|", head,
                 "-" * len(head)]
        for c in self.classes:
            p = c.percentages()
            lines.append(
                f"{self.config.design:<8} {c.kind:<6} {p['Masked']:>8.2f} {p['Corrected']:>10.2f} "
                f"{p['UncorrectableCorrectBehavior']:>8.2f} | "
                f"{p['UncorrectableIncorrectBehavior']:>8.2f} {p['UndetectedIncorrect']:>10.2f} | "
                f"{c.injected:>9d} {c.possible:>12d}")
        return "\n".join(lines)


_WORKER: dict = {}


def _worker_init(factory):
    _WORKER["session"] = FaultSession(factory)


def _worker_run(batch):
    s = _WORKER["session"]
    return [s.run(spec, i) for i, spec in batch]


def plan_faults(config: CampaignConfig, session: FaultSession):
    """Fault list per class: (kind, targets, cycles, specs)."""
    window = session.window
    out = []
    classes = config.fault_classes
    for ci, kind in enumerate(classes):
        targets = session.targets(kind)
        if config.sampling == "exhaustive":
            cycles = evenly_spaced_cycles(len(window), config.exhaustive_cycles)
            specs = [FaultSpec(t, c) for t in targets for c in cycles]
        else:
            # split n over the classes, earlier classes take the remainder
            share = config.n_faults // len(classes) + (1 if ci < config.n_faults % len(classes) else 0)
            cycles = window
            specs = sample_faults(targets, window, share, f"{config.seed}:{kind}",
                                  config.with_replacement)
        out.append((kind, targets, cycles, specs))
    return out


def run_campaign(config: CampaignConfig, progress: Callable[[int, int], None] | None = None,
                 session: FaultSession | None = None) -> CampaignReport:
    t0 = time.perf_counter()
    factory = config.factory()
    session = session or FaultSession(factory)
    plan = plan_faults(config, session)
    flat = []
    for _, _, _, specs in plan:
        flat.extend(specs)
    indexed = list(enumerate(flat))

    results: list[FaultResult]
    if config.jobs > 1 and len(indexed) > 1:
        chunk = max(1, math.ceil(len(indexed) / (config.jobs * 8)))
        batches = [indexed[i:i + chunk] for i in range(0, len(indexed), chunk)]
        results = []
        with ProcessPoolExecutor(config.jobs, initializer=_worker_init, initargs=(factory,)) as ex:
            for part in ex.map(_worker_run, batches):
                results.extend(part)
                if progress:
                    progress(len(results), len(indexed))
        results.sort(key=lambda r: r.index)
    else:
        results = []
        for i, spec in indexed:
            results.append(session.run(spec, i))
            if progress and (i + 1) % 100 == 0:
                progress(i + 1, len(indexed))

    classes = []
    pos = 0
    for kind, targets, cycles, specs in plan:
        part = results[pos:pos + len(specs)]
        pos += len(specs)
        cnt = Counter(r.outcome.value for r in part)
        delays = [r.abort_delay for r in part if r.abort_delay is not None]
        classes.append(ClassReport(
            kind=kind, targets=len(targets), possible=len(targets) * len(session.window),
            injected=len(part), buckets={o.value: cnt.get(o.value, 0) for o in OUTCOMES},
            hangs=sum(r.hung for r in part),
            aborted=sum(1 for r in part if r.aborts),
            abort_delay=max(delays) if delays else None,
        ))
    return CampaignReport(config, session.golden.end_cycle, classes, results,
                          time.perf_counter() - t0)
