"""OBI bus configuration, transfer payloads, manager scripts and interface traces."""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Sequence

# (name, width attribute or fixed width, channel, handshake)
# Channel "A" flows manager -> subordinate, "R" flows back.  gnt and rready
# travel against their channel but are accounted with it.
_SIGNALS = (
    ("req", 1, "A", True),
    ("addr", "addr_width", "A", False),
    ("we", 1, "A", False),
    ("be", "be_width", "A", False),
    ("wdata", "data_width", "A", False),
    ("aid", "id_width", "A", False),
    ("atop", "atop_width", "A", False),
    ("memtype", "memtype_width", "A", False),
    ("prot", "prot_width", "A", False),
    ("dbg", "dbg_width", "A", False),
    ("auser", "auser_width", "A", False),
    ("wuser", "wuser_width", "A", False),
    ("gnt", 1, "A", True),
    ("rvalid", 1, "R", True),
    ("rready", "has_rready", "R", True),
    ("rdata", "data_width", "R", False),
    ("rid", "id_width", "R", False),
    ("err", "has_err", "R", False),
    ("exokay", "has_exokay", "R", False),
    ("ruser", "ruser_width", "R", False),
)

A_FIELDS = ("addr", "we", "be", "wdata", "aid", "atop", "memtype", "prot", "dbg", "auser", "wuser")
R_FIELDS = ("rdata", "rid", "err", "exokay", "ruser")


class Signal(NamedTuple):
    name: str
    width: int
    channel: str
    handshake: bool


@dataclass(frozen=True)
class BusConfig:
    """Signal widths and optional features of one OBI bus.

    The defaults reproduce a 137-bit bus with 32-bit address and data.
    """

    addr_width: int = 32
    data_width: int = 32
    be_width: int = 4
    id_width: int = 4
    atop_width: int = 6
    memtype_width: int = 2
    prot_width: int = 3
    dbg_width: int = 1
    auser_width: int = 6
    wuser_width: int = 2
    ruser_width: int = 2
    has_rready: bool = True
    has_err: bool = True
    has_exokay: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "bool" or isinstance(v, bool):
                continue
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{f.name} must be a non-negative integer, got {v!r}")
        if self.addr_width <= 0 or self.data_width <= 0:
            raise ValueError("addr_width and data_width must be positive")
        if self.be_width * 8 != self.data_width:
            raise ValueError(
                f"be_width ({self.be_width}) x 8 must equal data_width ({self.data_width})"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "BusConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown bus config keys: {sorted(unknown)}")
        d = dict(d)
        if "data_width" in d and "be_width" not in d:
            d["be_width"] = d["data_width"] // 8
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def width(self, name: str) -> int:
        for sig in self.signals():
            if sig.name == name:
                return sig.width
        raise KeyError(name)

    def signals(self) -> list[Signal]:
        """All signals in declaration order, omitting zero-width ones."""
        out = []
        for name, w, chan, hs in _SIGNALS:
            width = w if isinstance(w, int) else int(getattr(self, w))
            if width:
                out.append(Signal(name, width, chan, hs))
        return out

    def field_width(self, name: str) -> int:
        """Width of a payload field; absent fields have width 0."""
        for n, w, _, _ in _SIGNALS:
            if n == name:
                return w if isinstance(w, int) else int(getattr(self, w))
        raise KeyError(name)


def total_width(cfg: BusConfig) -> int:
    return sum(s.width for s in cfg.signals())


def zero_optional_config(addr_width: int = 32, data_width: int = 32) -> BusConfig:
    return BusConfig(
        addr_width=addr_width, data_width=data_width, be_width=data_width // 8,
        id_width=0, atop_width=0, memtype_width=0, prot_width=0, dbg_width=0,
        auser_width=0, wuser_width=0, ruser_width=0,
        has_rready=False, has_err=False, has_exokay=False,
    )


class ATransfer(NamedTuple):
    addr: int = 0
    we: int = 0
    be: int = 0
    wdata: int = 0
    aid: int = 0
    atop: int = 0
    memtype: int = 0
    prot: int = 0
    dbg: int = 0
    auser: int = 0
    wuser: int = 0


class RTransfer(NamedTuple):
    rdata: int = 0
    rid: int = 0
    err: int = 0
    exokay: int = 0
    ruser: int = 0


def check_transfer(cfg: BusConfig, t: ATransfer | RTransfer) -> None:
    for name, v in t._asdict().items():
        w = cfg.field_width(name)
        if not 0 <= v < (1 << w) and not (w == 0 and v == 0):
            raise ValueError(f"{name}={v:#x} does not fit in {w} bits")


class ScriptEntry(NamedTuple):
    gap: int  # idle cycles before req is raised
    transfer: ATransfer


@dataclass(frozen=True)
class ManagerScript:
    entries: tuple[ScriptEntry, ...]
    seed: int | str | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


MAX_GAP = 3


def generate_script(
    cfg: BusConfig,
    seed: int | str,
    n_txns: int,
    regions: Sequence[tuple[int, int]] | None = None,
    unmapped_fraction: float = 0.0,
) -> ManagerScript:
    """Random transfers with 0-3 idle cycles between them.

    Addresses are uniform over the whole address space unless ``regions``
    (``(base, size)`` pairs) is given, in which case they are uniform over
    the union of the regions, except for ``unmapped_fraction`` of transfers
    which are drawn from outside every region.
    """
    if n_txns < 0:
        raise ValueError("n_txns must be >= 0")
    rng = random.Random(f"script:{seed}")
    amax = 1 << cfg.addr_width
    total = sum(size for _, size in regions) if regions else 0

    def draw_addr() -> int:
        if not regions:
            return rng.randrange(amax)
        if unmapped_fraction and rng.random() < unmapped_fraction and total < amax:
            while True:
                a = rng.randrange(amax)
                if not any(b <= a < b + s for b, s in regions):
                    return a
        off = rng.randrange(total)
        for base, size in regions:
            if off < size:
                return base + off
            off -= size
        raise AssertionError("unreachable")

    entries = []
    for _ in range(n_txns):
        gap = rng.randint(0, MAX_GAP)
        vals = {"addr": draw_addr()}
        for name in A_FIELDS[1:]:
            w = cfg.field_width(name)
            vals[name] = rng.getrandbits(w) if w else 0
        entries.append(ScriptEntry(gap, ATransfer(**vals)))
    return ManagerScript(tuple(entries), seed)


class EventKind(enum.IntEnum):
    A_ACCEPTED = 0
    R_ACCEPTED = 1
    # rvalid seen with nothing outstanding; only ever appears in faulty runs
    VIOLATION = 2


class Side(enum.IntEnum):
    MANAGER = 0
    SUBORDINATE = 1


class TraceEvent(NamedTuple):
    cycle: int
    side: Side
    port: int
    kind: EventKind
    payload: ATransfer | RTransfer | None

    def key(self):
        return (self.cycle, self.side, self.port, self.kind)

    def __str__(self):
        side = "m" if self.side == Side.MANAGER else "s"
        return f"@{self.cycle} {side}{self.port} {self.kind.name} {self.payload}"


Trace = list  # list[TraceEvent]


@dataclass
class Verdict:
    equal: bool
    first_divergence: int | None = None
    golden_event: TraceEvent | None = None
    observed_event: TraceEvent | None = None

    def __bool__(self):
        return self.equal


def scoreboard_verify(golden: Sequence[TraceEvent], observed: Sequence[TraceEvent]) -> Verdict:
    """Compare two traces event by event (cycle, port, kind and payload)."""
    for i, (g, o) in enumerate(zip(golden, observed)):
        if g != o:
            return Verdict(False, i, g, o)
    if len(golden) != len(observed):
        i = min(len(golden), len(observed))
        g = golden[i] if i < len(golden) else None
        o = observed[i] if i < len(observed) else None
        return Verdict(False, i, g, o)
    return Verdict(True)


def per_port_sequences(trace: Sequence[TraceEvent]) -> dict:
    """Payload sequence per (side, port, kind); A and R order are independent."""
    out: dict = {}
    for ev in trace:
        out.setdefault((ev.side, ev.port, ev.kind), []).append(ev.payload)
    return out


def scoreboard_verify_ordered(golden: Sequence[TraceEvent], observed: Sequence[TraceEvent]) -> Verdict:
    """Latency-insensitive comparison.

    Manager ports must see the same payloads in the same order per channel.
    Subordinate ports must see the same transfers, in any interleaving of
    the managers' streams (a delayed request may lose or win arbitration).
    """
    g, o = per_port_sequences(golden), per_port_sequences(observed)
    bad = set()
    for k in set(g) | set(o):
        gl, ol = g.get(k, []), o.get(k, [])
        if k[0] == Side.MANAGER:
            if gl != ol:
                bad.add(k)
        elif Counter(gl) != Counter(ol):
            bad.add(k)
    if not bad:
        return Verdict(True)
    # report the first observed event on an offending port that golden lacks there
    remaining = {k: Counter(g.get(k, [])) for k in bad}
    seen: dict = {}
    for i, ev in enumerate(observed):
        k = (ev.side, ev.port, ev.kind)
        if k not in bad:
            continue
        j = seen.get(k, 0)
        seen[k] = j + 1
        if ev.side == Side.MANAGER:
            gl = g.get(k, [])
            if j >= len(gl) or gl[j] != ev.payload:
                return Verdict(False, i, gl[j] if j < len(gl) else None, ev)
        elif remaining[k][ev.payload] > 0:
            remaining[k][ev.payload] -= 1
        else:
            return Verdict(False, i, None, ev)
    return Verdict(False, len(observed), None, None)