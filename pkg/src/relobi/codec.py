"""relOBI wire format: Hsiao SECDED per signal group plus triplicated handshakes."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple, Sequence

from .obi import A_FIELDS, R_FIELDS, ATransfer, BusConfig, RTransfer, total_width


def check_bits_for(k: int) -> int:
    """Smallest r with 2**(r-1) >= k + r."""
    r = 1
    while (1 << (r - 1)) < k + r:
        r += 1
    return r


@dataclass(frozen=True)
class HsiaoCode:
    """SECDED code with distinct odd-weight parity-check columns.

    Codeword layout: data bits 0..k-1, then check bits k..k+r-1.
    ``columns[j]`` is the r-bit syndrome produced by an error in bit j.
    """

    k: int
    r: int
    columns: tuple[int, ...]
    row_masks: tuple[int, ...] = field(repr=False, default=())
    syndrome_table: dict = field(repr=False, compare=False, hash=False, default_factory=dict)

    def __post_init__(self):
        if len(self.columns) != self.k + self.r:
            raise ValueError("need k + r columns")
        rows = []
        for i in range(self.r):
            m = 0
            for j in range(self.k):
                if self.columns[j] >> i & 1:
                    m |= 1 << j
            rows.append(m)
        object.__setattr__(self, "row_masks", tuple(rows))
        table = {}
        for j, c in enumerate(self.columns):
            table.setdefault(c, j)
        object.__setattr__(self, "syndrome_table", table)

    @property
    def n(self) -> int:
        return self.k + self.r

    def validate(self) -> None:
        if (1 << (self.r - 1)) < self.k + self.r:
            raise ValueError(f"r={self.r} too small for k={self.k}")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("columns are not distinct")
        for c in self.columns:
            if c == 0 or c >= 1 << self.r or bin(c).count("1") % 2 == 0:
                raise ValueError(f"column {c:#x} is not a non-zero odd-weight r-bit vector")

    def checks(self, data: int) -> int:
        c = 0
        for i, m in enumerate(self.row_masks):
            c |= ((data & m).bit_count() & 1) << i
        return c

    def encode(self, data: int) -> int:
        return data | self.checks(data) << self.k

    def syndrome(self, word: int) -> int:
        data = word & ((1 << self.k) - 1)
        return self.checks(data) ^ (word >> self.k)


@lru_cache(maxsize=None)
def build_hsiao(k: int) -> HsiaoCode:
    if k < 1:
        raise ValueError("k must be >= 1")
    r = check_bits_for(k)
    data_cols: list[int] = []
    for weight in range(3, r + 1, 2):
        for bits in combinations(range(r), weight):
            data_cols.append(sum(1 << b for b in bits))
    data_cols = sorted(data_cols, key=lambda c: (bin(c).count("1"), c))[:k]
    if len(data_cols) < k:
        raise AssertionError("Hsiao capacity exceeded")  # excluded by the choice of r
    code = HsiaoCode(k, r, tuple(data_cols) + tuple(1 << i for i in range(r)))
    code.validate()
    return code


class Status(enum.IntEnum):
    OK = 0
    CORRECTED = 1
    UNCORRECTABLE = 2


class Decoded(NamedTuple):
    data: int
    status: Status
    position: int | None = None


def ecc_encode(code: HsiaoCode, data: int) -> int:
    if not 0 <= data < 1 << code.k:
        raise ValueError(f"data does not fit in {code.k} bits")
    return code.encode(data)


def ecc_decode(code: HsiaoCode, word: int) -> Decoded:
    k = code.k
    data = word & ((1 << k) - 1)
    s = code.checks(data) ^ (word >> k)
    if s == 0:
        return Decoded(data, Status.OK)
    j = code.syndrome_table.get(s)
    if j is None:
        return Decoded(data, Status.UNCORRECTABLE)
    if j < k:
        data ^= 1 << j
    return Decoded(data, Status.CORRECTED, j)


def vote3(a: int, b: int, c: int) -> int:
    """Bitwise majority; for flags this is the usual 2-of-3 vote."""
    return (a & b) | (a & c) | (b & c)


class TriSignal(NamedTuple):
    a: int
    b: int
    c: int

    @classmethod
    def of(cls, v: int) -> "TriSignal":
        return cls(v, v, v)

    def vote(self) -> int:
        return vote3(self.a, self.b, self.c)


def vote(values: Sequence[int]) -> int:
    """Majority over 1 or 3 replicas (a single copy votes to itself)."""
    if len(values) == 1:
        return values[0]
    a, b, c = values
    return (a & b) | (a & c) | (b & c)


# --- grouping plan ---------------------------------------------------------

HANDSHAKES = ("req", "gnt", "rvalid", "rready")


@dataclass(frozen=True)
class Group:
    name: str
    members: tuple[str, ...]
    channel: str
    offsets: tuple[tuple[str, int, int], ...]  # (member, lsb, width)
    k: int
    code: HsiaoCode | None  # None: unprotected plain OBI group

    @property
    def r(self) -> int:
        return self.code.r if self.code else 0

    @property
    def width(self) -> int:
        return self.k + self.r

    def pack(self, t) -> int:
        v = 0
        for name, lsb, _ in self.offsets:
            v |= getattr(t, name) << lsb
        return v

    def unpack(self, data: int) -> dict:
        return {name: (data >> lsb) & ((1 << w) - 1) for name, lsb, w in self.offsets}

    def encode(self, t) -> int:
        data = self.pack(t)
        return self.code.encode(data) if self.code else data

    def decode(self, word: int) -> Decoded:
        if self.code is None:
            return Decoded(word, Status.OK)
        return ecc_decode(self.code, word)


@dataclass(frozen=True)
class GroupingPlan:
    """Which handshakes are triplicated and how payload signals form ECC groups."""

    cfg: BusConfig
    tmr_signals: tuple[str, ...]
    groups: tuple[Group, ...]
    lanes: int = 3

    @classmethod
    def build(cls, cfg: BusConfig, tmr_signals: Sequence[str],
              groups: Sequence[tuple[str, Sequence[str]]], protected: bool = True) -> "GroupingPlan":
        widths = {s.name: s for s in cfg.signals()}
        built = []
        for name, members in groups:
            members = tuple(m for m in members if m in widths)
            if not members:
                continue
            chans = {widths[m].channel for m in members}
            if len(chans) != 1:
                raise ValueError(f"group {name} mixes A and R channel signals")
            offs, lsb = [], 0
            for m in members:
                offs.append((m, lsb, widths[m].width))
                lsb += widths[m].width
            code = build_hsiao(lsb) if protected else None
            built.append(Group(name, members, chans.pop(), tuple(offs), lsb, code))
        tmr = tuple(s for s in tmr_signals if s in widths)
        plan = cls(cfg, tmr, tuple(built), 3 if protected else 1)
        plan.validate()
        return plan

    def validate(self) -> None:
        names = [s.name for s in self.cfg.signals()]
        seen: dict[str, str] = {}
        for s in self.tmr_signals:
            seen[s] = "tmr"
        for g in self.groups:
            for m in g.members:
                if m in seen:
                    raise ValueError(f"signal {m} appears in both {seen[m]} and {g.name}")
                seen[m] = g.name
            if g.k != sum(w for _, _, w in g.offsets):
                raise ValueError(f"group {g.name} k mismatch")
        missing = [n for n in names if n not in seen]
        extra = [n for n in seen if n not in names]
        if missing or extra:
            raise ValueError(f"plan does not partition the bus: missing={missing} extra={extra}")
        for s in self.tmr_signals:
            if s not in HANDSHAKES:
                raise ValueError(f"{s} is not a handshake signal")
        for h in HANDSHAKES:
            if h in names and h not in self.tmr_signals:
                raise ValueError(f"handshake {h} must be in tmr_signals")

    @property
    def protected(self) -> bool:
        return self.lanes == 3

    def channel_groups(self, channel: str) -> tuple[Group, ...]:
        return tuple(g for g in self.groups if g.channel == channel)

    def group(self, name: str) -> Group:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def group_of(self, signal: str) -> Group:
        for g in self.groups:
            if signal in g.members:
                return g
        raise KeyError(signal)

    def to_dict(self) -> dict:
        return {
            "tmr_signals": list(self.tmr_signals),
            "groups": [{"name": g.name, "members": list(g.members), "k": g.k, "r": g.r}
                       for g in self.groups],
            "protected": self.protected,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, cfg: BusConfig, d: dict) -> "GroupingPlan":
        if "groups" not in d:
            raise ValueError("plan needs a 'groups' list")
        names = {s.name for s in cfg.signals()}
        tmr = d.get("tmr_signals", [h for h in HANDSHAKES if h in names])
        plan = cls.build(cfg, tmr, [(g["name"], g["members"]) for g in d["groups"]],
                         protected=d.get("protected", True))
        for g, gd in zip(plan.groups, d["groups"]):
            for key in ("k", "r"):
                if key in gd and gd[key] != getattr(g, key):
                    raise ValueError(f"group {g.name}: recorded {key}={gd[key]} != {getattr(g, key)}")
        return plan

    @classmethod
    def from_json(cls, cfg: BusConfig, text: str) -> "GroupingPlan":
        return cls.from_dict(cfg, json.loads(text))


DEFAULT_GROUPS = (
    ("addr", ("addr",)),
    ("wdata", ("wdata", "be")),
    ("actrl", ("we", "aid", "atop", "memtype", "prot", "dbg", "auser", "wuser")),
    ("rdata", ("rdata",)),
    ("rctrl", ("rid", "err", "exokay", "ruser")),
)


def default_plan(cfg: BusConfig | None = None) -> GroupingPlan:
    cfg = cfg or BusConfig()
    return GroupingPlan.build(cfg, HANDSHAKES, DEFAULT_GROUPS)


def obi_plan(cfg: BusConfig | None = None) -> GroupingPlan:
    """Same grouping, single copy, no check bits: the plain OBI baseline."""
    cfg = cfg or BusConfig()
    return GroupingPlan.build(cfg, HANDSHAKES, DEFAULT_GROUPS, protected=False)


def plan_width(plan: GroupingPlan) -> int:
    return total_width(plan.cfg) + (plan.lanes - 1) * len(plan.tmr_signals) + sum(g.r for g in plan.groups)


# --- phase encode/decode ---------------------------------------------------

@dataclass(frozen=True)
class RelPhase:
    channel: str
    handshakes: dict  # name -> tuple of replicas
    words: dict  # group name -> codeword


def _handshakes_for(plan: GroupingPlan, channel: str) -> tuple[str, ...]:
    names = ("req", "gnt") if channel == "A" else ("rvalid", "rready")
    return tuple(h for h in names if h in plan.tmr_signals)


def relobi_encode(plan: GroupingPlan, phase: ATransfer | RTransfer,
                  handshakes: dict | None = None) -> RelPhase:
    channel = "A" if isinstance(phase, ATransfer) else "R"
    handshakes = handshakes or {}
    hs = {h: (int(handshakes.get(h, 0)),) * plan.lanes for h in _handshakes_for(plan, channel)}
    words = {g.name: g.encode(phase) for g in plan.channel_groups(channel)}
    return RelPhase(channel, hs, words)


def relobi_decode(plan: GroupingPlan, rel: RelPhase):
    """Returns (phase, voted handshakes, {group: Decoded})."""
    hs = {h: vote(v) for h, v in rel.handshakes.items()}
    vals: dict[str, int] = {}
    statuses = {}
    for g in plan.channel_groups(rel.channel):
        d = g.decode(rel.words[g.name])
        statuses[g.name] = d
        vals.update(g.unpack(d.data))
    cls, names = (ATransfer, A_FIELDS) if rel.channel == "A" else (RTransfer, R_FIELDS)
    phase = cls(**{n: vals.get(n, 0) for n in names})
    return phase, hs, statuses


def rel_phase_width(plan: GroupingPlan, channel: str) -> int:
    return (plan.lanes * len(_handshakes_for(plan, channel))
            + sum(g.width for g in plan.channel_groups(channel)))
