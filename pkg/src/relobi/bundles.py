"""Wire bundles for one A or R channel of a (rel)OBI interface."""

from __future__ import annotations

from dataclasses import dataclass

from .codec import GroupingPlan
from .engine import Engine


@dataclass
class AChan:
    name: str
    req: list[int]
    gnt: list[int]
    words: list[int]  # one wire per A group, plan order

    def items(self):
        for l, wi in enumerate(self.req):
            yield f"req[{l}]", wi, "fwd"
        for l, wi in enumerate(self.gnt):
            yield f"gnt[{l}]", wi, "bwd"
        for wi in self.words:
            yield None, wi, "fwd"


@dataclass
class RChan:
    name: str
    valid: list[int]
    ready: list[int] | None  # None: no rready, always accepted
    words: list[int]

    def items(self):
        for l, wi in enumerate(self.valid):
            yield f"rvalid[{l}]", wi, "fwd"
        for l, wi in enumerate(self.ready or ()):
            yield f"rready[{l}]", wi, "bwd"
        for wi in self.words:
            yield None, wi, "fwd"


def make_achan(eng: Engine, name: str, plan: GroupingPlan) -> AChan:
    L = plan.lanes
    return AChan(
        name,
        [eng.add_wire(f"{name}.req[{l}]", 1) for l in range(L)],
        [eng.add_wire(f"{name}.gnt[{l}]", 1) for l in range(L)],
        [eng.add_wire(f"{name}.{g.name}", g.width) for g in plan.channel_groups("A")],
    )


def make_rchan(eng: Engine, name: str, plan: GroupingPlan) -> RChan:
    L = plan.lanes
    ready = None
    if plan.cfg.has_rready:
        ready = [eng.add_wire(f"{name}.rready[{l}]", 1) for l in range(L)]
    return RChan(
        name,
        [eng.add_wire(f"{name}.rvalid[{l}]", 1) for l in range(L)],
        ready,
        [eng.add_wire(f"{name}.{g.name}", g.width) for g in plan.channel_groups("R")],
    )


def attach(eng: Engine, block: str, port: str, chan: AChan | RChan) -> None:
    """Record every wire of ``chan`` as a port of ``block`` (fault-target census)."""
    for _, wi, _ in chan.items():
        leaf = eng.wire_names[wi].rsplit(".", 1)[1]
        eng.add_port(f"{block}.{port}.{leaf}", wi)
