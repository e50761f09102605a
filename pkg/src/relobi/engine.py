"""Two-phase cycle engine: combinational settle over wires, then register commit.

Blocks declare registers (flat integer slots) and wires, and attach
processes that read wires/registers and drive wires.  ``settle`` runs a
worklist to the unique fixpoint of the (acyclic) combinational logic, so
the result does not depend on process order.  ``commit`` computes every
next-state value from the settled wires and swaps it in.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import Callable, NamedTuple


class Port(NamedTuple):
    path: str
    wire: int
    width: int


class Engine:
    def __init__(self):
        self.reg_names: list[str] = []
        self.reg_widths: list[int] = []
        self.reg_faultable: list[bool] = []
        self.regs: list[int] = []
        self.nxt: list[int] = []

        self.wire_names: list[str] = []
        self.wire_widths: list[int] = []
        self.w: list[int] = []
        self.consumers: list[list[int]] = []
        self.ports: list[Port] = []

        self.procs: list[Callable[[], None]] = []
        self.proc_names: list[str] = []
        self.proc_writes: list[tuple[int, ...]] = []
        self.order: list[int] = []
        self.committers: list[Callable[[], None]] = []

        self.cycle = 0
        # single-cycle wire fault: (wire, xor mask) during the settle of pf_cycle
        self.pf_wire = -1
        self.pf_mask = 0
        self.pf_cycle = -1

        self._ran: list[bool] = []
        self._inq: list[bool] = []
        self._q: deque = deque()

    # -- construction ------------------------------------------------------

    def add_reg(self, name: str, width: int, init: int = 0, faultable: bool = True) -> int:
        self.reg_names.append(name)
        self.reg_widths.append(width)
        self.reg_faultable.append(faultable and width > 0)
        self.regs.append(init)
        return len(self.regs) - 1

    def add_wire(self, name: str, width: int) -> int:
        self.wire_names.append(name)
        self.wire_widths.append(width)
        self.w.append(0)
        self.consumers.append([])
        return len(self.w) - 1

    def add_port(self, path: str, wire: int) -> None:
        self.ports.append(Port(path, wire, self.wire_widths[wire]))

    def add_proc(self, name: str, fn: Callable[[], None], reads, writes) -> int:
        pid = len(self.procs)
        self.procs.append(fn)
        self.proc_names.append(name)
        self.proc_writes.append(tuple(writes))
        self.order.append(pid)
        for wi in reads:
            if pid not in self.consumers[wi]:
                self.consumers[wi].append(pid)
        return pid

    def topological_order(self) -> list[int]:
        """Producer-before-consumer order (Kahn, ties by creation order)."""
        n = len(self.procs)
        succ: list[set[int]] = [set() for _ in range(n)]
        for p, ws in enumerate(self.proc_writes):
            for wi in ws:
                succ[p].update(c for c in self.consumers[wi] if c != p)
        indeg = [0] * n
        for p in range(n):
            for c in succ[p]:
                indeg[c] += 1
        ready = [p for p in range(n) if indeg[p] == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            p = heapq.heappop(ready)
            out.append(p)
            for c in succ[p]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(out) != n:
            raise ValueError("combinational loop between processes")
        return out

    def add_commit(self, fn: Callable[[], None]) -> None:
        self.committers.append(fn)

    # -- simulation --------------------------------------------------------

    def set(self, i: int, v: int) -> None:
        if i == self.pf_wire and self.cycle == self.pf_cycle:
            v ^= self.pf_mask
        w = self.w
        if w[i] != v:
            w[i] = v
            ran, inq = self._ran, self._inq
            for c in self.consumers[i]:
                if ran[c] and not inq[c]:
                    inq[c] = True
                    self._q.append(c)

    def settle(self, order=None) -> None:
        order = self.order if order is None else order
        n = len(self.procs)
        self._ran = ran = [False] * n
        self._inq = inq = [True] * n
        self._q = q = deque(order)
        procs = self.procs
        pop = q.popleft
        while q:
            p = pop()
            inq[p] = False
            procs[p]()
            ran[p] = True

    def commit(self) -> None:
        self.nxt[:] = self.regs
        for fn in self.committers:
            fn()
        self.regs[:] = self.nxt

    def flip_reg(self, idx: int, mask: int) -> None:
        self.regs[idx] ^= mask

    def reg_index(self, name: str) -> int:
        return self.reg_names.index(name)

    def wire_index(self, name: str) -> int:
        return self.wire_names.index(name)
