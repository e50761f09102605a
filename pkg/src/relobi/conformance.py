"""Property suites: SECDED behavior, voter truth table, re-alignment, mode equivalence."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Iterable

from .codec import HsiaoCode, Status, build_hsiao, default_plan, ecc_decode, vote3
from .crossbar import Crossbar, CrossbarTopology, build_crossbar
from .obi import BusConfig, generate_script

SECDED_KS = (8, 29, 32)
_LANE = re.compile(r"(.*)\[([012])\]")


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<40} {self.checked:>9}  {self.detail}"


def corrupt_code(code: HsiaoCode, i: int, j: int) -> HsiaoCode:
    """Test hook: copy column ``i`` over column ``j``, breaking distinctness."""
    cols = list(code.columns)
    cols[j] = cols[i]
    return HsiaoCode(code.k, code.r, tuple(cols))


def check_secded(code: HsiaoCode, single_words: int = 100, double_words: int = 10,
                 seed: int = 0, name: str | None = None) -> CheckResult:
    """Every single error corrected, every double error flagged, on random data.

    The first counterexample is reported as the offending bit position or
    pair of positions.
    """
    name = name or f"secded k={code.k} r={code.r}"
    rng = random.Random(f"secded:{seed}:{code.k}")
    n, k = code.n, code.k
    checked = 0
    seen: dict[int, int] = {}
    for j, col in enumerate(code.columns):
        checked += 1
        if col in seen:
            return CheckResult(name, False, checked,
                               f"H-matrix columns of bit pair ({seen[col]}, {j}) coincide ({col:#x})")
        if col == 0 or bin(col).count("1") % 2 == 0:
            return CheckResult(name, False, checked, f"H-matrix column of bit {j} has even weight")
        seen[col] = j
    for _ in range(single_words):
        data = rng.getrandbits(k)
        word = code.encode(data)
        for i in range(n):
            d = ecc_decode(code, word ^ (1 << i))
            checked += 1
            if d.status != Status.CORRECTED or d.data != data:
                return CheckResult(name, False, checked,
                                   f"single error at bit {i} (data {data:#x}) gave "
                                   f"{d.status.name} position={d.position}")
    for _ in range(double_words):
        data = rng.getrandbits(k)
        word = code.encode(data)
        for i, j in combinations(range(n), 2):
            d = ecc_decode(code, word ^ (1 << i) ^ (1 << j))
            checked += 1
            if d.status != Status.UNCORRECTABLE:
                return CheckResult(name, False, checked,
                                   f"double error at bit pair ({i}, {j}) gave {d.status.name}")
    return CheckResult(name, True, checked)


def check_vote3() -> CheckResult:
    """Exhaustive 1-bit truth table plus bitwise agreement on a few wide words."""
    checked = 0
    for a, b, c in product((0, 1), repeat=3):
        want = 1 if a + b + c >= 2 else 0
        checked += 1
        if vote3(a, b, c) != want:
            return CheckResult("vote3 truth table", False, checked, f"vote3({a},{b},{c}) != {want}")
    rng = random.Random("vote3")
    for _ in range(200):
        v = rng.getrandbits(64)
        for lane in range(3):
            bad = [v, v, v]
            bad[lane] ^= rng.getrandbits(64)
            checked += 1
            if vote3(*bad) != v:
                return CheckResult("vote3 truth table", False, checked, f"lane {lane} corruption leaked")
    return CheckResult("vote3 truth table", True, checked)


def _mid_run(n: int = 2, m: int = 2, txns: int = 20, seed: int = 3, cycles: int = 40) -> Crossbar:
    topo = CrossbarTopology(n, m)
    cfg = BusConfig()
    spans = topo.address_map.spans()
    scripts = [generate_script(cfg, f"{seed}:{i}", txns, spans) for i in range(n)]
    x = build_crossbar(topo, cfg, "relobi", scripts)
    for _ in range(cycles):
        x.step()
    return x


def lane_groups(x: Crossbar) -> list[list[int]]:
    """Register slots of triplicated state, one list of three per logical register."""
    names = x.eng.reg_names
    by_base: dict[str, list[int]] = {}
    for i, nm in enumerate(names):
        m = _LANE.fullmatch(nm)
        if m:
            by_base.setdefault(m.group(1), []).append(i)
    return [v for v in by_base.values() if len(v) == 3]


def check_realignment(cycles: Iterable[int] = (5, 25, 40, 60)) -> CheckResult:
    """Corrupt one replica of each replicated register; replicas agree one cycle later."""
    checked = 0
    for c in cycles:
        base = _mid_run(cycles=c)
        snap = base.snapshot()
        for group in lane_groups(base):
            for slot in group:
                width = base.eng.reg_widths[slot]
                for mask in {1, (1 << width) - 1}:
                    base.restore(snap)
                    base.eng.flip_reg(slot, mask)
                    base.step()
                    vals = {base.eng.regs[s] for s in group}
                    checked += 1
                    if len(vals) != 1:
                        return CheckResult("lane re-alignment", False, checked,
                                           f"{base.eng.reg_names[slot]} mask {mask:#x} at cycle {c}: {vals}")
    return CheckResult("lane re-alignment", True, checked)


def check_equivalence(seeds: Iterable = (1, 2, 3), txns: int = 1000,
                      topology: CrossbarTopology | None = None) -> CheckResult:
    """Fault-free obi and relobi crossbars produce identical interface traces."""
    topo = topology or CrossbarTopology()
    cfg = BusConfig()
    spans = topo.address_map.spans()
    checked = 0
    for seed in seeds:
        scripts = [generate_script(cfg, f"{seed}:{m}", txns, spans) for m in range(topo.n_managers)]
        t_obi = build_crossbar(topo, cfg, "obi", scripts).run()
        xr = build_crossbar(topo, cfg, "relobi", scripts)
        t_rel = xr.run()
        checked += len(t_obi)
        if t_obi != t_rel:
            i = next((i for i, (a, b) in enumerate(zip(t_obi, t_rel)) if a != b),
                     min(len(t_obi), len(t_rel)))
            return CheckResult("obi/relobi equivalence", False, checked,
                               f"seed {seed}: first difference at event {i}")
        if xr.rec.ecc:
            return CheckResult("obi/relobi equivalence", False, checked,
                               f"seed {seed}: ECC event without a fault: {xr.rec.ecc[0]}")
    return CheckResult("obi/relobi equivalence", True, checked)


def run_conformance(codes: Iterable[HsiaoCode] | None = None, txns: int = 1000,
                    seeds: Iterable = (1, 2, 3), topology: CrossbarTopology | None = None,
                    stop_on_fail: bool = True,
                    progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    if codes is None:
        ks = sorted(set(SECDED_KS) | {g.k for g in default_plan().groups})
        codes = [build_hsiao(k) for k in ks]
    suites = [lambda c=c: check_secded(c) for c in codes]
    suites += [check_vote3, check_realignment,
               lambda: check_equivalence(seeds, txns, topology)]
    out = []
    for s in suites:
        res = s()
        out.append(res)
        if progress:
            progress(res)
        if stop_on_fail and not res.passed:
            break
    return out
