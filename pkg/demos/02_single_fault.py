"""One bit flip, two crossbars: the plain one misbehaves, the protected one does not.

Three managers contend for one subordinate.  Flipping the arbiter's
round-robin pointer changes who is served next in the plain design; in
the protected design the other two replicas outvote the flipped one.

Run: python demos/02_single_fault.py
"""

from relobi import (
    ATransfer, CampaignConfig, CrossbarTopology, FaultSession, FaultSpec, ManagerScript, ScriptEntry,
)

N = 3
scripts = [ManagerScript(tuple(ScriptEntry(0, ATransfer(addr=0x40 + i, aid=m)) for i in range(8)))
           for m in range(N)]


def session(design):
    cfg = CampaignConfig(design=design, topology=CrossbarTopology(N, 1))
    factory = cfg.factory()
    factory.scripts = scripts
    return FaultSession(factory)


for design in ("obi", "relobi"):
    s = session(design)
    target = next(t for t in s.targets("FLOP") if t.path == "xbar.mux0.ptr[0]" and t.bit == 0)
    outcomes = {}
    for cycle in range(30):
        r = s.run(FaultSpec(target, cycle))
        outcomes[r.outcome.value] = outcomes.get(r.outcome.value, 0) + 1
    print(f"{design:<7} golden {s.golden.end_cycle} cycles, pointer flips over cycles 0-29: {outcomes}")
