"""A small fault campaign on both designs, then the abort-retry variant.

Run: python demos/03_small_campaign.py   (about half a minute)
"""

from relobi import CampaignConfig, CrossbarTopology, run_campaign

base = dict(topology=CrossbarTopology(2, 2), txns_per_manager=30, n_faults=600, seed=1)

for design in ("obi", "relobi"):
    rep = run_campaign(CampaignConfig(design=design, **base))
    print(rep.table())
    print(f"incorrect: {rep.incorrect}, hangs: {rep.hangs}\n")

rep = run_campaign(CampaignConfig(design="relobi", recovery="abort-retry", **base))
print(rep.table())
for kind, c in rep.to_dict()["by_class"].items():
    print(f"{kind}: {c.get('aborted_faults', 0)} faults caused an abort, "
          f"worst completion slip {c.get('max_abort_delay', 0)} cycles")
