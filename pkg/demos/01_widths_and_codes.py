"""Bus widths and the SECDED codes behind the protected bus.

Run: python demos/01_widths_and_codes.py
"""

from relobi import BusConfig, build_hsiao, default_plan, ecc_decode, ecc_encode, plan_width, total_width

# The default bus and the protected grouping plan
cfg = BusConfig()
plan = default_plan(cfg)
print(f"plain bus: {total_width(cfg)} bits, protected bus: {plan_width(plan)} bits")
for g in plan.groups:
    print(f"  {g.name:<6} k={g.k:<3} r={g.r}  {', '.join(g.members)}")
print(f"  triplicated handshakes: {', '.join(plan.tmr_signals)}")

# A single bit flip is corrected, a double flip is flagged
code = build_hsiao(32)
word = ecc_encode(code, 0xDEADBEEF)
print(ecc_decode(code, word ^ 1 << 5))
print(ecc_decode(code, word ^ 1 << 5 ^ 1 << 33))
