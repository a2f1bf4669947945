"""
Copying files off an idle node
==============================

No job is running. Someone on dn3 zips a dozen 4 MiB files and mails them
out. The device, compression and mail calls are new paths, and dn3 makes
an order of magnitude more calls than its replicas.
"""

from replids.attacks import AttackSpec, Scenario
from replids.cluster import SimConfig, run_scenario

report = run_scenario(SimConfig(Scenario("idle", AttackSpec("data_exfiltration", "dn3")), seed=3))

for node, p in report.profiles.items():
    print(f"{node}: {p.total_calls:5d} calls, {len(p.calls)} distinct paths")

v = report.verdicts["dn1"]
for c in v.call_comparisons:
    print(f"dn1 vs {c.remote_node}: {len(c.missing_local)} paths only the remote has")

extra = report.verdicts["dn1"].call_comparisons[-1].missing_local
for key in extra:
    print("   ", report.profiles["dn3"].calls[key].path)

print("\ndecision:", report.outcome.decision.value, "suspect:", report.outcome.suspected_node)
for m in report.alerts:
    print("alert", m.sender, "->", m.to, m.payload.decode())
