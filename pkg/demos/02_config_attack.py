"""
Tampered datanode configuration
===============================

dn1's heap budget and handler-thread count are cut while a job runs.
Its call-path set stays the same, so call matching only sees lower
system-call counts. The T-squared signature is what pins down the node.
"""

from replids.attacks import AttackSpec, Scenario
from replids.cluster import SimConfig, run_scenario

attack = AttackSpec("config_modification", "dn1")

print(f"{'workload':22s} {'samples':>7s} {'F':>9s} {'p-value':>10s}  suspect  decision")
for workload in ["teragen", "terasort", "random_text_writer", "aggregate_word_count"]:
    report = run_scenario(SimConfig(Scenario(workload, attack), seed=11))
    mem = report.verdicts[report.primary].memory
    n = report.profiles["dn1"].sample_count
    print(f"{workload:22s} {n:7d} {mem.anova.f_statistic:9.2f} {mem.anova.p_value:10.2e}  "
          f"{mem.suspected_node:7s}  {report.outcome.decision.value}")

# Tukey intervals for the last run: dn1's mean T-squared sits apart
tukey = mem.tukey
for g, node in enumerate(mem.node_ids):
    lo, hi = tukey.interval(g)
    print(f"  {node}: {tukey.group_means[g]:.3f}  [{lo:.3f}, {hi:.3f}]")

# system calls on dn1 dropped; library calls did not
c = report.verdicts["dn2"].call_comparisons[0]
print(f"\ndn2 vs {c.remote_node}: {len(c.count_violations)} count violations, "
      f"{len(c.missing_local) + len(c.missing_remote)} missing paths")
