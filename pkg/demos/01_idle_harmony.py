"""
Replicas in harmony
===================

Three datanodes sit idle. Their memory signatures should be statistically
indistinguishable, so every pairwise F-test on T-squared keeps the null.
"""

from itertools import combinations

from replids.attacks import Scenario
from replids.cluster import SimConfig, build_profiles
from replids.stats import two_sample_f_test

profiles = build_profiles(SimConfig(Scenario("idle"), seed=1))

for node, p in profiles.items():
    print(f"{node}: {p.total_calls} calls over {len(p.calls)} paths, {p.sample_count} memory samples")

print()
print("pair        h   p-value   variance ratio")
for a, b in combinations(sorted(profiles), 2):
    r = two_sample_f_test(profiles[a].t_squared, profiles[b].t_squared)
    print(f"{a} vs {b}  {int(r.h)}   {r.p_value:.4f}    {r.variance_ratio:.3f}")

# the call tables agree too: same paths, counts within 50%
from replids.verifier import compare_calls
print()
print("calls match:", all(compare_calls(profiles[a], profiles[b]).calls_match
                          for a, b in combinations(sorted(profiles), 2)))
