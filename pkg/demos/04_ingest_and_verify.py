"""
From trace files to a verdict
=============================

Write per-node call logs and smaps snapshot files, ingest each into a
profile, then cross-verify the profiles with the command line tool.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from replids.attacks import inject_config_attack
from replids.builder import format_call_log, format_smaps
from replids.workloads import gen_workload, workload

work = Path(tempfile.mkdtemp(prefix="replids-"))
spec = workload("random_text_writer")
streams = {n: gen_workload(spec, n, seed=5) for n in ("dn1", "dn2", "dn3")}
streams = inject_config_attack(streams, "dn2")

profiles = []
for node, s in streams.items():
    (work / f"{node}.calls.tsv").write_text(format_call_log(s.events))
    (work / f"{node}.smaps").write_text(format_smaps(s.snapshots))
    out = work / f"{node}.bp"
    subprocess.run([sys.executable, "-m", "replids", "ingest",
                    "--calls", str(work / f"{node}.calls.tsv"), "--smaps", str(work / f"{node}.smaps"),
                    "--identifier", "rtw-0001", "--node-id", node, "--out", str(out)], check=True)
    profiles.append(str(out))

print(open(profiles[0]).read()[:400], "...\n")

r = subprocess.run([sys.executable, "-m", "replids", "verify", *profiles], capture_output=True, text=True)
print(r.stdout)
print("exit code", r.returncode)
