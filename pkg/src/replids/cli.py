"""``replids`` command line.

Exit codes: 0 clean, 1 intrusion detected, 2 usage or parse error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .attacks import load_json
from .builder import build_profile, read_call_log, read_smaps
from .cluster import Decision, config_from_dict, run_scenario
from .errors import DetectionError, ParseError
from .profile import deserialize_profile, serialize_profile
from .verifier import VerifyConfig, verify

EXIT_CLEAN, EXIT_INTRUSION, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

# error codes that mean "your input is wrong" rather than "something broke"
_USAGE_CODES = {
    "parse-error", "bad-digest", "bad-scenario", "bad-config", "profile-identity-mismatch",
    "unknown-workload", "no-such-node", "bad-field", "bad-profile", "negative-size",
    "non-monotone-sample", "bad-interval", "bad-delta", "bad-percentile",
}


class UsageError(Exception):
    pass


def _fail(msg: str) -> None:
    print(f"replids: error: {msg}", file=sys.stderr)


def _write(path: str | None, data: str | bytes) -> None:
    if path is None or path == "-":
        sys.stdout.write(data.decode("utf-8") if isinstance(data, bytes) else data)
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    if isinstance(data, bytes):
        p.write_bytes(data)
    else:
        p.write_text(data, encoding="utf-8")


def cmd_run(args) -> int:
    doc = load_json(args.scenario)
    config = config_from_dict(
        doc,
        seed=args.seed,
        alpha=args.alpha,
        delta=args.delta,
        percentile=args.percentile,
        interval_ms=args.interval_ms,
    )
    report = run_scenario(config)
    _write(args.out, report.to_json())
    o = report.outcome
    line = f"decision={o.decision.value}"
    if o.suspected_node:
        line += f" suspected={o.suspected_node}{' (tie)' if o.tie else ''}"
    print(line, file=sys.stderr)
    return EXIT_INTRUSION if o.decision is Decision.INTRUSION else EXIT_CLEAN


def cmd_ingest(args) -> int:
    events = read_call_log(args.calls)
    snapshots = read_smaps(args.smaps)
    profile = build_profile(args.identifier, args.node_id, events, snapshots, args.interval_ms)
    _write(args.out, serialize_profile(profile))
    return EXIT_CLEAN


def _read_profile(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return deserialize_profile(data)
    except ParseError as exc:
        raise ParseError(str(exc).split(": ", 1)[-1], exc.line, exc.offset, path, exc.code) from None


def cmd_verify(args) -> int:
    if len(args.profiles) < 2:
        raise UsageError("verify needs at least two profile files")
    profiles = [_read_profile(p) for p in args.profiles]
    names = [p.node_id for p in profiles]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate node ids: {names}")
    config = VerifyConfig(
        alpha=0.05 if args.alpha is None else args.alpha,
        delta=0.5 if args.delta is None else args.delta,
        percentile=99.0 if args.percentile is None else args.percentile,
    )
    verdicts = []
    for i, local in enumerate(profiles):
        verdicts.append(verify(local, profiles[:i] + profiles[i + 1:], config))

    mem = verdicts[0].memory
    doc = {
        "identifier": profiles[0].identifier,
        "calls": [
            {
                "local": c.local_node,
                "remote": c.remote_node,
                "calls_match": c.calls_match,
                "missing_local": list(c.missing_local),
                "missing_remote": list(c.missing_remote),
                "count_violations": [list(x) for x in c.count_violations],
            }
            for v in verdicts
            for c in v.call_comparisons
            if c.local_node < c.remote_node
        ],
        "memory": None
        if mem is None
        else {
            "f_statistic": mem.anova.f_statistic if mem.anova.f_statistic != float("inf") else "inf",
            "p_value": mem.anova.p_value,
            "mem_match": mem.mem_match,
            "suspected_node": mem.suspected_node,
        },
        "verdicts": [
            {
                "node": v.node_id,
                "calls_match": v.calls_match,
                "mem_match": v.mem_match,
                "overall": v.overall,
                "suspected_node": v.suspected_node,
            }
            for v in verdicts
        ],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_CLEAN if all(v.overall for v in verdicts) else EXIT_INTRUSION


def _load_report(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, path) from None
    try:
        nodes = list(doc["nodes"])
        for n in nodes:
            doc["profiles"][n]["t_squared"]
            doc["profiles"][n]["calls"]
        doc["outcome"]["decision"]
        doc["memory"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"not a simulation report (missing {exc})", source=path) from None
    return doc


def cmd_report(args) -> int:
    doc = _load_report(args.report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nodes = doc["nodes"]
    written = []

    series = {n: sorted(doc["profiles"][n]["t_squared"]) for n in nodes}
    with open(out / "t2_sorted.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", *nodes])
        for i in range(max((len(s) for s in series.values()), default=0)):
            w.writerow([i, *(repr(series[n][i]) if i < len(series[n]) else "" for n in nodes)])
    written.append("t2_sorted.csv")

    paths: dict[str, str] = {}
    counts: dict[str, dict[str, int]] = {n: {} for n in nodes}
    for n in nodes:
        for c in doc["profiles"][n]["calls"]:
            paths[c["digest"]] = c["path"]
            counts[n][c["digest"]] = c["count"]
    with open(out / "call_counts.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["digest", "path", *nodes])
        for key in sorted(paths, key=lambda k: paths[k]):
            w.writerow([key, paths[key], *(counts[n].get(key, 0) for n in nodes)])
    written.append("call_counts.csv")

    notes = []
    mem = doc["memory"]
    tukey = mem and mem.get("tukey")
    if tukey:
        suspect = mem.get("suspected_node")
        with open(out / "tukey.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "mean", "low", "high", "suspected"])
            for row in tukey["intervals"]:
                w.writerow([row["node"], repr(row["mean"]), repr(row["low"]), repr(row["high"]),
                            int(row["node"] == suspect)])
        written.append("tukey.csv")
    elif mem is None:
        notes.append("tukey.csv not written: profiles carry no memory signature")
    else:
        notes.append("tukey.csv not written: ANOVA did not reject equal means, so no post-hoc test ran")

    manifest = {
        "source": str(args.report),
        "decision": doc["outcome"]["decision"],
        "suspected_node": doc["outcome"].get("suspected_node"),
        "files": written,
        "notes": notes,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_CLEAN


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"not an unsigned 64-bit integer: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replids", description="Replica-verified runtime intrusion detection.")
    sub = p.add_subparsers(dest="command", required=True)

    def stats_flags(sp):
        sp.add_argument("--alpha", type=float, default=None, help="significance level (default 0.05)")
        sp.add_argument("--delta", type=float, default=None, help="relative call-count threshold (default 0.5)")
        sp.add_argument("--percentile", type=float, default=None, help="T-squared tail cut (default 99)")

    run = sub.add_parser("run", help="simulate a scenario and write its report")
    run.add_argument("scenario")
    run.add_argument("--seed", type=_u64, default=None)
    run.add_argument("--interval-ms", type=_positive_int, default=None)
    run.add_argument("--out", default=None, help="report path (default stdout)")
    stats_flags(run)
    run.set_defaults(func=cmd_run)

    ing = sub.add_parser("ingest", help="build a profile from a call log and smaps snapshots")
    ing.add_argument("--calls", required=True)
    ing.add_argument("--smaps", required=True)
    ing.add_argument("--identifier", required=True)
    ing.add_argument("--node-id", required=True)
    ing.add_argument("--interval-ms", type=_positive_int, default=2000)
    ing.add_argument("--out", default=None, help="profile path (default stdout)")
    ing.set_defaults(func=cmd_ingest)

    ver = sub.add_parser("verify", help="cross-verify serialized profiles")
    ver.add_argument("profiles", nargs="*")
    stats_flags(ver)
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="turn a simulation report into CSV series")
    rep.add_argument("report")
    rep.add_argument("--out", required=True, help="output directory")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_CLEAN
    try:
        return args.func(args)
    except UsageError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except DetectionError as exc:
        _fail(str(exc))
        return EXIT_USAGE if exc.code in _USAGE_CODES else EXIT_RUNTIME
    except OSError as exc:
        _fail(str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
