"""Seeded batch corpus generation, replay with metrics, and report emission."""

from __future__ import annotations

import collections
import gc
import json
import random
import statistics
import time
from pathlib import Path
from typing import Optional

from ..model import FLAG_NAMES
from .fixtures import AGENTS, Keyring, envelope_of, key_id, presenter_signature, request_body

PATTERNS = ("S1", "S2", "S3")
DEPTHS = (0, 1, 2, 3)


class BatchError(RuntimeError):
    pass


def _load_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def generate_batch(corpus_dir, out_dir, seed: int, n: int = 1200) -> Path:
    """Write ``n`` positive requests mixing S1 to S3 patterns.

    Pattern, depth, holder, anchoring, presenter proof and envelope use are
    drawn from one seeded generator. Anchored requests reuse the pre-anchored
    chains and only switch the policy to one that requires the anchor.
    """
    corpus = Path(corpus_dir)
    index = _load_json(corpus / "corpus.json")
    ring = Keyring.from_json(_load_json(corpus / "keys" / "keyring.json"))
    rng = random.Random(seed)
    out = Path(out_dir)
    req_dir = out / "requests"
    req_dir.mkdir(parents=True, exist_ok=True)
    for stale in req_dir.glob("req-*.json"):
        stale.unlink()
    for i in range(n):
        pattern = rng.choice(PATTERNS)
        depth = rng.choice(DEPTHS)
        holder = rng.choice(index["holders"])
        anchored = depth > 0 and rng.random() < 0.5
        with_presenter = rng.random() < 0.5
        creds, chains = index["credentials"][holder], index["chains"][holder]
        if pattern == "S1":
            presentation, chain = creds["jwt"], chains["sd"][:depth]
        elif pattern == "S2":
            presentation, chain = creds["ld"], chains["ld"][:depth]
        elif rng.random() < 0.5:
            presentation, chain = creds["jwt"], chains["ld"][:depth]
        else:
            presentation, chain = creds["ld"], chains["sd"][:depth]
        request_id = f"batch-{seed}-{i:05d}"
        presenter_kid = key_id(AGENTS[depth - 1]) if depth else index["holder_keys"][holder]
        body = request_body(
            request_id,
            presentation,
            chain,
            policy_id="anchor-required" if anchored else "permissive",
            presenter_key_id=presenter_kid if with_presenter else None,
            presenter_signature=presenter_signature(ring, presenter_kid, request_id) if with_presenter else None,
        )
        endpoint = "/verify"
        if pattern == "S1" and rng.random() < 0.5:
            body, endpoint = envelope_of(body), "/verify/oidc4vp"
        entry = {
            "request_id": request_id,
            "pattern": pattern,
            "depth": depth,
            "anchored": anchored,
            "presenter_proof": with_presenter,
            "endpoint": endpoint,
            "body": body,
        }
        (req_dir / f"req-{i:05d}.json").write_text(json.dumps(entry, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    manifest = {"seed": seed, "n": n, "clock": index["clock"], "corpus": str(corpus)}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return out


def load_batch(batch_dir) -> tuple[dict, list[dict]]:
    root = Path(batch_dir)
    manifest = _load_json(root / "manifest.json")
    entries = [_load_json(p) for p in sorted((root / "requests").glob("req-*.json"))]
    return manifest, entries


# -- statistics ---------------------------------------------------------------


def _mean(xs) -> Optional[float]:
    xs = list(xs)
    return statistics.fmean(xs) if xs else None


def _median(xs) -> Optional[float]:
    xs = list(xs)
    return statistics.median(xs) if xs else None


def _p95(xs) -> Optional[float]:
    xs = sorted(xs)
    if not xs:
        return None
    if len(xs) == 1:
        return xs[0]
    return statistics.quantiles(xs, n=20, method="inclusive")[-1]


def _latency(records) -> dict:
    records = list(records)
    return {
        "count": len(records),
        "e2e_mean_ms": _mean(r["t_total_ms"] for r in records),
        "e2e_median_ms": _median(r["t_total_ms"] for r in records),
        "e2e_p95_ms": _p95(r["t_total_ms"] for r in records),
        "normalize_mean_ms": _mean(r["t_normalize_ms"] for r in records),
        "verify_mean_ms": _mean(r["t_verify_ms"] for r in records),
    }


def _stratified_verify_mean(records, depths) -> Optional[float]:
    """Equal-weight mean of per-depth verify means, so two subsets with
    different depth mixes compare like for like."""
    per_depth = [_mean(r["t_verify_ms"] for r in records if r["depth"] == d) for d in depths]
    per_depth = [m for m in per_depth if m is not None]
    return statistics.fmean(per_depth) if per_depth else None


def aggregate(records: list[dict]) -> dict:
    by_depth = {d: [r for r in records if r["depth"] == d] for d in DEPTHS}
    chained = [r for r in records if r["depth"] > 0]
    with_anchor = [r for r in chained if r["anchored"]]
    without_anchor = [r for r in chained if not r["anchored"]]
    anchor_depths = [d for d in DEPTHS if d > 0]
    credential_sizes = [r["size_input_bytes"] for r in records]
    jwt_sizes = [r["size_input_bytes"] for r in records if r["credential_format"] == "VC_JWT"]
    expected_checks = [1 + r["depth"] + int(r["presenter_proof"]) for r in records]
    with_s = _stratified_verify_mean(with_anchor, anchor_depths)
    without_s = _stratified_verify_mean(without_anchor, anchor_depths)
    return {
        "total": len(records),
        "results": dict(sorted(collections.Counter(r["result"] for r in records).items())),
        "profiles": dict(sorted(collections.Counter(r["profile"] for r in records).items())),
        "per_depth": {str(d): _latency(rs) for d, rs in by_depth.items()},
        "anchoring": {
            "with_anchor": _latency(with_anchor),
            "without_anchor": _latency(without_anchor),
            "with_anchor_verify_stratified_ms": with_s,
            "without_anchor_verify_stratified_ms": without_s,
            "overhead_verify_ms": None if with_s is None or without_s is None else with_s - without_s,
            "by_depth": {
                str(d): {
                    "with_anchor_verify_mean_ms": _mean(r["t_verify_ms"] for r in with_anchor if r["depth"] == d),
                    "without_anchor_verify_mean_ms": _mean(r["t_verify_ms"] for r in without_anchor if r["depth"] == d),
                }
                for d in anchor_depths
            },
            "ledger_lookups_anchored": sum(r["ledger_lookups"] for r in records if r["anchored"]),
            "ledger_lookups_unanchored": sum(r["ledger_lookups"] for r in records if not r["anchored"]),
            "anchored_requests": sum(r["anchored"] for r in records),
            "anchored_with_exactly_one_lookup": sum(r["anchored"] and r["ledger_lookups"] == 1 for r in records),
        },
        "invariants": {flag: sum(bool(r["invariant_flags"].get(flag)) for r in records) for flag in FLAG_NAMES},
        "signature_checks": {
            "matching_linear_count": sum(r["signature_checks"] == e for r, e in zip(records, expected_checks)),
            "mean_by_depth": {str(d): _mean(r["signature_checks"] for r in rs) for d, rs in by_depth.items()},
        },
        "sizes": {
            "vc_jwt_mean_bytes": _mean(jwt_sizes),
            "credential_mean_bytes": _mean(credential_sizes),
            "cvc_mean_bytes": _mean(r["size_cvc_bytes"] for r in records),
            "vro_mean_bytes": _mean(r["size_vro_bytes"] for r in records),
            "vro_payload_mean_bytes": _mean(r["size_vro_payload_bytes"] for r in records),
            "vro_payload_max_bytes": max((r["size_vro_payload_bytes"] for r in records), default=None),
            "chain_mean_bytes": _mean(r["size_chain_bytes"] for r in chained),
            "expansion_ratio_mean": _mean(r["size_cvc_bytes"] / r["size_input_bytes"] for r in records if r["size_input_bytes"]),
            "cvc_exceeds_credential": sum(r["size_cvc_bytes"] > r["size_input_bytes"] for r in records),
        },
        "timing_consistency": sum(r["t_normalize_ms"] + r["t_verify_ms"] <= r["t_total_ms"] for r in records),
    }


# -- replay -------------------------------------------------------------------


def _credential_format(body: dict) -> str:
    presentation = body.get("presentation", body.get("vp_token"))
    return "VC_JWT" if isinstance(presentation, str) else "VC_LD"


def _replay(client, entries, clock) -> list[dict]:
    records = []
    for entry in entries:
        start = time.perf_counter()
        status, body = client.post(entry["endpoint"], entry["body"], clock=clock)
        t_total = (time.perf_counter() - start) * 1000.0
        if status != 200 or "payload" not in body:
            raise BatchError(f"{entry['request_id']}: HTTP {status} {body}")
        metrics = body["metrics"]
        records.append({
            **metrics,
            "request_id": entry["request_id"],
            "pattern": entry["pattern"],
            "depth": entry["depth"],
            "anchored": entry["anchored"],
            "presenter_proof": entry["presenter_proof"],
            "credential_format": _credential_format(entry["body"]),
            "t_total_ms": t_total,
            "payload_hash": body["payload_hash"],
            "payload": body["payload"],
        })
    return records


def run_batch_metrics(batch_dir, client, out_dir, clock: Optional[int] = None, warmup: int = 50, rerun: bool = True) -> dict:
    """Replay the batch, write metrics.jsonl, batch_report.json and batch_report.md.

    The batch is replayed twice at the same fixed clock; the second pass is
    only used for the determinism comparison.
    """
    manifest, entries = load_batch(batch_dir)
    if not entries:
        raise BatchError(f"no requests under {batch_dir}")
    clock = manifest["clock"] if clock is None else clock
    _replay(client, entries[:warmup], clock)
    gc.collect()
    records = _replay(client, entries, clock)
    report = aggregate(records)
    hashes = [r["payload_hash"] for r in records]
    determinism = {"unique_payload_hashes": len(set(hashes)), "total": len(hashes)}
    if rerun:
        again = _replay(client, entries, clock)
        determinism["rerun_identical_payloads"] = sum(
            a["payload_hash"] == b["payload_hash"] and a["payload"] == b["payload"] for a, b in zip(records, again)
        )
    report["determinism"] = determinism
    report["seed"] = manifest["seed"]
    report["clock"] = clock

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({k: v for k, v in r.items() if k != "payload"}, sort_keys=True) + "\n")
    (out / "batch_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "batch_report.md").write_text(render_markdown(report), encoding="utf-8")
    return report


def _fmt(value, digits: int = 3) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_markdown(report: dict) -> str:
    total = report["total"]
    lines = [
        "# Batch verification report",
        "",
        f"Requests: {total}. Seed: {report.get('seed')}. Fixed clock: {report.get('clock')}.",
        f"Results: {', '.join(f'{k} {v}' for k, v in report['results'].items())}.",
        f"Profiles: {', '.join(f'{k} {v}' for k, v in report['profiles'].items())}.",
        "",
        "## Latency by delegation depth (ms)",
        "",
        "| Depth | Count | Mean E2E | Median E2E | P95 E2E | Mean normalize | Mean verify |",
        "|---|---|---|---|---|---|---|",
    ]
    for depth, row in report["per_depth"].items():
        lines.append(
            f"| {depth} | {row['count']} | {_fmt(row['e2e_mean_ms'])} | {_fmt(row['e2e_median_ms'])} | "
            f"{_fmt(row['e2e_p95_ms'])} | {_fmt(row['normalize_mean_ms'])} | {_fmt(row['verify_mean_ms'])} |"
        )
    sizes = report["sizes"]
    lines += [
        "",
        "## Artifact sizes (bytes)",
        "",
        "| Artifact | Mean size |",
        "|---|---|",
        f"| VC-JWT credential | {_fmt(sizes['vc_jwt_mean_bytes'], 1)} |",
        f"| Any credential | {_fmt(sizes['credential_mean_bytes'], 1)} |",
        f"| CVC | {_fmt(sizes['cvc_mean_bytes'], 1)} |",
        f"| VRO (compact JWS) | {_fmt(sizes['vro_mean_bytes'], 1)} |",
        f"| VRO payload | {_fmt(sizes['vro_payload_mean_bytes'], 1)} (max {sizes['vro_payload_max_bytes']}) |",
        f"| Delegation chain | {_fmt(sizes['chain_mean_bytes'], 1)} |",
        "",
        f"Mean CVC/credential expansion ratio: {_fmt(sizes['expansion_ratio_mean'], 2)}x. "
        f"CVC larger than credential: {sizes['cvc_exceeds_credential']}/{total}.",
        "",
        "## Invariant checks",
        "",
        "| Invariant | Passed | Rate |",
        "|---|---|---|",
    ]
    for flag, passed in report["invariants"].items():
        lines.append(f"| {flag} | {passed} / {total} | {100.0 * passed / total:.1f} % |")
    anchoring = report["anchoring"]
    lines += [
        "",
        "## Anchoring (requests with a delegation chain, ms)",
        "",
        "| Condition | Count | Mean E2E | Mean verify | Depth-stratified mean verify |",
        "|---|---|---|---|---|",
        f"| With anchor | {anchoring['with_anchor']['count']} | {_fmt(anchoring['with_anchor']['e2e_mean_ms'])} | "
        f"{_fmt(anchoring['with_anchor']['verify_mean_ms'])} | {_fmt(anchoring['with_anchor_verify_stratified_ms'])} |",
        f"| Without anchor | {anchoring['without_anchor']['count']} | {_fmt(anchoring['without_anchor']['e2e_mean_ms'])} | "
        f"{_fmt(anchoring['without_anchor']['verify_mean_ms'])} | {_fmt(anchoring['without_anchor_verify_stratified_ms'])} |",
        "",
        f"Anchor overhead (stratified verify): {_fmt(anchoring['overhead_verify_ms'])} ms. "
        f"Ledger lookups: {anchoring['ledger_lookups_anchored']} on {anchoring['anchored_requests']} anchored requests, "
        f"{anchoring['ledger_lookups_unanchored']} on the rest.",
        "",
        "## Determinism",
        "",
        f"Unique VRO payload hashes: {report['determinism']['unique_payload_hashes']} / {report['determinism']['total']}.",
    ]
    if "rerun_identical_payloads" in report["determinism"]:
        lines.append(
            f"Rerun with the same clock, identical payloads: "
            f"{report['determinism']['rerun_identical_payloads']} / {report['determinism']['total']}."
        )
    checks = report["signature_checks"]
    lines += [
        "",
        f"Signature checks equal to 1 + depth + presenter proof: {checks['matching_linear_count']} / {total}.",
        "",
    ]
    return "\n".join(lines)
