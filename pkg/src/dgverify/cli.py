"""Command line entry point: ``dgverify <command>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

def _client(args):
    from .harness.runtime import GatewayClient

    if args.endpoint:
        return GatewayClient.remote(args.endpoint)
    return GatewayClient.in_process(args.corpus)


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import ConfigError, GatewayConfig, TrustGateway, create_app

    try:
        config = GatewayConfig.from_paths(
            args.registry,
            args.policies,
            args.signing_key,
            args.ledger,
            fixed_clock=args.fixed_clock,
            allow_clock_override=args.allow_clock_override,
            metrics_path=Path(args.metrics_out) if args.metrics_out else None,
        )
    except ConfigError as exc:
        print(f"refusing to start: {exc}", file=sys.stderr)
        return 2
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(create_app(TrustGateway(config)), host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def cmd_fixtures(args) -> int:
    from .harness.fixtures import generate_fixtures

    out = generate_fixtures(args.seed, args.out, precheck=not args.no_precheck)
    print(f"fixture corpus written to {out}")
    return 0


def cmd_scenario(args) -> int:
    from .harness.scenarios import SCENARIOS, run_scenario

    tags = SCENARIOS if args.tags == ["all"] else args.tags
    failed = 0
    with _client(args) as client:
        for tag in tags:
            report = run_scenario(tag, client, args.corpus)
            lines = report.lines() if args.verbose or not report.passed else report.lines()[:1]
            print("\n".join(lines))
            failed += not report.passed
    return 1 if failed else 0


def cmd_batch_gen(args) -> int:
    from .harness.batch import generate_batch

    out = generate_batch(args.corpus, args.out, args.seed, args.n)
    print(f"{args.n} requests written to {out / 'requests'}")
    return 0


def cmd_batch_run(args) -> int:
    from .harness.batch import run_batch_metrics

    with _client(args) as client:
        report = run_batch_metrics(
            args.batch, client, args.out, clock=args.clock, warmup=args.warmup, rerun=not args.no_rerun
        )
    print(json.dumps({k: report[k] for k in ("total", "results", "invariants", "determinism")}, indent=2))
    print(f"reports written to {Path(args.out) / 'batch_report.json'} and batch_report.md")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgverify")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the verification gateway")
    p.add_argument("--registry", required=True)
    p.add_argument("--policies", required=True, help="directory of policy JSON files")
    p.add_argument("--ledger", help="anchor ledger (JSON lines)")
    p.add_argument("--signing-key", required=True, help="verifier key file {key_id, seed}")
    p.add_argument("--listen", default="127.0.0.1:8080")
    p.add_argument("--metrics-out")
    p.add_argument("--fixed-clock", type=int)
    p.add_argument("--allow-clock-override", action="store_true",
                   help="honor the x-verifier-clock request header (testing only)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fixtures", help="generate the seeded fixture corpus")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="fixtures")
    p.add_argument("--no-precheck", action="store_true")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("scenario", help="run scenario suites S1..S5 (or 'all')")
    p.add_argument("tags", nargs="+", choices=["S1", "S2", "S3", "S4", "S5", "all"])
    p.add_argument("--corpus", default="fixtures", help="fixture corpus with the request cases")
    p.add_argument("--endpoint", help="gateway base URL; in-process when omitted")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("batch-gen", help="generate the batch request corpus")
    p.add_argument("--corpus", default="fixtures")
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--out", default="batch")
    p.set_defaults(func=cmd_batch_gen)

    p = sub.add_parser("batch-run", help="replay the batch and write reports")
    p.add_argument("--batch", default="batch")
    p.add_argument("--corpus", default="fixtures", help="fixture corpus for the in-process gateway")
    p.add_argument("--endpoint", help="gateway base URL; in-process when omitted")
    p.add_argument("--out", default="reports")
    p.add_argument("--clock", type=int, help="verification clock; defaults to the batch manifest")
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--no-rerun", action="store_true")
    p.set_defaults(func=cmd_batch_run)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("httpx").setLevel(logging.WARNING)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
