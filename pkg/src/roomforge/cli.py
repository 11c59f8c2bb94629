"""Command line entry point: `sim run` and `sim replay`."""
from __future__ import annotations

import argparse
import sys

from .config import AppConfig
from .errors import RoomforgeError
from .session import Session
from .sim import ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim", description="Headless synthetic-designer experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scripted experiment")
    run.add_argument("--scenario", required=True,
                     help="max-symmetry | max-leniency | pattern-seeker | "
                          "random | drift-symmetry-leniency")
    run.add_argument("--episodes", type=int, default=10, metavar="N")
    run.add_argument("--seed", type=int, default=0, metavar="S")
    run.add_argument("--out", required=True, metavar="DIR")
    run.add_argument("--config", metavar="FILE", help="JSON config overrides")
    run.add_argument("--burst", type=int, default=500, metavar="G",
                     help="generations per episode (default 500)")

    replay = sub.add_parser("replay", help="replay and verify a saved session log")
    replay.add_argument("--log", required=True, metavar="FILE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            app = AppConfig.load(args.config) if args.config else AppConfig()
            report = run_experiment(ExperimentConfig(
                scenario=args.scenario, episodes=args.episodes, seed=args.seed,
                out_dir=args.out, burst_generations=args.burst, app=app))
            print(f"scenario={report.scenario} seed={report.seed} "
                  f"episodes={len(report.rows)}")
            for row in report.rows:
                print(f"  episode {row.episode:>2}: testAcc={row.test_acc:.3f} "
                      f"meanW1={row.mean_w1:.3f} favoriteRank={row.favorite_rank} "
                      f"generations={row.generations}")
            print(f"digest={report.stream_digest}")
            print(f"wrote report.csv, digest.txt, session.json to {args.out}")
        else:
            session = Session.load(args.log, verify=True)
            print(f"replayed session {session.session_id}: "
                  f"{len(session.events)} events, generation {session.generation}")
            print(f"dungeon digest {session.dungeon_digest()}")
            print(f"snapshot stream digest {session.stream_digest}")
            print("replay verified: event log, dungeon and snapshot stream match")
    except RoomforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
