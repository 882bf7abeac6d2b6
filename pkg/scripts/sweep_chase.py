"""Predator/prey sweep: catch rate and catch ticks over seeds and speed ratios."""
import argparse
import json
import statistics

from agentsim.scenarios.chase import chase_config
from agentsim.server.engine import run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--ratios", type=float, nargs="+", default=[1.1, 1.2, 1.5, 2.0])
    ap.add_argument("--max-ticks", type=int, default=5000)
    ap.add_argument("--json", help="write per-run rows here")
    args = ap.parse_args()

    rows = []
    print(f"{'ratio':>6} {'caught':>7} {'median':>7} {'max':>6}")
    for ratio in args.ratios:
        ticks = []
        for seed in range(args.seeds):
            m = run(chase_config(seed, predator_speed=ratio, prey_speed=1.0, max_ticks=args.max_ticks)).metrics
            rows.append({"ratio": ratio, "seed": seed, **m})
            if m["caught"]:
                ticks.append(m["catch_tick"])
        med = statistics.median(ticks) if ticks else float("nan")
        print(f"{ratio:6.2f} {len(ticks):4d}/{args.seeds:<2d} {med:7.0f} {max(ticks, default=0):6d}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
