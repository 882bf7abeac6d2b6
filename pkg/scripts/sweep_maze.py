"""Wall-follower sweep over generated mazes of several sizes."""
import argparse
import json

from agentsim.scenarios.maze import BAND_DELTA, maze_config
from agentsim.server.engine import run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 10, 15])
    ap.add_argument("--mazes", type=int, default=10)
    ap.add_argument("--max-ticks", type=int, default=50000)
    ap.add_argument("--json")
    args = ap.parse_args()

    rows = []
    print(f"{'n':>3} {'solved':>7} {'mean exit':>10} {'band excursion':>15}")
    for n in args.sizes:
        solved = []
        worst = 0.0
        for seed in range(args.mazes):
            m = run(maze_config(seed, n=n, max_ticks=args.max_ticks)).metrics
            rows.append({"n": n, "seed": seed, **m})
            worst = max(worst, m["band_excursion"])
            if m["solved"]:
                solved.append(m["exit_tick"])
        mean = sum(solved) / len(solved) if solved else float("nan")
        print(f"{n:3d} {len(solved):4d}/{args.mazes:<2d} {mean:10.0f} {worst:9.3f} (<= {BAND_DELTA})")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
