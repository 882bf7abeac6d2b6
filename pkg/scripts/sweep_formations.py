"""Circle and chain formation sweeps: convergence rate and ticks to converge."""
import argparse
import json
import statistics

from agentsim.scenarios.swarm import chain_config, circle_config
from agentsim.server.engine import run


def _summary(label, metrics) -> None:
    ticks = [m["converged_tick"] for m in metrics if m["converged"]]
    med = statistics.median(ticks) if ticks else float("nan")
    worst = max(m["error"] for m in metrics)
    print(f"{label:>10} {len(ticks):3d}/{len(metrics):<3d} median tick {med:6.0f}  worst final error {worst:.4f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--circle-sizes", type=int, nargs="+", default=[6, 8])
    ap.add_argument("--chain-sizes", type=int, nargs="+", default=[5])
    ap.add_argument("--max-ticks", type=int, default=20000)
    ap.add_argument("--json")
    args = ap.parse_args()

    rows = []
    for n in args.circle_sizes:
        ms = [run(circle_config(s, n=n, max_ticks=args.max_ticks)).metrics for s in range(args.seeds)]
        rows += [{"shape": "circle", "n": n, "seed": s, **m} for s, m in enumerate(ms)]
        _summary(f"circle {n}", ms)
    for n in args.chain_sizes:
        ms = [run(chain_config(s, n=n, max_ticks=args.max_ticks)).metrics for s in range(args.seeds)]
        rows += [{"shape": "chain", "n": n, "seed": s, **m} for s, m in enumerate(ms)]
        _summary(f"chain {n}", ms)
        print(f"{'':>10} deviation never grew in {sum(m['monotone'] for m in ms)}/{len(ms)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1, default=str)


if __name__ == "__main__":
    main()
