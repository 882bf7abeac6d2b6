"""Mushroom picking in both modes.

Mode A runs until the forest is empty and reports crops and completion
ticks. Mode B then reruns the same seeds for ten times the mean completion
tick and counts thefts per agent and per victim home. Mode B is long; use
``--seeds`` and ``--horizon`` to keep it short while exploring.
"""
import argparse
import json
import statistics

from agentsim.scenarios.mushrooms import MushroomParams, mushroom_config
from agentsim.server.engine import run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--mushrooms", type=int, default=40)
    ap.add_argument("--horizon", type=int, help="mode B length; default 10x the mode A mean")
    ap.add_argument("--skip-b", action="store_true")
    ap.add_argument("--json")
    args = ap.parse_args()

    rows = []
    done = []
    print("mode A")
    for seed in range(args.seeds):
        m = run(mushroom_config(seed, MushroomParams(mushrooms=args.mushrooms))).metrics
        rows.append({"mode": "A", "seed": seed, **m})
        done.append(m["completion_tick"])
        print(f"  seed {seed:2d}: done at {m['completion_tick']}, crop {m['crop']}, thefts {m['thefts']}")
    mean = statistics.mean(t for t in done if t is not None)
    print(f"  mean completion tick {mean:.0f}")

    if not args.skip_b:
        horizon = args.horizon or int(round(10 * mean))
        print(f"mode B, horizon {horizon}")
        params = MushroomParams(mushrooms=args.mushrooms, mode="B", max_ticks=horizon)
        for seed in range(args.seeds):
            m = run(mushroom_config(seed, params)).metrics
            rows.append({"mode": "B", "seed": seed, **m})
            print(f"  seed {seed:2d}: thefts {m['thefts_by_agent']}, most from one home {m['max_thefts_same_home']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
