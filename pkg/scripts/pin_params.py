"""Regenerate tests/data/pinned_params.json.

For each k in (3, 4), each s_X in (1e7, 1e8, 1e9, 1e10, 1e13) and each of
methods M1 and M2, anneal the protocol parameters and store the optimum.
The acceptance suite evaluates rates at these fixed points instead of
re-optimizing.

    python scripts/pin_params.py [--budget 50000] [--seed 0]
"""
import argparse
import json
from pathlib import Path

from finitekey.optimize import optimize_rate

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "pinned_params.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budget", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cells = []
    for k in (3, 4):
        for s_X in (1e7, 1e8, 1e9, 1e10, 1e13):
            for method in ("M1", "M2"):
                res = optimize_rate(k, s_X, method, evaluations=args.budget, seed=args.seed)
                p = res.params
                cells.append({"k": k, "s_X": s_X, "optimized_for": method, "R": res.result.R,
                              "mus": list(p.mus), "p_mu": list(p.p_mu), "p_X": p.p_X})
                print(k, s_X, method, res.result.R, flush=True)
    doc = {"budget": args.budget, "seed": args.seed, "cells": cells}
    OUT.write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
