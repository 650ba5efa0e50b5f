"""Flatness against relative workspace size on paired instances."""

import argparse
from pathlib import Path

import numpy as np

from fpm.design import OPTIMAL_DESIGN, links_from_design
from fpm.sensitivity import SensitivityConfig, workspace_flatness_curve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=float, nargs="+", default=list(np.round(np.arange(0.05, 0.85, 0.05), 2)))
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/tradeoff.csv")
    args = ap.parse_args()

    links = links_from_design(OPTIMAL_DESIGN)
    cfg = SensitivityConfig(n_instances=args.instances, seed=args.seed)
    curve = workspace_flatness_curve(links, cfg, sorted(args.levels))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("W_rel,flatness_rmse,s_k\n")
        for w, f in curve:
            # link rmse is about sigma, so flatness / sigma is roughly S_k
            fh.write(f"{w!r},{f!r},{f / (cfg.sigma_rel * links.L_c)!r}\n")
            print(f"W_rel {w:.2f}  flatness {f:.3e}  ~S_k {f / (cfg.sigma_rel * links.L_c):.4f}")
    w, f = np.array(curve).T
    slope = np.polyfit(np.log(w), np.log(f), 1)[0]
    print(f"log-log slope {slope:.2f}")


if __name__ == "__main__":
    main()
