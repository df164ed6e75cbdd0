"""BPA vs ICP running-min error curves (the default benchmark) written as CSV.

Usage: python3 scripts/run_fig7.py [--trials 50] [--seed 0] [--shape box] [--out fig7.csv]
"""
import argparse
import time

from bpa.bench import TrialConfig, run_benchmark


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", default="box")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="fig7.csv")
    args = p.parse_args()

    cfg = TrialConfig(n_trials=args.trials, seed=args.seed, shape=args.shape)
    t0 = time.time()
    curves = run_benchmark(cfg, jobs=args.jobs)
    with open(args.out, "w") as fh:
        fh.write(curves.to_csv())

    print(f"{cfg.n_trials} trials, {curves.n_degenerate} degenerate, {time.time() - t0:.1f}s -> {args.out}")
    print(" iter   bpa_rot   icp_rot   ratio   bpa_pos   icp_pos")
    for i in range(curves.iterations):
        r = curves.bpa_rot[i] / curves.icp_rot[i]
        print(f"{i + 1:5d} {curves.bpa_rot[i]:9.4f} {curves.icp_rot[i]:9.4f} {r:7.3f} "
              f"{curves.bpa_pos[i]:9.5f} {curves.icp_pos[i]:9.5f}")


if __name__ == "__main__":
    main()
