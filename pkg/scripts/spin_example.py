"""Closed form, full-chain oracle and Monte Carlo side by side for the spin protocol."""

import argparse

from abl_lab import ablengine, ensemble, fullchain, protocolfile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--file", default="spin_zxyz.protocol")
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = protocolfile.load_protocol(args.file)
    abl = ablengine.abl_distribution(p)
    oracle = fullchain.oracle_conditional(p)
    stats = ensemble.run_ensemble(p, args.n, args.seed)
    print(p.describe())
    print(f"N = {stats.n_total}, N_a = {stats.n_pre}, N_ab = {stats.n_selected}\n")
    print(f"{'sequence':<14}{'closed form':>14}{'full chain':>14}{'monte carlo':>14}")
    for seq, v in abl.items():
        print(f"{','.join(seq) or '()':<14}{v:>14.10f}{oracle[seq]:>14.10f}{stats.ratio(seq):>14.6f}")


if __name__ == "__main__":
    main()
