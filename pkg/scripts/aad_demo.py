"""The three AAD ensembles, with and without culling on the final outcome."""

import argparse

from abl_lab import ablengine, ensemble, protocolfile, qcore


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    for name in ("aad_xx.protocol", "aad_zz.protocol"):
        p = protocolfile.load_protocol(name)
        post = ensemble.run_ensemble(p, args.n, args.seed)
        free = ensemble.run_ensemble(p, args.n, args.seed, postselect=False)
        print(f"{name}: {p.describe()}")
        for seq, exact in ablengine.abl_distribution(p).items():
            print(
                f"  middle {seq[0]:<4} exact {exact:.4f}   culled {post.ratio(seq):.4f}"
                f"   unculled {free.ratio(seq):.4f}  (N_a = {free.n_pre})"
            )
        print()

    # a third middle observable next to the two AAD choices
    Z, X, Y = (qcore.builtin_observable(k) for k in ("pauli_z", "pauli_x", "pauli_y"))
    rep = ablengine.aad_compare(2, Z, X, Y, "z+", "x+")
    for b in rep.branches:
        print(f"{b.ensemble:<28} post-selected {b.conditional}   p(middle | a) {b.marginal_without_postselection}")
    for f in rep.flags:
        print("note:", f)


if __name__ == "__main__":
    main()
