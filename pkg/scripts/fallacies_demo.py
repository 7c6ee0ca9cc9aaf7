"""Classical selection effects: exact values next to simulated ones."""

import argparse
from fractions import Fraction

from abl_lab import fallacies


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bp = fallacies.BerksonParams(Fraction(1, 10), Fraction(1, 10))
    ex = fallacies.berkson_exact(bp)
    mc = fallacies.berkson_mc(fallacies.BerksonParams(0.1, 0.1), args.seed)
    print("berkson  exact A|S, B|S, AB|S:", ex.frac_A, ex.frac_B, ex.frac_AB)
    print(f"         sampled:              {mc.frac_A:.4f} {mc.frac_B:.4f} {mc.frac_AB:.4f}  (N_S = {mc.counts['N_S']})")

    cp = fallacies.CoinParams()
    ce, cm = fallacies.coin_darkening_exact(cp), fallacies.coin_darkening_mc(cp, args.seed)
    print(f"coins    selected {ce.selected_fraction:.3e} exact, {cm.selected_fraction:.3e} sampled")
    print(f"         heads among selected {ce.heads_frequency_in_selected:.4f} exact, {cm.heads_frequency_in_selected:.4f} sampled")

    sh = fallacies.shutter_mc(10, seed=args.seed)
    print(f"shutter  blocked among clangs {sh.blocked_fraction_in_selected}, overall {sh.blocked_fraction_all:.4f}")

    bx = fallacies.three_boxes_mc(seed=args.seed)
    print(
        f"boxes    P(box1 | checked 1, green) = {bx.p_box1_given_checked1_green}, "
        f"P(box2 | checked 2, green) = {bx.p_box2_given_checked2_green}, "
        f"P(box1) = {bx.p_box1_unconditioned:.4f}"
    )


if __name__ == "__main__":
    main()
