#!/usr/bin/env python3
"""Effective resonator damping from the SSET, and the resulting attractors.

Top panel: gamma_sset versus scaled amplitude for a few couplings, with the
external loss level marked; limit cycles sit at the crossings.  Bottom
panel: stable (solid) and unstable (open) cycle occupations versus coupling.

Usage:
    python scripts/plot_damping_curves.py --ej-ratio 0.0625 --out damping.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ssetdyn import meanfield as mf
from ssetdyn.model import PaperParams, reduce


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ej-ratio", type=float, default=1 / 16)
    ap.add_argument("--lams", type=float, nargs="+", default=[0.02, 0.04, 0.056])
    ap.add_argument("--lam-scan-max", type=float, default=0.12)
    ap.add_argument("--out", default="damping_curves.png")
    args = ap.parse_args()

    fig, (ax_damp, ax_cycles) = plt.subplots(2, 1, figsize=(7, 8))

    for lam in args.lams:
        params = reduce(PaperParams(args.ej_ratio, -0.1, 1.0, 5e-4, lam))
        u = np.linspace(1e-3, 12.0, 400)
        curve = mf.damping_curve(params, u)
        ax_damp.plot(curve.u, curve.gamma_sset / params.gamma_ext,
                     label=f"lam = {lam}")
    ax_damp.axhline(-1.0, color="k", lw=0.8, ls="--",
                    label="-gamma_ext (cycle condition)")
    ax_damp.set_xlabel("scaled amplitude u = sqrt(n omega / pi)")
    ax_damp.set_ylabel("gamma_sset / gamma_ext")
    ax_damp.set_ylim(-8, 4)
    ax_damp.legend(fontsize=8)

    lams = np.linspace(0.004, args.lam_scan_max, 80)
    for lam in lams:
        params = reduce(PaperParams(args.ej_ratio, -0.1, 1.0, 5e-4, lam))
        cycles = mf.limit_cycles(params)
        for n, stable in cycles.roots:
            ax_cycles.plot(lam, n, "o", ms=3,
                           mfc="C0" if stable else "none", mec="C0")
        if cycles.includes_fixed_point:
            ax_cycles.plot(lam, 0.0, "s", ms=3, mfc="C1", mec="C1")
    ax_cycles.set_xlabel("coupling lambda")
    ax_cycles.set_ylabel("cycle occupation n")

    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
