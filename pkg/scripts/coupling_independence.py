"""EDR temperature for different couplings, operators and mu presets.

The accelerated detector should read 2 pi / a whatever operator it couples
to: scalar, derivative along each FW direction, complex, and a smeared
operator with a complex profile for which all four correlators differ.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from kmsprobe.correlators import (RindlerBackground, complex_operator_set,
                                  derivative_coupled_kernel, hermitian_set, smeared_correlator,
                                  vacuum_kernel_accelerated)
from kmsprobe.detector import (DetectorSetup, DetectorSpec, MU_PRESETS, gaussian_profile,
                               gaussian_switching, mu_preset)
from kmsprobe.tables import write_table
from kmsprobe.thermometry import edr_convergence_sweep

T_LIST = [5.0, 10.0, 20.0, 40.0]


def pipelines(a):
    acc = vacuum_kernel_accelerated(a)
    bg = RindlerBackground(a)
    out = {"scalar": hermitian_set(acc), "complex": complex_operator_set(acc)}
    for label, n in (("d/dtau", (1, 0, 0, 0)), ("d/dX", (0, 1, 0, 0)), ("d/dy", (0, 0, 1, 0)),
                     ("mixed", (1, 0.5, 0, 0.5))):
        out[f"derivative {label}"] = hermitian_set(derivative_coupled_kernel(bg, n))
    prof = gaussian_profile(0.01 / a, center=(0.005 / a, 0, 0), n=3)
    prof = replace(prof, weights=prof.weights * np.exp(60j * a * prof.nodes[:, 0]),
                   label="twisted")
    out["smeared twisted"] = smeared_correlator(bg, prof)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--out", type=Path, default=Path("results/scripts/coupling_independence"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    beta = 2 * np.pi / args.a
    rows = []
    print(f"{'pipeline':>22} {'mu':>13} {'beta_hat':>12} {'rel err':>10} verdict")
    for name, cs in pipelines(args.a).items():
        for mu in MU_PRESETS:
            mu_in, mu_ni = mu_preset(mu, seed=7)
            setup = DetectorSetup(cs, DetectorSpec(args.omega, mu_in=mu_in, mu_ni=mu_ni),
                                  gaussian_switching())
            sweep = edr_convergence_sweep(setup, T_LIST, raise_on_failure=False)
            bh = sweep.terminal.beta_hat
            rows.append([name, mu, bh, abs(bh - beta) / beta, sweep.verdict])
            print(f"{name:>22} {mu:>13} {bh:12.8f} {abs(bh - beta) / beta:10.2e} "
                  f"{sweep.verdict}")
    write_table(args.out / "couplings.tsv", ["pipeline", "mu", "beta_hat", "rel_error",
                                             "verdict"], rows,
                meta={"a": args.a, "omega": args.omega})


if __name__ == "__main__":
    main()
