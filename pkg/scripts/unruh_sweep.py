"""EDR temperature of a uniformly accelerated detector versus interaction time.

Sweeps T for several gaps and accelerations and prints beta_hat against the
KMS value 2 pi / a; the inertial vacuum is included as the divergent control.
"""

import argparse
from pathlib import Path

import numpy as np

from kmsprobe.correlators import hermitian_set, vacuum_kernel_accelerated, vacuum_kernel_inertial
from kmsprobe.detector import DetectorSetup, DetectorSpec, gaussian_switching
from kmsprobe.thermometry import edr_convergence_sweep, export_sweep


def run(accelerations, omegas, T_list, out):
    chi = gaussian_switching()
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'a':>6} {'omega':>6} " + " ".join(f"{'T=' + format(T, 'g'):>10}" for T in T_list)
          + f" {'2pi/a':>10} verdict")
    for a in accelerations:
        for om in omegas:
            setup = DetectorSetup(hermitian_set(vacuum_kernel_accelerated(a)), DetectorSpec(om), chi)
            sweep = edr_convergence_sweep(setup, T_list, raise_on_failure=False)
            export_sweep(out / f"unruh_a{a:g}_omega{om:g}.tsv", "accelerated", sweep,
                         meta={"a": a, "omega": om})
            print(f"{a:6g} {om:6g} " + " ".join(f"{e.beta_hat:10.5f}" for e in sweep.estimates)
                  + f" {2 * np.pi / a:10.5f} {sweep.verdict}")
    setup = DetectorSetup(hermitian_set(vacuum_kernel_inertial()), DetectorSpec(1.0), chi)
    sweep = edr_convergence_sweep(setup, T_list)
    export_sweep(out / "vacuum_inertial.tsv", "inertial", sweep)
    print(f"{'inert':>6} {1.0:6g} " + " ".join(f"{e.beta_hat:10.4g}" for e in sweep.estimates)
          + f" {'inf':>10} {sweep.verdict}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--omegas", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--T", type=float, nargs="+", default=[5.0, 10.0, 20.0, 40.0, 80.0])
    ap.add_argument("--out", type=Path, default=Path("results/scripts/unruh_sweep"))
    args = ap.parse_args()
    run(args.a, args.omegas, args.T, args.out)


if __name__ == "__main__":
    main()
