"""Direct double-integral route versus Fourier route for every catalog kernel.

Prints the worst relative disagreement of the two transition probabilities
and the time each route takes.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from kmsprobe.correlators import (RindlerBackground, complex_operator_set,
                                  derivative_coupled_kernel, hermitian_set, smeared_correlator,
                                  thermal_kernel_inertial, vacuum_kernel_accelerated,
                                  vacuum_kernel_inertial)
from kmsprobe.detector import DetectorSetup, DetectorSpec, gaussian_profile, gaussian_switching
from kmsprobe.tables import write_table


def kernel_sets():
    acc = vacuum_kernel_accelerated(1.0)
    return {
        "vacuum_inertial": hermitian_set(vacuum_kernel_inertial()),
        "vacuum_accelerated": hermitian_set(acc),
        "thermal_inertial": hermitian_set(thermal_kernel_inertial(2.0)),
        "derivative": hermitian_set(derivative_coupled_kernel(acc)),
        "complex": complex_operator_set(acc),
        "smeared": smeared_correlator(RindlerBackground(1.0), gaussian_profile(0.01, n=3)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omegas", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--T", type=float, nargs="+", default=[10.0, 30.0])
    ap.add_argument("--out", type=Path, default=Path("results/scripts/route_comparison"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    chi = gaussian_switching()
    rows = []
    print(f"{'kernel':>20} {'omega':>6} {'T':>6} {'rel diff up':>12} {'rel diff down':>14} "
          f"{'t direct':>9} {'t fourier':>9}")
    for name, cs in kernel_sets().items():
        for om in args.omegas:
            setup = DetectorSetup(cs, DetectorSpec(om), chi)
            for T in args.T:
                t0 = time.perf_counter()
                a = setup.response(T, route="direct")
                t1 = time.perf_counter()
                b = setup.response(T, route="fourier")
                t2 = time.perf_counter()
                du = abs(np.expm1(a.log_p_up - b.log_p_up))
                dd = abs(np.expm1(a.log_p_down - b.log_p_down))
                rows.append([name, om, T, a.p_up, b.p_up, du, a.p_down, b.p_down, dd])
                print(f"{name:>20} {om:6g} {T:6g} {du:12.2e} {dd:14.2e} "
                      f"{t1 - t0:9.3f} {t2 - t1:9.3f}")
    write_table(args.out / "routes.tsv",
                ["kernel", "omega", "T", "p_up_direct", "p_up_fourier", "rel_diff_up",
                 "p_down_direct", "p_down_fourier", "rel_diff_down"], rows)


if __name__ == "__main__":
    main()
