"""Detailed-balance and anti-periodicity residuals as functions of the trial beta.

Both residuals vanish only at the state's own inverse temperature; the scan
shows how sharply each check discriminates.
"""

import argparse
from pathlib import Path

import numpy as np

from kmsprobe.correlators import thermal_kernel_inertial, vacuum_kernel_accelerated
from kmsprobe.tables import write_table
from kmsprobe.thermometry import anti_periodicity_residual, detailed_balance_residual


def scan(kernel, beta, factors):
    omega = np.linspace(-5, 5, 41) / beta
    tau = np.linspace(-5, 5, 200)
    rows = []
    for f in factors:
        db = detailed_balance_residual(kernel, f * beta, omega)
        db_closed = detailed_balance_residual(kernel, f * beta, omega, method="closed")
        ap = anti_periodicity_residual(kernel, f * beta, tau)
        rows.append([f, f * beta, db, db_closed, ap])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/scripts/kms_residuals"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    factors = [0.5, 0.8, 0.9, 0.99, 1.0, 1.01, 1.1, 1.25, 2.0]
    cols = ["factor", "beta_trial", "detailed_balance", "detailed_balance_closed",
            "anti_periodicity"]
    for name, kernel, beta in (("accelerated", vacuum_kernel_accelerated(1.0), 2 * np.pi),
                               ("thermal", thermal_kernel_inertial(2.0), 2.0)):
        rows = scan(kernel, beta, factors)
        write_table(args.out / f"{name}.tsv", cols, rows, meta={"kernel": name, "beta": beta})
        print(f"{name} (beta = {beta:.6g})")
        print(f"  {'beta/beta0':>10} {'DB':>10} {'DB closed':>10} {'AP':>10}")
        for f, _, db, dbc, apr in rows:
            print(f"  {f:10.3g} {db:10.2e} {dbc:10.2e} {apr:10.2e}")


if __name__ == "__main__":
    main()
