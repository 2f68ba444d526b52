"""Temperature estimation from excitation/deexcitation ratios, KMS checks,
smearing-moment validity bounds and SI conversions.

Everything is in natural units except the explicit SI helpers at the bottom.
"""

from dataclasses import dataclass, field

import numpy as np

from .correlators import CorrelatorKernel
from .errors import (ConvergenceError, CoverageError, OutOfDomainError,
                     PreconditionError)
from .fourier import kernel_fourier
from .tables import write_table


# ---------------------------------------------------------------------------
# EDR temperature

@dataclass(frozen=True)
class EdrEstimate:
    beta_hat: float
    ratio: float
    omega: float
    T: float = np.nan
    converged: bool = False
    log_ratio: float = np.nan


def edr_beta_estimate(p_up, p_down, omega, T=np.nan, log_p_up=None, log_p_down=None):
    """beta_hat = -log(p_up / p_down) / omega.

    Log-probabilities may be supplied instead of (or in addition to) the
    probabilities themselves when these underflow.
    """
    if omega == 0:
        raise PreconditionError("degenerate gap: omega = 0 leaves beta undetermined")
    if log_p_up is None:
        if not p_up > 0:
            raise OutOfDomainError(f"p_up must be positive, got {p_up!r}")
        log_p_up = np.log(p_up)
    if log_p_down is None:
        if not p_down > 0:
            raise OutOfDomainError(f"p_down must be positive, got {p_down!r}")
        log_p_down = np.log(p_down)
    if not (np.isfinite(log_p_up) and np.isfinite(log_p_down)):
        raise OutOfDomainError("probabilities must be positive and finite")
    log_ratio = float(log_p_up - log_p_down)
    ratio = float(np.exp(log_ratio))
    return EdrEstimate(beta_hat=-log_ratio / omega, ratio=ratio, omega=float(omega),
                       T=float(T), log_ratio=log_ratio)


def edr_from_response(result):
    return edr_beta_estimate(result.p_up, result.p_down, result.omega, result.T,
                             log_p_up=result.log_p_up, log_p_down=result.log_p_down)


@dataclass(frozen=True)
class SweepResult:
    estimates: tuple
    verdict: str  # "converged" | "not-converged" | "divergent"
    beta_nominal: float
    errors: tuple = ()
    responses: tuple = field(default=(), compare=False)

    @property
    def terminal(self):
        return self.estimates[-1]


def edr_convergence_sweep(setup, T_list, tol=0.02, raise_on_failure=True, route=None):
    """beta_hat(T) over increasing T with a convergence verdict.

    Finite beta_nominal: converged when the terminal relative error is below
    `tol` and the error sequence does not increase over the last three points.
    Infinite beta_nominal (vacuum): "divergent" when beta_hat strictly
    increases with T, which is the expected behaviour.
    """
    T_list = [float(t) for t in T_list]
    if len(T_list) < 3 or np.any(np.diff(T_list) <= 0):
        raise PreconditionError("T_list must be strictly increasing with at least 3 points")
    beta = setup.beta_nominal
    responses = [setup.response(T, route=route) for T in T_list]
    est = [edr_from_response(r) for r in responses]
    bh = np.array([e.beta_hat for e in est])
    if np.isfinite(beta):
        errs = np.abs(bh - beta) / beta
        tail = errs[-3:]
        ok = errs[-1] < tol and np.all(np.diff(tail) <= 1e-12 * max(tail.max(), 1e-300))
        verdict = "converged" if ok else "not-converged"
    else:
        errs = np.full(bh.shape, np.inf)
        verdict = "divergent" if np.all(np.diff(bh) > 0) else "not-converged"
    if verdict == "not-converged" and raise_on_failure:
        raise ConvergenceError(
            f"EDR sweep did not converge to beta = {beta:g}: relative errors "
            + ", ".join(f"{e:.3e}" for e in errs), errors=list(errs))
    flag = verdict == "converged"
    est = tuple(EdrEstimate(e.beta_hat, e.ratio, e.omega, e.T, flag, e.log_ratio) for e in est)
    return SweepResult(estimates=est, verdict=verdict, beta_nominal=beta,
                       errors=tuple(float(x) for x in errs), responses=tuple(responses))


SWEEP_COLUMNS = ["label", "omega", "T", "p_up", "p_down", "log_p_up", "log_p_down",
                 "beta_hat", "beta_nominal", "rel_error", "verdict"]


def sweep_rows(label, sweep):
    rows = []
    for e, r, err in zip(sweep.estimates, sweep.responses, sweep.errors):
        rows.append([label, e.omega, e.T, r.p_up, r.p_down, r.log_p_up, r.log_p_down,
                     e.beta_hat, sweep.beta_nominal, err, sweep.verdict])
    return rows


def export_sweep(path, label, sweep, meta=None):
    write_table(path, SWEEP_COLUMNS, sweep_rows(label, sweep), meta=meta)


# ---------------------------------------------------------------------------
# KMS checks

def _spectrum_values(source, omega, method):
    if isinstance(source, CorrelatorKernel):
        val, err = kernel_fourier(source, omega, method=method, return_error=True)
        return np.asarray(val), np.asarray(err)
    val = np.asarray(source(omega), dtype=complex)
    return val, np.zeros(val.shape)


def detailed_balance_residual(kernel, beta, omega_grid, swapped=None, method="damped",
                              floor=1e-30):
    """Relative mismatch of the two sides of w~(w) = exp(-beta w) w~_sw(-w).

    Each grid point contributes |lhs - rhs| / max(|lhs|, |rhs|, floor * max |w~|),
    i.e. the error relative to the larger side, so exponentially small
    spectra on one side do not amplify quadrature noise on the other.
    `kernel` and `swapped` are CorrelatorKernels or callables returning w~.
    """
    omega = np.asarray(omega_grid, dtype=float).ravel()
    if omega.size < 2 or not np.all(np.isfinite(omega)):
        raise CoverageError("omega grid must hold at least two finite frequencies")
    swapped = kernel if swapped is None else swapped
    both = np.concatenate([omega, -omega])
    w, werr = _spectrum_values(kernel, both, method)
    w_plus, w_minus = w[:omega.size], w[omega.size:]
    if swapped is kernel:
        s_minus, serr = w_minus, werr[omega.size:]
    else:
        s_minus, serr = _spectrum_values(swapped, -omega, method)
    scale = np.max(np.abs(w))
    if scale == 0:
        raise CoverageError("spectrum vanishes on the whole grid")
    with np.errstate(over="ignore", invalid="ignore"):
        boltz = np.exp(-beta * omega)
        rhs = boltz * s_minus
    denom = np.maximum(np.maximum(np.abs(w_plus), np.abs(rhs)), floor * scale)
    resid = np.abs(w_plus - rhs) / denom
    quad = (werr[:omega.size] + boltz * serr) / denom
    if np.any(quad > 1e-2):
        raise CoverageError(
            f"quadrature error {quad.max():.2e} too large to resolve detailed balance")
    return float(resid.max())


def anti_periodicity_residual(kernel, beta, tau_grid, swapped=None):
    """max |w(tau - i beta) - w_sw(-tau)| / |w_sw(-tau)| over tau_grid.

    The KMS condition also needs w analytic in 0 < -Im z < beta. A trial beta
    beyond the kernel's strip therefore gives an infinite residual, even where
    the meromorphic continuation happens to repeat (at multiples of the
    imaginary period, for instance).
    """
    if not beta > 0:
        raise PreconditionError("beta must be positive")
    if beta > kernel.strip * (1 + 1e-12):
        return float("inf")
    swapped = kernel if swapped is None else swapped
    tau = np.asarray(tau_grid, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        ref = swapped.eval(-tau)
    if not np.all(np.isfinite(ref)) or np.any(ref == 0):
        raise PreconditionError("tau grid hits a singularity of the reference kernel")
    cont = kernel.continuation(tau - 1j * beta)
    with np.errstate(invalid="ignore"):
        resid = np.abs(cont - ref) / np.abs(ref)
    resid = np.where(np.isfinite(resid), resid, np.inf)
    return float(resid.max())


# ---------------------------------------------------------------------------
# smearing moments and validity

@dataclass(frozen=True)
class MomentReport:
    weight: complex
    dipole: np.ndarray
    quadrupole: np.ndarray
    D: complex
    adx: float = np.nan
    bound_dipole: float = np.nan
    bound_quadrupole: float = np.nan


def smearing_moments(profile, a_i=None, r0i0j=None):
    """Weight, dipole F^i = int xi^i F and quadrupole F^ij = int xi^i xi^j F.

    D is the X component of the dipole; adx = a^2 |D|^2 with a = |a_i| when the
    acceleration is supplied. Bounds are |a_i F^i| and |R_0i0j F^ij|.
    """
    x = np.asarray(profile.nodes, dtype=float)
    w = np.asarray(profile.weights)
    weight = complex(w.sum())
    dip = w @ x
    quad = np.einsum("k,ki,kj->ij", w, x, x)
    if not (np.all(np.isfinite(dip)) and np.all(np.isfinite(quad)) and np.isfinite(weight)):
        raise OutOfDomainError("profile moments are not finite")
    quad = 0.5 * (quad + quad.T)
    a = np.zeros(3) if a_i is None else np.asarray(a_i, dtype=float)
    r = np.zeros((3, 3)) if r0i0j is None else np.asarray(r0i0j, dtype=float)
    D = complex(dip[0])
    return MomentReport(
        weight=weight,
        dipole=np.real_if_close(dip),
        quadrupole=np.real_if_close(quad),
        D=D,
        adx=float(np.linalg.norm(a) ** 2 * abs(D) ** 2),
        bound_dipole=float(abs(a @ dip)),
        bound_quadrupole=float(abs(np.sum(r * quad))),
    )


@dataclass(frozen=True)
class ValidityReport:
    bound_dipole: float
    bound_quadrupole: float
    adx: float
    threshold: float
    passed: bool
    margins: dict
    notes: tuple = ()

    def lines(self):
        out = [f"threshold: {self.threshold:.6g}",
               f"bound_dipole: {self.bound_dipole:.6g}",
               f"bound_quadrupole: {self.bound_quadrupole:.6g}",
               f"adx: {self.adx:.6g}",
               f"verdict: {'pass' if self.passed else 'fail'}"]
        out += [f"margin_{k}: {v:.6g}" for k, v in self.margins.items()]
        out += [f"note: {n}" for n in self.notes]
        return out


def validity_bounds(report, a_i=None, curvature=None, threshold=1e-2):
    """Check the dipole/quadrupole smallness conditions against `threshold`.

    `curvature` is a 3x3 R_0i0j matrix or a geometry.Curvature. The margin
    of each bound is threshold / value (above 1 means the bound holds).
    """
    a = np.zeros(3) if a_i is None else np.asarray(a_i, dtype=float)
    if curvature is None:
        r = np.zeros((3, 3))
    elif hasattr(curvature, "at"):
        r = curvature.at(0.0)[0]
    else:
        r = np.asarray(curvature, dtype=float)
    dip = np.asarray(report.dipole)
    quad = np.asarray(report.quadrupole)
    bd = float(abs(a @ dip))
    bq = float(abs(np.sum(r * quad)))
    adx = float(np.linalg.norm(a) ** 2 * abs(report.D) ** 2)
    vals = {"dipole": bd, "quadrupole": bq, "adx": adx}
    margins = {k: (np.inf if v == 0 else threshold / v) for k, v in vals.items()}
    passed = all(v < threshold for v in vals.values())
    notes = ("displacements along y and z are not constrained by the acceleration bound",)
    return ValidityReport(bd, bq, adx, threshold, passed, margins, notes)


# ---------------------------------------------------------------------------
# SI conversions (SI 2019 exact defining constants)

PLANCK_H = 6.62607015e-34      # J s
SPEED_OF_LIGHT = 299792458.0   # m / s
BOLTZMANN = 1.380649e-23       # J / K
HBAR = PLANCK_H / (2 * np.pi)


def unruh_temperature(a, units="natural"):
    """a / 2 pi in natural units, hbar a / (2 pi c k_B) in kelvin for a in m/s^2."""
    if not a > 0:
        raise OutOfDomainError("acceleration must be positive")
    if units == "natural":
        return a / (2 * np.pi)
    if units == "SI":
        return HBAR * a / (2 * np.pi * SPEED_OF_LIGHT * BOLTZMANN)
    raise ValueError(f"unknown unit system {units!r}")


def temperature_to_acceleration(T, units="natural"):
    if not T > 0:
        raise OutOfDomainError("temperature must be positive")
    if units == "natural":
        return 2 * np.pi * T
    if units == "SI":
        return 2 * np.pi * SPEED_OF_LIGHT * BOLTZMANN * T / HBAR
    raise ValueError(f"unknown unit system {units!r}")


def acceleration_to_inverse_length(a_si):
    """Proper acceleration in m/s^2 as the inverse length a / c^2 in 1/m."""
    return a_si / SPEED_OF_LIGHT ** 2
