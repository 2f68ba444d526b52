import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import constants

from kmsprobe.correlators import (complex_operator_set, derivative_coupled_kernel,
                                  hermitian_set, planck, thermal_kernel_inertial,
                                  vacuum_kernel_accelerated, vacuum_kernel_inertial)
from kmsprobe.detector import (DetectorSetup, DetectorSpec, gaussian_profile,
                               gaussian_switching, point_profile)
from kmsprobe.errors import (ConvergenceError, CoverageError, OutOfDomainError,
                             PreconditionError)
from kmsprobe.geometry import Curvature
from kmsprobe.tables import read_table
from kmsprobe.thermometry import (SWEEP_COLUMNS, acceleration_to_inverse_length,
                                  anti_periodicity_residual, detailed_balance_residual,
                                  edr_beta_estimate, edr_convergence_sweep, export_sweep,
                                  smearing_moments, temperature_to_acceleration,
                                  unruh_temperature, validity_bounds)

GAUSS = gaussian_switching()
TWO_PI = 2 * np.pi


def setup_for(kernel_set, omega=1.0):
    return DetectorSetup(kernel_set, DetectorSpec(omega), GAUSS)


# ---------------------------------------------------------------------------
# EDR estimator

@given(st.floats(0.1, 50.0), st.floats(-5.0, 5.0).filter(lambda w: abs(w) > 1e-3),
       st.floats(-700.0, 0.0))
def test_edr_inverts_a_boltzmann_ratio(beta, omega, log_down):
    est = edr_beta_estimate(np.nan, np.nan, omega, log_p_up=log_down - beta * omega,
                            log_p_down=log_down)
    assert est.beta_hat == pytest.approx(beta, rel=1e-9, abs=1e-9)


def test_edr_from_probabilities_and_errors():
    est = edr_beta_estimate(np.exp(-TWO_PI), 1.0, 1.0, T=3.0)
    assert est.beta_hat == pytest.approx(TWO_PI, rel=1e-14)
    assert est.ratio == pytest.approx(np.exp(-TWO_PI), rel=1e-14)
    assert est.T == 3.0
    with pytest.raises(PreconditionError):
        edr_beta_estimate(0.1, 0.2, 0.0)
    for up, down in ((0.0, 0.1), (0.1, -1.0), (np.nan, 0.1)):
        with pytest.raises(OutOfDomainError):
            edr_beta_estimate(up, down, 1.0)


def test_closed_form_ratio_is_boltzmann():
    # the pointlike accelerated spectrum is a Planck factor at beta = 2 pi / a
    k = vacuum_kernel_accelerated(1.0)
    for w in (0.5, 1.0, 2.0):
        assert k.spectrum(w) / k.spectrum(-w) == pytest.approx(np.exp(-TWO_PI * w), rel=1e-12)
        assert k.spectrum(w) == pytest.approx(planck(w, TWO_PI) / TWO_PI, rel=1e-14)


# ---------------------------------------------------------------------------
# sweeps

def test_accelerated_sweep_converges_to_two_pi():
    sweep = edr_convergence_sweep(setup_for(hermitian_set(vacuum_kernel_accelerated(1.0))),
                                  [5, 10, 20, 40])
    assert sweep.verdict == "converged"
    assert abs(sweep.terminal.beta_hat - TWO_PI) / TWO_PI < 0.02
    assert all(e.converged for e in sweep.estimates)
    assert list(sweep.errors) == sorted(sweep.errors, reverse=True)


def test_thermal_sweep_converges_to_its_beta():
    sweep = edr_convergence_sweep(setup_for(hermitian_set(thermal_kernel_inertial(2.0))),
                                  [5, 10, 20, 40])
    assert sweep.verdict == "converged"
    assert sweep.terminal.beta_hat == pytest.approx(2.0, rel=1e-3)


def test_vacuum_sweep_is_divergent():
    sweep = edr_convergence_sweep(setup_for(hermitian_set(vacuum_kernel_inertial())),
                                  [5, 10, 20, 40])
    assert sweep.verdict == "divergent"
    bh = [e.beta_hat for e in sweep.estimates]
    assert np.all(np.diff(bh) > 0)
    assert not any(e.converged for e in sweep.estimates)


def test_sweep_failure_modes(tmp_path):
    setup = setup_for(hermitian_set(vacuum_kernel_accelerated(1.0)))
    with pytest.raises(ConvergenceError) as info:
        edr_convergence_sweep(setup, [5, 10, 20], tol=1e-6)
    assert len(info.value.errors) == 3
    soft = edr_convergence_sweep(setup, [5, 10, 20], tol=1e-6, raise_on_failure=False)
    assert soft.verdict == "not-converged"
    for bad in ([5, 10], [5, 20, 10]):
        with pytest.raises(PreconditionError):
            edr_convergence_sweep(setup, bad)
    good = edr_convergence_sweep(setup, [5, 10, 20])
    export_sweep(tmp_path / "s.tsv", "acc", good, meta={"a": 1})
    meta, cols, rows = read_table(tmp_path / "s.tsv")
    assert cols == SWEEP_COLUMNS
    assert len(rows) == 3 and rows[-1][cols.index("verdict")] == "converged"


def test_temperature_is_coupling_independent():
    acc = vacuum_kernel_accelerated(1.0)
    sets = {"scalar": hermitian_set(acc),
            "derivative": hermitian_set(derivative_coupled_kernel(acc)),
            "complex": complex_operator_set(acc)}
    for name, cs in sets.items():
        sweep = edr_convergence_sweep(setup_for(cs), [5, 10, 20, 40])
        assert abs(sweep.terminal.beta_hat - TWO_PI) / TWO_PI < 0.02, name


# ---------------------------------------------------------------------------
# KMS checks

@pytest.mark.parametrize("kernel,beta", [(vacuum_kernel_accelerated(1.0), TWO_PI),
                                         (vacuum_kernel_accelerated(2.5), TWO_PI / 2.5),
                                         (thermal_kernel_inertial(2.0), 2.0)])
def test_detailed_balance_holds_at_the_right_beta(kernel, beta):
    grid = np.linspace(-5, 5, 41) / beta
    assert detailed_balance_residual(kernel, beta, grid) < 1e-6
    assert detailed_balance_residual(kernel, beta, grid, method="closed") < 1e-12
    assert detailed_balance_residual(kernel, 1.3 * beta, grid) > 0.5


@given(st.floats(0.2, 10.0))
def test_detailed_balance_on_synthetic_spectra(beta):
    grid = np.linspace(-5, 5, 21) / beta

    def spec(w):
        return np.exp(-0.5 * beta * w) / np.cosh(w)

    assert detailed_balance_residual(spec, beta, grid) < 1e-12
    assert detailed_balance_residual(spec, 2 * beta, grid) > 0.5


def test_detailed_balance_coverage_errors():
    k = vacuum_kernel_accelerated(1.0)
    with pytest.raises(CoverageError):
        detailed_balance_residual(k, TWO_PI, [1.0])
    with pytest.raises(CoverageError):
        detailed_balance_residual(lambda w: np.zeros_like(w), 1.0, [0.5, 1.0])


@pytest.mark.parametrize("kernel,beta", [(vacuum_kernel_accelerated(1.0), TWO_PI),
                                         (thermal_kernel_inertial(2.0), 2.0)])
def test_anti_periodicity(kernel, beta):
    tau = np.linspace(-5, 5, 200)
    assert anti_periodicity_residual(kernel, beta, tau) < 1e-8
    assert anti_periodicity_residual(kernel, 0.8 * beta, tau) > 1e-2
    # a pole inside the strip rules out KMS even where the continuation repeats
    assert anti_periodicity_residual(kernel, 1.5 * beta, tau) == np.inf
    assert anti_periodicity_residual(kernel, 2 * beta, tau) == np.inf
    assert anti_periodicity_residual(kernel, beta * (1 + 1e-13), tau) < 1e-8
    with pytest.raises(PreconditionError):
        anti_periodicity_residual(kernel, 0.0, tau)


def test_anti_periodicity_refuses_the_singular_point():
    with pytest.raises(PreconditionError):
        anti_periodicity_residual(vacuum_kernel_accelerated(1.0), TWO_PI, [-1.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# moments and validity

@given(st.floats(1e-4, 0.1), st.floats(-0.05, 0.05), st.floats(0.1, 10.0))
def test_gaussian_moments_match_closed_form(sigma, X0, a):
    rep = smearing_moments(gaussian_profile(sigma, center=(X0, 0.0, 0.0), n=3), a_i=(a, 0, 0))
    assert rep.weight == pytest.approx(1.0, abs=1e-14)
    assert rep.D == pytest.approx(X0, abs=1e-15)
    assert np.allclose(rep.dipole, [X0, 0, 0], atol=1e-15)
    expected = sigma ** 2 * np.eye(3)
    expected[0, 0] += X0 ** 2
    assert np.allclose(rep.quadrupole, expected, rtol=1e-12, atol=1e-18)
    # the rule reproduces the dipole up to rounding of order 1e-17 absolute,
    # which enters adx linearly in X0
    assert rep.adx == pytest.approx((a * X0) ** 2, rel=1e-10, abs=2e-15 * a * a * abs(X0) + 1e-30)
    assert rep.bound_dipole == pytest.approx(abs(a * X0), rel=1e-10, abs=1e-15)


def test_centred_profile_has_no_dipole_bound():
    rep = smearing_moments(gaussian_profile(0.01, n=4), a_i=(1, 0, 0))
    assert rep.adx < 1e-30 and rep.bound_dipole < 1e-15
    v = validity_bounds(rep, (1, 0, 0))
    assert v.passed and v.margins["adx"] > 1e20
    assert "verdict: pass" in v.lines()


def test_quadrupole_bound_uses_curvature():
    rep = smearing_moments(gaussian_profile(0.2, n=3))
    r = np.diag([1.0, -0.5, -0.5])
    assert validity_bounds(rep, curvature=r).bound_quadrupole == pytest.approx(0.0, abs=1e-15)
    r = np.diag([1.0, 0.0, 0.0])
    v = validity_bounds(rep, curvature=Curvature(r0i0j=r), threshold=1e-3)
    assert v.bound_quadrupole == pytest.approx(0.04, rel=1e-12)
    assert not v.passed


def test_si_boundary_case():
    # a = 1e20 m/s^2 with a detector offset of 1 mm gives a X0 / c^2 of order 1
    a = acceleration_to_inverse_length(1e20)
    for X0, ok in ((1e-3, False), (1e-6, True)):
        rep = smearing_moments(point_profile(center=(X0, 0, 0)), a_i=(a, 0, 0))
        v = validity_bounds(rep, (a, 0, 0))
        assert v.adx == pytest.approx((1e20 * X0 / constants.c ** 2) ** 2, rel=1e-12)
        assert v.passed is ok


# ---------------------------------------------------------------------------
# SI conversions

def test_si_temperature_against_scipy_constants():
    ref = constants.hbar * 1e20 / (TWO_PI * constants.c * constants.k)
    assert unruh_temperature(1e20, "SI") == pytest.approx(ref, rel=1e-12)
    assert unruh_temperature(1e20, "SI") == pytest.approx(0.405, rel=5e-3)
    assert unruh_temperature(1.0) == pytest.approx(1 / TWO_PI)
    assert acceleration_to_inverse_length(constants.c ** 2) == pytest.approx(1.0)


@given(st.floats(1e-3, 1e30))
def test_si_round_trip(a):
    for units in ("natural", "SI"):
        back = temperature_to_acceleration(unruh_temperature(a, units), units)
        assert back == pytest.approx(a, rel=1e-12)


def test_si_domain_errors():
    for f in (unruh_temperature, temperature_to_acceleration):
        with pytest.raises(OutOfDomainError):
            f(0.0)
        with pytest.raises(ValueError):
            f(1.0, units="cgs")
