import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from kmsprobe.correlators import (CorrelatorKernel, CorrelatorSet, hermitian_set,
                                  thermal_kernel_inertial, vacuum_kernel_accelerated,
                                  vacuum_kernel_inertial, zero_kernel)
from kmsprobe.detector import (DetectorSetup, DetectorSpec, PerturbativityWarning,
                               ResponseResult, bump_switching, effective_wightman,
                               export_responses, gaussian_profile, gaussian_switching,
                               grid_profile, mu_preset, point_profile, response_batch,
                               switching_autocorrelation, transition_probability_direct,
                               transition_probability_fourier)
from kmsprobe.errors import NumericalError, PerturbativityError, PreconditionError
from kmsprobe.tables import read_table

GAUSS = gaussian_switching()
BUMP = bump_switching()


def pole_kernel():
    # 1 / (1 + i z)^2: analytic and bounded for Im z < 1, regular on the real
    # axis, transform 2 pi |w| exp(w) for w < 0 and 0 for w > 0
    return CorrelatorKernel(fn=lambda z: 1.0 / (1.0 + 1j * z) ** 2, strip=np.inf, label="pole",
                            spectrum=lambda w: np.where(w < 0, -2 * np.pi * w * np.exp(w), 0.0))


def pole_oracle(omega, T, lam, chi=None):
    """lam^2 int du K_T(u) exp(-i omega u) f(u) on the real axis with scipy."""
    K = switching_autocorrelation(chi or GAUSS, T)

    def re(u):
        d = (1 + u * u) ** 2
        return K(u) * (np.cos(omega * u) * (1 - u * u) - np.sin(omega * u) * 2 * u) / d

    lim = 12 * T if chi is None else 2 * T
    pts = np.linspace(-lim, lim, 41)
    with warnings.catch_warnings():
        # tiny results hit QUADPACK's roundoff detection; the sum is still fine
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total = sum(integrate.quad(re, a, b, epsabs=0, epsrel=1e-13, limit=400)[0]
                    for a, b in zip(pts[:-1], pts[1:]))
    return lam ** 2 * total


def test_switching_normalisation():
    for chi in (GAUSS, BUMP):
        assert integrate.quad(chi.chi, -np.inf if chi is GAUSS else -1, np.inf if chi is GAUSS else 1,
                              epsabs=0, epsrel=1e-12)[0] == pytest.approx(1, rel=1e-11)
        assert chi.fourier(0.0) == pytest.approx(1, rel=1e-12)
    assert GAUSS.integral_sq == pytest.approx(1 / (2 * np.sqrt(np.pi)))
    assert BUMP.integral_sq == pytest.approx(
        integrate.quad(lambda t: BUMP.chi(t) ** 2, -1, 1, epsabs=0, epsrel=1e-12)[0], rel=1e-10)


@given(st.floats(0, 30))
def test_bump_fourier_matches_quadrature(w):
    # chi is even; subdividing keeps QUADPACK away from the flat ends
    pts = np.linspace(0, 1, 33)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        ref = 2 * sum(integrate.quad(lambda t: np.cos(w * t) * BUMP.chi(t), a, b, epsabs=1e-16,
                                     epsrel=1e-14, limit=200)[0]
                      for a, b in zip(pts[:-1], pts[1:]))
    assert BUMP.fourier(w) == pytest.approx(ref, abs=1e-12)


@given(st.floats(-2.5, 2.5))
def test_autocorrelation_matches_quadrature(v):
    for chi, lim in ((GAUSS, 12.0), (BUMP, 1.0)):
        ref = integrate.quad(lambda s: chi.chi(s) * chi.chi(s - v), -lim, lim, epsabs=1e-14,
                             limit=400)[0]
        # the bump's fixed Gauss-Legendre rule is good to a few 1e-11
        assert chi.autocorrelation(v) == pytest.approx(ref, abs=1e-10)
    K = switching_autocorrelation(GAUSS, 3.0)
    assert K(1.5) == pytest.approx(3.0 * GAUSS.autocorrelation(0.5))


@pytest.mark.parametrize("route,spectrum", [("direct", None), ("fourier", "closed"),
                                            ("fourier", "damped")])
@pytest.mark.parametrize("omega,T", [(0.5, 1.0), (2.0, 1.0), (-1.0, 4.0)])
def test_pole_kernel_against_real_axis_oracle(route, spectrum, omega, T):
    w = pole_kernel()
    det = DetectorSpec(omega, lam=0.1)
    if route == "direct":
        res = transition_probability_direct(w, GAUSS, det, T)
    else:
        res = transition_probability_fourier(w, GAUSS, det, T, spectrum=spectrum)
    assert res.p_up == pytest.approx(pole_oracle(omega, T, 0.1), rel=1e-8)
    assert res.p_down == pytest.approx(pole_oracle(-omega, T, 0.1), rel=1e-8)


def test_damped_spectrum_refuses_results_below_its_noise():
    # p_up ~ 1e-20 comes from the far tail of chi~ where the numerical
    # spectrum is only known to ~1e-16 absolute
    w = pole_kernel()
    det = DetectorSpec(2.0, lam=0.1)
    closed = transition_probability_fourier(w, GAUSS, det, 3.0, spectrum="closed")
    assert closed.p_up == pytest.approx(transition_probability_direct(w, GAUSS, det, 3.0).p_up,
                                        rel=1e-6)
    with pytest.raises(NumericalError, match="noise floor"):
        transition_probability_fourier(w, GAUSS, det, 3.0, spectrum="damped")


def test_bump_switching_against_double_integral():
    w = pole_kernel()
    T, omega, lam = 2.0, 1.0, 0.1
    chi = lambda t: BUMP.chi(t / T)  # noqa: E731
    ref = integrate.dblquad(lambda t2, t1: chi(t1) * chi(t2) * np.real(
        np.exp(-1j * omega * (t1 - t2)) * w.fn(t1 - t2)), -T, T, -T, T,
        epsabs=1e-13, epsrel=1e-10)[0] * lam ** 2
    assert pole_oracle(omega, T, lam, BUMP) == pytest.approx(ref, rel=1e-8)
    for f in (transition_probability_direct, transition_probability_fourier):
        assert f(w, BUMP, DetectorSpec(omega, lam=lam), T).p_up == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("kernel", [vacuum_kernel_accelerated(1.0), thermal_kernel_inertial(2.0),
                                    vacuum_kernel_inertial()])
@pytest.mark.parametrize("omega", [0.5, 2.0])
def test_routes_agree(kernel, omega):
    det = DetectorSpec(omega)
    a = transition_probability_direct(kernel, GAUSS, det, 10.0)
    b = transition_probability_fourier(kernel, GAUSS, det, 10.0)
    assert a.log_p_up == pytest.approx(b.log_p_up, abs=1e-9)
    assert a.log_p_down == pytest.approx(b.log_p_down, abs=1e-9)


def test_bump_routes_agree_on_accelerated_kernel():
    k = vacuum_kernel_accelerated(1.0)
    det = DetectorSpec(1.0)
    a = transition_probability_direct(k, BUMP, det, 10.0)
    b = transition_probability_fourier(k, BUMP, det, 10.0)
    assert a.p_up == pytest.approx(b.p_up, rel=1e-6)
    assert a.p_down == pytest.approx(b.p_down, rel=1e-6)


@given(st.floats(0.1, 3.0), st.floats(1.0, 30.0))
def test_gap_symmetry_and_positivity(omega, T):
    k = vacuum_kernel_accelerated(1.0)
    up = transition_probability_fourier(k, GAUSS, DetectorSpec(omega), T)
    down = transition_probability_fourier(k, GAUSS, DetectorSpec(-omega), T)
    assert up.p_up > 0 and up.p_down > 0
    assert up.log_p_up == pytest.approx(down.log_p_down, abs=1e-12)
    assert up.p_up < up.p_down


@given(st.floats(1e-4, 0.05))
def test_coupling_scaling_is_quadratic(lam):
    k = thermal_kernel_inertial(2.0)
    p1 = transition_probability_fourier(k, GAUSS, DetectorSpec(1.0, lam=lam), 5.0)
    p2 = transition_probability_fourier(k, GAUSS, DetectorSpec(1.0, lam=2 * lam), 5.0)
    assert p2.p_up == pytest.approx(4 * p1.p_up, rel=1e-14)


def test_perturbativity_guard():
    k = vacuum_kernel_accelerated(1.0)
    with pytest.raises(PerturbativityError), warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativityWarning)
        transition_probability_fourier(k, GAUSS, DetectorSpec(1.0, lam=30.0), 40.0)
    with pytest.warns(PerturbativityWarning):
        transition_probability_fourier(k, GAUSS, DetectorSpec(1.0, lam=0.2), 40.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        transition_probability_fourier(k, GAUSS, DetectorSpec(1.0, lam=0.01), 40.0)


def test_response_result_validation():
    with pytest.raises(PerturbativityError):
        ResponseResult(p_up=1.5, p_down=0.1, T=1.0, route="x")
    with pytest.raises(PreconditionError):
        transition_probability_fourier(pole_kernel(), GAUSS, DetectorSpec(1.0), -1.0)


def test_effective_wightman_selects_correlators():
    k = vacuum_kernel_accelerated(1.0)
    cs = CorrelatorSet(zero_kernel(), k, k.scaled(3.0), zero_kernel())
    det = DetectorSpec(1.0, mu_in=0.0, mu_ni=1.0)
    z = 0.5 - 0.5j
    assert effective_wightman(det, cs).continuation(z) == pytest.approx(k.continuation(z))
    assert effective_wightman(det, cs, exchanged=True).continuation(z) == pytest.approx(
        3 * k.continuation(z))


def test_mu_presets_leave_temperature_unchanged():
    k = vacuum_kernel_accelerated(1.0)
    betas = []
    for name in ("raising", "symmetric", "random_phase"):
        mu_in, mu_ni = mu_preset(name, seed=3)
        setup = DetectorSetup(hermitian_set(k), DetectorSpec(1.0, mu_in=mu_in, mu_ni=mu_ni),
                              GAUSS)
        r = setup.response(30.0)
        betas.append(-(r.log_p_up - r.log_p_down))
    assert (max(betas) - min(betas)) / np.mean(betas) < 5e-3
    with pytest.raises(KeyError):
        mu_preset("nope")


def test_response_batch_order_and_failures(tmp_path):
    setup = DetectorSetup(hermitian_set(thermal_kernel_inertial(2.0)), DetectorSpec(1.0), GAUSS)
    batch = response_batch(setup, [(2.0, 5.0), (1.0, 10.0), (1.0, -1.0), (1.0, 5.0)], workers=2)
    assert [pt for pt, _ in batch] == [(1.0, -1.0), (1.0, 5.0), (1.0, 10.0), (2.0, 5.0)]
    assert isinstance(batch[0][1], PreconditionError)
    assert isinstance(batch[1][1], ResponseResult)
    export_responses(tmp_path / "r.tsv", batch)
    _, cols, rows = read_table(tmp_path / "r.tsv")
    assert rows[0][cols.index("status")].startswith("PreconditionError")
    assert rows[1][cols.index("status")] == "ok"


def test_profiles():
    p = gaussian_profile(0.02, center=(0.01, 0.0, 0.0), n=3)
    assert p.weight == pytest.approx(1.0, abs=1e-15)
    assert p.weights @ p.nodes[:, 0] == pytest.approx(0.01, rel=1e-13)
    assert p.weights @ (p.nodes[:, 1] ** 2) == pytest.approx(0.02 ** 2, rel=1e-12)
    assert p.support_radius == pytest.approx(0.01 + 6 * 0.02)
    assert point_profile().weight == 1.0
    g = grid_profile(lambda x: np.ones(len(x)), 0.5, n=10)
    assert g.weight == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        gaussian_profile(0.0)
