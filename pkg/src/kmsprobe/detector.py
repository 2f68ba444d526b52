"""Two-level detector: switching, smearing, effective Wightman function and
leading-order transition probabilities.

Probabilities are computed through two independent routes:

* direct:  p = lam^2 int du K_T(u) exp(-i gap u) w(u), with K_T the switching
  autocorrelation, evaluated on the contour Im u = -eta where the Gaussian
  switching makes the integrand analytic;
* fourier: p = (lam^2 T / 2 pi) int d omega |chi~(omega)|^2 w~(gap + omega / T).

Both work with logarithms, since excitation probabilities of the vacuum fall
like exp(-gap^2 T^2) and underflow double precision at moderate T.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.integrate import trapezoid

from .correlators import CorrelatorSet, linear_combination
from .errors import (CoverageError, NumericalError, PerturbativityError,
                     PreconditionError)
from .fourier import shifted_transform
from .quadrature import adaptive_gk, graded_edges, panel_edges, richardson
from .tables import write_table


class PerturbativityWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# detector and switching

@dataclass(frozen=True)
class DetectorSpec:
    """Gap and monopole matrix elements mu_xy = <x| mu(0) |y>; `lam` is the coupling."""

    omega: float
    mu_ii: complex = 0.0
    mu_in: complex = 0.0
    mu_ni: complex = 1.0
    mu_nn: complex = 0.0
    lam: float = 0.01

    def with_gap(self, omega):
        return DetectorSpec(omega, self.mu_ii, self.mu_in, self.mu_ni, self.mu_nn, self.lam)


MU_PRESETS = ("raising", "symmetric", "random_phase")


def mu_preset(name, seed=0):
    """(mu_in, mu_ni) for a named preset."""
    if name == "raising":
        return 0.0, 1.0
    if name == "symmetric":
        return 1.0, 1.0
    if name == "random_phase":
        rng = np.random.default_rng(seed)
        ph = rng.uniform(0, 2 * np.pi, size=2)
        amp = rng.uniform(0.5, 1.5, size=2)
        return complex(amp[0] * np.exp(1j * ph[0])), complex(amp[1] * np.exp(1j * ph[1]))
    raise KeyError(f"unknown mu preset {name!r}; expected one of {MU_PRESETS}")


def _bump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe * safe)), 0.0)


_BUMP_NORM = integrate.quad(_bump, -1, 1, epsabs=0, epsrel=1e-13)[0]
_GL_X, _GL_W = leggauss(400)


@dataclass(frozen=True)
class SwitchingFunction:
    """Unit-integral switching profile chi; the detector uses chi(tau / T).

    `bandwidth` is the frequency beyond which |chi~| / chi~(0) < 1e-6.
    """

    shape: str
    width: float
    bandwidth: float

    def chi(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.shape == "gaussian":
            return np.exp(-0.5 * tau * tau) / np.sqrt(2 * np.pi)
        return _bump(tau) / _BUMP_NORM

    def fourier(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.shape == "gaussian":
            return np.exp(-0.5 * omega * omega)
        # chi is even: chi~(w) = int cos(w t) chi(t) dt
        vals = np.cos(np.multiply.outer(omega, _GL_X)) @ (_GL_W * self.chi(_GL_X))
        return vals

    def log_fourier_sq(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.shape == "gaussian":
            return -omega * omega
        with np.errstate(divide="ignore"):
            return np.log(self.fourier(omega) ** 2)

    @property
    def analytic(self):
        return self.shape == "gaussian"

    @property
    def integral_sq(self):
        if self.shape == "gaussian":
            return 1.0 / (2 * np.sqrt(np.pi))
        return float(_GL_W @ self.chi(_GL_X) ** 2)

    @property
    def support(self):
        return np.inf if self.shape == "gaussian" else 1.0

    @property
    def max_frequency(self):
        """Largest |omega| at which `fourier` is trusted."""
        return np.inf if self.shape == "gaussian" else 300.0

    def autocorrelation(self, v):
        """(chi * chi)(v) = int ds chi(s) chi(s - v)."""
        v = np.asarray(v, dtype=float)
        if self.shape == "gaussian":
            return np.exp(-0.25 * v * v) / (2 * np.sqrt(np.pi))
        flat = np.abs(v.reshape(-1))
        out = np.zeros(flat.shape)
        m = flat < 2
        lo = flat[m] - 1.0
        half = 0.5 * (1.0 - lo)
        mid = 0.5 * (1.0 + lo)
        s = mid[:, None] + half[:, None] * _GL_X[None, :]
        out[m] = half * ((self.chi(s) * self.chi(s - flat[m][:, None])) @ _GL_W)
        return out.reshape(v.shape)


def gaussian_switching():
    """chi(tau) = exp(-tau^2 / 2) / sqrt(2 pi), chi~(omega) = exp(-omega^2 / 2)."""
    return SwitchingFunction("gaussian", 1.0, float(np.sqrt(2 * np.log(1e6))))


def bump_switching():
    """Compactly supported C-infinity bump on [-1, 1]."""
    sw = SwitchingFunction("bump", 1.0, 0.0)
    w = np.linspace(0, sw.max_frequency, 4001)
    vals = np.abs(sw.fourier(w))
    above = np.nonzero(vals > 1e-6 * vals[0])[0]
    bw = float(w[above[-1] + 1]) if above[-1] + 1 < w.size else np.inf
    return SwitchingFunction("bump", 1.0, bw)


def switching_autocorrelation(chi, T):
    """K_T(u) = int d tau chi(tau / T) chi((tau - u) / T) = T (chi * chi)(u / T)."""

    def K(u):
        return T * chi.autocorrelation(np.asarray(u, dtype=float) / T)

    return K


# ---------------------------------------------------------------------------
# smearing profiles

@dataclass(frozen=True)
class SmearingProfile:
    """Spatial profile F(xi) on the rest slice, stored as a quadrature rule.

    sum_k weights[k] g(nodes[k]) approximates int d^3 xi F(xi) g(xi).
    `params` records closed-form data (kind, sigma, center) when available.
    """

    nodes: np.ndarray
    weights: np.ndarray
    support_radius: float
    label: str = "profile"
    params: dict = field(default_factory=dict, compare=False)

    @property
    def weight(self):
        return complex(np.sum(self.weights))


def point_profile(center=(0.0, 0.0, 0.0), weight=1.0):
    c = np.asarray(center, dtype=float).reshape(1, 3)
    return SmearingProfile(nodes=c, weights=np.array([weight], dtype=float),
                           support_radius=float(np.linalg.norm(c)), label="point",
                           params={"kind": "point", "center": tuple(c[0]), "weight": weight})


def gaussian_profile(sigma, center=(0.0, 0.0, 0.0), n=4, weight=1.0, support_factor=6.0):
    """Isotropic Gaussian of width sigma, tensor-product Gauss-Hermite rule with n nodes per axis.

    The rule integrates polynomials of degree < 2n exactly against the profile,
    so weight, dipole and quadrupole moments are exact for n >= 2.
    """
    if not sigma > 0:
        raise PreconditionError("sigma must be positive")
    x, w = hermegauss(n)
    w = w / np.sqrt(2 * np.pi)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    wts = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    c = np.asarray(center, dtype=float)
    return SmearingProfile(
        nodes=c + sigma * grid, weights=weight * wts,
        support_radius=float(np.linalg.norm(c) + support_factor * sigma),
        label=f"gauss(sigma={sigma:g})",
        params={"kind": "gaussian", "sigma": sigma, "center": tuple(c), "weight": weight})


def grid_profile(density, half_width, n=21, label="grid"):
    """Profile from a density callable F(xi) on a uniform cube (midpoint rule)."""
    edges = np.linspace(-half_width, half_width, n + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    grid = np.stack(np.meshgrid(mids, mids, mids, indexing="ij"), axis=-1).reshape(-1, 3)
    cell = (edges[1] - edges[0]) ** 3
    vals = np.asarray(density(grid)) * cell
    keep = vals != 0
    return SmearingProfile(nodes=grid[keep], weights=vals[keep],
                           support_radius=float(np.sqrt(3) * half_width), label=label,
                           params={"kind": "grid"})


# ---------------------------------------------------------------------------
# effective Wightman function

def effective_wightman(det, cset: CorrelatorSet, exchanged=False):
    """w_in = mu_in mu_ni w_uu + |mu_ni|^2 w_ud + |mu_in|^2 w_du + mu_in* mu_ni* w_dd.

    exchanged=True returns w_ni, the same expression with i and n swapped.
    """
    a, b = (det.mu_ni, det.mu_in) if exchanged else (det.mu_in, det.mu_ni)
    a, b = complex(a), complex(b)
    coeffs = [a * b, abs(b) ** 2, abs(a) ** 2, (a * b).conjugate()]
    return linear_combination(coeffs, cset.kernels(),
                              label="w_ni" if exchanged else "w_in")


# ---------------------------------------------------------------------------
# results

@dataclass(frozen=True)
class ResponseResult:
    p_up: float
    p_down: float
    T: float
    route: str
    omega: float = np.nan
    log_p_up: float = np.nan
    log_p_down: float = np.nan
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("p_up", "p_down"):
            p = getattr(self, name)
            if p > 1:
                raise PerturbativityError(f"{name} = {p:.6g} exceeds 1", residual=p)
            if p < 0:
                raise NumericalError(f"{name} = {p:.6g} is negative", residual=p)


def _finish(parts, det, T, route, diagnostics):
    lam2 = det.lam * det.lam
    (lu, eu), (ld, ed) = parts
    p_up = lam2 * np.exp(lu) if lam2 > 0 else 0.0
    p_down = lam2 * np.exp(ld) if lam2 > 0 else 0.0
    log_lam2 = 2 * np.log(abs(det.lam)) if det.lam != 0 else -np.inf
    diagnostics = dict(diagnostics, rel_err_up=eu, rel_err_down=ed)
    return ResponseResult(p_up=float(p_up), p_down=float(p_down), T=float(T), route=route,
                          omega=float(det.omega), log_p_up=float(log_lam2 + lu),
                          log_p_down=float(log_lam2 + ld), diagnostics=diagnostics)


def _log_of_real(value, err, what):
    """log of a quantity that must be real and non-negative; returns (log, rel_err)."""
    re = value.real
    if re <= 0:
        if abs(value) <= 10 * err:
            return -np.inf, np.inf
        raise NumericalError(f"{what}: negative result {re:.3e} (error estimate {err:.3e})",
                             residual=float(err))
    if abs(value.imag) > 1e-6 * re + 10 * err:
        raise NumericalError(f"{what}: imaginary part {value.imag:.3e} is not negligible",
                             residual=float(abs(value.imag)))
    return float(np.log(re)), float(err / re)


def perturbativity_indicator(det, w, T):
    """lam^2 T^2 |w| with w regularised at the interaction time scale."""
    eps = min(T, 0.5 * w.strip) if np.isfinite(w.strip) else T
    return float(det.lam ** 2 * T * T * abs(w.fn(np.array([-1j * eps]))[0]))


def _check_perturbative(det, w, T):
    ind = perturbativity_indicator(det, w, T)
    if ind > 0.1:
        warnings.warn(f"lam^2 T^2 |w| = {ind:.3g} is not small; leading order is unreliable",
                      PerturbativityWarning, stacklevel=3)
    return ind


# ---------------------------------------------------------------------------
# direct route

def _shift_choice(w, gap, T):
    half = 0.5 * w.strip if np.isfinite(w.strip) else np.inf
    base = min(half, 1.0 / max(abs(gap), 1.0 / T))
    if gap > 0:
        # saddle point of exp(-gap eta + eta^2 / (4 T^2))
        return min(half, max(2 * gap * T * T, base))
    return base


def _direct_gaussian(w, gap, T, epsrel):
    eta = _shift_choice(w, gap, T)
    k = eta / (2 * T * T) - gap
    L = np.sqrt(4 * T * T * 46.0)
    width = min(T, eta, np.pi / abs(k) if k != 0 else np.inf)
    edges = panel_edges(-L, L, width)
    pref = T / (2 * np.sqrt(np.pi))

    def integrand(u):
        return pref * np.exp(-u * u / (4 * T * T) + 1j * k * u) * w.fn(u - 1j * eta)

    val, err, npan = adaptive_gk(integrand, edges, epsrel=epsrel, l1_floor=1e-6)
    log_i, rel = _log_of_real(val, err, "direct route")
    return log_i + eta * eta / (4 * T * T) - gap * eta, rel, {"eta": eta, "panels": npan}


def _direct_real_contour(w, chi, gap, T, epsrel, eps):
    K = switching_autocorrelation(chi, T)
    L = 2 * T * chi.support
    width = min(T / 8, np.pi / abs(gap) if gap else np.inf)
    vals, errs = [], []
    for e in (eps, 2 * eps, 4 * eps):
        edges = graded_edges(0.0, e, L, width)
        edges = edges[(edges >= -L) & (edges <= L)]

        def integrand(u, e=e):
            return K(u) * np.exp(-1j * gap * u) * w.fn(u - 1j * e)

        v, er, _ = adaptive_gk(integrand, edges, epsrel=epsrel, l1_floor=1e-6)
        vals.append(v)
        errs.append(er)
    best, est = richardson(vals)
    log_i, rel = _log_of_real(best, est + max(errs), "direct route (real contour)")
    return log_i, rel, {"eps": eps}


def transition_probability_direct(w_in, chi, det, T, w_ni=None, epsrel=1e-10, eps=None):
    """Excitation and deexcitation probabilities from the u-integral."""
    if not T > 0:
        raise PreconditionError("T must be positive")
    w_ni = w_in if w_ni is None else w_ni
    ind = _check_perturbative(det, w_in, T)
    parts = []
    diag = {"perturbativity": ind}
    for tag, w, gap in (("up", w_in, det.omega), ("down", w_ni, -det.omega)):
        if chi.analytic:
            lg, rel, d = _direct_gaussian(w, gap, T, epsrel)
        else:
            lg, rel, d = _direct_real_contour(w, chi, gap, T, epsrel,
                                              1e-4 * T if eps is None else eps)
        parts.append((lg, rel))
        diag.update({f"{key}_{tag}": v for key, v in d.items()})
    return _finish(parts, det, T, "direct", diag)


# ---------------------------------------------------------------------------
# Fourier route

class _Spectrum:
    """Real part of w~ from a closed form or the shifted-contour transform.

    `evaluate` also returns absolute error estimates; closed forms are taken
    as exact.
    """

    def __init__(self, w, numeric):
        self.w = w
        self.numeric = numeric
        self.eta = 0.5 * w.strip if np.isfinite(w.strip) else 1.0

    def evaluate(self, nu):
        nu = np.asarray(nu, dtype=float)
        if not self.numeric:
            val = np.real(np.asarray(self.w.spectrum(nu), dtype=complex))
            return val, np.zeros(val.shape)
        flat = nu.reshape(-1)
        # error target relative to int |f|: the response only needs w~
        # accurately where it is not negligible
        raw, err = shifted_transform(self.w, flat, self.eta, epsrel=1e-11, l1_floor=1e-3)
        factor = np.exp(-self.eta * flat)
        return np.real(raw * factor).reshape(nu.shape), (err * factor).reshape(nu.shape)

    def __call__(self, nu):
        return self.evaluate(nu)[0]


def _spectrum_source(w, spectrum):
    if spectrum == "auto":
        spectrum = "closed" if w.spectrum is not None else "damped"
    if spectrum == "closed":
        if w.spectrum is None:
            raise PreconditionError(f"kernel {w.label!r} has no closed-form spectrum")
        return _Spectrum(w, numeric=False)
    if spectrum == "damped":
        return _Spectrum(w, numeric=True)
    raise ValueError(f"unknown spectrum source {spectrum!r}")


def _fourier_one(spec, chi, gap, T, epsrel, drop=46.0):
    edge = -gap * T  # support edge of vacuum-type spectra (nu = 0)
    bw = chi.bandwidth if np.isfinite(chi.bandwidth) else 50.0
    lim = chi.max_frequency

    def logphi(om, with_error=False):
        with np.errstate(divide="ignore", invalid="ignore"):
            s, e = spec.evaluate(gap + om / T)
            out = chi.log_fourier_sq(om) + np.where(s > 0, np.log(np.abs(s)), -np.inf)
            return (out, s, e) if with_error else (out, s)

    # locate the peak of log|chi~|^2 + log w~ on a coarse grid, then refine
    span = min(max(4 * bw, abs(edge) + 4 * bw), lim)
    grid = np.unique(np.concatenate([np.linspace(-span, span, 801),
                                     [edge] if abs(edge) <= span else []]))
    lp, _, spec_err = logphi(grid, with_error=True)
    if not np.any(np.isfinite(lp)):
        return -np.inf, 0.0, {"support": "empty"}
    j = int(np.nanargmax(np.where(np.isfinite(lp), lp, -np.inf)))
    center = grid[j]
    peak = lp[j]
    # grow the window on each side until the integrand has dropped by e^-drop;
    # if the trusted range of chi~ ends first, bound the omitted tail by its
    # local exponential decay and check it against epsrel after integrating
    bounds = []
    tails = []
    for direction in (-1.0, 1.0):
        step = max(grid[1] - grid[0], 1.0 / T)
        while True:
            x = center + direction * step
            if abs(x) >= lim:
                x = direction * lim
                val, _ = logphi(np.array([x, x - direction]))
                if np.isfinite(val[0]) and val[0] > peak - drop:
                    slope = val[1] - val[0]
                    if not slope > 0:
                        raise CoverageError(
                            f"switching spectrum truncated at |omega| = {lim:g} where the "
                            "integrand is not decaying")
                    tails.append(np.exp(val[0] - peak) / slope)
                break
            val, _ = logphi(np.array([x]))
            if not np.isfinite(val[0]) or val[0] < peak - drop:
                break
            step *= 2
        bounds.append(x)
    lo, hi = bounds
    bps = [edge, center] + [center + d / T for d in (-1, 1)]
    width = min(1.0, (hi - lo) / 16)
    edges = panel_edges(lo, hi, width, breakpoints=bps)

    def integrand(om):
        with np.errstate(under="ignore"):
            return np.exp(chi.log_fourier_sq(om) - peak) * spec(gap + om / T)

    # the absolute accuracy of a numeric spectrum limits what the integral can
    # resolve: its error estimate weighted by |chi~|^2 over the coarse grid
    with np.errstate(under="ignore", over="ignore", divide="ignore"):
        log_noise = chi.log_fourier_sq(grid) - peak + np.log(spec_err)
        noise = float(trapezoid(np.exp(np.minimum(log_noise, 700.0)), grid))
    val, err, npan = adaptive_gk(integrand, edges, epsabs=noise, epsrel=epsrel, l1_floor=1e-6)
    if noise > 1e-3 * abs(val):
        raise NumericalError(
            f"response {abs(val) * np.exp(peak):.3e} is below the noise floor "
            f"{noise * np.exp(peak):.3e} of the numerical spectrum; use a closed-form "
            "spectrum or the direct route", residual=float(noise * np.exp(peak)))
    err = err + noise
    tail = float(sum(tails))
    if tail > epsrel * abs(val):
        raise CoverageError(
            f"switching spectrum truncated at |omega| = {lim:g}: omitted tail "
            f"{tail / abs(val):.2e} of the result exceeds {epsrel:.1e}")
    log_i, rel = _log_of_real(complex(val), err + tail, "fourier route")
    return log_i + peak + np.log(T / (2 * np.pi)), rel, {"window": (lo, hi), "panels": npan,
                                                         "tail": tail}


def transition_probability_fourier(w_in, chi, det, T, w_ni=None, spectrum="auto",
                                   epsrel=1e-10):
    """p_up = (lam^2 T / 2 pi) int |chi~(omega)|^2 w~_in(gap + omega / T), and p_down likewise."""
    if not T > 0:
        raise PreconditionError("T must be positive")
    w_ni = w_in if w_ni is None else w_ni
    ind = _check_perturbative(det, w_in, T)
    parts = []
    diag = {"perturbativity": ind}
    for tag, w, gap in (("up", w_in, det.omega), ("down", w_ni, -det.omega)):
        lg, rel, d = _fourier_one(_spectrum_source(w, spectrum), chi, gap, T, epsrel)
        parts.append((lg, rel))
        diag.update({f"{key}_{tag}": v for key, v in d.items()})
    return _finish(parts, det, T, "fourier", diag)


# ---------------------------------------------------------------------------
# setups and batches

@dataclass(frozen=True)
class DetectorSetup:
    """Everything needed to evaluate responses at a given interaction time."""

    correlators: CorrelatorSet
    det: DetectorSpec
    chi: SwitchingFunction
    route: str = "fourier"
    spectrum: str = "auto"
    label: str = "setup"

    @cached_property
    def w_in(self):
        return effective_wightman(self.det, self.correlators)

    @cached_property
    def w_ni(self):
        return effective_wightman(self.det, self.correlators, exchanged=True)

    @property
    def beta_nominal(self):
        return self.w_in.beta_nominal

    def with_gap(self, omega):
        return DetectorSetup(self.correlators, self.det.with_gap(omega), self.chi,
                             self.route, self.spectrum, self.label)

    def response(self, T, route=None):
        route = route or self.route
        if route == "direct":
            return transition_probability_direct(self.w_in, self.chi, self.det, T, self.w_ni)
        if route == "fourier":
            return transition_probability_fourier(self.w_in, self.chi, self.det, T,
                                                   self.w_ni, spectrum=self.spectrum)
        raise ValueError(f"unknown route {route!r}")


def response_batch(setup, points, workers=1, route=None):
    """Evaluate (omega, T) points; results come back sorted by (omega, T).

    Failures are returned in place as the raised exception so that one bad
    point does not abort a sweep.
    """
    pts = sorted((float(o), float(t)) for o, t in points)

    def one(pt):
        try:
            return setup.with_gap(pt[0]).response(pt[1], route=route)
        except (NumericalError, PreconditionError) as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, pts))
    else:
        out = [one(p) for p in pts]
    return list(zip(pts, out))


RESPONSE_COLUMNS = ["omega", "T", "p_up", "p_down", "log_p_up", "log_p_down", "route",
                    "rel_err_up", "rel_err_down", "status"]


def response_rows(batch):
    rows = []
    for (om, T), res in batch:
        if isinstance(res, ResponseResult):
            d = res.diagnostics
            rows.append([om, T, res.p_up, res.p_down, res.log_p_up, res.log_p_down,
                         res.route, d.get("rel_err_up", np.nan),
                         d.get("rel_err_down", np.nan), "ok"])
        else:
            msg = type(res).__name__ + ":" + str(res).replace("\t", " ").replace("\n", " ")
            rows.append([om, T, np.nan, np.nan, np.nan, np.nan, "-", np.nan, np.nan, msg])
    return rows


def export_responses(path, batch, meta=None):
    write_table(path, RESPONSE_COLUMNS, response_rows(batch), meta=meta)
