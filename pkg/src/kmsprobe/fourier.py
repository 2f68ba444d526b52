"""Fourier transforms w~(omega) = int ds exp(-i omega s) w(s) of stationary kernels.

Because f is analytic in -strip < Im z < 0 and decays along horizontal lines,
the real-axis contour can be moved to Im z = -eta:

    w~(omega) = exp(-eta omega) int ds exp(-i omega s) f(s - i eta).

This is an identity, not a regularisation, so no epsilon -> 0 limit is needed.
The shifted integrand is smooth on the scale eta, which makes both composite
Gauss-Kronrod ("damped") and the trapezoid rule ("fft", spectrally accurate
for analytic integrands) efficient. The "richardson" method keeps the contour
at distance eps from the real axis and extrapolates an eps ladder to zero.
"""

import numpy as np
from .errors import NumericalError, UnsupportedKernelError
from .quadrature import adaptive_gk, graded_edges, panel_edges, richardson

METHODS = ("damped", "fft", "closed", "richardson")


def default_shift(kernel):
    return 0.5 * kernel.strip if np.isfinite(kernel.strip) else 1.0


def _half_range(kernel, eta, omega_min):
    if kernel.decay is not None:
        return 46.0 / kernel.decay + 4 * eta
    # algebraic kernels: the rest is handled by oscillatory tail integrals
    return max(40.0 * eta, 50.0)


def _tails(g, omegas, L, epsrel=1e-11):
    """int_{|s|>L} exp(-i omega s) g(s) ds for algebraically decaying g.

    Vacuum kernels are analytic off a bounded real segment |Re z| < L, so
    each tail is rotated onto the vertical ray s = +-L -+ i t on which the
    exponential decays like exp(-|omega| t); with x = |omega| t the integral
    becomes int_0^inf dx exp(-x) (...) and is done for all omega at once.
    At omega = 0 the tail is int_L^inf g ds with s = L / y.
    """
    out = np.zeros(omegas.shape, dtype=complex)
    err = np.zeros(omegas.shape)
    zero = omegas == 0
    if np.any(zero):
        def f0(y):
            y = np.maximum(y, 1e-300)
            s = L / y
            return (g(s) + g(-s)) * L / (y * y)

        v, e, _ = adaptive_gk(f0, np.linspace(0.0, 1.0, 9), epsrel=epsrel, l1_floor=1e-3)
        out[zero], err[zero] = v, e
    w = omegas[~zero]
    if w.size:
        sg = np.sign(w)[:, None]
        aw = np.abs(w)[:, None]
        edges = np.concatenate([[0.0], np.geomspace(1e-6, 60.0, 40)])

        def fx(x):
            t = x[None, :] / aw
            # right tail: s = L - i sg t, ds = -i sg dt; left: s = -L - i sg t, ds = +i sg dt
            right = np.exp(-1j * w[:, None] * L) * g_mat(L - 1j * sg * t) * (-1j * sg)
            left = np.exp(1j * w[:, None] * L) * g_mat(-L - 1j * sg * t) * (1j * sg)
            return np.exp(-x)[None, :] * (right + left) / aw

        def g_mat(zm):
            return g(zm.reshape(-1)).reshape(zm.shape)

        v, e, _ = adaptive_gk(fx, edges, epsrel=epsrel, l1_floor=1e-3)
        out[~zero], err[~zero] = v, e
    return out, err


def shifted_transform(kernel, omega, eta, epsrel=1e-11, edges=None, l1_floor=1e-4,
                      chunk=64):
    """int ds exp(-i omega s) f(s - i eta) for every omega; returns (values, errors).

    The error target for each omega is epsrel * max(|I|, l1_floor * int |f|),
    so frequencies where the shifted transform is tiny do not stall refinement.
    """
    omegas = np.atleast_1d(np.asarray(omega, dtype=float)).ravel()
    wmax = np.max(np.abs(omegas)) if omegas.size else 0.0
    nz = np.abs(omegas[omegas != 0])
    wmin = nz.min() if nz.size else 0.0
    L = _half_range(kernel, eta, wmin)
    if edges is None:
        width = min(eta, np.pi / wmax if wmax > 0 else np.inf, L / 8)
        edges = panel_edges(-L, L, width)
    else:
        L = edges[-1]

    def g(s):
        return kernel.fn(s - 1j * eta)

    val = np.empty(omegas.shape, dtype=complex)
    err = np.empty(omegas.shape)
    for i in range(0, omegas.size, chunk):
        part = omegas[i:i + chunk]

        def integrand(s, part=part):
            return np.exp(-1j * np.outer(part, s)) * g(s)[None, :]

        # cap the panel count so a stalled refinement fails instead of
        # allocating chunk x 15 x panels complex values without bound
        val[i:i + chunk], err[i:i + chunk], _ = adaptive_gk(
            integrand, edges, epsrel=epsrel, l1_floor=l1_floor,
            max_panels=max(4 * len(edges), 2_000_000 // part.size))
        if kernel.decay is None:
            if np.isfinite(kernel.strip):
                raise UnsupportedKernelError(
                    "algebraic tails are only handled for vacuum kernels")
            tv, te = _tails(g, part, L, epsrel)
            val[i:i + chunk] += tv
            err[i:i + chunk] += te
    return val, err


def kernel_fourier(kernel, omega, method="damped", eta=None, epsrel=1e-11,
                   eps=1e-4, return_error=False):
    """w~(omega) with the convention int ds exp(-i omega s) w(s).

    method: "damped" (shifted contour, adaptive Gauss-Kronrod), "fft" (shifted
    contour, trapezoid grid), "closed" (kernel.spectrum) or "richardson" (real
    contour at eps, 2 eps, 4 eps, extrapolated to eps -> 0).
    """
    omega = np.asarray(omega, dtype=float)
    flat = np.atleast_1d(omega).ravel()
    if method == "closed":
        if kernel.spectrum is None:
            raise UnsupportedKernelError(f"kernel {kernel.label!r} has no closed-form spectrum")
        val = np.asarray(kernel.spectrum(flat), dtype=complex)
        err = np.zeros(flat.shape)
    elif method == "damped":
        eta = default_shift(kernel) if eta is None else eta
        raw, err = shifted_transform(kernel, flat, eta, epsrel=epsrel)
        factor = np.exp(-eta * flat)
        val, err = raw * factor, err * factor
    elif method == "fft":
        eta = default_shift(kernel) if eta is None else eta
        val, err = _trapezoid(kernel, flat, eta)
    elif method == "richardson":
        val, err = _richardson(kernel, flat, eps, epsrel)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    val = val.reshape(omega.shape) if omega.ndim else val[0]
    err = err.reshape(omega.shape) if omega.ndim else err[0]
    return (val, err) if return_error else val


def _trapezoid_grid(kernel, eta, wmax):
    if kernel.decay is None:
        raise UnsupportedKernelError(
            "the trapezoid/FFT method needs exponentially decaying kernels")
    L = 46.0 / kernel.decay + 4 * eta
    # the trapezoid sum aliases omega onto omega - 2 pi / h, where the shifted
    # transform is down by exp(-eta |omega - 2 pi / h|); keep that below 1e-13
    # relative to its value at omega
    h = 2 * np.pi / (2 * wmax + 30.0 / eta)
    n = int(np.ceil(L / h))
    return np.arange(-n, n + 1) * h, h


def _trapezoid(kernel, omegas, eta):
    wmax = np.max(np.abs(omegas)) if omegas.size else 0.0
    s, h = _trapezoid_grid(kernel, eta, wmax)
    g = kernel.fn(s - 1j * eta)
    val = h * (np.exp(-1j * np.outer(omegas, s)) @ g) * np.exp(-eta * omegas)
    # compare with the half-density rule as an error indicator
    half = 2 * h * (np.exp(-1j * np.outer(omegas, s[::2])) @ g[::2]) * np.exp(-eta * omegas)
    return val, np.abs(val - half)


def fft_spectrum(kernel, n=None, omega_max=10.0, eta=None):
    """w~ on the uniform FFT grid omega_j = 2 pi j / (n h) via numpy's FFT.

    The step h is chosen as in the trapezoid method so that values with
    |omega| <= omega_max are free of aliasing to ~1e-13; n is the smallest
    power of two whose window covers the kernel's decay length.
    Returns (omega, values) sorted by omega.
    """
    if kernel.decay is None:
        raise UnsupportedKernelError("the FFT grid needs exponentially decaying kernels")
    eta = default_shift(kernel) if eta is None else eta
    grid, h = _trapezoid_grid(kernel, eta, omega_max)
    if n is None:
        n = 1 << int(np.ceil(np.log2(grid.size)))
    s = (np.arange(n) - n // 2) * h
    g = kernel.fn(s - 1j * eta)
    omega = np.fft.fftfreq(n, d=h) * 2 * np.pi
    # sum_k g_k exp(-i w s_k) with s_k = (k - n/2) h
    with np.errstate(over="ignore", invalid="ignore"):
        spec = h * np.fft.fft(g) * np.exp(1j * omega * (n // 2) * h) * np.exp(-eta * omega)
    order = np.argsort(omega)
    return omega[order], spec[order]


def _richardson(kernel, omegas, eps, epsrel):
    ladder = [eps, 2 * eps, 4 * eps]
    L = _half_range(kernel, 1.0, np.min(np.abs(omegas[omegas != 0]), initial=0.0))
    wmax = np.max(np.abs(omegas)) if omegas.size else 0.0
    width = min(0.5, np.pi / wmax if wmax > 0 else np.inf)
    vals = []
    errs = []
    for e in ladder:
        edges = graded_edges(0.0, e, L, width)
        v, er = shifted_transform(kernel, omegas, e, epsrel=epsrel, edges=edges)
        vals.append(v)
        errs.append(er)
    out = np.empty(omegas.shape, dtype=complex)
    est = np.empty(omegas.shape)
    for j in range(omegas.size):
        out[j], est[j] = richardson([v[j] for v in vals])
    quad_err = max(np.max(e) for e in errs)
    scale = np.max(np.abs(out)) if out.size else 0.0
    if np.any(est > 1e-6 * scale + quad_err * 10):
        raise NumericalError("epsilon extrapolation did not settle",
                             residual=float(np.max(est)))
    return out, est + quad_err
