"""Stationary pulled-back two-point kernels of a massless scalar in 3+1 dimensions.

A kernel is stored as an analytic function f(z) of complex proper-time
difference. The Wightman function on the real axis is the boundary value
w(s) = lim f(s - i eps), and f is analytic in the strip -strip < Im z < 0.
For a KMS kernel at inverse temperature beta the strip width is beta and
f(s - i beta) = w_swapped(-s).

Fourier convention: w~(omega) = integral ds exp(-i omega s) w(s), so that
a KMS spectrum obeys w~(omega) = exp(-beta omega) w~(-omega).
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (AssumptionError, NumericalError, OutOfDomainError,
                     PreconditionError, UnsupportedKernelError)
from .tables import write_table

FOUR_PI2 = 4.0 * np.pi ** 2


# ---------------------------------------------------------------------------
# stable special functions of complex argument

def csch2(x):
    """1/sinh(x)^2 without overflow for large |Re x|."""
    x = np.asarray(x, dtype=complex)
    u = np.where(x.real >= 0, x, -x)
    e = np.exp(-2.0 * u)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 4.0 * e / np.expm1(-2.0 * u) ** 2


def coth(x):
    x = np.asarray(x, dtype=complex)
    s = np.where(x.real >= 0, 1.0, -1.0)
    u = s * x
    e = np.exp(-2.0 * u)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -s * (1.0 + e) / np.expm1(-2.0 * u)


def planck(omega, beta):
    """omega / (exp(beta omega) - 1); the beta = inf limit is -omega Theta(-omega)."""
    omega = np.asarray(omega, dtype=float)
    if np.isinf(beta):
        return np.where(omega < 0, -omega, 0.0)
    x = beta * omega
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return np.where(x == 0, 1.0 / beta, omega / np.expm1(x))


def log_planck(omega, beta):
    """log of planck(omega, beta) for beta omega large (used in log-space routes)."""
    omega = np.asarray(omega, dtype=float)
    x = beta * omega
    with np.errstate(divide="ignore"):
        return np.where(x > 30, np.log(np.abs(omega)) - x,
                        np.log(np.abs(planck(omega, beta))))


# ---------------------------------------------------------------------------
# kernel type

@dataclass(frozen=True)
class CorrelatorKernel:
    """Stationary kernel w(s) = f(s - i0) given by its analytic extension f.

    fn        vectorised analytic function of complex z
    strip     f is analytic for -strip < Im z < 0 (inf for vacuum kernels)
    decay     rate k with |f(s - i eta)| ~ exp(-k |s|); None for algebraic tails
    spectrum  closed-form w~(omega) when known
    d2        closed-form f'' when known (enables timelike derivative coupling)
    """

    fn: Callable
    strip: float
    beta_nominal: float = np.inf
    label: str = ""
    decay: Optional[float] = None
    spectrum: Optional[Callable] = field(default=None, compare=False)
    d2: Optional[Callable] = field(default=None, compare=False)
    hermitian: bool = True

    def eval(self, dtau, eps=0.0):
        """w(dtau - i eps)."""
        return self.fn(np.asarray(dtau, dtype=float) - 1j * eps)

    def continuation(self, z):
        return self.fn(np.asarray(z, dtype=complex))

    def scaled(self, c, label=None):
        return linear_combination([c], [self], label=label or self.label)


def zero_kernel(label="zero"):
    return CorrelatorKernel(fn=lambda z: np.zeros(np.shape(z), dtype=complex),
                            strip=np.inf, label=label, decay=np.inf,
                            spectrum=lambda w: np.zeros(np.shape(w)),
                            d2=lambda z: np.zeros(np.shape(z), dtype=complex))


def is_zero(kernel):
    return kernel.label == "zero" or kernel.decay == np.inf


def linear_combination(coeffs, kernels, label="combination"):
    """Kernel sum_k c_k w_k over kernels that share one analyticity strip."""
    pairs = [(complex(c), k) for c, k in zip(coeffs, kernels)
             if c != 0 and not is_zero(k)]
    if not pairs:
        return zero_kernel()
    strips = {k.strip for _, k in pairs}
    betas = {k.beta_nominal for _, k in pairs}
    if len(strips) > 1 or len(betas) > 1:
        raise PreconditionError(
            f"kernels live on different domains (strips {sorted(strips)}, "
            f"beta {sorted(betas)})")
    cs = [c for c, _ in pairs]
    ks = [k for _, k in pairs]

    def fn(z):
        return sum(c * k.fn(z) for c, k in zip(cs, ks))

    spectrum = None
    if all(k.spectrum is not None for k in ks):
        def spectrum(w):
            return sum(c * k.spectrum(w) for c, k in zip(cs, ks))
    d2 = None
    if all(k.d2 is not None for k in ks):
        def d2(z):
            return sum(c * k.d2(z) for c, k in zip(cs, ks))
    decays = [k.decay for k in ks]
    decay = None if any(d is None for d in decays) else min(decays)
    return CorrelatorKernel(
        fn=fn, strip=strips.pop(), beta_nominal=betas.pop(), label=label,
        decay=decay, spectrum=spectrum, d2=d2,
        hermitian=all(k.hermitian for k in ks) and all(c.imag == 0 for c in cs))


# ---------------------------------------------------------------------------
# backgrounds: the field state together with the family of worldlines that a
# rigid detector's constituents follow. Pair functions return arrays shaped
# (n_pairs,) + z.shape.

def _pair_stack(values):
    return np.asarray(values, dtype=float).reshape(-1)


@dataclass(frozen=True)
class InertialBackground:
    """Static constituents in Minkowski space, field in the vacuum or at inverse temperature beta."""

    beta: float = np.inf

    @property
    def strip(self):
        return self.beta

    @property
    def decay(self):
        return None if np.isinf(self.beta) else 2 * np.pi / self.beta

    def scalar_keys(self, xa, xb):
        r = np.linalg.norm(xa - xb, axis=-1)
        return r[:, None]

    def scalar(self, z, keys):
        z = np.asarray(z, dtype=complex)
        r = _pair_stack(keys[:, 0])[:, None]
        zz = z.reshape(1, -1)
        if np.isinf(self.beta):
            out = 1.0 / (FOUR_PI2 * (r ** 2 - zz ** 2))
        else:
            b = self.beta
            small = r < 1e-3 * b
            rs = np.where(small, 1.0, r)
            with np.errstate(invalid="ignore", divide="ignore"):
                far = (coth(np.pi * (rs - zz) / b) + coth(np.pi * (rs + zz) / b)) \
                    / (8 * np.pi * rs * b)
            x = np.pi * zz / b
            c2 = csch2(x)
            w0 = -c2 / (4 * b * b)
            # W(r) = W0 + r^2 W0'' / 6 for a solution of the wave equation
            w0dd = -(np.pi / b) ** 2 * c2 * (4.0 + 6.0 * c2) / (4 * b * b)
            near = w0 + r ** 2 * w0dd / 6.0
            out = np.where(small, near, far)
        return out.reshape((-1,) + z.shape)

    def scalar_spectrum(self, omega, keys):
        omega = np.asarray(omega, dtype=float)
        r = _pair_stack(keys[:, 0])[:, None]
        w = omega.reshape(1, -1)
        out = np.sinc(w * r / np.pi) * planck(w, self.beta) / (2 * np.pi)
        return out.reshape((-1,) + omega.shape)

    def tensor_keys(self, xa, xb):
        return xa - xb

    def tensor(self, z, keys, n):
        if not np.isinf(self.beta):
            if np.any(np.abs(keys) > 0):
                raise UnsupportedKernelError(
                    "derivative coupling of a spatially smeared thermal detector "
                    "is not implemented")
            return self._thermal_pointlike_tensor(z, n, keys.shape[0])
        z = np.asarray(z, dtype=complex)
        zz = z.reshape(1, -1)
        P = keys.shape[0]
        delta = np.concatenate([np.broadcast_to(zz, (1, P, zz.shape[1])),
                                np.broadcast_to(keys.T[:, :, None], (3, P, zz.shape[1]))])
        e = np.eye(4)[:, :, None, None] * np.ones((1, 1, P, zz.shape[1]))
        return _tensor_formula(delta, n, e, e).reshape((-1,) + z.shape)

    def _thermal_pointlike_tensor(self, z, n, npairs):
        n = np.asarray(n, dtype=float)
        z = np.asarray(z, dtype=complex)
        k = thermal_kernel_inertial(self.beta)
        val = (3 * n[0] ** 2 + n[1:] @ n[1:]) / 3.0 * (-k.d2(z))
        return np.broadcast_to(val, (npairs,) + z.shape)

    def tensor_spectrum(self, n, keys):
        if np.any(np.abs(keys) > 0):
            return None
        n = np.asarray(n, dtype=float)
        fac = (3 * n[0] ** 2 + n[1:] @ n[1:]) / 3.0

        def spec(omega):
            omega = np.asarray(omega, dtype=float).reshape(1, -1)
            val = fac * omega ** 2 * planck(omega, self.beta) / (2 * np.pi)
            return np.broadcast_to(val, (keys.shape[0], omega.shape[1]))

        return spec


@dataclass(frozen=True)
class RindlerBackground:
    """Minkowski vacuum seen by a rigid frame of proper acceleration a.

    Constituent xi = (X, y, z) follows the exact Rindler worldline at
    rho = X + 1/a; its proper time is (1 + a X) times the reference tau.
    """

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise PreconditionError("acceleration must be positive")

    @property
    def beta(self):
        return 2 * np.pi / self.a

    @property
    def strip(self):
        return self.beta

    @property
    def decay(self):
        return self.a

    def _rho(self, x):
        X = x[..., 0]
        if np.any(X <= -1.0 / self.a):
            raise OutOfDomainError("constituent outside the Rindler wedge")
        return X + 1.0 / self.a

    def scalar_keys(self, xa, xb):
        d2 = np.sum((xa[:, 1:] - xb[:, 1:]) ** 2, axis=-1)
        return np.stack([self._rho(xa), self._rho(xb), d2], axis=-1)

    def scalar(self, z, keys):
        z = np.asarray(z, dtype=complex)
        ra, rb, d2 = (keys[:, k][:, None] for k in range(3))
        zz = z.reshape(1, -1)
        sh = np.sinh(0.5 * self.a * zz)
        denom = (ra - rb) ** 2 + d2 - 4 * ra * rb * sh ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 / (FOUR_PI2 * denom)
        # beyond |Re z| ~ 700/a the hyperbolic functions overflow; use the
        # asymptotic form, which is exact to double precision there
        big = np.abs(zz.real) * self.a > 60
        if np.any(big):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                asym = -csch2(0.5 * self.a * zz) / (FOUR_PI2 * 4 * ra * rb)
            out = np.where(big, asym, out)
        return out.reshape((-1,) + z.shape)

    def scalar_spectrum(self, omega, keys):
        omega = np.asarray(omega, dtype=float)
        ra, rb, d2 = (keys[:, k][:, None] for k in range(3))
        w = omega.reshape(1, -1)
        a = self.a
        s0 = 2.0 / a * np.arcsinh(np.sqrt(((ra - rb) ** 2 + d2) / (4 * ra * rb)))
        x = a * s0
        shc = np.where(x == 0, 1.0, np.sinh(x) / np.where(x == 0, 1.0, x))
        out = np.sinc(w * s0 / np.pi) / shc * planck(w, self.beta) \
            / (2 * np.pi * ra * rb * a * a)
        return out.reshape((-1,) + omega.shape)

    def tensor_keys(self, xa, xb):
        return np.stack([self._rho(xa), self._rho(xb),
                         xa[:, 1] - xb[:, 1], xa[:, 2] - xb[:, 2]], axis=-1)

    def tensor(self, z, keys, n):
        """Derivative-coupled pair kernel with all inner products in closed form.

        With e_0(z) = (cosh az, sinh az, 0, 0), e_1(z) = (sinh az, cosh az, 0, 0)
        at the first constituent and the same frame at z = 0 at the second,
        the Cartesian contraction would cancel catastrophically for large |z|.
        """
        a = self.a
        n = np.asarray(n, dtype=float)
        z = np.asarray(z, dtype=complex)
        zz = z.reshape(1, -1)
        ra, rb, dy, dz = (keys[:, k][:, None] for k in range(4))
        with np.errstate(over="ignore", invalid="ignore"):
            ch, sh = np.cosh(a * zz), np.sinh(a * zz)
            s2 = (ra - rb) ** 2 + dy * dy + dz * dz - 4 * ra * rb * np.sinh(0.5 * a * zz) ** 2
            vv = (n[1] ** 2 - n[0] ** 2) * ch + n[2] ** 2 + n[3] ** 2
            trans = n[2] * dy + n[3] * dz
            vad = -n[0] * rb * sh + n[1] * (ra - rb * ch) + trans
            vbd = -n[0] * ra * sh + n[1] * (ra * ch - rb) + trans
            out = (vv / s2 ** 2 - 4.0 * vad * vbd / s2 ** 3) / (2 * np.pi ** 2)
        # the kernel decays like exp(-a |u|); past |a Re z| = 80 it is below
        # 1e-34 of its scale while the hyperbolic functions start to overflow
        out = np.where(np.abs(a * zz.real) > 80, 0.0, out)
        return out.reshape((-1,) + z.shape)

    def tensor_spectrum(self, n, keys):
        n = np.asarray(n, dtype=float)
        ra, rb, dy, dz = keys.T
        pointlike = np.all(ra == rb) and not np.any(dy) and not np.any(dz)
        if not pointlike:
            return None
        a = self.a

        def spec(omega):
            omega = np.asarray(omega, dtype=float).reshape(1, -1)
            r = ra[:, None]
            # the worldline at rho has proper acceleration 1/rho and proper
            # time a rho tau; frame components scale accordingly
            base = planck(omega, self.beta) / (2 * np.pi * (a * r) ** 2)
            # mixed components integrate to zero; the longitudinal one picks
            # up 4 a^2 from the rho-dependence of the interval
            val = (n[0] ** 2 * omega ** 2
                   + n[1] ** 2 * (omega ** 2 + 4 * a * a) / 3.0
                   + (n[2] ** 2 + n[3] ** 2) * (omega ** 2 + a * a) / 3.0) * base / (a * r) ** 2
            return val

        return spec


def _tensor_formula(delta, n, ea, eb):
    """n^I n^J e_I^mu e'_J^nu d_mu d'_nu of the vacuum Wightman function.

    d_mu d'_nu [1 / (4 pi^2 sigma^2)] = (eta_mu_nu / sigma^4 - 4 D_mu D_nu / sigma^6) / (2 pi^2).
    delta has shape (4, ...); ea, eb have shape (4, 4, ...) as e[I, mu].
    """
    n = np.asarray(n, dtype=float)
    va = np.einsum("I,Im...->m...", n, ea)
    vb = np.einsum("I,Im...->m...", n, eb)
    eta = np.array([-1.0, 1.0, 1.0, 1.0]).reshape((4,) + (1,) * (delta.ndim - 1))
    s2 = np.sum(eta * delta * delta, axis=0)
    vv = np.sum(eta * va * vb, axis=0)
    vad = np.sum(eta * va * delta, axis=0)
    vbd = np.sum(eta * vb * delta, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (vv / s2 ** 2 - 4.0 * vad * vbd / s2 ** 3) / (2 * np.pi ** 2)


# ---------------------------------------------------------------------------
# pointlike catalog

def vacuum_kernel_inertial():
    def fn(z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -1.0 / (FOUR_PI2 * z * z)

    def d2(z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -6.0 / (FOUR_PI2 * z ** 4)

    return CorrelatorKernel(
        fn=fn, strip=np.inf, beta_nominal=np.inf, label="vacuum_inertial",
        decay=None, spectrum=lambda w: planck(w, np.inf) / (2 * np.pi), d2=d2)


def _csch2_kernel(k, label, beta):
    """-k^2 / (16 pi^2 sinh^2(k z / 2)) and its closed-form companions."""

    def fn(z):
        return -k * k / (16 * np.pi ** 2) * csch2(0.5 * k * np.asarray(z, dtype=complex))

    def d2(z):
        c2 = csch2(0.5 * k * np.asarray(z, dtype=complex))
        # (csch^2 x)'' = 4 csch^2 x + 6 csch^4 x
        return -k ** 4 / (64 * np.pi ** 2) * (4 * c2 + 6 * c2 * c2)

    return CorrelatorKernel(
        fn=fn, strip=beta, beta_nominal=beta, label=label, decay=k,
        spectrum=lambda w: planck(w, beta) / (2 * np.pi), d2=d2)


def vacuum_kernel_accelerated(a):
    if not a > 0:
        raise PreconditionError("acceleration must be positive")
    return _csch2_kernel(a, f"vacuum_accelerated(a={a:g})", 2 * np.pi / a)


def image_tail_bound(beta, n_images):
    """Upper bound on the dropped images |n| > N, valid for |z| <= N beta / 2."""
    from scipy.special import polygamma
    # sum_{n>N} (n beta)^-2 = trigamma(N + 1) / beta^2; each term bounded by
    # 4 / (4 pi^2 (n beta)^2) on both sides of n = 0
    return 2 * 4 / FOUR_PI2 * float(polygamma(1, n_images + 1)) / beta ** 2


MAX_IMAGES = 2_000_000


def thermal_kernel_inertial(beta, method="resummed", n_images=None, tol=1e-6):
    """Inertial thermal Wightman function sum_n -1 / (4 pi^2 (z + i n beta)^2)."""
    if not beta > 0:
        raise PreconditionError("beta must be positive")
    if np.isinf(beta):
        return replace(vacuum_kernel_inertial(), label="thermal_inertial(beta=inf)")
    label = f"thermal_inertial(beta={beta:g})"
    if method == "resummed":
        return _csch2_kernel(2 * np.pi / beta, label, beta)
    if method != "images":
        raise ValueError(f"unknown method {method!r}")

    if n_images is None:
        n_images = int(np.ceil(2 * 4 / FOUR_PI2 / (beta ** 2 * tol))) + 1
    if n_images > MAX_IMAGES:
        raise NumericalError(
            f"tolerance {tol:.1e} needs {n_images} images (limit {MAX_IMAGES}); "
            "use the resummed form", residual=tol)
    bound = image_tail_bound(beta, n_images)
    if bound > tol:
        raise NumericalError(
            f"image sum truncated at N={n_images} has tail bound {bound:.3e} > {tol:.3e}",
            residual=bound)
    n = np.arange(1, n_images + 1, dtype=float)[:, None] * beta

    def fn(z):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) > 0.5 * n_images * beta):
            raise NumericalError("argument outside the range covered by the tail bound",
                                 residual=bound)
        flat = z.reshape(1, -1)
        z2 = flat * flat
        with np.errstate(divide="ignore", invalid="ignore"):
            s = 1.0 / z2 + np.sum(2 * (z2 - n * n) / (z2 + n * n) ** 2, axis=0)
        return (-s / FOUR_PI2).reshape(z.shape)

    resummed = _csch2_kernel(2 * np.pi / beta, label, beta)
    return CorrelatorKernel(fn=fn, strip=beta, beta_nominal=beta,
                            label=label + f"[images N={n_images}]",
                            decay=2 * np.pi / beta, spectrum=resummed.spectrum)


# ---------------------------------------------------------------------------
# smearing

@dataclass(frozen=True)
class GeometryContext:
    """Acceleration (constant 3-vector or callable of tau) and curvature of the reference curve."""

    accel: object = (0.0, 0.0, 0.0)
    curvature: object = None
    validity_radius: Optional[float] = None
    check_taus: tuple = (0.0, 1.0, 2.0, 5.0)


def background_context(background):
    if isinstance(background, RindlerBackground):
        return GeometryContext(accel=(background.a, 0.0, 0.0))
    return GeometryContext()


def _check_geometry(context, profiles):
    from .geometry import default_validity_radius, volume_element_variation

    a0 = context.accel(0.0) if callable(context.accel) else context.accel
    radius = context.validity_radius
    if radius is None:
        radius = default_validity_radius(a0, context.curvature)
    for p in profiles:
        if p.support_radius > radius:
            raise OutOfDomainError(
                f"profile support {p.support_radius:.6g} exceeds validity radius {radius:.6g}")
    pts = np.concatenate([p.nodes for p in profiles])
    far = pts[np.argsort(np.linalg.norm(pts, axis=1))[-4:]]
    var = volume_element_variation(context.accel, context.curvature, far,
                                   context.check_taus, validity_radius=np.inf)
    if var > 1e-12:
        raise AssumptionError(
            f"sqrt(-g) varies by {var:.3e} along the curve; smeared correlators "
            "would not be stationary")


def _aggregate(keys, coeffs):
    """Merge pairs with identical geometric keys, summing their coefficients."""
    scale = np.maximum(np.abs(keys).max(axis=0), 1e-300)
    rounded = np.round(keys / scale, 12)
    uniq, inv = np.unique(rounded, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    rep = np.zeros((uniq.shape[0], keys.shape[1]))
    rep[inv] = keys
    summed = np.zeros(uniq.shape[0], dtype=complex)
    np.add.at(summed, inv, coeffs)
    keep = summed != 0
    return rep[keep], summed[keep]


def _volume_weights(background, profile):
    w = np.asarray(profile.weights, dtype=complex)
    if isinstance(background, RindlerBackground):
        w = w * (1.0 + background.a * profile.nodes[:, 0])
    return w


def _smeared_kernel(background, nodes_a, ca, nodes_b, cb, direction, label, chunk=1 << 20):
    xa = np.repeat(nodes_a, len(nodes_b), axis=0)
    xb = np.tile(nodes_b, (len(nodes_a), 1))
    coeffs = np.outer(ca, cb).reshape(-1)
    if direction is None:
        keys, c = _aggregate(background.scalar_keys(xa, xb), coeffs)

        def pair(z, k):
            return background.scalar(z, k)

        spec_pairs = lambda w: background.scalar_spectrum(w, keys)  # noqa: E731
    else:
        keys, c = _aggregate(background.tensor_keys(xa, xb), coeffs)

        def pair(z, k):
            return background.tensor(z, k, direction)

        sp = background.tensor_spectrum(direction, keys)
        spec_pairs = sp

    def fn(z):
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        out = np.zeros(flat.shape, dtype=complex)
        step = max(1, chunk // max(1, len(c)))
        for i in range(0, flat.size, step):
            out[i:i + step] = c @ pair(flat[i:i + step], keys)
        return out.reshape(z.shape)

    spectrum = None
    if spec_pairs is not None:
        def spectrum(w):
            w = np.asarray(w, dtype=float)
            vals = spec_pairs(w.reshape(-1))
            out = c @ vals.reshape(len(c), -1)
            if np.all(np.abs(c.imag) == 0):
                out = out.real
            return out.reshape(w.shape)

    decay = background.decay
    return CorrelatorKernel(
        fn=fn, strip=background.strip, beta_nominal=background.beta, label=label,
        decay=decay, spectrum=spectrum,
        hermitian=bool(np.allclose(c.imag, 0)))


@dataclass(frozen=True)
class CorrelatorSet:
    """Smeared correlators <O O>, <O O+>, <O+ O>, <O+ O+> as kernels."""

    w_uu: CorrelatorKernel
    w_ud: CorrelatorKernel
    w_du: CorrelatorKernel
    w_dd: CorrelatorKernel

    def kernels(self):
        return (self.w_uu, self.w_ud, self.w_du, self.w_dd)


def hermitian_set(kernel):
    return CorrelatorSet(kernel, kernel, kernel, kernel)


def smeared_correlator(background, profile_1, profile_2=None, operator="hermitian",
                       direction=None, context=None):
    """Four smeared correlators of O_F = int d^3 xi sqrt(-g) F(xi) O(tau, xi).

    operator: "hermitian" (one real scalar) or "complex" (phi_1 + i phi_2 from two
    independent real scalars, for which <O O> = <O+ O+> = 0).
    direction: None for O = phi, or FW-frame components n^I for O = n^I e_I . grad phi.
    """
    profile_2 = profile_1 if profile_2 is None else profile_2
    context = background_context(background) if context is None else context
    _check_geometry(context, [profile_1, profile_2])
    if direction is not None:
        direction = np.asarray(direction, dtype=float)
        if direction.shape != (4,):
            raise PreconditionError("direction must have four FW-frame components")
    ca = _volume_weights(background, profile_1)
    cb = _volume_weights(background, profile_2)
    tag = "phi" if direction is None else "dphi"
    base = f"{type(background).__name__}:{profile_1.label}x{profile_2.label}:{tag}"

    def build(c1, c2, factor, name):
        return _smeared_kernel(background, profile_1.nodes, factor * c1,
                               profile_2.nodes, c2, direction, f"{base}:{name}")

    if operator == "hermitian":
        if np.allclose(ca.imag, 0) and np.allclose(cb.imag, 0):
            return hermitian_set(build(ca, cb, 1.0, "W"))
        return CorrelatorSet(build(ca, cb, 1.0, "uu"), build(ca, cb.conj(), 1.0, "ud"),
                             build(ca.conj(), cb, 1.0, "du"),
                             build(ca.conj(), cb.conj(), 1.0, "dd"))
    if operator == "complex":
        z = zero_kernel()
        return CorrelatorSet(z, build(ca, cb.conj(), 2.0, "ud"),
                             build(ca.conj(), cb, 2.0, "du"), z)
    raise ValueError(f"unknown operator type {operator!r}")


def complex_operator_set(kernel):
    """Pointlike O = phi_1 + i phi_2 built from two copies of a real-scalar kernel."""
    z = zero_kernel()
    two = kernel.scaled(2.0, label=kernel.label + ":x2")
    return CorrelatorSet(z, two, two, z)


def derivative_coupled_kernel(base, direction=(1.0, 0.0, 0.0, 0.0)):
    """Pulled-back kernel of O = n^I e_I^mu d_mu phi along the trajectory.

    `base` is a pointlike CorrelatorKernel (timelike direction only, via its
    closed-form second derivative) or a background (any FW direction).
    """
    n = np.asarray(direction, dtype=float)
    if n.shape != (4,):
        raise PreconditionError("direction must have four FW-frame components")
    if isinstance(base, (InertialBackground, RindlerBackground)):
        from .detector import point_profile
        return smeared_correlator(base, point_profile(), direction=n).w_uu
    if not isinstance(base, CorrelatorKernel):
        raise UnsupportedKernelError(f"cannot differentiate {type(base).__name__}")
    if base.d2 is None:
        raise UnsupportedKernelError(f"kernel {base.label!r} has no closed-form derivatives")
    if np.any(n[1:] != 0):
        raise UnsupportedKernelError(
            "spatial FW directions need the background, not a bare kernel")
    c = n[0] ** 2

    def fn(z):
        return -c * base.d2(np.asarray(z, dtype=complex))

    spectrum = None
    if base.spectrum is not None:
        def spectrum(w):
            w = np.asarray(w, dtype=float)
            return c * w * w * base.spectrum(w)

    return CorrelatorKernel(fn=fn, strip=base.strip, beta_nominal=base.beta_nominal,
                            label=f"d2[{base.label}]", decay=base.decay,
                            spectrum=spectrum, hermitian=base.hermitian)


def strip_continuation(kernel, tau, sigma):
    """f(tau - i sigma) for 0 < sigma <= strip (sigma = beta is the KMS edge)."""
    # one ulp of slack: strips are often computed as 2 pi / (2 pi / beta)
    if np.any(np.asarray(sigma) <= 0) or np.any(np.asarray(sigma) > kernel.strip * (1 + 1e-14)):
        raise UnsupportedKernelError(
            f"sigma outside the analyticity strip (0, {kernel.strip}]")
    return kernel.continuation(np.asarray(tau, dtype=float) - 1j * np.asarray(sigma))


# ---------------------------------------------------------------------------
# catalog and export

CATALOG = {
    "vacuum_inertial": "massless scalar vacuum, inertial detector (beta = inf)",
    "vacuum_accelerated": "Minkowski vacuum, uniformly accelerated detector (needs a)",
    "thermal_inertial": "thermal state at inverse temperature beta, inertial detector",
}
COUPLINGS = {
    "scalar": "O = phi",
    "derivative": "O = n^I e_I . grad phi for an FW-frame direction n",
}
OPERATORS = {
    "hermitian": "one real scalar field",
    "complex": "phi_1 + i phi_2, two independent real scalars",
}


def background_for(name, a=None, beta=None):
    if name == "vacuum_inertial":
        return InertialBackground(np.inf)
    if name == "vacuum_accelerated":
        return RindlerBackground(a)
    if name == "thermal_inertial":
        if beta is None or not beta > 0:
            raise PreconditionError("beta must be positive")
        return InertialBackground(beta)
    raise KeyError(name)


def pointlike_kernel(name, a=None, beta=None):
    if name == "vacuum_inertial":
        return vacuum_kernel_inertial()
    if name == "vacuum_accelerated":
        return vacuum_kernel_accelerated(a)
    if name == "thermal_inertial":
        return thermal_kernel_inertial(beta)
    raise KeyError(name)


def export_kernel_table(path, kernel, tau, eps=0.0):
    tau = np.asarray(tau, dtype=float)
    w = kernel.eval(tau, eps)
    rows = [(t, v.real, v.imag, eps) for t, v in zip(tau, w)]
    write_table(path, ["dtau", "re_w", "im_w", "eps"], rows,
                meta={"kind": "kernel", "label": kernel.label, "units": "natural"})
