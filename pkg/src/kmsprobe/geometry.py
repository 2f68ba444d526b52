"""Trajectories, Fermi-Walker frames, Fermi normal coordinates and Rindler maps.

Conventions: signature (-,+,+,+), natural units c = hbar = k_B = 1, ambient
spacetime is Minkowski in Cartesian coordinates (t, x, y, z). Curvature only
enters through user-supplied Fermi-frame components along the curve.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .errors import NumericalError, OutOfDomainError, PreconditionError
from .tables import read_numeric, write_table

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


def mdot(u, v):
    """Minkowski inner product over the last axis."""
    u = np.asarray(u)
    v = np.asarray(v)
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


# ---------------------------------------------------------------------------
# curves and frames


@dataclass(frozen=True)
class Curvature:
    """Fermi-frame Riemann components along a curve.

    Each entry is either a constant array or a callable tau -> array:
    ``r0i0j[i, j]``, ``r0kil[k, i, l]`` and ``rikjl[i, k, j, l]``.
    Missing entries are zero.
    """

    r0i0j: object = None
    r0kil: object = None
    rikjl: object = None

    def at(self, tau=0.0):
        def get(v, shape):
            if v is None:
                return np.zeros(shape)
            out = v(tau) if callable(v) else v
            return np.asarray(out, dtype=float).reshape(shape)

        return (get(self.r0i0j, (3, 3)), get(self.r0kil, (3, 3, 3)),
                get(self.rikjl, (3, 3, 3, 3)))

    def scale(self, tau=0.0):
        """Largest absolute component; sets the curvature length 1/sqrt(scale)."""
        return max(float(np.max(np.abs(c))) for c in self.at(tau))


@dataclass(frozen=True)
class CurveData:
    tau_grid: np.ndarray
    events: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    accel_frame: Optional[np.ndarray] = None
    curvature: Optional[Curvature] = None
    # exact callables when the curve is known analytically; used by the
    # transport integrator instead of spline interpolation of the tables
    velocity_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    acceleration_fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    def check(self, tol=1e-9):
        """Raise PreconditionError unless u.u = -1, u.a = 0 and tau increases.

        Tolerances are relative to the Euclidean size of the vectors involved,
        since the Cartesian components of a strongly boosted velocity carry
        round-off of order |u|^2 * machine epsilon.
        """
        tau = np.asarray(self.tau_grid)
        if tau.ndim != 1 or np.any(np.diff(tau) <= 0):
            raise PreconditionError("tau_grid must be strictly increasing")
        u = np.asarray(self.velocity, dtype=float)
        a = np.asarray(self.acceleration, dtype=float)
        un = np.sum(u * u, axis=-1)
        norm_err = np.abs(mdot(u, u) + 1.0) / un
        orth_err = np.abs(mdot(u, a)) / (np.sqrt(un * np.sum(a * a, axis=-1)) + 1e-300)
        if norm_err.max() > tol:
            raise PreconditionError(f"u.u != -1 at sample {int(norm_err.argmax())}")
        if orth_err.max() > tol:
            raise PreconditionError(f"u.a != 0 at sample {int(orth_err.argmax())}")

    def u_at(self, tau):
        if self.velocity_fn is not None:
            return self.velocity_fn(tau)
        return self._splines()[0](float(tau))

    def a_at(self, tau):
        if self.acceleration_fn is not None:
            return self.acceleration_fn(tau)
        return self._splines()[1](float(tau))

    def _splines(self):
        cache = self.__dict__.get("_spl")
        if cache is None:
            cache = (CubicSpline(self.tau_grid, self.velocity, axis=0),
                     CubicSpline(self.tau_grid, self.acceleration, axis=0))
            object.__setattr__(self, "_spl", cache)
        return cache


@dataclass(frozen=True)
class Frame:
    """Tetrad samples: ``tetrad[k, I, mu]`` is e_I^mu at ``tau_grid[k]``."""

    tau_grid: np.ndarray
    tetrad: np.ndarray

    def gram(self):
        e = self.tetrad
        eta = ETA.astype(e.dtype)
        return np.einsum("kIm,mn,kJn->kIJ", e, eta, e)

    def orthonormality_drift(self):
        """max_IJ |g(e_I, e_J) - eta_IJ| at every sample (extended precision)."""
        g = self.gram()
        return np.max(np.abs(g - ETA.astype(g.dtype)), axis=(1, 2)).astype(float)


def inertial_curve(tau_grid, velocity3=(0.0, 0.0, 0.0)):
    tau_grid = np.asarray(tau_grid, dtype=float)
    v = np.asarray(velocity3, dtype=float)
    gamma = 1.0 / np.sqrt(1.0 - v @ v)
    u = gamma * np.concatenate([[1.0], v])

    def ufn(tau):
        return u.astype(np.longdouble) if isinstance(tau, np.longdouble) else u

    def afn(tau):
        return np.zeros(4, dtype=np.longdouble if isinstance(tau, np.longdouble) else float)

    n = tau_grid.size
    return CurveData(
        tau_grid=tau_grid,
        events=tau_grid[:, None] * u[None, :],
        velocity=np.tile(u, (n, 1)),
        acceleration=np.zeros((n, 4)),
        accel_frame=np.zeros((n, 3)),
        velocity_fn=ufn,
        acceleration_fn=afn,
    )


def uniformly_accelerated_curve(a, tau_grid):
    """Hyperbolic worldline of proper acceleration a along +x through the origin."""
    if a <= 0:
        raise PreconditionError("acceleration must be positive")
    tau_grid = np.asarray(tau_grid, dtype=float)

    def ufn(tau):
        return np.array([np.cosh(a * tau), np.sinh(a * tau), 0 * tau, 0 * tau])

    def afn(tau):
        return a * np.array([np.sinh(a * tau), np.cosh(a * tau), 0 * tau, 0 * tau])

    at = a * tau_grid
    events = np.stack([np.sinh(at) / a, (np.cosh(at) - 1.0) / a,
                       0 * at, 0 * at], axis=-1)
    accel_frame = np.zeros((tau_grid.size, 3))
    accel_frame[:, 0] = a
    return CurveData(
        tau_grid=tau_grid,
        events=events,
        velocity=ufn(tau_grid).T,
        acceleration=afn(tau_grid).T,
        accel_frame=accel_frame,
        velocity_fn=ufn,
        acceleration_fn=afn,
    )


def circular_curve(radius, angular_velocity, tau_grid):
    """Uniform circular motion in the x-y plane (coordinate angular velocity)."""
    v = radius * angular_velocity
    if not 0 <= abs(v) < 1:
        raise PreconditionError("orbital speed must be below 1")
    gamma = 1.0 / np.sqrt(1.0 - v * v)
    w = gamma * angular_velocity  # angle per unit proper time
    tau_grid = np.asarray(tau_grid, dtype=float)

    def ufn(tau):
        return gamma * np.array([1.0 + 0 * tau, -v * np.sin(w * tau),
                                 v * np.cos(w * tau), 0 * tau])

    def afn(tau):
        return -gamma * v * w * np.array([0 * tau, np.cos(w * tau),
                                          np.sin(w * tau), 0 * tau])

    events = np.stack([gamma * tau_grid, radius * np.cos(w * tau_grid),
                       radius * np.sin(w * tau_grid), 0 * tau_grid], axis=-1)
    return CurveData(
        tau_grid=tau_grid,
        events=events,
        velocity=ufn(tau_grid).T,
        acceleration=afn(tau_grid).T,
        velocity_fn=ufn,
        acceleration_fn=afn,
    )


def standard_tetrad(u):
    """Orthonormal tetrad with e_0 = u built by Gram-Schmidt on the axes."""
    u = np.asarray(u, dtype=float)
    vecs = [u]
    for k in range(1, 4):
        e = np.zeros(4)
        e[k] = 1.0
        for b in vecs:
            e = e - mdot(e, b) / mdot(b, b) * b
        vecs.append(e / np.sqrt(mdot(e, e)))
    return np.array(vecs)


# ---------------------------------------------------------------------------
# Fermi-Walker transport

def _tableau():
    F = Fraction
    c = [F(0), F(1, 5), F(3, 10), F(4, 5), F(8, 9), F(1), F(1)]
    a = [
        [],
        [F(1, 5)],
        [F(3, 40), F(9, 40)],
        [F(44, 45), F(-56, 15), F(32, 9)],
        [F(19372, 6561), F(-25360, 2187), F(64448, 6561), F(-212, 729)],
        [F(9017, 3168), F(-355, 33), F(46732, 5247), F(49, 176), F(-5103, 18656)],
        [F(35, 384), F(0), F(500, 1113), F(125, 192), F(-2187, 6784), F(11, 84)],
    ]
    b5 = a[6] + [F(0)]
    b4 = [F(5179, 57600), F(0), F(7571, 16695), F(393, 640), F(-92097, 339200),
          F(187, 2100), F(1, 40)]

    def ld(fr):
        return np.longdouble(fr.numerator) / np.longdouble(fr.denominator)

    return ([ld(x) for x in c], [[ld(x) for x in row] for row in a],
            np.array([ld(x) for x in b5]), np.array([ld(x) - ld(y) for x, y in zip(b5, b4)]))


_C, _A, _B5, _BERR = _tableau()


def _fw_rhs(curve, tau, e):
    u = np.asarray(curve.u_at(tau), dtype=np.longdouble)
    acc = np.asarray(curve.a_at(tau), dtype=np.longdouble)
    eta = ETA.astype(np.longdouble)
    ue = e @ eta @ u
    ae = e @ eta @ acc
    # de_I/dtau = u (a.e_I) - a (u.e_I)
    return ae[:, None] * u[None, :] - ue[:, None] * acc[None, :]


def fermi_walker_transport(curve, initial_tetrad, rtol=1e-10, atol=1e-12,
                           max_steps=1_000_000):
    """Fermi-Walker transport a tetrad along `curve` in flat spacetime.

    Embedded Dormand-Prince 5(4) with adaptive steps, carried out in
    ``np.longdouble``: with float64 state the Cartesian components of a frame
    boosted to rapidity 10 cannot represent orthonormality better than ~1e-8.
    No re-orthonormalisation is applied, so the drift reported by
    ``Frame.orthonormality_drift`` measures integrator quality.
    """
    tau_grid = np.asarray(curve.tau_grid, dtype=float)
    e0 = np.asarray(initial_tetrad, dtype=float)
    gram = e0 @ ETA @ e0.T
    if np.max(np.abs(gram - ETA)) > 1e-10:
        raise PreconditionError("initial tetrad is not orthonormal")
    u0 = np.asarray(curve.u_at(tau_grid[0]), dtype=float)
    if np.max(np.abs(e0[0] - u0)) > 1e-10 * max(1.0, np.abs(u0).max()):
        raise PreconditionError("initial e_0 does not equal u(tau_0)")

    e = e0.astype(np.longdouble)
    out = np.empty((tau_grid.size, 4, 4), dtype=np.longdouble)
    out[0] = e
    tau = np.longdouble(tau_grid[0])
    h = np.longdouble(min(0.01, (tau_grid[-1] - tau_grid[0]) / 10 or 0.01))
    steps = 0
    for k in range(1, tau_grid.size):
        target = np.longdouble(tau_grid[k])
        while tau < target:
            if steps > max_steps:
                raise NumericalError(f"step budget exhausted near tau={float(tau):.6g}",
                                     residual=float(tau))
            hh = min(h, target - tau)
            ks = []
            for s in range(7):
                y = e.copy()
                for j, aij in enumerate(_A[s]):
                    y = y + hh * aij * ks[j]
                ks.append(_fw_rhs(curve, tau + _C[s] * hh, y))
            y5 = e + hh * sum(b * kk for b, kk in zip(_B5, ks))
            err = hh * sum(b * kk for b, kk in zip(_BERR, ks))
            scale = atol + rtol * np.maximum(np.abs(e), np.abs(y5))
            ratio = float(np.max(np.abs(err) / scale))
            steps += 1
            if ratio <= 1.0:
                tau = tau + hh
                e = y5
                grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
                h = max(h, hh) * np.longdouble(grow) if hh == h else h
            else:
                h = hh * np.longdouble(max(0.2, 0.9 * ratio ** -0.2))
            if h < 1e-14 * max(1.0, abs(float(tau))):
                raise NumericalError(
                    f"step size collapsed at tau={float(tau):.6g} (sample {k})",
                    residual=ratio)
        out[k] = e
    return Frame(tau_grid=tau_grid, tetrad=out)


def frame_components(frame, vectors):
    """Components V_I = g(e_I, V) of ambient vectors (n, 4) in the frame."""
    e = np.asarray(frame.tetrad, dtype=float)
    return np.einsum("kIm,mn,kn->kI", e, ETA, np.asarray(vectors, dtype=float))


# ---------------------------------------------------------------------------
# Fermi normal coordinates

def default_validity_radius(a_i, curvature=None, tau=0.0, factor=0.1):
    a = float(np.linalg.norm(a_i))
    r = curvature.scale(tau) if curvature is not None else 0.0
    s = max(a, np.sqrt(r))
    return np.inf if s == 0 else factor / s


def _check_radius(xi, a_i, curvature, tau, validity_radius):
    if validity_radius is None:
        validity_radius = default_validity_radius(a_i, curvature, tau)
    norm = float(np.linalg.norm(xi))
    if norm > validity_radius:
        raise OutOfDomainError(
            f"|xi| = {norm:.6g} exceeds the validity radius {validity_radius:.6g}")


def fnc_metric(a_i, curvature, xi, tau=0.0, validity_radius=None):
    """Second-order Fermi normal coordinate metric (g00, g0i, gij) at xi."""
    a_i = np.asarray(a_i, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_radius(xi, a_i, curvature, tau, validity_radius)
    curv = curvature if curvature is not None else Curvature()
    r0i0j, r0kil, rikjl = curv.at(tau)
    g00 = -(1.0 + a_i @ xi) ** 2 - xi @ r0i0j @ xi
    g0i = -(2.0 / 3.0) * np.einsum("kil,k,l->i", r0kil, xi, xi)
    gij = np.eye(3) - (1.0 / 3.0) * np.einsum("ikjl,k,l->ij", rikjl, xi, xi)
    return g00, g0i, gij


def metric_matrix(g00, g0i, gij):
    g = np.empty((4, 4))
    g[0, 0] = g00
    g[0, 1:] = g0i
    g[1:, 0] = g0i
    g[1:, 1:] = gij
    return g


def redshift_factor(a_i, r0i0j, xi, validity_radius=None):
    """d tau_0 / d tau = 1 + a.xi + R_0i0j xi^i xi^j / 2 to second order."""
    a_i = np.asarray(a_i, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = np.zeros((3, 3)) if r0i0j is None else np.asarray(r0i0j, dtype=float)
    curv = Curvature(r0i0j=r)
    _check_radius(xi, a_i, curv, 0.0, validity_radius)
    return 1.0 + a_i @ xi + 0.5 * xi @ r @ xi


def fnc_volume_element(a_i, curvature, xi, tau=0.0, validity_radius=None):
    """sqrt(-det g) of the truncated FNC metric."""
    g = metric_matrix(*fnc_metric(a_i, curvature, xi, tau, validity_radius))
    return float(np.sqrt(-np.linalg.det(g)))


def volume_element_variation(accel, curvature, xi_points, taus, validity_radius=None):
    """Largest relative change of sqrt(-g) over `taus` at any of `xi_points`.

    `accel` is a constant 3-vector or a callable tau -> 3-vector. A value of
    zero means the volume element is tau-independent at the sampled points.
    """
    worst = 0.0
    for xi in np.atleast_2d(xi_points):
        vals = []
        for tau in taus:
            a = accel(tau) if callable(accel) else accel
            vals.append(fnc_volume_element(a, curvature, xi, tau, validity_radius))
        vals = np.array(vals)
        worst = max(worst, float(np.ptp(vals) / np.abs(vals).max()))
    return worst


# ---------------------------------------------------------------------------
# Rindler wedge

def rindler_map(tau, X, y, z, a):
    """Rindler (tau, X, y, z) -> Minkowski (t, x, y, z) for the wedge X > -1/a.

    The wedge is shifted so that X = 0 is the worldline of proper
    acceleration a through the inertial origin; tau is its proper time.
    Accepts complex tau (used for analytic continuation of correlators).
    """
    if a <= 0:
        raise PreconditionError("acceleration must be positive")
    X = np.asarray(X)
    if np.any(np.real(X) <= -1.0 / a):
        raise OutOfDomainError("point lies outside the Rindler wedge (X <= -1/a)")
    rho = X + 1.0 / a
    return rho * np.sinh(a * tau), rho * np.cosh(a * tau) - 1.0 / a, y, z


def rindler_inverse(t, x, y, z, a):
    """Minkowski (t, x, y, z) -> Rindler (tau, X, y, z)."""
    if a <= 0:
        raise PreconditionError("acceleration must be positive")
    t = np.asarray(t, dtype=float)
    s = np.asarray(x, dtype=float) + 1.0 / a
    if np.any(s <= np.abs(t)):
        raise OutOfDomainError("point lies outside the Rindler wedge")
    plus, minus = s + t, s - t
    tau = 0.5 * np.log(plus / minus) / a
    X = np.sqrt(plus * minus) - 1.0 / a
    return tau, X, y, z


def rindler_worldline(X0, a, tau):
    """Minkowski events of the constant-X0 Rindler observer at coordinate time tau."""
    t, x, y, z = rindler_map(np.asarray(tau), X0, 0.0, 0.0, a)
    tau = np.asarray(tau)
    return np.stack([t, x, np.zeros_like(tau), np.zeros_like(tau)], axis=-1)


def boost_generator(rank=1):
    """S^{01} for tensors with `rank` upper indices, or rank=(p, q) upper/lower.

    Normalised so that exp((a tau / 2) S^{01}) is a boost of rapidity a tau.
    """
    p, q = (rank, 0) if np.isscalar(rank) else tuple(rank)
    if p < 0 or q < 0 or int(p) != p or int(q) != q:
        raise ValueError(f"malformed tensor rank {rank!r}")
    k = np.zeros((4, 4))
    k[0, 1] = k[1, 0] = 1.0
    slots = [k] * int(p) + [-k.T] * int(q)
    dim = 4 ** len(slots)
    gen = np.zeros((dim, dim))
    for i, x in enumerate(slots):
        term = np.ones((1, 1))
        for j in range(len(slots)):
            term = np.kron(term, x if j == i else np.eye(4))
        gen += term
    return 2.0 * gen


def boost_pushforward(tau, a=1.0, rank=1):
    """Pushforward of the Rindler flow by tau acting on frame components."""
    return expm(0.5 * a * tau * boost_generator(rank))


# ---------------------------------------------------------------------------
# table IO

CURVE_COLUMNS = (["tau", "t", "x", "y", "z"] + [f"u{m}" for m in range(4)]
                 + [f"a{m}" for m in range(4)] + ["a_1", "a_2", "a_3"])
_R0I0J_COLUMNS = [f"R0{i}0{j}" for i in range(1, 4) for j in range(1, 4)]


def write_curve_table(path, curve, units="natural"):
    n = curve.tau_grid.size
    af = curve.accel_frame if curve.accel_frame is not None else np.zeros((n, 3))
    cols = list(CURVE_COLUMNS)
    blocks = [curve.tau_grid[:, None], curve.events, curve.velocity,
              curve.acceleration, af]
    if curve.curvature is not None:
        cols += _R0I0J_COLUMNS
        blocks.append(np.array([curve.curvature.at(t)[0].ravel()
                                for t in curve.tau_grid]))
    data = np.hstack(blocks)
    write_table(path, cols, data.tolist(), meta={"kind": "curve", "units": units})


def read_curve_table(path):
    meta, cols, data = read_numeric(path)
    if meta.get("units", "natural") != "natural":
        raise PreconditionError(f"{path}: only natural-unit curve tables are supported")
    idx = {c: i for i, c in enumerate(cols)}
    missing = [c for c in CURVE_COLUMNS if c not in idx]
    if missing:
        raise PreconditionError(f"{path}: missing columns {missing}")

    def take(names):
        return data[:, [idx[c] for c in names]]

    curvature = None
    if all(c in idx for c in _R0I0J_COLUMNS):
        tau = data[:, idx["tau"]]
        r = take(_R0I0J_COLUMNS).reshape(-1, 3, 3)
        spl = CubicSpline(tau, r, axis=0)
        curvature = Curvature(r0i0j=lambda t: spl(float(t)))
    return CurveData(
        tau_grid=data[:, idx["tau"]],
        events=take(["t", "x", "y", "z"]),
        velocity=take([f"u{m}" for m in range(4)]),
        acceleration=take([f"a{m}" for m in range(4)]),
        accel_frame=take(["a_1", "a_2", "a_3"]),
        curvature=curvature,
    )
