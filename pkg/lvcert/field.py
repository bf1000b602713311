"""The loop space E, its circle action, the Theta geometry and the operators N, F, G.

Loops are stored as complex Fourier coefficients ``z_k`` (k = 1..K) per
component with ``x(t) = Re sum_k z_k exp(ikt)``, so ``z_k = c_k - i s_k`` for
the cosine/sine pair ``(c_k, s_k)``. The mean is zero by construction.
Time shifts, delays, derivatives and antiderivatives are all diagonal in this
representation; pointwise products are taken on a grid of ``M = 4K+1``
points, which resolves products of two degree-K loops exactly.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .constants import BOUND_SAFETY, MAX_EXPONENT
from .errors import BoundOverflow
from .log import get_logger

logger = get_logger(__name__)

TWO_PI = 2.0 * math.pi
BETA_VARIANTS = ("one", "floor", "radial", "distance")


def default_grid(K):
    return 4 * K + 1


# ----------------------------
# Loop space
# ----------------------------
class FourierLoop:
    """A zero-mean 2pi-periodic pair of functions, truncated at mode K.

    Args:
        z (array_like): Complex coefficients of shape ``(2, K)``; column
            ``k-1`` holds mode ``k``.
        lambda_tag (float | None): Associated lambda when the loop represents
            a point of ``E x R+``.
    """

    __slots__ = ("z", "lambda_tag")

    def __init__(self, z, lambda_tag=None):
        z = np.array(z, dtype=complex)
        if z.ndim != 2 or z.shape[0] != 2 or z.shape[1] < 1:
            raise ValueError(f"expected coefficients of shape (2, K), got {z.shape}")
        self.z = z
        self.lambda_tag = lambda_tag

    # -- construction -------------------------------------------------
    @classmethod
    def zeros(cls, K, lambda_tag=None):
        return cls(np.zeros((2, K), dtype=complex), lambda_tag)

    @classmethod
    def from_coefficients(cls, cos, sin, lambda_tag=None):
        """Build from real cosine and sine arrays of shape ``(2, K)``."""
        cos = np.asarray(cos, dtype=float)
        sin = np.asarray(sin, dtype=float)
        return cls(cos - 1j * sin, lambda_tag)

    @classmethod
    def mode(cls, K, k, component=0, cos=1.0, sin=0.0):
        """Single harmonic ``cos * cos(kt) + sin * sin(kt)`` in one component."""
        z = np.zeros((2, K), dtype=complex)
        z[component, k - 1] = cos - 1j * sin
        return cls(z)

    @classmethod
    def from_grid(cls, values, K, lambda_tag=None):
        """Project grid samples on ``t_j = 2 pi j / M`` onto modes 1..K.

        The mean (mode 0) is discarded.
        """
        values = np.asarray(values, dtype=float)
        M = values.shape[-1]
        if M < 2 * K + 1:
            raise ValueError(f"grid of {M} points cannot resolve {K} modes")
        spec = np.fft.rfft(values, axis=-1)
        return cls(spec[:, 1 : K + 1] * (2.0 / M), lambda_tag)

    @classmethod
    def from_vector(cls, vec, lambda_tag=None):
        """Inverse of :meth:`as_vector`."""
        vec = np.asarray(vec, dtype=float)
        K = vec.size // 4
        v = vec.reshape(2, 2, K)
        return cls(v[:, 0, :] - 1j * v[:, 1, :], lambda_tag)

    # -- views --------------------------------------------------------
    @property
    def K(self):
        return self.z.shape[1]

    @property
    def cos(self):
        return self.z.real.copy()

    @property
    def sin(self):
        return -self.z.imag

    @property
    def wavenumbers(self):
        return np.arange(1, self.K + 1)

    def as_vector(self):
        """Real layout ``[cos_1, sin_1, cos_2, sin_2]``, each of length K."""
        return np.stack([self.z.real, -self.z.imag], axis=1).reshape(-1)

    def to_grid(self, M=None):
        """Sample both components on ``t_j = 2 pi j / M``; returns shape ``(2, M)``."""
        M = M or default_grid(self.K)
        if M < 2 * self.K + 1:
            raise ValueError(f"grid of {M} points cannot resolve {self.K} modes")
        spec = np.zeros((2, M // 2 + 1), dtype=complex)
        spec[:, 1 : self.K + 1] = self.z * (M / 2.0)
        return np.fft.irfft(spec, n=M, axis=-1)

    def value_at(self, t):
        """Evaluate at arbitrary times (array_like); returns shape ``(2,) + t.shape``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.multiply.outer(t, self.wavenumbers))
        return np.real(np.tensordot(self.z, phase, axes=(1, -1)))

    # -- linear operations --------------------------------------------
    def _new(self, z):
        return FourierLoop(z, self.lambda_tag)

    def shift(self, phi):
        """The loop ``t -> x(t + phi)``."""
        return self._new(self.z * np.exp(1j * self.wavenumbers * phi))

    def delay(self, d):
        """The loop ``t -> x(t - d)``."""
        return self.shift(-d)

    def derivative(self):
        return self._new(self.z * (1j * self.wavenumbers))

    def antiderivative(self):
        """Zero-mean antiderivative."""
        return self._new(self.z / (1j * self.wavenumbers))

    def truncate(self, K):
        """Keep modes up to *K*, zero-padding when *K* exceeds the current size."""
        z = np.zeros((2, K), dtype=complex)
        n = min(K, self.K)
        z[:, :n] = self.z[:, :n]
        return self._new(z)

    def map_components(self, T):
        """Apply a 2x2 real matrix to the component axis."""
        return self._new(np.asarray(T, dtype=float) @ self.z)

    def __add__(self, other):
        return self._new(self.z + other.z)

    def __sub__(self, other):
        return self._new(self.z - other.z)

    def __mul__(self, scalar):
        return self._new(self.z * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.z)

    # -- metric -------------------------------------------------------
    def _weights(self):
        k = self.wavenumbers
        return math.pi * (1.0 + k * k)

    def inner(self, other):
        """Sobolev inner product ``sum_i int x_i' y_i' + x_i y_i``."""
        return float(np.sum(self._weights() * np.real(self.z * np.conj(other.z))))

    def component_norms(self):
        return np.sqrt(np.sum(self._weights() * np.abs(self.z) ** 2, axis=1))

    def norm2(self):
        return float(np.sum(self._weights() * np.abs(self.z) ** 2))

    def norm(self):
        return math.sqrt(self.norm2())

    def l2_inner(self, other):
        """Plain ``int_0^{2pi} <x, y> dt``."""
        return float(math.pi * np.sum(np.real(self.z * np.conj(other.z))))

    def isotropy(self, tol=1e-12):
        """Order of the largest cyclic group of shifts fixing the loop (0 for the zero loop)."""
        scale = np.max(np.abs(self.z)) if self.z.size else 0.0
        if scale == 0.0:
            return 0
        active = np.flatnonzero(np.max(np.abs(self.z), axis=0) > tol * scale) + 1
        return int(np.gcd.reduce(active))

    def __repr__(self):
        return f"FourierLoop(K={self.K}, norm={self.norm():.6g}, lambda={self.lambda_tag})"


def act(x, phi):
    """Circle action: the loop ``t -> x(t + phi)``."""
    return x.shift(phi)


# ----------------------------
# Cutoff profiles and geometry
# ----------------------------
@dataclass(frozen=True)
class CutoffProfile:
    """Smooth monotone ramp between ``floor`` and 1.

    A decreasing profile equals 1 up to ``low`` and ``floor`` from ``high``
    on; an increasing one equals ``floor`` at ``low`` and 1 from ``high`` on.
    The transition is the cubic Hermite ramp ``3u^2 - 2u^3``.
    """

    low: float
    high: float
    floor: float
    increasing: bool = False

    def __post_init__(self):
        if not (0.0 < self.floor < 1.0):
            raise ValueError(f"floor must lie in (0, 1), got {self.floor}")
        if not self.low < self.high:
            raise ValueError(f"profile needs low < high, got {self.low}, {self.high}")

    def _u(self, s):
        return np.clip((np.asarray(s, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def __call__(self, s):
        u = self._u(s)
        h = u * u * (3.0 - 2.0 * u)
        if self.increasing:
            out = self.floor + (1.0 - self.floor) * h
        else:
            out = 1.0 - (1.0 - self.floor) * h
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, s):
        u = self._u(s)
        dh = 6.0 * u * (1.0 - u) / (self.high - self.low)
        out = (1.0 - self.floor) * dh * (1.0 if self.increasing else -1.0)
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, level):
        """The unique ``s`` in the transition band with ``profile(s) = level``."""
        if not (self.floor < level < 1.0):
            raise ValueError(f"level {level} outside ({self.floor}, 1)")
        return brentq(lambda s: self(s) - level, self.low, self.high, xtol=1e-15 * self.high, rtol=1e-14)


def radial_profile(alpha0, radius_r, radius_R):
    """The decreasing cutoff with thresholds ``sqrt(r)`` and ``sqrt(R)`` on the squared norm."""
    if not radius_r < radius_R:
        raise ValueError("radial cutoff needs r < R")
    return CutoffProfile(math.sqrt(radius_r), math.sqrt(radius_R), alpha0)


def apriori_bounds(system, lambda_hi):
    """Box and derivative bounds for periodic solutions in Theta_0.

    Args:
        system (LVSystem): The system.
        lambda_hi (float): Upper end of the lambda window.

    Returns:
        tuple[float, float, float, float, float]: ``(d1, d2, d3, d4, m0)``.

    Raises:
        BoundOverflow: If an exponent exceeds the overflow guard.
    """
    A, b = system.A, system.b
    scale = TWO_PI * lambda_hi
    upper = []
    for i in range(2):
        e = scale * (A[i, 0] * b[0] + A[i, 1] * b[1])
        if e > MAX_EXPONENT:
            raise BoundOverflow(e)
        upper.append(b[i] * math.expm1(e))
    d3, d4 = upper
    lower = []
    for i in range(2):
        e = scale * (A[i, 0] * d3 + A[i, 1] * d4)
        lower.append(-b[i] * math.expm1(-e))
    d1, d2 = lower
    m0 = BOUND_SAFETY * max(
        lambda_hi * (A[i, 0] * d3 + A[i, 1] * d4) * (b[i] + (d3, d4)[i]) for i in range(2)
    )
    logger.debug("a priori bounds d=(%g, %g, %g, %g) m0=%g", d1, d2, d3, d4, m0)
    return d1, d2, d3, d4, m0


@dataclass(frozen=True)
class ThetaGeometry:
    """Bounds and cutoffs describing the admissible set Theta.

    Attributes:
        d1, d2, d3, d4 (float): Box bounds ``-d_i < x_i < d_{i+2}``.
        m0 (float): Derivative bound.
        m1 (float): Isolation radius of the origin.
        alpha0 (float): Cutoff floor.
        delta0 (float): Squared distance from the inner box to the boundary.
        radius_r, radius_R (float): Radial cutoff radii.
        b (tuple[float, float]): Equilibrium the box is measured against.
        profile (CutoffProfile): Decreasing radial profile.
        distance_profile (CutoffProfile): Increasing profile in the
            squared boundary distance.
    """

    d1: float
    d2: float
    d3: float
    d4: float
    m0: float
    m1: float
    alpha0: float
    delta0: float
    radius_r: float
    radius_R: float
    b: tuple
    profile: CutoffProfile
    distance_profile: CutoffProfile

    @classmethod
    def build(cls, system, lambda_hi, alpha0, radius_r, radius_R, m1=None, catalog=None):
        """Assemble the geometry for a window.

        ``m1`` defaults to half the smallest Sobolev norm among catalog
        amplitudes (or ``sqrt(radius_r)`` when no amplitude is known).
        """
        d1, d2, d3, d4, m0 = apriori_bounds(system, lambda_hi)
        b = system.b
        # the standing assumption d_{i+2} > (b_i + d_i)/2 is a free enlargement
        d3 = max(d3, 0.5 * (b[0] + d1) * (1.0 + 1e-9))
        d4 = max(d4, 0.5 * (b[1] + d2) * (1.0 + 1e-9))
        margin = min(0.5 * (b[0] - d1), 0.5 * (b[1] - d2), d3, d4)
        # b_i - d_i underflows when the box is astronomically loose
        margin = max(margin, 1e-12 * float(np.min(b)))
        delta0 = TWO_PI * margin * margin
        profile = radial_profile(alpha0, radius_r, radius_R)
        if m1 is None:
            norms = [
                c.amplitude * math.sqrt(math.pi * (1.0 + c.k**2))
                for c in (catalog or [])
                if c.amplitude is not None
            ]
            m1 = 0.5 * min(norms) if norms else math.sqrt(radius_r)
        return cls(
            d1=d1,
            d2=d2,
            d3=d3,
            d4=d4,
            m0=m0,
            m1=m1,
            alpha0=alpha0,
            delta0=delta0,
            radius_r=radius_r,
            radius_R=radius_R,
            b=(float(b[0]), float(b[1])),
            profile=profile,
            distance_profile=CutoffProfile(0.0, delta0, alpha0, increasing=True),
        )

    @property
    def lower(self):
        return (self.d1, self.d2)

    @property
    def upper(self):
        return (self.d3, self.d4)


def in_theta0(x, b, M=None):
    """True when ``b_i + x_i(t) > 0`` on the sampling grid."""
    return float(np.min(np.asarray(b)[:, None] + x.to_grid(M))) > 0.0


def theta_margins(x, geom, M=None):
    """Signed margins of the outer constraints of Theta.

    Returns:
        dict[str, float]: ``box_lower``, ``box_upper`` (sup-norm distance to the
        Theta_M faces), ``energy`` (L2 distance of the derivative to the
        Theta_1 sphere) and ``ball`` (Sobolev norm margin beyond Theta_{m1}).
    """
    g = x.to_grid(M)
    b = np.asarray(geom.b)
    lower = np.min(g, axis=1) + 0.5 * (b + np.asarray(geom.lower))
    upper = 2.0 * np.asarray(geom.upper) - np.max(g, axis=1)
    dx = x.derivative()
    energy = math.sqrt(TWO_PI) * geom.m0 - np.sqrt(
        np.maximum(math.pi * np.sum(np.abs(dx.z) ** 2, axis=1), 0.0)
    )
    return {
        "box_lower": float(np.min(lower)),
        "box_upper": float(np.min(upper)),
        "energy": float(np.min(energy)),
        "ball": float(np.max(x.component_norms()) - 0.5 * geom.m1),
    }


def boundary_distance2(x, geom, M=None):
    """Squared Sobolev-distance surrogate from *x* to the outer boundary of Theta."""
    m = theta_margins(x, geom, M)
    box = min(m["box_lower"], m["box_upper"])
    if box <= 0.0 or m["energy"] <= 0.0:
        return 0.0
    return min(TWO_PI * box * box, m["energy"] ** 2)


def beta(x, geom, variant="radial", M=None):
    """Cutoff value in ``[alpha0, 1]``.

    Args:
        x (FourierLoop): Loop.
        geom (ThetaGeometry | None): Geometry (not needed for ``"one"``).
        variant (str): ``"radial"`` (profile of the squared norm),
            ``"distance"`` (profile of the squared distance to the boundary
            of Theta), ``"one"`` or ``"floor"`` (constants 1 and alpha0).
    """
    if variant == "one":
        return 1.0
    if variant == "floor":
        return geom.alpha0
    if variant == "radial":
        return geom.profile(x.norm2())
    if variant == "distance":
        return geom.distance_profile(boundary_distance2(x, geom, M))
    raise ValueError(f"unknown beta variant {variant!r}")


# ----------------------------
# Operators
# ----------------------------
def eval_N(x, lam, theta, system, M=None):
    """Grid values of ``-(A x(t - tau/lam))_i (b_i + theta x_i(t))``.

    Returns:
        numpy.ndarray: Shape ``(2, M)``.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    M = M or default_grid(x.K)
    xd = x.delay(system.tau / lam).to_grid(M)
    xg = x.to_grid(M)
    return -(system.A @ xd) * (system.b[:, None] + theta * xg)


def _drift(scale, beta_value, N):
    return (scale * beta_value) * N


def c_constants(x, lam, theta, system, geom=None, variant="one", M=None):
    """Correction constants that close the antiderivative into a loop.

    ``c1`` is the mean of the integrand ``lam beta N`` (trapezoid rule on the
    periodic grid) and ``c2`` the mean of ``int_0^t (lam beta N) - t c1``.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray]: ``(c1, c2)``, each of length 2.
    """
    M = M or default_grid(x.K)
    g = _drift(lam, beta(x, geom, variant, M), eval_N(x, lam, theta, system, M))
    c1 = g.mean(axis=1)
    osc = FourierLoop.from_grid(g, (M - 1) // 2).antiderivative()
    # int_0^t of the oscillating part is AD(t) - AD(0); AD has zero mean
    c2 = -np.real(np.sum(osc.z, axis=1))
    return c1, c2


def eval_F(x, lam, theta, system, geom=None, variant="one", M=None):
    """Fixed-point operator F: zero-mean antiderivative of ``lam beta N(x, theta)``.

    Fixed points in Theta_0 are exactly the 2pi-periodic solutions of the
    rescaled system (with cutoff).
    """
    M = M or default_grid(x.K)
    g = _drift(lam, beta(x, geom, variant, M), eval_N(x, lam, theta, system, M))
    return FourierLoop.from_grid(g, x.K, lambda_tag=lam).antiderivative()


def identity_sigma(lam):
    return lam


def eval_G(x, lam, theta, system, geom=None, sigma=None, variant="one", M=None):
    """Homotopy G: zero-mean antiderivative of ``(theta sigma(lam) + (1-theta) lam) beta N(x, 0)``.

    ``eval_G(x, lam, 0)`` coincides with ``eval_F(x, lam, 0)``.
    """
    sigma = sigma or identity_sigma
    M = M or default_grid(x.K)
    scale = theta * sigma(lam) + (1.0 - theta) * lam
    g = _drift(scale, beta(x, geom, variant, M), eval_N(x, lam, 0.0, system, M))
    return FourierLoop.from_grid(g, x.K, lambda_tag=lam).antiderivative()


def fixed_point_residual(x, lam, theta, system, geom=None, variant="one", M=None):
    """Sobolev norm of ``F(x, lam, theta) - x``."""
    return (eval_F(x, lam, theta, system, geom, variant, M) - x).norm()
