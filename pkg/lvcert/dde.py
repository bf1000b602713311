"""Method-of-steps simulation of the delayed Lotka-Volterra and logistic equations.

Classical RK4 on a grid whose step divides the delay, so every delayed
lookup lands on a node (or on the midpoint of a completed interval, served by
the cubic Hermite interpolant of the stored nodes).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .constants import APERIODIC_CONFIDENCE, BLOWUP_LIMIT, LOCAL_ERROR_TOL, TARGET_STEP
from .errors import Aperiodic, BlowUp, NoCrossing, StepTooLarge
from .log import get_logger
from .model import LogisticSystem
from .utils_io import write_csv

logger = get_logger(__name__)

FRAMES = ("original_u", "shifted_x", "rescaled")
HISTORY_NODES = 4097


# ----------------------------
# History
# ----------------------------
class HistoryFunction:
    """Initial function on ``[-tau, 0]``.

    Use :meth:`constant`, :meth:`sampled` or :meth:`from_loop` rather than the
    constructor.
    """

    def __init__(self, kind, dim, value_fn, derivative_fn):
        self.kind = kind
        self.dim = dim
        self._value = value_fn
        self._derivative = derivative_fn

    @classmethod
    def constant(cls, values):
        v = np.atleast_1d(np.asarray(values, dtype=float)).copy()
        zero = np.zeros_like(v)
        return cls("constant", v.size, lambda s: v.copy(), lambda s: zero.copy())

    @classmethod
    def sampled(cls, times, values, derivatives=None):
        """Cubic interpolation through nodes ``times`` (ascending, covering ``[-tau, 0]``).

        Args:
            times (array_like): Node times.
            values (array_like): Shape ``(dim, n)`` or ``(n,)``.
            derivatives (array_like | None): Node derivatives; a Hermite
                spline is used when given, a natural cubic spline otherwise.
        """
        from scipy.interpolate import CubicSpline

        times = np.asarray(times, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if derivatives is None:
            spline = CubicSpline(times, values, axis=1)
        else:
            derivatives = np.atleast_2d(np.asarray(derivatives, dtype=float))
            spline = CubicHermiteSpline(times, values, derivatives, axis=1)
        dspline = spline.derivative()
        return cls("sampled", values.shape[0], spline, dspline)

    @classmethod
    def from_loop(cls, loop, lam, tau, frame="shifted_x", b=None):
        """Physical-time history ``x(t) = loop(t / lam)`` on ``[-tau, 0]``.

        With ``frame="original_u"`` the equilibrium *b* is added. In the
        ``rescaled`` frame the loop is sampled on ``[-tau/lam, 0]`` as is.
        """
        if frame == "rescaled":
            span, scale = tau / lam, 1.0
        else:
            span, scale = tau, 1.0 / lam
        times = np.linspace(-span, 0.0, HISTORY_NODES)
        values = loop.value_at(times * scale)
        derivatives = loop.derivative().value_at(times * scale) * scale
        if frame == "original_u":
            values = values + np.asarray(b, dtype=float)[:, None]
        return cls.sampled(times, values, derivatives)

    def value(self, s):
        return np.asarray(self._value(s), dtype=float).reshape(self.dim)

    def derivative(self, s):
        return np.asarray(self._derivative(s), dtype=float).reshape(self.dim)


# ----------------------------
# Trajectory
# ----------------------------
@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense solution: nodes ``t``, states ``y`` and derivatives ``dy`` of shape ``(dim, n)``."""

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    h: float
    tau: float
    frame: str = "original_u"
    b: np.ndarray = None
    lam: float = None

    def __post_init__(self):
        for arr in (self.t, self.y, self.dy):
            arr.setflags(write=False)

    @classmethod
    def from_samples(cls, t, y, dy, frame="shifted_x", tau=0.0):
        t = np.array(t, dtype=float)
        y = np.atleast_2d(np.array(y, dtype=float))
        dy = np.atleast_2d(np.array(dy, dtype=float))
        h = float(t[1] - t[0]) if t.size > 1 else 0.0
        return cls(t, y, dy, h, tau, frame)

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t1(self):
        return float(self.t[-1])

    @property
    def dim(self):
        return self.y.shape[0]

    def component(self, i):
        return self.y[i]

    def _spline(self):
        return CubicHermiteSpline(self.t, self.y, self.dy, axis=1)

    def sample(self, times):
        """Hermite dense output at *times*; returns shape ``(dim,) + times.shape``."""
        times = np.asarray(times, dtype=float)
        if np.any(times < self.t0 - 1e-12) or np.any(times > self.t1 + 1e-12):
            raise ValueError(f"sample times outside [{self.t0}, {self.t1}]")
        return self._spline()(times)

    def to_frame(self, frame):
        """Convert between ``original_u`` and ``shifted_x`` (``u = b + x``) or out of ``rescaled``."""
        if frame == self.frame:
            return self
        t, y, dy = self.t, self.y, self.dy
        if self.frame == "rescaled":
            # s = t / lam
            t, dy = t * self.lam, dy / self.lam
            if frame == "shifted_x":
                return Trajectory(t.copy(), y.copy(), dy.copy(), self.h * self.lam, self.tau, frame, self.b)
            y = y + self.b[:, None]
            return Trajectory(t.copy(), y, dy.copy(), self.h * self.lam, self.tau, frame, self.b)
        if frame == "rescaled":
            raise ValueError("conversion into the rescaled frame needs a lambda; integrate there directly")
        if self.b is None:
            raise ValueError("frame conversion needs the equilibrium")
        shift = -self.b[:, None] if frame == "shifted_x" else self.b[:, None]
        return Trajectory(t.copy(), y + shift, dy.copy(), self.h, self.tau, frame, self.b, self.lam)

    def write_csv(self, path, every=1):
        """Write ``t,u1,u2,du1,du2`` (``t,u1,du1`` in scalar mode)."""
        header = ["t"] + [f"u{i + 1}" for i in range(self.dim)] + [f"du{i + 1}" for i in range(self.dim)]
        columns = [self.t[::every]] + [c[::every] for c in self.y] + [c[::every] for c in self.dy]
        write_csv(path, header, columns)


# ----------------------------
# Integration
# ----------------------------
def _vector_field(system, frame, lam):
    """Return ``(rhs(y, yd), delay, equilibrium)`` for *system* in *frame*."""
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}")
    if isinstance(system, LogisticSystem):
        alpha = system.alpha
        if frame == "original_u":
            return (lambda y, yd: alpha * y * (1.0 - yd)), system.tau, system.b
        if frame == "shifted_x":
            return (lambda y, yd: -alpha * yd * (1.0 + y)), system.tau, system.b
        raise ValueError("the logistic equation has no rescaled frame")
    A, r, b = system.A, system.r, system.b
    if frame == "original_u":
        return (lambda y, yd: y * (r - A @ yd)), system.tau, b
    if frame == "shifted_x":
        return (lambda y, yd: -(A @ yd) * (b + y)), system.tau, b
    if lam is None or lam <= 0:
        raise ValueError("the rescaled frame needs a positive lambda")
    return (lambda y, yd: -lam * (A @ yd) * (b + y)), system.tau / lam, b


def aligned_step(tau, h):
    """Largest step not exceeding *h* that divides *tau* exactly."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    if tau <= 0:
        return h
    n = max(1, math.ceil(tau / h - 1e-12))
    return tau / n


class _Stepper:
    """RK4 on aligned nodes with delayed lookups into the completed past."""

    def __init__(self, rhs, delay, history, h, n_steps):
        self.rhs = rhs
        self.delay = delay
        self.history = history
        self.h = h
        self.lag = int(round(delay / h)) if delay > 0 else 0
        dim = history.dim
        self.y = np.empty((dim, n_steps + 1))
        self.dy = np.empty((dim, n_steps + 1))

    def node(self, j):
        """State at time ``j h`` (history when ``j <= 0``)."""
        if j <= 0:
            return self.history.value(j * self.h)
        return self.y[:, j]

    def mid(self, j):
        """State at ``(j + 1/2) h``."""
        if j < 0:
            return self.history.value((j + 0.5) * self.h)
        y0, y1 = self.y[:, j], self.y[:, j + 1]
        f0, f1 = self.dy[:, j], self.dy[:, j + 1]
        return 0.5 * (y0 + y1) + self.h * (f0 - f1) / 8.0

    def derivative_at(self, i):
        y = self.y[:, i]
        return self.rhs(y, self.node(i - self.lag) if self.lag else y)

    def step(self, i, h=None, span=1):
        """One RK4 step of length ``span * h`` from node *i*."""
        h = self.h if h is None else h
        y = self.y[:, i]
        if not self.lag:
            k1 = self.rhs(y, y)
            a = y + 0.5 * h * k1
            k2 = self.rhs(a, a)
            c = y + 0.5 * h * k2
            k3 = self.rhs(c, c)
            e = y + h * k3
            k4 = self.rhs(e, e)
            return y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        j = i - self.lag
        d0 = self.node(j)
        if span == 1:
            dm, d1 = self.mid(j), self.node(j + 1)
        else:
            dm, d1 = self.node(j + 1), self.node(j + 2)
        k1 = self.rhs(y, d0)
        k2 = self.rhs(y + 0.5 * h * k1, dm)
        k3 = self.rhs(y + 0.5 * h * k2, dm)
        k4 = self.rhs(y + h * k3, d1)
        return y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    def check_error(self, i, t, tol):
        """Step doubling from node *i*; needs the two fine steps already taken."""
        coarse = self.step(i, 2.0 * self.h, span=2)
        fine = self.y[:, i + 2]
        scale = max(1.0, float(np.max(np.abs(fine))))
        estimate = float(np.max(np.abs(fine - coarse))) / 15.0 / (2.0 * self.h) / scale
        if estimate > tol:
            raise StepTooLarge(t, estimate, tol)
        return estimate


def integrate(system, history, t_end, h=None, frame="original_u", lam=None, tol=LOCAL_ERROR_TOL):
    """Integrate a delay system by the method of steps.

    Args:
        system (LVSystem | LogisticSystem): System to integrate.
        history (HistoryFunction): Initial function in the same frame.
        t_end (float): Final time (in the frame's own time variable).
        h (float | None): Requested step; adjusted down to divide the delay.
        frame (str): ``"original_u"``, ``"shifted_x"`` or ``"rescaled"``.
        lam (float | None): Lambda of the rescaled frame.
        tol (float): Step-doubling tolerance (relative, per unit time).

    Returns:
        Trajectory: Nodes on ``[0, t_end]``.

    Raises:
        StepTooLarge: Local error estimate above *tol*.
        BlowUp: A component exceeds the blow-up limit.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    rhs, delay, b = _vector_field(system, frame, lam)
    h = aligned_step(delay, h or TARGET_STEP)
    n_steps = max(1, int(round(t_end / h)))
    st = _Stepper(rhs, delay, history, h, n_steps)
    st.y[:, 0] = history.value(0.0)
    st.dy[:, 0] = st.derivative_at(0)
    logger.debug("integrate frame=%s h=%.6g steps=%d delay=%.6g", frame, h, n_steps, delay)

    for i in range(n_steps):
        st.y[:, i + 1] = st.step(i)
        st.dy[:, i + 1] = st.derivative_at(i + 1)
        peak = float(np.max(np.abs(st.y[:, i + 1])))
        if not math.isfinite(peak) or peak > BLOWUP_LIMIT:
            # an unstable step grows fast enough to pass for a blow-up
            if tol is not None and i >= 1 and math.isfinite(peak):
                st.check_error(i - 1, (i - 1) * h, tol)
            raise BlowUp((i + 1) * h, peak)
        # every pair of fine steps against one doubled step
        if tol is not None and i % 2 == 1:
            st.check_error(i - 1, (i - 1) * h, tol)
    if tol is not None and n_steps % 2 == 1 and n_steps >= 2:
        st.check_error(n_steps - 2, (n_steps - 2) * h, tol)

    t = np.arange(n_steps + 1) * h
    return Trajectory(t, st.y, st.dy, h, delay, frame, None if b is None else np.asarray(b, dtype=float), lam)


# ----------------------------
# Post-processing
# ----------------------------
def return_time(traj, component, level, direction="up", t_start=None):
    """Times where ``traj.y[component]`` crosses *level* in *direction* after *t_start*.

    Raises:
        NoCrossing: When there is none.
    """
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    t_start = traj.t0 if t_start is None else t_start
    g = traj.y[component] - level
    if direction == "up":
        hits = np.flatnonzero((g[:-1] <= 0.0) & (g[1:] > 0.0))
    else:
        hits = np.flatnonzero((g[:-1] >= 0.0) & (g[1:] < 0.0))
    hits = hits[traj.t[hits + 1] > t_start]
    if hits.size == 0:
        raise NoCrossing(f"component {component + 1} never crosses {level:g} ({direction}) after t={t_start:g}")

    y, dy, t = traj.y[component], traj.dy[component], traj.t
    out = []
    for i in hits:
        seg = CubicHermiteSpline(t[i : i + 2], y[i : i + 2], dy[i : i + 2])
        if g[i] == 0.0:
            root = float(t[i])
        else:
            root = brentq(lambda s: float(seg(s)) - level, t[i], t[i + 1], xtol=1e-12)
        if root > t_start:
            out.append(root)
    if not out:
        raise NoCrossing(f"no crossing after t={t_start:g}")
    return out


def estimate_period(traj, transient_skip=None, min_confidence=APERIODIC_CONFIDENCE):
    """Median spacing of upward crossings of component 1 through its tail mean.

    Returns:
        tuple[float, float]: ``(period, confidence)`` with
        ``confidence = 1 - IQR / median``.

    Raises:
        Aperiodic: When confidence is below *min_confidence* (or no crossings).
    """
    if transient_skip is None:
        transient_skip = 50.0 * traj.tau if traj.tau > 0 else 0.0
    t_from = traj.t0 + transient_skip
    if traj.t1 < t_from + 10.0 * traj.tau:
        logger.warning("trajectory too short for a reliable period after %.3g time units of transient", transient_skip)
    tail = traj.t >= t_from
    if np.count_nonzero(tail) < 4:
        raise Aperiodic(0.0)
    level = float(np.mean(traj.y[0, tail]))
    try:
        crossings = np.asarray(return_time(traj, 0, level, "up", t_from))
    except NoCrossing:
        raise Aperiodic(0.0) from None
    if crossings.size < 3:
        raise Aperiodic(0.0)
    spacing = np.diff(crossings)
    period = float(np.median(spacing))
    q75, q25 = np.percentile(spacing, [75, 25])
    confidence = 1.0 - float(q75 - q25) / period
    logger.info("period %.6g (confidence %.4f, %d crossings)", period, confidence, crossings.size)
    if confidence < min_confidence:
        raise Aperiodic(confidence, period)
    return period, confidence


def decay_amplitude(traj, level, t_from, component=0):
    """``sup |y - level|`` over nodes with ``t >= t_from``."""
    tail = traj.t >= t_from
    return float(np.max(np.abs(traj.y[component, tail] - level)))
