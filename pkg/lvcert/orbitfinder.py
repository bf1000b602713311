"""Fourier collocation and Newton for 2pi-periodic solutions of the rescaled system.

Unknowns are the cosine/sine coefficients of both components (modes 1..K)
and lambda; equations are the residual ``x' + lam beta (A x(t - tau/lam)) (b + theta x)``
projected onto modes 1..K plus one integral phase condition. The Jacobian is
assembled analytically from cached trigonometric synthesis tables.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from .constants import DEFAULT_K, NEWTON_MAX_ITERS, NEWTON_TOL, TARGET_STEP, ZERO_NORM_TOL
from .dde import HistoryFunction, integrate
from .errors import ConvergedToZero, NoConvergence, OrbitError, OutOfTheta, SimulationError
from .field import FourierLoop, beta, c_constants, default_grid, fixed_point_residual, in_theta0
from .log import get_logger
from .lru_cache import LRUCache
from .utils_io import write_csv

logger = get_logger(__name__)

TWO_PI = 2.0 * math.pi
BETA_MODES = ("one", "radial", "distance", "floor")
SEED_LADDER = (0.05, 0.1, 0.2, 0.4, 0.8)

_tables = LRUCache(max_items=8)


# ----------------------------
# Problem and result types
# ----------------------------
@dataclass
class CollocationProblem:
    """Discretized periodic-orbit problem.

    Attributes:
        system (LVSystem): The system.
        K (int): Number of Fourier modes per component.
        M (int | None): Grid size, ``4K+1`` when unset.
        theta (float): Homotopy parameter multiplying ``x_i`` in ``b_i + theta x_i``.
        beta_mode (str): ``"one"``, ``"radial"``, ``"distance"`` or ``"floor"``.
        phase_ref (FourierLoop | None): Reference loop of the phase condition.
        geom (ThetaGeometry | None): Needed for every beta mode but ``"one"``.
    """

    system: object
    K: int = DEFAULT_K
    M: int = None
    theta: float = 1.0
    beta_mode: str = "one"
    phase_ref: FourierLoop = None
    geom: object = None

    def __post_init__(self):
        if self.M is None:
            self.M = default_grid(self.K)
        if self.M < 4 * self.K + 1:
            raise ValueError(f"grid size {self.M} below 4K+1={4 * self.K + 1}")
        if self.beta_mode not in BETA_MODES:
            raise ValueError(f"unknown beta mode {self.beta_mode!r}")
        if self.beta_mode != "one" and self.geom is None:
            raise ValueError(f"beta mode {self.beta_mode!r} needs a ThetaGeometry")

    @property
    def unknowns(self):
        return 4 * self.K + 1


@dataclass
class NewtonOptions:
    tol: float = NEWTON_TOL
    max_iters: int = NEWTON_MAX_ITERS
    deflate: bool = True
    deflation_power: int = 2
    deflation_shift: float = 1.0
    switch_tol: float = 1e-6
    lambda_bracket: tuple = None


@dataclass
class OrbitSolution:
    """A converged periodic orbit of the rescaled system."""

    loop: FourierLoop
    lam: float
    residual: float
    newton_iters: int
    in_window: bool = None
    in_theta: bool = True
    candidate: object = None

    @property
    def period(self):
        return TWO_PI * self.lam

    @property
    def K(self):
        return self.loop.K

    def write_csv(self, path, M=None):
        """Samples ``t,x1,x2`` over ``[0, 2pi)`` after a ``#`` metadata block."""
        M = M or default_grid(self.K)
        t = TWO_PI * np.arange(M) / M
        g = self.loop.to_grid(M)
        comments = [
            f"lambda={self.lam:.17g}",
            f"period={self.period:.17g}",
            f"residual={self.residual:.17g}",
            f"K={self.K}",
        ]
        write_csv(path, ["t", "x1", "x2"], [t, g[0], g[1]], comments=comments)


@dataclass
class VerificationReport:
    """Independent checks on an :class:`OrbitSolution`."""

    c1: np.ndarray
    mean: float
    min_population: float
    round_trip: float
    fixed_point_residual: float
    non_stationary: bool
    in_window: bool = None
    notes: list = dc_field(default_factory=list)

    @property
    def c1_ok(self):
        return float(np.max(np.abs(self.c1))) < 1e-8

    @property
    def mean_ok(self):
        return abs(self.mean) < 1e-12

    @property
    def in_theta(self):
        return self.min_population > 0.0

    @property
    def round_trip_ok(self):
        return self.round_trip < 1e-6

    @property
    def passed(self):
        window_ok = self.in_window is not False
        return self.c1_ok and self.mean_ok and self.in_theta and self.round_trip_ok and window_ok

    def lines(self):
        mark = {True: "ok", False: "FAIL", None: "n/a"}
        return [
            f"c1 = ({self.c1[0]:.3e}, {self.c1[1]:.3e})  [{mark[self.c1_ok]}]",
            f"mean = {self.mean:.3e}  [{mark[self.mean_ok]}]",
            f"min(b_i + x_i) = {self.min_population:.6g}  [{mark[self.in_theta]}]",
            f"round trip mismatch = {self.round_trip:.3e}  [{mark[self.round_trip_ok]}]",
            f"fixed point residual = {self.fixed_point_residual:.3e}",
            f"non-stationary = {self.non_stationary}",
            f"in window = {mark[self.in_window]}",
        ] + list(self.notes)


# ----------------------------
# Trigonometric tables
# ----------------------------
def _build_tables(K, M):
    t = TWO_PI * np.arange(M) / M
    kt = np.outer(t, np.arange(1, K + 1))
    S = np.hstack([np.cos(kt), np.sin(kt)])
    return S, (2.0 / M) * S.T


def trig_tables(K, M):
    """Synthesis ``S`` (M x 2K) and analysis ``Pi`` (2K x M) for one component."""
    return _tables.get_or_create((K, M), lambda: _build_tables(K, M))


def _derivative_matrix(K):
    k = np.arange(1, K + 1)
    D = np.zeros((2 * K, 2 * K))
    D[np.arange(K), K + np.arange(K)] = k
    D[K + np.arange(K), np.arange(K)] = -k
    return D


def _delay_matrix(K, d):
    k = np.arange(1, K + 1)
    c, s = np.cos(k * d), np.sin(k * d)
    R = np.zeros((2 * K, 2 * K))
    i, j = np.arange(K), K + np.arange(K)
    R[i, i], R[i, j] = c, -s
    R[j, i], R[j, j] = s, c
    return R


def _norm_weights(K):
    w = math.pi * (1.0 + np.arange(1, K + 1) ** 2)
    return np.tile(w, 4)


# ----------------------------
# Residual and Jacobian
# ----------------------------
def residual(loop, lam, prob):
    """Grid values of ``x' - RHS`` (full, not projected), shape ``(2, M)``."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    sysm, M = prob.system, prob.M
    dx = loop.derivative().to_grid(M)
    xg = loop.to_grid(M)
    xd = loop.delay(sysm.tau / lam).to_grid(M)
    bv = beta(loop, prob.geom, prob.beta_mode, M)
    rhs = -lam * bv * (sysm.A @ xd) * (sysm.b[:, None] + prob.theta * xg)
    return dx - rhs


def residual_loop(loop, lam, prob):
    """Projection of :func:`residual` onto modes 1..K."""
    return FourierLoop.from_grid(residual(loop, lam, prob), loop.K, lambda_tag=lam)


def _beta_gradient(u, lam, prob):
    """Cutoff value and its gradient with respect to the coefficient vector."""
    mode = prob.beta_mode
    if mode in ("one", "floor"):
        return (1.0 if mode == "one" else prob.geom.alpha0), np.zeros_like(u)
    loop = FourierLoop.from_vector(u)
    if mode == "radial":
        s = loop.norm2()
        return prob.geom.profile(s), 2.0 * prob.geom.profile.derivative(s) * _norm_weights(prob.K) * u
    value = beta(loop, prob.geom, "distance", prob.M)
    grad = np.empty_like(u)
    eps = 1e-7 * max(1.0, float(np.max(np.abs(u))))
    for n in range(u.size):
        e = np.zeros_like(u)
        e[n] = eps
        hi = beta(FourierLoop.from_vector(u + e), prob.geom, "distance", prob.M)
        lo = beta(FourierLoop.from_vector(u - e), prob.geom, "distance", prob.M)
        grad[n] = (hi - lo) / (2.0 * eps)
    return value, grad


def assemble(v, prob, ref_dot, jacobian=True):
    """Collocation equations ``H(v)`` and optionally ``dH/dv`` at ``v = [coefficients, lambda]``.

    Args:
        v (numpy.ndarray): Length ``4K+1``.
        prob (CollocationProblem): Problem.
        ref_dot (numpy.ndarray): Derivative of the phase reference as a
            coefficient vector.
        jacobian (bool): Also return the Jacobian.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray | None, numpy.ndarray]: Equations,
        Jacobian and the projected residual coefficients (shape ``(2, 2K)``).
    """
    K, M = prob.K, prob.M
    sysm, theta = prob.system, prob.theta
    u, lam = v[:-1], float(v[-1])
    S, Pi = trig_tables(K, M)
    D = _derivative_matrix(K)
    R = _delay_matrix(K, sysm.tau / lam)

    U = u.reshape(2, 2 * K)
    X = U @ S.T
    Ud = U @ R.T
    AXd = sysm.A @ (Ud @ S.T)
    pop = sysm.b[:, None] + theta * X
    core = -AXd * pop
    bv, dbeta = _beta_gradient(u, lam, prob)

    rho = U @ D.T - (lam * bv * core) @ Pi.T
    H = np.concatenate([rho.reshape(-1), [math.pi * float(ref_dot @ u)]])
    if not jacobian:
        return H, None, rho

    n = 2 * K
    J = np.zeros((4 * K + 1, 4 * K + 1))
    SR = S @ R
    for i in range(2):
        rows = slice(n * i, n * (i + 1))
        for m in range(2):
            cols = slice(n * m, n * (m + 1))
            dcore = -sysm.A[i, m] * pop[i][:, None] * SR
            if i == m:
                dcore = dcore - theta * AXd[i][:, None] * S
            block = -(lam * bv) * (Pi @ dcore)
            if i == m:
                block = block + D
            J[rows, cols] = block
        J[rows, : 4 * K] -= lam * np.outer(Pi @ core[i], dbeta)

    # x(t - tau/lam) moves with lambda at rate x'(t - tau/lam) tau / lam^2
    dXd = (Ud @ D.T) @ S.T * (sysm.tau / lam**2)
    dcore_dlam = -(sysm.A @ dXd) * pop
    drhs = bv * core + lam * bv * dcore_dlam
    J[: 4 * K, -1] = -(drhs @ Pi.T).reshape(-1)
    J[-1, : 4 * K] = math.pi * ref_dot
    return H, J, rho


def _sup_residual(rho, prob):
    S, _ = trig_tables(prob.K, prob.M)
    return float(np.max(np.abs(rho @ S.T)))


# ----------------------------
# Newton
# ----------------------------
def _deflation(u, weights, power, shift):
    s = max(float(weights @ (u * u)), 1e-300)
    m = s ** (-0.5 * power) + shift
    grad = -power * s ** (-0.5 * power - 1.0) * weights * u
    return m, grad


def _solve_linear(J, rhs):
    try:
        return scipy.linalg.solve(J, rhs, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        pass
    try:
        return scipy.linalg.lstsq(J, rhs)[0]
    except (scipy.linalg.LinAlgError, ValueError):
        return None


def newton_solve(guess, lambda_guess, prob, opts=None):
    """Damped Newton from ``(guess, lambda_guess)``.

    The first phase deflates the trivial solution (the equations are scaled
    by ``1/||x||^p + shift``); once the residual drops below
    ``opts.switch_tol`` plain Newton polishes to ``opts.tol``.

    Returns:
        OrbitSolution: The converged orbit.

    Raises:
        NoConvergence: Iteration budget exhausted.
        ConvergedToZero: The iterate collapsed onto the stationary solution.
        OutOfTheta: The orbit leaves Theta_0.
    """
    opts = opts or NewtonOptions()
    if guess.K != prob.K:
        guess = guess.truncate(prob.K)
    if guess.norm() == 0.0:
        raise ValueError("Newton needs a nonzero initial loop")
    ref = prob.phase_ref.truncate(prob.K) if prob.phase_ref is not None else guess
    ref_dot = ref.derivative().as_vector()
    weights = _norm_weights(prob.K)
    v = np.concatenate([guess.as_vector(), [float(lambda_guess)]])
    deflating = opts.deflate

    H, J, rho = assemble(v, prob, ref_dot)
    sup = _sup_residual(rho, prob)
    for it in range(opts.max_iters + 1):
        u = v[:-1]
        norm2 = float(weights @ (u * u))
        if norm2 < ZERO_NORM_TOL**2:
            raise ConvergedToZero(math.sqrt(norm2))
        phase = abs(H[-1])
        logger.debug("newton it=%d sup=%.3e phase=%.3e lambda=%.12g deflate=%s", it, sup, phase, v[-1], deflating)
        if sup < opts.tol and phase < opts.tol:
            break
        if it == opts.max_iters:
            raise NoConvergence(it, sup)
        if deflating and sup < opts.switch_tol:
            deflating = False

        if deflating:
            m, grad = _deflation(u, weights, opts.deflation_power, opts.deflation_shift)
            G = m * H
            JG = m * J
            JG[:, :-1] += np.outer(H, grad)
        else:
            G, JG = H, J
        step = _solve_linear(JG, -G)
        if step is None or not np.all(np.isfinite(step)):
            raise NoConvergence(it, sup)
        g0 = float(np.linalg.norm(G))

        alpha = 1.0
        while True:
            trial = v + alpha * step
            if trial[-1] > 0.0:
                Ht, Jt, rhot = assemble(trial, prob, ref_dot)
                gt = Ht
                if deflating:
                    ut = trial[:-1]
                    gt = _deflation(ut, weights, opts.deflation_power, opts.deflation_shift)[0] * Ht
                if float(np.linalg.norm(gt)) <= (1.0 - 1e-4 * alpha) * g0 or alpha < 1e-6:
                    break
            elif alpha < 1e-6:
                raise NoConvergence(it + 1, sup)
            alpha *= 0.5
        v, H, J, rho = trial, Ht, Jt, rhot
        sup = _sup_residual(rho, prob)

    loop = FourierLoop.from_vector(v[:-1], lambda_tag=float(v[-1]))
    lam = float(v[-1])
    if loop.norm() < ZERO_NORM_TOL:
        raise ConvergedToZero(loop.norm())
    min_pop = float(np.min(prob.system.b[:, None] + loop.to_grid(prob.M)))
    if min_pop <= 0.0:
        raise OutOfTheta(min_pop)
    in_window = None
    if opts.lambda_bracket is not None:
        lo, hi = opts.lambda_bracket
        in_window = lo < lam < hi
    logger.info("newton converged in %d iterations: lambda=%.12g residual=%.3e", it, lam, sup)
    return OrbitSolution(loop=loop, lam=lam, residual=sup, newton_iters=it, in_window=in_window)


# ----------------------------
# Seeds, sweep and verification
# ----------------------------
def _branch_direction(system, mu):
    idx = int(np.argmin(np.abs(np.asarray(system.mu) - mu)))
    Pinv = np.linalg.inv(system.require_diagonal())
    return idx, Pinv[:, idx]


def seed_loops(cand, system, K, ladder=SEED_LADDER):
    """Initial loops ``P^-1 e_branch * amp * cos(k t)`` for an orbit candidate.

    The catalog amplitude (diagonal coordinates) comes first when set, then
    sup-norm amplitudes ``ladder * min(b)`` along the normalized eigendirection.
    """
    _, direction = _branch_direction(system, cand.mu)
    seeds = []
    if cand.amplitude is not None:
        seeds.append(_mode_loop(direction * cand.amplitude, cand.k, K))
    unit = direction / float(np.max(np.abs(direction)))
    for frac in ladder:
        seeds.append(_mode_loop(unit * frac * float(np.min(system.b)), cand.k, K))
    return seeds


def _mode_loop(vec, k, K):
    z = np.zeros((2, K), dtype=complex)
    z[:, k - 1] = vec
    return FourierLoop(z)


def canonical_phase(loop, tol=1e-12):
    """Shift *loop* so the dominant coefficient of its lowest active mode is real and positive."""
    amp = np.abs(loop.z)
    scale = float(np.max(amp))
    if scale == 0.0:
        return loop
    active = np.flatnonzero(np.max(amp, axis=0) > tol * scale)
    k0 = int(active[0]) + 1
    comp = int(np.argmax(amp[:, k0 - 1]))
    phi = -np.angle(loop.z[comp, k0 - 1]) / k0
    return loop.shift(phi)


def same_orbit(a, b, rel=1e-6):
    """Whether two solutions coincide up to the circle action."""
    if abs(a.lam - b.lam) > rel * max(abs(a.lam), 1.0):
        return False
    if a.loop.isotropy(1e-9) != b.loop.isotropy(1e-9):
        return False
    na, nb = a.loop.norm(), b.loop.norm()
    if abs(na - nb) > rel * max(na, nb):
        return False
    K = max(a.loop.K, b.loop.K)
    ca, cb = canonical_phase(a.loop.truncate(K)), canonical_phase(b.loop.truncate(K))
    return (ca - cb).norm() <= rel * max(na, 1e-300)


def deduplicate(solutions, rel=1e-6):
    out = []
    for sol in solutions:
        if not any(same_orbit(sol, kept, rel) for kept in out):
            out.append(sol)
    return out


def solve_candidate(cand, prob, opts=None, restarts=0, seed=0):
    """Try every seed for *cand*; the first accepted solution wins.

    Returns:
        OrbitSolution | None: The orbit, or ``None`` when every seed fails.
    """
    seeds = seed_loops(cand, prob.system, prob.K)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        base = seeds[len(seeds) // 2]
        noise = (rng.standard_normal(base.z.shape) + 1j * rng.standard_normal(base.z.shape)) * 0.1
        noise /= np.arange(1, prob.K + 1) ** 2
        seeds.append(FourierLoop(base.z + noise * float(np.max(np.abs(base.z)))))
    for n, guess in enumerate(seeds):
        local = CollocationProblem(
            system=prob.system,
            K=prob.K,
            M=prob.M,
            theta=prob.theta,
            beta_mode=prob.beta_mode,
            phase_ref=guess,
            geom=prob.geom,
        )
        try:
            sol = newton_solve(guess, cand.lam, local, opts)
        except OrbitError as exc:
            logger.debug("candidate %s seed %d rejected: %s", cand.key, n, exc)
            continue
        sol.candidate = cand
        return sol
    logger.info("candidate %s: no seed converged", cand.key)
    return None


def sweep(prob, window, candidates, opts=None, jobs=1, restarts=0, seed=0):
    """Run :func:`solve_candidate` over a catalog and deduplicate up to the circle action.

    Results keep catalog order regardless of *jobs*.
    """
    if not candidates:
        return []
    opts = opts or NewtonOptions()
    if window is not None and opts.lambda_bracket is None:
        opts = NewtonOptions(**{**opts.__dict__, "lambda_bracket": (window.lambda_lo, window.lambda_hi)})

    def run(cand):
        return solve_candidate(cand, prob, opts, restarts, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            found = list(pool.map(run, candidates))
    else:
        found = [run(c) for c in candidates]
    distinct = deduplicate([s for s in found if s is not None])
    logger.info("sweep: %d distinct orbit(s) from %d candidate(s)", len(distinct), len(candidates))
    return distinct


def round_trip_mismatch(sol, system, h=None):
    """Relative sup mismatch between the orbit and a direct simulation over one period.

    The simulation runs the shifted system in physical time from the orbit
    itself as history.
    """
    lam = sol.lam
    T = TWO_PI * lam
    history = HistoryFunction.from_loop(sol.loop, lam, system.tau, frame="shifted_x")
    h = h or min(TARGET_STEP, T / 400.0)
    traj = integrate(system, history, T, h=h, frame="shifted_x")
    exact = sol.loop.value_at(traj.t / lam)
    scale = max(float(np.max(np.abs(exact))), 1e-12)
    return float(np.max(np.abs(traj.y - exact))) / scale


def verify_orbit(sol, system, window=None, h=None):
    """Cross-check a solution; failures are recorded, never raised."""
    loop, lam = sol.loop, sol.lam
    M = default_grid(loop.K)
    c1, _ = c_constants(loop, lam, 1.0, system, M=M)
    mean = float(np.max(np.abs(loop.to_grid(M).mean(axis=1))))
    min_pop = float(np.min(system.b[:, None] + loop.to_grid(M)))
    notes = []
    try:
        trip = round_trip_mismatch(sol, system, h)
    except SimulationError as exc:
        trip = math.inf
        notes.append(f"round trip simulation failed: {exc}")
    in_window = window.contains(lam) if window is not None else sol.in_window
    report = VerificationReport(
        c1=np.asarray(c1),
        mean=mean,
        min_population=min_pop,
        round_trip=trip,
        fixed_point_residual=fixed_point_residual(loop, lam, 1.0, system, M=M),
        non_stationary=loop.norm() > ZERO_NORM_TOL,
        in_window=in_window,
        notes=notes,
    )
    logger.info("verification %s", "passed" if report.passed else "failed")
    return report


def tau_zero_quadratic_form(loop, system):
    """``a11 int x1^2 + (a12 + a21) int x1 x2 + a22 int x2^2`` over one period.

    Periodic solutions of the undelayed system force this to vanish, which
    positive definiteness of the symmetric part rules out for ``x != 0``.
    """
    z = loop.z
    gram = math.pi * np.real(z @ np.conj(z).T)
    return float(np.sum(system.A * gram))
