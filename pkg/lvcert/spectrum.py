"""Spectral data of the linearized delay system.

Winding numbers from the delay condition, the index set Phi(n1, n2), the
lambda window, the catalog of characteristic values
``lambda_{k,n} = k tau / (pi/2 + 2 n pi)`` and the amplitudes of the
cut-off modified orbits.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import PHI_J_MAX, WINDING_GUARD
from .errors import (
    Boundary,
    EmptyCatalog,
    EmptyPhi,
    LevelOutOfRange,
    NoWindow,
    NoWinding,
)
from .log import get_logger

logger = get_logger(__name__)

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class HopfWindow:
    """A lambda window selected by ``j`` in Phi(n1, n2).

    Attributes:
        n1 (int): Winding number of branch 1 (the smaller one).
        n2 (int): Winding number of branch 2.
        j (int): Chosen element of Phi(n1, n2).
        lambda_lo (float): ``tau / (2 (j+1) pi)``.
        lambda_hi (float): ``tau / (2 j pi)``.
        k0 (int): ``n2 // j``, the isotropy carried by exactly one orbit.
        tau (float): Delay the window was built for.
        mu (tuple[float, float]): Branch eigenvalues after relabeling.
        branch_order (tuple[int, int]): Index into ``system.mu`` of each
            branch, i.e. the relabeling permutation.
        phi (tuple[int, ...]): The full set Phi(n1, n2).
    """

    n1: int
    n2: int
    j: int
    lambda_lo: float
    lambda_hi: float
    k0: int
    tau: float
    mu: tuple = None
    branch_order: tuple = (0, 1)
    phi: tuple = ()

    @property
    def period_range(self):
        return (TWO_PI * self.lambda_lo, TWO_PI * self.lambda_hi)

    def contains(self, lam):
        return self.lambda_lo < lam < self.lambda_hi

    def winding(self, branch):
        return self.n1 if branch == 1 else self.n2


@dataclass(frozen=True)
class OrbitCandidate:
    """A predicted orbit of the cut-off modified diagonal system.

    Attributes:
        branch (int): 1 or 2, the eigenvalue branch after relabeling.
        k (int): Fourier mode, equal to the isotropy order Z_k.
        n (int): Winding index of the characteristic value.
        lam (float): ``k tau / (pi/2 + 2 n pi)``.
        period (float): ``2 pi lam``.
        beta_level (float): ``k / (lam mu)``, the cutoff value the orbit sits at.
        mu (float): Eigenvalue of the branch.
        amplitude (float | None): Cosine amplitude once solved.
    """

    branch: int
    k: int
    n: int
    lam: float
    period: float
    beta_level: float
    mu: float
    amplitude: float = None

    @property
    def isotropy(self):
        return self.k

    @property
    def key(self):
        return (self.branch, self.k, self.n)

    def with_amplitude(self, amplitude):
        return replace(self, amplitude=float(amplitude))


def winding_number(mu_i, tau):
    """Winding number ``n`` with ``pi/2 + 2n pi < mu tau < pi/2 + 2(n+1) pi``.

    Args:
        mu_i (float): Branch eigenvalue.
        tau (float): Delay.

    Returns:
        int: The winding number.

    Raises:
        Boundary: ``mu tau`` within the guard band of an endpoint.
        NoWinding: ``mu tau <= pi/2``.
    """
    x = mu_i * tau
    m = round((x - HALF_PI) / TWO_PI)
    if m >= 0:
        distance = abs(x - (HALF_PI + TWO_PI * m))
        if distance <= WINDING_GUARD * max(1.0, abs(x)):
            raise Boundary(x, m, distance)
    if x <= HALF_PI:
        raise NoWinding(x)
    n = int(math.floor((x - HALF_PI) / TWO_PI))
    # floor can land one off next to an endpoint; settle it with the strict test
    if not x > HALF_PI + TWO_PI * n:
        n -= 1
    elif not x < HALF_PI + TWO_PI * (n + 1):
        n += 1
    return n


def phi_set(n1, n2, j_max=PHI_J_MAX):
    """The set ``{j : n1 // j < n2 // j == n2 / j}`` up to *j_max*.

    Raises:
        EmptyPhi: If ``n1 >= n2``.
    """
    if n1 >= n2:
        raise EmptyPhi(n1, n2)
    return {j for j in range(1, min(j_max, n2) + 1) if n2 % j == 0 and n1 // j < n2 // j}


def window(tau, j, n1, n2, **extra):
    """Build the lambda window for ``j``.

    Args:
        tau (float): Delay.
        j (int): Element of Phi(n1, n2).
        n1 (int): Smaller winding number.
        n2 (int): Larger winding number.
        **extra: Optional ``mu``, ``branch_order`` and ``phi`` recorded on
            the window.

    Returns:
        HopfWindow: The window.
    """
    if j < 1:
        raise ValueError(f"j must be positive, got {j}")
    return HopfWindow(
        n1=n1,
        n2=n2,
        j=j,
        lambda_lo=tau / (TWO_PI * (j + 1)),
        lambda_hi=tau / (TWO_PI * j),
        k0=n2 // j,
        tau=tau,
        **extra,
    )


def select_window(system, j=None):
    """Winding numbers, relabeling and the default ``j = min Phi``.

    Args:
        system (LVSystem): The system.
        j (int | None): Override for the element of Phi(n1, n2).

    Returns:
        HopfWindow: The window with ``n1 < n2``.

    Raises:
        NoWindow: When the delay condition cannot be met, ``n1 == n2`` or
            *j* is not in Phi(n1, n2).
    """
    tau = system.tau
    if tau <= 0:
        raise NoWindow("tau = 0: the undelayed system has no non-stationary periodic solution")
    if not system.mu_distinct:
        raise NoWindow("mu_1 = mu_2, hence n1 = n2 for every delay")
    windings = []
    for mu_i in system.mu:
        try:
            windings.append(winding_number(mu_i, tau))
        except (NoWinding, Boundary) as exc:
            raise NoWindow(f"delay condition unsatisfiable: {exc}") from exc
    if windings[0] == windings[1]:
        raise NoWindow(f"n1 = n2 = {windings[0]}", windings[0], windings[1])
    order = (0, 1) if windings[0] < windings[1] else (1, 0)
    n1, n2 = windings[order[0]], windings[order[1]]
    phi = phi_set(n1, n2)
    if j is None:
        j = min(phi)
    elif j not in phi:
        raise NoWindow(f"j={j} is not in Phi({n1},{n2})={sorted(phi)}", n1, n2)
    win = window(
        tau,
        j,
        n1,
        n2,
        mu=(float(system.mu[order[0]]), float(system.mu[order[1]])),
        branch_order=order,
        phi=tuple(sorted(phi)),
    )
    logger.info(
        "window n1=%d n2=%d j=%d lambda=(%.6g, %.6g) k0=%d", n1, n2, j, win.lambda_lo, win.lambda_hi, win.k0
    )
    return win


def characteristic_lambda(k, n, tau):
    return k * tau / (HALF_PI + TWO_PI * n)


def catalog(system, win):
    """Enumerate the orbit candidates of the window.

    For each branch ``i``: ``1 <= k <= n_i // j``, ``n <= n_i`` and
    ``k j <= n < k (j+1)``. Sorted by ``k`` then branch.

    Args:
        system (LVSystem): The system (its delay must match the window).
        win (HopfWindow): Window from :func:`select_window`.

    Returns:
        list[OrbitCandidate]: Possibly empty list of candidates.
    """
    mu = win.mu if win.mu is not None else tuple(float(m) for m in system.mu)
    out = []
    for branch, (mu_i, n_i) in enumerate(zip(mu, (win.n1, win.n2)), start=1):
        for k in range(1, n_i // win.j + 1):
            for n in range(k * win.j, min(k * (win.j + 1) - 1, n_i) + 1):
                lam = characteristic_lambda(k, n, win.tau)
                out.append(
                    OrbitCandidate(
                        branch=branch,
                        k=k,
                        n=n,
                        lam=lam,
                        period=TWO_PI * lam,
                        beta_level=k / (lam * mu_i),
                        mu=mu_i,
                    )
                )
    out.sort(key=lambda c: (c.k, c.branch, c.n))
    logger.info("catalog: %d candidate(s)", len(out))
    return out


def require_catalog(system, win):
    """Like :func:`catalog` but raise :class:`EmptyCatalog` on an empty result."""
    cands = catalog(system, win)
    if not cands:
        raise EmptyCatalog(f"no (k, n) satisfies k j <= n < k (j+1) for j={win.j}")
    return cands


def amplitude_solve(cand, profile):
    """Amplitude ``c`` with ``profile(pi c^2 (1 + k^2)) = beta_level``.

    Args:
        cand (OrbitCandidate): Candidate.
        profile (CutoffProfile): Decreasing radial cutoff profile.

    Returns:
        float: The unique positive amplitude.

    Raises:
        LevelOutOfRange: If ``beta_level`` is not in ``(floor, 1)``.
    """
    level = cand.beta_level
    if not (profile.floor < level < 1.0):
        raise LevelOutOfRange(level, profile.floor)
    s = profile.inverse(level)
    return math.sqrt(s / (math.pi * (1.0 + cand.k**2)))


def solve_amplitudes(cands, profile):
    """Attach amplitudes to every candidate of a catalog."""
    return [c.with_amplitude(amplitude_solve(c, profile)) for c in cands]


def critical_delays(mu_i, n_max):
    """Delays ``(pi/2 + 2 n pi) / mu`` for ``n = 0..n_max``."""
    return [(HALF_PI + TWO_PI * n) / mu_i for n in range(n_max + 1)]


def linear_residual(cand, tau, npts=1024):
    """Pointwise residual of ``u' = -k u(t - tau/lam)`` at ``u = cos(kt)``.

    Returns:
        numpy.ndarray: Residual on a uniform grid of *npts* points.
    """
    t = np.linspace(0.0, TWO_PI, npts, endpoint=False)
    shift = tau / cand.lam
    du = -cand.k * np.sin(cand.k * t)
    rhs = -cand.k * np.cos(cand.k * (t - shift))
    return du - rhs
