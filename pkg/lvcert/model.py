"""System parameters, equilibrium, hypotheses (A0)-(A2) and diagonalization.

Everything here is closed-form 2x2 linear algebra: eigenvalues come from the
trace/determinant characteristic polynomial so that results are exact and
deterministic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import DISCRIMINANT_TOL, EQUILIBRIUM_DET_TOL, MU_DISTINCT_TOL
from .errors import DegenerateEigenvalues, HypothesisFailed, SingularMatrix
from .log import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the (A0)-(A2) checks.

    Attributes:
        a0_pass (bool): Positive equilibrium, positive diagonal rates and
            nonnegative cross rates.
        a0_strict (bool): Every interaction rate strictly positive.
        a1_pass (bool): Symmetric part of A positive definite.
        a2_pass (bool): diag(b)A has two real positive eigenvalues.
        min_sym_eig (float): Smallest eigenvalue of (A + A^T)/2.
        mu_distinct (bool): The two eigenvalues of diag(b)A differ.
        mu (tuple[float, float] | None): Eigenvalues, larger first, when real.
        b (tuple[float, float] | None): Equilibrium, or ``None`` if singular.
        long_delay (bool | None): ``min(2pi/mu) < tau`` when a delay
            was supplied.
        messages (list[str]): Human readable diagnostics.
    """

    a0_pass: bool
    a0_strict: bool
    a1_pass: bool
    a2_pass: bool
    min_sym_eig: float
    mu_distinct: bool
    mu: tuple = None
    b: tuple = None
    long_delay: bool = None
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return self.a0_pass and self.a1_pass and self.a2_pass

    def lines(self):
        """Return the report as ``key: value`` text lines."""
        out = [
            f"A0: {'pass' if self.a0_pass else 'FAIL'}" + ("" if self.a0_strict or not self.a0_pass else " (weak)"),
            f"A1: {'pass' if self.a1_pass else 'FAIL'} (min eigenvalue of symmetric part {self.min_sym_eig:.17g})",
            f"A2: {'pass' if self.a2_pass else 'FAIL'}",
            f"mu_distinct: {self.mu_distinct}",
        ]
        if self.b is not None:
            out.append(f"b: {self.b[0]:.17g} {self.b[1]:.17g}")
        if self.mu is not None:
            out.append(f"mu: {self.mu[0]:.17g} {self.mu[1]:.17g}")
        if self.long_delay is not None:
            out.append(f"min(2pi/mu) < tau: {self.long_delay}")
        out.extend(self.messages)
        return out


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {A.shape}")
    return A


def equilibrium(A, r):
    """Solve ``A b = r`` for the coexistence equilibrium.

    Args:
        A (array_like): 2x2 interaction matrix.
        r (array_like): Growth rates.

    Returns:
        numpy.ndarray: Equilibrium populations ``b``.

    Raises:
        SingularMatrix: If ``|det A| <= 1e-14 * ||A||^2``.
    """
    A = _as_matrix(A)
    r = np.asarray(r, dtype=float)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    threshold = EQUILIBRIUM_DET_TOL * float(np.linalg.norm(A)) ** 2
    if abs(det) <= threshold:
        raise SingularMatrix(det, threshold)
    return np.linalg.solve(A, r)


def _char_roots(M):
    """Roots of the characteristic polynomial of a 2x2 matrix.

    Returns ``(roots, discriminant, trace)``; ``roots`` is ``None`` when the
    discriminant is negative beyond the tolerance.
    """
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = tr * tr - 4.0 * det
    if disc < -DISCRIMINANT_TOL * tr * tr:
        return None, disc, tr
    # tiny negative discriminants are inside the guard band; treat as 0
    s = math.sqrt(max(disc, 0.0))
    # avoid cancellation for the smaller root
    big = 0.5 * (tr + math.copysign(s, tr)) if tr != 0.0 else 0.5 * s
    small = det / big if big != 0.0 else 0.5 * (tr - s)
    return (max(big, small), min(big, small)), disc, tr


def _sym_min_eig(A):
    a, d = A[0, 0], A[1, 1]
    c = 0.5 * (A[0, 1] + A[1, 0])
    return 0.5 * (a + d) - math.hypot(0.5 * (a - d), c)


def check_hypotheses(A, r, tau=None):
    """Evaluate (A0), (A1) and (A2) independently.

    Args:
        A (array_like): 2x2 interaction matrix.
        r (array_like): Growth rates.
        tau (float | None): Delay; when given, the side condition
            ``min(2pi/mu_1, 2pi/mu_2) < tau`` is recorded too.

    Returns:
        HypothesisReport: The evaluated report.
    """
    A = _as_matrix(A)
    messages = []
    min_sym = _sym_min_eig(A)
    a1 = min_sym > 0.0
    if not a1:
        messages.append(f"(A1) violated: <Ax,x> is not positive definite (min eigenvalue {min_sym:.6g})")

    try:
        b = equilibrium(A, r)
    except SingularMatrix as exc:
        messages.append(f"(A0) violated: {exc}")
        return HypothesisReport(False, False, a1, False, min_sym, False, messages=messages)

    diag_ok = bool(np.all(np.diag(A) > 0.0))
    cross_ok = bool(A[0, 1] >= 0.0 and A[1, 0] >= 0.0)
    b_ok = bool(np.all(b > 0.0))
    a0_strict = bool(np.all(A > 0.0) and b_ok)
    a0 = diag_ok and cross_ok and b_ok
    if not b_ok:
        messages.append(f"(A0) violated: equilibrium b={tuple(b)} is not positive")
    elif not (diag_ok and cross_ok):
        messages.append("(A0) violated: interaction rates must be positive")
    elif not a0_strict:
        messages.append("(A0) holds weakly: some cross interaction rates are zero")

    B = b[:, None] * A
    roots, disc, tr = _char_roots(B)
    mu = None
    a2 = False
    mu_distinct = False
    if roots is None:
        messages.append(f"(A2) violated: diag(b)A has complex eigenvalues (discriminant {disc:.6g})")
    else:
        mu = roots
        a2 = mu[1] > 0.0
        if not a2:
            messages.append(f"(A2) violated: eigenvalues {mu} are not both positive")
        mu_distinct = abs(mu[0] - mu[1]) > MU_DISTINCT_TOL * max(abs(mu[0]), abs(mu[1]))
        if not mu_distinct:
            messages.append("eigenvalues coincide (n1 = n2 for every delay)")

    delay_ok = None
    if tau is not None and mu is not None and a2:
        delay_ok = bool(min(2.0 * math.pi / mu[0], 2.0 * math.pi / mu[1]) < tau)

    report = HypothesisReport(
        a0_pass=a0,
        a0_strict=a0_strict,
        a1_pass=a1,
        a2_pass=a2,
        min_sym_eig=min_sym,
        mu_distinct=mu_distinct,
        mu=mu,
        b=(float(b[0]), float(b[1])),
        long_delay=delay_ok,
        messages=messages,
    )
    logger.info("hypotheses A0=%s A1=%s A2=%s mu=%s", a0, a1, a2, mu)
    return report


def _left_eigenvector(B, mu):
    # p (B - mu I) = 0; take the better conditioned of the two candidate rows
    c1 = np.array([B[1, 0], mu - B[0, 0]])
    c2 = np.array([mu - B[1, 1], B[0, 1]])
    p = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
    p = p / np.linalg.norm(p)
    if p[np.flatnonzero(np.abs(p) > 1e-15)[0]] < 0:
        p = -p
    return p


def diagonalize(A, b):
    """Diagonalize ``diag(b) A``.

    Args:
        A (array_like): 2x2 interaction matrix.
        b (array_like): Equilibrium.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray]: ``(mu, P)`` with ``mu`` sorted
        decreasingly and the rows of ``P`` unit left eigenvectors, so that
        ``P diag(b) A P^-1 = diag(mu)``.

    Raises:
        DegenerateEigenvalues: If the eigenvalues coincide or are not real.
    """
    A = _as_matrix(A)
    B = np.asarray(b, dtype=float)[:, None] * A
    roots, _, _ = _char_roots(B)
    if roots is None:
        raise DegenerateEigenvalues((float("nan"), float("nan")))
    mu = np.array(roots)
    if abs(mu[0] - mu[1]) <= MU_DISTINCT_TOL * np.max(np.abs(mu)):
        raise DegenerateEigenvalues(mu)
    P = np.vstack([_left_eigenvector(B, m) for m in mu])
    return mu, P


def reconstruction_residual(B, mu, P):
    """Sup-norm of ``P B P^-1 - diag(mu)``."""
    D = P @ B @ np.linalg.inv(P)
    return float(np.max(np.abs(D - np.diag(mu))))


@dataclass(frozen=True, eq=False)
class LVSystem:
    """Delayed two-species Lotka-Volterra system and its derived data.

    Attributes:
        A (numpy.ndarray): Interaction rates.
        r (numpy.ndarray): Intrinsic growth rates.
        tau (float): Delay.
        b (numpy.ndarray): Equilibrium populations.
        mu (numpy.ndarray): Eigenvalues of ``diag(b) A``, larger first.
        P (numpy.ndarray | None): Diagonalizer, ``None`` when the
            eigenvalues coincide.
        report (HypothesisReport): Hypothesis outcome at construction.
    """

    A: np.ndarray
    r: np.ndarray
    tau: float
    b: np.ndarray
    mu: np.ndarray
    P: np.ndarray
    report: HypothesisReport

    @classmethod
    def build(cls, A, r, tau):
        """Validate and assemble a system.

        Raises:
            HypothesisFailed: If any of (A0)-(A2) fails.
        """
        A = _as_matrix(A).copy()
        r = np.asarray(r, dtype=float).copy()
        if tau < 0 or not math.isfinite(tau):
            raise ValueError(f"delay must be finite and nonnegative, got {tau}")
        report = check_hypotheses(A, r, tau if tau > 0 else None)
        if not report.passed:
            raise HypothesisFailed(report)
        b = np.array(report.b)
        try:
            mu, P = diagonalize(A, b)
        except DegenerateEigenvalues:
            mu, P = np.array(report.mu), None
        for arr in (A, r, b, mu) + ((P,) if P is not None else ()):
            arr.setflags(write=False)
        return cls(A=A, r=r, tau=float(tau), b=b, mu=mu, P=P, report=report)

    @classmethod
    def from_config(cls, section):
        """Build from a :class:`lvcert.config.SystemSection`."""
        A = [[section.a11, section.a12], [section.a21, section.a22]]
        return cls.build(A, [section.r1, section.r2], section.tau)

    def with_tau(self, tau):
        """Same interaction data with a different delay."""
        return LVSystem.build(self.A, self.r, tau)

    @property
    def B(self):
        """Linearization matrix ``diag(b) A``."""
        return self.b[:, None] * self.A

    @property
    def mu_distinct(self):
        return self.P is not None

    def require_diagonal(self):
        if self.P is None:
            raise DegenerateEigenvalues(self.mu)
        return self.P

    def to_diagonal(self, x):
        """Map physical deviations (leading axis of length 2) to ``y = P x``."""
        P = self.require_diagonal()
        return np.tensordot(P, np.asarray(x), axes=(1, 0))

    def from_diagonal(self, y):
        """Inverse of :meth:`to_diagonal`."""
        P = self.require_diagonal()
        return np.tensordot(np.linalg.inv(P), np.asarray(y), axes=(1, 0))

    def describe(self):
        return (
            f"A=[[{self.A[0, 0]:g},{self.A[0, 1]:g}],[{self.A[1, 0]:g},{self.A[1, 1]:g}]] "
            f"r=({self.r[0]:g},{self.r[1]:g}) tau={self.tau:g}"
        )


@dataclass(frozen=True)
class LogisticSystem:
    """Scalar delayed logistic equation ``u' = alpha u (1 - u(t - tau))``."""

    alpha: float
    tau: float = 1.0

    @property
    def bifurcation_alpha(self):
        """Onset of oscillation, ``alpha tau = pi/2``."""
        return math.pi / (2.0 * self.tau)

    @property
    def onset_period(self):
        """Period of the linear oscillation at the bifurcation point."""
        return 4.0 * self.tau

    @property
    def b(self):
        return np.array([1.0])
