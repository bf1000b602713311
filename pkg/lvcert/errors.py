"""Exception hierarchy and the CLI exit-code map."""


class LVCertError(Exception):
    """Base class for every error raised by the package."""


# ----------------------------
# model
# ----------------------------
class ModelError(LVCertError):
    pass


class SingularMatrix(ModelError):
    def __init__(self, det, threshold):
        super().__init__(f"interaction matrix is singular: |det|={abs(det):.3e} <= {threshold:.3e}")
        self.det = det
        self.threshold = threshold


class DegenerateEigenvalues(ModelError):
    def __init__(self, mu):
        super().__init__(f"eigenvalues of diag(b)A coincide: mu={tuple(mu)}")
        self.mu = tuple(mu)


class HypothesisFailed(ModelError):
    def __init__(self, report):
        checks = (("A0", report.a0_pass), ("A1", report.a1_pass), ("A2", report.a2_pass))
        failed = [name for name, ok in checks if not ok]
        super().__init__("hypotheses failed: " + ", ".join(failed))
        self.report = report


# ----------------------------
# spectrum
# ----------------------------
class SpectrumError(LVCertError):
    pass


class Boundary(SpectrumError):
    def __init__(self, mu_tau, m, distance):
        super().__init__(
            f"mu*tau={mu_tau:.12g} lies on the endpoint pi/2+2*{m}*pi (distance {distance:.3e})"
        )
        self.mu_tau = mu_tau
        self.m = m
        self.distance = distance


class NoWinding(SpectrumError):
    def __init__(self, mu_tau):
        super().__init__(f"mu*tau={mu_tau:.12g} <= pi/2: no winding number")
        self.mu_tau = mu_tau


class EmptyPhi(SpectrumError):
    def __init__(self, n1, n2):
        super().__init__(f"Phi({n1},{n2}) requires n1 < n2")
        self.n1 = n1
        self.n2 = n2


class EmptyCatalog(SpectrumError):
    pass


class LevelOutOfRange(SpectrumError):
    def __init__(self, level, floor):
        super().__init__(f"beta level {level:.12g} outside ({floor:.12g}, 1)")
        self.level = level
        self.floor = floor


class NoWindow(SpectrumError):
    def __init__(self, message, n1=None, n2=None):
        super().__init__(message)
        self.n1 = n1
        self.n2 = n2


# ----------------------------
# field
# ----------------------------
class FieldError(LVCertError):
    pass


class BoundOverflow(FieldError):
    def __init__(self, exponent):
        super().__init__(f"a priori bound exponent {exponent:.6g} exceeds the overflow guard")
        self.exponent = exponent


# ----------------------------
# dde
# ----------------------------
class SimulationError(LVCertError):
    pass


class StepTooLarge(SimulationError):
    def __init__(self, t, estimate, tol):
        super().__init__(
            f"local error {estimate:.3e} per unit time at t={t:.6g} exceeds {tol:.1e}; reduce the step"
        )
        self.t = t
        self.estimate = estimate
        self.tol = tol


class BlowUp(SimulationError):
    def __init__(self, t, value):
        super().__init__(f"state magnitude {value:.3e} at t={t:.6g}")
        self.t = t
        self.value = value


class NoCrossing(SimulationError):
    pass


class Aperiodic(SimulationError):
    def __init__(self, confidence, period=float("nan")):
        super().__init__(f"period confidence {confidence:.3f} below threshold")
        self.confidence = confidence
        self.period = period


# ----------------------------
# orbitfinder
# ----------------------------
class OrbitError(LVCertError):
    pass


class NoConvergence(OrbitError):
    def __init__(self, iterations, residual):
        super().__init__(f"Newton did not converge in {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class ConvergedToZero(OrbitError):
    def __init__(self, norm):
        super().__init__(f"Newton converged to the stationary solution (norm {norm:.3e})")
        self.norm = norm


class OutOfTheta(OrbitError):
    def __init__(self, min_population):
        super().__init__(f"solution leaves Theta_0: min(b_i + x_i) = {min_population:.6g}")
        self.min_population = min_population


# ----------------------------
# degree
# ----------------------------
class DegreeError(LVCertError):
    pass


class SignUnstable(DegreeError):
    def __init__(self, k, sign_k, sign_2k):
        super().__init__(f"bordered determinant sign changes under refinement at k={k}: {sign_k} vs {sign_2k}")
        self.k = k
        self.signs = (sign_k, sign_2k)


class DegenerateOrbit(DegreeError):
    def __init__(self, message):
        super().__init__(message)


# ----------------------------
# cli
# ----------------------------
class ConfigError(LVCertError):
    pass


class OutputExists(LVCertError):
    def __init__(self, path):
        super().__init__(f"{path} exists; pass --force to overwrite")
        self.path = path


EXIT_OK = 0
EXIT_USAGE = 64
EXIT_CODES = {
    HypothesisFailed: 1,
    ModelError: 1,
    NoWindow: 2,
    SpectrumError: 2,
    SimulationError: 3,
    OrbitError: 4,
    DegreeError: 5,
    FieldError: 5,
    ConfigError: EXIT_USAGE,
    OutputExists: 73,
}


def exit_code_for(exc):
    """Return the CLI exit code for *exc* (most specific class wins)."""
    for klass in type(exc).__mro__:
        if klass in EXIT_CODES:
            return EXIT_CODES[klass]
    return 70
