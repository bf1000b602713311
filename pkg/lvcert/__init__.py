from .constants import APP_NAME, APP_VERSION, APP_COPYRIGHT
from .model import LVSystem, LogisticSystem, check_hypotheses
from .spectrum import select_window, catalog
from .field import FourierLoop, ThetaGeometry
from .orbitfinder import CollocationProblem, newton_solve, sweep, verify_orbit
from .degree import GammaElement, certify

__all__ = [
    "APP_NAME",
    "APP_VERSION",
    "APP_COPYRIGHT",
    "LVSystem",
    "LogisticSystem",
    "check_hypotheses",
    "select_window",
    "catalog",
    "FourierLoop",
    "ThetaGeometry",
    "CollocationProblem",
    "newton_solve",
    "sweep",
    "verify_orbit",
    "GammaElement",
    "certify",
]
