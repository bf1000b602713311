APP_NAME = "lvcert"
APP_VERSION = "1.0.0"
APP_COPYRIGHT = "© 2025"
APP_AUTHOR = "Pedro Ferreira"
APP_DESCRIPTION = "Periodic orbits of delayed Lotka-Volterra systems."
APP_LICENSE = "MIT License"

# Numeric tolerances
EQUILIBRIUM_DET_TOL = 1e-14
MU_DISTINCT_TOL = 1e-10
DISCRIMINANT_TOL = 1e-12
WINDING_GUARD = 1e-9
PHI_J_MAX = 1000

# Field / collocation defaults
DEFAULT_K = 32
DEFAULT_DEGREE_K = 64
DEFAULT_ALPHA0 = 0.05
DEFAULT_RADIUS_R = 1e-4
DEFAULT_RADIUS_BIG_R = 1.0
BOUND_SAFETY = 1.1
MAX_EXPONENT = 700.0

# Newton
NEWTON_TOL = 1e-10
NEWTON_MAX_ITERS = 50
ZERO_NORM_TOL = 1e-8

# Simulation
BLOWUP_LIMIT = 1e12
LOCAL_ERROR_TOL = 1e-6
TARGET_STEP = 0.01
TRANSIENT_TAUS = 50.0
APERIODIC_CONFIDENCE = 0.9

# Output
FLOAT_DIGITS = 17
OUTPUT_FORMATS = ("csv", "txt", "kv", "png")
DEFAULT_FORMATS = ("csv", "txt", "kv")
