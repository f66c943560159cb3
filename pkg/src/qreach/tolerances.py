"""Numerical tolerances shared across the package."""

# states and operators
NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-8
DENSITY_MIN_EIG = -1e-8
EXPECTATION_IMAG_ATOL = 1e-12
COMMUTATION_ATOL = 1e-10

# bound engine
E_ZERO = 1e-14
VARIANCE_CLAMP = 1e-12
E_NEGATIVE_ATOL = 1e-12
E_ABOVE_A_ATOL = 1e-10
TRUNCATION_POPULATION = 1e-12

# integrators
TRACE_DRIFT_PER_STEP = 1e-10
HERMITICITY_DRIFT = 1e-10
POSITIVITY_FLAG = -1e-6
J_LOWER = -1e-8
