"""Dormand-Prince 8(5,3) coefficients shared by both kernel backends."""
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES], dtype=float)
B = np.ascontiguousarray(_dop.B, dtype=float)
C = np.ascontiguousarray(_dop.C[:N_STAGES], dtype=float)
E3 = np.ascontiguousarray(_dop.E3, dtype=float)
E5 = np.ascontiguousarray(_dop.E5, dtype=float)

# error estimator order 7
ERROR_EXPONENT = -1.0 / 8.0
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

KIND_CONFORMAL = 0
KIND_ELLIPSOID = 1
