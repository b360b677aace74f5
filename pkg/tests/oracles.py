"""Independent reference computations used to freeze expected values.

None of these import the package under test.
"""

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

# root of x = 2 tanh(x), brentq with xtol 1e-15 (mpmath agrees to 1e-14)
TANH_ROOT_C2 = 1.9150080481545375


def orthant_hilbert(x, y):
    """Closed-form Hilbert distance on the positive orthant."""
    r = np.asarray(x, dtype=float) / np.asarray(y, dtype=float)
    return np.log(r.max(axis=-1) / r.min(axis=-1))


def orthant_M_m(x, y):
    r = np.asarray(x, dtype=float) / np.asarray(y, dtype=float)
    return r.max(axis=-1), r.min(axis=-1)


def tanh_fixed_point(c):
    """Positive root of x = c tanh(x) for c > 1."""
    return brentq(lambda x: x - c * np.tanh(x), 1e-6, c + 1.0, xtol=1e-15)


def expm_nonnegative(A, times=(1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0), tol=1e-12):
    """Entrywise nonnegativity of exp(A t) at sampled times."""
    return all(np.all(expm(np.asarray(A) * t) >= -tol) for t in times)


def pendulum_facet_margin(k, theta=0.0):
    """dK2/dt on the facet dtheta + dv = 0 at unit direction (1, -1)/sqrt(2)."""
    return (k - 1.0 - np.cos(theta)) / np.sqrt(2.0)
