"""Ready-made model, cone and region bundles, registered by name."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .cones import QUADRATIC, ConeField, feasibility_margin, polyhedral_cone
from .dynamics import SystemModel
from .errors import ConfigError, PhaseBalancedError, PreconditionError
from .regions import CompactRegion, PhaseGapRegion, Region, TubeRegion
from .reports import FAIL, PASS


@dataclass(frozen=True, eq=False)
class ModelBundle:
    name: str
    model: SystemModel
    cone: ConeField
    default_region: Region
    expected: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    symmetry: np.ndarray | None = None
    oracle: Callable | None = None


# -- pendulum ---------------------------------------------------------------

def pendulum_cone():
    """``dtheta >= 0`` and ``dtheta + dv >= 0``."""
    return polyhedral_cone([[1.0, 0.0], [1.0, 1.0]], name="pendulum_default")


def pendulum_slow_manifold(k, u):
    """Second-order large-damping approximation of the rotating orbit ``v = V(theta)``."""

    def center(theta):
        s = u - np.sin(theta)
        return s / k + s * np.cos(theta) / k ** 3

    return center


def pendulum(k=3.0, u=0.0, halfwidth=0.05):
    """Damped pendulum with constant torque on the cylinder S x R.

    For ``u <= 1`` the default region is the band ``S x [-b, b]`` with
    ``b >= (1+|u|)/k``, which is forward invariant.  For ``u > 1`` it is a
    thin tube around the slow manifold: the rotating orbit lives there and the
    vector field points into the cone on it.
    """
    k = float(k)
    u = float(u)

    def f(x):
        th, v = x[..., 0], x[..., 1]
        return np.stack([v, -np.sin(th) - k * v + u], axis=-1)

    def jac(x):
        th = x[..., 0]
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -np.cos(th)
        J[..., 1, 1] = -k
        return J

    model = SystemModel(2, f, jac, wrap=(True, False), name="pendulum", params={"k": k, "u": u})
    if u > 1.0:
        region = TubeRegion(pendulum_slow_manifold(k, u), halfwidth=halfwidth,
                            label=f"pendulum_tube(k={k},u={u})")
    else:
        b = max(1.0, 1.2 * (1.0 + abs(u)) / k)
        region = CompactRegion((-np.pi, -b), (np.pi, b), wrap=(True, False))
    expected = {"theorem3": PASS if k > 2 else FAIL}
    if u > 1.0 and k > 2:
        expected["attractor"] = "LimitCycle"
    elif k > 2:
        expected["attractor"] = "FixedPoints"
    return ModelBundle("pendulum", model, pendulum_cone(), region, expected, {"k": k, "u": u})


# -- cooperative tanh network -----------------------------------------------

def cooperative_demo(c=2.0):
    """``x1' = -x1 + c tanh(x2)``, ``x2' = -x2 + c tanh(x1)`` on [-2, 2]^2."""
    c = float(c)

    def f(x):
        return -x + c * np.tanh(x[..., ::-1])

    def jac(x):
        sech2 = 1.0 / np.cosh(x) ** 2
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = -1.0
        J[..., 1, 1] = -1.0
        J[..., 0, 1] = c * sech2[..., 1]
        J[..., 1, 0] = c * sech2[..., 0]
        return J

    model = SystemModel(2, f, jac, name="cooperative_demo", params={"c": c})
    expected = {"theorem1": PASS if c >= 0 else FAIL, "theorem3": PASS if c > 0 else FAIL}
    if c > 1:
        expected["attractor"] = "FixedPoints"
    return ModelBundle("cooperative_demo", model, orthant_cone(2),
                       CompactRegion((-2.0, -2.0), (2.0, 2.0)), expected, {"c": c})


# -- linear systems ---------------------------------------------------------

def orthant_cone(n):
    return polyhedral_cone(np.eye(n), name="orthant")


def is_metzler(A, tol=0.0):
    A = np.asarray(A, dtype=float)
    off = A[~np.eye(len(A), dtype=bool)]
    return bool(np.all(off >= -tol))


def metzler_linear(A, bound=1.0):
    """``x' = A x`` with the positive-orthant cone; ``oracle(t)`` is ``expm(A t)``."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError("A must be a square matrix")
    n = len(A)
    model = SystemModel(n, lambda x: x @ A.T, lambda x: A, name="metzler_linear",
                        params={"A": A.tolist()})
    off = A[~np.eye(n, dtype=bool)]
    expected = {"invariance": PASS if is_metzler(A) else FAIL,
                "theorem3": PASS if n > 1 and np.all(off > 0) else FAIL}
    region = CompactRegion((-bound,) * n, (bound,) * n)
    return ModelBundle("metzler_linear", model, orthant_cone(n), region, expected,
                       {"A": A.tolist()}, oracle=lambda t: expm(A * t))


# -- Kuramoto ---------------------------------------------------------------

def centroid(theta):
    """Order parameter: ``rho * exp(i phi) = mean(exp(i theta))``.

    ``phi`` lies in (-pi, pi] and is ``nan`` where ``rho < 1e-12``.
    """
    z = np.mean(np.exp(1j * np.asarray(theta, dtype=float)), axis=-1)
    rho = np.abs(z)
    phi = np.where(rho < 1e-12, np.nan, np.angle(z))
    if np.ndim(rho) == 0:
        return float(rho), float(phi)
    return rho, phi


def centroid_angle(theta):
    rho, phi = centroid(theta)
    if np.any(np.asarray(rho) < 1e-12):
        raise PhaseBalancedError("phases are balanced (rho = 0); centroid angle undefined")
    return phi


def kuramoto_S(theta):
    theta = np.asarray(theta, dtype=float)
    return np.sin(theta[..., None, :] - theta[..., :, None])


def kuramoto_C(theta):
    """``C[k, i] = cos(theta_i - theta_k)`` off the diagonal; rows sum to zero."""
    theta = np.asarray(theta, dtype=float)
    C = np.cos(theta[..., None, :] - theta[..., :, None])
    n = theta.shape[-1]
    eye = np.eye(n, dtype=bool)
    C = np.where(eye, 0.0, C)
    diag = -C.sum(axis=-1)
    C[..., eye] = diag
    return C


def projector(n):
    return np.eye(n) - np.ones((n, n)) / n


def rho_dot(theta):
    """``(rho/n) * sum_k sin(theta_k - phi)^2`` along the Kuramoto flow."""
    theta = np.asarray(theta, dtype=float)
    phi = centroid_angle(theta)
    rho, _ = centroid(theta)
    n = theta.shape[-1]
    return rho / n * np.sum(np.sin(theta - np.asarray(phi)[..., None]) ** 2, axis=-1)


def saddle_measure(theta):
    """``sum_k sin(theta_k - phi)^2``; zero on synchronized and anti-phase clusters."""
    theta = np.asarray(theta, dtype=float)
    phi = centroid_angle(theta)
    return np.sum(np.sin(theta - np.asarray(phi)[..., None]) ** 2, axis=-1)


def _grad_rho(theta):
    n = theta.shape[-1]
    e = np.exp(1j * theta)
    z = e.mean(axis=-1)
    rho = np.abs(z)
    safe = np.where(rho > 0, rho, 1.0)
    return -np.imag(np.conj(z)[..., None] * e) / (n * safe[..., None]), rho


def kuramoto_rho_cone(n, lambda_param=1.0, samples=None):
    """``K1 = 1^T d``, ``K2 = exp(2 lam rho) (1^T d)^2 - d^T Pi d``."""
    n = int(n)
    lam = float(lambda_param)
    if n < 2:
        raise PreconditionError("Kuramoto cone needs n >= 2")
    if lam <= 0:
        raise PreconditionError("lambda_param must be positive")

    def values(x, d):
        rho = np.abs(np.mean(np.exp(1j * x), axis=-1))
        s = d.sum(axis=-1)
        q = np.einsum("...i,...i->...", d, d) - s * s / n
        return np.stack([s, np.exp(2 * lam * rho) * s * s - q], axis=-1)

    def grad_dx(x, d):
        rho = np.abs(np.mean(np.exp(1j * x), axis=-1))
        s = d.sum(axis=-1)
        g1 = np.ones_like(d)
        g2 = 2 * np.exp(2 * lam * rho)[..., None] * s[..., None] - 2 * (d - s[..., None] / n)
        return np.stack([g1, g2], axis=-2)

    def grad_x(x, d):
        grho, rho = _grad_rho(x)
        s = d.sum(axis=-1)
        g2 = (2 * lam * np.exp(2 * lam * rho) * s * s)[..., None] * grho
        return np.stack([np.zeros_like(d), g2], axis=-2)

    cone = ConeField(n, 2, values, grad_dx, grad_x, kind=QUADRATIC, degrees=(1, 2), facets=(1,),
                     constant=False, name="kuramoto_rho_cone",
                     params={"n": n, "lambda_param": lam})
    pts = np.zeros((1, n)) if samples is None else np.atleast_2d(samples)
    eps_bar = min(feasibility_margin(cone, p, n_starts=16)[0] for p in pts)
    return ConeField(**{**cone.__dict__, "feasibility_eps": eps_bar})


def kuramoto_k2_derivative(theta, dtheta, lambda_param):
    """Closed-form time derivative of ``K2`` along the prolonged Kuramoto flow.

    ``2 lam rho' e^{2 lam rho} (1^T d)^2 - (1/n) d^T (C^T + C) d``; the
    ``1/n`` comes from the coupling normalization of the vector field.
    """
    theta = np.asarray(theta, dtype=float)
    d = np.asarray(dtheta, dtype=float)
    n = theta.shape[-1]
    rho, _ = centroid(theta)
    C = kuramoto_C(theta)
    s = d.sum(axis=-1)
    quad = np.einsum("...i,...ij,...j->...", d, C + np.swapaxes(C, -1, -2), d)
    return 2 * lambda_param * rho_dot(theta) * np.exp(2 * lambda_param * rho) * s * s - quad / n


def kuramoto(n=5, lambda_param=1.0, max_gap=np.pi / 2 - 0.1):
    """All-to-all Kuramoto phases with identical (zero) natural frequencies."""
    n = int(n)
    if n < 2:
        raise PreconditionError("Kuramoto model needs n >= 2")

    def f(x):
        return kuramoto_S(x).sum(axis=-1) / n

    def jac(x):
        return kuramoto_C(x) / n

    model = SystemModel(n, f, jac, wrap=(True,) * n, name="kuramoto", params={"n": n})
    region = PhaseGapRegion(n, float(max_gap))
    cone = kuramoto_rho_cone(n, lambda_param)
    expected = {"theorem3": PASS, "attractor": "Synchronization"}
    return ModelBundle("kuramoto", model, cone, region, expected,
                       {"n": n, "lambda_param": float(lambda_param), "max_gap": float(max_gap)},
                       symmetry=np.ones(n) / np.sqrt(n))


# -- registry ---------------------------------------------------------------

def _matrix(value):
    if isinstance(value, str):
        rows = [r for r in value.replace("|", ";").split(";") if r.strip()]
        return [[float(v) for v in r.replace(",", " ").split()] for r in rows]
    return np.asarray(value, dtype=float).tolist()


MODELS = {
    "pendulum": (pendulum, {"k": float, "u": float, "halfwidth": float}),
    "cooperative_demo": (cooperative_demo, {"c": float}),
    "metzler_linear": (metzler_linear, {"A": _matrix, "bound": float}),
    "kuramoto": (kuramoto, {"n": int, "lambda_param": float, "max_gap": float}),
}


def build_bundle(name, params=None):
    params = dict(params or {})
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}", field="model")
    factory, types = MODELS[name]
    unknown = set(params) - set(types)
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {name}: {sorted(unknown)}", field="model_params")
    try:
        kwargs = {k: types[k](v) for k, v in params.items()}
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad parameter value for {name}: {err}", field="model_params") from err
    return factory(**kwargs)


def build_cone(name, dim, params=None):
    params = dict(params or {})
    if name == "pendulum_default":
        if dim != 2:
            raise ConfigError("pendulum_default cone is two-dimensional", field="cone")
        return pendulum_cone()
    if name == "orthant":
        return orthant_cone(dim)
    if name == "kuramoto_rho_cone":
        return kuramoto_rho_cone(dim, float(params.get("lambda_param", 1.0)))
    raise ConfigError(f"unknown cone {name!r}", field="cone")


CONES = ("pendulum_default", "orthant", "kuramoto_rho_cone")
