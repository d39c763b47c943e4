"""Forward maps for the four benchmark inverse problems.

* ``UnimodalForward``: closed-form solution of a 1-D diffusion problem with
  constant log-conductivity and a Dirichlet datum, read at two sensors.
* ``BimodalForward``: ``(theta_1 - theta_2)^2``.
* ``HeatForward``: stationary heat conduction on the unit square with two
  circular inclusions, 5-point finite-volume scheme.
* ``KLForward``: 1-D elliptic problem whose log-permeability is a truncated
  sine series, conservative finite differences with a batched tridiagonal
  solve.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .bayes_model import GaussianPrior, PosteriorSpec, UniformBoxPrior
from .errors import InvalidArgumentError, SolverError
from .point_process import AxisBox

UNIMODAL_SENSORS = (0.25, 0.75)
UNIMODAL_NOISE_VAR = 0.01
UNIMODAL_OBSERVATION = (-0.0173, -0.573)
BIMODAL_OBSERVATION = 4.2297


def _poly(x):
    return -0.5 * x * x + 0.5 * x


class UnimodalForward:
    """``u(x) = theta_2 x + exp(-theta_1)(x/2 - x^2/2)`` at the sensors."""

    def __init__(self, sensors=UNIMODAL_SENSORS):
        self.sensors = np.asarray(sensors, dtype=float)

    def batch(self, thetas):
        t = np.atleast_2d(thetas)
        return (t[:, 1:2] * self.sensors
                + np.exp(-t[:, 0:1]) * _poly(self.sensors))

    def __call__(self, theta):
        return self.batch(np.asarray(theta, dtype=float)[None, :])[0]

    def jacobian(self, theta):
        t1 = float(theta[0])
        return np.column_stack([-math.exp(-t1) * _poly(self.sensors), self.sensors])


class BimodalForward:
    def batch(self, thetas):
        t = np.atleast_2d(thetas)
        return ((t[:, 0] - t[:, 1]) ** 2)[:, None]

    def __call__(self, theta):
        return self.batch(np.asarray(theta, dtype=float)[None, :])[0]

    def jacobian(self, theta):
        d = float(theta[0] - theta[1])
        return np.array([[2 * d, -2 * d]])


def unimodal_forward(theta):
    return UnimodalForward()(theta)


def bimodal_forward(theta):
    return float(BimodalForward()(theta)[0])


# -- 1-D elliptic problem ----------------------------------------------------

def thomas_solve(lower, diag, upper, rhs):
    """Batched tridiagonal solve along the last axis.

    ``diag`` and ``rhs`` have shape (B, n); ``lower``/``upper`` have shape
    (B, n-1) (sub- and super-diagonal). No pivoting, so the system must be
    diagonally dominant, which holds for the SPD stiffness matrices here.
    """
    diag = np.array(diag, dtype=float)
    rhs = np.array(rhs, dtype=float)
    n = diag.shape[-1]
    c = np.empty_like(upper, dtype=float)
    c[..., 0] = upper[..., 0] / diag[..., 0]
    rhs[..., 0] /= diag[..., 0]
    for i in range(1, n):
        denom = diag[..., i] - lower[..., i - 1] * c[..., i - 1]
        if i < n - 1:
            c[..., i] = upper[..., i] / denom
        rhs[..., i] = (rhs[..., i] - lower[..., i - 1] * rhs[..., i - 1]) / denom
    for i in range(n - 2, -1, -1):
        rhs[..., i] -= c[..., i] * rhs[..., i + 1]
    return rhs


def solve_elliptic_1d_batch(log_coeff_mid, rhs=1.0):
    """Solve ``-(exp(p) u')' = rhs`` on [0, 1] with u(0) = u(1) = 0.

    Args:
        log_coeff_mid: (B, n-1) values of p at the cell midpoints of a
            uniform mesh with n nodes.

    Returns:
        (B, n) nodal solutions including the zero boundary values.
    """
    p = np.atleast_2d(np.asarray(log_coeff_mid, dtype=float))
    if not np.all(np.isfinite(p)):
        raise SolverError("non-finite log-coefficient")
    a = np.exp(p)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise SolverError("coefficient exp(p) is not finite and positive")
    n = p.shape[1] + 1
    h = 1.0 / (n - 1)
    diag = a[:, :-1] + a[:, 1:]
    off = -a[:, 1:-1]
    f = np.full(diag.shape, rhs * h * h)
    u = np.zeros((p.shape[0], n))
    u[:, 1:-1] = thomas_solve(off, diag, off, f)
    return u


def solve_elliptic_1d(log_coeff, n_nodes, rhs=1.0):
    """Single solve; ``log_coeff`` is evaluated at cell midpoints.

    Returns the node coordinates and the solution.
    """
    if n_nodes < 11:
        raise InvalidArgumentError(f"n_nodes must be >= 11, got {n_nodes}")
    x = np.linspace(0.0, 1.0, n_nodes)
    mid = 0.5 * (x[1:] + x[:-1])
    p = np.broadcast_to(np.asarray(log_coeff(mid), dtype=float), mid.shape)
    return x, solve_elliptic_1d_batch(p[None, :], rhs)[0]


def kl_basis(n_terms, x):
    """Dirichlet Laplacian eigenfunctions ``sqrt(2) sin(k pi x)``, shape (len(x), N)."""
    k = np.arange(1, n_terms + 1)
    return math.sqrt(2.0) * np.sin(np.pi * np.outer(np.asarray(x, dtype=float), k))


def kl_expand(theta, x):
    """``p(x) = sum_k theta_k sqrt(2) sin(k pi x)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return kl_basis(theta.size, x) @ theta


@dataclass(frozen=True)
class KLSetup:
    N: int = 3
    s: float = 1.0
    n_nodes: int = 101
    obs_points: tuple = tuple(i / 10 for i in range(1, 10))
    noise_var: float = 1e-4

    def prior(self):
        k = np.arange(1, self.N + 1)
        # coefficient variances are the covariance-operator eigenvalues (k pi)^(-2s)
        return GaussianPrior(np.zeros(self.N), np.diag((k * np.pi) ** (-2.0 * self.s)))

    def with_nodes(self, n_nodes):
        return KLSetup(self.N, self.s, n_nodes, self.obs_points, self.noise_var)


KL_TRUE_THETA = (0.1, 0.4, -0.4)


class KLForward:
    """``theta -> u(obs_points)`` for the KL-parametrized elliptic problem."""

    def __init__(self, setup=KLSetup()):
        if setup.n_nodes < 11:
            raise InvalidArgumentError("n_nodes must be >= 11")
        self.setup = setup
        self.x = np.linspace(0.0, 1.0, setup.n_nodes)
        self._mid_basis = kl_basis(setup.N, 0.5 * (self.x[1:] + self.x[:-1]))
        self._obs = np.asarray(setup.obs_points, dtype=float)

    def solve(self, thetas):
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        return solve_elliptic_1d_batch(t @ self._mid_basis.T)

    def batch(self, thetas, chunk=20_000):
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty((t.shape[0], self._obs.size))
        for start in range(0, t.shape[0], chunk):
            u = self.solve(t[start:start + chunk])
            for j, xo in enumerate(self._obs):
                out[start:start + chunk, j] = _interp_rows(xo, self.x, u)
        return out

    def __call__(self, theta):
        return self.batch(np.asarray(theta, dtype=float)[None, :])[0]


def _interp_rows(xo, x, u):
    i = min(max(int(np.searchsorted(x, xo, side="right")) - 1, 0), x.size - 2)
    t = (xo - x[i]) / (x[i + 1] - x[i])
    return (1 - t) * u[:, i] + t * u[:, i + 1]


def kl_forward(setup, theta):
    return KLForward(setup)(theta)


# -- 2-D heat conduction -----------------------------------------------------

@dataclass(frozen=True)
class HeatSetup:
    """Unit-square conduction problem with two disk inclusions.

    Nodes sit at ``(i h, j h)`` with ``h = 1/(n-1)``. The top edge holds the
    Dirichlet temperature ``T``; a flux ``q`` enters through the bottom edge;
    left and right edges are insulated.
    """
    n: int = 65
    kappa0: float = 15.0
    disks: tuple = (((0.3, 0.4), 0.15), ((0.7, 0.4), 0.15))
    T: float = 200.0
    q: float = 2000.0
    sensors: tuple = tuple((x, 0.9) for x in (0.1, 0.3, 0.5, 0.7, 0.9))

    def __post_init__(self):
        if self.n < 33:
            raise InvalidArgumentError(f"grid must have n >= 33 nodes per side, got {self.n}")
        (c1, r1), (c2, r2) = self.disks
        if math.dist(c1, c2) <= r1 + r2:
            raise InvalidArgumentError("inclusions overlap")
        for (cx, cy), r in self.disks:
            if cx - r <= 0 or cx + r >= 1 or cy - r <= 0 or cy + r >= 1:
                raise InvalidArgumentError("inclusion leaves the unit square")

    def with_grid(self, n):
        return HeatSetup(n, self.kappa0, self.disks, self.T, self.q, self.sensors)


HEAT_TRUE_KAPPA = (32.0, 28.0)


def kappa_from_theta(theta):
    return 30.0 + 6.0 * np.arctan(np.asarray(theta, dtype=float))


def theta_from_kappa(kappa):
    return np.tan((np.asarray(kappa, dtype=float) - 30.0) / 6.0)


class _HeatOperator:
    """Precomputed sparsity pattern and geometry for one HeatSetup."""

    def __init__(self, setup):
        self.setup = setup
        n = setup.n
        h = 1.0 / (n - 1)
        self.h = h
        xs = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(xs, xs, indexing="xy")   # [j, i] -> (x_i, y_j)
        self.region = np.zeros((n, n), dtype=np.int8)
        for k, ((cx, cy), r) in enumerate(setup.disks, start=1):
            self.region[(X - cx) ** 2 + (Y - cy) ** 2 <= r * r] = k
        # control-volume widths: half cells on the insulated sides and bottom
        self.wx = np.full(n, h)
        self.wx[[0, -1]] = h / 2
        wy = np.full(n - 1, h)
        wy[0] = h / 2
        self.wy = wy
        nu = (n - 1) * n                       # unknown rows j = 0..n-2
        idx = np.arange(nu).reshape(n - 1, n)
        self.idx = idx
        # horizontal links (j, i)-(j, i+1): face length wy[j]
        self.h_a, self.h_b = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        self.h_len = np.repeat(wy, n - 1)
        # vertical links (j, i)-(j+1, i) among unknowns: face length wx[i]
        self.v_a, self.v_b = idx[:-1, :].ravel(), idx[1:, :].ravel()
        self.v_len = np.tile(self.wx, n - 2)
        rows = np.concatenate([self.h_a, self.h_b, self.v_a, self.v_b,
                               self.h_a, self.h_b, self.v_a, self.v_b, idx[-1]])
        cols = np.concatenate([self.h_b, self.h_a, self.v_b, self.v_a,
                               self.h_a, self.h_b, self.v_a, self.v_b, idx[-1]])
        self._pattern = (rows, cols)
        self.nu = nu
        self.rhs_base = np.zeros(nu)
        self.rhs_base[idx[0]] += setup.q * self.wx     # bottom inflow

    def conductivity(self, kappa1, kappa2):
        table = np.array([self.setup.kappa0, kappa1, kappa2], dtype=float)
        return table[self.region]

    def assemble(self, kappa_nodes):
        n = self.setup.n
        k = kappa_nodes
        hm = lambda a, b: 2.0 * a * b / (a + b)
        kh = hm(k[:-1, :-1], k[:-1, 1:]).ravel() * self.h_len / self.h
        kv = hm(k[:-2, :], k[1:-1, :]).ravel() * self.v_len / self.h
        ktop = hm(k[-2, :], k[-1, :]) * self.wx / self.h
        data = np.concatenate([-kh, -kh, -kv, -kv, kh, kh, kv, kv, ktop])
        A = sparse.csc_matrix((data, self._pattern), shape=(self.nu, self.nu))
        b = self.rhs_base.copy()
        b[self.idx[-1]] += ktop * self.setup.T
        return A, b, ktop

    def solve(self, kappa1, kappa2):
        n = self.setup.n
        kn = self.conductivity(kappa1, kappa2)
        A, b, _ = self.assemble(kn)
        try:
            u = splu(A).solve(b)
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        res = np.linalg.norm(A @ u - b) / np.linalg.norm(b)
        if not np.isfinite(res) or res > 1e-10:
            raise SolverError(f"linear solve residual {res:.3e} above 1e-10")
        field_ = np.empty((n, n))
        field_[:-1] = u.reshape(n - 1, n)
        field_[-1] = self.setup.T
        return field_


_OPERATORS = {}


def _operator(setup):
    op = _OPERATORS.get(setup)
    if op is None:
        op = _OPERATORS[setup] = _HeatOperator(setup)
    return op


def solve_heat_2d(setup, kappa1, kappa2):
    """Temperature field on the (n, n) node grid, indexed ``[j, i] = u(x_i, y_j)``."""
    if not (kappa1 > 0 and kappa2 > 0):
        raise SolverError(f"conductivities must be positive, got {kappa1}, {kappa2}")
    return _operator(setup).solve(float(kappa1), float(kappa2))


def top_flux(setup, field_, kappa1, kappa2):
    """Total heat flux leaving through the Dirichlet edge."""
    op = _operator(setup)
    kn = op.conductivity(kappa1, kappa2)
    ktop = 2 * kn[-2] * kn[-1] / (kn[-2] + kn[-1]) * op.wx / op.h
    return float(np.sum(ktop * (field_[-2] - field_[-1])))


def bilinear(field_, points):
    """Bilinear interpolation of a unit-square node field at (x, y) points."""
    n = field_.shape[0]
    h = 1.0 / (n - 1)
    out = []
    for x, y in points:
        i = min(int(x / h), n - 2)
        j = min(int(y / h), n - 2)
        tx, ty = x / h - i, y / h - j
        out.append((1 - tx) * (1 - ty) * field_[j, i] + tx * (1 - ty) * field_[j, i + 1]
                   + (1 - tx) * ty * field_[j + 1, i] + tx * ty * field_[j + 1, i + 1])
    return np.array(out)


class HeatForward:
    """``theta -> sensor temperatures`` with ``kappa = 30 + 6 arctan(theta)``."""

    def __init__(self, setup=HeatSetup()):
        self.setup = setup

    def sensors_at(self, kappa1, kappa2):
        return bilinear(solve_heat_2d(self.setup, kappa1, kappa2), self.setup.sensors)

    def __call__(self, theta):
        k1, k2 = kappa_from_theta(theta)
        return self.sensors_at(k1, k2)


def heat_forward(setup, theta):
    return HeatForward(setup)(theta)


# -- model factories -----------------------------------------------------------

def unimodal_model(observation=UNIMODAL_OBSERVATION):
    return PosteriorSpec(UnimodalForward(), observation, UNIMODAL_NOISE_VAR * np.eye(2),
                         GaussianPrior(np.zeros(2), np.eye(2)))


def bimodal_model(observation=BIMODAL_OBSERVATION):
    return PosteriorSpec(BimodalForward(), [observation], np.eye(1),
                         GaussianPrior(np.zeros(2), np.eye(2)))


def heat_noise_var(setup=HeatSetup()):
    """1% of the mean sensor temperature at the true conductivities, squared."""
    u_scale = float(np.mean(HeatForward(setup).sensors_at(*HEAT_TRUE_KAPPA)))
    return (0.01 * u_scale) ** 2


def heat_model(observation, setup=HeatSetup(), noise_var=None):
    if noise_var is None:
        noise_var = heat_noise_var(setup)
    m = len(setup.sensors)
    return PosteriorSpec(HeatForward(setup), observation, noise_var * np.eye(m),
                         UniformBoxPrior(AxisBox([-1.0, -1.0], [1.0, 1.0])))


def kl_model(observation, setup=KLSetup()):
    m = len(setup.obs_points)
    return PosteriorSpec(KLForward(setup), observation, setup.noise_var * np.eye(m),
                         setup.prior())
