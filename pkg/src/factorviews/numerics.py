"""Shared dense-matrix kernels.

Matrix exponential, Lyapunov solve, Cholesky with pivot diagnostics,
fixed-step Runge-Kutta integration on a uniform time grid, and composite
Simpson quadrature for matrix-valued integrands.  Everything here is a pure
function of its inputs; all downstream modules build on these kernels.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be positive definite is not.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first non-positive pivot encountered while
        scanning leading principal minors.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        if message is None:
            message = f"matrix is not positive definite (offending pivot {pivot})"
        super().__init__(message)


class NumericalError(RuntimeError):
    """Raised when an iterative numerical procedure fails (blow-up, NaN)."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of a time interval [t0, t1].

    Parameters
    ----------
    t0, t1 : float
        Interval endpoints in years, ``t0 < t1``.
    n_steps : int
        Number of uniform steps (``n_steps >= 1``).
    """

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError(f"require t0 < t1, got [{self.t0}, {self.t1}]")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def h(self):
        """Step size in years."""
        return (self.t1 - self.t0) / self.n_steps

    @property
    def nodes(self):
        """All ``n_steps + 1`` grid nodes, ascending."""
        return np.linspace(self.t0, self.t1, self.n_steps + 1)


def mat_exp(a, t=1.0):
    """Matrix exponential ``e^{a t}``.

    Parameters
    ----------
    a : ndarray, shape (n, n)
        Square matrix.
    t : float, optional
        Scale factor applied before exponentiation.

    Returns
    -------
    ndarray, shape (n, n)
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"mat_exp requires a square matrix, got shape {a.shape}")
    if t == 0.0:
        return np.eye(a.shape[0])
    return scipy.linalg.expm(a * t)


def solve_lyapunov(theta, q):
    """Solve the continuous Lyapunov equation ``theta S + S theta^T = q``.

    Uses Kronecker vectorization; intended for small dense systems
    (dimension <= ~10).

    Parameters
    ----------
    theta : ndarray, shape (d, d)
        Matrix whose eigenvalues all have strictly positive real part.
    q : ndarray, shape (d, d)
        Symmetric right-hand side.

    Returns
    -------
    ndarray, shape (d, d)
        Symmetric solution S.
    """
    theta = np.asarray(theta, dtype=float)
    q = np.asarray(q, dtype=float)
    d = theta.shape[0]
    if theta.shape != (d, d) or q.shape != (d, d):
        raise ValueError("theta and q must be square matrices of equal size")
    if not np.allclose(q, q.T, atol=1e-10 * max(1.0, np.linalg.norm(q))):
        raise ValueError("q must be symmetric")
    eigs = np.linalg.eigvals(theta)
    if np.any(eigs.real <= 0.0):
        raise ValueError(f"theta must have eigenvalues with positive real part, got {eigs}")
    eye = np.eye(d)
    kron = np.kron(eye, theta) + np.kron(theta, eye)
    s = np.linalg.solve(kron, q.reshape(-1)).reshape(d, d)
    s = 0.5 * (s + s.T)
    residual = np.linalg.norm(theta @ s + s @ theta.T - q)
    if residual > 1e-10 * max(1.0, np.linalg.norm(q)):
        raise NumericalError(f"Lyapunov residual too large: {residual:.3e}")
    return s


def cholesky(s):
    """Lower-triangular Cholesky factor of a symmetric PD matrix.

    The input is symmetrized before factorization.  On failure the offending
    pivot is located by scanning leading principal minors and reported in the
    raised :class:`NotPositiveDefiniteError`.

    Parameters
    ----------
    s : ndarray, shape (n, n)

    Returns
    -------
    ndarray, shape (n, n)
        Lower-triangular L with ``L @ L.T == s``.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"cholesky requires a square matrix, got shape {s.shape}")
    s = 0.5 * (s + s.T)
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        for k in range(1, s.shape[0] + 1):
            try:
                np.linalg.cholesky(s[:k, :k])
            except np.linalg.LinAlgError:
                raise NotPositiveDefiniteError(k - 1) from None
        raise NotPositiveDefiniteError(s.shape[0] - 1) from None


def _rk4_march(rhs, state0, times):
    """Classical RK4 along an ordered sequence of times (may be descending)."""
    state0 = np.asarray(state0, dtype=float)
    out = np.empty((len(times),) + state0.shape)
    out[0] = state0
    y = state0
    for k in range(len(times) - 1):
        t = times[k]
        h = times[k + 1] - times[k]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            bad = np.argwhere(~np.isfinite(y))
            raise NumericalError(
                f"non-finite state at t={times[k + 1]:.6g}, component index {tuple(bad[0])}"
            )
        out[k + 1] = y
    return out


def integrate_backward(rhs, terminal_state, grid):
    """Integrate an ODE backward from ``grid.t1`` to ``grid.t0`` with RK4.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, state) -> dstate/dt`` (time derivative, forward convention).
    terminal_state : ndarray
        State at ``grid.t1``.
    grid : TimeGrid

    Returns
    -------
    ndarray, shape (n_steps + 1, \\*state.shape)
        State at every grid node, indexed in *ascending* time order
        (element ``[0]`` is the value at ``t0``, ``[-1]`` at ``t1``).
    """
    times = grid.nodes[::-1]
    path = _rk4_march(rhs, terminal_state, times)
    return path[::-1].copy()


def integrate_forward(rhs, initial_state, grid):
    """Integrate an ODE forward from ``grid.t0`` to ``grid.t1`` with RK4.

    Same conventions as :func:`integrate_backward`; the returned array is
    indexed in ascending time order with element ``[0]`` the initial state.
    """
    return _rk4_march(rhs, initial_state, grid.nodes)


def quad_matrix(f, a, b, n):
    """Composite Simpson quadrature of a matrix-valued function on [a, b].

    Parameters
    ----------
    f : callable
        ``f(t) -> ndarray`` with constant shape.
    a, b : float
        Integration bounds with ``a <= b``.
    n : int
        Number of panels (``n >= 1``).  Simpson's rule requires an even panel
        count, so odd ``n`` is rounded up to ``n + 1``.

    Returns
    -------
    ndarray
        Entrywise integral, same shape as ``f(t)``.
    """
    if a > b:
        raise ValueError(f"require a <= b, got [{a}, {b}]")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    if n % 2 == 1:
        n += 1
    ts = np.linspace(a, b, n + 1)
    vals = np.stack([np.asarray(f(t), dtype=float) for t in ts])
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand in quad_matrix")
    h = (b - a) / n
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return (h / 3.0) * np.tensordot(weights, vals, axes=(0, 0))
