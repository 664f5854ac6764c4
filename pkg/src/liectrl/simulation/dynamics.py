"""Group law, automorphism flow and controlled dynamics in exponential coordinates.

On a simply connected nilpotent group ``exp`` is a global chart, the drift
is exactly linear (``x' = Dx``) and a right-invariant field ``X`` pulls back to
``T(x) X`` with ``T(x) = sum_k B_k / k! ad_x^k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.special import bernoulli

from ..algebra import LieAlgebra, bracket_many
from ..system import LinearSystemSpec

MAX_CLASS = 4

# Sign of the first-order Bernoulli term in T(x). Right-invariant fields give
# B_1 = -1/2; pinned by the Heisenberg matrix-group test.
B1_SIGN = -1.0


class UnsupportedError(NotImplementedError):
    pass


class DivergenceError(RuntimeError):
    """A trajectory left the safety box."""

    def __init__(self, t: float, x: np.ndarray):
        super().__init__(f"trajectory left the safety box at t={t:.6g}")
        self.t = t
        self.x = x


def _class_or_raise(a: LieAlgebra, cls: Optional[int]) -> int:
    from ..algebra import nilpotency_class

    c = nilpotency_class(a) if cls is None else cls
    if c is None:
        raise UnsupportedError("exponential coordinates need a nilpotent algebra")
    if c > MAX_CLASS:
        raise UnsupportedError(f"nilpotency class {c} exceeds the supported maximum {MAX_CLASS}")
    return c


def bch_product(a: LieAlgebra, x, y, cls: Optional[int] = None) -> np.ndarray:
    """``log(exp x exp y)`` for nilpotent class <= 4. Works row-wise on stacks."""
    c = _class_or_raise(a, cls)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    X, Y = np.broadcast_arrays(X, Y)
    Z = X + Y
    if c >= 2:
        xy = bracket_many(a, X, Y)
        Z = Z + 0.5 * xy
        if c >= 3:
            x_xy = bracket_many(a, X, xy)
            y_yx = -bracket_many(a, Y, xy)
            Z = Z + (x_xy + y_yx) / 12.0
            if c >= 4:
                Z = Z - bracket_many(a, Y, x_xy) / 24.0
    if np.ndim(x) == 1 and np.ndim(y) == 1:
        return Z[0]
    return Z


def group_inverse(x) -> np.ndarray:
    return -np.asarray(x, dtype=float)


def flow_matrix(D, t: float) -> np.ndarray:
    return scipy.linalg.expm(t * np.asarray(D, dtype=float))


def flow(D, t: float, x) -> np.ndarray:
    """Automorphism flow in exponential coordinates: ``exp(tD) x`` (row-wise)."""
    E = flow_matrix(D, t)
    x = np.asarray(x, dtype=float)
    return x @ E.T


def trivialization_coeffs(cls: int) -> np.ndarray:
    """Coefficients of ``ad_x^k`` in ``T(x)`` for ``k < cls``."""
    B = bernoulli(max(cls, 1))
    coeffs = np.array([B[k] / factorial(k) for k in range(cls)], dtype=float)
    if cls > 1:
        coeffs[1] = B1_SIGN * abs(coeffs[1])
    return coeffs


def apply_trivialization(a: LieAlgebra, X: np.ndarray, W: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Row-wise ``T(x) w``; the Bernoulli sum truncates at the nilpotency class."""
    out = coeffs[0] * W
    term = W
    for k in range(1, coeffs.size):
        term = bracket_many(a, X, term)
        if coeffs[k] != 0.0:
            out = out + coeffs[k] * term
    return out


class Dynamics:
    """Vectorized right-hand side ``x' = Dx + sum_j u_j T(x) X^j``.

    ``direction=-1`` gives the time-reversed system.
    """

    def __init__(self, s: LinearSystemSpec, direction: float = 1.0):
        self.s = s
        self.a = s.algebra
        self.cls = _class_or_raise(s.algebra, None)
        self.coeffs = trivialization_coeffs(max(self.cls, 1))
        self.DT = np.array(s.D.T)
        self.Xc = np.array(s.controls)  # (m, d)
        self.direction = float(direction)
        self.abelian = self.cls <= 1

    def __call__(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        W = U @ self.Xc
        if not self.abelian:
            W = apply_trivialization(self.a, X, W, self.coeffs)
        return self.direction * (X @ self.DT + W)

    def rk4_step(self, X: np.ndarray, U: np.ndarray, h: float) -> np.ndarray:
        k1 = self(X, U)
        k2 = self(X + 0.5 * h * k1, U)
        k3 = self(X + 0.5 * h * k2, U)
        k4 = self(X + h * k3, U)
        return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def vector_field(s: LinearSystemSpec, x, u) -> np.ndarray:
    """Tangent vector at ``x`` under control value ``u`` (log coordinates)."""
    dyn = Dynamics(s)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return dyn(x, u)[0]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray

    def to_csv(self) -> str:
        d = self.x.shape[1]
        lines = ["t," + ",".join(f"x_{i + 1}" for i in range(d))]
        for ti, xi in zip(self.t, self.x):
            lines.append(",".join(repr(float(v)) for v in (ti, *xi)))
        return "\n".join(lines) + "\n"


def _steps(duration: float, dt: float) -> int:
    n = int(round(duration / dt))
    if n < 1 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"step {dt} does not divide the control segment of length {duration}")
    return n


def integrate(
    s: LinearSystemSpec,
    x0,
    control: Sequence[tuple[float, Sequence[float]]],
    dt: float,
    safety: float = 1e6,
    direction: float = 1.0,
    check_range: bool = True,
) -> Trajectory:
    """RK4 integration under a piecewise-constant control.

    ``control`` is a list of ``(duration, value)`` segments. Raises
    ``DivergenceError`` when ``max |x_i|`` exceeds ``safety``.
    """
    dyn = Dynamics(s, direction)
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    ts, xs = [0.0], [x[0].copy()]
    t = 0.0
    for duration, value in control:
        u = np.atleast_2d(np.asarray(value, dtype=float))
        if check_range and not s.omega.contains(u[0]):
            raise ValueError(f"control value {u[0].tolist()} is outside the control range")
        n = _steps(float(duration), dt)
        for _ in range(n):
            x = dyn.rk4_step(x, u, dt)
            t += dt
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > safety:
                raise DivergenceError(t, x[0])
            ts.append(t)
            xs.append(x[0].copy())
    return Trajectory(np.array(ts), np.array(xs))


def endpoint(s, x0, control, dt, direction: float = 1.0) -> np.ndarray:
    return integrate(s, x0, control, dt, direction=direction).x[-1]


def solution_identity_check(s: LinearSystemSpec, g, control, dt: float) -> float:
    """Residual of ``phi_{T,u}(g) = phi_{T,u}(e) . phi_T(g)`` in the sup norm."""
    g = np.asarray(g, dtype=float)
    T = sum(float(dur) for dur, _ in control)
    from_g = endpoint(s, g, control, dt)
    from_e = endpoint(s, np.zeros(s.dim), control, dt)
    rhs = bch_product(s.algebra, from_e, flow(s.D, T, g))
    return float(np.max(np.abs(from_g - rhs)))
