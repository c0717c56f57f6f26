"""Three-stage Radau IIA integrator (order 5) with embedded error control.

The Newton iteration on the collocation system is carried out in the
eigenbasis of the Butcher matrix, as in Hairer & Wanner's RADAU5: one real
and one complex linear system per iteration.  The linear algebra is
delegated to a solver chosen from the type of the Jacobian, so that large
ensembles of weakly coupled three-component blocks never form a dense
matrix.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

__all__ = ["BlockDiagonal", "IntegrationError", "RadauResult", "radau"]

EPS = np.finfo(float).eps

S6 = 6 ** 0.5
C = np.array([(4 - S6) / 10, (4 + S6) / 10, 1.0])
A = np.array([
    [(88 - 7 * S6) / 360, (296 - 169 * S6) / 1800, (-2 + 3 * S6) / 225],
    [(296 + 169 * S6) / 1800, (88 + 7 * S6) / 360, (-2 - 3 * S6) / 225],
    [(16 - S6) / 36, (16 + S6) / 36, 1 / 9],
])
# embedded error estimate coefficients (RADAU5 DD1..DD3)
E = np.array([-13 - 7 * S6, -13 + 7 * S6, -1.0]) / 3

NEWTON_MAXITER = 6
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def _transform():
    """Real block-diagonalisation of inv(A): inv(A) = T @ L @ inv(T)."""
    w, v = np.linalg.eig(np.linalg.inv(A))
    i_real = int(np.argmin(np.abs(w.imag)))
    i_cplx = int(np.argmin(w.imag))  # eigenvalue alpha - i*beta, beta > 0
    vr = v[:, i_real].real
    vc = v[:, i_cplx]
    T = np.column_stack([vr / vr[2], vc.real, vc.imag])
    alpha, beta = w[i_cplx].real, -w[i_cplx].imag
    # with T built from the (alpha - i beta) eigenvector the 2x2 block is
    # [[alpha, -beta], [beta, alpha]], which acts on W1 + i W2 as alpha + i beta
    return T, np.linalg.inv(T), w[i_real].real, complex(alpha, beta)


T, TI, MU_REAL, MU_COMPLEX = _transform()
TI_REAL = TI[0]
TI_COMPLEX = TI[1] + 1j * TI[2]
# dense output: Z_i = sum_k Q_k c_i**(k+1)  =>  Q = Z.T @ P
P = np.linalg.inv(np.vander(C, 4, increasing=True)[:, 1:]).T


class IntegrationError(RuntimeError):
    """Raised when the integrator cannot continue (NaN, step underflow)."""

    def __init__(self, message, t):
        super().__init__(f"{message} (t = {t:.9g} s)")
        self.t = t


class BlockDiagonal:
    """Jacobian made of independent 3x3 blocks.

    The state vector is laid out component-major: ``y.reshape(3, n)`` gives
    the three components of every block, so block ``j`` couples entries
    ``j``, ``n + j`` and ``2n + j``.

    Parameters
    ----------
    blocks : ndarray, shape (n, 3, 3)
    """

    def __init__(self, blocks):
        self.blocks = np.asarray(blocks, dtype=float)

    @property
    def n(self):
        return self.blocks.shape[0]

    def factor(self, mu):
        """Return a solver for ``(mu * I - J) x = b``."""
        M = -self.blocks.astype(complex if np.iscomplexobj(mu) else float)
        M[:, 0, 0] += mu
        M[:, 1, 1] += mu
        M[:, 2, 2] += mu
        # (3, 3, n) layout keeps every coefficient row contiguous
        inv = np.ascontiguousarray(_inv3(M).transpose(1, 2, 0))
        n = self.n

        def solve(b):
            b = b.reshape(3, n)
            x = inv[:, 0] * b[0]
            x += inv[:, 1] * b[1]
            x += inv[:, 2] * b[2]
            return x.reshape(-1)

        return solve


def _inv3(M):
    """Batched closed-form inverse of 3x3 matrices."""
    a, b, c = M[:, 0, 0], M[:, 0, 1], M[:, 0, 2]
    d, e, f = M[:, 1, 0], M[:, 1, 1], M[:, 1, 2]
    g, h, k = M[:, 2, 0], M[:, 2, 1], M[:, 2, 2]
    A00 = e * k - f * h
    A01 = c * h - b * k
    A02 = b * f - c * e
    A10 = f * g - d * k
    A11 = a * k - c * g
    A12 = c * d - a * f
    A20 = d * h - e * g
    A21 = b * g - a * h
    A22 = a * e - b * d
    det = a * A00 + b * A10 + c * A20
    if np.any(det == 0):
        raise np.linalg.LinAlgError("singular 3x3 block in Newton matrix")
    inv = np.stack([
        np.stack([A00, A01, A02], axis=-1),
        np.stack([A10, A11, A12], axis=-1),
        np.stack([A20, A21, A22], axis=-1),
    ], axis=-2)
    return inv / det[:, None, None]


def _dense_factor(J, mu):
    n = J.shape[0]
    M = mu * np.eye(n, dtype=complex if np.iscomplexobj(mu) else float) - J
    lu = lu_factor(M, check_finite=False)
    return lambda b: lu_solve(lu, b, check_finite=False)


def _factor(J, mu):
    if isinstance(J, BlockDiagonal):
        return J.factor(mu)
    return _dense_factor(np.asarray(J, dtype=float), mu)


def _num_jac(fun, t, y, f0):
    n = y.size
    J = np.empty((n, n))
    for i in range(n):
        step = EPS ** 0.5 * max(1.0, abs(y[i]))
        yp = y.copy()
        yp[i] += step
        J[:, i] = (fun(t, yp) - f0) / step
    return J


def _rms(x):
    return np.linalg.norm(x) / x.size ** 0.5


class RadauResult:
    """Outcome of a :func:`radau` run."""

    def __init__(self, t, y, n_steps, n_rejected, n_fev, n_jev, n_lu):
        self.t = t
        self.y = y
        self.n_steps = n_steps
        self.n_rejected = n_rejected
        self.n_fev = n_fev
        self.n_jev = n_jev
        self.n_lu = n_lu

    @property
    def stats(self):
        return {"n_steps": self.n_steps, "n_rejected": self.n_rejected,
                "n_fev": self.n_fev, "n_jev": self.n_jev, "n_lu": self.n_lu}


def radau(fun, t_span, y0, rtol=1e-8, atol=1e-10, jac=None, t_eval=None,
          on_eval=None, first_step=None, max_step=np.inf, max_steps=1_000_000):
    """Integrate ``dy/dt = fun(t, y)`` with Radau IIA (order 5).

    Parameters
    ----------
    fun : callable
        ``fun(t, y) -> ndarray`` with ``y`` a real 1-D array.
    t_span : (float, float)
        Integration interval, ``t_span[1] >= t_span[0]``.
    y0 : array_like
    rtol, atol : float
        Tolerances for the mixed error norm ``atol + rtol * |y|`` (RMS).
    jac : callable, optional
        ``jac(t, y) -> ndarray | BlockDiagonal``.  Finite differences are
        used when omitted, which is only sensible for small systems.
    t_eval : array_like, optional
        Sorted times inside ``t_span`` where the collocation polynomial is
        evaluated.
    on_eval : callable, optional
        ``on_eval(t, y)`` called for every ``t_eval`` point, in order.

    Returns
    -------
    RadauResult
    """
    t0, tf = map(float, t_span)
    if not tf >= t0:
        raise ValueError("t_span must be increasing")
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    y = np.array(y0, dtype=float)
    n = y.size
    rtol = max(rtol, 100 * EPS)
    newton_tol = max(10 * EPS / rtol, min(0.03, rtol ** 0.5))

    t_eval = np.empty(0) if t_eval is None else np.asarray(t_eval, dtype=float)
    if t_eval.size and (np.any(np.diff(t_eval) < 0) or t_eval[0] < t0 or t_eval[-1] > tf):
        raise ValueError("t_eval must be sorted and inside t_span")
    i_eval = 0
    while i_eval < t_eval.size and t_eval[i_eval] == t0:
        if on_eval is not None:
            on_eval(t0, y.copy())
        i_eval += 1

    n_fev = n_jev = n_lu = 0

    def f_eval(t, yy):
        nonlocal n_fev
        n_fev += 1
        out = fun(t, yy)
        return out

    if jac is None:
        def jac_eval(t, yy, ff):
            return _num_jac(f_eval, t, yy, ff)
    else:
        def jac_eval(t, yy, ff):
            return jac(t, yy)

    t = t0
    f = f_eval(t, y)
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite derivative at initial state", t)
    if tf == t0:
        return RadauResult(t, y, 0, 0, n_fev, 0, 0)

    J = jac_eval(t, y, f)
    n_jev += 1
    current_jac = True

    if first_step is None:
        scale = atol + np.abs(y) * rtol
        d0, d1 = _rms(y / scale), _rms(f / scale)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, tf - t0, max_step)
    else:
        h = min(float(first_step), tf - t0)

    h_old = err_old = None
    solve_real = solve_cplx = None
    Q = None  # dense output coefficients of the last accepted step
    n_steps = n_rejected = 0
    rejected = False

    while t < tf:
        if n_steps >= max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        min_step = 10 * abs(np.nextafter(t, np.inf) - t)
        if h < min_step:
            raise IntegrationError("step size underflow", t)
        h = min(h, max_step)
        if t + h > tf:
            h = tf - t

        if solve_real is None:
            solve_real = _factor(J, MU_REAL / h)
            solve_cplx = _factor(J, MU_COMPLEX / h)
            n_lu += 2

        if Q is None:
            Z0 = np.zeros((3, n))
        else:
            x = (t + h * C - t_prev) / h_prev
            Z0 = (Q @ (x[None, :] ** np.arange(1, 4)[:, None])).T + y_prev - y

        scale = atol + np.abs(y) * rtol
        converged, n_iter, Z, rate = _newton(f_eval, t, y, h, Z0, scale, newton_tol,
                                             solve_real, solve_cplx)
        if not converged:
            if current_jac:
                h *= 0.5
            else:
                J = jac_eval(t, y, f)
                n_jev += 1
                current_jac = True
            solve_real = None
            continue

        y_new = y + Z[-1]
        ZE = (E @ Z) / h
        err = solve_real(f + ZE)
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err_norm = _rms(err / scale)
        safety = 0.9 * (2 * NEWTON_MAXITER + 1) / (2 * NEWTON_MAXITER + n_iter)
        if err_norm > 1 and rejected:
            err = solve_real(f_eval(t, y + err) + ZE)
            err_norm = _rms(err / scale)
        if not np.isfinite(err_norm):
            raise IntegrationError("non-finite error estimate", t)
        if err_norm > 1:
            factor = _predict_factor(h, h_old, err_norm, err_old)
            h *= max(MIN_FACTOR, safety * factor)
            solve_real = None
            n_rejected += 1
            rejected = True
            continue

        recompute_jac = jac is not None and n_iter > 2 and rate is not None and rate > 1e-3
        factor = _predict_factor(h, h_old, err_norm, err_old)
        factor = min(MAX_FACTOR, safety * factor)
        if not recompute_jac and factor < 1.2:
            factor = 1.0
        else:
            solve_real = None

        t_new = t + h
        if t_new >= tf or tf - t_new < 4 * EPS * abs(tf):
            t_new = tf
        f_new = f_eval(t_new, y_new)
        if not np.all(np.isfinite(f_new)) or not np.all(np.isfinite(y_new)):
            raise IntegrationError("non-finite state", t_new)

        Q = Z.T @ P
        while i_eval < t_eval.size and t_eval[i_eval] <= t_new:
            te = t_eval[i_eval]
            if te == t_new:
                ye = y_new.copy()
            else:
                x = (te - t) / h
                ye = y + Q @ (x ** np.arange(1, 4))
            if on_eval is not None:
                on_eval(te, ye)
            i_eval += 1

        t_prev, y_prev, h_prev = t, y, h
        h_old, err_old = h, err_norm
        t, y, f = t_new, y_new, f_new
        n_steps += 1
        rejected = False
        h *= factor

        if recompute_jac or (jac is not None and solve_real is None):
            # an analytic Jacobian is cheap here, so it is refreshed whenever
            # the Newton matrices are rebuilt anyway
            J = jac_eval(t, y, f)
            n_jev += 1
            current_jac = True
            solve_real = None
        else:
            current_jac = False

    return RadauResult(t, y, n_steps, n_rejected, n_fev, n_jev, n_lu)


def _predict_factor(h, h_old, err_norm, err_old):
    if err_old is None or h_old is None or err_norm == 0:
        multiplier = 1.0
    else:
        multiplier = h / h_old * (err_old / err_norm) ** 0.25
    with np.errstate(divide="ignore"):
        return min(1.0, multiplier) * err_norm ** -0.25


def _newton(fun, t, y, h, Z0, scale, tol, solve_real, solve_cplx):
    n = y.size
    M_real = MU_REAL / h
    M_cplx = MU_COMPLEX / h
    ch = h * C
    Z = Z0
    W = TI @ Z0
    F = np.empty((3, n))
    dW = np.empty_like(W)
    dW_norm_old = None
    rate = None
    for k in range(NEWTON_MAXITER):
        for i in range(3):
            F[i] = fun(t + ch[i], y + Z[i])
        if not np.all(np.isfinite(F)):
            return False, k + 1, Z, rate
        f_real = TI_REAL @ F - M_real * W[0]
        f_cplx = TI_COMPLEX @ F - M_cplx * (W[1] + 1j * W[2])
        dW[0] = solve_real(f_real)
        dW_c = solve_cplx(f_cplx)
        dW[1] = dW_c.real
        dW[2] = dW_c.imag
        dW_norm = _rms(dW / scale)
        if dW_norm_old is not None:
            rate = dW_norm / dW_norm_old
        if rate is not None and (rate >= 1 or rate ** (NEWTON_MAXITER - k) / (1 - rate) * dW_norm > tol):
            return False, k + 1, Z, rate
        W = W + dW
        Z = T @ W
        if dW_norm == 0 or (rate is not None and rate / (1 - rate) * dW_norm < tol):
            return True, k + 1, Z, rate
        dW_norm_old = dW_norm
    return False, NEWTON_MAXITER, Z, rate
