"""Bounded nonlinear least squares with linearized uncertainties."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize

__all__ = ["ModelSpec", "FitResult", "least_squares", "FitError", "GRADIENT_COSINE_TOL"]


# largest accepted cosine between the residual and a Jacobian column at the optimum
GRADIENT_COSINE_TOL = 1e-5


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or its outcome is unusable."""


@dataclass
class ModelSpec:
    """Description of a least-squares problem.

    Parameters
    ----------
    residual : callable
        ``residual(params, data) -> ndarray`` for the full parameter vector.
    names : sequence of str
    guess : array_like
    bounds : (array_like, array_like), optional
        Lower and upper bounds; infinite by default.
    fixed : array_like of bool, optional
        Parameters held at their guess.
    jac : callable, optional
        ``jac(params, data) -> ndarray (m, n_params)``. Central differences
        are used when omitted.
    model_id : str
    scale : float, optional
        Typical magnitude of the data. A residual below ``1e-9`` of it per
        point counts as an exact fit.
    """

    residual: object
    names: tuple
    guess: np.ndarray
    bounds: tuple = None
    fixed: np.ndarray = None
    jac: object = None
    model_id: str = "model"
    scale: float = None

    def __post_init__(self):
        self.names = tuple(self.names)
        self.guess = np.asarray(self.guess, dtype=float).copy()
        n = self.guess.size
        if len(self.names) != n:
            raise FitError("names and guess differ in length")
        if self.bounds is None:
            lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
        else:
            lo = np.broadcast_to(np.asarray(self.bounds[0], dtype=float), (n,)).copy()
            hi = np.broadcast_to(np.asarray(self.bounds[1], dtype=float), (n,)).copy()
        self.bounds = (lo, hi)
        self.fixed = (np.zeros(n, bool) if self.fixed is None
                      else np.asarray(self.fixed, dtype=bool).reshape(n))
        if np.any(self.guess < lo) or np.any(self.guess > hi):
            bad = [nm for nm, g, a, b in zip(self.names, self.guess, lo, hi) if not a <= g <= b]
            raise FitError(f"initial guess outside bounds for {bad}")
        if self.fixed.all():
            raise FitError("at least one parameter must be free")

    @property
    def n_free(self):
        return int((~self.fixed).sum())


@dataclass
class FitResult:
    """Outcome of a fit.

    Attributes
    ----------
    params : ndarray
    sigma : ndarray
        One-sigma uncertainties (0 for fixed parameters, ``inf`` when the
        parameter is not determined by the data).
    names : tuple of str
    residual_norm : float
        Euclidean norm of the residual vector at the solution.
    n_iterations : int
    converged : bool
    model_id : str
    singular : bool
        Jacobian at the solution was rank deficient.
    message : str
    info : dict
        Model-specific extras.
    covariance : ndarray, optional
        Parameter covariance; rows of fixed parameters are zero.
    """

    params: np.ndarray
    sigma: np.ndarray
    names: tuple
    residual_norm: float
    n_iterations: int
    converged: bool
    model_id: str
    singular: bool = False
    gradient_norm: float = 0.0
    n_points: int = 0
    message: str = ""
    info: dict = field(default_factory=dict)
    covariance: np.ndarray = field(default=None, repr=False)

    def __getitem__(self, name):
        return float(self.params[self.names.index(name)])

    def error(self, name):
        return float(self.sigma[self.names.index(name)])

    def as_dict(self):
        return dict(zip(self.names, map(float, self.params)))

    def to_dict(self):
        def clean(v):
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, np.bool_):
                return bool(v)
            if isinstance(v, np.ndarray):
                return [clean(x) for x in v.tolist()]
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return clean({
            "model_id": self.model_id,
            "params": self.as_dict(),
            "sigma": dict(zip(self.names, map(float, self.sigma))),
            "residual_norm": self.residual_norm,
            "n_iterations": self.n_iterations,
            "n_points": self.n_points,
            "converged": self.converged,
            "singular": self.singular,
            "gradient_norm": self.gradient_norm,
            "message": self.message,
            "info": self.info,
        })


def _covariance(J, s2, rcond=1e-12):
    """Covariance ``s2 * inv(J^T J)`` via SVD, flagging undetermined directions.

    Columns are normalized first so that the rank test does not depend on
    the units of the parameters.
    """
    n = J.shape[1]
    if J.size == 0:
        return np.full((n, n), np.inf), True
    norms = np.linalg.norm(J, axis=0)
    live = norms > 0
    d = np.where(live, norms, 1.0)
    _, sv, Vt = np.linalg.svd(J / d, full_matrices=False)
    keep = sv > rcond * sv[0] if sv[0] > 0 else np.zeros_like(sv, bool)
    singular = not keep.all() or sv.size < n or not live.all()
    inv = np.where(keep, 1.0 / np.where(keep, sv, 1.0) ** 2, 0.0)
    cov = (Vt.T * inv) @ Vt * s2 / np.outer(d, d)
    if singular:
        # parameters with weight in a dropped direction are undetermined
        dropped = Vt[~keep] if sv.size == n else Vt
        bad = np.any(np.abs(dropped) > 1e-8, axis=0) if dropped.size else np.zeros(n, bool)
        bad |= ~live
        cov[bad, :] = np.inf
        cov[:, bad] = np.inf
    return cov, singular


def least_squares(model, data=None, tol=1e-12, max_nfev=None):
    """Minimize ``sum(residual(params, data)**2)`` within bounds.

    A trust-region reflective solver does the descent; uncertainties come
    from the Jacobian at the optimum, scaled by the reduced chi-square.

    Parameters
    ----------
    model : ModelSpec
    data : object
        Passed through to the residual function.
    tol : float
        Termination tolerance on cost, step and gradient.

    Returns
    -------
    FitResult
    """
    free = ~model.fixed
    base = model.guess.copy()
    lo, hi = model.bounds

    def full(p):
        x = base.copy()
        x[free] = p
        return x

    def fun(p):
        return np.asarray(model.residual(full(p), data), dtype=float).reshape(-1)

    r0 = fun(base[free])
    m = r0.size
    if m < model.n_free:
        raise FitError(f"{m} data points cannot constrain {model.n_free} free parameters")
    if not np.all(np.isfinite(r0)):
        raise FitError("residual is not finite at the initial guess")

    if model.jac is not None:
        def jac(p):
            return np.asarray(model.jac(full(p), data), dtype=float)[:, free]
    else:
        jac = "3-point"

    x0 = base[free]
    lo_f, hi_f = lo[free], hi[free]
    # nudge guesses sitting on a bound into the interior for the solver
    x0 = np.where(x0 <= lo_f, np.nextafter(lo_f, np.inf), x0)
    x0 = np.where(x0 >= hi_f, np.nextafter(hi_f, -np.inf), x0)
    res = optimize.least_squares(
        fun, x0, jac=jac, bounds=(lo_f, hi_f), method="trf", x_scale="jac",
        ftol=tol, xtol=tol, gtol=tol,
        max_nfev=max_nfev if max_nfev is not None else 200 * (model.n_free + 1))

    params = full(res.x)
    J = np.atleast_2d(res.jac)
    r = res.fun
    cost = float(r @ r)
    dof = m - model.n_free
    s2 = cost / dof if dof > 0 else np.inf
    # finite-difference columns carry ~sqrt(eps) noise, which hides exact degeneracy
    cov, singular = _covariance(J, s2, rcond=1e-12 if model.jac is not None else 1e-7)
    sigma = np.zeros(params.size)
    with np.errstate(invalid="ignore"):
        sigma[free] = np.sqrt(np.abs(np.diag(cov)))
    sigma[free] = np.where(np.isnan(sigma[free]), np.inf, sigma[free])
    full_cov = np.zeros((params.size, params.size))
    full_cov[np.ix_(free, free)] = cov
    grad = J.T @ r
    # projected gradient: components pushing against an active bound vanish
    active_lo = (res.x <= lo_f) & (grad > 0)
    active_hi = (res.x >= hi_f) & (grad < 0)
    grad = np.where(active_lo | active_hi, 0.0, grad)
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    # cosine between the residual and each Jacobian column; unit independent
    col = np.linalg.norm(J, axis=0) * math.sqrt(cost)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = np.where(col > 0, np.abs(grad) / col, 0.0)
    gcos = float(np.max(cosine)) if cosine.size else 0.0
    # an exact fit leaves only rounding noise, whose gradient is not small
    # relative to |J_i| |r|; accept it through the residual instead
    ref = float(np.linalg.norm(r0))
    if model.scale is not None:
        ref = max(ref, abs(model.scale) * math.sqrt(m))
    exact = math.sqrt(cost) <= 1e-9 * max(ref, 1e-300)
    converged = bool(res.status > 0 and (exact or gcos <= GRADIENT_COSINE_TOL))
    return FitResult(params=params, sigma=sigma, names=model.names,
                     residual_norm=math.sqrt(cost), n_iterations=int(res.nfev),
                     converged=converged, model_id=model.model_id, singular=singular,
                     gradient_norm=gnorm, n_points=m, message=str(res.message),
                     covariance=full_cov)
