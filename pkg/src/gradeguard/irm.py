"""Indecisiveness threshold calibration.

Sweeping candidate thresholds S_k produces, per threshold, the confident
count N_k, the confident-subset RMSE E_k, the indecisiveness penalty
N'_k = 1 - N_k/N, and the normalized (E'_k) and standardized (Z) forms of
E_k. The RMSE-versus-threshold trace is fit with a three-parameter logistic
L / (1 + exp(-k(x - t0))), the penalty with a degree-4 polynomial, and the
two are combined half-and-half into a confidence-aware loss curve. The
operating threshold is the curve minimum (standardized variant) or the
first inflection point (normalized variant), the latter being where the
penalty for routed answers starts to dominate the error term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllUndefined, FitDiverged, NoInflection, RankDeficient
from .metrics import confident_rmse

DEFAULT_THRESHOLD_GRID = tuple(round(0.005 * i, 3) for i in range(101))  # 0.00 .. 0.50
DEFAULT_EXCLUSION_CUTOFF = 0.02

# Below this steepness the logistic is numerically indistinguishable from a
# constant; the fit is flagged degenerate and evaluated flat at L.
FLAT_K = 1e-3


@dataclass(frozen=True)
class ThresholdPoint:
    """Per-threshold aggregates; normalized fields are None where E is undefined."""
    S_k: float
    N_k: int
    E_k: float | None
    penalty: float               # N'_k = 1 - N_k/N
    E_prime: float | None        # E_k / max(E_k)
    Z_E: float | None            # standardized E_k


def threshold_sweep(items: list[tuple[float, float, float]],
                    grid: list[float] | tuple[float, ...]) -> list[ThresholdPoint]:
    """One ThresholdPoint per grid value (grid must be ascending, nonempty).

    Normalization and standardization run over the points with a defined
    RMSE only; a sweep where no threshold admits any confident item raises
    AllUndefined.
    """
    if not grid:
        raise ValueError("threshold grid is empty")
    if list(grid) != sorted(grid):
        raise ValueError("threshold grid must be ascending")
    if not items:
        raise ValueError("no items to sweep")

    n_total = len(items)
    raw: list[tuple[float, int, float | None]] = []
    for s_k in grid:
        e_k, n_k = confident_rmse(items, s_k)
        raw.append((s_k, n_k, e_k))

    defined = [e for _, _, e in raw if e is not None]
    if not defined:
        raise AllUndefined("no threshold in the grid admits a confident item")

    e_max = max(defined)
    mu = math.fsum(defined) / len(defined)
    if len(defined) >= 2:
        var = math.fsum((e - mu) ** 2 for e in defined) / (len(defined) - 1)
        sigma = math.sqrt(var)
    else:
        sigma = 0.0

    points = []
    for s_k, n_k, e_k in raw:
        if e_k is None:
            e_prime = z_e = None
        else:
            e_prime = e_k / e_max if e_max > 0 else 0.0
            z_e = (e_k - mu) / sigma if sigma > 0 else 0.0
        points.append(ThresholdPoint(
            S_k=s_k, N_k=n_k, E_k=e_k,
            penalty=1.0 - n_k / n_total,
            E_prime=e_prime, Z_E=z_e))
    return points


@dataclass(frozen=True)
class LogisticFit:
    """L / (1 + exp(-k(x - t0))); degenerate fits evaluate flat at L."""
    L: float
    k: float
    t0: float
    residual_rms: float
    degenerate: bool = False

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if abs(self.k) < FLAT_K:
            return np.broadcast_to(np.float64(self.L), x.shape).copy() if x.shape else float(self.L)
        u = np.clip(self.k * (x - self.t0), -700.0, 700.0)
        out = self.L / (1.0 + np.exp(-u))
        return float(out) if out.shape == () else out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if abs(self.k) < FLAT_K:
            return np.zeros(x.shape) if x.shape else 0.0
        u = np.clip(self.k * (x - self.t0), -700.0, 700.0)
        sig = 1.0 / (1.0 + np.exp(-u))
        out = self.L * self.k ** 2 * sig * (1.0 - sig) * (1.0 - 2.0 * sig)
        return float(out) if out.shape == () else out


def _logistic_residuals_jac(theta, xs, ys):
    L, k, t0 = theta
    u = np.clip(k * (xs - t0), -700.0, 700.0)
    sig = 1.0 / (1.0 + np.exp(-u))
    resid = L * sig - ys
    d_l = sig
    d_k = L * sig * (1.0 - sig) * (xs - t0)
    d_t0 = -L * k * sig * (1.0 - sig)
    return resid, np.column_stack([d_l, d_k, d_t0])


def fit_logistic(xs, ys, max_iter: int = 500, step_tol: float = 1e-9,
                 cost_tol: float = 1e-12) -> LogisticFit:
    """Nonlinear least squares via Levenberg-Marquardt with analytic Jacobian.

    Initialization: L from the data maximum, t0 at the half-range crossing,
    k from the abscissa span. Convergence is declared when the parameter
    step drops below step_tol or the relative cost improvement stays below
    cost_tol (mixed-sign targets push the steepness toward a step function
    where only the cost criterion can fire); running out of iterations
    raises FitDiverged with the best parameters seen. Constant data
    short-circuits to a flat degenerate fit instead of diverging.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-d and the same length")
    if len(xs) < 4:
        raise ValueError("logistic fit needs at least 4 points")

    y_span = float(ys.max() - ys.min())
    scale = max(1.0, float(np.abs(ys).max()))
    if y_span <= 1e-12 * scale:
        c = float(ys.mean())
        return LogisticFit(L=c, k=0.0, t0=float(xs.mean()),
                           residual_rms=float(np.sqrt(np.mean((ys - c) ** 2))),
                           degenerate=True)

    x_span = float(xs.max() - xs.min()) or 1.0
    half = (float(ys.min()) + float(ys.max())) / 2.0
    crossing = xs[np.argmin(np.abs(ys - half))]
    theta = np.array([float(ys.max()), 4.0 / x_span, float(crossing)])

    lam = 1e-3
    resid, jac = _logistic_residuals_jac(theta, xs, ys)
    cost = float(resid @ resid)
    best_theta, best_cost = theta.copy(), cost
    stalled = 0

    for _ in range(max_iter):
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)) + 1e-15 * np.eye(3), -jtr)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = theta + step
        trial_resid, trial_jac = _logistic_residuals_jac(trial, xs, ys)
        trial_cost = float(trial_resid @ trial_resid)
        if trial_cost < cost:
            improvement = (cost - trial_cost) / max(cost, 1e-300)
            theta, resid, jac, cost = trial, trial_resid, trial_jac, trial_cost
            lam = max(lam / 10.0, 1e-12)
            if cost < best_cost:
                best_theta, best_cost = theta.copy(), cost
            if float(np.linalg.norm(step)) < step_tol:
                break
            stalled = stalled + 1 if improvement < cost_tol else 0
            if stalled >= 2:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                # Even a fully damped step cannot improve the cost: we are at
                # the best achievable parameters.
                break
    else:
        raise FitDiverged(f"no convergence within {max_iter} iterations",
                          best_params=tuple(best_theta))

    L, k, t0 = (float(v) for v in theta)
    rms = float(np.sqrt(cost / len(xs)))
    return LogisticFit(L=L, k=k, t0=t0, residual_rms=rms,
                       degenerate=abs(k) < FLAT_K)


@dataclass(frozen=True)
class PolyFit:
    """Degree-4 polynomial p0 + p1 x + ... + p4 x^4, least-squares fitted."""
    coeffs: tuple[float, float, float, float, float]
    residual_rms: float

    def value(self, x):
        x = np.asarray(x, dtype=float)
        p0, p1, p2, p3, p4 = self.coeffs
        out = p0 + x * (p1 + x * (p2 + x * (p3 + x * p4)))
        return float(out) if out.shape == () else out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        _, _, p2, p3, p4 = self.coeffs
        out = 2.0 * p2 + 6.0 * p3 * x + 12.0 * p4 * x ** 2
        return float(out) if out.shape == () else out


def fit_poly4(xs, ys) -> PolyFit:
    """Least-squares degree-4 fit on the Vandermonde system, solved by SVD."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-d and the same length")
    if len(np.unique(xs)) < 5:
        raise RankDeficient("degree-4 fit needs at least 5 distinct x values")
    vander = np.vander(xs, N=5, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(vander, ys, rcond=None)
    if rank < 5:
        raise RankDeficient("Vandermonde system is rank deficient")
    resid = vander @ coeffs - ys
    return PolyFit(coeffs=tuple(float(c) for c in coeffs),
                   residual_rms=float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class CalCurve:
    """Half logistic RMSE fit, half polynomial penalty fit, on [domain]."""
    mode: str                    # {"scal", "ncal"}
    rmse_fit: LogisticFit
    penalty_fit: PolyFit
    domain: tuple[float, float]

    def value(self, x):
        return 0.5 * self.rmse_fit.value(x) + 0.5 * self.penalty_fit.value(x)

    def second_derivative(self, x):
        return 0.5 * (self.rmse_fit.second_derivative(x)
                      + self.penalty_fit.second_derivative(x))


def assemble_cal(sweep: list[ThresholdPoint], mode: str,
                 exclusion_cutoff: float = DEFAULT_EXCLUSION_CUTOFF) -> CalCurve:
    """Fit both curves over the sweep and combine them half-and-half.

    The logistic is fit on (S_k, Z) for the standardized variant or
    (S_k, E') for the normalized one, skipping points with undefined RMSE
    and points below the exclusion cutoff (very low thresholds distort the
    logistic shape). The polynomial penalty fit uses every sweep point: the
    penalty is defined even where the RMSE is not.
    """
    if mode not in ("scal", "ncal"):
        raise ValueError(f"unknown CAL mode {mode!r}")
    if not sweep:
        raise ValueError("empty sweep")

    def y_of(p: ThresholdPoint) -> float | None:
        return p.Z_E if mode == "scal" else p.E_prime

    log_xs = [p.S_k for p in sweep if y_of(p) is not None and p.S_k >= exclusion_cutoff]
    log_ys = [y_of(p) for p in sweep if y_of(p) is not None and p.S_k >= exclusion_cutoff]
    rmse_fit = fit_logistic(log_xs, log_ys)

    poly_xs = [p.S_k for p in sweep]
    poly_ys = [p.penalty for p in sweep]
    penalty_fit = fit_poly4(poly_xs, poly_ys)

    return CalCurve(mode=mode, rmse_fit=rmse_fit, penalty_fit=penalty_fit,
                    domain=(sweep[0].S_k, sweep[-1].S_k))


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section_min(f, a: float, b: float, tol: float = 1e-6) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


DENSE_GRID_POINTS = 2001


def find_scal_minimum(curve: CalCurve, tol: float = 1e-6) -> float:
    """Argmin of the curve: dense-grid scan refined by golden-section search.

    Grid ties resolve to the smallest threshold (first minimal grid point).
    """
    if curve.mode != "scal":
        raise ValueError("minimum selection is defined for the standardized curve")
    lo, hi = curve.domain
    xs = np.linspace(lo, hi, DENSE_GRID_POINTS)
    vals = curve.value(xs)
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    return _golden_section_min(lambda x: float(curve.value(x)), float(a), float(b), tol)


def find_ncal_first_inflection(curve: CalCurve, tol: float = 1e-6) -> float:
    """Smallest x where the analytic second derivative changes sign.

    Located by sign scan on the dense grid, then bisection. Raises
    NoInflection when the second derivative keeps one sign over the domain;
    callers fall back to the standardized-curve minimum.
    """
    if curve.mode != "ncal":
        raise ValueError("inflection selection is defined for the normalized curve")
    lo, hi = curve.domain
    xs = np.linspace(lo, hi, DENSE_GRID_POINTS)
    g = np.asarray(curve.second_derivative(xs))

    for j in range(len(xs) - 1):
        gj, gj1 = float(g[j]), float(g[j + 1])
        if gj == 0.0:
            prev = float(g[j - 1]) if j > 0 else 0.0
            if prev * gj1 < 0 or (j == 0 and gj1 != 0.0):
                return float(xs[j])
            continue
        if gj * gj1 < 0:
            a, b, ga = float(xs[j]), float(xs[j + 1]), gj
            while (b - a) > tol:
                m = (a + b) / 2.0
                gm = float(curve.second_derivative(m))
                if gm == 0.0:
                    return m
                if ga * gm < 0:
                    b = m
                else:
                    a, ga = m, gm
            return (a + b) / 2.0
    raise NoInflection("second derivative keeps one sign over the domain")


@dataclass(frozen=True)
class CalibrationResult:
    optimal_is_scal: float
    optimal_is_ncal: float
    sweep: tuple[ThresholdPoint, ...]
    excluded_points: tuple[float, ...]
    scal_curve: CalCurve
    ncal_curve: CalCurve
    ncal_fallback: bool = False   # True when no inflection existed


def calibrate(items: list[tuple[float, float, float]],
              grid: list[float] | tuple[float, ...] = DEFAULT_THRESHOLD_GRID,
              exclusion_cutoff: float = DEFAULT_EXCLUSION_CUTOFF) -> CalibrationResult:
    """Full threshold calibration: sweep, fit both curves, pick both optima."""
    sweep = threshold_sweep(items, grid)
    scal_curve = assemble_cal(sweep, "scal", exclusion_cutoff)
    ncal_curve = assemble_cal(sweep, "ncal", exclusion_cutoff)
    optimal_scal = find_scal_minimum(scal_curve)
    fallback = False
    try:
        optimal_ncal = find_ncal_first_inflection(ncal_curve)
    except NoInflection:
        optimal_ncal = optimal_scal
        fallback = True
    excluded = tuple(p.S_k for p in sweep
                     if p.E_k is not None and p.S_k < exclusion_cutoff)
    return CalibrationResult(
        optimal_is_scal=optimal_scal, optimal_is_ncal=optimal_ncal,
        sweep=tuple(sweep), excluded_points=excluded,
        scal_curve=scal_curve, ncal_curve=ncal_curve, ncal_fallback=fallback)
