"""Linear-in-L and power-law-in-alpha scaling fits.

Both fits are ordinary least squares, the power law on log-log axes, with
standard errors taken from the linear regression.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

FitForm = Literal["linear", "power_law"]


@dataclass(frozen=True)
class FitResult:
    """Two fitted coefficients with standard errors.

    For ``form="linear"`` the coefficients are ``(-intercept, slope)``; for
    ``form="power_law"`` they are ``(multiplier, exponent)``. ``sign`` is the
    common sign of the data for power-law fits (``0`` when mixed).
    """

    form: FitForm
    coef: tuple[float, float]
    stderr: tuple[float, float]
    residual_norm: float
    n_points: int
    sign: int = 1

    def __iter__(self):
        return iter(self.coef)

    def __getitem__(self, i):
        return self.coef[i]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _as_xy(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    if arr.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr[:, 0], arr[:, 1]


def _ols(x: np.ndarray, y: np.ndarray):
    if np.ptp(x) == 0:
        raise ValueError("degenerate design: all abscissae are equal")
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    return res, float(np.linalg.norm(resid))


def fit_linear(points) -> FitResult:
    """Fit y = -c0 + c1 x and return ``(c0, c1)``."""
    x, y = _as_xy(points)
    res, rnorm = _ols(x, y)
    return FitResult("linear", (-float(res.intercept), float(res.slope)),
                     (float(res.intercept_stderr), float(res.stderr)), rnorm, len(x))


def fit_power_law(points) -> FitResult:
    """Fit y = c * x**e on log-log axes and return ``(c, e)``.

    Negative ``y`` of a common sign are fitted by magnitude and the sign kept
    in :attr:`FitResult.sign`; zeros or mixed signs raise ``ValueError``.
    """
    x, y = _as_xy(points)
    if np.any(x <= 0):
        raise ValueError("power-law fit needs positive abscissae")
    signs = np.sign(y)
    if np.any(signs == 0) or np.ptp(signs) != 0:
        raise ValueError("power-law fit needs nonzero ordinates of one sign")
    res, _ = _ols(np.log(x), np.log(np.abs(y)))
    c = math.exp(res.intercept)
    resid = np.abs(y) - c * x**res.slope
    return FitResult("power_law", (c, float(res.slope)),
                     (c * float(res.intercept_stderr), float(res.stderr)),
                     float(np.linalg.norm(resid)), len(x), int(signs[0]))


class LinearScalingRegressor(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`fit_linear`; ``X`` is a single column."""

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.n_features_in_ = X.shape[1]
        self.result_ = fit_linear(np.column_stack([X[:, 0], y]))
        self.intercept_ = -self.result_.coef[0]
        self.coef_ = np.array([self.result_.coef[1]])
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X)
        return self.intercept_ + self.coef_[0] * X[:, 0]


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`fit_power_law`; ``X`` is a single column."""

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.n_features_in_ = X.shape[1]
        self.result_ = fit_power_law(np.column_stack([X[:, 0], y]))
        self.multiplier_, self.exponent_ = self.result_.coef
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X)
        return self.result_.sign * self.multiplier_ * X[:, 0] ** self.exponent_


@dataclass(frozen=True)
class ScalingFit:
    """Per-alpha line fits of P and M against L and power laws of their coefficients.

    ``P0, P1`` are power laws for the coefficients of P = -P0 + P1 L and
    ``M0, M1`` for M = M0 - M1 L. ``lines`` maps alpha to the two line fits.
    """

    P0: FitResult
    P1: FitResult
    M0: FitResult | None
    M1: FitResult | None
    lines: dict

    def to_dict(self) -> dict:
        return {
            "P0": self.P0.to_dict(),
            "P1": self.P1.to_dict(),
            "M0": None if self.M0 is None else self.M0.to_dict(),
            "M1": None if self.M1 is None else self.M1.to_dict(),
            "lines": [
                {"alpha": a, "P": p.to_dict(), "M": None if m is None else m.to_dict()}
                for a, (p, m) in sorted(self.lines.items())
            ],
        }


def _power_or_none(points):
    try:
        return fit_power_law(points)
    except ValueError:
        return None


def fit_scaling(rows: Iterable[Sequence[float]], min_L: int = 3) -> ScalingFit:
    """Fit the two-stage scaling model to ``(L, alpha, P, M)`` rows.

    ``M`` may be ``None`` or NaN to skip the magnetization fits. Rows with
    ``L < min_L`` are dropped with a warning. A coefficient whose sign is
    not common to every alpha yields ``None`` for its power law.
    """
    groups: dict[float, list] = defaultdict(list)
    dropped = 0
    for L, a, P, *rest in rows:
        if L < min_L:
            dropped += 1
            continue
        M = rest[0] if rest else None
        groups[float(a)].append((float(L), float(P), None if M is None else float(M)))
    if dropped:
        warnings.warn(f"dropped {dropped} rows with L < {min_L}", stacklevel=2)
    if len(groups) < 3:
        raise ValueError(f"need at least 3 distinct alpha values, got {len(groups)}")
    lines = {}
    for a, pts in groups.items():
        pts.sort()
        p_fit = fit_linear([(L, P) for L, P, _ in pts])
        has_m = all(M is not None and math.isfinite(M) for _, _, M in pts)
        m_fit = fit_linear([(L, M) for L, _, M in pts]) if has_m else None
        lines[a] = (p_fit, m_fit)
    alphas = sorted(lines)
    P0 = fit_power_law([(a, lines[a][0].coef[0]) for a in alphas])
    P1 = fit_power_law([(a, lines[a][0].coef[1]) for a in alphas])
    M0 = M1 = None
    if all(lines[a][1] is not None for a in alphas):
        # fit_linear gives (-intercept, slope) = (-M0, -M1)
        M0 = _power_or_none([(a, -lines[a][1].coef[0]) for a in alphas])
        M1 = _power_or_none([(a, -lines[a][1].coef[1]) for a in alphas])
    return ScalingFit(P0, P1, M0, M1, lines)
