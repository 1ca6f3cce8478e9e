"""Closed-form error and magnetization estimates for the five error channels.

All quantities are dimensionless. ``alpha`` is the master parameter
|J| / (sqrt(4K^2-1) A^3 |delta_omega|); per-pulse Rabi frequencies in units of
|delta_omega| are ``alpha_k``. Formulas are applied outside their regime of
validity with a :class:`~dipchain.model.ValidityWarning`, not an error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ZETA3, ChainConfig, ValidityWarning
from .protocol import cubic_sum

# nonresonant-error fits: value = coef * alpha**exp
P_NR0 = (0.8236, 1.988)
P_NR1 = (0.8615, 1.987)
M_NR0 = (1.341, 2.044)
M_NR1 = (0.60786, 1.9795)


def _warn(msg: str) -> None:
    warnings.warn(msg, ValidityWarning, stacklevel=3)


def _q(K: int) -> float:
    return 4 * K**2 - 1


def alpha(cfg: ChainConfig) -> float:
    return cfg.alpha


def alpha_k(k: int, a: float) -> float:
    """Rabi frequency of pulse ``k`` over |delta_omega|; ``alpha_0 = alpha``."""
    if k < 0:
        raise ValueError(f"pulse index must be >= 0, got {k}")
    return a if k == 0 else a * cubic_sum(k)


def _power(c: tuple[float, float], a):
    return c[0] * np.asarray(a, dtype=float) ** c[1]


def p_nr_coefficients(a):
    return _power(P_NR0, a), _power(P_NR1, a)


def m_nr_coefficients(a):
    return _power(M_NR0, a), _power(M_NR1, a)


def _check_nr(L, a) -> None:
    if np.any(np.asarray(L) <= 2):
        raise ValueError("the nonresonant-error fit only covers L > 2")
    if np.any(np.asarray(a) > 0.1):
        _warn("alpha > 0.1: nonresonant-error fit used far from alpha << 1")


def p_nr(L, a):
    """Nonresonant error, -P0(alpha) + P1(alpha) L."""
    _check_nr(L, a)
    p0, p1 = p_nr_coefficients(a)
    out = -p0 + p1 * np.asarray(L, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def m_nr(L, a):
    """Magnetization from nonresonant transitions, M0(alpha) - M1(alpha) L."""
    _check_nr(L, a)
    m0, m1 = m_nr_coefficients(a)
    out = m0 - m1 * np.asarray(L, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def mp_relation(a) -> tuple:
    """Coefficients (g0, g1) of the linear map M_nr = g0 + g1 P_nr."""
    p0, p1 = p_nr_coefficients(a)
    m0, m1 = m_nr_coefficients(a)
    return m0 - p0 / p1 * m1, -m1 / p1


def p_int_bound(L: int, chi: float, K: int = 1, j: int | None = None) -> tuple[float, float]:
    """Amplitude error from an uncorrected neighbouring chain, and its K=1 lower bound.

    Returns ``(|C|, 0.51 (L-1) chi^3)`` where ``|C|^2`` is the error probability
    of pulse ``j`` (default the last pulse, ``L - 1``).
    """
    if not 0 <= chi < 1:
        raise ValueError(f"chi must lie in [0, 1), got {chi!r}")
    j = L - 1 if j is None else j
    if not 1 <= j < L:
        raise ValueError(f"pulse index must satisfy 1 <= j < L, got {j}")
    kernel = math.fsum(
        (-0.5 if l < j else 0.5) / (1 + chi**2 * (j - l) ** 2) ** 1.5 for l in range(L) if l != j
    )
    amp = 2 * math.sqrt(_q(K)) * chi**3 * abs(kernel) / cubic_sum(j)
    return amp, 0.51 * (L - 1) * chi**3


def _rabi_loss(x: float, area: float) -> float:
    """(1/(1+x^2)) sin^2(area/2 * sqrt(1+x^2)), x the detuning in Rabi units."""
    r = 1 + x * x
    return math.sin(area / 2 * math.sqrt(r)) ** 2 / r


@dataclass(frozen=True)
class DisplacementErrors:
    P_d: float
    P_d_plus: float
    P_d_minus: float
    P_d2: float
    eta: float

    @property
    def P_d_prime(self) -> float:
        return 0.5 * (self.P_d_plus + self.P_d_minus)


def displacement_errors(v: float, k: int, a: float, K: int = 1) -> DisplacementErrors:
    """Errors caused by spin ``k`` displaced by ``v`` lattice spacings of the chain.

    ``P_d``: loss of the excited branch at pulse k; ``P_d_plus``/``P_d_minus``:
    ground-branch loss for displacement towards +x / -x; ``eta``: excited-state
    probability after a detuned pi/2 pulse on spin 0; ``P_d2 = 1 - 2 eta``.
    """
    ak = alpha_k(k, a)
    x = v / ak
    P_d = 0.5 * (1 - _rabi_loss(x, math.pi))
    s = math.sqrt(_q(K))
    P_plus = 0.5 * _rabi_loss(s - x, math.pi)
    P_minus = 0.5 * _rabi_loss(s + x, math.pi)
    x0 = v / a
    eta = _rabi_loss(x0, math.pi / 2)
    return DisplacementErrors(P_d, P_plus, P_minus, 1 - 2 * eta, eta)


@dataclass(frozen=True)
class Crosstalk:
    delta: float
    beta: float
    P: float
    P_prime: float


def displacement_crosstalk(v: float, j: int, k: int, cfg: ChainConfig) -> Crosstalk:
    """Effect of displaced spin ``k`` on the pulse addressing spin ``j``.

    ``delta`` is the shift (rad/us) of spin j's transition frequency; ``beta``
    the shift in units of the Rabi frequency of pulse j; ``P`` and ``P_prime``
    the excited- and ground-branch error probabilities.
    """
    if j == k:
        raise ValueError("crosstalk needs j != k")
    d = abs(k - j)
    delta = abs(cfg.J) / (2 * cfg.A**3) * abs(1 / abs(k + v - j) ** 3 - 1 / d**3)
    q = _q(cfg.K)
    rabi_sum = cubic_sum(j) if j > 0 else 1.0
    beta = 3 * v * math.sqrt(q) / (2 * d**4) / rabi_sum
    if abs(beta) > 0.3:
        _warn(f"beta = {beta:.3g} is not small")
    P = 9 * q / (8 * d**8 * ZETA3**2) * v**2
    P_prime = math.pi**2 * q / (128 * cfg.K**4) * beta**2
    return Crosstalk(delta, beta, P, P_prime)


def m_displacement_ensemble(xi: float, v: float, L: int, a: float, K: int = 1) -> float:
    """Ensemble-averaged magnetization from randomly displaced spins."""
    if not 0 <= xi <= 1:
        raise ValueError(f"xi must lie in [0, 1], got {xi!r}")
    terms = []
    for k in range(1, L):
        e = displacement_errors(v, k, a, K)
        terms.append(e.P_d - e.P_d_prime)
    terms.append(displacement_errors(v, 0, a, K).P_d2)
    return xi / L * math.fsum(terms)


def m_total_displacement(xi: float, v: float, L: int, a: float, K: int = 1) -> float:
    """Nonresonant plus displacement magnetization of the ensemble."""
    return m_nr(L, a) + m_displacement_ensemble(xi, v, L, a, K)


@dataclass(frozen=True)
class OscillationErrors:
    P_ground: tuple[float, ...]
    P_excited: tuple[float, ...]
    P_hadamard: float

    @property
    def per_pulse(self) -> tuple[float, ...]:
        return tuple(g + e for g, e in zip(self.P_ground, self.P_excited))

    @property
    def total(self) -> float:
        return self.P_hadamard + math.fsum(self.per_pulse)


def oscillation_errors(v_bar: float, L: int, a: float, K: int = 1) -> OscillationErrors:
    """Average errors from a random field offset of dispersion ``v_bar``.

    Index ``k - 1`` of ``P_ground`` / ``P_excited`` refers to CNOT pulse k.
    """
    if v_bar and (v_bar / a) ** 2 > 0.1:
        _warn(f"(v_bar/alpha)^2 = {(v_bar / a) ** 2:.3g} is not small")
    c = math.pi**2 * _q(K) / (128 * K**4)
    ground, excited = [], []
    for k in range(1, L):
        r = (v_bar / alpha_k(k, a)) ** 2
        ground.append(c * r)
        excited.append(0.5 * r)
    return OscillationErrors(tuple(ground), tuple(excited), (1 - math.pi / 4) * (v_bar / a) ** 2)


def p_nr_osc(v_bar: float, L: int, a: float, K: int = 1) -> float:
    return p_nr(L, a) + oscillation_errors(v_bar, L, a, K).total


def m_oscillation(v_bar: float, L: int, a: float, K: int = 1) -> float:
    e = oscillation_errors(v_bar, L, a, K)
    terms = [(1 + (L - 2 * k) / L) * (e.P_excited[k - 1] - e.P_ground[k - 1]) for k in range(1, L)]
    return e.P_hadamard + math.fsum(terms)


def m_nr_osc(v_bar: float, L: int, a: float, K: int = 1) -> float:
    return m_nr(L, a) + m_oscillation(v_bar, L, a, K)


def alpha_opt(v_bar: float, L: int, K: int = 1) -> float:
    """Closed-form alpha minimizing nonresonant plus fluctuation error."""
    if v_bar == 0:
        return 0.0
    c = 0.5 + math.pi**2 * _q(K) / (128 * K**4)
    inner = 1 - math.pi / 4 + c * ((L - 1) / ZETA3**2 + 0.6)
    return (v_bar**2 / (-0.82 + 0.86 * L)) ** 0.25 * inner**0.25


@dataclass(frozen=True)
class ErrorBudget:
    """Every closed-form prediction at one parameter point."""

    L: int
    alpha: float
    K: int
    xi: float
    v: float
    v_bar: float
    P_nr: float
    M_nr: float
    P_d: float
    P_d_prime: float
    P_d2: float
    M_d: float
    P_osc: float
    M_osc: float
    P_total_displacement: float
    P_total_oscillation: float
    M_total_displacement: float
    M_total_oscillation: float
    alpha_opt: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(cls.__dataclass_fields__)


def error_budget(L: int, a: float, K: int = 1, xi: float = 0.0, v: float = 0.0,
                 v_bar: float = 0.0, k: int | None = None) -> ErrorBudget:
    """Collect all estimators; single-displacement terms refer to spin ``k``.

    ``k`` defaults to the centre of the chain.
    """
    k = L // 2 if k is None else k
    d = displacement_errors(v, k, a, K)
    pnr, mnr = p_nr(L, a), m_nr(L, a)
    osc = oscillation_errors(v_bar, L, a, K)
    md = m_displacement_ensemble(xi, v, L, a, K)
    mosc = m_oscillation(v_bar, L, a, K)
    return ErrorBudget(
        L=L, alpha=a, K=K, xi=xi, v=v, v_bar=v_bar,
        P_nr=pnr, M_nr=mnr,
        P_d=d.P_d, P_d_prime=d.P_d_minus, P_d2=d.P_d2, M_d=md,
        P_osc=osc.total, M_osc=mosc,
        P_total_displacement=pnr + d.P_d + d.P_d_minus,
        P_total_oscillation=pnr + osc.total,
        M_total_displacement=mnr + md,
        M_total_oscillation=mnr + mosc,
        alpha_opt=alpha_opt(v_bar, L, K),
    )


class ErrorBudgetModel(RegressorMixin, BaseEstimator):
    """Closed-form error predictor with the estimator API.

    ``X`` has columns ``(L, alpha)``. ``predict`` returns the total error
    probability of the configured channels and ``predict_magnetization`` the
    matching magnetization. ``fit`` only validates input; there is nothing to
    learn.

    Parameters
    ----------
    K : int
    xi, v : float
        Displacement probability and magnitude (ensemble channel).
    v_bar : float
        Dispersion of the per-pulse field fluctuation.
    """

    def __init__(self, K: int = 1, xi: float = 0.0, v: float = 0.0, v_bar: float = 0.0):
        self.K = K
        self.xi = xi
        self.v = v
        self.v_bar = v_bar

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        self.n_features_in_ = X.shape[1]
        return self

    def _rows(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, ensure_min_features=2)
        return [(int(round(L)), float(a)) for L, a in X[:, :2]]

    def predict(self, X):
        out = []
        for L, a in self._rows(X):
            p = p_nr(L, a) + oscillation_errors(self.v_bar, L, a, self.K).total
            if self.xi:
                ks = [displacement_errors(self.v, k, a, self.K) for k in range(L)]
                p += self.xi * (math.fsum(e.P_d + e.P_d_prime for e in ks[1:]) + ks[0].P_d2)
            out.append(p)
        return np.array(out)

    def predict_magnetization(self, X):
        return np.array([
            m_nr(L, a) + m_displacement_ensemble(self.xi, self.v, L, a, self.K)
            + m_oscillation(self.v_bar, L, a, self.K)
            for L, a in self._rows(X)
        ])
