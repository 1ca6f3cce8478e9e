"""Propagation of the register through rectangular pulses.

Three propagators share one convention for the drive,

    V(t) = -(Omega/2) * sum_l [S_l^- exp(-i(nu t + phi)) + h.c.],

where S_l^- takes spin ``l`` from |0> to |1>:

* ``apply_pulse_exact`` diagonalises the full Hamiltonian in the frame
  B_p = A_p exp(i nu M_p t), M_p the number of 1 bits of ``p``, in which a
  rectangular pulse is time independent.
* ``apply_pulse_two_level`` keeps only the transitions of the target spin and
  applies the closed-form Rabi map to every pair (p, p | 1 << j).
* ``ode_oracle`` integrates the time-dependent equation with fixed-step RK4 in
  the interaction picture of the diagonal Hamiltonian. It is slow and exists
  to check the other two.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .model import (
    SpinSystem,
    error_probability,
    ground_state,
    magnetization,
    popcount_table,
)
from .protocol import Pulse, PulseSequence

Method = Literal["exact", "two_level"]

MAX_EXACT_SPINS = 14
MAX_ORACLE_SPINS = 8
NORM_TOL = 1e-10


class ResourceLimitError(RuntimeError):
    """The requested register is too large for the chosen propagator."""


def _check_state(state: np.ndarray, n: int) -> np.ndarray:
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (2**n,):
        raise ValueError(f"state has shape {psi.shape}, expected ({2**n},)")
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
    return psi


@lru_cache(maxsize=8)
def _popcount(n: int) -> np.ndarray:
    pc = popcount_table(n).astype(float)
    pc.setflags(write=False)
    return pc


@lru_cache(maxsize=8)
def _flip_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (p, q), q = p | 1 << l, for every bit l, stacked per bit."""
    idx = np.arange(2**n)
    ps, qs = [], []
    for l in range(n):
        p = idx[(idx >> l) & 1 == 0]
        ps.append(p)
        qs.append(p | (1 << l))
    P, Q = np.array(ps), np.array(qs)
    P.setflags(write=False)
    Q.setflags(write=False)
    return P, Q


@lru_cache(maxsize=32)
def _energies(sys: SpinSystem) -> np.ndarray:
    e = sys.energies()
    e.setflags(write=False)
    return e


def rotating_frame_matrix(sys: SpinSystem, pulse: Pulse) -> np.ndarray:
    """Time-independent Hamiltonian of one pulse in the bit-count frame."""
    n = sys.n
    h = np.diag(_energies(sys) - pulse.nu * _popcount(n)).astype(complex)
    P, Q = _flip_pairs(n)
    coupling = -0.5 * pulse.rabi * cmath.exp(-1j * pulse.phase)
    h[Q.ravel(), P.ravel()] = coupling
    h[P.ravel(), Q.ravel()] = coupling.conjugate()
    return h


@lru_cache(maxsize=16)
def _rotating_propagator(sys: SpinSystem, pulse: Pulse) -> np.ndarray:
    h = rotating_frame_matrix(sys, pulse)
    if pulse.phase == 0.0:
        w, v = scipy.linalg.eigh(h.real)
    else:
        w, v = scipy.linalg.eigh(h)
    u = (v * np.exp(-1j * w * pulse.duration)) @ v.conj().T
    u.setflags(write=False)
    return u


def apply_pulse_exact(state, pulse: Pulse, sys: SpinSystem, t_start: float = 0.0) -> np.ndarray:
    """Exact evolution of Schrodinger amplitudes over one pulse starting at ``t_start``."""
    if sys.n > MAX_EXACT_SPINS:
        raise ResourceLimitError(f"exact propagation refuses N={sys.n} > {MAX_EXACT_SPINS} spins")
    psi = _check_state(state, sys.n)
    m = _popcount(sys.n)
    b = psi * np.exp(1j * pulse.nu * m * t_start)
    b = _rotating_propagator(sys, pulse) @ b
    return b * np.exp(-1j * pulse.nu * m * (t_start + pulse.duration))


def two_level_map(delta: np.ndarray | float, rabi: float, phase: float, tau: float):
    """Rabi map of the pair (p, q) in the rotating frame, up to the common phase.

    Returns the matrix elements (u_pp, u_pq, u_qp, u_qq) of
    exp(-i tau [[-delta/2, c*], [c, delta/2]]) with c = -(rabi/2) e^{-i phase}.
    """
    delta = np.asarray(delta, dtype=float)
    lam = np.sqrt(delta**2 + rabi**2)
    x = lam * tau / 2
    cos = np.cos(x)
    # (2/lam) sin(lam tau/2), finite at lam = 0
    s = tau * np.sinc(x / np.pi)
    c = -0.5 * rabi * np.exp(-1j * phase)
    u_pp = cos + 0.5j * delta * s
    u_qq = cos - 0.5j * delta * s
    u_qp = -1j * c * s
    u_pq = -1j * np.conj(c) * s
    return u_pp, u_pq, u_qp, u_qq


def apply_pulse_two_level(state, pulse: Pulse, sys: SpinSystem, t_start: float = 0.0) -> np.ndarray:
    """Evolution keeping only flips of the pulse's target spin."""
    psi = _check_state(state, sys.n)
    n = sys.n
    j = pulse.target
    if not 0 <= j < n:
        raise IndexError(f"pulse target {j} outside register of {n} spins")
    e = _energies(sys)
    m = _popcount(n)
    P, Q = _flip_pairs(n)
    p, q = P[j], Q[j]
    diag = e - pulse.nu * m
    b = psi * np.exp(1j * pulse.nu * m * t_start)
    u_pp, u_pq, u_qp, u_qq = two_level_map(diag[q] - diag[p], pulse.rabi, pulse.phase, pulse.duration)
    common = np.exp(-0.5j * (diag[p] + diag[q]) * pulse.duration)
    out = np.empty_like(b)
    out[p] = common * (u_pp * b[p] + u_pq * b[q])
    out[q] = common * (u_qp * b[p] + u_qq * b[q])
    return out * np.exp(-1j * pulse.nu * m * (t_start + pulse.duration))


_PROPAGATORS = {"exact": apply_pulse_exact, "two_level": apply_pulse_two_level}


@dataclass(frozen=True)
class RunResult:
    """Final register state of a protocol run and its diagnostics."""

    amplitudes: np.ndarray = field(repr=False)
    P: float
    M: float
    phase: float
    total_time: float
    snapshots: tuple[tuple[tuple[int, float], ...], ...] | None = None

    @classmethod
    def from_state(cls, psi: np.ndarray, total_time: float, snapshots=None) -> "RunResult":
        c0, c1 = psi[0], psi[-1]
        phase = cmath.phase(c1 / c0) if abs(c0) > 0 and abs(c1) > 0 else 0.0
        return cls(psi, error_probability(psi), magnetization(psi), phase, total_time, snapshots)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def leading_states(self, count: int = 4) -> list[tuple[int, float]]:
        prob = np.abs(self.amplitudes) ** 2
        order = np.argsort(-prob, kind="stable")[:count]
        return [(int(i), float(prob[i])) for i in order]

    def to_dict(self, leading: int = 4) -> dict:
        return {
            "P": self.P,
            "M": self.M,
            "phase_rad": self.phase,
            "total_time_us": self.total_time,
            "leading_states": [list(x) for x in self.leading_states(leading)],
        }

    def to_json(self, leading: int = 4, **kwargs) -> str:
        return json.dumps(self.to_dict(leading), **kwargs)


def _leading(psi: np.ndarray, count: int = 4) -> tuple[tuple[int, float], ...]:
    prob = np.abs(psi) ** 2
    order = np.argsort(-prob, kind="stable")[:count]
    return tuple((int(i), float(prob[i])) for i in order)


def run_protocol(
    sys: SpinSystem,
    seq: PulseSequence,
    method: Method = "exact",
    noise: Sequence[float] | None = None,
    initial=None,
    snapshots: bool = False,
) -> RunResult:
    """Apply ``seq`` to ``sys`` starting from |0...0> (or ``initial``).

    ``noise`` holds one Larmor offset (rad/us) per pulse, added to every spin
    for the duration of that pulse.
    """
    try:
        step = _PROPAGATORS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(_PROPAGATORS)}") from None
    if method == "exact" and sys.n > MAX_EXACT_SPINS:
        raise ResourceLimitError(f"exact propagation refuses N={sys.n} > {MAX_EXACT_SPINS} spins")
    if noise is not None and len(noise) != len(seq):
        raise ValueError(f"got {len(noise)} noise offsets for {len(seq)} pulses")
    psi = ground_state(sys.n) if initial is None else _check_state(initial, sys.n)
    snaps = [] if snapshots else None
    for n, (t, pulse) in enumerate(seq):
        target = sys if noise is None else sys.with_offset(float(noise[n]))
        psi = step(psi, pulse, target, t)
        if snaps is not None:
            snaps.append(_leading(psi))
    return RunResult.from_state(psi, seq.total_time, None if snaps is None else tuple(snaps))


def _oracle_step_count(sys: SpinSystem, pulse: Pulse, steps_per_period: int) -> int:
    e = _energies(sys)
    P, Q = _flip_pairs(sys.n)
    fastest = max(abs(pulse.nu), float(np.max(np.abs(e[Q] - e[P] - pulse.nu))))
    h_max = 2 * math.pi / fastest / steps_per_period
    return max(1, math.ceil(pulse.duration / h_max))


def ode_oracle(
    sys: SpinSystem,
    seq: PulseSequence,
    steps_per_period: int = 200,
    initial=None,
) -> RunResult:
    """Fixed-step RK4 integration of the driven Schrodinger equation.

    The state is carried as C_p = A_p exp(i E_p t) so the stiff diagonal part
    is handled analytically; the drive keeps its explicit time dependence.
    The step is at most 1/``steps_per_period`` of the shortest period among
    the drive frequency and every single-flip detuning.
    """
    n = sys.n
    if n > MAX_ORACLE_SPINS:
        raise ResourceLimitError(f"ode_oracle refuses N={n} > {MAX_ORACLE_SPINS} spins")
    e = _energies(sys)
    P, Q = _flip_pairs(n)
    lower = scipy.sparse.csr_matrix(
        (np.ones(P.size), (Q.ravel(), P.ravel())), shape=(2**n, 2**n)
    )
    raise_ = lower.T.tocsr()
    psi = ground_state(n) if initial is None else _check_state(initial, n)

    for t0, pulse in seq:
        half = 0.5 * pulse.rabi

        def rhs(t, c):
            rot = np.exp(-1j * e * t)
            a = rot * c
            drive = np.exp(-1j * (pulse.nu * t + pulse.phase))
            va = -half * (drive * (lower @ a) + np.conj(drive) * (raise_ @ a))
            return -1j * np.conj(rot) * va

        steps = _oracle_step_count(sys, pulse, steps_per_period)
        h = pulse.duration / steps
        c = psi * np.exp(1j * e * t0)
        for k in range(steps):
            t = t0 + k * h
            k1 = rhs(t, c)
            k2 = rhs(t + h / 2, c + h / 2 * k1)
            k3 = rhs(t + h / 2, c + h / 2 * k2)
            k4 = rhs(t + h, c + h * k3)
            c = c + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        psi = c * np.exp(-1j * e * (t0 + pulse.duration))
    return RunResult.from_state(psi, seq.total_time)
