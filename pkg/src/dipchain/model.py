"""Spin register model: basis encoding, energies, couplings and observables.

Units
-----
All frequencies are angular, in rad/us. Positions are in nm. Helpers that
accept ordinary frequencies in MHz multiply by 2*pi on ingestion.

Basis convention
----------------
Bit ``l`` of a basis index is the state of spin ``l``. A 0 bit is the spin
state |0> with s_z = +1/2, a 1 bit is |1> with s_z = -1/2. Index 0 is the
ground state and index ``2**L - 1`` the fully excited state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# CGS constants
HBAR_CGS = 1.054571817e-27  # erg s
BOHR_MAGNETON_CGS = 9.274e-21  # erg/G
NM_CM = 1e-7

ZETA3 = 1.2020569031595942


class ValidityWarning(UserWarning):
    """A closed-form approximation is used outside its regime of validity."""


def mhz_to_rad_us(f_mhz: float) -> float:
    return TWO_PI * f_mhz


def rad_us_to_mhz(w: float) -> float:
    return w / TWO_PI


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of an ideal chain of ``L`` dipole-coupled spins.

    Parameters
    ----------
    L : int
        Number of qubits.
    omega0 : float
        Larmor frequency of spin 0 (rad/us).
    delta_omega : float
        Larmor increment between neighbouring spins (rad/us), nonzero.
    J : float
        Dipole coupling constant at 1 nm (rad/us). Negative for spins in a
        plane perpendicular to the field.
    A : float
        Neighbour spacing in nm.
    K : int
        Integer of the 2*pi*K suppression condition.
    omega_H : float or None
        Rabi frequency of the initial pi/2 pulse. ``None`` selects
        ``alpha * |delta_omega|``.
    theta : float
        Angle between the chain and the permanent field (informational;
        the sign and magnitude of ``J`` already carry it).
    """

    L: int
    omega0: float
    delta_omega: float
    J: float
    A: float = 2.2
    K: int = 1
    omega_H: float | None = None
    theta: float = math.pi / 2

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be an integer >= 1, got {self.L!r}")
        if not self.A > 0:
            raise ValueError(f"A must be > 0, got {self.A!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be an integer >= 1, got {self.K!r}")
        if self.delta_omega == 0:
            raise ValueError("delta_omega must be nonzero")
        if self.omega_H is not None and not self.omega_H > 0:
            raise ValueError(f"omega_H must be > 0, got {self.omega_H!r}")
        nn = abs(self.J) / self.A**3
        if nn > 0 and abs(self.delta_omega) / nn < 10:
            warnings.warn(
                f"|delta_omega| / (|J|/A^3) = {abs(self.delta_omega) / nn:.3g} < 10; "
                "single-spin selectivity is poor",
                ValidityWarning,
                stacklevel=3,
            )

    @classmethod
    def from_mhz(
        cls,
        L: int,
        omega0_mhz: float,
        delta_omega_mhz: float,
        J_mhz: float,
        A: float = 2.2,
        K: int = 1,
        omega_H_mhz: float | None = None,
        theta: float = math.pi / 2,
    ) -> "ChainConfig":
        return cls(
            L=L,
            omega0=mhz_to_rad_us(omega0_mhz),
            delta_omega=mhz_to_rad_us(delta_omega_mhz),
            J=mhz_to_rad_us(J_mhz),
            A=A,
            K=K,
            omega_H=None if omega_H_mhz is None else mhz_to_rad_us(omega_H_mhz),
            theta=theta,
        )

    @property
    def nn_coupling(self) -> float:
        """Nearest-neighbour coupling J/A^3 (rad/us)."""
        return self.J / self.A**3

    @property
    def alpha(self) -> float:
        return abs(self.J) / (math.sqrt(4 * self.K**2 - 1) * self.A**3 * abs(self.delta_omega))

    @property
    def hadamard_rabi(self) -> float:
        if self.omega_H is not None:
            return self.omega_H
        return self.alpha * abs(self.delta_omega)

    def larmor(self, l: int) -> float:
        return self.omega0 + l * self.delta_omega

    def with_alpha(self, alpha: float) -> "ChainConfig":
        """Copy with ``delta_omega`` rescaled so that ``self.alpha == alpha``.

        The sign of ``delta_omega`` is kept.
        """
        return replace(self, delta_omega=math.copysign(delta_omega_for_alpha(alpha, self.J, self.A, self.K), self.delta_omega))


def delta_omega_for_alpha(alpha: float, J: float, A: float, K: int) -> float:
    """Magnitude of the Larmor increment giving the requested ``alpha``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha!r}")
    return abs(J) / (math.sqrt(4 * K**2 - 1) * A**3 * alpha)


@dataclass(frozen=True)
class Spin:
    x: float
    y: float
    larmor: float


@dataclass(frozen=True)
class SpinSystem:
    """Planar register of spins with secular dipole couplings ``J / r^3``."""

    spins: tuple[Spin, ...]
    coupling_at_1nm: float
    _couplings: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        spins = tuple(self.spins)
        object.__setattr__(self, "spins", spins)
        n = len(spins)
        if n < 1:
            raise ValueError("a SpinSystem needs at least one spin")
        xy = np.array([[s.x, s.y] for s in spins], dtype=float)
        diff = xy[:, None, :] - xy[None, :, :]
        r = np.sqrt((diff**2).sum(axis=-1))
        off = ~np.eye(n, dtype=bool)
        if np.any(r[off] <= 0):
            raise ValueError("spins must be at distinct positions")
        c = np.zeros((n, n))
        c[off] = self.coupling_at_1nm / r[off] ** 3
        c.setflags(write=False)
        object.__setattr__(self, "_couplings", c)

    @classmethod
    def from_chain(
        cls,
        cfg: ChainConfig,
        displacements: Sequence[float] | dict[int, float] | None = None,
    ) -> "SpinSystem":
        """Build the chain of ``cfg``, optionally with fractional x displacements.

        A displacement ``v`` of spin ``k`` moves it by ``v * A`` nm along the
        gradient, shifting its Larmor frequency by ``v * delta_omega``.
        """
        shift = np.zeros(cfg.L)
        if displacements is not None:
            items = displacements.items() if isinstance(displacements, dict) else enumerate(displacements)
            for k, v in items:
                if not 0 <= k < cfg.L:
                    raise IndexError(f"displaced site {k} outside chain of length {cfg.L}")
                shift[k] = v
        spins = tuple(
            Spin(x=(l + shift[l]) * cfg.A, y=0.0, larmor=cfg.omega0 + (l + shift[l]) * cfg.delta_omega)
            for l in range(cfg.L)
        )
        return cls(spins, cfg.J)

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def larmor(self) -> np.ndarray:
        return np.array([s.larmor for s in self.spins])

    @property
    def couplings(self) -> np.ndarray:
        """Symmetric matrix of pair couplings ``J / r_lk^3`` (zero diagonal)."""
        return self._couplings

    def with_offset(self, offset: float) -> "SpinSystem":
        """Copy with every Larmor frequency shifted by ``offset``."""
        if offset == 0:
            return self
        return SpinSystem(
            tuple(Spin(s.x, s.y, s.larmor + offset) for s in self.spins),
            self.coupling_at_1nm,
        )

    def energies(self) -> np.ndarray:
        """Diagonal energies E_p for every basis index, vectorised."""
        s = sz_table(self.n)
        zeeman = -s @ self.larmor
        ising = -0.5 * np.einsum("pl,lk,pk->p", s, self.couplings, s)
        return zeeman + ising


def _check_index(p: int, n: int) -> None:
    if not 0 <= p < 2**n:
        raise IndexError(f"basis index {p} outside [0, {2**n})")


def sz(p: int, l: int, n: int | None = None) -> float:
    """Eigenvalue of S^z_l in basis state ``p``: +1/2 for bit 0, -1/2 for bit 1."""
    if l < 0 or (n is not None and l >= n):
        raise IndexError(f"site index {l} out of range")
    if p < 0 or (n is not None and p >= 2**n):
        raise IndexError(f"basis index {p} out of range")
    return -0.5 if (p >> l) & 1 else 0.5


def sz_table(n: int) -> np.ndarray:
    """Array ``s[p, l]`` of S^z eigenvalues, shape (2**n, n)."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return 0.5 - bits.astype(float)


def popcount_table(n: int) -> np.ndarray:
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return bits.sum(axis=1)


def state_energy(p: int, sys: SpinSystem) -> float:
    _check_index(p, sys.n)
    s = np.array([sz(p, l) for l in range(sys.n)])
    c = sys.couplings
    e = -float(s @ sys.larmor)
    for l in range(sys.n):
        for k in range(l + 1, sys.n):
            e -= c[l, k] * s[l] * s[k]
    return e


def coupling_constant(mu: float, theta: float = math.pi / 2) -> float:
    """Secular dipole coupling at 1 nm, in rad/s, from a moment in erg/G."""
    return mu**2 * (3 * math.cos(theta) ** 2 - 1) / (HBAR_CGS * NM_CM**3)


def electron_coupling_mhz(theta: float = math.pi / 2, g: float = 2.0) -> float:
    """Ordinary-frequency coupling J/(2 pi) of two electron spins at 1 nm, MHz."""
    return coupling_constant(g * BOHR_MAGNETON_CGS, theta) / TWO_PI / 1e6


def _as_amplitudes(state) -> np.ndarray:
    psi = np.asarray(state, dtype=complex)
    if psi.ndim != 1 or psi.size & (psi.size - 1):
        raise ValueError("state must be a 1-D vector of length 2**N")
    return psi


def magnetization(state) -> float:
    """Dimensionless z magnetization, +1 for |0...0>, -1 for |1...1>."""
    psi = _as_amplitudes(state)
    n = psi.size.bit_length() - 1
    prob = np.abs(psi) ** 2
    return float(2.0 / n * (prob @ sz_table(n).sum(axis=1)))


def error_probability(state) -> float:
    """|1/2 - |C_0|^2| + |1/2 - |C_last|^2| for a final register state."""
    psi = _as_amplitudes(state)
    return abs(0.5 - abs(psi[0]) ** 2) + abs(0.5 - abs(psi[-1]) ** 2)


def ground_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    return psi


def physical_magnetization(M: float, mu: float, R: int, L: int) -> float:
    """Macroscopic z magnetization of R identical chains: M * mu * R * L / 2."""
    return 0.5 * M * mu * R * L
