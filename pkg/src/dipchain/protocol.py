"""Pulse synthesis for the two-branch entanglement protocol."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterator, Literal, Sequence

from .model import ZETA3, ChainConfig, rad_us_to_mhz

PulseKind = Literal["hadamard", "cnot"]


@dataclass(frozen=True)
class Pulse:
    """One rectangular circularly polarized RF pulse."""

    target: int
    nu: float
    rabi: float
    phase: float
    duration: float
    kind: PulseKind = "cnot"

    @property
    def area(self) -> float:
        return self.rabi * self.duration


@dataclass(frozen=True)
class PulseSequence:
    """Back-to-back pulses; ``starts[n]`` is the start time of ``pulses[n]``."""

    pulses: tuple[Pulse, ...]

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))

    @property
    def starts(self) -> tuple[float, ...]:
        t, out = 0.0, []
        for p in self.pulses:
            out.append(t)
            t += p.duration
        return tuple(out)

    @property
    def total_time(self) -> float:
        return math.fsum(p.duration for p in self.pulses)

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self) -> Iterator[tuple[float, Pulse]]:
        return iter(zip(self.starts, self.pulses))

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_pulse_csv(self, buf)
        return buf.getvalue()


@dataclass(frozen=True)
class ChainGeometry:
    """Planar array of parallel chains.

    ``D`` is the inter-chain spacing in nm (``math.inf`` for isolated chains),
    ``R`` the number of chains and ``r`` the index of the driven chain.
    """

    D: float
    R: int = 3
    r: int = 1

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"chain spacing D must be > 0, got {self.D!r}")

    def chi(self, A: float) -> float:
        return A / self.D


def cubic_sum(j: int) -> float:
    """sum_{m=1}^{j} 1/m^3, i.e. sum_{l=0}^{j-1} 1/(j-l)^3."""
    return math.fsum(1.0 / m**3 for m in range(1, j + 1))


def _sqrt4k(K: int) -> float:
    return math.sqrt(4 * K**2 - 1)


def hadamard_pulse(cfg: ChainConfig) -> Pulse:
    nu = cfg.omega0 + cfg.nn_coupling / 2 * math.fsum(1.0 / l**3 for l in range(1, cfg.L))
    rabi = cfg.hadamard_rabi
    return Pulse(target=0, nu=nu, rabi=rabi, phase=0.0, duration=math.pi / (2 * rabi), kind="hadamard")


def _ladder_sz(l: int, j: int) -> float:
    # excited branch before pulse j: spins below j are flipped
    return -0.5 if l < j else 0.5


def cnot_frequency(j: int, cfg: ChainConfig) -> float:
    s = math.fsum(_ladder_sz(l, j) / abs(l - j) ** 3 for l in range(cfg.L) if l != j)
    return cfg.larmor(j) + cfg.nn_coupling * s


def cnot_detuning(j: int, cfg: ChainConfig) -> float:
    """Detuning of the ground-state transition of spin j under the j-th pulse."""
    return cfg.nn_coupling * cubic_sum(j)


def cnot_pulse(j: int, cfg: ChainConfig) -> Pulse:
    if not 1 <= j < cfg.L:
        raise ValueError(f"CNOT target must satisfy 1 <= j < L={cfg.L}, got {j}")
    rabi = abs(cnot_detuning(j, cfg)) / _sqrt4k(cfg.K)
    return Pulse(target=j, nu=cnot_frequency(j, cfg), rabi=rabi, phase=0.0, duration=math.pi / rabi, kind="cnot")


def _interchain_sums(j: int, L: int, chi: float) -> tuple[float, float]:
    freq = math.fsum(_ladder_sz(l, j) / (1 + chi**2 * (j - l) ** 2) ** 1.5 for l in range(L) if l != j)
    rabi = math.fsum(1.0 / (1 + chi**2 * (j - l) ** 2) ** 1.5 for l in range(j))
    return freq, rabi


def corrected_pulse(j: int, cfg: ChainConfig, geom: ChainGeometry) -> Pulse:
    """CNOT pulse corrected for the two nearest neighbouring chains."""
    base = cnot_pulse(j, cfg)
    if math.isinf(geom.D):
        return base
    chi = geom.chi(cfg.A)
    fsum, rsum = _interchain_sums(j, cfg.L, chi)
    nu = base.nu + 2 * cfg.J / geom.D**3 * fsum
    rabi = base.rabi + 2 * abs(cfg.J) / (geom.D**3 * _sqrt4k(cfg.K)) * rsum
    return Pulse(target=j, nu=nu, rabi=rabi, phase=0.0, duration=math.pi / rabi, kind="cnot")


PhasePolicy = Literal["aligned", "zero"]


def first_cnot_phase(cfg: ChainConfig, hadamard: Pulse, first: Pulse) -> float:
    """Phase of the first CNOT that cancels its linear action on spin 0.

    After the pi/2 pulse spin 0 is in superposition, and the off-resonant part
    of the next pulse tilts it by an angle of order alpha. The resulting
    population change is proportional to sin(D t_1 - phase), D the detuning
    of the spin-0 transition from the pulse frequency and t_1 the pulse start.
    """
    # spin-0 transition frequency E_1 - E_0 equals the Hadamard frequency
    D = (hadamard.nu - first.nu)
    return math.fmod(D * hadamard.duration, 2 * math.pi) % (2 * math.pi)


def entanglement_protocol(
    cfg: ChainConfig,
    geom: ChainGeometry | None = None,
    phases: PhasePolicy = "aligned",
) -> PulseSequence:
    """Hadamard on spin 0 followed by L-1 compensated CNOT pulses.

    ``phases="zero"`` drives every pulse with phase 0. ``"aligned"`` (default)
    sets the phase of the first CNOT with :func:`first_cnot_phase`, which
    removes an error linear in alpha; all other phases stay 0.
    """
    if cfg.L < 2:
        raise ValueError("the entanglement protocol needs L >= 2")
    if phases not in ("aligned", "zero"):
        raise ValueError(f"unknown phase policy {phases!r}")
    if geom is None:
        cnots = [cnot_pulse(j, cfg) for j in range(1, cfg.L)]
    else:
        cnots = [corrected_pulse(j, cfg, geom) for j in range(1, cfg.L)]
    had = hadamard_pulse(cfg)
    if phases == "aligned":
        cnots[0] = replace(cnots[0], phase=first_cnot_phase(cfg, had, cnots[0]))
    return PulseSequence((had, *cnots))


def ladder_state(n_pulses: int) -> int:
    """Basis index of the excited branch after ``n_pulses`` protocol pulses."""
    return (1 << n_pulses) - 1


@dataclass(frozen=True)
class ChainLengthBudget:
    L_max: int
    rhs: float
    approx_L_max: int
    approx_lhs: float


def lmax_lhs(L: int) -> float:
    """Total CNOT duration of an L-qubit chain in units of pi*A^3*sqrt(4K^2-1)/|J|."""
    return math.fsum(1.0 / cubic_sum(j) for j in range(1, L))


def lmax_lhs_approx(L: int) -> float:
    return (L - 1) / ZETA3 + 0.3399


def max_chain_length(T2: float, cfg: ChainConfig) -> ChainLengthBudget:
    """Longest chain whose CNOT pulses fit inside ``T2`` (Hadamard neglected)."""
    if not T2 > 0:
        raise ValueError("T2 must be positive")
    rhs = abs(cfg.J) * T2 / (math.pi * cfg.A**3 * _sqrt4k(cfg.K))
    L, lhs = 1, 0.0
    while True:
        nxt = lhs + 1.0 / cubic_sum(L)
        if nxt > rhs:
            break
        lhs, L = nxt, L + 1
    approx = max(1, math.floor((rhs - 0.3399) * ZETA3) + 1)
    return ChainLengthBudget(L_max=L, rhs=rhs, approx_L_max=approx, approx_lhs=lmax_lhs_approx(L))


PULSE_CSV_COLUMNS = ("index", "kind", "target", "nu_MHz", "rabi_MHz", "phase_rad", "duration_us", "t_start_us")


def _g(x: float) -> str:
    return f"{x:.16e}"


def write_pulse_csv(seq: PulseSequence, fh, header_lines: Sequence[str] = ()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PULSE_CSV_COLUMNS)
    for i, (t, p) in enumerate(seq):
        w.writerow([i, p.kind, p.target, _g(rad_us_to_mhz(p.nu)), _g(rad_us_to_mhz(p.rabi)),
                    _g(p.phase), _g(p.duration), _g(t)])
