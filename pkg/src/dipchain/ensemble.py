"""Seeded Monte Carlo ensembles of independent chains.

Randomness comes from numpy's PCG64 bit generator. Every draw is taken from
a stream whose seed sequence is built from ``(seed, kind, realization, chain)``
so results do not depend on execution order or on the number of threads:

* ``(1, r, i)`` displacements of chain ``i`` in realization ``r``;
* ``(0, r)``   field fluctuations of realization ``r``, shared by all chains
  because they come from a common field source.

Chains with the same displacement pattern and the same fluctuations give the
same result, so each distinct pattern is simulated once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import Method, RunResult, run_protocol
from .model import ChainConfig, SpinSystem
from .protocol import PhasePolicy, PulseSequence, entanglement_protocol

RNG_NAME = "PCG64"

_FLUCT, _DISPLACE = 0, 1


def rng_info() -> dict:
    return {"bit_generator": RNG_NAME, "numpy": np.__version__}


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the sub-stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class NoiseModel:
    """Displacement and field-fluctuation statistics.

    Parameters
    ----------
    xi : float
        Probability that a qubit is displaced.
    v : float
        Displacement magnitude in units of the qubit spacing; the direction
        is + or - with equal probability.
    v_bar : float
        Standard deviation of the per-pulse field offset in units of
        |delta_omega|.
    seed : int
    """

    xi: float = 0.0
    v: float = 0.0
    v_bar: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.xi <= 1:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi!r}")
        if self.v < 0:
            raise ValueError(f"v must be >= 0, got {self.v!r}")
        if self.v_bar < 0:
            raise ValueError(f"v_bar must be >= 0, got {self.v_bar!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def displaces(self) -> bool:
        return self.xi > 0 and self.v > 0


def sample_displacements(L: int, noise: NoiseModel, rng: np.random.Generator) -> tuple[tuple[int, float], ...]:
    """Sorted ``(site, signed displacement)`` pairs for one chain."""
    hit = rng.random(L) < noise.xi
    sign = rng.integers(0, 2, size=L) * 2 - 1
    return tuple((int(k), float(sign[k] * noise.v)) for k in np.flatnonzero(hit))


def sample_chain(cfg: ChainConfig, noise: NoiseModel, rng: np.random.Generator) -> SpinSystem:
    return SpinSystem.from_chain(cfg, dict(sample_displacements(cfg.L, noise, rng)))


def sample_fluctuations(seq: PulseSequence, cfg: ChainConfig, noise: NoiseModel,
                        rng: np.random.Generator) -> np.ndarray:
    """One Gaussian Larmor offset (rad/us) per pulse, dispersion ``v_bar * |delta_omega|``."""
    if noise.v_bar == 0:
        return np.zeros(len(seq))
    return rng.normal(0.0, noise.v_bar, size=len(seq)) * abs(cfg.delta_omega)


@dataclass(frozen=True)
class EnsembleResult:
    """Averages over chains, then over realizations.

    Standard errors are taken over realization means (zero for a single
    realization).
    """

    M_mean: float
    M_stderr: float
    P_mean: float
    P_stderr: float
    n_real: int
    R: int
    realization_means: tuple[tuple[float, float], ...] = field(repr=False)
    chains: tuple[tuple[RunResult, ...], ...] | None = field(default=None, repr=False)


def _mean_stderr(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, math.sqrt(var / n)


def run_ensemble(
    cfg: ChainConfig,
    noise: NoiseModel,
    R: int = 1,
    realizations: int = 1,
    method: Method = "exact",
    threads: int = 1,
    phases: PhasePolicy = "aligned",
    keep_chains: bool = False,
) -> EnsembleResult:
    """Simulate ``realizations`` ensembles of ``R`` independent chains."""
    if R < 1 or realizations < 1:
        raise ValueError("R and realizations must be >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    seq = entanglement_protocol(cfg, phases=phases)

    plan = []
    for r in range(realizations):
        if noise.v_bar > 0:
            offsets = tuple(sample_fluctuations(seq, cfg, noise, stream(noise.seed, _FLUCT, r)))
        else:
            offsets = None
        row = []
        for i in range(R):
            if noise.displaces:
                pattern = sample_displacements(cfg.L, noise, stream(noise.seed, _DISPLACE, r, i))
            else:
                pattern = ()
            row.append((pattern, offsets))
        plan.append(row)

    jobs = sorted({key for row in plan for key in row}, key=repr)

    def simulate(key):
        pattern, offsets = key
        sys = SpinSystem.from_chain(cfg, dict(pattern))
        return run_protocol(sys, seq, method=method, noise=offsets)

    if threads == 1:
        results = dict(zip(jobs, map(simulate, jobs)))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(jobs, pool.map(simulate, jobs)))

    means = []
    for row in plan:
        m = math.fsum(results[k].M for k in row) / R
        p = math.fsum(results[k].P for k in row) / R
        means.append((m, p))
    M_mean, M_err = _mean_stderr([m for m, _ in means])
    P_mean, P_err = _mean_stderr([p for _, p in means])
    chains = tuple(tuple(results[k] for k in row) for row in plan) if keep_chains else None
    return EnsembleResult(M_mean, M_err, P_mean, P_err, realizations, R, tuple(means), chains)
