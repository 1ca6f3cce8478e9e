"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so the full table is printed even when some criteria fail.
"""

import json
import time

import numpy as np
import pytest

from dipchain.cli import main
from dipchain.dynamics import apply_pulse_exact, apply_pulse_two_level, ode_oracle, run_protocol
from dipchain.ensemble import NoiseModel, run_ensemble
from dipchain.estimators import alpha_opt, displacement_crosstalk, m_total_displacement
from dipchain.fitting import fit_scaling
from dipchain.model import ChainConfig, Spin, SpinSystem
from dipchain.protocol import Pulse, cnot_pulse, entanglement_protocol

ALPHAS = (0.01, 0.02, 0.04, 0.06, 0.09)
LENGTHS = range(3, 10)


def _electron(L, alpha, omega0_mhz=1000.0):
    return ChainConfig.from_mhz(L, omega0_mhz, 141.0, -52.0).with_alpha(alpha)


def _run(cfg, displace=None):
    return run_protocol(SpinSystem.from_chain(cfg, displace), entanglement_protocol(cfg))


def _json_out(argv, capsys):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_criterion_01_lmax(capsys, criterion):
    t = time.perf_counter()
    res = _json_out(["lmax"], capsys)["result"]
    dt = time.perf_counter() - t
    ok = abs(res["rhs"] - 113) <= 1 and res["L_max"] == 136 and dt < 1
    criterion(1, ok, f"rhs={res['rhs']:.3f} L_max={res['L_max']} t={dt:.2f}s")
    assert ok


def test_criterion_02_alpha_mapping(tmp_path, capsys, criterion):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": {"var": "alpha", "values": [0.02, 0.09]}}))
    t = time.perf_counter()
    assert main(["estimate", "--config", str(cfg)]) == 0
    dt = time.perf_counter() - t
    lines = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
    cols = lines[0].split(",")
    dw = [float(ln.split(",")[cols.index("delta_omega_MHz")]) for ln in lines[1:]]
    ok = abs(dw[0] / 141 - 1) <= 0.01 and abs(dw[1] / 31.4 - 1) <= 0.01 and dt < 1
    criterion(2, ok, f"delta_omega/2pi = {dw[0]:.2f}, {dw[1]:.2f} MHz t={dt:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def nonresonant_fit():
    """Exact-propagator sweep over L = 3..9 and the alpha grid, fitted two-stage."""
    rows = []
    for a in ALPHAS:
        for L in LENGTHS:
            r = _run(_electron(L, a))
            rows.append((L, a, r.P, r.M))
    return rows, fit_scaling(rows)


@pytest.mark.slow
def test_criterion_03_nonresonant_error_fit(nonresonant_fit, criterion):
    _, fit = nonresonant_fit
    parts, ok = [], True
    for name, f, ref in (("P0", fit.P0, 0.8236), ("P1", fit.P1, 0.8615)):
        c, e = f.coef
        c *= f.sign
        ok &= 1.9 <= e <= 2.1 and abs(c / ref - 1) <= 0.25
        parts.append(f"{name}={c:.4g}*a^{e:.3f} (target {ref}*a^~2)")
    criterion(3, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_04_nonresonant_magnetization_fit(nonresonant_fit, criterion):
    rows, fit = nonresonant_fit
    negative = all(M < 0 for L, _, _, M in rows if L > 3)
    # line coefficients are (-intercept, slope) = (-M0, -M1)
    signs = all(-m.coef[0] > 0 and -m.coef[1] > 0 for _, m in fit.lines.values())
    parts = [f"M<0 for all L>3: {negative}", f"M0,M1>0 at every alpha: {signs}"]
    ok = negative and signs
    for name, f, ref in (("M0", fit.M0, 1.341), ("M1", fit.M1, 0.60786)):
        if f is None or f.sign < 0:
            ok = False
            parts.append(f"{name}: no positive power law")
            continue
        ok &= abs(f.coef[0] / ref - 1) <= 0.30
        parts.append(f"{name}={f.coef[0]:.4g}*a^{f.coef[1]:.3f} (target {ref})")
    criterion(4, ok, "; ".join(parts))
    assert ok


FIG7_INV_ALPHA = (3, 5, 8, 12, 15, 20, 30, 50, 100, 150, 200, 300)


def test_criterion_05_displaced_centre_qubit(criterion):
    curves = {}
    for v in (0.1, 0.05, -0.05):
        curves[v] = [_run(_electron(9, 1 / inv), {4: v}).P for inv in FIG7_INV_ALPHA]
    plateau = [P for inv, P in zip(FIG7_INV_ALPHA, curves[0.1]) if inv >= 100]
    plateau_ok = all(0.40 <= P <= 0.55 for P in plateau)
    interior = {}
    for v in (0.05, -0.05):
        i = int(np.argmin(curves[v]))
        interior[v] = (0 < i < len(FIG7_INV_ALPHA) - 1, FIG7_INV_ALPHA[i])
    ok = plateau_ok and all(flag for flag, _ in interior.values())
    criterion(5, ok, f"v=1/10 P(1/a>=100) in [{min(plateau):.3f}, {max(plateau):.3f}]; "
                     f"v=+-1/20 minimum at 1/a = {interior[0.05][1]}, {interior[-0.05][1]}")
    assert ok


FIG8_INV_ALPHA = (10, 20, 40, 60, 100, 150, 200)


@pytest.mark.slow
def test_criterion_06_ensemble_magnetization(criterion):
    L, xi, v = 7, 1 / 35, 1 / 20
    noise = NoiseModel(xi=xi, v=v, seed=2024)
    rows, ok = [], True
    for inv in FIG8_INV_ALPHA:
        a = 1 / inv
        ens = run_ensemble(_electron(L, a), noise, R=100, realizations=50)
        est = m_total_displacement(xi, v, L, a)
        tol = max(0.30 * abs(est), 2 * ens.M_stderr)
        good = abs(ens.M_mean - est) <= tol
        if inv >= 100:
            good &= ens.M_mean > 0
        ok &= good
        rows.append(f"{inv}:{ens.M_mean:.4f}/{est:.4f}{'' if good else '!'}")
    criterion(6, ok, "1/a: simulated/estimate " + " ".join(rows))
    assert ok


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@pytest.mark.slow
def test_criterion_07_fluctuation_optimum(criterion):
    L, v_bar = 9, 1e-4
    a_opt = alpha_opt(v_bar, L, 1)
    closed_ok = abs(a_opt / 9.08e-3 - 1) <= 0.005
    grid = [a_opt * 2 ** (k / 2) for k in range(-4, 5)]
    P = [run_ensemble(_electron(L, a), NoiseModel(v_bar=v_bar, seed=99), R=1, realizations=30).P_mean
         for a in grid]
    a_min = grid[int(np.argmin(P))]
    min_ok = a_opt / 2 <= a_min <= 2 * a_opt
    left, right = _slope(grid[:3], P[:3]), _slope(grid[-3:], P[-3:])
    slopes_ok = abs(left + 2) <= 0.4 and abs(right - 2) <= 0.4
    ok = closed_ok and min_ok and slopes_ok
    criterion(7, ok, f"alpha_opt={a_opt:.4e}; simulated minimum at {a_min:.4e}; "
                     f"slopes {left:+.2f} / {right:+.2f}")
    assert ok


def test_criterion_08_oracle_equivalence(criterion):
    worst = 0.0
    for L in range(2, 7):
        cfg = ChainConfig.from_mhz(L, 10.0, 141.0, -52.0).with_alpha(0.02)
        sys_, seq = SpinSystem.from_chain(cfg), entanglement_protocol(cfg)
        ref, got = ode_oracle(sys_, seq), run_protocol(sys_, seq)
        worst = max(worst, float(np.max(np.abs(np.abs(ref.amplitudes) ** 2 - np.abs(got.amplitudes) ** 2))))
    rng = np.random.default_rng(8)
    drift = 0.0
    for i in range(10_000):
        n = int(rng.integers(1, 5))
        spins = tuple(Spin(2.0 * l + rng.uniform(-0.3, 0.3), rng.uniform(-0.5, 0.5),
                           100 + 30 * l + rng.normal()) for l in range(n))
        sys_ = SpinSystem(spins, -20.0)
        psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        psi /= np.linalg.norm(psi)
        pulse = Pulse(int(rng.integers(n)), rng.uniform(80, 250), rng.uniform(0.1, 10),
                      rng.uniform(-3, 3), rng.uniform(0.01, 2))
        prop = apply_pulse_exact if i % 2 == 0 else apply_pulse_two_level
        out = prop(psi, pulse, sys_, rng.uniform(0, 5))
        drift = max(drift, abs(np.vdot(out, out).real - 1))
    ok = worst <= 1e-8 and drift <= 1e-10
    criterion(8, ok, f"max |amp|^2 difference {worst:.2e}; max norm drift {drift:.2e}")
    assert ok


def test_criterion_09_two_pi_k_suppression(criterion):
    worst = 0.0
    for K in (1, 2, 3):
        for L in range(2, 13):
            cfg = ChainConfig(L=L, omega0=300.0, delta_omega=40.0, J=-2.0, A=2.2, K=K)
            sys_ = SpinSystem.from_chain(cfg)
            ground = np.zeros(2**L, dtype=complex)
            ground[0] = 1
            for j in range(1, L):
                out = apply_pulse_two_level(ground, cnot_pulse(j, cfg), sys_)
                worst = max(worst, abs(out[1 << j]) ** 2)
    ok = worst <= 1e-14
    criterion(9, ok, f"max ground-branch transfer {worst:.2e}")
    assert ok


def test_criterion_10_crosstalk(criterion):
    cfg = _electron(9, 0.02)
    p1 = displacement_crosstalk(1 / 20, 5, 4, cfg).P
    p2 = displacement_crosstalk(1 / 20, 6, 4, cfg).P
    ok = abs(p1 / 0.006 - 1) <= 0.05 and abs(p2 / 2.3e-5 - 1) <= 0.05
    criterion(10, ok, f"P(k+-1)={p1:.4g}, P(k+-2)={p2:.4g}")
    assert ok


def test_criterion_11_determinism(tmp_path, criterion):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"chain": {"L": 5}, "noise": {"xi": 0.1, "v": 0.05, "v_bar": 1e-3},
                               "ensemble": {"R": 20, "realizations": 5},
                               "sweep": {"var": "inv_alpha", "values": [20, 50]}}))
    blobs = []
    for threads in (1, 4, 8):
        out = tmp_path / f"e{threads}.csv"
        assert main(["ensemble", "--config", str(cfg), "--seed", "17", "--threads", str(threads),
                     "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    criterion(11, ok, f"{len(blobs[0])} bytes, identical across 1/4/8 threads: {ok}")
    assert ok
