"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 resource or
numerical guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    apply_point,
    chain_config,
    header_lines,
    load_config,
    sweep_points,
)
from .dynamics import ResourceLimitError, run_protocol
from .ensemble import NoiseModel, rng_info, run_ensemble, sample_fluctuations, stream
from .estimators import error_budget
from .fitting import fit_scaling
from .model import SpinSystem, rad_us_to_mhz
from .protocol import ChainGeometry, entanglement_protocol, max_chain_length, write_pulse_csv

EXIT_OK, EXIT_USAGE, EXIT_GUARD = 0, 2, 3

SWEEP_COLUMNS = ("L", "alpha", "inv_alpha", "delta_omega_MHz", "P", "M", "phase_rad", "total_time_us")
ENSEMBLE_COLUMNS = ("sweep_var_name", "sweep_value", "M_mean", "M_stderr", "P_mean", "P_stderr", "n_real", "seed")


def _g(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.16e}"


class _Usage(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _displace_arg(text: str) -> tuple[int, float]:
    try:
        k, v = text.split(":", 1)
        return int(k), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k:v, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config, or an earlier output file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    common.add_argument("--method", choices=("exact", "two_level"))
    common.add_argument("--displace", type=_displace_arg, action="append", metavar="k:v",
                        help="displace qubit k by v spacings (repeatable)")
    common.add_argument("--chain-spacing-nm", metavar="X",
                        help="distance to the neighbouring chains; 'inf' disables corrections")

    parser = _Usage(prog="dipchain", description="Entanglement protocol for dipole-coupled spin chains.")
    parser.add_argument("--version", action="version", version=f"dipchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Usage)
    sub.add_parser("pulses", parents=[common], help="write the pulse schedule as CSV")
    sub.add_parser("run", parents=[common], help="simulate one chain, JSON result")
    sub.add_parser("sweep", parents=[common], help="noise-free simulations over a sweep grid")
    sub.add_parser("ensemble", parents=[common], help="Monte Carlo ensembles over a sweep")
    fit = sub.add_parser("fit", parents=[common], help="fit scaling laws to a sweep CSV")
    fit.add_argument("input", nargs="?", help="CSV from sweep or estimate")
    fit.add_argument("--p-col", help="column holding P (default P)")
    fit.add_argument("--m-col", help="column holding M (default M; 'none' to skip)")
    sub.add_parser("estimate", parents=[common], help="closed-form error budget over a sweep")
    sub.add_parser("lmax", parents=[common], help="longest chain that fits in T2")
    return parser


def _overrides(args) -> dict:
    o: dict = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.method is not None:
        o["method"] = args.method
    if args.displace:
        o["displace"] = {str(k): v for k, v in args.displace}
    if args.chain_spacing_nm is not None:
        o["chain_spacing_nm"] = args.chain_spacing_nm
    if getattr(args, "p_col", None) is not None:
        o.setdefault("fit", {})["p_col"] = args.p_col
    if getattr(args, "m_col", None) is not None:
        o.setdefault("fit", {})["m_col"] = None if args.m_col.lower() == "none" else args.m_col
    if getattr(args, "input", None) is not None:
        o.setdefault("fit", {})["input"] = args.input
    return o


def _geometry(cfg: dict) -> ChainGeometry | None:
    d = cfg["chain_spacing_nm"]
    return None if d is None else ChainGeometry(D=d)


def _displacements(cfg: dict, L: int) -> dict[int, float]:
    out = {int(k): float(v) for k, v in cfg["displace"].items()}
    bad = [k for k in out if k >= L]
    if bad:
        raise ConfigError(f"displaced sites {bad} outside chain of length {L}")
    return out


def _check_finite(*xs) -> None:
    if not all(math.isfinite(x) for x in xs):
        raise FloatingPointError("non-finite result")


def _simulate_point(cfg: dict, realization: int = 0):
    chain = chain_config(cfg)
    seq = entanglement_protocol(chain, _geometry(cfg), phases=cfg["phases"])
    sys_ = SpinSystem.from_chain(chain, _displacements(cfg, chain.L))
    offsets = None
    if cfg["noise"]["v_bar"] > 0:
        noise = NoiseModel(v_bar=cfg["noise"]["v_bar"], seed=cfg["seed"])
        offsets = sample_fluctuations(seq, chain, noise, stream(noise.seed, 0, realization))
    res = run_protocol(sys_, seq, method=cfg["method"], noise=offsets)
    _check_finite(res.P, res.M)
    return chain, res


def cmd_pulses(cfg: dict, args) -> str:
    chain = chain_config(cfg)
    seq = entanglement_protocol(chain, _geometry(cfg), phases=cfg["phases"])
    buf = io.StringIO()
    write_pulse_csv(seq, buf, header_lines("pulses", cfg))
    return buf.getvalue()


def cmd_run(cfg: dict, args) -> str:
    chain, res = _simulate_point(cfg)
    result = res.to_dict()
    result.update(alpha=chain.alpha, delta_omega_MHz=rad_us_to_mhz(chain.delta_omega), L=chain.L)
    return _json_doc("run", cfg, result)


def _json_doc(command: str, cfg: dict, result) -> str:
    doc = {"command": command, "version": __version__, "config": cfg, "result": result}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _map(fn, items, threads: int):
    if threads == 1:
        return list(map(fn, items))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_sweep(cfg: dict, args) -> str:
    noise = cfg["noise"]
    if noise["xi"] > 0 or noise["v_bar"] > 0:
        raise ConfigError("sweep runs noise-free chains; use 'ensemble' for xi or v_bar")
    points = list(sweep_points(cfg))

    def one(point):
        chain, res = _simulate_point(apply_point(cfg, point))
        return [chain.L, chain.alpha, 1 / chain.alpha, rad_us_to_mhz(chain.delta_omega),
                res.P, res.M, res.phase, res.total_time]

    rows = _map(one, points, args.threads)
    return _csv(header_lines("sweep", cfg), SWEEP_COLUMNS, rows)


def _csv(header, columns, rows) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _g(c) for c in row])
    return buf.getvalue()


def cmd_ensemble(cfg: dict, args) -> str:
    spec = cfg["sweep"]
    if isinstance(spec, list) and len(spec) > 1:
        raise ConfigError("ensemble sweeps a single variable")
    name = "none" if spec is None else (spec[0] if isinstance(spec, list) else spec)["var"]
    rows = []
    for point in sweep_points(cfg):
        c = apply_point(cfg, point)
        if c["displace"]:
            raise ConfigError("fixed displacements are not used by 'ensemble'; set noise.xi and noise.v")
        chain = chain_config(c)
        noise = NoiseModel(xi=c["noise"]["xi"], v=c["noise"]["v"], v_bar=c["noise"]["v_bar"], seed=c["seed"])
        ens = c["ensemble"]
        res = run_ensemble(chain, noise, R=ens["R"], realizations=ens["realizations"],
                           method=c["method"], threads=args.threads, phases=c["phases"])
        _check_finite(res.M_mean, res.P_mean)
        value = point[0][1] if point else float("nan")
        rows.append([name, value, res.M_mean, res.M_stderr, res.P_mean, res.P_stderr, res.n_real, c["seed"]])
    return _csv(header_lines("ensemble", cfg, {"rng": rng_info()}), ENSEMBLE_COLUMNS, rows)


def cmd_estimate(cfg: dict, args) -> str:
    rows, columns = [], None
    for point in sweep_points(cfg):
        c = apply_point(cfg, point)
        chain = chain_config(c)
        if chain.L <= 2:
            raise ConfigError("closed-form estimates need L > 2")
        n = c["noise"]
        b = error_budget(chain.L, chain.alpha, chain.K, xi=n["xi"], v=n["v"], v_bar=n["v_bar"],
                         k=c["estimate"]["k"])
        d = b.to_dict()
        d["inv_alpha"] = 1 / chain.alpha
        d["delta_omega_MHz"] = rad_us_to_mhz(abs(chain.delta_omega))
        if columns is None:
            columns = tuple(d)
        rows.append([d[k] for k in columns])
    return _csv(header_lines("estimate", cfg), columns, rows)


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise ConfigError(f"{path}: no CSV header") from None
    return columns, list(reader)


def cmd_fit(cfg: dict, args) -> str:
    f = cfg["fit"]
    if not f["input"]:
        raise ConfigError("fit needs an input CSV")
    columns, table = _read_table(f["input"])
    wanted = ["L", "alpha", f["p_col"]] + ([f["m_col"]] if f["m_col"] else [])
    missing = [c for c in wanted if c not in columns]
    if missing:
        raise ConfigError(f"{f['input']}: missing columns {missing}")
    idx = [columns.index(c) for c in wanted]
    rows = [[float(r[i]) for i in idx] for r in table]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        fit = fit_scaling(rows)
    return _json_doc("fit", cfg, fit.to_dict())


def cmd_lmax(cfg: dict, args) -> str:
    chain = chain_config(cfg)
    b = max_chain_length(cfg["T2_us"], chain)
    return _json_doc("lmax", cfg, {"rhs": b.rhs, "L_max": b.L_max, "approx_L_max": b.approx_L_max,
                                   "approx_lhs": b.approx_lhs})


COMMANDS = {
    "pulses": cmd_pulses,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "ensemble": cmd_ensemble,
    "fit": cmd_fit,
    "estimate": cmd_estimate,
    "lmax": cmd_lmax,
}


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc.strerror}") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, _overrides(args))
        text = COMMANDS[args.command](cfg, args)
        _emit(text, args.out)
    except (ResourceLimitError, FloatingPointError, np.linalg.LinAlgError, MemoryError) as exc:
        print(f"dipchain: resource/numeric guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConfigError, ValueError, IndexError) as exc:
        print(f"dipchain: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
