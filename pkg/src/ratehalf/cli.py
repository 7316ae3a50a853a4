"""Command-line front end.

    ratehalf simulate  --alpha 0.99885 --trials 1000000 --out sim.json
    ratehalf sweep     --alpha-grid 0.506:0.9995:200 --out sweep.csv
    ratehalf calibrate --snr-db 35 --target-pfa 0.01
    ratehalf kld       --alpha 0.96 --trials 100000 --out kld.csv

Options can also come from a ``key = value`` file passed with ``--config``;
flags override file values.  Exit codes: 0 success, 2 configuration or
output error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis
from .adversary import calibrate_delta, pfa_bound
from .config import DEFAULT_M, DEFAULT_RHO, DEFAULT_SIGMA_AC2, ProtocolConfig
from .signal_core import InvalidParameterError, NoSolutionError, RngStream, snr_db_to_noise_power

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_SEED = 1
KLD_REPETITIONS = 10


class ConfigError(Exception):
    pass


def _grid(text):
    try:
        start, stop, count = text.split(":")
        return float(start), float(stop), int(count)
    except ValueError:
        raise ConfigError(f"alpha_grid: expected start:stop:count, got {text!r}") from None


# key -> (parser, default)
FIELDS = {
    "snr_db": (float, 35.0),
    "alpha": (float, 0.99885),
    "delta": (float, 0.495),
    "m_psk": (int, DEFAULT_M),
    "rho": (float, DEFAULT_RHO),
    "sigma_ac2": (float, DEFAULT_SIGMA_AC2),
    "trials": (int, 100_000),
    "seed": (int, None),
    "workers": (int, 1),
    "target_pfa": (float, 0.01),
    "alpha_grid": (_grid, (0.506, 0.9995, 200)),
    "out": (str, None),
    "detection": (str, "bound"),
    "repetitions": (int, KLD_REPETITIONS),
}


@dataclass
class ExperimentConfig:
    snr_db: float
    alpha: float
    delta: float
    m_psk: int
    rho: float
    sigma_ac2: float
    trials: int
    seed: int
    workers: int
    target_pfa: float
    alpha_grid: tuple
    out: str | None
    detection: str
    repetitions: int

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(alpha=self.alpha, m=self.m_psk,
                              noise_power=snr_db_to_noise_power(self.snr_db),
                              rho=self.rho, sigma_ac2=self.sigma_ac2, delta=self.delta)

    def grid(self) -> np.ndarray:
        start, stop, count = self.alpha_grid
        return np.linspace(start, stop, count)


def read_config_file(path) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = FIELDS[key][0](value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: {key}: {exc}") from None
    return values


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {k: default for k, (_, default) in FIELDS.items()}
    if args.config:
        values.update(read_config_file(args.config))
    for key in FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values["seed"] is None:
        env = os.environ.get("RATEHALF_SEED")
        try:
            values["seed"] = int(env) if env else DEFAULT_SEED
        except ValueError:
            raise ConfigError(f"RATEHALF_SEED: not an integer: {env!r}") from None
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    for name in ("alpha", "delta", "rho"):
        v = getattr(cfg, name)
        if not 0.0 < v < 1.0:
            raise ConfigError(f"{name}: must lie in (0, 1), got {v}")
    if cfg.m_psk < 2:
        raise ConfigError(f"m_psk: must be >= 2, got {cfg.m_psk}")
    if not cfg.sigma_ac2 > 0:
        raise ConfigError(f"sigma_ac2: must be > 0, got {cfg.sigma_ac2}")
    if not math.isfinite(cfg.snr_db):
        raise ConfigError(f"snr_db: must be finite, got {cfg.snr_db}")
    if cfg.trials < 1:
        raise ConfigError(f"trials: must be >= 1, got {cfg.trials}")
    if cfg.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {cfg.workers}")
    if cfg.repetitions < 1:
        raise ConfigError(f"repetitions: must be >= 1, got {cfg.repetitions}")
    if not 0.0 < cfg.target_pfa <= 1.0:
        raise ConfigError(f"target_pfa: must lie in (0, 1], got {cfg.target_pfa}")
    if cfg.detection not in ("bound", "mc"):
        raise ConfigError(f"detection: must be 'bound' or 'mc', got {cfg.detection!r}")
    start, stop, count = cfg.alpha_grid
    if count < 1 or not 0.0 < start <= stop < 1.0 or (count > 1 and start == stop):
        raise ConfigError(f"alpha_grid: need 0 < start < stop < 1 and count >= 1, "
                          f"got {start}:{stop}:{count}")


def fmt(v) -> float | None:
    """Six significant digits; NaN becomes None (JSON null)."""
    if v is None or not math.isfinite(v):
        return None
    return float(f"{v:.6g}")


def csv_num(v) -> str:
    return "nan" if v is None or not math.isfinite(v) else f"{v:.6g}"


def _write(path, text):
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"out: cannot write {path}: {exc.strerror}") from None


def cmd_simulate(cfg: ExperimentConfig) -> int:
    pc = cfg.protocol()
    stream = RngStream(cfg.seed)
    stats = analysis.simulate_frames(pc, cfg.trials, stream, cfg.workers)
    ue, ud = stats.error_rate(), stats.detection_rate()
    bound = analysis.detection_bound(pc) if pc.bound_applicable else None
    audit = stats.energy_audit()
    summary = {
        "config": {**{k: v for k, v in pc.to_dict().items()},
                   "snr_db": cfg.snr_db, "trials": cfg.trials, "seed": cfg.seed},
        "p_ue": fmt(ue.rate),
        "p_ue_alice": fmt(stats.alice_errors / stats.frames),
        "p_ue_charlie": fmt(stats.charlie_errors / stats.frames),
        "p_relay_error": fmt(stats.relay_errors / stats.frames),
        "p_ud_mc": fmt(ud.rate),
        "p_ud_bound": fmt(bound),
        "p_uf_bound": fmt(pfa_bound(pc.delta, pc.noise_power)),
        "energy_audit": {k: fmt(v) for k, v in audit.to_dict().items() if k != "frames"},
        "confidence": {"level": 0.95, "p_ue": fmt(ue.halfwidth), "p_ud_mc": fmt(ud.halfwidth)},
    }
    summary["config"]["noise_power"] = fmt(pc.noise_power)
    out = cfg.out or "simulate.json"
    _write(out, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"alpha={pc.alpha:g} p_ue={summary['p_ue']} p_ud_mc={summary['p_ud_mc']} "
          f"p_ud_bound={summary['p_ud_bound']} p_uf_bound={summary['p_uf_bound']}")
    print(f"wrote {out}")
    return EXIT_OK


SWEEP_HEADER = "alpha,p_ue,p_ue_ci,p_ud_bound,p_ud_mc,p_sum"


def cmd_sweep(cfg: ExperimentConfig) -> int:
    pc = cfg.protocol()
    res = analysis.sweep_alpha(pc, cfg.grid(), cfg.trials, RngStream(cfg.seed),
                               detection=cfg.detection, workers=cfg.workers)
    lines = [SWEEP_HEADER]
    for row in zip(res.alphas, res.p_ue, res.p_ue_ci, res.p_ud_bound, res.p_ud_mc, res.p_sum):
        lines.append(",".join(csv_num(v) for v in row))
    if res.alpha_star is not None:
        lines.append(f"# alpha_star={res.alpha_star:.6g}")
    if res.alpha_min_sum is not None:
        lines.append(f"# alpha_min_sum={res.alpha_min_sum:.6g}")
    out = cfg.out or "sweep.csv"
    _write(out, "\n".join(lines) + "\n")
    print(f"alpha_star={csv_num(res.alpha_star) if res.alpha_star is not None else 'none'} "
          f"alpha_min_sum={csv_num(res.alpha_min_sum)}")
    print(f"wrote {out}")
    if len(res.alphas) > 1 and res.alpha_star is None:
        print("error: P_UE - P_UD has no sign change on the grid", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_calibrate(cfg: ExperimentConfig) -> int:
    n = snr_db_to_noise_power(cfg.snr_db)
    delta = calibrate_delta(n, cfg.target_pfa)
    print(f"delta={delta:.6f}")
    print(f"pfa_bound={pfa_bound(delta, n):.6g}")
    return EXIT_OK


KLD_HEADER = "band,slot,kld,samples,repetitions"


def cmd_kld(cfg: ExperimentConfig) -> int:
    report = analysis.kld_report(cfg.protocol(), cfg.trials, RngStream(cfg.seed),
                                 repetitions=cfg.repetitions, workers=cfg.workers)
    lines = [KLD_HEADER]
    for (band, slot), est in report.items():
        lines.append(f"{band},{slot},{csv_num(est.value)},{est.n_before},{cfg.repetitions}")
    out = cfg.out or "kld.csv"
    _write(out, "\n".join(lines) + "\n")
    for (band, slot), est in report.items():
        print(f"{band} slot{slot}: kld={est.value:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep,
            "calibrate": cmd_calibrate, "kld": cmd_kld}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--snr-db", dest="snr_db", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--m-psk", dest="m_psk", type=int)
    common.add_argument("--rho", type=float)
    common.add_argument("--sigma-ac2", dest="sigma_ac2", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int, help="master seed (fallback: $RATEHALF_SEED)")
    common.add_argument("--workers", type=int)
    common.add_argument("--target-pfa", dest="target_pfa", type=float)
    common.add_argument("--alpha-grid", dest="alpha_grid", type=_grid_arg,
                        metavar="START:STOP:COUNT")
    common.add_argument("--detection", choices=("bound", "mc"))
    common.add_argument("--repetitions", type=int, help="KLD repetitions")
    common.add_argument("--out")

    parser = argparse.ArgumentParser(prog="ratehalf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="error/detection rates at one alpha")
    sub.add_parser("sweep", parents=[common], help="alpha sweep and intersection search")
    sub.add_parser("calibrate", parents=[common], help="detector delta for a false-alarm target")
    sub.add_parser("kld", parents=[common], help="before/after KL divergence per band and slot")
    return parser


def _grid_arg(text):
    try:
        return _grid(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoSolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
