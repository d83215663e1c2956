"""Command-line entry point, run configuration and report files.

Usage: gdl <subcommand> [--config c.json] [--out DIR]

Exit codes: 0 success, 2 invalid input, 3 numeric contract failure.
"""

import argparse
import copy
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend
from .bath import BathConfig, ChannelConfig, channel_superop
from .errors import ConfigError, ContractError, GDLError, NumericError
from .experiments import (ScanReport, bias_scan, composed_channel, fixed_point,
                          make_report, mixing_estimate, step_error_scan)
from .generator import QuadSpec, assemble_generator, kms_defect, spectral_densities
from .kms import lamb_defect, mixing_time_bound, spectral_gap
from .model import COUPLING_SETS, PRESETS, build_system
from .operators import apply_superop, commutator_superop, trace_norm

SUBCOMMANDS = ("verify", "build-generator", "fixed-point", "scan-bias", "scan-sigma",
               "scan-step-error", "mixing", "report")

DEFAULTS = {
    "system": {"preset": "single_qubit_z", "n_qubits": 1, "params": {}, "seed": 0,
               "couplings": "pauli"},
    "beta": 1.0,
    "sigma": 2.0,
    "alpha": 0.08,
    "bath": {"variant": "frequency_sampled"},
    "time": {"law": "mu", "T": 25.0, "n_T_nodes": 32},
    "quadrature": {"n_omega_nodes": None, "omega_rule": "trapezoid",
                   "steps_per_unit_time": 64, "tau_max_sigmas": 12.0, "generator": "exact"},
    "experiment": {"channel_source": "lindblad_composed", "eps": 1e-3,
                   "alphas": [0.02, 0.030314331330207972, 0.0459479341998814, 0.06964404506368994, 0.10556063286183155, 0.16],
                   "sigmas": [2.0, 4.0, 8.0, 16.0]},
}

_NUMBER = (int, float)


def _check_type(value, default, path):
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be an object", path)
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean", path)
    elif isinstance(default, _NUMBER) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, _NUMBER) or not math.isfinite(value):
            raise ConfigError(f"{path} must be a finite number", path)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string", path)
    elif isinstance(default, list):
        if not isinstance(value, list) or not all(
                isinstance(v, _NUMBER) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{path} must be a list of numbers", path)


def _merge(defaults, given, path):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        p = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown key {p}", p)
        d = defaults[key]
        if key == "params" or key == "n_omega_nodes":
            out[key] = value
            continue
        _check_type(value, d, p)
        out[key] = _merge(d, value, p) if isinstance(d, dict) else value
    return out


def _check_values(cfg):
    def need(cond, msg, p):
        if not cond:
            raise ConfigError(msg, p)

    s = cfg["system"]
    need(s["preset"] in PRESETS, f"preset must be one of {PRESETS}", "system.preset")
    need(s["couplings"] in COUPLING_SETS, f"couplings must be one of {COUPLING_SETS}",
         "system.couplings")
    need(isinstance(s["n_qubits"], int) and s["n_qubits"] >= 1, "n_qubits must be a positive integer",
         "system.n_qubits")
    need(isinstance(s["params"], dict), "params must be an object", "system.params")
    need(isinstance(s["seed"], int), "seed must be an integer", "system.seed")
    need(cfg["beta"] > 0, "beta must be positive", "beta")
    need(cfg["sigma"] > 0, "sigma must be positive", "sigma")
    need(cfg["alpha"] >= 0, "alpha must be nonnegative", "alpha")
    need(cfg["bath"]["variant"] in ("frequency_sampled", "gaussian_field"),
         "variant must be frequency_sampled or gaussian_field", "bath.variant")
    need(cfg["time"]["law"] in ("mu", "fixed"), "law must be mu or fixed", "time.law")
    need(cfg["time"]["T"] > 0, "T must be positive", "time.T")
    q = cfg["quadrature"]
    n = q["n_omega_nodes"]
    need(n is None or (isinstance(n, int) and not isinstance(n, bool) and n >= 3),
         "n_omega_nodes must be null or an integer >= 3", "quadrature.n_omega_nodes")
    need(q["omega_rule"] in ("trapezoid", "gauss_hermite"), "omega_rule must be trapezoid or gauss_hermite",
         "quadrature.omega_rule")
    need(isinstance(q["steps_per_unit_time"], int) and q["steps_per_unit_time"] >= 1,
         "steps_per_unit_time must be a positive integer", "quadrature.steps_per_unit_time")
    need(q["generator"] in ("exact", "nodes"), "generator must be exact or nodes", "quadrature.generator")
    e = cfg["experiment"]
    need(e["channel_source"] in ("lindblad_composed", "exact_bath"),
         "channel_source must be lindblad_composed or exact_bath", "experiment.channel_source")
    need(e["eps"] > 0, "eps must be positive", "experiment.eps")
    need(all(a > 0 for a in e["alphas"]), "alphas must be positive", "experiment.alphas")
    need(all(v > 0 for v in e["sigmas"]), "sigmas must be positive", "experiment.sigmas")


def validate_config(given):
    if not isinstance(given, dict):
        raise ConfigError("config must be a JSON object", "")
    cfg = _merge(DEFAULTS, given, "")
    _check_values(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})", "") from exc
    return validate_config(raw)


def write_config(cfg, path):
    Path(path).write_text(dumps(cfg) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- serialization

def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON with every float written to 17 significant digits."""
    return _encode(obj, indent, 0)


def matrix_payload(M):
    M = np.asarray(M)
    return {"real": M.real, "imag": M.imag}


def config_hash(cfg):
    """Hash of the 17-digit serialization, so a reloaded config hashes the same."""
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    scans: dict = field(default_factory=dict)   # name -> ScanReport
    wall_time: float = 0.0


def scan_payload(r: ScanReport):
    return {"axis": r.axis, "grid": r.grid, "values": r.values, "slope": r.slope,
            "residual": r.residual, "extra": r.extra}


def versions():
    import scipy
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "backend": backend.BACKEND}


def write_report(report, out_dir):
    """report.json, one series CSV per scan and manifest.json; returns written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc.strerror}") from exc
    payload = {"command": report.command, "config": report.config,
               "results": report.results,
               "scans": {k: scan_payload(v) for k, v in report.scans.items()}}
    files = {"report.json": dumps(payload) + "\n"}
    names = list(report.scans)
    for name in names:
        fname = "series.csv" if len(names) == 1 else f"series_{name}.csv"
        r = report.scans[name]
        rows = ["axis,value"] + [f"{format(float(x), '.17g')},{format(float(y), '.17g')}"
                                 for x, y in zip(r.grid, r.values)]
        files[fname] = "\n".join(rows) + "\n"
    manifest = {"config_hash": config_hash(report.config), "versions": versions(),
                "threads": backend.worker_count(), "wall_time": report.wall_time,
                "files": sorted(files), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    files["manifest.json"] = dumps(manifest) + "\n"
    written = []
    for fname, text in files.items():
        p = out / fname
        try:
            p.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc.strerror}") from exc
        written.append(p)
    return written


# ---------------------------------------------------------------- commands

def _system(cfg):
    s = cfg["system"]
    params = dict(s["params"])
    params.setdefault("n_qubits", s["n_qubits"])
    params.setdefault("couplings", s["couplings"])
    return build_system(s["preset"], params, s["seed"])


def _bath(cfg):
    return BathConfig(cfg["bath"]["variant"], cfg["beta"], cfg["sigma"])


def _channel_cfg(cfg, alpha=None, law=None):
    q, t = cfg["quadrature"], cfg["time"]
    return ChannelConfig(alpha=cfg["alpha"] if alpha is None else alpha,
                         T_law=law or t["law"], T=t["T"], n_omega_nodes=q["n_omega_nodes"],
                         omega_rule=q["omega_rule"], n_T_nodes=t["n_T_nodes"],
                         steps_per_unit_time=q["steps_per_unit_time"])


def _quad(cfg):
    q = cfg["quadrature"]
    return QuadSpec(q["generator"], q["n_omega_nodes"], q["omega_rule"], q["tau_max_sigmas"])


def _channel(cfg, system, bath, parts, alpha):
    if cfg["experiment"]["channel_source"] == "exact_bath":
        return channel_superop(system, bath, _channel_cfg(cfg, alpha))
    return composed_channel(system, parts.L_full, alpha, cfg["time"]["law"], cfg["time"]["T"])


def cmd_verify(cfg, report):
    system = _system(cfg)
    sd = spectral_densities(cfg["beta"], cfg["sigma"])
    parts = assemble_generator(system, cfg["beta"], cfg["sigma"], _quad(cfg))
    rb = parts.rho_beta
    d = system.dim
    grid = np.linspace(-5.0, 5.0, 101) / cfg["beta"]
    recon = parts.L_full - (-1j * commutator_superop(parts.H_Lamb) + parts.L_KMS)
    gap = spectral_gap(parts.L_KMS, rb)
    res = {
        "kms_defect": kms_defect(parts.transition, rb),
        "L_KMS_stationarity": trace_norm(apply_superop(parts.L_KMS, rb)),
        "reconstruction": float(np.max(np.abs(recon))),
        "trace_preservation": float(np.max(np.abs(np.eye(d).reshape(-1, order="F") @ parts.L_full))),
        "gamma_equals_g": float(np.max(np.abs(sd.gamma(grid) - sd.g(grid)))),
        "gap": gap.gap,
        "kernel_dim": gap.kernel_dim,
        "lamb_defect": lamb_defect(parts.H_Lamb, rb),
    }
    report.results.update(res)
    width = max(len(k) for k in res)
    for k, v in res.items():
        print(f"{k:<{width}}  {v:.6e}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    if res["kms_defect"] > 1e-8 or res["L_KMS_stationarity"] > 1e-10 or res["reconstruction"] > 1e-10:
        raise ContractError("generator failed a detailed-balance check")


def cmd_build_generator(cfg, report):
    system = _system(cfg)
    parts = assemble_generator(system, cfg["beta"], cfg["sigma"], _quad(cfg))
    for name in ("H_coh", "M_D", "G_D", "H_Lamb"):
        report.results[name] = matrix_payload(getattr(parts, name))
    for name in ("L_full", "L_KMS", "transition"):
        report.results[name] = matrix_payload(getattr(parts, name))
    print(f"generator assembled: dim {system.dim}, superoperator {parts.L_full.shape[0]}x{parts.L_full.shape[1]}")


def cmd_fixed_point(cfg, report):
    system, bath = _system(cfg), _bath(cfg)
    parts = assemble_generator(system, cfg["beta"], cfg["sigma"], _quad(cfg))
    S = _channel(cfg, system, bath, parts, cfg["alpha"])
    fp = fixed_point(S)
    bias = trace_norm(fp.state - parts.rho_beta)
    report.results.update({"fixed_point": matrix_payload(fp.state), "residual": fp.residual,
                           "bias": bias, "gap_to_one": fp.gap_to_one})
    print(f"bias {bias:.6e}  residual {fp.residual:.3e}")


def _print_scan(r):
    print(f"{r.axis:>12}  value")
    for x, y in zip(r.grid, r.values):
        print(f"{x:12.6g}  {y:.6e}")
    if r.slope is not None:
        print(f"slope {r.slope:.4f} (residual {r.residual:.2e})")


def cmd_scan_bias(cfg, report):
    system, bath = _system(cfg), _bath(cfg)
    r = bias_scan(system, bath, _channel_cfg(cfg), cfg["experiment"]["alphas"],
                  cfg["experiment"]["channel_source"], _quad(cfg))
    report.scans["bias"] = r
    report.results["slope"] = r.slope
    _print_scan(r)


def cmd_scan_sigma(cfg, report):
    system = _system(cfg)
    sigmas = sorted(cfg["experiment"]["sigmas"])
    vals = []
    for s in sigmas:
        parts = assemble_generator(system, cfg["beta"], s, _quad(cfg))
        vals.append(lamb_defect(parts.H_Lamb, parts.rho_beta))
    r = make_report("sigma", sigmas, vals)
    report.scans["lamb_defect"] = r
    report.results["slope"] = r.slope
    _print_scan(r)


def cmd_scan_step_error(cfg, report):
    system, bath = _system(cfg), _bath(cfg)
    r = step_error_scan(system, bath, _channel_cfg(cfg, law="fixed"), cfg["experiment"]["alphas"],
                        _quad(cfg))
    report.scans["step_error"] = r
    report.results["slope"] = r.slope
    _print_scan(r)


def cmd_mixing(cfg, report):
    system, bath = _system(cfg), _bath(cfg)
    parts = assemble_generator(system, cfg["beta"], cfg["sigma"], _quad(cfg))
    S = _channel(cfg, system, bath, parts, cfg["alpha"])
    fp = fixed_point(S)
    eps = cfg["experiment"]["eps"]
    k = mixing_estimate(S, eps, fp.state)
    gap = spectral_gap(parts.L_KMS, parts.rho_beta).gap
    bound = mixing_time_bound(gap, cfg["alpha"], eps, parts.rho_beta)
    report.results.update({"mixing_time": k, "bound": bound, "gap": gap,
                           "lamb_defect": lamb_defect(parts.H_Lamb, parts.rho_beta)})
    print(f"measured {k}  bound {bound:.1f}  gap {gap:.6f}")


def cmd_report(args):
    out = Path(args.out)
    try:
        data = json.loads((out / "report.json").read_text(encoding="utf-8"))
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read report in {out}: {exc.strerror}", "out") from exc
    if manifest.get("config_hash") != config_hash(data["config"]):
        raise ContractError("manifest hash does not match the config in report.json")
    print(f"command {data['command']}  config {manifest['config_hash'][:12]}")
    for k, v in data["results"].items():
        if not isinstance(v, (dict, list)):
            print(f"  {k}: {v}")
    for name, s in data["scans"].items():
        print(f"  scan {name}: {len(s['grid'])} points, slope {s['slope']}")


COMMANDS = {"verify": cmd_verify, "build-generator": cmd_build_generator,
            "fixed-point": cmd_fixed_point, "scan-bias": cmd_scan_bias,
            "scan-sigma": cmd_scan_sigma, "scan-step-error": cmd_scan_step_error,
            "mixing": cmd_mixing}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "argv")


def _parser():
    p = _Parser(prog="gdl", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON run configuration (defaults used for missing keys)")
    p.add_argument("--out", default="gdl_out", help="report directory")
    return p


def _fail(exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    if getattr(exc, "field", None) is not None:
        payload["field"] = exc.field
    sys.stderr.write(json.dumps(payload) + "\n")
    return exc.exit_code


def run_cli(argv=None):
    try:
        args = _parser().parse_args(argv)
        if args.subcommand == "report":
            cmd_report(args)
            return 0
        cfg = load_config(args.config) if args.config else validate_config({})
        report = RunReport(args.subcommand, cfg)
        t0 = time.perf_counter()
        failure = None
        try:
            COMMANDS[args.subcommand](cfg, report)
        except NumericError as exc:
            failure = exc
        report.wall_time = time.perf_counter() - t0
        write_report(report, args.out)
        if failure is not None:
            raise failure
        return 0
    except GDLError as exc:
        return _fail(exc)
    except OSError as exc:
        payload = {"error": "OSError", "message": str(exc), "exit_code": 3}
        sys.stderr.write(json.dumps(payload) + "\n")
        return 3


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
