"""Command-line front end: verify, spectrum, evolve, rates, resolvent.

Exit status: 0 success, 1 a check failed, 2 invalid configuration,
3 numerical failure.  Every failure also leaves a diagnostic JSON record in
the output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("verify", "spectrum", "evolve", "rates", "resolvent")
PERTURBATIONS = ("none", "random", "family")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    d: int = 5
    p: float = 3.0
    epsilon: float = 0.05
    N: int = 64
    dt_factor: float = 0.5
    tau_end: float = 10.0
    T0: float = 1.0
    delta: float = 0.1
    seed: int = 0
    out: str = "out"
    mode: str = "full"
    perturb: str = "random"
    T_offset: float = 0.0
    amplitude: float = 1e-4
    tau_probe: float = 8.0
    count: int = 100
    allow_subconformal: bool = False

    def validate(self) -> "ExperimentConfig":
        from .model import make_params

        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.mode not in ("full", "lower_regularity"):
            raise ConfigError(f"mode must be full or lower_regularity, got {self.mode!r}")
        if self.perturb not in PERTURBATIONS:
            raise ConfigError(f"perturb must be one of {PERTURBATIONS}, got {self.perturb!r}")
        if self.N < 8:
            raise ConfigError("N must be at least 8")
        checks = {
            "dt_factor": 0 < self.dt_factor <= 1.5,
            "tau_end": self.tau_end > 0,
            "tau_probe": self.tau_probe > 0,
            "T0": self.T0 > 0,
            "delta": 0 < self.delta < self.T0,
            "amplitude": self.amplitude >= 0,
            "count": self.count > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ConfigError(f"invalid value for {', '.join(bad)}")
        if not self.T0 + self.T_offset > 0:
            raise ConfigError("T0 + T_offset must be positive")
        try:
            make_params(self.d, self.p, self.epsilon, self.allow_subconformal)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode == "lower_regularity" and self.p != 3.0:
            raise ConfigError("lower_regularity mode requires p = 3")
        return self

    def params(self):
        from .model import make_params

        return make_params(self.d, self.p, self.epsilon, self.allow_subconformal)

    def run_hash(self) -> str:
        doc = {k: v for k, v in asdict(self).items() if k != "out"}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:10]


_TYPES = {
    "d": int,
    "p": float,
    "epsilon": float,
    "N": int,
    "dt_factor": float,
    "tau_end": float,
    "T0": float,
    "delta": float,
    "seed": int,
    "out": str,
    "mode": str,
    "perturb": str,
    "T_offset": float,
    "amplitude": float,
    "tau_probe": float,
    "count": int,
    "allow_subconformal": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
}


def _normalize_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    for name in _TYPES:
        if name.lower() == key.lower():
            return name
    return key


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _normalize_key(key)
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    return values


def _convert(key, val):
    try:
        return _TYPES[key](val)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {val!r} for {key}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odeblowup", description="Stability experiments for the ODE blowup of radial focusing waves.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key=value file; flags given on the command line win")
    parser.add_argument("--d", type=int)
    parser.add_argument("--p", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--N", type=int)
    parser.add_argument("--dt-factor", dest="dt_factor", type=float)
    parser.add_argument("--tau-end", dest="tau_end", type=float)
    parser.add_argument("--tau-probe", dest="tau_probe", type=float)
    parser.add_argument("--T0", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--mode", choices=("full", "lower_regularity"))
    parser.add_argument("--perturb", choices=PERTURBATIONS)
    parser.add_argument("--T-offset", dest="T_offset", type=float)
    parser.add_argument("--amplitude", type=float)
    parser.add_argument("--count", type=int)
    parser.add_argument("--allow-subconformal", dest="allow_subconformal", action="store_const", const=True)
    return parser


def parse_config(argv) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for key in _TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return ExperimentConfig(command=args.command, **values).validate()


# ---------------------------------------------------------------------------
# commands


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x)}")


def cmd_verify(cfg: ExperimentConfig, out: Path, tag: str) -> int:
    from . import suites

    params = cfg.params()
    results = [
        suites.identity_suite(cfg.d, cfg.N, cfg.seed, cfg.count),
        suites.norm_equivalence_suite(params, cfg.seed, cfg.count, (cfg.N, 2 * cfg.N)),
        suites.dissipativity_suite(params, cfg.N, cfg.seed, max(cfg.count, 100)),
        suites.hardy_suite(cfg.seed, Ns=(cfg.N, 2 * cfg.N)),
        suites.extension_suite(cfg.d, cfg.seed, Ns=(cfg.N, 2 * cfg.N)),
    ]
    for r in results:
        print(r.line())
    _write(out, f"{tag}.json", _dump({"config": asdict(cfg), "checks": [r.to_dict() for r in results]}))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_spectrum(cfg: ExperimentConfig, out: Path, tag: str) -> int:
    from .grid import build_grid
    from .linop import assemble_generator
    from .spectrum import PERSIST_TOL, matrix_spectrum, persistent_above

    params = cfg.params()
    gen = assemble_generator(params, build_grid(cfg.N))
    report = matrix_spectrum(gen, [cfg.N, 2 * cfg.N])
    path = _write(out, f"{tag}.json", report.to_json())
    right = report.rightmost()
    unstable = persistent_above(report, params.spectral_threshold + cfg.epsilon)
    print(f"rightmost persistent eigenvalue {right.real:.12f}{right.imag:+.3e}i")
    print(f"persistent eigenvalues right of {params.spectral_threshold + cfg.epsilon:g}: {len(unstable)}")
    print(f"wrote {path}")
    ok = len(unstable) == 1 and abs(unstable[0] - 1.0) <= PERSIST_TOL
    return EXIT_OK if ok else EXIT_FAILED


def _data(cfg: ExperimentConfig, params):
    from . import evolve
    from .grid import sample_profile
    from .model import blowup_family_data

    radius = cfg.T0 + cfg.delta
    if cfg.perturb == "none":
        return sample_profile(lambda r: 0.0 * r, lambda r: 0.0 * r, radius, 16)
    if cfg.perturb == "family":
        return blowup_family_data(params, cfg.T0 + cfg.T_offset, cfg.T0, radius)
    return evolve.random_even_data(params, cfg.seed, radius, cfg.amplitude)


def cmd_evolve(cfg: ExperimentConfig, out: Path, tag: str) -> int:
    from . import evolve
    from .grid import build_grid

    params = cfg.params()
    grid = build_grid(cfg.N)
    v = _data(cfg, params)
    T = cfg.T0 + cfg.T_offset
    trace = evolve.run_evolution(params, grid, v, T, cfg.T0, cfg.tau_end, cfg.dt_factor)
    out.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out / f"{tag}-trace.csv")
    trace.write_extras_csv(out / f"{tag}-norms.csv")
    trace.write_json(out / f"{tag}-trace.json")
    print(f"max full norm {trace.full_norm.max():.6e}; final unstable coefficient {trace.unstable_coeff[-1]:.6e}")
    if trace.metadata.get("aborted"):
        print("run stopped early: perturbation norm passed the guard")
    print(f"wrote {out / f'{tag}-trace.csv'}")
    return EXIT_OK


def cmd_rates(cfg: ExperimentConfig, out: Path, tag: str) -> int:
    from . import evolve
    from .grid import build_grid

    params = cfg.params()
    grid = build_grid(cfg.N)
    v = _data(cfg, params)
    shoot = evolve.tune_blowup_time(params, grid, v, cfg.T0, cfg.delta, cfg.tau_probe, cfg.dt_factor)
    report = evolve.measure_convergence_rates(params, grid, shoot, cfg.mode, v=v, T0=cfg.T0, tau_end=cfg.tau_end, dt_factor=cfg.dt_factor)
    trace = evolve.run_evolution(params, grid, v, shoot.T_star, cfg.T0, cfg.tau_end, cfg.dt_factor)
    out.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out / f"{tag}-trace.csv")
    trace.write_extras_csv(out / f"{tag}-norms.csv")
    report.extra["shoot"] = shoot.to_dict()
    _write(out, f"{tag}.json", report.to_json())
    print(f"T_star = {shoot.T_star!r} after {shoot.iterations} evaluations")
    for (name, r, w), ok in zip(report.per_norm, report.passed):
        rate = "n/a" if r is None else f"{r:.4f}"
        print(f"  {name:<12s} rate {rate:>8s}  window [{w[0]:g}, {w[1]:g}]  {'' if ok is None else ('ok' if ok else 'LOW')}")
    print(f"expected >= {report.expected - report.tolerance:g}; headline {report.headline} {'PASS' if report.headline_passed else 'FAIL'}")
    return EXIT_OK if report.headline_passed else EXIT_FAILED


def cmd_resolvent(cfg: ExperimentConfig, out: Path, tag: str) -> int:
    from . import suites

    result = suites.resolvent_suite(cfg.params(), cfg.N, cfg.seed, min(cfg.count, 20))
    print(result.line())
    _write(out, f"{tag}.json", _dump(result.to_dict()))
    return EXIT_OK if result.passed else EXIT_FAILED


HANDLERS = {
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "rates": cmd_rates,
    "resolvent": cmd_resolvent,
}


def _diagnostic(out: Path, command: str, status: int, exc: BaseException) -> None:
    doc = {
        "command": command,
        "status": status,
        "error_type": type(exc).__name__,
        "message": str(exc),
        "details": getattr(exc, "details", {}),
        "traceback": traceback.format_exception_only(type(exc), exc),
    }
    try:
        _write(out, "diagnostic.json", _dump(doc))
    except OSError:
        pass
    print(json.dumps(doc, sort_keys=True, default=_jsonable), file=sys.stderr)


def run_command(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    try:
        return HANDLERS[cfg.command](cfg, out, f"{cfg.command}-{cfg.run_hash()}")
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError, ValueError) as exc:
        _diagnostic(out, cfg.command, EXIT_NUMERIC, exc)
        return EXIT_NUMERIC


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_USAGE if exc.code else EXIT_OK
    except (ConfigError, OSError) as exc:
        command = argv[0] if argv else ""
        out = Path(_peek_out(argv))
        _diagnostic(out, command, EXIT_USAGE, exc)
        return EXIT_USAGE
    return run_command(cfg)


def _peek_out(argv) -> str:
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return "out"


if __name__ == "__main__":
    sys.exit(main())
