"""Command-line front end: preset scenarios, INI configs, CSV output and run manifests.

Examples::

    cptsim list
    cptsim run --scenario fig1a --out results/
    cptsim run --config my_run.ini --workers 4
    cptsim run --config results/fig1a_manifest.json   # replay
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SweepResult, SweepSpec, fwhm_vs_theta, orders_sweep, sweep
from .cavity import CavityParams, effective_decay_rate_cavity
from .errors import CptsimError
from .lambda_system import DecayConfig, LambdaParams, level2_rates

EXIT_OK, EXIT_CONFIG, EXIT_FAILED_ROWS = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    figure: str
    kind: str  # "free" | "cavity" | "orders" | "fwhm"
    params: dict
    sweep: dict
    description: str


def _free(name, panel, theta, regime):
    return Scenario(
        name, f"Fig. 1({panel})", "free",
        {"omega_p": 0.1, "theta": theta},
        {"axis": "delta_p", "min": -2.0 if theta == 0.5 else -1.0, "max": 2.0 if theta == 0.5 else 1.0,
         "points": 401 if theta == 0.5 else 801, "log": False},
        f"free-space {regime} spectrum, atom and QDM",
    )


def _cav(name, panel, theta):
    return Scenario(
        name, f"Fig. 4({panel})", "cavity",
        {"theta": theta, "g": 5.0, "kappa": 1.0, "epsilon": 0.1},
        {"axis": "delta_p", "min": -8.0, "max": 8.0, "points": 1601, "log": False},
        "cavity transmission and populations, atom and QDM",
    )


def _fw(name, panel, eps2):
    return Scenario(
        name, f"Fig. 5({panel})", "fwhm",
        {"g": 5.0, "kappa": 1.0, "epsilon": float(np.sqrt(eps2)), "gamma_21": 1e-3, "gamma_22": 1e-3},
        {"axis": "theta", "min": 1e-3, "max": 2.0, "points": 40, "log": True},
        f"dark-resonance FWHM vs theta at eps^2 = {eps2} kappa^2",
    )


SCENARIOS = {
    s.name: s
    for s in [
        _free("fig1a", "a", 0.5, "EIT"),
        _free("fig1b", "b", 0.5, "EIT"),
        _free("fig1c", "c", 0.1, "CPT"),
        _free("fig1d", "d", 0.1, "CPT"),
        Scenario(
            "fig2", "Fig. 2", "orders", {"theta_eit": 0.5, "theta_cpt": 0.1},
            {"axis": "delta_p", "min": -1.0, "max": 1.0, "points": 201, "log": False},
            "chi(1), chi(3), chi(5) coefficients of <s13>, EIT and CPT",
        ),
        _cav("fig4a", "a", 1.0),
        _cav("fig4b", "b", 1.0),
        _cav("fig4c", "c", 0.1),
        _cav("fig4d", "d", 0.1),
        _fw("fig5a", "a", 0.01),
        _fw("fig5b", "b", 0.1),
        _fw("fig5c", "c", 0.3),
        _fw("fig5d", "d", 1.0),
    ]
}

FREE_FIELDS = {f.name for f in fields(LambdaParams)}
CAVITY_FIELDS = {f.name for f in fields(CavityParams)} - {"n_max"}
ALLOWED = {
    "run": {"scenario", "out", "workers", "effective_decay", "decay"},
    "model": {"kind", "gamma_2", "gamma_2_meaning", "theta_eit", "theta_cpt"} | FREE_FIELDS | CAVITY_FIELDS,
    "sweep": {"axis", "min", "max", "points", "log"},
    "truncation": {"n_max"},
}


@dataclass
class RunConfig:
    scenario: str = "custom"
    decay: str | None = None
    effective_decay: bool = False
    workers: int = 1
    out: str = "."
    kind: str | None = None
    model: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    n_max: int | None = None


def _parse_value(section: str, key: str, raw: str):
    key_id = f"[{section}] {key}"
    if key in ("kind", "axis", "scenario", "out", "decay", "gamma_2_meaning"):
        return raw.strip()
    if key in ("log", "effective_decay"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key_id}: expected a boolean, got {raw!r}")
    if key in ("points", "workers", "n_max"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key_id}: expected an integer, got {raw!r}") from None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key_id}: expected a number, got {raw!r}") from None


def load_ini(path: Path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in ALLOWED:
            raise ConfigError(f"unknown section [{section}]; allowed: {sorted(ALLOWED)}")
        for key, raw in parser.items(section):
            if key not in ALLOWED[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")
            value = _parse_value(section, key, raw)
            if section == "run":
                setattr(cfg, key, value)
            elif section == "model" and key == "kind":
                cfg.kind = value
            elif section == "model":
                cfg.model[key] = value
            elif section == "sweep":
                cfg.sweep[key] = value
            else:
                cfg.n_max = value
    return cfg


def load_manifest(path: Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunConfig(**data["config"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None


def _decays(cfg: RunConfig) -> list[str]:
    if cfg.decay is None:
        return ["atom", "qdm"]
    try:
        return [DecayConfig(cfg.decay).value]
    except ValueError:
        raise ConfigError(f"decay: expected atom, qdm or custom, got {cfg.decay!r}") from None


def _grid(sw: dict) -> np.ndarray:
    for key in ("min", "max", "points"):
        if key not in sw:
            raise ConfigError(f"[sweep] {key}: required")
    lo, hi, pts = float(sw["min"]), float(sw["max"]), int(sw["points"])
    if pts < 3:
        raise ConfigError(f"[sweep] points: must be >= 3, got {pts}")
    if not lo < hi:
        raise ConfigError(f"[sweep] min/max: need min < max, got {lo} >= {hi}")
    if sw.get("log", False):
        if lo <= 0:
            raise ConfigError(f"[sweep] min: must be > 0 for a log grid, got {lo}")
        return np.logspace(np.log10(lo), np.log10(hi), pts)
    return np.linspace(lo, hi, pts)


def _template(cls, decay: str, model: dict):
    """Build and validate a parameter block; errors name the offending key."""
    names = {f.name for f in fields(cls)}
    kw = {k: v for k, v in model.items() if k in names}
    if "gamma_2" in model:
        kw["gamma_21"], kw["gamma_22"] = level2_rates(
            model["gamma_2"], kw.get("gamma_21", 0.0), model.get("gamma_2_meaning", "dephasing")
        )
    if decay != "custom":
        g31, g32 = DecayConfig(decay).split(1.0)
        kw.setdefault("gamma_31", g31)
        kw.setdefault("gamma_32", g32)
    elif "gamma_31" not in kw or "gamma_32" not in kw:
        raise ConfigError("decay custom: [model] gamma_31 and gamma_32 are required")
    return cls(**kw)


@dataclass
class Series:
    name: str
    result: SweepResult
    unresolved: list = field(default_factory=list)


def _plan(cfg: RunConfig):
    """Resolve the config into a list of jobs; validates every parameter before any solve."""
    if cfg.scenario != "custom" and cfg.scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown preset {cfg.scenario!r}; see 'cptsim list'")
    if cfg.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {cfg.workers}")
    if cfg.n_max is not None and cfg.n_max < 1:
        raise ConfigError(f"[truncation] n_max: must be >= 1, got {cfg.n_max}")
    if cfg.scenario == "custom":
        kind = cfg.kind or "free"
        if kind not in ("free", "cavity"):
            raise ConfigError(f"[model] kind: expected free or cavity, got {kind!r}")
        base_params, sw = {}, {"axis": "delta_p", **cfg.sweep}
    else:
        sc = SCENARIOS[cfg.scenario]
        if cfg.kind is not None and cfg.kind != sc.kind:
            raise ConfigError(f"[model] kind: preset {sc.name} is {sc.kind!r}, got {cfg.kind!r}")
        kind, base_params, sw = sc.kind, dict(sc.params), {**sc.sweep, **cfg.sweep}
    model = {**base_params, **cfg.model}
    grid = _grid(sw)
    axis = sw.get("axis", "delta_p")
    decays = _decays(cfg)
    jobs = []
    try:
        if kind in ("free", "cavity"):
            cls = LambdaParams if kind == "free" else CavityParams
            if axis not in {f.name for f in fields(cls)}:
                raise ConfigError(f"[sweep] axis: {axis!r} is not a {cls.__name__} field")
            for dec in decays:
                t = _template(cls, dec, model)
                jobs.append((dec, "sweep", SweepSpec(t, axis, tuple(grid), None, cfg.n_max)))
            if cfg.effective_decay:
                ref = _template(cls, "atom", {k: v for k, v in model.items() if k not in ("gamma_31", "gamma_32")})
                qdm = _template(cls, "qdm", model)
                if kind == "cavity":
                    effective_decay_rate_cavity(qdm.epsilon, qdm.g, ref.gamma_32)  # validates g > 0
                jobs.append(("qdm_eff", "sweep", SweepSpec(qdm, axis, tuple(grid), ref.gamma_32, cfg.n_max)))
        elif kind == "orders":
            if axis != "delta_p":
                raise ConfigError("[sweep] axis: orders presets sweep delta_p only")
            rest = {k: v for k, v in model.items() if k not in ("theta_eit", "theta_cpt")}
            for regime in ("eit", "cpt"):
                for dec in decays:
                    t = _template(LambdaParams, dec, {**rest, "theta": model[f"theta_{regime}"]})
                    jobs.append((f"{dec}_{regime}", "orders", (t, grid)))
        else:  # fwhm
            if axis != "theta":
                raise ConfigError("[sweep] axis: FWHM presets sweep theta only")
            for dec in decays:
                t = _template(CavityParams, dec, model)
                jobs.append((dec, "fwhm", (t, grid)))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[model] {exc}") from None
    return kind, jobs


def _execute(kind: str, jobs, workers: int) -> list[Series]:
    out = []
    if kind == "fwhm":
        cols, unresolved, grid, errors = {}, {}, None, []
        for name, _, (t, grid) in jobs:
            curve = fwhm_vs_theta(t, grid, workers=workers)
            cols[f"fwhm_{name}"] = curve.fwhm
            unresolved[name] = [i for i, ok in enumerate(curve.resolved) if not ok]
            errors.append(curve.errors)
        res = SweepResult("theta", np.asarray(grid), cols, np.zeros(len(grid), dtype=bool),
                          [next((e[i] for e in errors if e[i]), None) for i in range(len(grid))])
        out.append(Series("fwhm", res, sorted({i for v in unresolved.values() for i in v})))
        return out
    for name, how, payload in jobs:
        if how == "sweep":
            res = sweep(payload, workers=workers)
        else:
            t, grid = payload
            res = orders_sweep(t, grid, workers=workers)
        out.append(Series(name, res))
    return out


def _tolist(a):
    if a is None:
        return None
    return [None if isinstance(v, float) and not np.isfinite(v) else v for v in np.asarray(a).tolist()]


def run(cfg: RunConfig, stream=sys.stdout) -> int:
    try:
        kind, jobs = _plan(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        series = _execute(kind, jobs, cfg.workers)
    except (CptsimError, ValueError) as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_FAILED_ROWS
    wall = time.perf_counter() - start

    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"version": __version__, "config": asdict(cfg), "wall_time_s": wall, "series": {}}
    any_failed = False
    for s in series:
        path = outdir / f"{cfg.scenario}_{s.name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            s.result.to_csv(fh)
        failed = [int(i) for i in np.flatnonzero(s.result.failed)]
        any_failed |= bool(failed)
        manifest["series"][s.name] = {
            "csv": path.name,
            "rows": len(s.result),
            "failed_rows": failed,
            "errors": {str(i): s.result.errors[i] for i in failed},
            "unresolved_rows": s.unresolved,
            "residuals": _tolist(s.result.residuals),
            "n_max": _tolist(s.result.n_max),
        }
        print(f"wrote {path} ({len(s.result)} rows, {len(failed)} failed)", file=stream)
    mpath = outdir / f"{cfg.scenario}_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {mpath}", file=stream)
    return EXIT_FAILED_ROWS if any_failed else EXIT_OK


def scenario_table() -> list[dict]:
    return [
        {"name": s.name, "figure": s.figure, "kind": s.kind, "params": s.params, "sweep": s.sweep,
         "description": s.description}
        for s in SCENARIOS.values()
    ]


def list_scenarios(as_json: bool = False) -> str:
    rows = scenario_table()
    if as_json:
        return json.dumps(rows, indent=2)
    lines = [f"{'name':<8} {'figure':<11} {'kind':<7} parameters"]
    for r in rows:
        params = ", ".join(f"{k}={v:g}" for k, v in r["params"].items())
        sw = r["sweep"]
        grid = f"{sw['axis']} in [{sw['min']:g}, {sw['max']:g}] x{sw['points']}{' log' if sw['log'] else ''}"
        lines.append(f"{r['name']:<8} {r['figure']:<11} {r['kind']:<7} {params}; {grid}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cptsim", description="Steady-state Lambda-system spectra")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a preset scenario or a config file")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="NAME")
    src.add_argument("--config", metavar="PATH", type=Path, help="INI config or a run manifest (.json)")
    r.add_argument("--out", metavar="PATH")
    r.add_argument("--workers", type=int, metavar="N")
    r.add_argument("--effective-decay", action="store_true", default=None)
    r.add_argument("--decay", choices=[d.value for d in DecayConfig])

    ls = sub.add_parser("list", help="list preset scenarios")
    ls.add_argument("--json", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_scenarios(args.json))
        return EXIT_OK
    if args.config is not None:
        try:
            cfg = load_manifest(args.config) if args.config.suffix == ".json" else load_ini(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        cfg = RunConfig(scenario=args.scenario)
    # command-line flags override the file
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.effective_decay:
        cfg.effective_decay = True
    if args.decay is not None:
        cfg.decay = args.decay
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
