"""Command-line front end.

Exit codes: 0 clean, 2 usage or config error, 3 blow-up observed, 4 a
rate or envelope bound failed. Outcomes 3 and 4 are results, not crashes:
their reports are written before exiting.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from pathlib import Path

import jsonschema

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_BOUND = 0, 2, 3, 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_INITIAL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["zero", "vortex", "random", "eigenmode", "bump", "orbit"]},
        "amplitude": _NUM,
        "radius": _POS,
        "spinup": _POS,
        "ut": {"enum": ["prepared", "zero", "perturbed"]},
        "ut_shape": {"enum": ["random", "eigenmode"]},
        "ut_amplitude": _NUM,
    },
    "required": ["kind"],
}
_FORCING = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["zero", "vortex", "rotating"]},
        "amplitude": _NUM,
        "omega": _NUM,
    },
    "required": ["kind"],
}
_GRID_N = {"type": "integer", "minimum": 4}
_SEED = {"type": "integer", "minimum": 0}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {"enum": ["hyperbolic", "limit", "jeffrey", "penalized", "burgers"]},
        "n": _GRID_N,
        "eps": _POS,
        "alpha_pen": _POS,
        "horizon": {"type": "number", "minimum": 0},
        "dt_rule": {"anyOf": [{"const": "auto"}, _POS]},
        "seed": _SEED,
        "initial": _INITIAL,
        "forcing": _FORCING,
        "sample_stride": {"type": "integer", "minimum": 1},
        "h": _POS,
        "scheme": {"enum": ["imex", "leapfrog"]},
        "sample_every": _POS,
    },
    "required": ["model"],
}

LIMIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": _GRID_N,
        "eps_values": {"type": "array", "items": _POS},
        "t_star": _POS,
        "horizon": _POS,
        "seed": _SEED,
        "initial": _INITIAL,
        "forcing": _FORCING,
    },
    "required": ["eps_values"],
}

BLOWUP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "horizon": _POS,
        "h": _POS,
        "amplitude": _NUM,
        "factor": _POS,
        "sample_every": _POS,
        "seed": _SEED,
    },
}

MAP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {"enum": ["hyperbolic", "burgers"]},
        "n": _GRID_N,
        "h": _POS,
        "horizon": _POS,
        "amplitudes": {"type": "array", "items": _NUM},
        "eps_values": {"type": "array", "items": _POS},
        "initial": _INITIAL,
        "forcing": _FORCING,
        "sample_stride": {"type": "integer", "minimum": 1},
        "seed": _SEED,
    },
    "required": ["model", "amplitudes", "eps_values"],
}

SCHEMAS = {
    "run": RUN_SCHEMA,
    "energy-report": RUN_SCHEMA,
    "limit-study": LIMIT_SCHEMA,
    "blowup-study": BLOWUP_SCHEMA,
    "stability-map": MAP_SCHEMA,
}


class ConfigError(ValueError):
    pass


# -- config loading --------------------------------------------------------------

def _line_of(text: str, path) -> int:
    """Best-effort line number of the JSON member addressed by ``path``."""
    pos = 0
    for key in path:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _describe(err: jsonschema.ValidationError) -> tuple[list, str]:
    path = list(err.absolute_path)
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        return path + extra[:1], f"unknown key {extra[0]!r}" if extra else err.message
    where = ".".join(str(p) for p in path) or "<root>"
    return path, f"{where}: {err.message}"


def load_config(path: str, command: str, seed: int | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror or exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        where, msg = _describe(errors[0])
        raise ConfigError(f"{path}:{_line_of(text, where)}: {msg}")
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- output ------------------------------------------------------------------------

def _header(cfg: dict) -> dict:
    return {"tool": "hyperns", "version": __version__, "config_hash": config_hash(cfg)}


def _num(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path: Path, cfg: dict, columns, rows) -> None:
    buf = io.StringIO()
    h = _header(cfg)
    buf.write(f"# tool={h['tool']} version={h['version']} config_hash={h['config_hash']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(v) for v in row])
    path.write_text(buf.getvalue())


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, cfg: dict, payload: dict) -> None:
    doc = {"header": _header(cfg), **_clean(payload)}
    path.write_text(json.dumps(doc, indent=2) + "\n")


# -- commands ------------------------------------------------------------------------

def _model_config(cfg: dict):
    from .hns2d import ModelConfig

    keys = ("model", "n", "eps", "alpha_pen", "horizon", "dt_rule", "seed", "initial", "forcing", "sample_stride")
    return ModelConfig.from_dict({k: cfg[k] for k in keys if k in cfg})


def _run_hns(cfg: dict, out: Path, report_only: bool = False) -> int:
    from .hns2d import TRACE_COLUMNS, run_model
    from .stokes import make_context

    mc = _model_config(cfg)
    ctx = make_context(mc.n)
    trace = run_model(ctx, mc.model, mc)
    if not report_only:
        write_csv(out / "trace.csv", cfg, TRACE_COLUMNS, trace.csv_rows())
    report = trace.energy_report().fit()
    fit_ok = math.isfinite(report.fitted_alpha)
    if not fit_ok:
        print("energy report: no dissipative envelope", file=sys.stderr)
    write_json(out / "energy_report.json", cfg, report.to_json())
    if trace.flag:
        print(f"blow-up flag: {trace.flag}", file=sys.stderr)
        return EXIT_BLOWUP
    if report_only and not fit_ok:
        return EXIT_BOUND
    return EXIT_OK


def _burgers_trace(state, horizon, sample_every, scheme):
    from .burgers1d import DomainTooSmallError, cone_energy, moment_y, run_burgers, support_width

    rows = []
    R = horizon + 1.0

    def record(s):
        try:
            sup = support_width(s) or (math.nan, math.nan)
        except DomainTooSmallError:
            sup = (math.nan, math.nan)
        cone = cone_energy(s, R) if s.t < R else math.nan
        rows.append((s.t, moment_y(s), math.nan, s.u_inf(), sup[0], sup[1], cone))

    final = run_burgers(state, horizon, sample_every=sample_every, on_sample=record, scheme=scheme)
    return final, rows


def _run_burgers(cfg: dict, out: Path) -> int:
    from .burgers1d import (
        TRACE_COLUMNS,
        BurgersState,
        ComparisonViolatedError,
        blowup_certificate,
        bump_data,
    )
    from .grids import Grid1D

    eps = float(cfg.get("eps", 1.0))
    horizon = float(cfg.get("horizon", 2.0))
    h = float(cfg.get("h", 0.02))
    sample_every = float(cfg.get("sample_every", 0.05))
    init = cfg.get("initial", {"kind": "bump", "amplitude": 1.0})
    if init["kind"] not in ("zero", "bump"):
        raise ConfigError(f"burgers initial kind must be 'zero' or 'bump', got {init['kind']!r}")
    amp = float(init.get("amplitude", 1.0)) if init["kind"] == "bump" else 0.0
    grid = Grid1D.whole_line(horizon, h)
    state = BurgersState.from_data(grid, bump_data(amp), eps=eps)
    final, rows = _burgers_trace(state, horizon, sample_every, cfg.get("scheme", "imex"))
    write_csv(out / "trace.csv", cfg, TRACE_COLUMNS, rows)
    if not final.flag:
        return EXIT_OK
    print(f"blow-up flag: {final.flag} at t={final.t:.6g}", file=sys.stderr)
    if eps == 1.0:
        try:
            cert = blowup_certificate(amp, horizon, h=h).to_json()
        except ComparisonViolatedError as exc:
            cert = {"verdict": f"comparison violated: {exc}"}
        write_json(out / "certificate.json", cfg, cert)
    return EXIT_BLOWUP


def cmd_run(cfg: dict, out: Path, jobs: int = 1) -> int:
    if cfg["model"] == "burgers":
        return _run_burgers(cfg, out)
    return _run_hns(cfg, out)


def cmd_energy_report(cfg: dict, out: Path, jobs: int = 1) -> int:
    if cfg["model"] == "burgers":
        raise ConfigError("energy-report supports the 2D models only")
    return _run_hns(cfg, out, report_only=True)


def cmd_limit_study(cfg: dict, out: Path, jobs: int = 1) -> int:
    from .hns2d import ModelConfig
    from .limit import SweepMemberFlagged, run_limit_study
    from .stokes import make_context

    eps_values = cfg["eps_values"]
    if len(eps_values) < 3:
        raise ConfigError("need ≥ 3 eps values")
    mc = ModelConfig(
        model="hyperbolic", n=cfg.get("n", 32), seed=cfg.get("seed", 0),
        initial=cfg.get("initial", {"kind": "vortex", "amplitude": 5.0}),
        forcing=cfg.get("forcing", {"kind": "rotating", "amplitude": 200.0, "omega": 2 * math.pi}),
    )
    t_star = float(cfg.get("t_star", 1.0))
    try:
        result, _ = run_limit_study(make_context(mc.n), mc, eps_values, t_star, float(cfg.get("horizon", 2.0)), jobs=jobs)
    except SweepMemberFlagged as exc:
        write_json(out / "limit_study.json", cfg, {"flagged": exc.eps_values, "error": str(exc)})
        print(str(exc), file=sys.stderr)
        return EXIT_BOUND
    payload = result.to_json()
    payload["ratio_nonincreasing"] = result.ratio_nonincreasing()
    write_json(out / "limit_study.json", cfg, payload)
    if not result.slopes_ok():
        print(
            f"slope bound failed: slope_w={result.fitted_rate_w:.3f}, "
            f"slope_wbar={result.fitted_rate_wbar:.3f}",
            file=sys.stderr,
        )
        return EXIT_BOUND
    return EXIT_OK


def cmd_blowup_study(cfg: dict, out: Path, jobs: int = 1) -> int:
    from .burgers1d import ComparisonViolatedError, blowup_certificate, critical_amplitude

    horizon = float(cfg.get("horizon", 5.0))
    amp = cfg.get("amplitude")
    critical = None
    if amp is None:
        critical = critical_amplitude(horizon)
        amp = -critical * float(cfg.get("factor", 1.2))
    rows: list = []
    try:
        cert = blowup_certificate(
            float(amp), horizon, h=float(cfg.get("h", 0.05)),
            sample_every=float(cfg.get("sample_every", 0.01)), trace=rows,
        )
    except ComparisonViolatedError as exc:
        write_json(out / "certificate.json", cfg, {"amplitude": amp, "verdict": f"comparison violated: {exc}"})
        print(str(exc), file=sys.stderr)
        return EXIT_BOUND
    from .burgers1d import TRACE_COLUMNS

    write_csv(out / "trace.csv", cfg, TRACE_COLUMNS, rows)
    payload = cert.to_json()
    payload["critical_amplitude"] = critical
    write_json(out / "certificate.json", cfg, payload)
    return EXIT_BLOWUP if cert.t_blow_observed is not None else EXIT_OK


def classify_cell(cfg: dict, R: float, eps: float) -> str:
    """``dissipative``, ``blow-up`` or ``indeterminate`` for one map cell."""
    from .energy import NoEnvelopeError, fit_dissipative_envelope

    if cfg["model"] == "burgers":
        from .burgers1d import BurgersState, bump_data
        from .grids import Grid1D

        horizon = float(cfg.get("horizon", 5.0))
        grid = Grid1D.whole_line(horizon, float(cfg.get("h", 0.05)))
        state = BurgersState.from_data(grid, bump_data(R), eps=eps)
        final, rows = _burgers_trace(state, horizon, horizon / 50, "imex")
        if final.flag:
            return "blow-up"
        times = [r[0] for r in rows]
        values = [r[3] for r in rows]
    else:
        from .hns2d import ModelConfig, run_model
        from .stokes import make_context

        mc = ModelConfig(
            model="hyperbolic", n=cfg.get("n", 16), eps=eps, horizon=float(cfg.get("horizon", 5.0)),
            seed=cfg.get("seed", 0), sample_stride=cfg.get("sample_stride", 20),
            initial={**cfg.get("initial", {"kind": "vortex"}), "amplitude": R},
            forcing=cfg.get("forcing", {"kind": "zero", "amplitude": 0.0}),
        )
        trace = run_model(make_context(mc.n), "hyperbolic", mc)
        if trace.flag:
            return "blow-up"
        times = trace.times
        values = trace.column("norm_E1_full")
    try:
        fit = fit_dissipative_envelope(times, values)
    except NoEnvelopeError:
        return "indeterminate"
    return "dissipative" if fit.alpha_fit > 0 else "indeterminate"


def _cell_job(args):
    cfg, R, eps = args
    return classify_cell(cfg, R, eps)


def monotonicity_violations(cells: dict) -> list:
    """Pairs where ``(R, eps)`` dissipates but ``(R, eps')`` with ``eps' < eps`` does not."""
    out = []
    for (R, eps), outcome in sorted(cells.items()):
        if outcome != "dissipative":
            continue
        for (R2, eps2), other in sorted(cells.items()):
            if R2 == R and eps2 < eps and other != "dissipative":
                out.append({"R": R, "eps": eps, "smaller_eps": eps2, "outcome": other})
    return out


def cmd_stability_map(cfg: dict, out: Path, jobs: int = 1) -> int:
    amps, epss = cfg["amplitudes"], cfg["eps_values"]
    if not amps or not epss:
        raise ConfigError("empty (R, eps) grid")
    pairs = [(float(R), float(e)) for R in amps for e in epss]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_cell_job, [(cfg, R, e) for R, e in pairs]))
    else:
        outcomes = [classify_cell(cfg, R, e) for R, e in pairs]
    cells = dict(zip(pairs, outcomes))
    write_csv(out / "stability_map.csv", cfg, ("R", "eps", "outcome"), [(R, e, o) for (R, e), o in cells.items()])
    violations = monotonicity_violations(cells)
    write_json(out / "stability_summary.json", cfg, {"monotonicity_violations": violations})
    for v in violations:
        print(f"monotonicity violation: {v}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "limit-study": cmd_limit_study,
    "blowup-study": cmd_blowup_study,
    "stability-map": cmd_stability_map,
    "energy-report": cmd_energy_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperns", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.command, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
