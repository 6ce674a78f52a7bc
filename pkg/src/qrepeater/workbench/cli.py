"""Command-line front end.

Every command first resolves its inputs (config file, preset, flags) into a
self-contained job description, then executes it.  The job is written to
``<name>.manifest.json`` next to the results, and ``qrepeater rerun`` runs a
manifest again.  Result files never carry timestamps or worker counts, so a
rerun reproduces them byte for byte.

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from .. import __version__, analytic
from ..model import PRESETS, ParameterError, SchemeParams
from ..montecarlo import SimConfig, simulate_postselected, simulate_two_link, write_trial_dump
from ..montecarlo.validation import cutoff_grid
from .config import ENGINES, ConfigError, RunConfig, build_params, load_config
from .suites import SUITES, run_suite
from .sweeps import (
    DISTANCE_POINTS,
    DISTANCE_RANGE_M,
    MEMORY_ETA_RANGE,
    MEMORY_GRID,
    MEMORY_TAU_RANGE_S,
    PARAM_COLUMNS,
    RESULT_COLUMNS,
    Axis,
    EngineOptions,
    SweepSpec,
    arrangement,
    evaluate,
    iso_rate_curve,
    memory_axes,
    run_sweep,
)
from .tables import FORMATS, ResultTable

log = logging.getLogger("qrepeater")

OUT_DIR_ENV = "QREPEATER_OUT_DIR"
DEFAULT_OUT_DIR = "qrepeater-out"
DEFAULT_TRIALS = 10_000
DEFAULT_SEED = 0
DEFAULT_MAX_ATTEMPTS = 10_000_000

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for validation failures here
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, *, physics: bool = True, engine: bool = True) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    p.add_argument("--format", choices=FORMATS, default="csv", help="result table format")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    p.add_argument("--max-attempts", type=int, help="per-trial attempt bound for Monte Carlo")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    if engine:
        p.add_argument("--engine", choices=ENGINES, help="analytic, mc or both")
    if physics:
        p.add_argument("--preset", help=f"hardware preset ({', '.join(sorted(PRESETS))})")
        p.add_argument("--scheme", help="'1+1', '2+2', '2~+1' or '2~+2'")
        p.add_argument("--distance-km", type=float, help="total distance in km")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="physical parameter with its unit in the key, e.g. tau_m_ms=1 or eta_m=0.5")
        ps = p.add_mutually_exclusive_group()
        ps.add_argument("--postselect", dest="postselect", action="store_true", default=None,
                        help="postselect over two parallel chains (single-photon BSM only)")
        ps.add_argument("--no-postselect", dest="postselect", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qrepeater", description="Entanglement distribution rates of two-link quantum repeaters.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="rate, EDT bounds and fidelity for one parameter set")
    _common(p)

    p = sub.add_parser("sweep-memory", help="rate over the memory lifetime x efficiency plane")
    _common(p)
    p.add_argument("--target-rate", type=float, help="iso-rate target in Hz (default 1)")
    p.add_argument("--tau-points", type=int, default=MEMORY_GRID[0])
    p.add_argument("--eta-points", type=int, default=MEMORY_GRID[1])
    p.add_argument("--tau-min-s", type=float, default=MEMORY_TAU_RANGE_S[0])
    p.add_argument("--tau-max-s", type=float, default=MEMORY_TAU_RANGE_S[1])
    p.add_argument("--eta-min", type=float, default=MEMORY_ETA_RANGE[0])
    p.add_argument("--eta-max", type=float, default=MEMORY_ETA_RANGE[1])
    p.epilog = "Axes given under sweep.axes in the config file replace the grid flags."

    p = sub.add_parser("sweep-distance", help="rate versus total distance for hardware presets")
    _common(p)
    p.add_argument("--presets", help="comma-separated preset names (default: --preset, else all)")
    p.add_argument("--min-km", type=float, default=DISTANCE_RANGE_M[0] / 1e3)
    p.add_argument("--max-km", type=float, default=DISTANCE_RANGE_M[1] / 1e3)
    p.add_argument("--points", type=int, default=DISTANCE_POINTS)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")

    p = sub.add_parser("simulate", help="Monte Carlo run with optional raw-trial dump")
    _common(p, engine=False)
    p.add_argument("--dump", choices=("none", "trials", "attempts"), default="none",
                   help="write per-trial or per-attempt rows as TSV")

    p = sub.add_parser("validate", help="run a validation suite and write a pass/fail report")
    _common(p, physics=False, engine=False)
    p.add_argument("suite", choices=SUITES)

    p = sub.add_parser("compare-cutoff", help="hard cutoff versus exponential decay table")
    _common(p, physics=False, engine=False)
    p.add_argument("--p0", default="0.01,0.02,0.05,0.1,0.2,0.5", help="comma-separated p0 values")
    p.add_argument("--ratios", default="1,10,100,1000", help="comma-separated tau_m/T0 values")

    p = sub.add_parser("rerun", help="execute the job recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's directory)")
    p.add_argument("--workers", type=int, default=1)
    return ap


# resolution: flags and config -> job description

def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(flag, f"expected comma-separated numbers, got {text!r}") from None


def _set_pairs(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _run_config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def _pick(flag, cfg_value, default):
    return flag if flag is not None else (cfg_value if cfg_value is not None else default)


def _options(args, cfg: RunConfig) -> dict[str, Any]:
    seed = _pick(args.seed, cfg.seed, DEFAULT_SEED)
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed", "must be an unsigned 64-bit integer")
    trials = _pick(args.trials, cfg.trials, None)
    if trials is not None and trials < 1:
        raise ConfigError("--trials", "must be >= 1")
    max_attempts = _pick(args.max_attempts, cfg.max_attempts, DEFAULT_MAX_ATTEMPTS)
    if max_attempts < 1:
        raise ConfigError("--max-attempts", "must be >= 1")
    return {"seed": seed, "trials": trials, "max_attempts": max_attempts,
            "engine": _pick(getattr(args, "engine", None), cfg.engine, "analytic")}


def _physical(args, cfg: RunConfig) -> tuple[str | None, dict[str, Any]]:
    data = dict(cfg.physical)
    if args.scheme is not None:
        data["scheme"] = args.scheme
    if args.distance_km is not None:
        data.pop("total_distance_m", None)
        data["total_distance_km"] = args.distance_km
    for key, value in _set_pairs(args.set).items():
        data[key] = value
    return _pick(args.preset, cfg.preset, None), data


def _params(args, cfg: RunConfig) -> SchemeParams:
    # presets default to 100 km; explicit parameter sets must give a distance
    preset, data = _physical(args, cfg)
    params = build_params(data, preset=preset)
    return arrangement(params, _pick(args.postselect, cfg.postselect, None))


def _memory_axes(args, cfg: RunConfig) -> tuple[Axis, ...]:
    axes = cfg.sweep.get("axes")
    if axes is None:
        return memory_axes(args.tau_points, args.eta_points, (args.tau_min_s, args.tau_max_s),
                           (args.eta_min, args.eta_max))
    if not isinstance(axes, list):
        raise ConfigError("sweep.axes", "expected a list of axis mappings")
    out = tuple(Axis.from_mapping(a) for a in axes)
    if sorted(a.param for a in out) != ["eta_m", "tau_m_s"]:
        raise ConfigError("sweep.axes", "a memory sweep needs exactly the axes tau_m_s and eta_m")
    return out


def resolve(args) -> dict[str, Any]:
    """Job description with every input resolved to SI values."""
    cmd = args.command
    cfg = _run_config(args)
    job: dict[str, Any] = {"command": cmd, "format": args.format, **_options(args, cfg)}
    if cmd == "rate":
        job["trials"] = job["trials"] or DEFAULT_TRIALS
        job["params"] = _params(args, cfg).to_dict()
    elif cmd == "sweep-memory":
        job["trials"] = job["trials"] or DEFAULT_TRIALS
        base = _params(args, cfg)
        label = (args.preset or cfg.preset or "custom").upper()
        job["spec"] = SweepSpec(_memory_axes(args, cfg), {label: base}, _engine_options(job)).to_dict()
        target = _pick(args.target_rate, cfg.sweep.get("target_rate_hz"), 1.0)
        if not (isinstance(target, (int, float)) and target > 0):
            raise ConfigError("target_rate_hz", f"must be a positive number, got {target!r}")
        job["target_rate_hz"] = float(target)
    elif cmd == "sweep-distance":
        job["trials"] = job["trials"] or DEFAULT_TRIALS
        preset, data = _physical(args, cfg)
        if args.presets is not None:
            names = [n.strip() for n in args.presets.split(",") if n.strip()]
        elif cfg.sweep.get("presets") is not None:
            names = [str(n) for n in cfg.sweep["presets"]]
        else:
            names = [preset] if preset is not None else sorted(PRESETS)
        postselect = _pick(args.postselect, cfg.postselect, None)
        series = {name.upper(): arrangement(build_params(data, preset=name), postselect) for name in names}
        axis = Axis("total_distance_m", args.min_km * 1e3, args.max_km * 1e3, args.points, args.spacing)
        job["spec"] = SweepSpec((axis,), series, _engine_options(job)).to_dict()
    elif cmd == "simulate":
        job["trials"] = job["trials"] or DEFAULT_TRIALS
        job["params"] = _params(args, cfg).to_dict()
        job["dump"] = args.dump
    elif cmd == "validate":
        job["suite"] = args.suite
    elif cmd == "compare-cutoff":
        job["trials"] = job["trials"] or DEFAULT_TRIALS
        job["p0"] = _float_list(args.p0, "--p0")
        job["ratios"] = _float_list(args.ratios, "--ratios")
        for p0 in job["p0"]:
            if not 0.0 < p0 <= 1.0:
                raise ConfigError("--p0", f"values must lie in (0, 1], got {p0!r}")
        for ratio in job["ratios"]:
            if not ratio > 0:
                raise ConfigError("--ratios", f"values must be positive, got {ratio!r}")
    return job


def _engine_options(job: dict[str, Any], workers: int = 1) -> EngineOptions:
    return EngineOptions(job["engine"], job["trials"], job["seed"], job["max_attempts"], workers)


# execution: job description -> files

def _stem(job: dict[str, Any]) -> str:
    return f"validate-{job['suite']}" if job["command"] == "validate" else job["command"]


def _write_manifest(out: Path, job: dict[str, Any], outputs: list[str]) -> Path:
    manifest = {"tool": "qrepeater", "version": __version__, "command": job["command"], "job": job,
                "outputs": outputs}
    path = out / f"{_stem(job)}.manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _print_rate_rows(rows: list[dict[str, Any]]) -> None:
    for row in rows:
        print(f"[{row['engine']}] scheme={row['scheme']} distance={row['total_distance_m'] / 1e3:g} km "
              f"postselected={row['postselected']}")
        print(f"  rate_hz      {_fmt(row['rate_hz'])}" + (f" +- {_fmt(row['rate_se_hz'])}" if row.get("rate_se_hz") else ""))
        print(f"  edt_s        lower {_fmt(row['edt_lower_s'])}  mid {_fmt(row['edt_mid_s'])}  "
              f"upper {_fmt(row['edt_upper_s'])}")
        print(f"  fidelity     {_fmt(row['fidelity'])}")
        if row.get("below_threshold"):
            print("  (below threshold: EDT not representable)")


def execute(job: dict[str, Any], out: Path, workers: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    fmt = job["format"]
    stem = _stem(job)
    cmd = job["command"]
    outputs: list[str] = []
    status = EXIT_OK

    def save(table: ResultTable, suffix: str = "") -> None:
        name = f"{stem}{suffix}.{fmt}"
        table.write(out / name, fmt)
        outputs.append(name)

    if cmd == "rate":
        params = SchemeParams.from_dict(job["params"])
        table = ResultTable.from_records(evaluate(params, _engine_options(job, workers)), RESULT_COLUMNS)
        save(table)
        _print_rate_rows(table.rows)
    elif cmd in ("sweep-memory", "sweep-distance"):
        spec = SweepSpec.from_dict(job["spec"])
        spec = SweepSpec(spec.axes, spec.series, _engine_options(job, workers))
        table = run_sweep(spec)
        save(table)
        if cmd == "sweep-memory":
            tau_axis = next(a for a in spec.axes if a.param == "tau_m_s")
            eta_axis = next(a for a in spec.axes if a.param == "eta_m")
            label, base = next(iter(spec.series.items()))
            iso = iso_rate_curve(base, job["target_rate_hz"], tau_axis.values(),
                                 (eta_axis.start, eta_axis.stop), label)
            save(iso, "-iso")
            found = sum(1 for r in iso if r["status"] == "ok")
            print(f"{len(table)} rows; iso-rate {job['target_rate_hz']:g} Hz reached in {found}/{len(iso)} "
                  f"lifetime columns")
        else:
            print(f"{len(table)} rows over {len(spec.series)} series")
    elif cmd == "simulate":
        status = _simulate(job, out, workers, save, outputs)
    elif cmd == "validate":
        res = run_suite(job["suite"], job["trials"], job["seed"], workers)
        save(res.table)
        name = f"{stem}-report.json"
        res.write_report(out / name)
        outputs.append(name)
        for c in res.checks:
            tag = "PASS" if c.passed else ("FAIL" if c.blocking else "FLAG")
            print(f"{tag}  {c.name}: {_fmt(c.value)} ({c.threshold}) {c.detail}".rstrip())
        print(f"suite {job['suite']}: {'passed' if res.passed else 'FAILED'}")
        status = EXIT_OK if res.passed else EXIT_VALIDATION
    elif cmd == "compare-cutoff":
        rows = cutoff_grid(job["p0"], job["ratios"], job["trials"], job["seed"], workers)
        save(ResultTable.from_records(rows))
        for r in rows:
            print(f"tau/T0={r['tau_over_t0']:g} p0={r['p0']:g}: cut/exp printed {_fmt(r['ratio_printed'])}, "
                  f"simulated {_fmt(r['ratio_mc'])}")
    else:
        raise UsageError(f"unknown command {cmd!r}")
    _write_manifest(out, job, outputs)
    log.info("wrote %s to %s", ", ".join(outputs), out)
    return status


def _simulate(job, out: Path, workers: int, save, outputs: list[str]) -> int:
    params = SchemeParams.from_dict(job["params"])
    gen = analytic.generation(params)
    if gen.p0 <= 0.0:
        raise ConfigError("params", "generation probability underflows to 0; nothing to simulate")
    cfg = SimConfig.from_params(params, job["trials"], job["seed"], max_attempts_per_trial=job["max_attempts"],
                                record_attempts=job["dump"] == "attempts", workers=workers)
    if params.postselected:
        if job["dump"] == "attempts":
            raise ConfigError("--dump", "per-attempt dumps are available for two-link runs only")
        rep = simulate_postselected(cfg)
    else:
        rep = simulate_two_link(cfg)
    row = {k: v for k, v in params.to_dict().items() if k in PARAM_COLUMNS}
    table = ResultTable(["estimate", "mean", "standard_error", "n_samples", "n_trials", "n_truncated", "seed",
                         "procedure"] + PARAM_COLUMNS)
    for name, est in rep.estimates.items():
        table.append({"estimate": name, "mean": est.mean, "standard_error": est.standard_error,
                      "n_samples": est.n_samples, "n_trials": rep.n_trials, "n_truncated": rep.n_truncated,
                      "seed": job["seed"], "procedure": rep.meta["procedure"], **row})
    save(table)
    if job["dump"] != "none":
        name = f"simulate-{job['dump']}.tsv"
        write_trial_dump(out / name, rep, job["dump"])
        outputs.append(name)
    edt = rep["edt_s"]
    print(f"{rep.meta['procedure']}: mean EDT {_fmt(edt.mean)} s +- {_fmt(edt.standard_error)} "
          f"over {edt.n_samples} trials ({rep.n_truncated} truncated)")
    if edt.mean > 0 and math.isfinite(edt.mean):
        print(f"rate_hz {_fmt(1.0 / edt.mean)}")
    return EXIT_OK


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def rerun(manifest_path: str, out: str | None, workers: int) -> int:
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        job = manifest["job"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("manifest", f"cannot read job from {path}: {exc}") from None
    if manifest.get("version") != __version__:
        log.warning("manifest was written by version %s, running %s", manifest.get("version"), __version__)
    return execute(job, Path(out) if out else path.parent, workers)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"qrepeater: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        if args.command == "rerun":
            return rerun(args.manifest, args.out, args.workers)
        job = resolve(args)
        return execute(job, _out_dir(args.out), args.workers)
    except (ConfigError, ParameterError) as exc:
        print(f"qrepeater: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (analytic.SchemeMismatchError, UsageError) as exc:
        print(f"qrepeater: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
