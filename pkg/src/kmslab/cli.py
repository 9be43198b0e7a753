"""Command-line runner: TOML config in, CSV/JSON artifacts plus manifest out.

Commands map one-to-one onto library operations:

    kmslab zones         exponent table and zone classification
    kmslab check-nl      growth-hypothesis verification of a nonlinearity
    kmslab solve         one coupled solve
    kmslab sweep         datum-scaling sweep (a priori or sup-norm mode)
    kmslab continuation  solves along an increasing k schedule
    kmslab probe         nontriviality or regularity probe

Exit codes: 0 success, 1 config error, 2 inadmissible parameters,
3 hypothesis failure, 4 solver non-convergence.

Unknown config keys are errors; exponent names are ASCII (N, p, r, theta, m).
All randomness flows from the single config ``seed``.  The ``KMSLAB_THREADS``
environment variable caps internal parallelism; the current implementation is
sequential, so any positive value is accepted and recorded.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .exponents import (
    ExponentError,
    ProblemParams,
    admissibility_check,
    eta_threshold_exponent,
    sigma_exponent,
    zone_classify,
)
from .experiments import (
    apriori_scaling_sweep,
    linf_scaling_probe,
    nontriviality_check,
    regularity_probe,
)
from .grids import Field, Grid
from .nonlinearity import NonlinearitySpec, verify_growth_bounds
from .solver import (
    InsufficientSweepError,
    SolveConfig,
    k_continuation,
    picard_system_solve,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INADMISSIBLE = 2
EXIT_HYPOTHESIS = 3
EXIT_NO_CONVERGENCE = 4


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


_SECTION_KEYS = {
    "problem": {"N", "p", "r", "theta", "m", "c1", "c2", "d1", "d2"},
    "nonlinearity": {"variant", "r", "theta", "e1", "e2"},
    "grid": {"d", "n_per_axis", "extent"},
    "solve": {"k", "outer_tol", "inner_tol", "max_outer", "max_inner", "relax",
              "eps_schedule"},
    "sweep": {"mode", "lambdas", "t", "slack"},
    "continuation": {"k_schedule"},
    "probe": {"mode", "levels", "q_grid", "floor"},
    "datum": {"kind", "amplitude", "gamma"},
    "io": {"outdir", "label"},
}
_TOP_KEYS = set(_SECTION_KEYS) | {"seed"}


def load_config(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")
    unknown = set(config) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    for name, section in config.items():
        if name == "seed":
            continue
        bad = set(section) - _SECTION_KEYS[name]
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
    return config


def _require(config: dict, *sections: str) -> None:
    missing = [s for s in sections if s not in config]
    if missing:
        raise ConfigError(f"missing required config sections: {missing}")


def _build_params(config: dict) -> ProblemParams:
    try:
        return ProblemParams(**config["problem"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [problem] section: {exc}")


def _build_spec(config: dict) -> NonlinearitySpec:
    section = dict(config["nonlinearity"])
    variant = section.pop("variant", None)
    try:
        if variant == "prototype":
            return NonlinearitySpec.prototype(section["r"], section["theta"])
        if variant == "oscillatory":
            return NonlinearitySpec.oscillatory(
                section["r"], section["theta"],
                e1=section.get("e1", 1.0), e2=section.get("e2", 1.0),
            )
        if variant == "zero":
            return NonlinearitySpec.zero()
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad [nonlinearity] section: {exc}")
    raise ConfigError(
        f"[nonlinearity].variant must be prototype, oscillatory or zero, got {variant!r}"
    )


def _build_grid(config: dict) -> Grid:
    try:
        return Grid(**config["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [grid] section: {exc}")


def _build_solve_config(config: dict) -> SolveConfig:
    section = dict(config.get("solve", {}))
    if "eps_schedule" in section:
        section["eps_schedule"] = tuple(float(e) for e in section["eps_schedule"])
    try:
        return SolveConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [solve] section: {exc}")


def _datum_builder(config: dict):
    section = config.get("datum", {"kind": "constant"})
    kind = section.get("kind", "constant")
    amplitude = float(section.get("amplitude", 1.0))
    gamma = section.get("gamma")
    if kind == "constant":
        return lambda grid: Field(grid, np.full(grid.shape, amplitude))
    if kind == "sine":
        def build_sine(grid: Grid) -> Field:
            vals = np.full(grid.shape, amplitude)
            for c in grid.coords():
                vals = vals * np.sin(np.pi * c / grid.extent)
            return Field(grid, vals)
        return build_sine
    if kind == "singular":
        if gamma is None:
            raise ConfigError("singular datum requires [datum].gamma")
        return lambda grid: singular_datum(grid, float(gamma), amplitude)
    raise ConfigError(f"[datum].kind must be constant, sine or singular, got {kind!r}")


def singular_datum(grid: Grid, gamma: float, amplitude: float = 1.0) -> Field:
    """|x - x0|^{-gamma} with x0 offset half a cell from the center node.

    The offset keeps the singularity between nodes so nodal quadrature sees a
    large-but-finite sampling whose integrals converge under refinement
    exactly when gamma is integrable.
    """
    if gamma <= 0.0:
        raise ValueError(f"singularity strength gamma must be positive, got {gamma}")
    center = grid.extent / 2.0 + grid.h / 2.0
    dist2 = np.zeros(grid.shape)
    for c in grid.coords():
        dist2 = dist2 + (c - center) ** 2
    return Field(grid, amplitude * np.sqrt(dist2) ** (-gamma))


class ArtifactWriter:
    """Collects emitted files and their SHA-256 digests for the manifest."""

    def __init__(self, run_dir: Path) -> None:
        self.run_dir = run_dir
        self.digests: dict[str, str] = {}

    def write(self, relpath: str, text: str) -> None:
        path = self.run_dir / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.digests[relpath] = hashlib.sha256(data).hexdigest()

    def write_json(self, relpath: str, obj: Any) -> None:
        self.write(relpath, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def finish(self, label: str, config: dict, seed: Optional[int]) -> None:
        manifest = {
            "label": label,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "version": __version__,
            "seed": seed,
            "threads": os.environ.get("KMSLAB_THREADS"),
            "config": config,
            "artifacts": dict(sorted(self.digests.items())),
        }
        path = self.run_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _writer(config: dict, args: argparse.Namespace) -> ArtifactWriter:
    io_section = config.get("io", {})
    outdir = args.outdir or io_section.get("outdir")
    label = args.label or io_section.get("label")
    if outdir is None or label is None:
        raise ConfigError("output requires [io] outdir and label (or --outdir/--label)")
    run_dir = Path(outdir) / label
    run_dir.mkdir(parents=True, exist_ok=True)
    return ArtifactWriter(run_dir)


def _sweep_csv(points) -> str:
    header = ("lambda,norm_u_coupling,seminorm_u,seminorm_v,mixed,"
              "max_u,max_v,A_k,converged")
    lines = [header]
    for pt in points:
        lines.append(
            f"{pt.lam!r},{pt.norm_u_coupling!r},{pt.seminorm_u!r},"
            f"{pt.seminorm_v!r},{pt.mixed!r},{pt.max_u!r},{pt.max_v!r},"
            f"{pt.A_k!r},{int(pt.converged)}"
        )
    return "\r\n".join(lines) + "\r\n"


def _solve_report(result, config: dict) -> dict:
    return {
        "A_k": result.A_k,
        "converged": result.converged,
        "possibly_degenerate": result.possibly_degenerate,
        "outer_iterations": result.outer_iterations,
        "inner_iterations": result.inner_iterations,
        "history": [asdict(rec) for rec in result.outer_history],
        "config": config,
    }


def cmd_zones(config: dict, args: argparse.Namespace) -> int:
    _require(config, "problem")
    params = _build_params(config)
    verdict = admissibility_check(params)
    rows: list[tuple[str, Any]] = [
        ("p_star", params.p_star),
        ("m_conjugate", params.m / (params.m - 1.0)),
        ("coupling_conjugate", params.coupling_sum / (params.coupling_sum - 1.0)),
        ("eta_threshold_q", eta_threshold_exponent(params.p, params.r, params.theta)),
        ("admissible", verdict.admissible),
    ]
    if verdict.admissible:
        report = zone_classify(params)
        rows += [
            ("sigma", sigma_exponent(params)),
            ("m_star_p", report.m_star_p),
            ("m_double_star_p", report.m_double_star_p),
            ("zone", report.zone.value),
            ("v_sobolev_regularized", report.v_sobolev),
            ("t_v", report.t_v),
            ("near_thresholds", ";".join(report.near_thresholds)),
        ]
    else:
        rows += [("failed_conditions",
                  ";".join(c.name for c in verdict.failures()))]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    if "io" in config or (args.outdir and args.label):
        writer = _writer(config, args)
        csv = "quantity,value\r\n" + "".join(f"{n},{v}\r\n" for n, v in rows)
        writer.write("zones.csv", csv)
        writer.finish(writer.run_dir.name, config, config.get("seed"))
    return EXIT_OK if verdict.admissible else EXIT_INADMISSIBLE


def cmd_check_nl(config: dict, args: argparse.Namespace) -> int:
    _require(config, "nonlinearity")
    if "seed" not in config:
        raise ConfigError("check-nl requires a top-level seed")
    spec = _build_spec(config)
    rng = np.random.default_rng(int(config["seed"]))
    report = verify_growth_bounds(spec, rng)
    payload = {
        "n_samples": report.n_samples,
        "all_passed": report.all_passed,
        "checks": [asdict(c) for c in report.checks],
        "seed": config["seed"],
    }
    writer = _writer(config, args)
    writer.write_json("report.json", payload)
    writer.finish(writer.run_dir.name, config, config.get("seed"))
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        print(f"{status}  {check.name}  worst_ratio={check.worst_ratio!r}")
    return EXIT_OK if report.all_passed else EXIT_HYPOTHESIS


def cmd_solve(config: dict, args: argparse.Namespace) -> int:
    _require(config, "problem", "nonlinearity", "grid")
    params = _build_params(config)
    if not admissibility_check(params).admissible:
        print("inadmissible parameters", file=sys.stderr)
        return EXIT_INADMISSIBLE
    spec = _build_spec(config)
    grid = _build_grid(config)
    solve_cfg = _build_solve_config(config)
    f = _datum_builder(config)(grid)
    result = picard_system_solve(f, spec, params, solve_cfg)
    writer = _writer(config, args)
    writer.write("fields/u.csv", result.u.to_csv())
    writer.write("fields/v.csv", result.v.to_csv())
    writer.write("fields/f.csv", f.to_csv())
    writer.write_json("report.json", _solve_report(result, config))
    writer.finish(writer.run_dir.name, config, config.get("seed"))
    print(f"converged={result.converged} A_k={result.A_k!r} "
          f"outer={result.outer_iterations}")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_sweep(config: dict, args: argparse.Namespace) -> int:
    _require(config, "problem", "grid", "sweep")
    params = _build_params(config)
    if not admissibility_check(params).admissible:
        print("inadmissible parameters", file=sys.stderr)
        return EXIT_INADMISSIBLE
    grid = _build_grid(config)
    solve_cfg = _build_solve_config(config)
    section = config["sweep"]
    mode = section.get("mode", "apriori")
    lambdas = section.get("lambdas")
    if not lambdas:
        raise ConfigError("[sweep].lambdas is required")
    slack = float(section.get("slack", 0.1))
    f0 = _datum_builder(config)(grid)
    if mode == "apriori":
        _require(config, "nonlinearity")
        spec = _build_spec(config)
        report = apriori_scaling_sweep(f0, lambdas, spec, params, solve_cfg, slack=slack)
        applicable = True
    elif mode == "linf":
        t = section.get("t")
        if t is None:
            raise ConfigError("[sweep].t is required in linf mode")
        report, applicable = linf_scaling_probe(
            f0, lambdas, float(t), params.p, params.N, solve_cfg, slack=slack
        )
    else:
        raise ConfigError(f"[sweep].mode must be apriori or linf, got {mode!r}")
    writer = _writer(config, args)
    writer.write("sweep.csv", _sweep_csv(report.points))
    writer.write_json("report.json", {
        "mode": mode,
        "applicable": applicable,
        "verdicts": [asdict(v) for v in report.verdicts],
        "config": config,
    })
    writer.finish(writer.run_dir.name, config, config.get("seed"))
    for v in report.verdicts:
        print(f"{v.grade}  {v.name}  slope={v.slope!r} target<={v.target + v.slack!r}")
    if not applicable:
        print("NotApplicable: t <= N/p")
    ok = applicable and report.all_passed and all(pt.converged for pt in report.points)
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


def cmd_continuation(config: dict, args: argparse.Namespace) -> int:
    _require(config, "problem", "nonlinearity", "grid", "continuation")
    params = _build_params(config)
    if not admissibility_check(params).admissible:
        print("inadmissible parameters", file=sys.stderr)
        return EXIT_INADMISSIBLE
    spec = _build_spec(config)
    grid = _build_grid(config)
    solve_cfg = _build_solve_config(config)
    schedule = config["continuation"].get("k_schedule")
    if not schedule:
        raise ConfigError("[continuation].k_schedule is required")
    f = _datum_builder(config)(grid)
    results, cauchy = k_continuation(f, spec, params, schedule, solve_cfg)
    writer = _writer(config, args)
    header = "k_from,k_to,grad_diff_u,grad_diff_v,A_from,A_to"
    rows = [header] + [
        f"{c.k_from!r},{c.k_to!r},{c.grad_diff_u!r},{c.grad_diff_v!r},"
        f"{c.A_from!r},{c.A_to!r}"
        for c in cauchy
    ]
    writer.write("sweep.csv", "\r\n".join(rows) + "\r\n")
    for k, result in zip(schedule, results):
        writer.write(f"fields/u_k{k}.csv", result.u.to_csv())
        writer.write(f"fields/v_k{k}.csv", result.v.to_csv())
    writer.write_json("report.json", {
        "k_schedule": list(schedule),
        "A_k": [r.A_k for r in results],
        "converged": [r.converged for r in results],
        "cauchy": [asdict(c) for c in cauchy],
        "config": config,
    })
    writer.finish(writer.run_dir.name, config, config.get("seed"))
    for c in cauchy:
        print(f"k {c.k_from!r}->{c.k_to!r}  |grad du|_p={c.grad_diff_u!r}")
    return EXIT_OK if all(r.converged for r in results) else EXIT_NO_CONVERGENCE


def cmd_probe(config: dict, args: argparse.Namespace) -> int:
    _require(config, "problem", "nonlinearity", "probe")
    params = _build_params(config)
    if not admissibility_check(params).admissible:
        print("inadmissible parameters", file=sys.stderr)
        return EXIT_INADMISSIBLE
    spec = _build_spec(config)
    solve_cfg = _build_solve_config(config)
    section = config["probe"]
    mode = section.get("mode")
    writer = _writer(config, args)
    if mode == "nontriviality":
        levels = section.get("levels")
        if not levels:
            raise ConfigError("[probe].levels is required in nontriviality mode")
        grid_cfg = config.get("grid", {})
        report = nontriviality_check(
            _datum_builder(config), spec, params, levels, solve_cfg,
            d=int(grid_cfg.get("d", 1)),
            floor=float(section.get("floor", 1e-12)),
        )
        writer.write_json("report.json", {**asdict(report), "config": config})
        writer.finish(writer.run_dir.name, config, config.get("seed"))
        print(f"{report.verdict}  l1_u={list(report.l1_norms_u)} "
              f"l1_v={list(report.l1_norms_v)}")
        return EXIT_OK
    if mode == "regularity":
        _require(config, "grid")
        grid = _build_grid(config)
        q_grid = section.get("q_grid")
        if not q_grid:
            raise ConfigError("[probe].q_grid is required in regularity mode")
        f = _datum_builder(config)(grid)
        result = picard_system_solve(f, spec, params, solve_cfg)
        report = regularity_probe(result.u, q_grid)
        writer.write("fields/u.csv", result.u.to_csv())
        writer.write_json("report.json", {**asdict(report), "config": config})
        writer.finish(writer.run_dir.name, config, config.get("seed"))
        print(f"{report.verdict}  tail_exponent={report.tail_exponent!r}")
        return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE
    raise ConfigError(f"[probe].mode must be nontriviality or regularity, got {mode!r}")


_COMMANDS = {
    "zones": cmd_zones,
    "check-nl": cmd_check_nl,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "continuation": cmd_continuation,
    "probe": cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kmslab",
        description="Coupled nonlocal p-Laplacian system: solves, sweeps and probes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, required=True)
        cmd.add_argument("--outdir", type=Path, default=None)
        cmd.add_argument("--label", type=str, default=None)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](config, args)
    except (ConfigError, InsufficientSweepError, ExponentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("usage: kmslab <command> --config <path> [--outdir DIR] [--label NAME]",
              file=sys.stderr)
        return EXIT_CONFIG


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
