"""Command line runner for fixtures, single computations and verification suites."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import fixtures as fx
from .kernels import BACKEND

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
OUTPUT_ENV = "FIBERLAB_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run description; unknown keys are rejected."""

    suite: str
    seed: int | None = None
    fixture: str | None = None
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None

    RANDOMIZED = frozenset({
        "exact-ot", "scalar-product", "gamma-orthogonality", "projection", "doubling",
        "chebyshev", "maxmin", "appendix",
    })

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        from .suites import SUITES

        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "suite" not in raw:
            raise ConfigError("config needs a suite")
        cfg = cls(**raw)
        if cfg.suite not in SUITES:
            raise ConfigError(f"unknown suite {cfg.suite!r}")
        if cfg.suite in cls.RANDOMIZED and cfg.seed is None:
            raise ConfigError(f"suite {cfg.suite!r} is randomized and needs a seed")
        if not isinstance(cfg.params, dict) or not isinstance(cfg.tolerances, dict):
            raise ConfigError("params and tolerances must be objects")
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _output_dir(explicit: str | None) -> Path:
    path = Path(os.environ.get(OUTPUT_ENV) or explicit or "fiberlab-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _versions() -> dict:
    import scipy

    return {
        "fiberlab": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def run(config: ExperimentConfig) -> int:
    """Run one suite, write its tables and a manifest; return the exit code."""
    from .suites import SuiteContext, run_suite

    out = _output_dir(config.output_dir)
    ctx = SuiteContext(seed=config.seed or 0, params=config.params, tolerances=config.tolerances)
    report = run_suite(config.suite, ctx)
    for name, text in report.tables.items():
        (out / f"{config.suite}-{name}.csv").write_text(text)
    manifest = {
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "versions": _versions(),
        "passed": report.passed,
        "checks": [
            {"name": c.name, "value": _fmt(c.value), "bound": _fmt(c.bound), "relation": c.relation, "passed": c.passed}
            for c in report.checks
        ],
    }
    (out / f"{config.suite}-manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for c in report.checks:
        print(c.line())
    return EXIT_OK if report.passed else EXIT_FAIL


# --- subcommands --------------------------------------------------------------------


GENERATORS = {
    "segment": lambda p: fx.segment(int(p.get("n", 200))).mu,
    "parabola": lambda p: fx.parabola(int(p.get("n", 4010))).mu,
    "absolute-value": lambda p: fx.absolute_value(int(p.get("n", 201))).mu,
    "decomposition": lambda p: fx.decomposition_mixture(int(p.get("n_curve", 100))).mu,
    "square": lambda p: fx.square_boundary(int(p.get("n", 128)))[0],
}


def cmd_gen(args) -> int:
    params = json.loads(args.params) if args.params else {}
    if args.fixture not in GENERATORS:
        raise ConfigError(f"unknown fixture {args.fixture!r}; choose from {sorted(GENERATORS)}")
    mu = GENERATORS[args.fixture](params)
    text = json.dumps(mu.to_dict())
    _emit(args.out, text + "\n")
    return EXIT_OK


def _emit(path: str | None, text: str) -> None:
    if path:
        target = Path(path)
        if not target.is_absolute() and os.environ.get(OUTPUT_ENV):
            target = _output_dir(None) / target
        target.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_ot(args) -> int:
    from .measures import from_descriptor
    from .ot_core import solve_ot

    plan, cost = solve_ot(from_descriptor(_load_json(args.source)), from_descriptor(_load_json(args.target)))
    _emit(args.out, plan.to_csv())
    print(f"cost {_fmt(cost)}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def _two_fields(args):
    from .fields import field_from_dict

    return field_from_dict(_load_json(args.left)), field_from_dict(_load_json(args.right))


def cmd_dot(args) -> int:
    from .fiber_geometry import metric_dot

    print(_fmt(metric_dot(*_two_fields(args))))
    return EXIT_OK


def cmd_wmu(args) -> int:
    from .fiber_geometry import w_mu

    print(_fmt(w_mu(*_two_fields(args))[0]))
    return EXIT_OK


def cmd_project(args) -> int:
    from .cones import project_onto_section_cone, section_from_dict
    from .fields import field_from_dict

    xi = field_from_dict(_load_json(args.field))
    D = section_from_dict(_load_json(args.section))
    proj, resid = project_onto_section_cone(xi, D)
    out = _output_dir(args.output_dir)
    (out / "projection.csv").write_text(proj.to_csv())
    (out / "residual.csv").write_text(resid.to_csv())
    print(f"norm_sq {_fmt(xi.norm_sq())} projected {_fmt(proj.norm_sq())} residual {_fmt(resid.norm_sq())}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    from .cones import section_from_dict
    from .decomposition import decompose

    D = section_from_dict(_load_json(args.section))
    res = decompose(D.base, D, kind=args.kind)
    _emit(args.out, res.to_csv(D))
    print(" ".join(_fmt(m) for m in res.masses), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_blowup(args) -> int:
    from .decomposition import blowup_sequence

    par = fx.parabola(args.n)
    x = par.chart.evaluate([args.t])
    h = [2.0**-k for k in range(1, args.levels + 1)]
    res = blowup_sequence(par.mu, x, h, args.R)
    P = np.array([[1.0, 2 * args.t]]) / np.hypot(1.0, 2 * args.t)
    _emit(args.out, res.curve_csv(P, args.eps))
    return EXIT_OK


def cmd_verify(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    raw.setdefault("suite", args.suite)
    if raw["suite"] != args.suite:
        raise ConfigError("suite in config differs from the command line")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    return run(ExperimentConfig.from_dict(raw))


def cmd_plot(args) -> int:
    from .plotting import plot_csv

    target = plot_csv(args.csv, args.kind, args.out)
    print(target)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .suites import SUITES

    p = argparse.ArgumentParser(prog="fiberlab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a fixture measure as JSON")
    g.add_argument("fixture")
    g.add_argument("--params", help="JSON object of generator parameters")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    o = sub.add_parser("ot", help="optimal plan between two measure descriptors")
    o.add_argument("source")
    o.add_argument("target")
    o.add_argument("--out")
    o.set_defaults(func=cmd_ot)

    for name, func, help_ in (("dot", cmd_dot, "metric scalar product"), ("wmu", cmd_wmu, "fiberwise distance")):
        s = sub.add_parser(name, help=f"{help_} of two field descriptors")
        s.add_argument("left")
        s.add_argument("right")
        s.set_defaults(func=func)

    pr = sub.add_parser("project", help="project a centred field onto a section cone")
    pr.add_argument("field")
    pr.add_argument("section")
    pr.add_argument("--output-dir")
    pr.set_defaults(func=cmd_project)

    de = sub.add_parser("decompose", help="classify base points by section dimension")
    de.add_argument("section")
    de.add_argument("--kind", choices=["sol", "tan"], default="sol")
    de.add_argument("--out")
    de.set_defaults(func=cmd_decompose)

    bl = sub.add_parser("blowup", help="tube-mass curve of parabola blow-ups")
    bl.add_argument("--t", type=float, default=0.3)
    bl.add_argument("--n", type=int, default=4010)
    bl.add_argument("--levels", type=int, default=8)
    bl.add_argument("--eps", type=float, default=0.05)
    bl.add_argument("--R", type=float, default=1.0)
    bl.add_argument("--out")
    bl.set_defaults(func=cmd_blowup)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.add_argument("--config", help="JSON experiment config")
    v.add_argument("--seed", type=int)
    v.add_argument("--output-dir")
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="render a report CSV")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=["section", "curve"], required=True)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
