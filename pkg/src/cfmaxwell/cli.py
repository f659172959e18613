"""Command-line runner: single runs, convergence sweeps and self-checks.

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment.  Recognised keys and defaults::

    problem         circle        circle | star5 | star3 | nonsmooth | smooth
    order           4             2 | 4
    degree          3             correction polynomial degree
    h               1/20          one value or a comma-separated list
    cfl             0.5           dt = cfl * h
    T               0.5           final time
    output_dir      out
    snapshot_times                comma-separated times (run only)
    corrections     true
    divergence      true

``CFMAXWELL_OUTPUT_DIR`` overrides ``output_dir``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cfm import Physics
from .diagnostics import (
    COLUMNS,
    ConvergenceReport,
    closed_form_eigenvalues,
    det_residual,
    growth_check,
    row_from_result,
    symbol_matrix,
)
from .errors import CFMError, ConfigError, UnknownProblem
from .fdtd import SchemeConfig, Simulation
from .grid import FAMILIES, FieldSet, GridSpec, to_public_index
from .poly_basis import MAX_DEGREE, divfree_basis
from .problems import PROBLEM_IDS, make_problem

log = logging.getLogger("cfmaxwell")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
ENV_OUTPUT = "CFMAXWELL_OUTPUT_DIR"


@dataclass
class RunConfig:
    problem: str = "circle"
    order: int = 4
    degree: int = 3
    h: list[float] = field(default_factory=lambda: [1 / 20])
    cfl: float = 0.5
    T: float = 0.5
    output_dir: str = "out"
    snapshot_times: list[float] = field(default_factory=list)
    corrections: bool = True
    divergence: bool = True


def _num(text: str) -> float:
    return float(Fraction(text.strip())) if "/" in text else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[float]:
    return [_num(p) for p in text.split(",") if p.strip()]


_PARSERS = {
    "problem": str.strip,
    "order": int,
    "degree": int,
    "h": _list,
    "cfl": _num,
    "T": _num,
    "output_dir": str.strip,
    "snapshot_times": _list,
    "corrections": _bool,
    "divergence": _bool,
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        try:
            setattr(cfg, key, _PARSERS[key](value))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {exc}") from None
    _validate(cfg, source)
    return cfg


def _validate(cfg: RunConfig, source: str) -> None:
    if cfg.problem not in PROBLEM_IDS:
        raise ConfigError(f"{source}: field 'problem': unknown id '{cfg.problem}'")
    if cfg.order not in (2, 4):
        raise ConfigError(f"{source}: field 'order' must be 2 or 4")
    if not 0 <= cfg.degree <= MAX_DEGREE:
        raise ConfigError(f"{source}: field 'degree' must be in 0..{MAX_DEGREE}")
    if not cfg.h or any(h <= 0 for h in cfg.h):
        raise ConfigError(f"{source}: field 'h' needs positive values")
    for h in cfg.h:
        n = round(1.0 / h)
        if abs(n * h - 1.0) > 1e-9:
            raise ConfigError(f"{source}: field 'h': 1/h must be an integer, got h={h}")
    if cfg.cfl <= 0 or cfg.T < 0:
        raise ConfigError(f"{source}: fields 'cfl' and 'T' must be positive")


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))


def output_dir(cfg: RunConfig) -> Path:
    d = Path(os.environ.get(ENV_OUTPUT) or cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- snapshots --------------------------------------------------------------

def write_snapshot(fields: FieldSet, spec: GridSpec, path: str | os.PathLike, problem: str = "", scheme: str = "") -> None:
    """Plain-text dump of every node; values round-trip exactly."""
    with open(path, "w") as fh:
        fh.write(f"# h={spec.h!r} t={fields.t!r} problem={problem} scheme={scheme}\n")
        fh.write("# family i j x y value\n")
        for fam in ("Ez", "Hx", "Hy"):
            X, Y = spec.coords(fam)
            A = fields[fam]
            for a in range(spec.nx):
                for b in range(spec.ny):
                    i, j = to_public_index(fam, a, b)
                    fh.write(f"{fam} {i} {j} {X[a, b]:.17g} {Y[a, b]:.17g} {A[a, b]:.17g}\n")


def read_snapshot(path: str | os.PathLike, spec: GridSpec) -> FieldSet:
    out = FieldSet.zeros(spec)
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# h="):
                    out.t = float(line.split("t=")[1].split()[0])
                continue
            fam, i, j, _, _, v = line.split()
            bi, bj = {"Hx": (1, 0), "Hy": (0, 1), "Ez": (1, 1)}[fam]
            out[fam][int(i) - bi, int(j) - bj] = float(v)
    return out


# -- CSV --------------------------------------------------------------------

def write_report(report: ConvergenceReport, path: Path, failures: dict[float, str] | None = None) -> None:
    failures = failures or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "dt", *COLUMNS])
        for h, dt, row in zip(report.h, report.dt, report.rows):
            w.writerow([repr(h), repr(dt), *(repr(float(row[c])) for c in COLUMNS)])
        for h, msg in failures.items():
            w.writerow([repr(h), "nan", *(["nan"] * len(COLUMNS))])
            fh.write(f"# failed h={h!r}: {msg}\n")
        fh.write("# orders (least squares over h)\n")
        if len(report.h) >= 2:
            for c, v in report.orders().items():
                fh.write(f"# {c} {v:.6f}\n")


def _simulation(cfg: RunConfig, h: float) -> Simulation:
    problem = make_problem(cfg.problem)
    scheme = SchemeConfig(order=cfg.order, cfl=cfg.cfl, physics=Physics(problem.mu, problem.eps, problem.sigma), k=cfg.degree, corrections=cfg.corrections)
    return Simulation(problem, GridSpec.unit_square(round(1.0 / h)), scheme, divergence=cfg.divergence)


def run_single(cfg: RunConfig, h: float | None = None, snapshots: bool = True):
    h = cfg.h[0] if h is None else h
    sim = _simulation(cfg, h)
    out = output_dir(cfg)
    tag = f"{cfg.problem}_o{cfg.order}_n{sim.spec.nx}"

    def snap(fs: FieldSet):
        write_snapshot(fs, sim.spec, out / f"{tag}_t{fs.t:.6f}.txt", cfg.problem, f"order{cfg.order}")

    res = sim.run(cfg.T, snap if snapshots else None, cfg.snapshot_times if snapshots else ())
    return sim, res


def run_convergence(cfg: RunConfig) -> tuple[ConvergenceReport, dict[float, str]]:
    report = ConvergenceReport()
    failures: dict[float, str] = {}
    for h in sorted(cfg.h, reverse=True):
        try:
            _, res = run_single(cfg, h, snapshots=False)
        except CFMError as exc:
            log.error("h=%s failed: %s", h, exc)
            failures[h] = f"{type(exc).__name__}: {exc}"
            continue
        report.add(h, res.dt, row_from_result(res))
        log.info("h=%s done", h)
    return report, failures


# -- self check ---------------------------------------------------------------

def self_check(draws: int = 1000, seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    worst_growth, worst_det = -np.inf, 0.0
    for _ in range(draws):
        k = rng.normal(size=3) * rng.uniform(0, 10)
        mu, eps = rng.uniform(0.1, 10, size=2)
        sigma = rng.uniform(0, 10)
        A = symbol_matrix(k, mu, eps, sigma)
        worst_growth = max(worst_growth, growth_check(A))
        for lam in closed_form_eigenvalues(k, mu, eps, sigma):
            worst_det = max(worst_det, det_residual(A, lam))
    dims = [divfree_basis(k).size == (k + 1) * (k + 4) // 2 for k in range(MAX_DEGREE + 1)]
    return [
        ("no growth", worst_growth <= 1e-10, f"max Re(lambda) = {worst_growth:.3e}"),
        ("closed-form eigenvalues", worst_det <= 1e-10, f"max det residual = {worst_det:.3e}"),
        ("basis dimensions", all(dims), f"k = 0..{MAX_DEGREE}"),
    ]


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfmaxwell", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "one simulation at the first h"), ("sweep", "convergence sweep over all h")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True)
    sub.add_parser("check", help="eigenvalue and basis self-tests")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "check":
        ok = True
        for name, passed, detail in self_check():
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
            ok &= passed
        return EXIT_OK if ok else EXIT_SOLVER
    try:
        cfg = load_config(args.config)
    except (ConfigError, UnknownProblem) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = output_dir(cfg)
    if args.command == "run":
        try:
            sim, res = run_single(cfg)
        except CFMError as exc:
            print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        rep = ConvergenceReport()
        rep.add(cfg.h[0], res.dt, row_from_result(res))
        path = out / f"{cfg.problem}_o{cfg.order}_run.csv"
        write_report(rep, path)
        for fam in FAMILIES:
            li, l1 = res.errors[fam]
            print(f"{fam}: Linf={li:.6e} L1={l1:.6e}")
        print(f"divH: Linf={res.div_linf:.6e} L1={res.div_l1:.6e}  ({res.steps} steps, {res.n_patches} patches)")
        print(f"wrote {path}")
        return EXIT_OK
    report, failures = run_convergence(cfg)
    path = out / f"{cfg.problem}_o{cfg.order}_sweep.csv"
    write_report(report, path, failures)
    for h, row in zip(report.h, report.rows):
        print(f"h={h:.6g} " + " ".join(f"{c}={row[c]:.3e}" for c in COLUMNS))
    if len(report.h) >= 2:
        print("orders: " + " ".join(f"{c}={v:.2f}" for c, v in report.orders().items()))
    print(f"wrote {path}")
    return EXIT_SOLVER if failures else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
