"""Configuration-driven experiment runner: refinement sweeps and field output.

Run configurations are INI files with a single ``[run]`` section, for example::

    [run]
    example = 1
    degree = 0
    meshes = 10x10, 16x16, 24x24
    alpha = 24 identity

Recognised keys and their defaults are the fields of :class:`RunConfig`.
``alpha`` is ``<c> identity``, ``<c> ones`` or four comma-separated entries
in row-major order; ``meshes`` entries are ``NX`` or ``NXxNY``.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .checks import hessian_sign_census
from .mesh import build_mesh
from .numop import NumOpConfig
from .problems import PdeProblem, make_example
from .solvers import (
    FixedPointConfig,
    NewtonConfig,
    SolverError,
    fixed_point_solve,
    newton_reduced,
    poisson_warm_start,
)
from .space import DgFunction, DgSpace
from .system import DiscreteSystem
from .timestep import SCHEMES, TimeGrid, solve_parabolic

log = logging.getLogger(__name__)

TABLE_HEADER = ("h", "linf", "linf_order", "l2", "l2_order", "iters", "seconds")
FIELD_FORMATS = ("csv-grid", "vtk-legacy")


class ConfigError(ValueError):
    pass


def parse_alpha(spec: str) -> np.ndarray:
    """``"24 identity"``, ``"-12 ones"`` or ``"a11, a12, a21, a22"``."""
    words = spec.replace("*", " ").split()
    if len(words) == 2 and words[1].lower() in ("i", "identity", "ones", "1"):
        c = float(words[0])
        return c * (np.eye(2) if words[1].lower() in ("i", "identity") else np.ones((2, 2)))
    parts = [p for p in spec.replace(",", " ").split() if p]
    if len(parts) == 4:
        return np.array([float(p) for p in parts]).reshape(2, 2)
    raise ConfigError(f"cannot parse alpha spec {spec!r}")


def parse_meshes(spec: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in spec.split(","):
        item = item.strip().lower()
        if not item:
            continue
        nx, _, ny = item.partition("x")
        out.append((int(nx), int(ny or nx)))
    if not out:
        raise ConfigError("empty mesh list")
    return tuple(out)


def _floats(spec: str) -> tuple[float, ...]:
    return tuple(float(s) for s in spec.split(",") if s.strip())


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    example: int = 1
    degree: int = 0
    meshes: tuple[tuple[int, int], ...] = ((8, 8),)
    alpha: np.ndarray = field(default_factory=lambda: np.eye(2))
    beta: float = 0.0
    # which quantity the rows vary: "space" (meshes), "time" (dts) or "gamma" (alpha = gamma * ones)
    sweep: str = "space"
    h_measure: str = "diameter"  # or "hx" when only the x-spacing is refined
    solver: str = "newton"  # or "fixedpoint"
    globalization: str = "linesearch"
    initial_guess: str = "zero"  # or "poisson"
    regularize_singular: bool = False
    max_iters: int = 50
    gamma: float = 1.0  # splitting parameter of the fixed-point solver
    anderson: int = 0
    max_outer: int = 5000
    gammas: tuple[float, ...] = ()
    scheme: str = "backward-euler"
    final_time: float = 1.0
    dts: tuple[float, ...] = (0.1,)
    report_census: bool = False
    out_dir: str | None = None
    field_format: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sweep not in ("space", "time", "gamma"):
            raise ConfigError(f"unknown sweep {self.sweep!r}")
        if self.solver not in ("newton", "fixedpoint"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.initial_guess not in ("zero", "poisson"):
            raise ConfigError(f"unknown initial guess {self.initial_guess!r}")
        if self.h_measure not in ("diameter", "hx"):
            raise ConfigError(f"unknown h measure {self.h_measure!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.field_format is not None and self.field_format not in FIELD_FORMATS:
            raise ConfigError(f"unknown field format {self.field_format!r}")
        if self.sweep == "gamma" and not self.gammas:
            raise ConfigError("a gamma sweep needs a gammas list")
        if self.sweep == "space" and len(self.meshes) > 1:
            hs = [self._h(m) for m in self.meshes]
            if any(b >= a for a, b in zip(hs, hs[1:])):
                raise ConfigError("refinement list must be strictly decreasing in h")
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).reshape(2, 2))

    def _h(self, mesh: tuple[int, int]) -> float:
        dom = make_example(self.example).domain
        hx = (dom.x_hi - dom.x_lo) / mesh[0]
        hy = (dom.y_hi - dom.y_lo) / mesh[1]
        return hx if self.h_measure == "hx" else math.hypot(hx, hy)

    @property
    def numop(self) -> NumOpConfig:
        return NumOpConfig(self.alpha, self.beta * np.ones(2))


_CONVERTERS = {
    "meshes": parse_meshes,
    "alpha": parse_alpha,
    "gammas": _floats,
    "dts": _floats,
}


def config_from_mapping(values: dict[str, str], name: str = "run") -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    kwargs: dict = {"name": name}
    for key, raw in values.items():
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        raw = raw.strip()
        if key in _CONVERTERS:
            kwargs[key] = _CONVERTERS[key](raw)
            continue
        default = known[key].default
        if isinstance(default, bool):
            kwargs[key] = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(default, int):
            kwargs[key] = int(raw)
        elif isinstance(default, float):
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw or None
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if "run" not in parser:
        raise ConfigError(f"{path}: missing [run] section")
    return config_from_mapping(dict(parser["run"]), name=path.stem)


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("nsldg.presets").iterdir() if p.name.endswith(".ini"))


def load_preset(name: str) -> RunConfig:
    res = resources.files("nsldg.presets") / f"{name}.ini"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    with resources.as_file(res) as path:
        return load_config(path)


# -- results ------------------------------------------------------------------------


@dataclass
class ConvergenceRow:
    h: float
    linf: float
    l2: float
    iters: int
    seconds: float
    converged: bool
    linf_order: float | None = None
    l2_order: float | None = None
    message: str = ""
    census: tuple[float, float] | None = None  # (negative, positive) fractions of D~^2 diagonals


@dataclass
class ExperimentResult:
    config: RunConfig
    rows: list[ConvergenceRow]
    fields: list[tuple[str, DgFunction]] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    @property
    def parameter(self) -> str:
        return {"space": "h", "time": "dt", "gamma": "gamma"}[self.config.sweep]


def observed_order(e0: float, e1: float, h0: float, h1: float) -> float:
    return math.log(e0 / e1) / math.log(h0 / h1)


def fill_orders(rows: list[ConvergenceRow]) -> None:
    """Orders between consecutive converged rows; blank in the first row."""
    for prev, row in zip(rows, rows[1:]):
        if prev.converged and row.converged and row.h != prev.h:
            row.linf_order = observed_order(prev.linf, row.linf, prev.h, row.h)
            row.l2_order = observed_order(prev.l2, row.l2, prev.h, row.h)


def _solve_elliptic(cfg: RunConfig, problem: PdeProblem, space: DgSpace, numop: NumOpConfig):
    system = DiscreteSystem(problem, space, numop)
    u0 = poisson_warm_start(system) if cfg.initial_guess == "poisson" else None
    if cfg.solver == "newton":
        ncfg = NewtonConfig(max_iters=cfg.max_iters, globalization=cfg.globalization,
                            regularize_singular=cfg.regularize_singular)
        u, rep = newton_reduced(problem, space, numop, ncfg, u0=u0, system=system)
    else:
        fcfg = FixedPointConfig(gamma=cfg.gamma, anderson=cfg.anderson, max_outer=cfg.max_outer)
        u, rep = fixed_point_solve(problem, space, numop, fcfg, u0=u0, system=system)
    return u, rep.iterations, rep.converged, rep.message, system


def _run_one(cfg: RunConfig, problem: PdeProblem, mesh_n: tuple[int, int], numop: NumOpConfig, dt: float | None,
             param: float) -> tuple[ConvergenceRow, DgFunction | None]:
    space = DgSpace(build_mesh(problem.domain, *mesh_n), cfg.degree)
    start = time.perf_counter()
    u = None
    census = None
    try:
        if problem.parabolic:
            steps = max(1, round(cfg.final_time / dt))
            grid = TimeGrid(cfg.final_time, steps)
            ncfg = NewtonConfig(max_iters=cfg.max_iters, globalization=cfg.globalization,
                                regularize_singular=cfg.regularize_singular)
            run = solve_parabolic(problem, space, numop, grid, cfg.scheme, ncfg)
            u, iters, ok, msg = run.u, run.newton_iterations, True, ""
            t_end = cfg.final_time
        else:
            u, iters, ok, msg, system = _solve_elliptic(cfg, problem, space, numop)
            t_end = 0.0
            if cfg.report_census:
                census = hessian_sign_census(system, u.coeffs)
    except SolverError as exc:
        iters, ok, msg, t_end = 0, False, str(exc), cfg.final_time if problem.parabolic else 0.0
    seconds = time.perf_counter() - start
    if u is not None and problem.exact is not None:
        linf, l2 = space.error_norms(u, problem.exact_at(t_end))
    else:
        linf = l2 = float("nan")
    if not ok:
        log.warning("%s: row %s failed: %s", cfg.name, param, msg)
    return ConvergenceRow(param, linf, l2, iters, seconds, ok, message=msg, census=census), u


def run_experiment(cfg: RunConfig) -> ExperimentResult:
    """Run every row of the sweep; solver failures are recorded and the sweep continues."""
    problem = make_example(cfg.example)
    rows: list[ConvergenceRow] = []
    dumps: list[tuple[str, DgFunction]] = []
    if cfg.sweep == "space":
        plan = [(m, cfg.numop, cfg.dts[0], cfg._h(m), f"{m[0]}x{m[1]}") for m in cfg.meshes]
    elif cfg.sweep == "time":
        m = cfg.meshes[0]
        plan = [(m, cfg.numop, dt, dt, f"dt{dt:g}") for dt in cfg.dts]
    else:
        m = cfg.meshes[0]
        shape = cfg.alpha / cfg.alpha[0, 0] if cfg.alpha[0, 0] != 0 else np.ones((2, 2))
        plan = [(m, NumOpConfig(g * shape, cfg.beta * np.ones(2)), cfg.dts[0], g, f"gamma{g:g}") for g in cfg.gammas]
    for mesh_n, numop, dt, param, label in plan:
        row, u = _run_one(cfg, problem, mesh_n, numop, dt, param)
        rows.append(row)
        log.info("%s %s: linf %.3e l2 %.3e iters %d converged %s", cfg.name, label, row.linf, row.l2, row.iters,
                 row.converged)
        if u is not None:
            dumps.append((label, u))
    if cfg.sweep != "gamma":
        fill_orders(rows)
    result = ExperimentResult(cfg, rows, dumps)
    if cfg.out_dir:
        write_outputs(result, Path(cfg.out_dir))
    return result


# -- output -------------------------------------------------------------------------


def _fmt(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.6e}"


def write_table(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow((result.parameter,) + TABLE_HEADER[1:])
            for r in result.rows:
                w.writerow([_fmt(r.h), _fmt(r.linf), _fmt(r.linf_order), _fmt(r.l2), _fmt(r.l2_order),
                            r.iters, f"{r.seconds:.3f}"])
    except OSError as exc:
        raise OSError(f"cannot write table {path}: {exc}") from None
    return path


def format_table(result: ExperimentResult) -> str:
    head = f"{result.parameter:>10} {'linf':>10} {'order':>6} {'l2':>10} {'order':>6} {'iters':>6} {'sec':>7}  status"
    lines = [head]
    for r in result.rows:
        o1 = f"{r.linf_order:6.2f}" if r.linf_order is not None else " " * 6
        o2 = f"{r.l2_order:6.2f}" if r.l2_order is not None else " " * 6
        status = "ok" if r.converged else f"FAILED ({r.message})"
        if r.census is not None:
            status += f"  census neg {r.census[0]:.3f} pos {r.census[1]:.3f}"
        lines.append(f"{r.h:10.4g} {r.linf:10.3e} {o1} {r.l2:10.3e} {o2} {r.iters:6d} {r.seconds:7.2f}  {status}")
    return "\n".join(lines)


def write_outputs(result: ExperimentResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_table(result, out_dir / f"{result.config.name}.csv")
    fmt = result.config.field_format
    if fmt:
        ext = "csv" if fmt == "csv-grid" else "vtk"
        for label, u in result.fields:
            emit_field(u, out_dir / f"{result.config.name}_{label}.{ext}", fmt)


def _lattice_grid(u: DgFunction, n: int | None = None):
    """Per-cell sample lattices stitched into global arrays of shape ``(ny*n, nx*n)``."""
    space = u.space
    mesh = space.mesh
    Bs, xs, ys = space.sample_lattice(n)
    n = int(round(math.sqrt(Bs.shape[0])))
    vals = u.coeffs.reshape(mesh.ncells, space.nloc) @ Bs.T

    def stitch(a):
        return a.reshape(mesh.ny, mesh.nx, n, n).transpose(0, 2, 1, 3).reshape(mesh.ny * n, mesh.nx * n)

    return stitch(xs), stitch(ys), stitch(vals)


def emit_field(u: DgFunction, path: str | Path, fmt: str = "csv-grid", n: int | None = None) -> Path:
    """Write the cell-lattice samples of ``u`` as a CSV grid or a legacy VTK structured grid."""
    if fmt not in FIELD_FORMATS:
        raise ValueError(f"unknown field format {fmt!r}")
    path = Path(path)
    X, Y, U = _lattice_grid(u, n)
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv-grid":
                w = csv.writer(fh)
                w.writerow(("x", "y", "u"))
                for x, y, v in zip(X.ravel(), Y.ravel(), U.ravel()):
                    w.writerow((repr(float(x)), repr(float(y)), repr(float(v))))
            else:
                ny, nx = U.shape
                fh.write("# vtk DataFile Version 3.0\nDG field samples\nASCII\nDATASET STRUCTURED_GRID\n")
                fh.write(f"DIMENSIONS {nx} {ny} 1\nPOINTS {nx * ny} double\n")
                for x, y in zip(X.ravel(), Y.ravel()):
                    fh.write(f"{x!r} {y!r} 0\n")
                fh.write(f"POINT_DATA {nx * ny}\nSCALARS u double 1\nLOOKUP_TABLE default\n")
                for v in U.ravel():
                    fh.write(f"{float(v)!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write field {path}: {exc}") from None
    return path


def read_csv_grid(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
