"""Line-oriented run configuration: ``section.key = value``.

Blank lines and ``#`` comments are ignored.  Sections are ``grid``,
``nonlinearity``, ``initial``, ``solver`` and ``output``; unknown keys are
rejected with their line number.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field, fields
from pathlib import Path

from .grid import (
    Field,
    Grid,
    init_black_soliton_1d,
    init_constant,
    init_plane_wave_perturbed,
    init_random_bounded,
    make_grid,
)
from .nonlinearity import CATALOG_PARAMS, NonlinearitySpec, spec_from_mapping
from .solver import SolverConfig

__all__ = ["ConfigError", "RunConfig", "InitialBlock", "OutputBlock", "parse_config", "load_config",
           "build_initial", "DEFAULTS_HELP"]

INITIAL_KINDS = ("constant", "plane_wave_perturbed", "black_soliton", "random_bounded", "gaussian_bump")

# key -> (default, converter); None default means required
_INITIAL_KEYS = {
    "kind": ("constant", str),
    "phase": (0.0, float),
    "eps": (0.01, float),
    "mode_k": (None, "floats"),
    "energy_budget": (1.0, float),
    "k_scale": (1.5, float),
    "seed": (0, int),
    "amplitude": (1.0, float),
    "width": (1.0, float),
}
_OUTPUT_KEYS = {
    "directory": ("out", str),
    "snapshot_stride": (0, int),
    "csv_stride": (1, int),
}
_GRID_KEYS = {"dim": (None, int), "extents": (None, "floats"), "points": (None, "ints")}

DEFAULTS_HELP = """\
configuration format: one 'section.key = value' per line, '#' starts a comment

grid.dim               1, 2 or 3 (required)
grid.extents           box length(s), comma separated or one value for all axes (required)
grid.points            points per axis, even and >= 4 (required)
nonlinearity.kind      gp | power | competing | cubic_quintic | saturated | exponential |
                       transiting | logarithmic | zero   (default gp)
nonlinearity.<param>   parameters of the kind (power: lam=1, alpha; competing: a1=1, a2,
                       alpha1, alpha2; cubic_quintic: alpha1, alpha3, alpha5;
                       saturated/exponential: gamma; transiting: a, gamma)
initial.kind           constant | plane_wave_perturbed | black_soliton | random_bounded |
                       gaussian_bump   (default constant)
initial.phase          far-field constant c = exp(i phase)   (default 0)
initial.eps            plane-wave perturbation size   (default 0.01)
initial.mode_k         lattice wavevector, comma separated
initial.energy_budget  random data energy bound   (default 1)
initial.k_scale        random data spectral width   (default 1.5)
initial.seed           random seed   (default 0)
initial.amplitude      bump amplitude   (default 1)
initial.width          bump width   (default 1)
solver.dt              time step   (default 1e-3)
solver.t_end           final time   (default 1)
solver.scheme          strang | picard   (default strang)
solver.picard_iters    (default 50)
solver.picard_quad_nodes   Gauss-Legendre nodes per panel (default 4)
solver.picard_panels   panels per step (default 8)
solver.picard_tol      (default 1e-10)
solver.blowup_E_threshold  energy at which blow-up is flagged (default 1e6)
solver.report_every    steps between energy reports (default 10)
solver.dealias         true | false   (default true)
output.directory       (default out)
output.snapshot_stride steps between snapshots, 0 = final only (default 0)
output.csv_stride      keep every n-th report in the CSV (default 1)
"""


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class InitialBlock:
    kind: str = "constant"
    phase: float = 0.0
    eps: float = 0.01
    mode_k: tuple[float, ...] | None = None
    energy_budget: float = 1.0
    k_scale: float = 1.5
    seed: int = 0
    amplitude: float = 1.0
    width: float = 1.0

    @property
    def farfield(self) -> complex:
        return cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class OutputBlock:
    directory: Path = Path("out")
    snapshot_stride: int = 0
    csv_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    nonlinearity: NonlinearitySpec
    initial: InitialBlock
    solver: SolverConfig
    output: OutputBlock = field(default_factory=OutputBlock)


def _convert(raw: str, kind, key: str, line: int):
    try:
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "ints":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}", line) from None


def parse_config(text: str) -> RunConfig:
    entries: dict[str, dict[str, tuple[str, int]]] = {s: {} for s in ("grid", "nonlinearity", "initial", "solver", "output")}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"key {lhs!r} has no section", lineno)
        section, key = lhs.split(".", 1)
        if section not in entries:
            raise ConfigError(f"unknown section {section!r} in key {lhs!r}", lineno)
        if key in entries[section]:
            raise ConfigError(f"duplicate key {lhs!r}", lineno)
        if not rhs:
            raise ConfigError(f"empty value for {lhs!r}", lineno)
        entries[section][key] = (rhs, lineno)

    def take(section, table):
        out = {}
        for key, (raw, ln) in entries[section].items():
            if key not in table:
                raise ConfigError(f"unknown key {section}.{key!r}", ln)
            out[key] = _convert(raw, table[key][1], f"{section}.{key}", ln)
        for key, (default, _) in table.items():
            if key not in out:
                if default is None and section == "grid":
                    raise ConfigError(f"missing required key {section}.{key}")
                out[key] = default
        return out

    def first_line(section):
        lines = [ln for _, ln in entries[section].values()]
        return min(lines) if lines else None

    g = take("grid", _GRID_KEYS)
    try:
        grid = make_grid(g["dim"], g["extents"], g["points"])
    except ValueError as exc:
        raise ConfigError(str(exc), first_line("grid")) from None

    nl = dict(entries["nonlinearity"])
    kind_raw, kind_line = nl.pop("kind", ("gp", None))
    if kind_raw not in CATALOG_PARAMS:
        raise ConfigError(f"unknown nonlinearity kind {kind_raw!r}", kind_line)
    params = {}
    for key, (raw, ln) in nl.items():
        if key not in CATALOG_PARAMS[kind_raw]:
            raise ConfigError(f"unknown key nonlinearity.{key!r} for kind {kind_raw}", ln)
        params[key] = _convert(raw, float, f"nonlinearity.{key}", ln)
    try:
        spec = spec_from_mapping(kind_raw, params)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"nonlinearity: {exc}", kind_line or first_line("nonlinearity")) from None

    ini = take("initial", _INITIAL_KEYS)
    if ini["kind"] not in INITIAL_KINDS:
        line = entries["initial"].get("kind", ("", None))[1]
        raise ConfigError(f"unknown initial kind {ini['kind']!r}", line)
    initial = InitialBlock(**ini)
    kind_line = entries["initial"].get("kind", ("", None))[1]
    if initial.kind == "black_soliton":
        if grid.dim != 1:
            raise ConfigError("initial.kind = black_soliton requires grid.dim = 1", kind_line)
        if initial.phase != 0.0:
            raise ConfigError("black_soliton has far-field +1; initial.phase must be 0", kind_line)
    if initial.kind == "plane_wave_perturbed":
        if initial.mode_k is None or len(initial.mode_k) != grid.dim:
            raise ConfigError("plane_wave_perturbed needs initial.mode_k with one entry per axis", kind_line)
        if not grid.is_lattice_vector(initial.mode_k):
            raise ConfigError(f"initial.mode_k {initial.mode_k} is not a lattice wavevector", kind_line)

    sol_table = {f.name: (f.default, type(f.default) if f.name != "scheme" else str) for f in fields(SolverConfig)}
    sol = take("solver", sol_table)
    try:
        solver = SolverConfig(**sol)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}", first_line("solver")) from None

    out = take("output", _OUTPUT_KEYS)
    if out["snapshot_stride"] < 0 or out["csv_stride"] < 1:
        raise ConfigError("output strides must be non-negative (snapshot) and positive (csv)", first_line("output"))
    output = OutputBlock(Path(out["directory"]), out["snapshot_stride"], out["csv_stride"])
    return RunConfig(grid, spec, initial, solver, output)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    return parse_config(text)


def build_initial(cfg: RunConfig) -> Field:
    ini, grid = cfg.initial, cfg.grid
    c = ini.farfield
    if ini.kind == "constant":
        return init_constant(grid, c)
    if ini.kind == "plane_wave_perturbed":
        return init_plane_wave_perturbed(grid, c, ini.eps, ini.mode_k)
    if ini.kind == "black_soliton":
        return init_black_soliton_1d(grid)
    if ini.kind == "random_bounded":
        return init_random_bounded(grid, c, ini.energy_budget, ini.seed, k_scale=ini.k_scale)
    # gaussian_bump
    from .experiments import gaussian_bump

    return gaussian_bump(grid, ini.amplitude, ini.width, c)

