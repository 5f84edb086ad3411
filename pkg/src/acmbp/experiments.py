"""Runs, reference solutions and convergence sweeps, with CSV output."""

from __future__ import annotations

import io
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from .diagnostics import RateTable, error_table
from .mesh_fem import Mesh1D, NodalField, build_mesh, l2_error
from .problems import AllenCahnProblem
from .steppers import SCHEMES, SchemeConfig, run as run_scheme, simulate
from .tableaux import TABLEAUX, get_tableau

FORMAT_VERSION = "ref-v1"
OUTPUT_VERSION = "run-v1"

SPACE_LEVELS = (10, 20, 40, 80, 160)
TIME_LEVELS = (10, 20, 40, 80, 160, 320)


class ConfigError(ValueError):
    """Bad user input: exit code 2."""


@dataclass
class RunConfig:
    scheme: str = "rk"
    tableau: str = "gl3"
    r: int = 1
    nx: int = 100
    nt: int = 100
    T: float = 0.01
    eps: float = 0.1
    alpha: float = 1.0
    c0: float = 1.0
    initial: str = "smooth"
    out: Optional[str] = None
    ref: Optional[str] = None
    seed: int = 1

    def validate(self) -> "RunConfig":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.tableau not in TABLEAUX:
            raise ConfigError(f"unknown tableau {self.tableau!r}; choose from {sorted(TABLEAUX)}")
        for name in ("r", "nx", "nt"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("T", "eps", "alpha", "c0"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.scheme == "sav" and self.r != 1:
            raise ConfigError("the sav scheme requires r = 1")
        if not 1 <= self.r <= 8:
            raise ConfigError("r must lie in 1..8")
        return self

    @property
    def tau(self) -> float:
        return self.T / self.nt

    def problem(self) -> AllenCahnProblem:
        return AllenCahnProblem(eps=self.eps, alpha=self.alpha, c0=self.c0, initial=self.initial)

    def mesh(self) -> Mesh1D:
        p = self.problem()
        return build_mesh(p.a, p.b, self.nx, self.r)

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(get_tableau(self.tableau), self.tau, self.scheme, self.problem())

    def metadata(self) -> dict:
        d = asdict(self)
        for key in ("out", "ref", "seed"):
            d.pop(key)
        return d


def coerce(key: str, value):
    """Convert a string value to the RunConfig field type."""
    types = {f.name: f.type for f in fields(RunConfig)}
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None:
        return None
    kind = types[key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return str(value)


def read_config_file(path: str) -> dict:
    """Flat key=value file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = coerce(key, value)
    return out


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _preamble(meta: dict, version: str) -> str:
    lines = [f"# version={version}"]
    lines += [f"# {k}={v}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def read_csv(path: str):
    """Return (metadata dict, header list, float array) for files written here."""
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) if v != "" else np.nan for v in line.split(",")])
    return meta, header, np.array(rows)


@dataclass
class RunArtifacts:
    steps_path: Optional[str]
    final_path: Optional[str]
    final: NodalField
    records: list


def run(cfg: RunConfig, reference: Optional["ReferenceSolution"] = None) -> RunArtifacts:
    """Run one simulation; write per-step and final-state CSVs when cfg.out is set.

    Per-step columns: n, t, max_abs, rho, energy, sav_energy, z. Final-state
    columns: x, u, plus error = u - u_ref when a reference is supplied.
    """
    cfg.validate()
    mesh = cfg.mesh()
    sc = cfg.scheme_config()
    steps = io.StringIO()
    steps.write("n,t,max_abs,rho,energy,sav_energy,z\n")
    records = []
    u = None
    stepper = simulate(mesh, sc, cfg.nt)
    while True:
        try:
            u, rec = next(stepper)
        except StopIteration:
            break
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"step {len(records)}: {exc}") from exc
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite solution at step {rec.n}")
        records.append(rec)
        steps.write(",".join(fmt(v) for v in (rec.n, rec.t, rec.max_abs, rec.rho, rec.energy, rec.sav_energy, rec.z)) + "\n")
    final = NodalField(mesh, u)
    steps_path = final_path = None
    if cfg.out:
        meta = cfg.metadata()
        base = cfg.out[:-4] if cfg.out.endswith(".csv") else cfg.out
        steps_path = base + "_steps.csv"
        final_path = base + "_final.csv"
        _write(steps_path, _preamble(meta, OUTPUT_VERSION) + steps.getvalue())
        buf = io.StringIO()
        if reference is not None:
            err = u - reference.field(mesh.global_nodes)
            buf.write("x,u,error\n")
            for x, v, e in zip(mesh.global_nodes, u, err):
                buf.write(f"{fmt(x)},{fmt(v)},{fmt(e)}\n")
        else:
            buf.write("x,u\n")
            for x, v in zip(mesh.global_nodes, u):
                buf.write(f"{fmt(x)},{fmt(v)}\n")
        _write(final_path, _preamble(meta, OUTPUT_VERSION) + buf.getvalue())
    return RunArtifacts(steps_path, final_path, final, records)


@dataclass
class ReferenceSolution:
    meta: dict
    field: NodalField

    @property
    def T(self) -> float:
        return float(self.meta["T"])

    @property
    def eps(self) -> float:
        return float(self.meta["eps"])

    def check_matches(self, T: float, eps: float, initial: Optional[str] = None) -> None:
        if initial is not None and self.meta.get("initial", initial) != initial:
            raise ConfigError(f"reference uses initial state {self.meta['initial']!r}, run requests {initial!r}")
        if float(self.meta["T"]) != float(T) or float(self.meta["eps"]) != float(eps):
            raise ConfigError(
                f"reference was computed for T={self.meta['T']}, eps={self.meta['eps']}; "
                f"run requests T={T!r}, eps={eps!r}"
            )


def reference_config(T: float, eps: float, r: int = 3, nx: int = 400, nt: int = 1000, **kw) -> RunConfig:
    return RunConfig(scheme="rk", tableau="gl3", r=r, nx=nx, nt=nt, T=T, eps=eps, **kw)


def make_reference(T: float, eps: float, path: Optional[str] = None, r: int = 3, nx: int = 400, nt: int = 1000, **kw) -> ReferenceSolution:
    """Cut-off RK, 3-stage Gauss-Legendre, on a fine grid (defaults r=3, N_x=400, N_t=1000)."""
    cfg = reference_config(T, eps, r, nx, nt, **kw).validate()
    res = run_scheme(cfg.mesh(), cfg.scheme_config(), cfg.nt, keep_records=False)
    meta = cfg.metadata()
    ref = ReferenceSolution(meta, NodalField(res.mesh, res.final))
    if path:
        write_reference(ref, path)
    return ref


def write_reference(ref: ReferenceSolution, path: str) -> None:
    buf = io.StringIO()
    buf.write(_preamble(ref.meta, FORMAT_VERSION))
    buf.write("x,u\n")
    for x, v in zip(ref.field.mesh.global_nodes, ref.field.values):
        buf.write(f"{fmt(x)},{fmt(v)}\n")
    _write(path, buf.getvalue())


def load_reference(path: str) -> ReferenceSolution:
    if not os.path.exists(path):
        raise ConfigError(f"reference file {path!r} not found; create it with `acmbp make-reference`")
    meta, header, data = read_csv(path)
    if meta.get("version") != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported reference format {meta.get('version')!r}")
    meta.pop("version")
    if header != ["x", "u"]:
        raise ConfigError(f"{path}: expected columns x,u")
    cfg = RunConfig(**{k: coerce(k, v) for k, v in meta.items()})
    mesh = cfg.mesh()
    if data.shape[0] != mesh.n_nodes:
        raise ConfigError(f"{path}: expected {mesh.n_nodes} nodes, found {data.shape[0]}")
    return ReferenceSolution(cfg.metadata(), NodalField(mesh, data[:, 1]))


@dataclass
class SweepResult:
    axis: str
    table: RateTable
    config: RunConfig
    max_abs: float  # largest nodal magnitude seen in any step of any level
    max_rho: list  # largest cut-off per level


def convergence_sweep(
    axis: str,
    base: RunConfig,
    reference: ReferenceSolution,
    levels: Sequence[int] | None = None,
    out: Optional[str] = None,
) -> SweepResult:
    """L2 error at T against the reference for each refinement level.

    axis="space": levels are N_x, with N_t taken from the reference.
    axis="time": levels are N_t on the reference's own mesh (r, N_x).
    """
    reference.check_matches(base.T, base.eps, base.initial)
    rmeta = reference.meta
    if axis == "space":
        levels = list(levels or SPACE_LEVELS)
        if max(levels) * 2 > int(rmeta["nx"]):
            raise ConfigError(f"spatial levels must stay at least 2x coarser than the reference N_x={rmeta['nx']}")
        configs = [replace(base, nx=n, nt=int(rmeta["nt"])) for n in levels]
    elif axis == "time":
        levels = list(levels or TIME_LEVELS)
        if max(levels) * 2 > int(rmeta["nt"]):
            raise ConfigError(f"temporal levels must stay at least 2x coarser than the reference N_t={rmeta['nt']}")
        if int(rmeta["r"]) != base.r:
            raise ConfigError(
                f"temporal sweep with r={base.r} needs a reference on the same elements "
                f"(found r={rmeta['r']}); run `acmbp make-reference --r {base.r}`"
            )
        configs = [replace(base, nt=n, nx=int(rmeta["nx"]), r=int(rmeta["r"])) for n in levels]
    else:
        raise ConfigError(f"axis must be 'space' or 'time', got {axis!r}")
    rows = []
    max_abs = 0.0
    max_rho = []
    for cfg in configs:
        cfg.validate()
        mesh = cfg.mesh()
        res = run_scheme(mesh, cfg.scheme_config(), cfg.nt)
        max_abs = max(max_abs, max(r.max_abs for r in res.records))
        max_rho.append(max(r.rho for r in res.records))
        rows.append((cfg.nx if axis == "space" else cfg.nt, l2_error(NodalField(mesh, res.final), reference.field)))
    table = error_table(rows)
    if out:
        meta = {"axis": axis, **configs[0].metadata(), "reference_r": rmeta["r"], "reference_nx": rmeta["nx"], "reference_nt": rmeta["nt"]}
        meta.pop("nx" if axis == "space" else "nt")
        buf = io.StringIO()
        buf.write(_preamble(meta, OUTPUT_VERSION))
        buf.write("level,error,rate\n")
        for i, (lvl, err) in enumerate(rows):
            rate = "" if i == 0 else fmt(table.rates[i - 1])
            buf.write(f"{lvl},{fmt(err)},{rate}\n")
        _write(out, buf.getvalue())
    return SweepResult(axis, table, base, max_abs, max_rho)
