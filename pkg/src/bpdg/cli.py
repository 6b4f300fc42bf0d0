"""Command-line driver: configs, experiment runs, reports.

Subcommands:
    run <config>                 time-step a problem and write CSV outputs
    converge <config> --grids    grid-refinement study with observed orders
    decomp-report --k --phi      CFL/node-count tables for the decompositions
    compare <configA> <configB>  paired-run step/wall-time comparison

Config files are line-oriented ``key = value`` UTF-8 text with ``#`` comments;
unknown keys are rejected with the offending line number.
Exit codes: 0 success, 2 config error, 3 admissibility failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field as dataclass_field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import decomposition as dc
from .dg_core import (
    Basis2D,
    DGField,
    InflowSegment,
    Mesh2D,
    OUTFLOW,
    PERIODIC,
    SCHEMES,
    error_norms,
    global_max_speeds,
    project,
    ssp_step,
    step_controller,
)
from .limiters import LimiterChain, build_node_set
from .physics import (
    AdmissibilityError,
    AdvectionModel,
    BoxScalar,
    BurgersModel,
    EulerModel,
)


class ConfigError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    if text.lower() in ("on", "true", "yes", "1"):
        return True
    if text.lower() in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _parse_optional_float(text: str) -> Optional[float]:
    if text.lower() in ("off", "none"):
        return None
    return float(text)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


@dataclass
class RunConfig:
    model: str = "advection2d"
    gamma: float = 5.0 / 3.0
    advection_cx: float = 1.0
    advection_cy: float = 1.0
    x_lo: float = -1.0
    x_hi: float = 1.0
    y_lo: float = -1.0
    y_hi: float = 1.0
    nx: int = 50
    ny: int = 50
    k: int = 2
    scheme: str = "ssprk3"
    dt_policy: str = "optimal"
    c0: float = 1.0
    safety: float = 1.0
    limiter_bp: bool = True
    tvb_m: Optional[float] = None
    node_set: str = "optimal"
    t_end: float = 0.5
    output_every: float = 0.0
    seed: int = 0
    out_dir: str = "out"
    bc: str = "periodic"
    initial: str = "sine"
    region_lo: float = -1.0
    region_hi: float = 1.0
    riemann_states: tuple[float, ...] = (-0.2, -1.0, 0.5, 0.8)
    ambient: tuple[float, ...] = (5.0, 0.0, 0.0, 0.4127)
    inflow: Optional[tuple[float, ...]] = None
    inflow_lo: float = -0.05
    inflow_hi: float = 0.05
    fallback_dt: float = 1e-3


_KEY_PARSERS = {
    "model": ("model", str),
    "gamma": ("gamma", float),
    "advection_cx": ("advection_cx", float),
    "advection_cy": ("advection_cy", float),
    "x_lo": ("x_lo", float),
    "x_hi": ("x_hi", float),
    "y_lo": ("y_lo", float),
    "y_hi": ("y_hi", float),
    "nx": ("nx", int),
    "ny": ("ny", int),
    "k": ("k", int),
    "scheme": ("scheme", str.lower),
    "dt_policy": ("dt_policy", str.lower),
    "c0": ("c0", float),
    "safety": ("safety", float),
    "limiter.bp": ("limiter_bp", _parse_bool),
    "limiter.tvb_M": ("tvb_m", _parse_optional_float),
    "limiter.node_set": ("node_set", str.lower),
    "t_end": ("t_end", float),
    "output_every": ("output_every", float),
    "seed": ("seed", int),
    "out_dir": ("out_dir", str),
    "bc": ("bc", str.lower),
    "initial": ("initial", str.lower),
    "region_lo": ("region_lo", float),
    "region_hi": ("region_hi", float),
    "riemann_states": ("riemann_states", _parse_floats),
    "ambient": ("ambient", _parse_floats),
    "inflow": ("inflow", _parse_floats),
    "inflow_lo": ("inflow_lo", float),
    "inflow_hi": ("inflow_hi", float),
    "fallback_dt": ("fallback_dt", float),
}


def parse_config(path: str | Path) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        attr, parser = _KEY_PARSERS[key]
        try:
            setattr(cfg, attr, parser(value))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


def _build_model(cfg: RunConfig):
    if cfg.model == "advection2d":
        c = (cfg.advection_cx, cfg.advection_cy)
        region = BoxScalar(cfg.region_lo, cfg.region_hi)
        if cfg.initial == "sine":
            def exact(x, y, t):
                return np.sin(np.pi * (x + y - (c[0] + c[1]) * t))[..., None]
        else:
            exact = None
        return AdvectionModel(c, region, exact)
    if cfg.model == "burgers2d":
        return BurgersModel(BoxScalar(cfg.region_lo, cfg.region_hi))
    if cfg.model == "euler2d":
        return EulerModel(cfg.gamma)
    raise ConfigError(f"unknown model {cfg.model!r}")


def _build_mesh(cfg: RunConfig, model) -> Mesh2D:
    if cfg.bc == "periodic":
        bcs = dict(bc_left=PERIODIC, bc_right=PERIODIC, bc_bottom=PERIODIC, bc_top=PERIODIC)
    elif cfg.bc == "outflow":
        bcs = dict(bc_left=OUTFLOW, bc_right=OUTFLOW, bc_bottom=OUTFLOW, bc_top=OUTFLOW)
    else:
        raise ConfigError(f"unknown bc {cfg.bc!r}")
    if cfg.inflow is not None:
        if cfg.model != "euler2d":
            raise ConfigError("inflow segments are only supported for euler2d")
        state = model.conserved(*cfg.inflow)
        bcs["bc_left"] = InflowSegment(state, cfg.inflow_lo, cfg.inflow_hi)
    return Mesh2D(cfg.x_lo, cfg.x_hi, cfg.y_lo, cfg.y_hi, cfg.nx, cfg.ny, **bcs)


def _build_initial(cfg: RunConfig, model):
    if cfg.model in ("advection2d", "burgers2d"):
        if cfg.initial == "sine":
            return lambda x, y: np.sin(np.pi * (x + y))[..., None]
        if cfg.initial == "riemann4":
            ul, ur, ll, lr = cfg.riemann_states

            def u0(x, y):
                left = x < 0.5
                lower = y < 0.5
                vals = np.where(
                    lower, np.where(left, ll, lr), np.where(left, ul, ur)
                )
                return vals[..., None]

            return u0
        raise ConfigError(f"unknown initial {cfg.initial!r} for {cfg.model}")
    if cfg.model == "euler2d":
        if cfg.initial != "uniform":
            raise ConfigError(f"unknown initial {cfg.initial!r} for euler2d")
        state = model.conserved(*cfg.ambient)

        def u0(x, y):
            shape = np.broadcast_shapes(x.shape, y.shape)
            return np.broadcast_to(state, shape + (4,)).copy()

        return u0
    raise ConfigError(f"unknown model {cfg.model!r}")


def _node_set_for(cfg: RunConfig, mesh: Mesh2D, a1: float, a2: float):
    floor = 1e-12 * max(a1 / mesh.dx, a2 / mesh.dy, 1.0)
    ratios = dc.SpeedRatios((max(a1 / mesh.dx, floor), max(a2 / mesh.dy, floor)))
    if cfg.node_set == "optimal":
        decomp = dc.optimal_2d(cfg.k, ratios)
    elif cfg.node_set == "classic":
        decomp = dc.zhang_shu_2d(cfg.k, ratios)
    elif cfg.node_set == "jiangliu":
        decomp = dc.jiang_liu_2d(cfg.k)
    else:
        raise ConfigError(f"unknown node_set {cfg.node_set!r}")
    return build_node_set(decomp, cfg.k, include_volume=cfg.model == "euler2d")


def _build_limiter_chain(cfg: RunConfig, model, mesh: Mesh2D, field: DGField) -> Optional[LimiterChain]:
    if not cfg.limiter_bp and cfg.tvb_m is None:
        return None
    node_set = None
    if cfg.limiter_bp:
        a1, a2 = global_max_speeds(field)
        node_set = _node_set_for(cfg, mesh, a1, a2)
    return LimiterChain(
        region=model.region if cfg.limiter_bp else None,
        node_set=node_set,
        m_tvb=cfg.tvb_m,
        bp_enabled=cfg.limiter_bp,
    )


@dataclass
class RunReport:
    steps: int = 0
    wall_time: float = 0.0
    t_final: float = 0.0
    min_mean: Optional[np.ndarray] = None
    max_mean: Optional[np.ndarray] = None
    bp_violation: bool = False
    l1: Optional[float] = None
    l2: Optional[float] = None
    linf: Optional[float] = None
    cells_limited_total: int = 0
    min_theta: float = 1.0
    troubled_total: int = 0
    speed_history: list = dataclass_field(default_factory=list)  # (dt, a1, a2)

    def csv_header(self) -> str:
        # wall time is reported on stdout, never in the CSV, so identical
        # configs produce byte-identical output files
        return "steps,t_final,min_mean0,max_mean0,bp_violation,l1,l2,linf,cells_limited,min_theta,troubled_cells"

    def csv_row(self) -> str:
        def fmt(v):
            if v is None:
                return ""
            return f"{v:.17g}" if isinstance(v, float) else str(v)

        return ",".join(
            [
                str(self.steps),
                fmt(self.t_final),
                fmt(float(self.min_mean[0])),
                fmt(float(self.max_mean[0])),
                str(int(self.bp_violation)),
                fmt(self.l1),
                fmt(self.l2),
                fmt(self.linf),
                str(self.cells_limited_total),
                fmt(self.min_theta),
                str(self.troubled_total),
            ]
        )


def _means_in_region(field: DGField) -> bool:
    model = field.model
    mean = field.cell_averages
    if isinstance(model.region, BoxScalar):
        return bool(
            np.all(mean[..., 0] >= model.region.lo - 1e-12)
            and np.all(mean[..., 0] <= model.region.hi + 1e-12)
        )
    rho = mean[..., 0]
    p = model.pressure(mean)
    return bool(np.all(rho >= model.region.eps_rho / 2) and np.all(p >= model.region.eps_p / 2))


def _write_field_csv(path: Path, field: DGField, t: float) -> None:
    mesh = field.mesh
    mean = field.cell_averages
    m = mean.shape[-1]
    header = "i,j,x,y," + ",".join(f"u{c}" for c in range(m))
    lines = [header]
    xs, ys = mesh.x_centers, mesh.y_centers
    for i in range(mesh.nx):
        for j in range(mesh.ny):
            vals = ",".join(f"{mean[i, j, c]:.17g}" for c in range(m))
            lines.append(f"{i},{j},{xs[i]:.17g},{ys[j]:.17g},{vals}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(cfg: RunConfig, write_outputs: bool = True) -> RunReport:
    """Project initial data, time-step to t_end with per-stage limiting,
    write field snapshots and a run report."""
    model = _build_model(cfg)
    mesh = _build_mesh(cfg, model)
    basis = Basis2D(cfg.k)
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    scheme = SCHEMES[cfg.scheme]
    field = project(_build_initial(cfg, model), mesh, basis, model)
    chain = _build_limiter_chain(cfg, model, mesh, field)
    if chain is not None:
        field = chain(field)

    out_dir = Path(cfg.out_dir)
    if write_outputs:
        out_dir.mkdir(parents=True, exist_ok=True)

    report = RunReport()
    report.min_mean = field.cell_averages.min(axis=(0, 1))
    report.max_mean = field.cell_averages.max(axis=(0, 1))
    t = 0.0
    next_output = cfg.output_every if cfg.output_every > 0 else math.inf
    start = time.perf_counter()
    while t < cfg.t_end * (1.0 - 1e-12):
        try:
            a1, a2 = global_max_speeds(field)
            if chain is not None and chain.bp_enabled and cfg.node_set == "optimal":
                # optimal internal nodes move with the speed ratios
                chain.node_set = _node_set_for(cfg, mesh, a1, a2)
            dt = step_controller(cfg.dt_policy, field, scheme, cfg.c0, cfg.safety, cfg.fallback_dt)
            if t + dt > cfg.t_end:
                dt = cfg.t_end - t  # clip the final step to land exactly on t_end
            field = ssp_step(field, scheme, dt, chain)
        except AdmissibilityError as exc:
            raise AdmissibilityError(
                f"{exc} (t = {t:.6g}, step {report.steps + 1})", cell=exc.cell
            ) from exc
        t += dt
        report.steps += 1
        report.speed_history.append((dt, a1, a2))
        report.min_mean = np.minimum(report.min_mean, field.cell_averages.min(axis=(0, 1)))
        report.max_mean = np.maximum(report.max_mean, field.cell_averages.max(axis=(0, 1)))
        if not _means_in_region(field):
            report.bp_violation = True
        if chain is not None:
            diag = chain.last_diagnostics
            report.cells_limited_total += diag.cells_limited
            report.min_theta = min(report.min_theta, diag.min_theta)
            report.troubled_total += diag.troubled_cells
        if write_outputs and t >= next_output - 1e-12:
            _write_field_csv(out_dir / f"field_{t:.6f}.csv", field, t)
            next_output += cfg.output_every
    report.wall_time = time.perf_counter() - start
    report.t_final = t

    if model.exact_solution is not None:
        report.l1, report.l2, report.linf = error_norms(field, model.exact_solution, t)
    if write_outputs:
        _write_field_csv(out_dir / f"field_{t:.6f}.csv", field, t)
        (out_dir / "report.csv").write_text(
            report.csv_header() + "\n" + report.csv_row() + "\n", encoding="utf-8"
        )
    return report


def convergence_study(cfg: RunConfig, grids: list[int], write_outputs: bool = True):
    """Run each grid and tabulate (N, L1, L2, Linf, observed L1 order)."""
    rows = []
    prev_l1 = None
    for n in grids:
        sub = replace(cfg, nx=n, ny=n, out_dir=str(Path(cfg.out_dir) / f"n{n}"))
        rep = run(sub, write_outputs=False)
        if rep.l1 is None:
            raise ConfigError("convergence study needs a model with an exact solution")
        order = math.log2(prev_l1 / rep.l1) if prev_l1 else float("nan")
        rows.append((n, rep.l1, rep.l2, rep.linf, order))
        prev_l1 = rep.l1
    if write_outputs:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["N,l1,l2,linf,order_l1"]
        for n, l1, l2, linf, order in rows:
            lines.append(f"{n},{l1:.17g},{l2:.17g},{linf:.17g},{order:.17g}")
        (out / "errors.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def _decomp_rows(k: int, phi: tuple[float, ...], c0: float):
    dim = len(phi)
    ratios = dc.SpeedRatios(phi)
    equal = dc.SpeedRatios((1.0,) * dim)
    if dim == 2:
        builders = [
            ("optimal", lambda r: dc.optimal_2d(k, r)),
            ("zhang-shu", lambda r: dc.zhang_shu_2d(k, r)),
            ("jiang-liu", lambda r: dc.jiang_liu_2d(k)),
        ]
    else:
        builders = [
            ("optimal", lambda r: dc.optimal_3d(k, r)),
            ("zhang-shu", lambda r: dc.zhang_shu_3d(k, r)),
            ("jiang-liu", lambda r: dc.jiang_liu_3d(k)),
        ]
    rows = []
    for name, build in builders:
        d = build(ratios)
        d_eq = build(equal)
        dt = dc.bp_max_dt(d, phi, (1.0,) * dim, c0).max_dt
        dt_eq = dc.bp_max_dt(d_eq, (1.0,) * dim, (1.0,) * dim, c0).max_dt
        rows.append(
            (name, dt, dt_eq, d.internal_node_count, dc.verify_exactness(d))
        )
    return rows


def decomp_report(k: int, phi: tuple[float, ...], c0: float, out=None) -> str:
    """Print per-scheme CFL steps, equal-ratio special cases, node counts, and
    exactness defects for 2D (and 3D when three ratios are given); returns CSV."""
    if out is None:
        out = sys.stdout
    csv_lines = ["dim,scheme,dt,dt_equal_ratio,internal_nodes,exactness_defect"]
    for dim_phi in ([phi[:2]] if len(phi) == 2 else [phi[:2], phi]):
        dim = len(dim_phi)
        rows = _decomp_rows(k, dim_phi, c0)
        print(f"\n{dim}D decompositions, k={k}, phi={dim_phi}, c0={c0}", file=out)
        print(f"{'scheme':<12}{'dt':>16}{'dt(equal phi)':>16}{'nodes':>8}{'defect':>12}", file=out)
        for name, dt, dt_eq, nodes, defect in rows:
            print(f"{name:<12}{dt:>16.8g}{dt_eq:>16.8g}{nodes:>8}{defect:>12.2e}", file=out)
            csv_lines.append(f"{dim},{name},{dt:.17g},{dt_eq:.17g},{nodes},{defect:.3e}")
        ls = dc.linear_stability_dt(k, dim_phi, (1.0,) * dim)
        print(f"{'linear-stab':<12}{ls:>16.8g}", file=out)
    return "\n".join(csv_lines) + "\n"


def _policy_dt(policy: str, k: int, scheme_name: str, c0: float, safety: float,
               a1: float, a2: float, dx: float, dy: float) -> float:
    scheme = SCHEMES[scheme_name]
    floor = 1e-12 * max(a1 / dx, a2 / dy)
    ratios = dc.SpeedRatios((max(a1 / dx, floor), max(a2 / dy, floor)))
    if policy == "linear":
        base = dc.linear_stability_dt(k, (a1, a2), (dx, dy))
    elif policy == "optimal":
        base = dc.bp_max_dt(dc.optimal_2d(k, ratios), (a1, a2), (dx, dy), c0).max_dt
    elif policy == "classic":
        base = dc.bp_max_dt(dc.zhang_shu_2d(k, ratios), (a1, a2), (dx, dy), c0).max_dt
    elif policy == "jiangliu":
        base = dc.bp_max_dt(dc.jiang_liu_2d(k), (a1, a2), (dx, dy), c0).max_dt
    else:
        raise ConfigError(f"unknown dt policy {policy!r}")
    return scheme.ssp_coefficient * base * safety


@dataclass
class CompareReport:
    steps_a: int
    steps_b: int
    wall_a: float
    wall_b: float
    step_ratio: float
    predicted_ratio: float
    report_a: RunReport
    report_b: RunReport


def efficiency_compare(cfg_a: RunConfig, cfg_b: RunConfig, write_outputs: bool = True) -> CompareReport:
    """Run both configs on the same problem and compare step counts against the
    ratio predicted by the dt formulas at the recorded wave speeds."""
    if (cfg_a.nx, cfg_a.ny, cfg_a.model, cfg_a.t_end) != (cfg_b.nx, cfg_b.ny, cfg_b.model, cfg_b.t_end):
        raise ConfigError("compare requires the same problem and mesh in both configs")
    rep_a = run(cfg_a, write_outputs=write_outputs)
    rep_b = run(cfg_b, write_outputs=write_outputs)
    dx = (cfg_a.x_hi - cfg_a.x_lo) / cfg_a.nx
    dy = (cfg_a.y_hi - cfg_a.y_lo) / cfg_a.ny
    # integrate 1/tau over run A's recorded speed history for both policies
    n_a = n_b = 0.0
    for dt, a1, a2 in rep_a.speed_history:
        n_a += dt / _policy_dt(cfg_a.dt_policy, cfg_a.k, cfg_a.scheme, cfg_a.c0, cfg_a.safety, a1, a2, dx, dy)
        n_b += dt / _policy_dt(cfg_b.dt_policy, cfg_b.k, cfg_b.scheme, cfg_b.c0, cfg_b.safety, a1, a2, dx, dy)
    return CompareReport(
        steps_a=rep_a.steps,
        steps_b=rep_b.steps,
        wall_a=rep_a.wall_time,
        wall_b=rep_b.wall_time,
        step_ratio=rep_b.steps / rep_a.steps,
        predicted_ratio=n_b / n_a,
        report_a=rep_a,
        report_b=rep_b,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="bpdg", description="bound-preserving DG solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config")

    p_conv = sub.add_parser("converge", help="grid-refinement study")
    p_conv.add_argument("config")
    p_conv.add_argument("--grids", type=int, nargs="+", required=True)

    p_dec = sub.add_parser("decomp-report", help="decomposition CFL/node tables")
    p_dec.add_argument("--k", type=int, default=2)
    p_dec.add_argument("--phi", type=float, nargs="+", default=[1.0, 1.0])
    p_dec.add_argument("--c0", type=float, default=1.0)
    p_dec.add_argument("--csv", help="also write the CSV table to this path")

    p_cmp = sub.add_parser("compare", help="paired efficiency comparison")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            report = run(parse_config(args.config))
            print(report.csv_header())
            print(report.csv_row())
            print(f"wall_time_s,{report.wall_time:.3f}")
        elif args.command == "converge":
            rows = convergence_study(parse_config(args.config), args.grids)
            print("N,l1,l2,linf,order_l1")
            for n, l1, l2, linf, order in rows:
                print(f"{n},{l1:.6e},{l2:.6e},{linf:.6e},{order:.3f}")
        elif args.command == "decomp-report":
            if len(args.phi) not in (2, 3):
                raise ConfigError("--phi takes 2 or 3 values")
            csv = decomp_report(args.k, tuple(args.phi), args.c0)
            if args.csv:
                Path(args.csv).write_text(csv, encoding="utf-8")
        elif args.command == "compare":
            cmp_report = efficiency_compare(parse_config(args.config_a), parse_config(args.config_b))
            print("steps_a,steps_b,step_ratio,predicted_ratio,wall_a,wall_b")
            print(
                f"{cmp_report.steps_a},{cmp_report.steps_b},{cmp_report.step_ratio:.4f},"
                f"{cmp_report.predicted_ratio:.4f},{cmp_report.wall_a:.3f},{cmp_report.wall_b:.3f}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AdmissibilityError as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
