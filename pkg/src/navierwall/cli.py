"""Command-line front end.

    navierwall <command> [--config FILE] [--key value ...]

Commands: cell, limit, thinlayer, sweep, control, poiseuille-check.  Every
configuration key can be given in a flat ``key = value`` file and overridden
by the matching ``--key`` flag.  Exit codes: 0 success, 1 configuration
error, 2 solver non-convergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .cell import effective_matrix, solve_cell_longitudinal, solve_cell_transverse
from .control import m_sweep
from .fields import discrete_divergence, l2_norm, pressure_l2
from .grid import (DomainSpec, GridError, LayerProfile, Resolution, build_domain_grid)
from .gammaconv import SweepSetup, run_sweep
from .profileparse import Expression, ParseError
from .stokes import NonConvergenceError, SolverConfig
from .thinlayer import (ThinLayerProblem, bounds_record, layer_grid, phi_eps_energy,
                        restrict_to_omega, solve_thin_layer)
from .walllaw import WallLawSpec, g0_energy, solve_limit, tangential_traction

COMMANDS = ("cell", "limit", "thinlayer", "sweep", "control", "poiseuille-check")
OUTPUT_ENV = "WALL_LAW_OUTPUT_DIR"

SWEEP_COLUMNS = ("eps", "phi_eps", "g_eps", "g0", "l2_err_u", "l2_err_p",
                 "cg_iters", "picard_iters")
CONTROL_COLUMNS = ("m", "F_value", "work_identity_residual", "mass_residual",
                   "band_fraction_1", "int_abs_u1_over_m", "M_1")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _words(text: str) -> tuple:
    return tuple(t.strip() for t in text.split(",") if t.strip())


@dataclass
class RunConfig:
    # domain and grid
    lx: float = 1.0
    periodic_x: bool = True
    nx: int = 64
    ny: int = 64
    grading: float = 1.0
    layer_rows: int = 8
    # physics
    nu: float = 1.0
    fx: str = "1"
    fy: str = "0"
    ns_mode: str = "stokes"
    # layer
    layer_kind: str = "fixed"
    h: str = "flat:1"
    eps: tuple = (0.2, 0.1, 0.05)
    # limit wall law: over_h | constant:VALUE | infinite | zero
    walllaw: str = "over_h"
    # solver
    linear_tol: float = 1e-10
    max_cg_iters: int = 2000
    picard_tol: float = 1e-10
    picard_max: int = 200
    picard_damping: float = 1.0
    drop_layer_advection: bool = False
    # control
    m: tuple = (0.2, 0.1, 0.05, 0.02)
    theta: float = 1.0
    tol: float = 1e-9
    max_iters: int = 20000
    delta: float = 0.05
    # output
    out: str = ""
    formats: tuple = ("csv", "json", "svg")
    jobs: int = 1

    @classmethod
    def keys(cls) -> list:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, text in raw.items():
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            t = types[key]
            try:
                if t == "tuple":
                    kw[key] = _words(text) if key == "formats" else _floats(text)
                elif t == "bool":
                    kw[key] = _bool(text)
                elif t == "int":
                    kw[key] = int(text)
                elif t == "float":
                    kw[key] = float(text)
                else:
                    kw[key] = text.strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        return cls(**kw)

    # derived objects; each raises ConfigError on inconsistent input

    def resolution(self) -> Resolution:
        return _wrap(lambda: Resolution(self.nx, self.ny, self.grading, self.layer_rows))

    def solver(self) -> SolverConfig:
        return _wrap(lambda: SolverConfig(self.linear_tol, self.max_cg_iters, self.picard_tol,
                                          self.picard_max, self.picard_damping,
                                          self.drop_layer_advection))

    def force(self) -> tuple:
        return (_expression(self.fx, "fx"), _expression(self.fy, "fy"))

    def profile(self):
        return parse_profile(self.h)

    def wall_law(self) -> WallLawSpec:
        return parse_wall_law(self.walllaw, self.nu, self.profile())

    def output_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUTPUT_ENV) or ".")

    def validate(self, command: str) -> None:
        if not self.nu > 0:
            raise ConfigError("nu must be positive")
        if not self.lx > 0:
            raise ConfigError("lx must be positive")
        if self.ns_mode not in ("stokes", "navier_stokes"):
            raise ConfigError(f"unknown ns_mode {self.ns_mode!r}")
        if self.layer_kind not in ("fixed", "periodic"):
            raise ConfigError(f"unknown layer_kind {self.layer_kind!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        bad = set(self.formats) - {"csv", "json", "svg"}
        if bad:
            raise ConfigError(f"unknown output format(s) {sorted(bad)}")
        self.resolution()
        self.solver()
        self.force()
        self.profile()
        if command in ("limit", "sweep"):
            self.wall_law()
        if command in ("thinlayer", "sweep"):
            if command == "sweep":
                eps = list(self.eps)
                if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])):
                    raise ConfigError("eps needs >= 3 strictly decreasing values")
            if not self.eps or any(not e > 0 for e in self.eps):
                raise ConfigError("eps values must be positive")
            for e in self.eps:
                _wrap(lambda: layer_grid(self.layer_problem(e), self.resolution()))
        if command == "control":
            m = list(self.m)
            if len(m) < 3 or any(b >= a for a, b in zip(m, m[1:])) or m[-1] <= 0:
                raise ConfigError("m needs >= 3 strictly decreasing positive values")
            if not 0 < self.theta <= 1:
                raise ConfigError("theta must lie in (0, 1]")
            if not self.delta > 0:
                raise ConfigError("delta must be positive")

    def layer_problem(self, eps: float) -> ThinLayerProblem:
        prof = _wrap(lambda: LayerProfile(self.layer_kind, self.profile(), eps))
        return ThinLayerProblem(DomainSpec(self.lx, prof, self.periodic_x), self.nu,
                                self.force(), self.ns_mode)

    def omega_grid(self):
        res = self.resolution()
        return _wrap(lambda: build_domain_grid(DomainSpec(self.lx, None, self.periodic_x),
                                               res.nx, res.ny, res.grading))


def _wrap(make):
    try:
        return make()
    except (GridError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _expression(text: str, key: str) -> Expression:
    try:
        return Expression(text)
    except ParseError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_profile(text: str):
    """``flat:H`` (h = H), ``bump:A`` (h = A cos^2(pi x), a cell bump vanishing
    at x = +-1/2) or a full expression in x."""
    text = text.strip()
    name, _, arg = text.partition(":")
    if name in ("flat", "bump") and arg:
        try:
            a = float(arg)
        except ValueError:
            raise ConfigError(f"bad profile shortcut {text!r}") from None
        if not (a > 0 and math.isfinite(a)):
            raise ConfigError(f"{name} profile height must be positive")
        if name == "flat":
            return Expression(repr(a))
        return Expression(f"{a!r}*cos({math.pi!r}*x)^2")
    return _expression(text, "h")


def parse_wall_law(text: str, nu: float, h) -> WallLawSpec:
    name, _, arg = text.strip().partition(":")
    try:
        if name == "over_h" and not arg:
            return WallLawSpec.over_h(nu, h)
        if name == "constant" and arg:
            return WallLawSpec.constant(float(arg))
        if name in ("infinite", "zero") and not arg:
            return getattr(WallLawSpec, name)()
    except ValueError as exc:
        raise ConfigError(f"walllaw: {exc}") from None
    raise ConfigError(f"unknown wall law {text!r}")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key = value")
        raw[key.strip()] = value.strip()
    return raw


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _json_value(v):
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.17g}") if math.isfinite(v) else None
    return v


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r[c]) for c in columns])
    return buf.getvalue()


def json_text(payload: dict) -> str:
    return json.dumps(_json_value(payload), indent=2) + "\n"


def svg_plot(series: dict, loglog: bool = False, title: str = "",
             xlabel: str = "", ylabel: str = "") -> str:
    """Polyline plot of ``{label: (x, y)}``; nonpositive points are dropped
    on log axes."""
    W, H, pad = 480, 360, 50
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    pts = {}
    for k, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if loglog:
            ok &= (x > 0) & (y > 0)
            x, y = np.log10(np.where(ok, x, 1)), np.log10(np.where(ok, y, 1))
        pts[k] = (x[ok], y[ok])
    allx = np.concatenate([p[0] for p in pts.values()] or [np.zeros(0)])
    ally = np.concatenate([p[1] for p in pts.values()] or [np.zeros(0)])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
           f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
           'fill="none" stroke="black"/>',
           f'<text x="{W / 2}" y="{pad / 2}" text-anchor="middle">{title}</text>',
           f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="12" y="{H / 2}" transform="rotate(-90 12 {H / 2})" '
           f'text-anchor="middle">{ylabel}</text>']
    if allx.size:
        x0, x1 = allx.min(), allx.max()
        y0, y1 = ally.min(), ally.max()
        sx = (W - 2 * pad) / (x1 - x0 or 1.0)
        sy = (H - 2 * pad) / (y1 - y0 or 1.0)
        for i, (k, (x, y)) in enumerate(pts.items()):
            c = colors[i % len(colors)]
            xy = " ".join(f"{pad + (a - x0) * sx:.2f},{H - pad - (b - y0) * sy:.2f}"
                          for a, b in zip(x, y))
            out.append(f'<polyline points="{xy}" fill="none" stroke="{c}"/>')
            out.append(f'<text x="{W - pad + 4}" y="{pad + 14 * (i + 1)}" fill="{c}" '
                       f'font-size="10">{k}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_reports(name: str, cfg: RunConfig, payload: dict, columns=None, rows=(),
                  plot: str | None = None) -> list:
    """Write ``name``.csv/.json/.svg into the output directory; returns the
    paths written.  Raises OSError on an unwritable directory."""
    outdir = cfg.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    if "csv" in cfg.formats and columns is not None:
        files.append((outdir / f"{name}.csv", csv_text(columns, rows)))
    if "json" in cfg.formats:
        files.append((outdir / f"{name}.json", json_text(payload)))
    if "svg" in cfg.formats and plot is not None:
        files.append((outdir / f"{name}.svg", plot))
    for path, text in files:
        path.write_text(text)
    return [p for p, _ in files]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_cell(cfg: RunConfig, out) -> int:
    h = cfg.profile()
    long = solve_cell_longitudinal(h, cfg.nx, cfg.ny, cfg.solver())
    trans = solve_cell_transverse(h, cfg.nx, cfg.ny)
    eff = effective_matrix(long, trans, cfg.nu)
    K = eff.K
    print(f"c1 = {long.c:.12g}", file=out)
    print(f"c2 = {trans.c:.12g}", file=out)
    print(f"K = [[{K[0, 0]:.12g}, {K[0, 1]:.12g}], [{K[1, 0]:.12g}, {K[1, 1]:.12g}]]",
          file=out)
    row = {"c1": long.c, "c2": trans.c, "K11": K[0, 0], "K12": K[0, 1], "K22": K[1, 1]}
    write_reports("cell", cfg, {"h": cfg.h, "nx": cfg.nx, "ny": cfg.ny, "nu": cfg.nu, **row},
                  tuple(row), [row])
    return EXIT_OK


def cmd_limit(cfg: RunConfig, out) -> int:
    grid = cfg.omega_grid()
    spec = cfg.wall_law()
    state, stats = solve_limit(cfg.force(), cfg.nu, spec, cfg.ns_mode, grid, cfg.solver())
    g0 = g0_energy(state, cfg.nu, spec, grid)
    trace = np.zeros(grid.nx + 1) if state.trace is None else state.trace
    t = tangential_traction(state, cfg.nu, grid)
    rows = [{"x": x, "trace": s, "traction": tt} for x, s, tt in zip(grid.x_faces, trace, t)]
    div = float(np.max(np.abs(discrete_divergence(state, grid))))
    print(f"g0 = {g0:.12g}  |u| = {l2_norm(state, grid):.12g}  max|div u| = {div:.3g}",
          file=out)
    payload = {"walllaw": cfg.walllaw, "g0": g0, "u_l2": l2_norm(state, grid),
               "p_l2": pressure_l2(state.p, grid), "max_div": div,
               "cg_iters": stats.cg_iters, "picard_iters": stats.picard_iters,
               "wall": rows}
    write_reports("limit", cfg, payload, ("x", "trace", "traction"), rows,
                  svg_plot({"trace": (grid.x_faces, trace)}, title="wall trace",
                           xlabel="x", ylabel="u1(x, 0)"))
    return EXIT_OK


def cmd_thinlayer(cfg: RunConfig, out) -> int:
    res = cfg.resolution()
    rows = []
    for eps in cfg.eps:
        prob = cfg.layer_problem(eps)
        grid = layer_grid(prob, res)
        state, stats = solve_thin_layer(prob, res, cfg.solver(), grid)
        rec = bounds_record(state, prob, grid)
        om = restrict_to_omega(state, grid)
        og = cfg.omega_grid()
        rows.append({"eps": eps, "phi_eps": phi_eps_energy(state, prob, grid),
                     "u_sq": rec.u_sq, "p_norm": rec.p_norm, "u_omega_l2": l2_norm(om, og),
                     "cg_iters": stats.cg_iters, "picard_iters": stats.picard_iters})
        print(f"eps = {eps:.6g}  phi_eps = {rows[-1]['phi_eps']:.12g}", file=out)
    cols = ("eps", "phi_eps", "u_sq", "p_norm", "u_omega_l2", "cg_iters", "picard_iters")
    write_reports("thinlayer", cfg, {"h": cfg.h, "rows": rows}, cols, rows)
    return EXIT_OK


def sweep_rows(rep) -> list:
    return [{"eps": r.eps, "phi_eps": r.phi_eps, "g_eps": r.g_eps, "g0": rep.g0,
             "l2_err_u": r.l2_err_u, "l2_err_p": r.l2_err_p, "cg_iters": r.cg_iters,
             "picard_iters": r.picard_iters} for r in rep.rows]


def cmd_sweep(cfg: RunConfig, out) -> int:
    setup = SweepSetup(h=cfg.profile(), kind=cfg.layer_kind, f=cfg.force(), nu=cfg.nu,
                       spec=cfg.wall_law(), res=cfg.resolution(), lx=cfg.lx,
                       periodic_x=cfg.periodic_x, ns_mode=cfg.ns_mode)
    rep = run_sweep(cfg.eps, setup, cfg.solver(), jobs=cfg.jobs)
    rows = sweep_rows(rep)
    payload = {"h": cfg.h, "walllaw": cfg.walllaw, "g0": rep.g0, "u0_l2": rep.u0_norm,
               "rate": rep.rate, "rate_const": rep.rate_const,
               "fit_residual": rep.fit_residual, "rate_note": rep.rate_note,
               "rows": rows, "failures": [r.failure for r in rep.rows if r.failure]}
    if rep.bounds is not None:
        payload["bounds"] = {"ratios": rep.bounds.ratios, "envelope": rep.bounds.envelope,
                             "passed": rep.bounds.passed, "note": rep.bounds.note}
    plot = svg_plot({"l2_err_u": (rep.eps, rep.errors),
                     "l2_err_p": (rep.eps, [r.l2_err_p for r in rep.rows])},
                    loglog=True, title="sweep", xlabel="log10 eps", ylabel="log10 error")
    write_reports("sweep", cfg, payload, SWEEP_COLUMNS, rows, plot)
    for r in rep.rows:
        print(f"eps = {r.eps:.6g}  l2_err_u = {r.l2_err_u:.6g}  g_eps = {r.g_eps:.6g}"
              + (f"  [{r.failure}]" if r.failure else ""), file=out)
    print(f"g0 = {rep.g0:.12g}  rate = {rep.rate:.4g}", file=out)
    if any(r.failure.startswith("non-convergence") for r in rep.rows):
        raise NonConvergenceError("; ".join(r.failure for r in rep.rows if r.failure))
    return EXIT_OK


def control_rows(rep) -> list:
    return [{"m": m, "F_value": F, "work_identity_residual": wr, "mass_residual": mr,
             "band_fraction_1": bf, "int_abs_u1_over_m": um, "M_1": rep.M}
            for m, F, wr, mr, bf, um in zip(rep.m, rep.F, rep.work_identity_residual,
                                            rep.mass_residual, rep.band_fraction,
                                            rep.int_abs_u_over_m)]


def cmd_control(cfg: RunConfig, out) -> int:
    grid = cfg.omega_grid()
    rep = m_sweep(cfg.m, cfg.force(), cfg.nu, grid, cfg.solver(), delta=cfg.delta,
                  theta=cfg.theta, tol=cfg.tol, max_iters=cfg.max_iters, ns_mode=cfg.ns_mode)
    rows = control_rows(rep)
    payload = {"M_1": rep.M, "argmax_x": rep.argmax_x, "delta": rep.delta,
               "degenerate": rep.degenerate, "rows": rows, "J": rep.J,
               "iterations": rep.iterations, "moments": rep.moments,
               "failures": [f"m={m}: {msg}" for m, msg in rep.failures]}
    plot = svg_plot({"int|u1|/m": (rep.m, rep.int_abs_u_over_m),
                     "M_1": (rep.m, [rep.M] * len(rep.m)),
                     "band fraction": (rep.m, rep.band_fraction)},
                    title="concentration", xlabel="m", ylabel="value")
    write_reports("control", cfg, payload, CONTROL_COLUMNS, rows, plot)
    for r in rows:
        print(f"m = {r['m']:.6g}  band = {r['band_fraction_1']:.4f}  "
              f"int|u1|/m = {r['int_abs_u1_over_m']:.6g}", file=out)
    print(f"M_1 = {rep.M:.12g}", file=out)
    if rep.failures:
        raise NonConvergenceError("; ".join(payload["failures"]))
    return EXIT_OK


def cmd_poiseuille(cfg: RunConfig, out) -> int:
    """Slip channel with h = 1, nu = 1, f = (2, 0): u1 = -y^2 + y/2 + 1/2."""
    grid = build_domain_grid(DomainSpec(cfg.lx, None, True), cfg.nx, cfg.ny, cfg.grading)
    spec = WallLawSpec.over_h(1.0, 1.0)
    state, _ = solve_limit((2.0, 0.0), 1.0, spec, "stokes", grid, cfg.solver())
    y = grid.yc[:, None]
    exact = -y ** 2 + 0.5 * y + 0.5
    trace_err = float(np.max(np.abs(state.trace - 0.5)))
    prof_err = float(np.max(np.abs(state.u - exact)))
    passed = trace_err <= 1e-3 and prof_err <= 1e-3
    print(f"trace error = {trace_err:.3g}  profile error = {prof_err:.3g}  "
          f"{'PASS' if passed else 'FAIL'}", file=out)
    row = {"nx": cfg.nx, "ny": cfg.ny, "trace_err": trace_err, "profile_err": prof_err,
           "passed": passed}
    write_reports("poiseuille", cfg, row, tuple(row), [row])
    return EXIT_OK


HANDLERS = {"cell": cmd_cell, "limit": cmd_limit, "thinlayer": cmd_thinlayer,
            "sweep": cmd_sweep, "control": cmd_control, "poiseuille-check": cmd_poiseuille}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="navierwall", description="Wall-law solvers and sweeps.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value configuration file")
    for key in RunConfig.keys():
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="V")
    return p


def load_run_config(argv) -> tuple[str, RunConfig]:
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    for key in RunConfig.keys():
        v = getattr(args, key)
        if v is not None:
            raw[key] = v
    cfg = RunConfig.from_mapping(raw)
    cfg.validate(args.command)
    return args.command, cfg


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        command, cfg = load_run_config(sys.argv[1:] if argv is None else argv)
        return HANDLERS[command](cfg, out)
    except ConfigError as exc:
        print(f"navierwall: config error: {exc}", file=err)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"navierwall: non-convergence: {exc}".replace("\n", " "), file=err)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"navierwall: I/O error: {exc}", file=err)
        return EXIT_IO
    except (GridError, ValueError) as exc:
        print(f"navierwall: config error: {exc}", file=err)
        return EXIT_CONFIG


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
