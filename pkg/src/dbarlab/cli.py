"""Config-driven experiment runner.

Subcommands: evolve | scatter | miura | spectrum | gn-scan | validate.
Configs are TOML (flat key-value sections) or JSON with the same nesting;
environment variables with the prefix DBARLAB_ override single keys
(DBARLAB_<SECTION>_<KEY>, e.g. DBARLAB_RUN_WORKERS=4).

Exit codes: 0 success; 2 configuration error; 3 numerical failure;
4 blow-up detected (artifacts are still written); 5 partial scattering
failures; 6 validation/gate failure.

Every output directory receives the expanded config, its SHA-256 hash and
the library version, so identical configs reproduce identical runs
(bitwise for worker count 1).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import pathlib
import sys

import numpy as np

from . import __version__, core, datums, diagnostics, evolution, miura, scattering
from .core import Field, GridSpec, UsageError, grid_norm
from .scattering import KGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BLOWUP = 4
EXIT_PARTIAL = 5
EXIT_GATE = 6

ENV_PREFIX = "DBARLAB_"


@dataclasses.dataclass
class RunConfig:
    command: str
    grid_n: int = 256
    grid_L: float = 8.0
    kgrid_nk: int = 64
    kgrid_K: float = 4.0
    model: str = "mNV"
    nonlin_form: str = "canonical"
    datum_family: str = "gaussian"
    datum_params: dict = dataclasses.field(default_factory=dict)
    datum_file: str | None = None
    times: list = dataclasses.field(default_factory=lambda: [0.0, 0.05])
    dt: float | None = None
    scheme: str = "IFRK4"
    tol: float = 1e-6
    newton_tol: float = 1e-10
    roundtrip_gate: float | None = None
    invert: bool = False
    ensemble_count: int = 20
    ensemble_amplitude: float = 0.5
    gn_s: float = 0.25
    gn_r: float = 3.0
    scale: str = "reference"
    criteria: list = dataclasses.field(default_factory=list)
    out: str = "out"
    workers: int = 1
    seed: int = 0

    def validate(self) -> None:
        GridSpec(self.grid_n, self.grid_L)  # raises on bad values
        KGrid(self.kgrid_nk, self.kgrid_K)
        if self.model not in ("mNV", "NV", "DSII"):
            raise UsageError(f"unknown model {self.model!r}")
        if self.scheme not in ("IFRK4", "ETDRK4"):
            raise UsageError(f"unknown scheme {self.scheme!r}")
        if self.datum_file is None and self.datum_family not in datums.FAMILIES:
            raise UsageError(f"unknown datum family {self.datum_family!r}")
        if not self.times:
            raise UsageError("times must be nonempty")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if not (self.tol > 0 and self.newton_tol > 0):
            raise UsageError("tolerances must be positive")

    def hash(self) -> str:
        canon = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()


_SECTION_MAP = {
    ("grid", "n"): "grid_n",
    ("grid", "l"): "grid_L",
    ("kgrid", "nk"): "kgrid_nk",
    ("kgrid", "k"): "kgrid_K",
    ("model", "tag"): "model",
    ("model", "nonlin_form"): "nonlin_form",
    ("datum", "family"): "datum_family",
    ("datum", "file"): "datum_file",
    ("evolve", "times"): "times",
    ("evolve", "dt"): "dt",
    ("evolve", "scheme"): "scheme",
    ("tolerances", "tol"): "tol",
    ("tolerances", "newton_tol"): "newton_tol",
    ("gates", "roundtrip"): "roundtrip_gate",
    ("scatter", "invert"): "invert",
    ("gn", "count"): "ensemble_count",
    ("gn", "amplitude"): "ensemble_amplitude",
    ("gn", "s"): "gn_s",
    ("gn", "r"): "gn_r",
    ("validate", "scale"): "scale",
    ("validate", "criteria"): "criteria",
    ("run", "out"): "out",
    ("run", "workers"): "workers",
    ("run", "seed"): "seed",
}


def _load_raw_config(path: str) -> dict:
    p = pathlib.Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    text = p.read_text()
    if p.suffix == ".json":
        return json.loads(text)
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, list):
        return [float(x) for x in value.split(",")]
    if like is None:  # untyped optional: best-effort numeric, else string
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                pass
    return value


def build_config(command: str, path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig(command=command)
    raw = _load_raw_config(path) if path else {}
    for section, body in raw.items():
        if not isinstance(body, dict):
            raise UsageError(f"config section [{section}] must hold key-values")
        for key, value in body.items():
            attr = _SECTION_MAP.get((section.lower(), key.lower()))
            if attr is None:
                if section.lower() == "datum":
                    cfg.datum_params[key] = value
                    continue
                raise UsageError(f"unknown config key [{section}] {key}")
            setattr(cfg, attr, value)
    for (section, key), attr in _SECTION_MAP.items():
        env = os.environ.get(f"{ENV_PREFIX}{section.upper()}_{key.upper()}")
        if env is not None:
            setattr(cfg, attr, _coerce(env, getattr(cfg, attr)))
    for attr, value in overrides.items():
        if value is not None:
            setattr(cfg, attr, value)
    cfg.times = [float(t) for t in cfg.times]
    cfg.validate()
    return cfg


def _prepare_out(cfg: RunConfig) -> pathlib.Path:
    out = pathlib.Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "config": dataclasses.asdict(cfg),
        "config_hash": cfg.hash(),
        "version": __version__,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return out


def _datum(cfg: RunConfig, grid: GridSpec) -> Field:
    if cfg.datum_file:
        f = core.read_field(cfg.datum_file)
        if f.grid != grid:
            raise UsageError(
                f"datum file grid (n={f.grid.n}, L={f.grid.L}) does not match "
                f"configured grid (n={grid.n}, L={grid.L})"
            )
        return f
    params = dict(cfg.datum_params)
    if cfg.datum_family in ("gaussian_sum", "constrained_sum"):
        params.setdefault("seed", cfg.seed)
    return datums.make_field(grid, cfg.datum_family, **params)


def _write_summary(out: pathlib.Path, payload: dict) -> None:
    with open(out / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=float)


# ---------------------------------------------------------------------------
# subcommands


def cmd_evolve(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = GridSpec(cfg.grid_n, cfg.grid_L)
    model = evolution.get_model(cfg.model, grid, cfg.nonlin_form)
    u0 = _datum(cfg, grid)
    if model.real_state:
        u0 = Field(grid, np.real(u0.values).astype(complex))
    T = max(cfg.times)
    bound = evolution.stability_bound(model, cfg.scheme)
    dt = cfg.dt
    if dt is None:
        nst = max(int(np.ceil(T / bound)), 1)
        while any(abs(round(t / (T / nst)) * (T / nst) - t) > 1e-9 for t in cfg.times):
            nst += 1
        dt = T / nst
    if dt > bound:
        print(
            f"error: dt {dt:.3e} exceeds the published stability bound "
            f"{bound:.3e}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    traj = evolution.evolve_direct(
        model, u0, T, dt, cfg.scheme, save_times=cfg.times, workers=cfg.workers
    )
    evolution.save_trajectory(out / "trajectory", traj)

    n0 = grid_norm(traj.states[0])
    reports = []
    rows = []
    for t, st in zip(traj.times, traj.states):
        row = {"t": t, "l2": grid_norm(st), "l2_drift": abs(grid_norm(st) - n0) / n0}
        if cfg.model == "mNV":
            row["im_d_u"] = grid_norm(
                Field(grid, np.imag(core.d(st).values))
            ) / max(grid_norm(st), 1e-300)
        rows.append(row)
    if len(traj.times) >= 3 and traj.blow_up is None:
        for t, rep in diagnostics.pde_residual(traj, model, workers=cfg.workers):
            reports.append(rep)
    diagnostics.write_reports(out / "norms.csv", reports, run_id=cfg.hash()[:12])
    with open(out / "conservation.csv", "w") as fh:
        keys = sorted({k for r in rows for k in r})
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(str(r.get(k, "")) for k in keys) + "\n")
    _write_summary(
        out,
        {
            "times": traj.times,
            "blow_up": traj.blow_up,
            "conservation": rows,
            "dt": dt,
            "stability_bound": bound,
        },
    )
    if traj.blow_up is not None:
        br = traj.blow_up["bracket"]
        print(f"blow-up detected in t in [{br[0]:.6g}, {br[1]:.6g}]")
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_scatter(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = GridSpec(cfg.grid_n, cfg.grid_L)
    kg = KGrid(cfg.kgrid_nk, cfg.kgrid_K)
    u = _datum(cfg, grid)
    import warnings as _w

    with _w.catch_warnings(record=True) as caught:
        _w.simplefilter("always")
        s = scattering.scattering_transform(
            u, kg, tol=cfg.tol, workers=cfg.workers
        )
        summary = {
            "plancherel_ratio": s.norm() / max(grid_norm(u), 1e-300),
            "status": s.status,
            "failures": len(s.failures),
            "iterations_mean": float(s.iterations.mean()),
        }
        scattering.write_scattering(out / "scattering", s)
        if cfg.invert:
            rec = scattering.inverse_scattering(
                s, grid, tol=cfg.tol, workers=cfg.workers
            )
            core.write_field(out / "inverse.f2d1", rec)
            summary["involution_error"] = grid_norm(
                Field(grid, rec.values - u.values)
            ) / max(grid_norm(u), 1e-300)
        summary["warnings"] = [str(w.message) for w in caught]
    _write_summary(out, summary)
    if cfg.invert:
        print(f"involution error: {summary['involution_error']:.4e}")
    if s.failures:
        print(f"{len(s.failures)} nodes failed to converge", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_miura(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = GridSpec(cfg.grid_n, cfg.grid_L)
    u = _datum(cfg, grid)
    u = miura.constraint_project(u)
    mp = miura.miura_forward(u)
    inv = miura.miura_inverse(mp, tol=cfg.newton_tol)
    rt = grid_norm(Field(grid, inv.u.values - u.values)) / max(
        grid_norm(u), 1e-300
    )
    lam = miura.schrodinger_min_eig(mp, tol=1e-8, full_output=True)
    report = {
        "lambda_min": lam.value,
        "certificate_residual": lam.residual,
        "newton_status": inv.status,
        "F_history": inv.history,
        "q_integral": mp.integral,
        "roundtrip_error": rt,
        "integral_identity_error": abs(mp.integral - grid_norm(u) ** 2),
    }
    with open(out / "classifier.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True, default=float)
    core.write_field(out / "q.f2d1", mp.q)
    core.write_field(out / "u_recovered.f2d1", inv.u)
    _write_summary(out, report)
    print(f"roundtrip error: {rt:.4e}, lambda_min: {lam.value:.4e}")
    if not inv.converged:
        return EXIT_NUMERICAL
    if cfg.roundtrip_gate is not None and rt > cfg.roundtrip_gate:
        print(
            f"gate failure: roundtrip {rt:.3e} > {cfg.roundtrip_gate:.1e}",
            file=sys.stderr,
        )
        return EXIT_GATE
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = GridSpec(cfg.grid_n, cfg.grid_L)
    q = _datum(cfg, grid)
    qr = Field(grid, np.real(q.values).astype(complex))
    try:
        lam = miura.schrodinger_min_eig(qr, tol=cfg.tol, full_output=True)
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    inv = miura.miura_inverse(qr, tol=cfg.newton_tol, max_newton=25)
    report = {
        "lambda_min": lam.value,
        "certificate_residual": lam.residual,
        "newton_status": inv.status,
        "F_history": inv.history,
        "q_integral": float(np.real(core.grid_integral(qr))),
    }
    with open(out / "classifier.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True, default=float)
    _write_summary(out, report)
    print(f"lambda_min: {lam.value:.6e} (certified to {lam.residual:.1e})")
    return EXIT_OK if lam.converged else EXIT_NUMERICAL


def cmd_gn_scan(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = GridSpec(cfg.grid_n, cfg.grid_L)
    kg = KGrid(cfg.kgrid_nk, cfg.kgrid_K)
    members = datums.gn_ensemble(
        grid, cfg.ensemble_count, cfg.ensemble_amplitude, seed=cfg.seed + 100
    )
    reports = []
    ratios = []
    for name, u in members:
        rep = diagnostics.gn_ratio(
            u, cfg.gn_s, cfg.gn_r, kg, tol=cfg.tol, workers=cfg.workers
        )
        rep.extras["member"] = name
        reports.append(rep)
        ratios.append(rep.value)
        print(f"{name}: ratio {rep.value:.4f}")
    diagnostics.write_reports(out / "gn_ratios.csv", reports, run_id=cfg.hash()[:12])
    med = float(np.median(ratios))
    _write_summary(
        out,
        {"ratios": ratios, "median": med, "max_over_median": max(ratios) / med},
    )
    if not all(np.isfinite(ratios)):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    from . import acceptance

    out = _prepare_out(cfg)
    ctx = acceptance.Context(scale=cfg.scale, workers=cfg.workers)
    names = cfg.criteria or None
    results = acceptance.run_all(ctx, names)
    rows = []
    ok = True
    for res in results:
        print(res.line())
        ok &= res.passed
        rows.append(
            {"criterion": res.name, "passed": res.passed, "details": res.details}
        )
    _write_summary(out, {"results": rows, "passed": ok, "scale": cfg.scale})
    return EXIT_OK if ok else EXIT_GATE


COMMANDS = {
    "evolve": cmd_evolve,
    "scatter": cmd_scatter,
    "miura": cmd_miura,
    "spectrum": cmd_spectrum,
    "gn-scan": cmd_gn_scan,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dbarlab",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = build_config(
            args.command,
            args.config,
            {"out": args.out, "workers": args.workers, "seed": args.seed},
        )
    except (UsageError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except scattering.JostConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
