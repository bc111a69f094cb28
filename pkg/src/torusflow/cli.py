"""Command-line orchestration of runs, checks and sweeps.

    torusflow <subcommand> --config cfg.json [--out DIR] [--seed N] [--threads N]

Subcommands: identities, run, kelvin, energy, weber, cikelvin, jacobian,
sweep.  Exit code 0 = success, 1 = a check subcommand failed its tolerance,
2 = runtime error.  TORUSFLOW_OUT sets the default output directory.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import diagnostics as diag
from . import ensemble as ens
from . import lagrangian as lag
from .config import RunConfig, parse_config
from .errors import TorusflowError
from .integrators import run as run_spde
from .lie import identity_suite
from .noise import BrownianDriver
from .reporting import (
    default_output_dir,
    write_csv,
    write_field_dump,
    write_json,
    write_loop_csv,
    write_manifest,
    write_timeseries_csv,
)

IDENTITY_TOL = 1e-10


def _loop_from_config(cfg: RunConfig, d: int) -> lag.MaterialLoop:
    spec = dict(cfg.section("diagnostics")["loop"])
    kind = spec.pop("kind", "circle")
    spec.setdefault("P", 192)
    if kind == "circle":
        spec.setdefault("center", (np.pi,) * d)
        spec.setdefault("radius", 1.0)
    return lag.make_loop(kind, d=d, **spec)


def _field_trajectory(cfg: RunConfig):
    grid = cfg.grid()
    model = cfg.model(grid)
    u0 = cfg.initial_field(grid)
    tsec = cfg.section("time")
    _, w_seed, b_seed = cfg.seeds()
    n_steps = int(round(tsec["T"] / tsec["dt"]))
    driver = BrownianDriver(tsec["dt"], n_steps, model.basis.k_w, model.basis.k_b,
                            w_seed=w_seed, b_seed=b_seed)
    traj = run_spde(model, u0, tsec["T"], tsec["dt"], driver, tsec["scheme"],
                    save_stride=1)
    return traj


def cmd_identities(cfg: RunConfig, out_dir: str, threads: int) -> int:
    grid = cfg.grid()
    seed, _, _ = cfg.seeds()
    reports = identity_suite(grid, seed=seed)
    rows = [r.as_row() for r in reports]
    write_csv(os.path.join(out_dir, "identities.csv"),
              ["identity_name", "grid", "seed", "residual"],
              [[r[0], r[1], str(r[2]), r[3]] for r in rows])
    worst = max(r.residual_l2 for r in reports)
    write_manifest(out_dir, cfg, {"worst_residual": worst, "tolerance": IDENTITY_TOL})
    return 0 if worst <= IDENTITY_TOL else 1


def cmd_run(cfg: RunConfig, out_dir: str, threads: int) -> int:
    traj = _field_trajectory(cfg)
    stride = cfg.section("time")["save_stride"]
    fmt = "csv" if "csv" in cfg.section("output")["formats"] else "bin"
    kept = 0
    for i, t in enumerate(traj.times):
        step = int(round(t / traj.dt))
        if step % stride and i != len(traj.times) - 1:
            continue
        write_field_dump(traj.at(i), os.path.join(out_dir, f"u_{step:06d}"), t, fmt)
        kept += 1
    write_manifest(out_dir, cfg, {
        "snapshots": kept,
        "scheme": traj.scheme,
        "basis_digest": traj.model.basis.digest(),
        "driver": traj.driver.digest(),
    })
    return 0


def cmd_kelvin(cfg: RunConfig, out_dir: str, threads: int) -> int:
    traj = _field_trajectory(cfg)
    dsec = cfg.section("diagnostics")
    loop = _loop_from_config(cfg, traj.grid.d)
    flavor = dsec["flavor"]
    loop_traj = lag.advect_loop(traj, loop, flavor)
    digest = cfg.digest()
    kr = diag.kelvin_residual(traj, loop_traj, digest)
    dec = diag.circulation_transport_decomposition(traj, loop_traj, flavor, digest)
    write_timeseries_csv(os.path.join(out_dir, "kelvin.csv"),
                         [kr, dec["measured_change"], dec["advection_drift"],
                          dec["noise_drift"], dec["martingale"], dec["closure_residual"]])
    write_loop_csv(os.path.join(out_dir, "loop.csv"), loop_traj)
    write_manifest(out_dir, cfg, {
        "final_kelvin_residual": kr.final(),
        "max_kelvin_residual": kr.max_abs(),
        "final_closure_residual": dec["closure_residual"].final(),
        "flavor": flavor,
    })
    return 0


def cmd_energy(cfg: RunConfig, out_dir: str, threads: int) -> int:
    traj = _field_trajectory(cfg)
    led = diag.energy_ledger(traj, cfg.digest())
    rows = [[led.times[i], led.energy[i], led.dissipation_integral[i],
             led.drift_quadratures["ito_drift"][i], led.martingale[i],
             led.closure_residual[i]] for i in range(len(led.times))]
    write_csv(os.path.join(out_dir, "energy.csv"),
              ["t", "energy", "dissipation_integral", "ito_drift", "martingale",
               "closure_residual"], rows)
    write_manifest(out_dir, cfg, {
        "energy_drift_rel": led.energy_drift_rel(),
        "balance_residual_rel": led.balance_residual_rel(),
        "max_closure_residual": float(np.max(np.abs(led.closure_residual))),
    })
    return 0


def cmd_weber(cfg: RunConfig, out_dir: str, threads: int) -> int:
    traj = _field_trajectory(cfg)
    dsec = cfg.section("diagnostics")
    digest = cfg.digest()
    n_label = dsec["n_label"]
    pts = diag.label_grid_points(traj.grid, n_label)
    ensb = lag.advect(traj, pts, "strat", with_defgrad=True)
    pull = diag.weber_pullback_residual(traj, ensb, n_label, digest)
    disp = lag.solve_back_to_labels(traj)
    label = diag.weber_label_reconstruction(traj, disp, digest)
    write_timeseries_csv(os.path.join(out_dir, "weber_pullback.csv"),
                         [pull["curl_residual"], pull["loop_mismatch"]])
    write_timeseries_csv(os.path.join(out_dir, "weber_label.csv"), [label])
    write_manifest(out_dir, cfg, {
        "final_pullback_curl": pull["curl_residual"].final(),
        "final_label_distance": label.final(),
        "n_label": n_label,
    })
    return 0


def cmd_cikelvin(cfg: RunConfig, out_dir: str, threads: int) -> int:
    grid = cfg.grid()
    model = cfg.model(grid)
    u0 = cfg.initial_field(grid)
    tsec = cfg.section("time")
    dsec = cfg.section("diagnostics")
    _, w_seed, b_seed = cfg.seeds()
    loop = _loop_from_config(cfg, grid.d)
    est = ens.conditional_kelvin(model, u0, loop, tsec["T"], tsec["dt"],
                                 w_seed, b_seed, dsec["M"], tsec["scheme"],
                                 workers=threads)
    payload = est.to_dict()
    if dsec["M"] < 2:
        payload["stderr_reliable"] = False
        payload["note"] = "stderr is unreliable for M < 2"
    write_json(os.path.join(out_dir, "cikelvin.json"), payload)
    write_csv(os.path.join(out_dir, "members.csv"), ["member", "value"],
              [[str(i), v] for i, v in enumerate(est.member_values)])
    write_manifest(out_dir, cfg, {"estimate": payload})
    return 0


def cmd_jacobian(cfg: RunConfig, out_dir: str, threads: int) -> int:
    traj = _field_trajectory(cfg)
    rng = np.random.default_rng(cfg.seeds()[0])
    pts = rng.uniform(0.0, 2.0 * np.pi, size=(16, traj.grid.d))
    rep = lag.jacobian_formula_check(traj, list(traj.model.basis.xi), traj.driver,
                                     traj.dt, traj.n_steps, pts)
    dets = rep["determinants"][-1]
    write_csv(os.path.join(out_dir, "jacobian.csv"),
              ["particle", "det_defgrad", "formula_value"],
              [[str(i), rep["determinants"][-1][i], rep["formula_values"][-1][i]]
               for i in range(dets.size)])
    write_manifest(out_dir, cfg, {
        "max_rel_mismatch": rep["max_rel_mismatch"],
        "max_abs_det_minus_1": float(np.max(np.abs(dets - 1.0))),
    })
    return 0


def cmd_sweep(cfg: RunConfig, out_dir: str, threads: int) -> int:
    dsec = cfg.section("diagnostics")
    sweep = dsec["sweep"] or {"kind": "dt-halving", "points": None}
    kind = sweep.get("kind", "dt-halving")
    tsec = cfg.section("time")
    _, w_seed, b_seed = cfg.seeds()

    if kind == "dt-halving":
        dts = sweep.get("points") or [4 * tsec["dt"], 2 * tsec["dt"], tsec["dt"]]
        dts = sorted(float(x) for x in dts)
        finest = min(dts)
        for dt in dts:
            n = tsec["T"] / dt
            fac = dt / finest
            if abs(round(n) - n) > 1e-9 * n or abs(round(fac) - fac) > 1e-12:
                raise TorusflowError(
                    f"sweep dt {dt} must divide T and be an integer multiple of {finest}")
        grid = cfg.grid()
        model = cfg.model(grid)
        u0 = cfg.initial_field(grid)
        loop = _loop_from_config(cfg, grid.d)
        n_fine = int(round(tsec["T"] / finest))
        base = BrownianDriver(finest, n_fine, model.basis.k_w, model.basis.k_b,
                              w_seed=w_seed, b_seed=b_seed)
        vals = []
        for dt in sorted(dts, reverse=True):
            fac = int(round(dt / finest))
            d = base.coarsen(fac) if fac > 1 else base
            traj = run_spde(model, u0, tsec["T"], dt, d, tsec["scheme"])
            lt = lag.advect_loop(traj, loop, dsec["flavor"])
            dec = diag.circulation_transport_decomposition(traj, lt, dsec["flavor"])
            vals.append(dec["closure_residual"].max_abs())
        report = ens.run_sweep(sorted(dts, reverse=True), vals, "dt-halving")
    elif kind == "M-scaling":
        sizes = sweep.get("points") or (dsec["m_sizes"] or [64, 256, 1024])
        grid = cfg.grid()
        model = cfg.model(grid)
        u0 = cfg.initial_field(grid)
        loop = _loop_from_config(cfg, grid.d)
        est = ens.conditional_kelvin(model, u0, loop, tsec["T"], tsec["dt"],
                                     w_seed, b_seed, int(max(sizes)), tsec["scheme"],
                                     workers=threads)
        report = ens.stderr_scaling(est.member_values, sizes)
        report["kind"] = "M-scaling"
    elif kind == "amplitude":
        amps = sweep.get("points") or [0.2, 0.1, 0.05]
        grid = cfg.grid()
        u0 = cfg.initial_field(grid)
        tdur, dt = tsec["T"], tsec["dt"]
        n_steps = int(round(tdur / dt))
        from .grid import l2_norm
        from .models import ModelSpec
        from .noise import build_basis

        bsec = cfg.section("basis")
        msec = cfg.section("model")
        det_basis = build_basis(grid, "none", eta_kind=bsec["eta_kind"],
                                eta_amplitude=bsec["eta_amplitude"])
        det_model = ModelSpec(msec["family"], det_basis, nu=msec["nu"],
                              passive_kind=msec["passive_kind"])
        det_driver = BrownianDriver(dt, n_steps, 0, det_basis.k_b, w_seed=w_seed,
                                    b_seed=b_seed)
        ref = run_spde(det_model, u0, tdur, dt, det_driver, tsec["scheme"]).final
        vals = []
        for a in sorted(amps, reverse=True):
            basis = build_basis(grid, bsec["kind"], float(a), None,
                                bsec["eta_kind"], bsec["eta_amplitude"])
            model = ModelSpec(msec["family"], basis, nu=msec["nu"],
                              passive_kind=msec["passive_kind"])
            driver = BrownianDriver(dt, n_steps, basis.k_w, basis.k_b,
                                    w_seed=w_seed, b_seed=b_seed)
            traj = run_spde(model, u0, tdur, dt, driver, tsec["scheme"])
            vals.append(l2_norm(traj.final - ref) / max(l2_norm(ref), 1e-300))
        report = ens.run_sweep(sorted(amps, reverse=True), vals, "amplitude")
    else:
        raise TorusflowError(f"unknown sweep kind {kind!r}")

    write_json(os.path.join(out_dir, "sweep.json"), report)
    write_csv(os.path.join(out_dir, "sweep.csv"), ["point", "value"],
              list(zip(report.get("points", report.get("sizes")),
                       report.get("values", report.get("stderr")))))
    write_manifest(out_dir, cfg, {"sweep": report})
    return 0


_COMMANDS = {
    "identities": cmd_identities,
    "run": cmd_run,
    "kelvin": cmd_kelvin,
    "energy": cmd_energy,
    "weber": cmd_weber,
    "cikelvin": cmd_cikelvin,
    "jacobian": cmd_jacobian,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="torusflow", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override seeds.master")
    parser.add_argument("--threads", type=int, default=0, help="worker cap for ensembles")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            raw = cfg.raw
            raw["seeds"]["master"] = int(args.seed)
            raw["seeds"]["w"] = None if cfg.raw["seeds"]["w"] is None else raw["seeds"]["w"]
            cfg = RunConfig(raw)
        out_dir = args.out or cfg.section("output")["directory"] or default_output_dir()
        os.makedirs(out_dir, exist_ok=True)
        return _COMMANDS[args.subcommand](cfg, out_dir, args.threads)
    except TorusflowError as e:
        print(f"torusflow: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"torusflow: i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
