"""Command-line driver: configuration, subcommands, bit-stable outputs.

One JSON config file is the canonical experiment artifact; flags override
individual keys.  Every output embeds the config hash and master seed, so
identical inputs produce byte-identical files.

Exit codes: 0 success, 2 config error, 3 CFL or validation failure,
4 numerical blow-up.  Failures print one machine-parseable line on
standard error: "error: <kind>: <message>".
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, harness
from .flux import FluxFunction, MonotoneFaceFlux, make_flux, validate_flux
from .mesh import build_grid
from .noise import ModeSpec, NoiseModel, build_cell_table
from .scheme import BlowUpError, CFLError, cfl_time_grid, init_state, run


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


DEFAULT_CONFIG = {
    "grid": {"dim": 1, "m": 32},
    "flux": {"name": "burgers", "kind": "godunov", "params": {}},
    "noise": {"modes": [], "seed": 0},
    "time": {"t_final": 0.5, "theta": 0.5},
    "initial": {"name": "sine", "params": {"amplitude": 0.8, "frequency": 1}},
    "output": {"dir": ".", "times": []},
    "ensemble": {"paths": 100, "p": 2},
    "refine": {"m_list": [8, 16, 32, 64], "p": 1},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, overrides: list[str]) -> dict:
    config = DEFAULT_CONFIG
    if path is not None:
        try:
            with open(path) as f:
                user = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        config = _merge(config, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key.path=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config = dict(config)
        keys = dotted.split(".")
        for key in keys[:-1]:
            child = dict(node.get(key, {}))
            node[key] = child
            node = child
        node[keys[-1]] = value
    return config


def config_hash(config: dict) -> str:
    """Stable hash of the canonical JSON serialization."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _validated(config: dict) -> dict:
    grid_cfg = config["grid"]
    if grid_cfg.get("dim") not in (1, 2):
        raise ConfigError("grid.dim must be 1 or 2")
    if not isinstance(grid_cfg.get("m"), int) or grid_cfg["m"] < 1:
        raise ConfigError("grid.m must be a positive integer")
    tcfg = config["time"]
    if not (isinstance(tcfg.get("t_final"), (int, float)) and tcfg["t_final"] > 0):
        raise ConfigError("time.t_final must be positive")
    if not (isinstance(tcfg.get("theta"), (int, float)) and 0 < tcfg["theta"] < 1):
        raise ConfigError("time.theta must lie in (0, 1)")
    return config


def build_flux(config: dict) -> tuple[FluxFunction, MonotoneFaceFlux]:
    fcfg = config["flux"]
    dim = config["grid"]["dim"]
    try:
        fl = make_flux(fcfg.get("name", "burgers"), dim, fcfg.get("params"))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    kind = fcfg.get("kind", "godunov")
    try:
        nf = MonotoneFaceFlux(kind, fl, fcfg.get("rusanov_lam"))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return fl, nf


def build_noise(config: dict) -> NoiseModel:
    ncfg = config["noise"]
    modes = []
    for spec in ncfg.get("modes", []):
        try:
            modes.append(ModeSpec(
                sigma=float(spec["sigma"]),
                freq=tuple(int(k) for k in spec["freq"]),
                kind=spec.get("kind", "sin"),
                q=int(spec.get("q", 1)),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad noise mode {spec!r}: {e}") from e
        if len(modes[-1].freq) != config["grid"]["dim"]:
            raise ConfigError("noise mode frequency must have one entry per axis")
    return NoiseModel(config["grid"]["dim"], tuple(modes))


def build_initial(config: dict):
    icfg = config["initial"]
    name = icfg.get("name", "sine")
    params = icfg.get("params", {})
    dim = config["grid"]["dim"]
    if name == "constant":
        value = float(params.get("value", 0.0))
        return lambda x: np.full(np.asarray(x).shape[:-1], value)
    if name == "sine":
        amp = float(params.get("amplitude", 0.8))
        freq = int(params.get("frequency", 1))
        if dim == 1:
            return lambda x: amp * np.sin(2 * np.pi * freq * x[..., 0])
        return lambda x: amp * np.sin(2 * np.pi * freq * x[..., 0]) * np.sin(
            2 * np.pi * freq * x[..., 1])
    if name == "riemann":
        if dim != 1:
            raise ConfigError("riemann initial data is one-dimensional")
        rp = {"u_l": float(params.get("u_l", 1.0)),
              "u_r": float(params.get("u_r", 0.0)),
              "x0": float(params.get("x0", 0.25))}
        u0 = harness.riemann_initial(rp)
        return lambda x: u0(x[..., 0])
    raise ConfigError(f"unknown initial data {name!r}")


def _out_dir(config: dict, cli_out: str | None) -> Path:
    path = Path(cli_out if cli_out is not None else config["output"].get("dir", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict):
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _common(config: dict):
    config = _validated(config)
    grid = build_grid(config["grid"]["dim"], config["grid"]["m"])
    fl, nf = build_flux(config)
    fl.check_lipschitz()
    model = build_noise(config)
    table = build_cell_table(model, grid, quad_order=5)
    tg = cfl_time_grid(grid, fl.la, config["time"]["theta"],
                       config["time"]["t_final"])
    u0 = build_initial(config)
    state0 = init_state(u0, grid)
    seed = int(config["noise"].get("seed", 0))
    return grid, fl, nf, model, table, tg, u0, state0, seed


def _write_snapshot_csv(path: Path, grid, values, header_lines):
    with open(path, "w", newline="\n") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        if grid.dim == 1:
            f.write("i,value\n")
            for i, v in enumerate(values):
                f.write(f"{i},{format(v, '.17g')}\n")
        else:
            f.write("i,j,value\n")
            for flat, v in enumerate(values):
                i, j = grid.multi_index(flat)
                f.write(f"{i},{j},{format(v, '.17g')}\n")


def cmd_run(config: dict, out: str | None) -> int:
    grid, fl, nf, model, table, tg, u0, state0, seed = _common(config)
    traj = run(state0, tg, nf, table, seed=seed)
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    header = [f"config_hash={chash}", f"seed={seed}"]
    times = config["output"].get("times") or [tg.t_final]
    written = []
    for k, t in enumerate(times):
        values = traj.value_at(float(t))
        name = f"snapshot_{k}.csv"
        _write_snapshot_csv(out_dir / name, grid, values, header)
        written.append({"time": float(t), "file": name})
    _write_json(out_dir / "manifest.json", {
        "config_hash": chash, "seed": seed,
        "grid": {"dim": grid.dim, "m": grid.m, "h": grid.h},
        "time": {"t_final": tg.t_final, "n_steps": tg.n_steps,
                 "dt": float(tg.dts[0])},
        "snapshots": written,
    })
    return 0


def cmd_diagnose(config: dict, out: str | None) -> int:
    grid, fl, nf, model, table, tg, u0, state0, seed = _common(config)
    theta = config["time"]["theta"]
    traj = run(state0, tg, nf, table, seed=seed, keep_records=True)
    measures = diagnostics.step_measures(traj, nf)
    ledger = diagnostics.energy_ledger(traj, nf, table, measures)
    bv = diagnostics.weak_bv_sums(traj, nf, theta, measures)
    min_m = min((m.min_value() for m in measures), default=0.0)
    moments = {
        str(p): diagnostics.tightness_moments(traj, nf, p, measures).sup_moment
        for p in (2, 4, 6)
    }
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    header = [f"config_hash={chash}", f"seed={seed}"]
    diagnostics.write_ledger_csv(ledger, out_dir / "ledger.csv", header)
    vol = grid.cell_volume
    v0_sq = vol * float(np.sum(traj.states[0] ** 2))
    report = {
        "config_hash": chash, "seed": seed,
        "max_energy_residual": ledger.max_residual,
        "total_dissipation": ledger.total_dissipation,
        "total_noise_input": ledger.total_noise_input,
        "min_dissipation_value": min_m,
        "weak_bv": {
            "space_sum": bv.space_sum,
            "time_sum_flat": bv.time_sum_flat,
            "time_sum_full": bv.time_sum_full,
            "bound_flat": diagnostics.weak_bv_bound(v0_sq, model.d0,
                                                    tg.t_final, theta),
            "bound_full": diagnostics.weak_bv_bound(v0_sq, model.d0,
                                                    tg.t_final, theta, 2.0),
            "pathwise_controls_ok": bv.all_controls_ok,
        },
        "sup_moments": moments,
        "pass": bool(ledger.max_residual < 1e-8 and min_m > -1e-10
                     and bv.all_controls_ok),
    }
    _write_json(out_dir / "report.json", report)
    return 0 if report["pass"] else 3


def _nf_factory(config: dict):
    def factory(grid):
        cfg = dict(config)
        cfg["grid"] = {"dim": grid.dim, "m": grid.m}
        return build_flux(cfg)[1]
    return factory


def cmd_converge(config: dict, out: str | None) -> int:
    config = _validated(config)
    if config["grid"]["dim"] != 1:
        raise ConfigError("convergence study is one-dimensional")
    icfg = config["initial"]
    if icfg.get("name") != "riemann":
        raise ConfigError("convergence study needs riemann initial data")
    params = icfg.get("params", {})
    rp = {"u_l": float(params.get("u_l", 1.0)),
          "u_r": float(params.get("u_r", 0.0)),
          "x0": float(params.get("x0", 0.25))}
    u0 = harness.riemann_initial(rp)
    exact = lambda x, t: harness.exact_solution("burgers_riemann", rp, x[..., 0], t)
    if config["flux"].get("name", "burgers") != "burgers":
        raise ConfigError("the riemann reference solves the burgers flux")
    table = harness.deterministic_convergence(
        config["refine"]["m_list"], _nf_factory(config),
        lambda x: u0(x[..., 0]), exact, config["time"]["t_final"],
        config["time"]["theta"], int(config["refine"].get("p", 1)))
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    harness.write_table_csv(table, out_dir / "convergence.csv",
                            [f"config_hash={chash}"])
    _write_json(out_dir / "convergence_meta.json",
                {"config_hash": chash, "kind": "deterministic",
                 "m_list": config["refine"]["m_list"]})
    return 0


def cmd_mc(config: dict, out: str | None) -> int:
    grid, fl, nf, model, table, tg, u0, state0, seed = _common(config)
    ecfg = config["ensemble"]
    n_paths = int(ecfg.get("paths", 100))
    if n_paths < 2:
        raise ConfigError("ensemble.paths must be >= 2")
    stats = harness.mc_ensemble(state0, tg, nf, table, seed, n_paths,
                                p=int(ecfg.get("p", 2)), keep_records=True,
                                keep_trajectories=True)
    energy = diagnostics.energy_identity_mc(stats.trajectories, nf, table)
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    _write_json(out_dir / "mc_stats.json", {
        "config_hash": chash, "seed": seed, "paths": n_paths,
        "p": stats.p, "lp_mean": stats.lp_mean, "lp_se": stats.lp_se,
        "final_energy_mean": stats.final_energy_mean,
        "energy_balance_mean": energy.balance_mean,
        "energy_balance_se": energy.balance_se,
        "energy_balance_z": energy.balance_z,
        "noise_kick_z": energy.kick_z,
    })
    return 0


def cmd_couple(config: dict, out: str | None) -> int:
    config = _validated(config)
    model = build_noise(config)
    u0 = build_initial(config)
    table = harness.coupled_refinement_study(
        config["grid"]["dim"], config["refine"]["m_list"],
        _nf_factory(config), model, u0, config["time"]["t_final"],
        config["time"]["theta"], int(config["ensemble"].get("paths", 16)),
        int(config["noise"].get("seed", 0)),
        p=int(config["refine"].get("p", 1)))
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    harness.write_table_csv(table, out_dir / "coupled.csv",
                            [f"config_hash={chash}",
                             f"seed={config['noise'].get('seed', 0)}"])
    _write_json(out_dir / "coupled_meta.json",
                {"config_hash": chash, "kind": "coupled",
                 "seed": int(config["noise"].get("seed", 0)),
                 "m_list": config["refine"]["m_list"]})
    return 0


def cmd_validate_flux(config: dict, out: str | None) -> int:
    config = _validated(config)
    fl, nf = build_flux(config)
    report = validate_flux(nf, fl, value_range=(-2.0, 2.0))
    chash = config_hash(config)
    out_dir = _out_dir(config, out)
    payload = dict(report.as_dict())
    payload["config_hash"] = chash
    _write_json(out_dir / "flux_report.json", payload)
    if not report.all_ok:
        raise CFLError("face flux fails an axiom; see flux_report.json")
    return 0


COMMANDS = {
    "run": cmd_run,
    "diagnose": cmd_diagnose,
    "converge": cmd_converge,
    "mc": cmd_mc,
    "couple": cmd_couple,
    "validate-flux": cmd_validate_flux,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="stofv",
        description="Finite-volume solver for scalar conservation laws on "
                    "the torus with multiplicative stochastic forcing.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", nargs="?", default=None,
                        help="JSON config file (defaults apply if omitted)")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a config key, e.g. --set grid.m=64")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (results are identical "
                             "for any value)")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.set)
        code = COMMANDS[args.command](config, args.out)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except (CFLError, ValueError) as e:
        print(f"error: validation: {e}", file=sys.stderr)
        return 3
    except BlowUpError as e:
        print(f"error: blowup: {e}", file=sys.stderr)
        return 4
    return code


if __name__ == "__main__":
    sys.exit(main())
