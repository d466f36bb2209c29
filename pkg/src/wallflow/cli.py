"""Command-line entry point.

Subcommands:
    simulate          uncontrolled or opposition-controlled runs, stats CSV
    train             the iterative observer/policy training loop
    evaluate          checkpointed policy vs a paired uncontrolled baseline
    dataset           supervised corpora generation
    supervised        train/evaluate the detection-plane observer task
    export-plots-data diagnostics matrices (profiles, spectra, joint PDF)

Every run writes its resolved configuration next to its outputs. All
randomness flows from the per-run master seed through named substreams, so
single-threaded reruns reproduce outputs bitwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import checkpoints, config as cfgmod, datasets, diagnostics, seeding, snapshots
from .config import ConfigError, RunConfig
from .control import (OppositionController, PolicyController, TrainSchedule,
                      ZeroController, run_training)
from .dns import ChannelEnv, run_uncontrolled, zero_control
from .grid import WallUnits
from .models import build_models
from .sampling import ObservationGrid


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))  # shortest round-trip, plain notation
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path: str, columns, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                wr.writerow([_fmt(row[c]) for c in columns])
            else:
                wr.writerow([_fmt(v) for v in row])


def write_matrix_csv(path: str, matrix: np.ndarray, row_header: np.ndarray,
                     col_header: np.ndarray, corner: str):
    """Headered matrix: first row is column coordinates, first column rows."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([corner] + [_fmt(float(c)) for c in col_header])
        for rh, row in zip(row_header, matrix):
            wr.writerow([_fmt(float(rh))] + [_fmt(float(v)) for v in row])


def _prepare_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    cfgmod.save_config(cfg, os.path.join(cfg.out_dir, "resolved_config.yaml"))
    return cfg.out_dir


def _flow_through_steps(env: ChannelEnv, state, flow_throughs: float) -> int:
    dt = env.compute_dt(state)
    return max(1, int(round(flow_throughs * env.grid.lx
                            / (env.config.u_b * dt))))


def _warm_state(cfg: RunConfig, env: ChannelEnv, seed: int):
    """Initial state: restart file, warm-start snapshot, or fresh warm-up."""
    if cfg.warm_start:
        path = cfg.warm_start
        if "{seed}" in path:
            path = path.format(seed=seed)
        return snapshots.state_from_snapshot(env, path), None
    state = env.initialize()
    n = _flow_through_steps(env, state, cfg.warmup_flow_throughs)
    if n <= 1:
        return state, None
    state, base = run_uncontrolled(env, state, n, window_fraction=0.4)
    return state, base


def _controller_for(cfg: RunConfig, env: ChannelEnv, wall_units: WallUnits):
    kind = cfg.controller.kind
    if kind == "none":
        return ZeroController()
    if kind == "opposition":
        return OppositionController(env, wall_units, cfg.controller.detection_y_plus,
                                    cfg.controller.gain, cfg.controller.clamp)
    if kind == "policy":
        if not cfg.controller.checkpoint:
            raise ConfigError("controller.kind=policy requires controller.checkpoint")
        policy, _, _ = checkpoints.load_models(cfg.controller.checkpoint)
        return PolicyController(policy, env.config.re_b, cfg.controller.clamp)
    raise ConfigError(f"unknown controller kind {kind!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    from .control import _stats_row
    from .diagnostics import tke as tke_fn
    for seed in cfg.seeds:
        env = cfgmod.build_env(cfg.env, seed=seeding.stream_seed(seed, "init"))
        state, base = _warm_state(cfg, env, seed)
        dpdx0 = base["dpdx_avg"] if base else state.dpdx
        wall_units = env.wall_units_from_dpdx(dpdx0)
        controller = _controller_for(cfg, env, wall_units)
        noise_rng = seeding.substream(seed, "noise")
        n_steps = _flow_through_steps(env, state, cfg.flow_throughs)
        og = ObservationGrid.build(env.grid, 1)
        rows: list[dict] = []
        dpdx_sum = 0.0
        for k in range(n_steps):
            obs = env.observe(state, cfg.schedule.noise_snr_inv, noise_rng)
            obs["state"] = state
            bc = controller.act(obs, env)
            state = env.step(state, bc)
            dpdx_sum += state.dpdx
            if k % cfg.stats_every == 0:
                rows.append(_stats_row(env, state, og, bc, dpdx0, tke_fn))
            if cfg.snapshot_every and (k + 1) % cfg.snapshot_every == 0:
                snapshots.save_snapshot(
                    os.path.join(out, f"snap_seed{seed}_{state.step:08d}.snap"),
                    state, env.grid, env.config.re_b)
        write_csv(os.path.join(out, f"stats_seed{seed}.csv"),
                  diagnostics.STATS_COLUMNS, rows)
        snapshots.save_snapshot(os.path.join(out, f"final_seed{seed}.snap"),
                                state, env.grid, env.config.re_b)
        print(f"seed {seed}: {len(rows)} stats rows, "
              f"mean dpdx {dpdx_sum / n_steps:.6e}, baseline {dpdx0:.6e}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    summary = []
    for seed in cfg.seeds:
        env = cfgmod.build_env(cfg.env, seed=seeding.stream_seed(seed, "init"))
        state, base = _warm_state(cfg, env, seed)
        if base is None:
            n = _flow_through_steps(env, state, max(cfg.warmup_flow_throughs, 1.0))
            state, base = run_uncontrolled(env, state, max(n, 10), window_fraction=0.5)
        dpdx0 = base["dpdx_avg"]
        wall_units = env.wall_units_from_dpdx(dpdx0)
        policy, observer = build_models(cfg.model.to_model_config(),
                                        seeding.stream_seed(seed, "model"))
        sc = cfg.schedule
        sched = TrainSchedule(
            episodes=sc.episodes, steps_per_episode=sc.steps_per_episode,
            epochs_per_episode=sc.epochs_per_episode, batch=sc.batch,
            action_interval=sc.action_interval, exploration=sc.exploration,
            sigma0=sc.sigma0, noise_snr_inv=sc.noise_snr_inv,
            use_pde_loss=sc.use_pde_loss, w_pde=sc.w_pde,
            use_policy_tke=sc.use_policy_tke, lam_n=sc.lam_n, lr=sc.lr,
            clamp=sc.clamp, obs_stride=sc.obs_stride,
            obs_stride_xz=sc.obs_stride_xz,
            buffer_capacity=sc.buffer_capacity)
        rngs = {name: seeding.substream(seed, name)
                for name in ("exploration", "noise", "sampler")}

        log_rows = []

        def on_episode(ep, ep_log, _seed=seed, _pol=policy, _obs=observer):
            for i, (ro, rp) in enumerate(ep_log["losses"]):
                log_rows.append({
                    "episode": ep, "epoch": i, "l_data": ro.l_data,
                    "l_pde": ro.l_pde, "l_policy": rp.l_policy,
                    "dr_window": ep_log["mean_dr"],
                })
            checkpoints.save_models(
                os.path.join(out, f"ckpt_seed{_seed}_ep{ep}.wfck"), _pol, _obs,
                extra={"episode": ep, "seed": _seed, "baseline_dpdx": dpdx0})

        state, ep_logs = run_training(env, policy, observer, sched, wall_units,
                                      rngs, state, dpdx0, on_episode,
                                      stats_every=cfg.stats_every)
        write_csv(os.path.join(out, f"training_log_seed{seed}.csv"),
                  ("episode", "epoch", "l_data", "l_pde", "l_policy", "dr_window"),
                  log_rows)
        all_rows = [r for ep_log in ep_logs for r in ep_log["rows"]]
        write_csv(os.path.join(out, f"stats_seed{seed}.csv"),
                  diagnostics.STATS_COLUMNS, all_rows)
        summary.append({
            "seed": seed, "baseline_dpdx": dpdx0,
            "final_mean_dr": ep_logs[-1]["mean_dr"],
            "episodes": len(ep_logs),
            "blowups": sum(1 for e in ep_logs if e["blew_up"]),
        })
        print(f"seed {seed}: final-episode mean DR "
              f"{ep_logs[-1]['mean_dr']*100:.2f}%")
    with open(os.path.join(out, "train_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return 0


def evaluate_paired(env: ChannelEnv, state, controller, n_steps: int,
                    stats_every: int = 1):
    """Controlled vs uncontrolled continuation from the same state."""
    base_state = state.copy()
    bc0 = zero_control(env.grid)
    dpdx_base = np.empty(n_steps)
    for i in range(n_steps):
        base_state = env.step(base_state, bc0)
        dpdx_base[i] = base_state.dpdx
    ctl_state = state.copy()
    dpdx_ctl = np.empty(n_steps)
    for i in range(n_steps):
        obs = env.observe(ctl_state)
        obs["state"] = ctl_state
        bc = controller.act(obs, env)
        ctl_state = env.step(ctl_state, bc)
        dpdx_ctl[i] = ctl_state.dpdx
    base_avg = float(dpdx_base.mean())
    ctl_avg = float(dpdx_ctl.mean())
    return {
        "dpdx_baseline": base_avg,
        "dpdx_controlled": ctl_avg,
        "dr": diagnostics.drag_reduction(base_avg, ctl_avg),
        "dpdx_base_series": dpdx_base,
        "dpdx_ctl_series": dpdx_ctl,
    }


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    results = []
    for seed in cfg.seeds:
        env = cfgmod.build_env(cfg.env, seed=seeding.stream_seed(seed, "init"))
        state, base = _warm_state(cfg, env, seed)
        dpdx0 = base["dpdx_avg"] if base else state.dpdx
        wall_units = env.wall_units_from_dpdx(dpdx0)
        controller = _controller_for(cfg, env, wall_units)
        n = _flow_through_steps(env, state, cfg.flow_throughs)
        res = evaluate_paired(env, state, controller, n, cfg.stats_every)
        res["seed"] = seed
        results.append(res)
        print(f"seed {seed}: DR = {res['dr']*100:.2f}% "
              f"(baseline dpdx {res['dpdx_baseline']:.6e}, "
              f"controlled {res['dpdx_controlled']:.6e})")
    write_csv(os.path.join(out, "evaluation.csv"),
              ("seed", "dpdx_baseline", "dpdx_controlled", "dr"),
              [{k: r[k] for k in ("seed", "dpdx_baseline", "dpdx_controlled", "dr")}
               for r in results])
    mean_dr = float(np.mean([r["dr"] for r in results]))
    print(f"mean DR over {len(results)} seeds: {mean_dr*100:.2f}%")
    return 0


def cmd_dataset(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    ds = cfg.dataset
    for re_b in ds.re_list:
        env_sec = cfgmod.EnvSection(**{**cfg.env.__dict__, "re_b": float(re_b)})
        seed = cfg.seeds[0]
        env = cfgmod.build_env(env_sec, seed=seeding.stream_seed(seed, "dataset"))
        state, base = _warm_state(cfg, env, seed)
        dpdx0 = base["dpdx_avg"] if base else state.dpdx
        wall_units = env.wall_units_from_dpdx(dpdx0)
        splits = [
            datasets.SplitSpec("train", ds.n_train, ds.include_pde_fields),
            datasets.SplitSpec("validation", ds.n_val, False),
            datasets.SplitSpec("test", ds.n_test, False),
        ]
        state, meta = datasets.generate_corpus(
            env, state, out, splits, ds.stride_steps, ds.detection_y_plus,
            wall_units, ds.obs_stride, ds.obs_stride_xz)
        print(f"re_b {re_b}: wrote splits "
              + ", ".join(f"{k}({v['count']})" for k, v in meta["splits"].items()))
    return 0


def cmd_supervised(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    sup = cfg.supervised
    corpus = sup.corpus or cfg.out_dir
    results = []
    for seed in cfg.seeds:
        rng = seeding.substream(seed, "sampler")
        _, observer = build_models(cfg.model.to_model_config(),
                                   seeding.stream_seed(seed, "model"))
        meta0, _ = datasets.load_split(corpus, "train", int(sup.train_re[0]))
        env_sec = cfgmod.EnvSection(**{**cfg.env.__dict__,
                                       "re_b": float(sup.train_re[0])})
        grid = cfgmod.resolve_grid(env_sec)
        og = ObservationGrid.build(grid, int(meta0["obs_stride"]),
                                   int(meta0.get("obs_stride_xz", 1)))
        history = datasets.supervised_train(
            observer, corpus, sup.train_re, og, sup.epochs, sup.batch, sup.lr,
            sup.use_pde_loss, sup.w_pde, rng)
        row = {"seed": seed, "final_l_data": history[-1]["l_data"]}
        for re_b in sup.test_re:
            env_sec_t = cfgmod.EnvSection(**{**cfg.env.__dict__, "re_b": float(re_b)})
            grid_t = cfgmod.resolve_grid(env_sec_t)
            meta_t, _ = datasets.load_split(corpus, "test", int(re_b))
            og_t = ObservationGrid.build(grid_t, int(meta_t["obs_stride"]),
                                         int(meta_t.get("obs_stride_xz", 1)))
            ev = datasets.supervised_evaluate(observer, corpus, int(re_b), og_t)
            row[f"mse_re{int(re_b)}"] = ev["mse"]
            row[f"corr_re{int(re_b)}"] = ev["correlation"]
            write_csv(os.path.join(out, f"scatter_seed{seed}_re{int(re_b)}.csv"),
                      ("truth", "prediction"),
                      list(zip(ev["scatter_truth"], ev["scatter_pred"])))
        results.append(row)
        print("seed", seed, {k: round(v, 4) for k, v in row.items() if k != "seed"})
    cols = sorted({k for r in results for k in r}, key=lambda c: (c != "seed", c))
    write_csv(os.path.join(out, "supervised_metrics.csv"), cols, results)
    return 0


def cmd_export_plots_data(cfg: RunConfig) -> int:
    """Diagnostics matrices from saved snapshots plus the stats CSV."""
    out = _prepare_out(cfg)
    run_dir = cfg.warm_start or cfg.out_dir
    snaps = sorted(f for f in os.listdir(run_dir) if f.endswith(".snap"))
    if not snaps:
        raise ConfigError(f"no .snap files in {run_dir}")
    hdr, _ = snapshots.load_snapshot(os.path.join(run_dir, snaps[0]))
    grid = snapshots.grid_from_header(hdr)
    env = ChannelEnv(cfgmod.EnvConfig(re_b=hdr.re_b, grid=grid, init="laminar"))
    wall_units = env.wall_units_from_dpdx(hdr.dpdx)
    prof = diagnostics.ProfileAccumulator(grid)
    spec = diagnostics.SpectraAccumulator(grid)
    u_samp, v_samp = [], []
    y15 = 15.0 * wall_units.nu / wall_units.u_tau0
    for name in snaps:
        _, fields = snapshots.load_snapshot(os.path.join(run_dir, name))
        state = env.make_state(fields["u"], fields["v"], fields["w"])
        prof.add(state)
        spec.add(state)
        us, vs, y_act = diagnostics.plane_fluctuations(state, grid, y15)
        u_samp.append(us)
        v_samp.append(vs)
    ps = prof.profiles(wall_units)
    write_csv(os.path.join(out, "profiles.csv"),
              ("y", "y_plus", "u_mean", "u_rms", "v_rms", "w_rms"),
              list(zip(ps.y, ps.y_plus, ps.u_mean, ps.u_rms, ps.v_rms, ps.w_rms)))
    pmx, pmz = spec.premultiplied()
    y_plus_rows = np.minimum(grid.y_centers, 2 * grid.delta - grid.y_centers) \
        * wall_units.u_tau0 / wall_units.nu
    write_matrix_csv(os.path.join(out, "spectra_x.csv"), pmx["map"],
                     y_plus_rows, pmx["wavelength"] * wall_units.u_tau0 / wall_units.nu,
                     "y_plus\\lambda_x_plus")
    write_matrix_csv(os.path.join(out, "spectra_z.csv"), pmz["map"],
                     y_plus_rows, pmz["wavelength"] * wall_units.u_tau0 / wall_units.nu,
                     "y_plus\\lambda_z_plus")
    hist, ue, ve = diagnostics.joint_pdf(np.concatenate(u_samp),
                                         np.concatenate(v_samp),
                                         bins=48, u_tau0=wall_units.u_tau0)
    uc = 0.5 * (ue[:-1] + ue[1:])
    vc = 0.5 * (ve[:-1] + ve[1:])
    write_matrix_csv(os.path.join(out, "jpdf.csv"), hist, uc, vc, "u_prime\\v_prime")
    stats_files = sorted(f for f in os.listdir(run_dir)
                         if f.startswith("stats") and f.endswith(".csv"))
    for name in stats_files:
        rows = []
        with open(os.path.join(run_dir, name)) as fh:
            rd = csv.DictReader(fh)
            for r in rd:
                rows.append((r["time"], r["dr"]))
        write_csv(os.path.join(out, f"dr_curve_{name}"), ("time", "dr"), rows)
    print(f"exported diagnostics for {len(snaps)} snapshots to {out}")
    return 0


# ---------------------------------------------------------------------------


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "dataset": cmd_dataset,
    "supervised": cmd_supervised,
    "export-plots-data": cmd_export_plots_data,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wallflow",
        description="Turbulent channel-flow control: simulation, training, "
                    "evaluation and diagnostics export.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="override a config key (dotted path)")
    args = parser.parse_args(argv)
    try:
        import yaml
        data = {}
        if args.config:
            with open(args.config) as fh:
                data = yaml.safe_load(fh) or {}
        data = cfgmod.apply_overrides(data, args.overrides)
        data["mode"] = args.command
        cfg = cfgmod.config_from_dict(data)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, FileNotFoundError, snapshots.SnapshotError,
            checkpoints.CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
