"""Supervised observer corpora: generation from uncontrolled runs and the
train/evaluate protocol for the wall-pressure -> detection-plane-velocity
task.

A corpus split stores, per sample: the wall pressure, the wall-normal
velocity at the plane nearest the requested wall distance, their rms
factors, and (for training splits) the collocated snapshot pair one solver
step apart that the equation-residual loss consumes. Samples alternate
walls (the top wall reflected into bottom-frame coordinates), and splits
are taken sequentially in time so they never overlap.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import diffprog as dp
from .control import reflect_snapshot, _normalize, _rms
from .dns import ChannelEnv, FlowState, zero_control
from .grid import WallUnits
from .losses import pde_loss
from .models import ObserverModel
from .sampling import ObservationGrid, restrict_state


@dataclass
class SplitSpec:
    name: str
    count: int
    include_pde: bool


def generate_corpus(env: ChannelEnv, state: FlowState, out_dir: str,
                    splits: list[SplitSpec], stride_steps: int,
                    detection_y_plus: float, wall_units: WallUnits,
                    obs_stride: int = 4, obs_stride_xz: int = 1):
    """Run the uncontrolled solver and write corpus splits as .npz files.

    Each recorded instant contributes two samples (one per wall); pairs of
    consecutive solver steps are stored when the split carries the
    equation-loss fields.
    """
    g = env.grid
    og = ObservationGrid.build(g, obs_stride, obs_stride_xz)
    y_d = detection_y_plus * wall_units.nu / wall_units.u_tau0
    jd = og.nearest_plane(y_d)
    actual_y_plus = float(og.y_planes[jd] * wall_units.u_tau0 / wall_units.nu)
    bc = zero_control(g)
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "re_b": env.config.re_b,
        "nx": g.nx, "ny": g.ny, "nz": g.nz,
        "obs_stride": obs_stride,
        "obs_stride_xz": obs_stride_xz,
        "plane_index": jd,
        "detection_y_plus": detection_y_plus,
        "actual_y_plus": actual_y_plus,
        "u_tau0": wall_units.u_tau0,
        "dpdx0": wall_units.u_tau0**2 / g.delta,
        "stride_steps": stride_steps,
        "splits": {},
    }

    for spec in splits:
        n_instants = (spec.count + 1) // 2
        rec = {k: [] for k in ("pw", "vplane", "pw_rms", "vplane_rms", "time",
                               "dpdx")}
        pair = {k: [] for k in ("u", "v", "w", "p", "u2", "v2", "w2", "pw2",
                                "pw2_rms", "dt")}
        for _ in range(n_instants):
            for _ in range(stride_steps):
                state = env.step(state, bc)
            snap_t = restrict_state(state, og)
            obs_t = env.observe(state)
            t_first = state.time
            dpdx_first = state.dpdx
            state = env.step(state, bc)
            snap_t2 = restrict_state(state, og)
            obs_t2 = env.observe(state)
            dt_pair = state.time - t_first
            for wall in ("bot", "top"):
                if wall == "bot":
                    s1, s2 = snap_t, snap_t2
                    pw1, pw2 = obs_t["p_bot"], obs_t2["p_bot"]
                else:
                    s1, s2 = reflect_snapshot(snap_t), reflect_snapshot(snap_t2)
                    pw1, pw2 = obs_t["p_top"], obs_t2["p_top"]
                vpl = s2["v"][:, jd, :]  # outcome plane, one step ahead
                rec["pw"].append(_normalize(pw1.astype(np.float64)).astype(np.float32))
                rec["pw_rms"].append(_rms(pw1))
                rec["vplane"].append((vpl / max(_rms(vpl), 1e-300)).astype(np.float32))
                rec["vplane_rms"].append(_rms(vpl))
                rec["time"].append(t_first)
                rec["dpdx"].append(dpdx_first)
                if spec.include_pde:
                    for comp in ("u", "v", "w", "p"):
                        pair[comp].append(s1[comp])
                    for comp in ("u", "v", "w"):
                        pair[comp + "2"].append(s2[comp])
                    pair["pw2"].append(_normalize(pw2.astype(np.float64)).astype(np.float32))
                    pair["pw2_rms"].append(_rms(pw2))
                    pair["dt"].append(dt_pair)
        arrays = {k: np.stack(v)[: spec.count] for k, v in rec.items()}
        if spec.include_pde:
            arrays.update({k: np.stack(v)[: spec.count] for k, v in pair.items()})
        path = os.path.join(out_dir, f"{spec.name}_re{int(env.config.re_b)}.npz")
        np.savez_compressed(path, **arrays)
        meta["splits"][spec.name] = {
            "path": os.path.basename(path),
            "count": int(arrays["pw"].shape[0]),
            "t_start": float(arrays["time"].min()),
            "t_end": float(arrays["time"].max()),
            "include_pde": spec.include_pde,
        }
    with open(os.path.join(out_dir, f"meta_re{int(env.config.re_b)}.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    return state, meta


def load_split(corpus_dir: str, split: str, re_b: int):
    with open(os.path.join(corpus_dir, f"meta_re{re_b}.json")) as fh:
        meta = json.load(fh)
    data = dict(np.load(os.path.join(corpus_dir, f"{split}_re{re_b}.npz")))
    return meta, data


def supervised_train(observer: ObserverModel, corpus_dir: str, train_re: list[int],
                     og: ObservationGrid, epochs: int, batch: int, lr: float,
                     use_pde_loss: bool, w_pde: float,
                     rng: np.random.Generator) -> list[dict]:
    """Adam training on the detection-plane task; returns per-epoch losses.

    The data loss supervises only the v slice at the detection plane; the
    optional equation residual regularizes the full predicted fields using
    the stored snapshot pairs.
    """
    sets = []
    for re_b in train_re:
        meta, data = load_split(corpus_dir, "train", int(re_b))
        sets.append((meta, data))
    history = []
    for ep in range(epochs):
        meta, data = sets[rng.integers(len(sets))]
        n = data["pw"].shape[0]
        idx = rng.choice(n, size=min(batch, n), replace=False)
        idx = np.sort(idx)
        rep = _supervised_step(observer, meta, data, idx, og, lr,
                               use_pde_loss, w_pde)
        history.append(rep)
    return history


def _supervised_step(observer, meta, data, idx, og, lr, use_pde_loss, w_pde):
    jd = int(meta["plane_index"])
    u_tau0 = float(meta["u_tau0"])
    re_b = float(meta["re_b"])
    wu = WallUnits.from_u_tau(u_tau0, 1.0 / re_b, 1.0)  # nu = u_b*delta/re_b
    pw = og.restrict_wall(data["pw"][idx].astype(np.float64))
    k = len(idx)
    phi = np.zeros_like(pw)
    res = np.full(k, re_b)
    gt_plane = (data["vplane"][idx].astype(np.float64)
                * data["vplane_rms"][idx][:, None, None])
    rms_plane = np.maximum(np.sqrt((gt_plane**2).mean(axis=(1, 2))), 1e-12)

    if use_pde_loss:
        pw2 = og.restrict_wall(data["pw2"][idx].astype(np.float64))
        pred_all = observer.forward(np.concatenate([pw, pw2]),
                                    np.concatenate([pw, pw2]),
                                    np.full(2 * k, re_b), og.y_norm)
        pred = {c: pred_all[c][0:k] for c in ("u", "v", "w")}
        pred2 = {c: pred_all[c][k:2 * k] for c in ("u", "v", "w")}
    else:
        pred = observer.forward(pw, pw, res, og.y_norm)
        pred2 = None

    vslice = pred["v"][:, :, jd, :]
    diff = vslice - gt_plane
    l_data = dp.mean(dp.power(diff * (1.0 / rms_plane[:, None, None]), 2.0))
    total = l_data
    l_pde_val = 0.0
    if use_pde_loss:
        p_t = data["p"][idx].astype(np.float64)
        dts = data["dt"][idx].astype(np.float64)
        dpdxs = data["dpdx"][idx].astype(np.float64)
        l_pde = pde_loss(pred, pred2, p_t, dpdxs, dts, wu, og)
        total = total + dp.mul(l_pde, w_pde)
        l_pde_val = float(l_pde.values)
    observer.store.zero_grad()
    dp.backward(total)
    # without the residual term only the v head participates
    observer.store.adam_step(lr=lr, allow_unused=True)
    return {"l_data": float(l_data.values), "l_pde": l_pde_val,
            "l_total": float(total.values)}


def supervised_evaluate(observer: ObserverModel, corpus_dir: str, re_b: int,
                        og: ObservationGrid, split: str = "test",
                        max_scatter: int = 20000):
    """Test MSE and Pearson correlation on normalized plane velocities,
    plus (prediction, truth) pairs for scatter export."""
    meta, data = load_split(corpus_dir, split, int(re_b))
    jd = int(meta["plane_index"])
    pw = og.restrict_wall(data["pw"].astype(np.float64))
    n = pw.shape[0]
    re_arr = np.full(n, float(meta["re_b"]))
    preds = []
    chunk = 25
    for lo in range(0, n, chunk):
        pred = observer.forward(pw[lo:lo + chunk], pw[lo:lo + chunk],
                                re_arr[lo:lo + chunk], og.y_norm)
        preds.append(pred["v"].values[:, :, jd, :])
    vp = np.concatenate(preds)
    vp_norm = vp / np.maximum(np.sqrt((vp**2).mean(axis=(1, 2),
                                                   keepdims=True)), 1e-300)
    gt_norm = data["vplane"].astype(np.float64)
    x = gt_norm.ravel()
    y = vp_norm.ravel()
    mse = float(np.mean((x - y) ** 2))
    corr = float(np.corrcoef(x, y)[0, 1])
    if x.size > max_scatter:
        stride = x.size // max_scatter
        x, y = x[::stride], y[::stride]
    return {"mse": mse, "correlation": corr, "n_samples": int(n),
            "scatter_truth": x, "scatter_pred": y,
            "actual_y_plus": meta["actual_y_plus"]}
