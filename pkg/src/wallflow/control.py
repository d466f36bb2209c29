"""Controllers, the replay buffer, and the iterative train loop that
alternates data collection with observer and policy updates.

Both walls are served by one shared-parameter model: the bottom wall is the
reference frame, and top-wall samples are mapped into it by the channel
reflection (y -> 2*delta - y, v -> -v, wall fields unchanged except the
sign of the wall-normal actuation).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import diffprog as dp
from .dns import ChannelEnv, ControlBC, FlowState, SolverBlowupError, apply_control, zero_control
from .grid import WallUnits
from .losses import LossReport, data_loss, pde_loss, policy_loss
from .models import ObserverModel, PolicyModel
from .sampling import ObservationGrid, restrict_state

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# replay buffer


@dataclass
class Transition:
    """One interaction record: observation, the action taken on it, and the
    flow outcome one action interval later."""

    pw_bot: np.ndarray
    pw_top: np.ndarray
    phi_bot: np.ndarray
    phi_top: np.ndarray
    snapshot: dict
    dpdx: float
    re: float
    time: float
    step: int
    episode: int
    seq: int = -1


class ReplayBuffer:
    """FIFO ring of the most recent transitions with running rms statistics.

    Pair sampling returns indices of records whose immediate successor (next
    solver outcome in the same episode) is still in the buffer, which is what
    the equation-residual loss consumes.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next_seq = 0
        self._sq_sums = {}
        self._n_samples = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, tr: Transition):
        tr.seq = self._next_seq
        self._next_seq += 1
        if len(self._items) == self.capacity:
            self._items.pop(0)
        self._items.append(tr)
        for comp in ("u", "v", "w"):
            arr = tr.snapshot[comp].astype(np.float64)
            sq = (arr * arr).mean(axis=(0, 2))
            if comp not in self._sq_sums:
                self._sq_sums[comp] = sq
            else:
                self._sq_sums[comp] += sq
        self._n_samples += 1

    def items(self) -> list[Transition]:
        return list(self._items)

    def rms_profiles(self) -> dict:
        if self._n_samples == 0:
            raise ValueError("empty buffer has no statistics")
        return {c: np.sqrt(self._sq_sums[c] / self._n_samples)
                for c in ("u", "v", "w")}

    def sample(self, rng: np.random.Generator, batch: int) -> list[Transition]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        k = min(batch, len(self._items))
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in sorted(idx)]

    def sample_pairs(self, rng: np.random.Generator, batch: int):
        """(t, t+dt) transition pairs from the same episode."""
        valid = [i for i in range(len(self._items) - 1)
                 if self._items[i + 1].seq == self._items[i].seq + 1
                 and self._items[i + 1].episode == self._items[i].episode]
        if not valid:
            raise ValueError("no adjacent transition pairs in buffer")
        k = min(batch, len(valid))
        picks = rng.choice(len(valid), size=k, replace=False)
        return [(self._items[valid[i]], self._items[valid[i] + 1])
                for i in sorted(picks)]


def reflect_snapshot(snap: dict) -> dict:
    """Map a collocated snapshot through the wall reflection."""
    return {
        "u": snap["u"][:, ::-1, :],
        "v": -snap["v"][:, ::-1, :],
        "w": snap["w"][:, ::-1, :],
        "p": snap["p"][:, ::-1, :],
    }


def wall_sample(tr: Transition, wall: str):
    """(pw, phi, snapshot, phi_bc) of a transition viewed from one wall's
    frame; the top wall is reflected into bottom-frame coordinates."""
    if wall == "bot":
        snap = tr.snapshot
        return tr.pw_bot, tr.phi_bot, snap, (tr.phi_bot, tr.phi_top)
    snap = reflect_snapshot(tr.snapshot)
    return tr.pw_top, -tr.phi_top, snap, (-tr.phi_top, -tr.phi_bot)


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(a, dtype=np.float64))))


def _normalize(a: np.ndarray) -> np.ndarray:
    return a / max(_rms(a), 1e-300)


# ---------------------------------------------------------------------------
# controllers


class ZeroController:
    def act(self, obs, env: ChannelEnv, rng=None, sigma: float = 0.0) -> ControlBC:
        return zero_control(env.grid)


class OppositionController:
    """Blow against the wall-normal velocity at a detection plane.

    phi_wall(x, z) = -gain * v(x, y_d, z) with y_d the node nearest the
    requested wall distance; the same formula applies at both walls by the
    channel reflection.
    """

    def __init__(self, env: ChannelEnv, wall_units: WallUnits,
                 detection_y_plus: float = 10.0, gain: float = 1.0,
                 clamp: float = 0.3):
        g = env.grid
        y_d = detection_y_plus * wall_units.nu / wall_units.u_tau0
        if y_d >= g.delta:
            raise ValueError(
                f"detection plane y+={detection_y_plus} lies beyond the centerline")
        nodes = g.y_nodes[1:-1]
        self.j_bot = 1 + int(np.argmin(np.abs(nodes - y_d)))
        self.j_top = 1 + int(np.argmin(np.abs(nodes - (2.0 * g.delta - y_d))))
        self.actual_y_plus = float(g.y_nodes[self.j_bot] * wall_units.u_tau0
                                   / wall_units.nu)
        self.gain = gain
        self.clamp = clamp

    def act(self, obs, env: ChannelEnv, rng=None, sigma: float = 0.0) -> ControlBC:
        state: FlowState = obs["state"]
        raw_bot = -self.gain * state.v[:, self.j_bot, :]
        raw_top = -self.gain * state.v[:, self.j_top, :]
        return apply_control(raw_bot, raw_top, env.config.u_b, self.clamp)


class PolicyController:
    """Wraps a policy model; handles the top-wall reflection, optional
    exploration noise, and the zero-mass/clamp normalization."""

    def __init__(self, policy: PolicyModel, re_b: float, clamp: float = 0.3):
        self.policy = policy
        self.re_b = re_b
        self.clamp = clamp

    def raw_action(self, obs) -> tuple[np.ndarray, np.ndarray]:
        pw = np.stack([obs["p_bot_norm"], obs["p_top_norm"]])
        out = self.policy.forward(pw, [self.re_b, self.re_b]).values
        if not np.all(np.isfinite(out)):
            raise SolverBlowupError(obs["step"], "policy produced non-finite control")
        # Bottom-frame output; flip the sign to act on the physical top wall.
        return out[0], -out[1]

    def act(self, obs, env: ChannelEnv, rng=None, sigma: float = 0.0) -> ControlBC:
        raw_bot, raw_top = self.raw_action(obs)
        if sigma > 0.0:
            if rng is None:
                raise ValueError("exploration noise requires an rng")
            raw_bot = raw_bot + sigma * rng.standard_normal(raw_bot.shape)
            raw_top = raw_top + sigma * rng.standard_normal(raw_top.shape)
        return apply_control(raw_bot, raw_top, env.config.u_b, self.clamp)


# ---------------------------------------------------------------------------
# collection


@dataclass
class TrainSchedule:
    episodes: int = 5
    steps_per_episode: int = 2000
    epochs_per_episode: int = 50
    batch: int = 16
    action_interval: int = 1
    warmup_steps: int = 0
    exploration: bool = True
    sigma0: float = 0.05
    noise_snr_inv: float = 0.0
    use_pde_loss: bool = True
    w_pde: float = 1.0
    use_policy_tke: bool = True
    lam_n: float = 0.5
    lr: float = 1e-3
    clamp: float = 0.3
    obs_stride: int = 1
    obs_stride_xz: int = 1
    buffer_capacity: int = 2048

    def __post_init__(self):
        for name in ("episodes", "steps_per_episode", "epochs_per_episode",
                     "batch", "action_interval", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def collect_episode(env: ChannelEnv, state: FlowState, controller, buffer,
                    og: ObservationGrid, schedule: TrainSchedule, episode: int,
                    sigma: float = 0.0, rng_explore=None, noise_rng=None,
                    stats_rows: list | None = None, baseline_dpdx: float | None = None,
                    stats_every: int = 1):
    """Roll the environment with a controller, pairing each action with the
    state one action interval later, and store those transitions.

    Returns (final state, episode log dict). A solver blow-up closes the
    episode early and is reported in the log, not raised.
    """
    from .diagnostics import tke as tke_fn

    pending = None
    log_rows = stats_rows if stats_rows is not None else []
    n_stored = 0
    blew_up = False
    dpdx_sum = 0.0
    control = zero_control(env.grid, schedule.clamp)
    try:
        for k in range(schedule.steps_per_episode):
            if k % schedule.action_interval == 0:
                obs = env.observe(state, schedule.noise_snr_inv, noise_rng)
                obs["state"] = state
                if pending is not None and buffer is not None:
                    buffer.add(_make_transition(pending, state, env, og, episode))
                    n_stored += 1
                control = controller.act(obs, env, rng_explore, sigma)
                pending = (obs, control)
            state = env.step(state, control)
            dpdx_sum += state.dpdx
            if k % stats_every == 0:
                row = _stats_row(env, state, og, control, baseline_dpdx, tke_fn)
                log_rows.append(row)
        if pending is not None and buffer is not None:
            obs = env.observe(state, schedule.noise_snr_inv, noise_rng)
            buffer.add(_make_transition(pending, state, env, og, episode))
            n_stored += 1
    except SolverBlowupError as err:
        blew_up = True
        log.warning("episode %d terminated early: %s", episode, err)
    n_steps = max(state.step, 1)
    return state, {
        "episode": episode,
        "rows": log_rows,
        "stored": n_stored,
        "blew_up": blew_up,
        "mean_dpdx": dpdx_sum / max(schedule.steps_per_episode, 1),
    }


def _make_transition(pending, state: FlowState, env: ChannelEnv,
                     og: ObservationGrid, episode: int) -> Transition:
    obs, control = pending
    return Transition(
        pw_bot=obs["p_bot"].astype(np.float32),
        pw_top=obs["p_top"].astype(np.float32),
        phi_bot=control.phi_bot.astype(np.float32),
        phi_top=control.phi_top.astype(np.float32),
        snapshot=restrict_state(state, og),
        dpdx=state.dpdx,
        re=env.config.re_b,
        time=state.time,
        step=state.step,
        episode=episode,
    )


def _stats_row(env: ChannelEnv, state: FlowState, og, control: ControlBC,
               baseline_dpdx, tke_fn) -> dict:
    from .dns import bulk_velocity
    dt = state.time / max(state.step, 1)
    dr = 0.0
    if baseline_dpdx:
        dr = (baseline_dpdx - state.dpdx) / baseline_dpdx
    return {
        "step": state.step,
        "time": state.time,
        "dpdx": state.dpdx,
        "u_b": bulk_velocity(state.u, env.grid),
        "u_tau": env.u_tau(state),
        "dr": dr,
        "tke": tke_fn(state, env.grid, fluctuations_only=True),
        "cfl": env.advective_cfl(state, env.compute_dt(state)),
        "phi_rms_top": _rms(control.phi_top),
        "phi_rms_bot": _rms(control.phi_bot),
    }


# ---------------------------------------------------------------------------
# model updates


def _batched_inputs(samples, wall_choices, u_tau0, og: ObservationGrid):
    """Batched model inputs and targets; observer-facing wall fields are
    restricted to the observation grid's kept columns."""
    pw, phi, gts, bcs = [], [], [], []
    for tr, wall in zip(samples, wall_choices):
        pw_raw, phi_raw, snap, phi_bc = wall_sample(tr, wall)
        pw.append(og.restrict_wall(_normalize(pw_raw.astype(np.float64))))
        phi.append(og.restrict_wall(phi_raw.astype(np.float64)) / u_tau0)
        gts.append(snap)
        bcs.append(phi_bc)
    gt = {c: np.stack([s[c] for s in gts]).astype(np.float64) for c in ("u", "v", "w")}
    p = np.stack([s["p"] for s in gts]).astype(np.float64)
    bc_bot = og.restrict_wall(np.stack([b[0] for b in bcs]).astype(np.float64))
    bc_top = og.restrict_wall(np.stack([b[1] for b in bcs]).astype(np.float64))
    return np.stack(pw), np.stack(phi), gt, p, (bc_bot, bc_top)


def train_observer(buffer: ReplayBuffer, observer: ObserverModel,
                   wall_units: WallUnits, og: ObservationGrid,
                   schedule: TrainSchedule, rng: np.random.Generator,
                   u_b: float = 1.0) -> LossReport:
    """One sampled update of the observer on L_data (+ optional L_pde)."""
    if len(buffer) == 0:
        raise ValueError("cannot train on an empty buffer")
    re_b = buffer.items()[-1].re
    rms = buffer.rms_profiles()
    use_pde = schedule.use_pde_loss
    if use_pde:
        pairs = buffer.sample_pairs(rng, schedule.batch)
        walls = ["bot" if rng.random() < 0.5 else "top" for _ in pairs]
        first = [p[0] for p in pairs]
        second = [p[1] for p in pairs]
        pw1, phi1, gt1, p1, bc1 = _batched_inputs(first, walls, wall_units.u_tau0, og)
        pw2, phi2, gt2, _, _ = _batched_inputs(second, walls, wall_units.u_tau0, og)
        k = len(pairs)
        pw = np.concatenate([pw1, pw2])
        phi = np.concatenate([phi1, phi2])
        res = np.full(2 * k, re_b)
        pred = observer.forward(phi, pw, res, og.y_norm)
        pred_t = {c: pred[c][0:k] for c in ("u", "v", "w")}
        pred_t2 = {c: pred[c][k:2 * k] for c in ("u", "v", "w")}
        gt_all = {c: np.concatenate([gt1[c], gt2[c]]) for c in ("u", "v", "w")}
        l_data = data_loss(pred, gt_all, rms, u_b)
        dts = np.array([s.time - f.time for f, s in pairs])
        dpdxs = np.array([f.dpdx for f in first])
        l_pde = pde_loss(pred_t, pred_t2, p1, dpdxs, dts, wall_units, og,
                         phi_bc={"bot": bc1[0], "top": bc1[1]})
        total = l_data + dp.mul(l_pde, schedule.w_pde)
    else:
        samples = buffer.sample(rng, schedule.batch)
        walls = ["bot" if rng.random() < 0.5 else "top" for _ in samples]
        pw, phi, gt, _, _ = _batched_inputs(samples, walls, wall_units.u_tau0, og)
        res = np.full(len(samples), re_b)
        pred = observer.forward(phi, pw, res, og.y_norm)
        l_data = data_loss(pred, gt, rms, u_b)
        l_pde = dp.DiffArray(np.array(0.0))
        total = l_data
    observer.store.zero_grad()
    dp.backward(total)
    observer.store.adam_step(lr=schedule.lr)
    return LossReport(l_data=float(l_data.values), l_pde=float(l_pde.values),
                      l_total=float(total.values))


def train_policy(buffer: ReplayBuffer, policy: PolicyModel,
                 observer: ObserverModel, wall_units: WallUnits,
                 og: ObservationGrid, schedule: TrainSchedule,
                 rng: np.random.Generator) -> LossReport:
    """One policy update against the frozen observer.

    Gradients flow through the observer's inputs only; its parameters are
    flagged non-trainable for the pass and verified untouched.
    """
    if len(buffer) == 0:
        raise ValueError("cannot train on an empty buffer")
    re_b = buffer.items()[-1].re
    samples = buffer.sample(rng, schedule.batch)
    walls = ["bot" if rng.random() < 0.5 else "top" for _ in samples]
    pw_full = np.stack([_normalize(wall_sample(tr, w)[0].astype(np.float64))
                        for tr, w in zip(samples, walls)])
    pw_obs = og.restrict_wall(pw_full)
    res = np.full(len(samples), re_b)

    observer.store.set_trainable(False)
    observer.store.zero_grad()
    policy.store.zero_grad()
    try:
        phi = policy.forward(pw_full, res)
        sxz = og.stride_xz
        phi_obs = phi[:, ::sxz, ::sxz] if sxz > 1 else phi
        phi_n = phi_obs * (1.0 / wall_units.u_tau0)
        pred = observer.forward(phi_n, pw_obs, res, og.y_norm)
        if not schedule.use_policy_tke:
            pred = {c: dp.mul(pred[c], 0.0) for c in ("u", "v", "w")}
        dt = np.median(np.diff([tr.time for tr in buffer.items()])) \
            if len(buffer) > 1 else 1.0
        total, parts = policy_loss([phi], pred, og, schedule.lam_n, dt)
        dp.backward(total)
        leaked = [n for n, p in observer.store.params.items() if p.grad is not None]
        if leaked:
            raise RuntimeError(f"gradient leaked into frozen observer: {leaked[:3]}")
        policy.store.adam_step(lr=schedule.lr)
    finally:
        observer.store.set_trainable(True)
    return LossReport(l_policy=float(total.values), l_total=float(total.values),
                      tke_term=parts["tke_term"], actuation_term=parts["actuation_term"])


# ---------------------------------------------------------------------------
# the full loop


def run_training(env: ChannelEnv, policy: PolicyModel, observer: ObserverModel,
                 schedule: TrainSchedule, wall_units: WallUnits,
                 rngs: dict, state: FlowState, baseline_dpdx: float,
                 on_episode=None, stats_every: int = 1):
    """Alternate collection and updates for schedule.episodes episodes.

    rngs: named generators ('exploration', 'noise', 'sampler'). Returns the
    final state plus per-episode logs; checkpointing hooks run through
    on_episode(ep_index, logs).
    """
    og = ObservationGrid.build(env.grid, schedule.obs_stride, schedule.obs_stride_xz)
    buffer = ReplayBuffer(schedule.buffer_capacity)
    controller = PolicyController(policy, env.config.re_b, schedule.clamp)
    episode_logs = []
    for ep in range(schedule.episodes):
        sigma = schedule.sigma0 * (0.5 ** ep) if schedule.exploration else 0.0
        sigma *= env.config.u_b
        state, ep_log = collect_episode(
            env, state, controller, buffer, og, schedule, ep, sigma,
            rngs.get("exploration"), rngs.get("noise"),
            baseline_dpdx=baseline_dpdx, stats_every=stats_every)
        losses = []
        for _ in range(schedule.epochs_per_episode):
            rep_o = train_observer(buffer, observer, wall_units, og, schedule,
                                   rngs["sampler"], env.config.u_b)
            rep_p = train_policy(buffer, policy, observer, wall_units, og,
                                 schedule, rngs["sampler"])
            losses.append((rep_o, rep_p))
        ep_log["losses"] = losses
        ep_log["mean_dr"] = ((baseline_dpdx - ep_log["mean_dpdx"]) / baseline_dpdx
                             if baseline_dpdx else 0.0)
        episode_logs.append(ep_log)
        if on_episode is not None:
            on_episode(ep, ep_log)
        if ep_log["blew_up"]:
            log.warning("continuing after early episode termination")
    return state, episode_logs
