"""Frame generation, SIC + capture decoding and Monte Carlo throughput estimation."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model import RepetitionDistribution, SystemConfig

REL_TOL = 1e-12
SWEEP_HEADER = ["g", "throughput_mean", "throughput_stderr", "packet_loss_mean", "trials", "seed"]


@dataclass(frozen=True)
class Frame:
    """Bipartite user/slot graph with per-edge received power.

    Edges are stored as three parallel arrays; edge e is a replica of user
    ``users[e]`` in slot ``slots[e]`` received at ``powers[e]``.
    """

    num_slots: int
    users: np.ndarray
    slots: np.ndarray
    powers: np.ndarray
    user_degrees: np.ndarray

    @property
    def num_users(self) -> int:
        return len(self.user_degrees)

    @property
    def replicas(self) -> list[tuple[int, int, float]]:
        return list(zip(self.users.tolist(), self.slots.tolist(), self.powers.tolist()))

    @classmethod
    def from_replicas(cls, num_slots: int, replicas: Sequence[tuple[int, int, float]],
                      num_users: Optional[int] = None) -> "Frame":
        arr = np.array(replicas, dtype=float).reshape(-1, 3)
        users = arr[:, 0].astype(np.int64)
        n = int(users.max()) + 1 if num_users is None and len(users) else (num_users or 0)
        frame = cls(num_slots, users, arr[:, 1].astype(np.int64), arr[:, 2],
                    np.bincount(users, minlength=n))
        frame.validate()
        return frame

    def with_powers(self, powers: np.ndarray) -> "Frame":
        return Frame(self.num_slots, self.users, self.slots, np.asarray(powers, float),
                     self.user_degrees)

    def validate(self):
        if np.any(self.powers <= 0):
            raise ValueError("received power must be positive")
        if np.any((self.slots < 0) | (self.slots >= self.num_slots)):
            raise ValueError("slot index out of range")
        key = self.users * self.num_slots + self.slots
        if len(np.unique(key)) != len(key):
            raise ValueError("a user occupies the same slot twice")


@dataclass
class DecodeResult:
    decoded_users: set
    iterations: int
    per_iteration_decodes: list[int]


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean_throughput: float
    std_error: float
    mean_packet_loss: float
    trials: int
    seed: int
    load: float = 0.0
    loss_std_error: float = 0.0


def _place_replicas(degrees: np.ndarray, M: int, rng: np.random.Generator):
    """Distinct uniformly random slots for each user; returns (users, slots)."""
    users_out, slots_out = [], []
    for l in np.unique(degrees):
        l = int(l)
        if l > M:
            raise ValueError(f"degree {l} exceeds the number of slots {M}")
        idx = np.flatnonzero(degrees == l)
        if l * l <= M:
            s = rng.integers(0, M, size=(len(idx), l))
            while l > 1:
                srt = np.sort(s, axis=1)
                bad = np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
                if bad.size == 0:
                    break
                s[bad] = rng.integers(0, M, size=(bad.size, l))
        else:
            s = np.argsort(rng.random((len(idx), M)), axis=1)[:, :l]
        users_out.append(np.repeat(idx, l))
        slots_out.append(s.ravel())
    if not users_out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    users = np.concatenate(users_out)
    order = np.argsort(users, kind="stable")
    return users[order], np.concatenate(slots_out)[order].astype(np.int64)


def _draw_degrees(rep: RepetitionDistribution, N: int, rng) -> np.ndarray:
    return rng.choice(rep.degrees, size=N, p=rep.probs)


def generate_frame(cfg: SystemConfig, rng: np.random.Generator) -> Frame:
    """Ideal-channel IRSA-PC frame: each replica draws its own power level."""
    N = cfg.num_users
    degrees = _draw_degrees(cfg.repetition, N, rng)
    users, slots = _place_replicas(degrees, cfg.slots, rng)
    levels = np.asarray(cfg.power.levels)
    if cfg.power_per_user:
        lvl = rng.choice(len(levels), size=N, p=cfg.power.delta)[users]
    else:
        lvl = rng.choice(len(levels), size=len(users), p=cfg.power.delta)
    return Frame(cfg.slots, users, slots, levels[lvl], degrees)


def sic_decode(frame: Frame, beta: float) -> DecodeResult:
    """Iterative SIC with capture; cancellation takes effect at iteration boundaries."""
    if not beta > 1:
        raise ValueError("beta must be > 1")
    M, users, slots, powers = frame.num_slots, frame.users, frame.slots, frame.powers
    decoded = np.zeros(frame.num_users, dtype=bool)
    live = np.arange(len(users))
    per_iter: list[int] = []
    while live.size:
        s, pw = slots[live], powers[live]
        total = np.bincount(s, weights=pw, minlength=M)
        count = np.bincount(s, minlength=M)
        interference = total[s] - pw
        ok = (count[s] == 1) | (pw >= beta * interference * (1 - REL_TOL))
        new = np.unique(users[live[ok]])
        per_iter.append(int(new.size))
        if new.size == 0:
            break
        decoded[new] = True
        live = live[~decoded[users[live]]]
    if not per_iter or per_iter[-1] != 0:
        per_iter.append(0)
    return DecodeResult(set(np.flatnonzero(decoded).tolist()), len(per_iter), per_iter)


FrameFactory = Callable[[SystemConfig, np.random.Generator], Frame]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def _run_trials(cfg: SystemConfig, seed: int, indices: Sequence[int], channel) -> list[int]:
    out = []
    for t in indices:
        rng = trial_rng(seed, t)
        frame = channel_frame(cfg, rng, channel)
        out.append(len(sic_decode(frame, cfg.power.beta).decoded_users))
    return out


def channel_frame(cfg: SystemConfig, rng, channel=None) -> Frame:
    if channel is None or channel == "ideal":
        return generate_frame(cfg, rng)
    from .pathloss import PathLossConfig, pathloss_frame
    if isinstance(channel, PathLossConfig):
        return pathloss_frame(cfg, channel, rng)
    raise ValueError(f"unknown channel {channel!r}")


def monte_carlo(cfg: SystemConfig, trials: int, seed: int, channel=None,
                workers: int = 1) -> MonteCarloEstimate:
    """Average decoded packets per slot over independent frames.

    Trial t uses the random stream seeded by (seed, t), so the estimate does
    not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    idx = list(range(trials))
    if workers > 1 and trials > 1:
        chunks = [idx[i::workers] for i in range(workers)]
        counts = np.zeros(trials)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_trials, cfg, seed, c, channel) for c in chunks]
            for c, f in zip(chunks, futs):
                counts[c] = f.result()
    else:
        counts = np.asarray(_run_trials(cfg, seed, idx, channel), dtype=float)
    M, N = cfg.slots, cfg.num_users
    thr = counts / M
    loss = 1.0 - counts / N if N > 0 else np.zeros(trials)
    se = float(thr.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    lse = float(loss.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloEstimate(float(thr.mean()), se, float(loss.mean()), trials, seed,
                              N / M, lse)


def load_grid(g_start: float, g_end: float, g_step: float) -> np.ndarray:
    if not g_step > 0:
        raise ValueError("g_step must be > 0")
    n = int(math.floor((g_end - g_start) / g_step + 1e-9)) + 1
    return np.round(g_start + g_step * np.arange(max(n, 0)), 10)


def sweep(cfg: SystemConfig, loads: Sequence[float], trials: int, seed: int,
          channel=None, workers: int = 1) -> list[tuple[float, MonteCarloEstimate]]:
    return [(float(g), monte_carlo(cfg.with_load(g), trials, seed, channel, workers))
            for g in loads]


def sweep_csv(rows: Sequence[tuple[float, MonteCarloEstimate]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for g, est in rows:
        w.writerow([repr(float(g)), repr(est.mean_throughput), repr(est.std_error),
                    repr(est.mean_packet_loss), est.trials, est.seed])
    return buf.getvalue()


def coupled_monotonicity_trial(cfg_template: SystemConfig, k1: int, k2: int,
                               seed: int) -> tuple[int, int]:
    """Decode one random two-level instantiation under power gaps k1*beta and k2*beta."""
    if not k1 >= k2 >= 1:
        raise ValueError("need k1 >= k2 >= 1")
    beta = cfg_template.power.beta
    delta_high = float(cfg_template.power.delta[0]) if cfg_template.power.n > 1 else 1.0
    rng = np.random.default_rng(seed)
    N = cfg_template.num_users
    degrees = _draw_degrees(cfg_template.repetition, N, rng)
    users, slots = _place_replicas(degrees, cfg_template.slots, rng)
    high = rng.random(len(users)) < delta_high
    base = Frame(cfg_template.slots, users, slots, np.ones(len(users)), degrees)
    counts = []
    for k in (k1, k2):
        f = base.with_powers(np.where(high, k * beta, 1.0))
        counts.append(len(sic_decode(f, beta).decoded_users))
    return counts[0], counts[1]
