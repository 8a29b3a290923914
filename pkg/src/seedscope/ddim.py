"""Toy-scale seeded DDIM reverse process and the seed-swap experiment.

The sampler is exercised with analytic denoisers (no trained model): a
point-mass target with its closed-form optimal noise prediction, and an
isotropic Gaussian-mixture target with the posterior-mean denoiser. The
noise stream is the portable counter-based generator, with a fixed draw
order (x_T first, then one block of per-step noise from t = T down to 1
whenever eta > 0), so swapping seeds mid-run has unambiguous semantics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ScheduleError, ValidationError


class NoiseStream:
    """Sequential view over the portable normal stream for one seed.

    Draw k is a pure function of (seed, k); a stream can be opened at any
    offset, which is how a swapped-in seed is advanced past the draws a
    from-scratch run would already have consumed.
    """

    def __init__(self, seed: int, start: int = 0):
        if start < 0:
            raise ValidationError("start must be non-negative")
        self.seed = int(seed)
        self.draw_index = int(start)

    def next(self, count: int) -> np.ndarray:
        out = rng.normals(self.seed, self.draw_index, count)
        self.draw_index += count
        return out

    def clone(self) -> "NoiseStream":
        return NoiseStream(self.seed, self.draw_index)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Cumulative-alpha schedule for T steps plus the DDIM eta knob.

    ``alphas_cumprod`` has T+1 entries indexed t = 0..T, non-increasing,
    in (0, 1], with entry 0 the empty product 1 (or close to it).
    """

    alphas_cumprod: np.ndarray
    eta: float = 0.0

    def __post_init__(self):
        abar = np.asarray(self.alphas_cumprod, dtype=np.float64)
        if abar.ndim != 1 or abar.shape[0] < 2:
            raise ValidationError("alphas_cumprod needs at least 2 entries (T >= 1)")
        if not np.all(np.isfinite(abar)) or np.any(abar <= 0.0) or np.any(abar > 1.0):
            raise ValidationError("alphas_cumprod must lie in (0, 1]")
        if np.any(np.diff(abar) > 0.0):
            raise ValidationError("alphas_cumprod must be non-increasing")
        if abar[0] < 0.9:
            raise ValidationError(f"alphas_cumprod[0] = {abar[0]} should be close to 1")
        if self.eta < 0.0:
            raise ValidationError("eta must be >= 0")
        object.__setattr__(self, "alphas_cumprod", abar)

    @property
    def T(self) -> int:
        return self.alphas_cumprod.shape[0] - 1

    @classmethod
    def linear_beta(cls, T: int = 40, beta_start: float = 1e-4, beta_end: float = 0.02,
                    eta: float = 0.0) -> "DiffusionSchedule":
        betas = np.linspace(beta_start, beta_end, T)
        abar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return cls(alphas_cumprod=abar, eta=eta)

    def sigma(self, t: int) -> float:
        a_t = float(self.alphas_cumprod[t])
        a_prev = float(self.alphas_cumprod[t - 1])
        if self.eta == 0.0 or a_t >= 1.0:
            return 0.0
        return self.eta * math.sqrt((1.0 - a_prev) / (1.0 - a_t)) * math.sqrt(1.0 - a_t / a_prev)


@dataclass
class DdimTrajectory:
    """Latent states x_T .. x_0, plus swap bookkeeping when applicable."""

    states: list
    swap_record: tuple | None = None  # (swap_step, seed_i, seed_j)

    @property
    def x0(self) -> np.ndarray:
        return self.states[-1]

    @property
    def xT(self) -> np.ndarray:
        return self.states[0]


def ddim_step(x_t, t: int, eps_hat, schedule: DiffusionSchedule, z=None) -> np.ndarray:
    """One DDIM update from x_t to x_{t-1}.

    With eta = 0 the z coefficient is exactly zero and z may be omitted;
    with a positive sigma a z draw is required.
    """
    if t < 1 or t > schedule.T:
        raise ValidationError(f"step t={t} outside [1, {schedule.T}]")
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    a_t = float(schedule.alphas_cumprod[t])
    a_prev = float(schedule.alphas_cumprod[t - 1])
    sigma = schedule.sigma(t)
    x0_hat = (x_t - math.sqrt(1.0 - a_t) * eps_hat) / math.sqrt(a_t)
    dir_sq = 1.0 - a_prev - sigma * sigma
    if dir_sq < -1e-12:
        raise ScheduleError(f"step {t}: 1 - abar_prev - sigma^2 = {dir_sq:.3e} < -1e-12")
    x_prev = math.sqrt(a_prev) * x0_hat + math.sqrt(max(dir_sq, 0.0)) * eps_hat
    if sigma > 0.0:
        if z is None:
            raise ValidationError(f"step {t}: sigma > 0 requires a noise draw z")
        x_prev = x_prev + sigma * np.asarray(z, dtype=np.float64)
    return x_prev


def sample(denoiser, schedule: DiffusionSchedule, stream: NoiseStream, dim: int,
           swap_to: NoiseStream | None = None, swap_step: int | None = None) -> DdimTrajectory:
    """Run the reverse process from a seeded x_T down to x_0.

    Draw order: x_T consumes ``dim`` draws, then each step t = T..1
    consumes ``dim`` draws for z iff eta > 0 (even where sigma degenerates
    to 0, keeping the accounting exact). If ``swap_step`` is given, the
    active stream switches to ``swap_to`` just before that step's update.
    """
    if dim < 1:
        raise ValidationError("dim must be positive")
    if (swap_to is None) != (swap_step is None):
        raise ValidationError("swap_to and swap_step must be given together")
    if swap_step is not None and not 1 <= swap_step <= schedule.T:
        raise ValidationError(f"swap_step {swap_step} outside [1, {schedule.T}]")
    active = stream
    x = active.next(dim)
    states = [x]
    for t in range(schedule.T, 0, -1):
        if swap_step is not None and t == swap_step:
            active = swap_to
        eps_hat = np.asarray(denoiser(x, t), dtype=np.float64)
        z = active.next(dim) if schedule.eta > 0.0 else None
        x = ddim_step(x, t, eps_hat, schedule, z=z)
        states.append(x)
    if not all(np.all(np.isfinite(s)) for s in states):
        raise ValidationError("trajectory contains non-finite states")
    record = None if swap_step is None else (swap_step, stream.seed, (swap_to or stream).seed)
    return DdimTrajectory(states=states, swap_record=record)


# ---------------------------------------------------------------------------
# Analytic denoisers


class PointMassDenoiser:
    """Optimal noise prediction when the data distribution is one point."""

    def __init__(self, target=0.0, schedule: DiffusionSchedule | None = None):
        self.target = np.asarray(target, dtype=np.float64)
        self.schedule = schedule

    def bind(self, schedule: DiffusionSchedule) -> "PointMassDenoiser":
        return PointMassDenoiser(self.target, schedule)

    def __call__(self, x_t, t: int) -> np.ndarray:
        a_t = float(self.schedule.alphas_cumprod[t])
        return (np.asarray(x_t) - math.sqrt(a_t) * self.target) / math.sqrt(max(1.0 - a_t, 1e-300))


class GaussianMixtureDenoiser:
    """Posterior-mean denoiser for an isotropic Gaussian-mixture target."""

    def __init__(self, means, weights=None, component_std: float = 0.1,
                 schedule: DiffusionSchedule | None = None):
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        k = self.means.shape[0]
        self.weights = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (k,) or np.any(self.weights <= 0):
            raise ValidationError("weights must be positive, one per component")
        self.weights = self.weights / self.weights.sum()
        self.component_std = float(component_std)
        self.schedule = schedule

    def bind(self, schedule: DiffusionSchedule) -> "GaussianMixtureDenoiser":
        return GaussianMixtureDenoiser(self.means, self.weights, self.component_std, schedule)

    def posterior_mean(self, x_t, t: int) -> np.ndarray:
        a_t = float(self.schedule.alphas_cumprod[t])
        s2 = self.component_std ** 2
        var_t = a_t * s2 + (1.0 - a_t)
        sqrt_a = math.sqrt(a_t)
        x = np.asarray(x_t, dtype=np.float64)
        resid = x[None, :] - sqrt_a * self.means           # (K, d)
        log_r = np.log(self.weights) - np.sum(resid * resid, axis=1) / (2.0 * var_t)
        log_r -= log_r.max()
        r = np.exp(log_r)
        r /= r.sum()
        x0_k = self.means + (sqrt_a * s2 / var_t) * resid  # (K, d)
        return r @ x0_k

    def __call__(self, x_t, t: int) -> np.ndarray:
        a_t = float(self.schedule.alphas_cumprod[t])
        x0_hat = self.posterior_mean(x_t, t)
        return (np.asarray(x_t) - math.sqrt(a_t) * x0_hat) / math.sqrt(max(1.0 - a_t, 1e-300))


# ---------------------------------------------------------------------------
# Seed-swap experiment


@dataclass
class SwapExperimentReport:
    seed_i: int
    seed_j: int
    dim: int
    eta: float
    T: int
    mode: str
    entries: list = field(default_factory=list)  # {swap_step, divergence, control_divergence}
    baseline_norm: float = 0.0
    alphas_cumprod: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed_i": self.seed_i,
            "seed_j": self.seed_j,
            "dim": self.dim,
            "eta": self.eta,
            "steps": self.T,
            "mode": self.mode,
            "baseline_norm": self.baseline_norm,
            "entries": self.entries,
            "alphas_cumprod": self.alphas_cumprod,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _draws_before_step(schedule: DiffusionSchedule, step: int, dim: int) -> int:
    """Draws a from-scratch run consumes before step's update: x_T plus z
    blocks for steps T..step+1 (z blocks exist only when eta > 0)."""
    per_step = dim if schedule.eta > 0.0 else 0
    return dim + per_step * (schedule.T - step)


def seed_swap_experiment(denoiser, schedule: DiffusionSchedule, seed_i: int, seed_j: int,
                         swap_steps, dim: int, mode: str = "advanced") -> SwapExperimentReport:
    """Relative x_0 divergence caused by switching seeds mid-process.

    For each swap step s, the run starts on seed_i's stream and switches
    to seed_j's just before step s. In ``advanced`` mode (default) the
    incoming stream is opened past the draws a from-scratch seed_j run
    would have consumed before s; ``fresh`` opens it at draw 0. Each
    entry carries the matching i = i control divergence, which is exactly
    0 in advanced mode. Divergence is relative to the no-swap baseline's
    norm (absolute if that norm is 0).
    """
    if mode not in ("advanced", "fresh"):
        raise ValidationError(f"unknown mode {mode!r}")
    swap_steps = sorted(set(int(s) for s in swap_steps))
    for s in swap_steps:
        if not 1 <= s <= schedule.T:
            raise ValidationError(f"swap step {s} outside [1, {schedule.T}]")
    bound = denoiser.bind(schedule) if hasattr(denoiser, "bind") else denoiser
    baseline = sample(bound, schedule, NoiseStream(seed_i), dim)
    base_norm = float(np.linalg.norm(baseline.x0))
    denom = base_norm if base_norm > 0.0 else 1.0

    def _swapped(target_seed: int, s: int) -> float:
        start = _draws_before_step(schedule, s, dim) if mode == "advanced" else 0
        incoming = NoiseStream(target_seed, start)
        traj = sample(bound, schedule, NoiseStream(seed_i), dim, swap_to=incoming, swap_step=s)
        return float(np.linalg.norm(traj.x0 - baseline.x0) / denom)

    entries = []
    for s in swap_steps:
        entries.append({
            "swap_step": s,
            "divergence": _swapped(seed_j, s),
            "control_divergence": _swapped(seed_i, s),
        })
    return SwapExperimentReport(
        seed_i=int(seed_i), seed_j=int(seed_j), dim=dim, eta=schedule.eta, T=schedule.T,
        mode=mode, entries=entries, baseline_norm=base_norm,
        alphas_cumprod=[float(a) for a in schedule.alphas_cumprod],
    )
