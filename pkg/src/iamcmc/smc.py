"""Tempered sequential Monte Carlo baseline.

Particles start from the prior and follow a tempered path
pi_t proportional to prior * likelihood^lambda_t with lambda climbing from 0
to 1.  Each stage reweights by the likelihood increment, resamples
systematically when the effective sample size halves, and applies one
Metropolis mutation per particle targeting the current tempered law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ParticleSystem:
    particles: np.ndarray  # (N_p, dim)
    log_weights: np.ndarray  # (N_p,), normalized so exp sums to 1
    lam: float
    stage: int

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        total = np.exp(self.log_weights).sum()
        if not np.isclose(total, 1.0, atol=1e-10):
            raise ValueError(f"weights sum to {total}, expected 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("tempering exponent must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def ess(self) -> float:
        return 1.0 / float(np.square(self.weights).sum())

    def weighted_mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def weighted_var(self) -> np.ndarray:
        mu = self.weighted_mean()
        return self.weights @ np.square(self.particles - mu)


def normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    m = np.max(log_w)
    if not np.isfinite(m):
        raise FloatingPointError("all particle weights vanished")
    shifted = log_w - m
    return shifted - np.log(np.exp(shifted).sum())


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform offset, N_p evenly spaced pointers."""
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(max=n - 1)


def default_schedule(n_stages: int = 20) -> np.ndarray:
    """Equally spaced tempering exponents 0 = lambda_0 < ... < lambda_T = 1."""
    if n_stages < 1:
        raise ValueError("need at least one stage")
    return np.linspace(0.0, 1.0, n_stages + 1)


def smc_run(log_likelihood, prior_sampler, log_prior, schedule, n_particles,
            seed, mutation_scale=None, ess_fraction: float = 0.5,
            keep_history: bool = False, init_sampler=None, log_init=None):
    """Run tempered SMC and return the final ParticleSystem (plus history).

    log_likelihood and log_prior must accept an (N_p, dim) batch.  The
    mutation step is one Gaussian-proposal Metropolis sweep per stage, scaled
    componentwise by the weighted particle-cloud SD unless mutation_scale is
    given.  Raises at the failing stage if every weight degenerates.

    By default particles start from the prior and the stage-t law is
    prior * likelihood^lambda_t, with incremental weights L^(dlambda).  If an
    initial distribution p0 is supplied (init_sampler with matching log_init),
    the path is the geometric bridge p0^(1-lambda) * (prior * L)^lambda, which
    still ends at the posterior but anchors early stages to p0.
    """
    schedule = np.asarray(schedule, dtype=float)
    if schedule[0] != 0.0 or schedule[-1] != 1.0 or np.any(np.diff(schedule) <= 0):
        raise ValueError("schedule must increase from 0 to 1")
    if (init_sampler is None) != (log_init is None):
        raise ValueError("init_sampler and log_init must be given together")
    rng = np.random.default_rng(seed)
    start = init_sampler if init_sampler is not None else prior_sampler
    particles = np.asarray(start(rng, n_particles), dtype=float)
    if particles.ndim == 1:
        particles = particles[:, None]

    def log_increment(pts):
        # d/dlambda of the log stage density, integrated over one stage
        inc = np.asarray(log_likelihood(pts), dtype=float)
        if log_init is not None:
            inc = inc + np.asarray(log_prior(pts), dtype=float) \
                - np.asarray(log_init(pts), dtype=float)
        return inc

    def log_stage_density(pts, lam):
        lp = lam * np.asarray(log_likelihood(pts), dtype=float)
        if log_init is not None:
            return lp + lam * np.asarray(log_prior(pts), dtype=float) \
                + (1.0 - lam) * np.asarray(log_init(pts), dtype=float)
        return lp + np.asarray(log_prior(pts), dtype=float)

    log_w = np.full(n_particles, -np.log(n_particles))
    inc = log_increment(particles)
    history = []
    system = ParticleSystem(particles, normalize_log_weights(log_w), 0.0, 0)
    if keep_history:
        history.append(system)

    for stage in range(1, schedule.size):
        lam_prev, lam = schedule[stage - 1], schedule[stage]
        log_w = log_w + (lam - lam_prev) * inc
        if not np.any(np.isfinite(log_w)):
            raise FloatingPointError(f"all weights degenerate at stage {stage}")
        log_w = normalize_log_weights(log_w)

        ess = 1.0 / float(np.exp(2.0 * log_w).sum())
        if ess < ess_fraction * n_particles:
            idx = systematic_resample(np.exp(log_w), rng)
            particles = particles[idx]
            log_w = np.full(n_particles, -np.log(n_particles))

        # One Metropolis sweep targeting the current stage density.
        if mutation_scale is None:
            w = np.exp(log_w)
            mu = w @ particles
            sd = np.sqrt(np.maximum(w @ np.square(particles - mu), 1e-12))
            step = 0.5 * sd
        else:
            step = np.broadcast_to(np.asarray(mutation_scale, dtype=float),
                                   (particles.shape[1],))
        prop = particles + step * rng.standard_normal(particles.shape)
        log_cur = log_stage_density(particles, lam)
        log_prop = log_stage_density(prop, lam)
        accept = np.log(rng.random(n_particles)) < log_prop - log_cur
        particles = np.where(accept[:, None], prop, particles)
        inc = log_increment(particles)

        system = ParticleSystem(particles, log_w, float(lam), stage)
        if keep_history:
            history.append(system)

    if keep_history:
        return system, history
    return system


def export_particles_csv(system: ParticleSystem, path, names=None) -> None:
    """Write final particles with a weight column."""
    dim = system.particles.shape[1]
    names = names or [f"param_{i}" for i in range(dim)]
    header = ",".join(list(names) + ["weight"])
    data = np.column_stack([system.particles, system.weights])
    np.savetxt(path, data, delimiter=",", header=header, comments="")
