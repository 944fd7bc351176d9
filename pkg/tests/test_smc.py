"""Tests for the tempered sequential Monte Carlo baseline."""

import numpy as np
import pytest

from iamcmc import smc


def _flat_prior_sampler(lo, hi, dim=1):
    return lambda rng, n: rng.uniform(lo, hi, size=(n, dim))


def _flat_log_prior(lo, hi):
    def lp(x):
        inside = np.all((x >= lo) & (x <= hi), axis=-1)
        return np.where(inside, 0.0, -np.inf)
    return lp


def test_particle_system_invariants():
    n = 10
    ps = smc.ParticleSystem(np.zeros((n, 1)), np.full(n, -np.log(n)), 0.0, 0)
    assert ps.ess() == pytest.approx(n)
    with pytest.raises(ValueError):
        smc.ParticleSystem(np.zeros((n, 1)), np.zeros(n), 0.0, 0)
    with pytest.raises(ValueError):
        smc.ParticleSystem(np.zeros((n, 1)), np.full(n, -np.log(n)), 1.5, 0)


def test_normalize_log_weights():
    w = smc.normalize_log_weights(np.array([0.0, 0.0, np.log(2.0)]))
    assert np.exp(w).sum() == pytest.approx(1.0)
    assert np.exp(w[2]) == pytest.approx(0.5)
    with pytest.raises(FloatingPointError):
        smc.normalize_log_weights(np.array([-np.inf, -np.inf]))


def test_systematic_resample_ess_restored():
    rng = np.random.default_rng(0)
    n = 1000
    w = rng.random(n)
    w /= w.sum()
    idx = smc.systematic_resample(w, rng)
    assert idx.shape == (n,)
    # resampled population is unweighted: ESS equals the particle count
    log_w = np.full(n, -np.log(n))
    ps = smc.ParticleSystem(np.arange(n, dtype=float)[idx, None], log_w, 0.5, 1)
    assert ps.ess() == pytest.approx(n)


def test_systematic_resample_preserves_expectations():
    rng = np.random.default_rng(1)
    n = 5000
    x = rng.normal(size=n)
    w = np.exp(0.3 * x)
    w /= w.sum()
    before = float(w @ x)
    means = []
    for rep in range(800):
        idx = smc.systematic_resample(w, np.random.default_rng(100 + rep))
        means.append(x[idx].mean())
    se = np.std(means) / np.sqrt(len(means))
    assert abs(np.mean(means) - before) <= 3.0 * max(se, 1e-6)


def test_default_schedule():
    sch = smc.default_schedule(20)
    assert sch[0] == 0.0 and sch[-1] == 1.0 and sch.size == 21
    assert np.all(np.diff(sch) > 0)
    with pytest.raises(ValueError):
        smc.default_schedule(0)


def test_smc_gaussian_posterior_moments():
    log_lik = lambda x: -0.5 * np.sum(x ** 2, axis=-1)
    system = smc.smc_run(log_lik, _flat_prior_sampler(-8, 8),
                         _flat_log_prior(-8, 8), smc.default_schedule(20),
                         n_particles=5000, seed=2)
    assert system.lam == 1.0
    assert abs(system.weighted_mean()[0]) < 0.05
    assert abs(system.weighted_var()[0] - 1.0) < 0.1


def test_smc_schedule_validation():
    log_lik = lambda x: np.zeros(x.shape[0])
    with pytest.raises(ValueError):
        smc.smc_run(log_lik, _flat_prior_sampler(-1, 1), _flat_log_prior(-1, 1),
                    np.array([0.0, 0.5, 0.4, 1.0]), 100, seed=3)
    with pytest.raises(ValueError):
        smc.smc_run(log_lik, _flat_prior_sampler(-1, 1), _flat_log_prior(-1, 1),
                    np.array([0.1, 1.0]), 100, seed=3)


def test_smc_degenerate_likelihood_names_stage():
    log_lik = lambda x: np.full(x.shape[0], -np.inf)
    with pytest.raises(FloatingPointError, match="stage 1"):
        smc.smc_run(log_lik, _flat_prior_sampler(-1, 1), _flat_log_prior(-1, 1),
                    smc.default_schedule(5), 100, seed=4)


def test_smc_bridged_initialization_anchors_particles():
    # concentrated start far from the posterior mode: with local mutation
    # moves the bridged run stays clustered toward its initialization, while
    # the prior-started run recovers the posterior
    log_lik = lambda x: -0.5 * np.sum(x ** 2, axis=-1)
    init_sampler = lambda rng, n: 5.0 + 0.2 * rng.standard_normal((n, 1))
    log_init = lambda x: -0.5 * np.sum(((x - 5.0) / 0.2) ** 2, axis=-1)
    bridged = smc.smc_run(log_lik, _flat_prior_sampler(-8, 8),
                          _flat_log_prior(-8, 8), smc.default_schedule(20),
                          n_particles=5000, seed=5,
                          init_sampler=init_sampler, log_init=log_init)
    plain = smc.smc_run(log_lik, _flat_prior_sampler(-8, 8),
                        _flat_log_prior(-8, 8), smc.default_schedule(20),
                        n_particles=5000, seed=5)
    assert bridged.weighted_mean()[0] > 1.0
    assert abs(plain.weighted_mean()[0]) < 0.1
    with pytest.raises(ValueError):
        smc.smc_run(log_lik, _flat_prior_sampler(-8, 8), _flat_log_prior(-8, 8),
                    smc.default_schedule(5), 100, seed=6,
                    init_sampler=init_sampler)


def test_smc_history_lambda_monotone():
    log_lik = lambda x: -0.5 * np.sum(x ** 2, axis=-1)
    _, hist = smc.smc_run(log_lik, _flat_prior_sampler(-8, 8),
                          _flat_log_prior(-8, 8), smc.default_schedule(10),
                          n_particles=500, seed=7, keep_history=True)
    lams = [h.lam for h in hist]
    assert lams[0] == 0.0 and lams[-1] == 1.0
    assert np.all(np.diff(lams) > 0)


def test_export_particles_csv(tmp_path):
    n = 20
    ps = smc.ParticleSystem(np.random.default_rng(8).normal(size=(n, 2)),
                            np.full(n, -np.log(n)), 1.0, 3)
    path = tmp_path / "p.csv"
    smc.export_particles_csv(ps, path, names=["a", "b"])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "a,b,weight"
    assert len(lines) == n + 1
