"""Tests for equivalence structures and teleport moves."""

import numpy as np
import pytest
from scipy import stats

from iamcmc import equivalence as eqv
from iamcmc import targets as tgt


# ---------------------------------------------------------------------------
# Class membership
# ---------------------------------------------------------------------------

def test_circle_antipode_value():
    s = eqv.antipodal_circle_structure(10.0)
    members = eqv.class_members(np.array([5.0]), s)
    assert len(members) == 2
    assert members[1][0] == pytest.approx(-15.0)


def test_mixture_switch_member():
    s = eqv.mixture_label_switch_structure()
    theta = np.array([0.0, 20.0, 1.0, 5.0, 0.3])
    members = eqv.class_members(theta, s)
    assert np.allclose(members[1], [20.0, 0.0, 5.0, 1.0, 0.7])


def test_ma1_flip_member():
    s = eqv.ma1_flip_structure()
    # (theta, sigma) = (0.5, 1) maps to (2, 0.5) in (theta, log sigma) coords
    members = eqv.class_members(np.array([0.5, 0.0]), s)
    assert members[1][0] == pytest.approx(2.0)
    assert np.exp(members[1][1]) == pytest.approx(0.5)


def test_ma1_flip_singleton_near_zero():
    s = eqv.ma1_flip_structure()
    members = eqv.class_members(np.array([1e-8, 0.3]), s)
    assert len(members) == 1


def test_classing_idempotence():
    structures = [
        (eqv.antipodal_circle_structure(4.0), np.array([1.3])),
        (eqv.ma1_flip_structure(), np.array([0.7, -0.2])),
        (eqv.mixture_label_switch_structure(),
         np.array([1.0, 2.0, 0.5, 0.8, 0.3])),
        (eqv.sign_flip_structure(), np.array([2.0, -1.0])),
    ]
    for s, theta in structures:
        members = eqv.class_members(theta, s)
        again = eqv.class_members(members[1], s)
        got = sorted(tuple(np.round(m, 10)) for m in again)
        want = sorted(tuple(np.round(m, 10)) for m in members)
        assert got == want


def test_identity_structure_is_singleton():
    s = eqv.identity_structure()
    members = eqv.class_members(np.array([1.0, 2.0]), s)
    assert len(members) == 1


# ---------------------------------------------------------------------------
# Fiber samplers
# ---------------------------------------------------------------------------

def test_affine_fiber_membership():
    s = eqv.affine_sum_fiber_structure(k=6)
    theta = np.array([1.0, -2.0, 0.5, 3.0, 0.0, 1.5])
    sampler = eqv.class_members(theta, s)
    rng = np.random.default_rng(0)
    draws = sampler.sample(rng, 200)
    assert np.all(np.abs(draws.sum(axis=1) - theta.sum()) <= 1e-10)
    assert np.all((draws >= -10.0) & (draws <= 10.0))
    assert sampler.contains(draws[0])


def test_affine_fiber_uniform_on_segment():
    # with k=2 and sum 0 the fiber is the segment mu1 in [-10, 10], mu2 = -mu1
    s = eqv.affine_sum_fiber_structure(k=2)
    sampler = eqv.FiberSampler(s, np.array([3.0, -3.0]))
    rng = np.random.default_rng(1)
    draws = sampler.sample(rng, 4000)
    u = (draws[:, 0] + 10.0) / 20.0
    _, pvalue = stats.kstest(u, "uniform")
    assert pvalue > 0.001


def test_flat_y_fiber_membership():
    s = eqv.flat_y_fiber_structure(D=2.0)
    theta = np.array([0.7, 1.0])
    sampler = eqv.class_members(theta, s)
    draws = sampler.sample(np.random.default_rng(2), 500)
    assert np.all(draws[:, 0] == 0.7)
    assert np.all(np.abs(draws[:, 1]) <= 2.0)
    assert not sampler.contains(np.array([0.7, 2.5]))


# ---------------------------------------------------------------------------
# Exact teleport
# ---------------------------------------------------------------------------

def test_teleport_equal_density_members_fifty_fifty():
    data = np.random.default_rng(3).normal(5.0, 2.0, size=30)
    target = tgt.make_mixture_gaussian_loglik(data)
    s = eqv.mixture_label_switch_structure()
    theta = np.array([4.0, 8.0, 1.5, 2.5, 0.4])
    rng = np.random.default_rng(4)
    n = 20000
    stayed = sum(eqv.teleport_exact(theta, target, s, rng)[0] == theta[0]
                 for _ in range(n))
    # flat prior: both members carry the same density, so a fair coin
    assert abs(stayed / n - 0.5) < 3.0 * 0.5 / np.sqrt(n)


def test_teleport_weights_follow_prior():
    data = tgt.simulate_ma1(0.5, 1.0, 100, seed=5)
    target = tgt.make_ma1_log_posterior(data, prior="gaussian")
    s = eqv.ma1_flip_structure()
    theta = np.array([2.0, np.log(0.5)])
    flip = eqv.ma1_flip(theta)
    # likelihood cancels within the class, so weights reduce to the prior
    lp = np.array([float(target.log_prior(theta)), float(target.log_prior(flip))])
    p_stay = np.exp(lp[0]) / np.exp(lp).sum()
    rng = np.random.default_rng(6)
    n = 20000
    stayed = sum(eqv.teleport_exact(theta, target, s, rng)[0] == theta[0]
                 for _ in range(n))
    se = np.sqrt(p_stay * (1 - p_stay) / n)
    assert abs(stayed / n - p_stay) < 3.0 * se


def test_teleport_rejects_zero_density_class():
    target = tgt.make_gaussian(1, box=tgt.Box([-1.0], [1.0]))
    s = eqv.sign_flip_structure()
    with pytest.raises(ValueError):
        eqv.teleport_exact(np.array([5.0]), target, s, np.random.default_rng(0))


def test_teleport_batch_matches_scalar_law():
    target = tgt.make_gaussian(1)
    s = eqv.sign_flip_structure()
    thetas = np.full((50000, 1), 1.3)
    out = eqv.teleport_exact_batch(thetas, target, s, np.random.default_rng(7))
    # symmetric target: equal-weight members
    frac = (out[:, 0] > 0).mean()
    assert abs(frac - 0.5) < 3.0 * 0.5 / np.sqrt(len(thetas))


def test_teleport_batch_fiber_preserves_sum():
    data = np.array([10.0])
    target = tgt.make_conditional_gaussian_loglik(data, k=4)
    s = eqv.affine_sum_fiber_structure(k=4)
    thetas = np.tile(np.array([2.0, 3.0, -1.0, 0.5]), (100, 1))
    out = eqv.teleport_exact_batch(thetas, target, s, np.random.default_rng(8))
    assert np.all(np.abs(out.sum(axis=1) - 4.5) <= 1e-10)


def test_partner_batch_vectorizes_known_maps():
    s = eqv.antipodal_circle_structure(4.0)
    thetas = np.array([[1.0], [-7.5], [0.0]])
    out = eqv.partner_batch(thetas, s)
    for row_in, row_out in zip(thetas, out):
        want = eqv.circle_antipode(row_in, 4.0)
        assert np.allclose(row_out, want)
    s2 = eqv.ma1_flip_structure()
    pts = np.array([[0.5, 0.0], [2.0, -0.7], [1e-9, 0.1]])
    out2 = eqv.partner_batch(pts, s2)
    assert np.allclose(out2[0], [2.0, np.log(0.5)])
    assert np.allclose(out2[2], pts[2])  # singularity guard: stays put


def test_stationarity_one_teleport_step():
    # theta ~ pi via the grid oracle, one teleport, marginal unchanged
    target = tgt.make_gaussian(1)
    s = eqv.sign_flip_structure()
    orc = tgt.build_grid_oracle(target, [(-8.0, 8.0, 4001)])
    rng = np.random.default_rng(9)
    start = orc.sample(100000, rng)
    moved = eqv.teleport_exact_batch(start, target, s, rng)
    ref = orc.sample(100000, np.random.default_rng(10))
    d = stats.ks_2samp(moved[:, 0], ref[:, 0]).statistic
    assert d <= 0.01


# ---------------------------------------------------------------------------
# Multiple-try teleport
# ---------------------------------------------------------------------------

def test_mtm_requires_mtm_mode():
    cfg = eqv.TeleportConfig(mode="exact")
    target = tgt.make_gaussian(1)
    with pytest.raises(ValueError):
        eqv.teleport_mtm(np.array([1.0]), target, eqv.sign_flip_structure(),
                         cfg, np.random.default_rng(0))


def test_mtm_config_validation():
    with pytest.raises(ValueError):
        eqv.TeleportConfig(mode="mtm", mtm_tries=0)
    with pytest.raises(ValueError):
        eqv.TeleportConfig(mode="nope")


def test_mtm_flat_class_always_moves_freely():
    # flat target on the class with a uniform proposal: weights all equal,
    # acceptance is always 1, so outcomes are uniform over members
    target = tgt.make_gaussian(1, sd=1.0)
    asym = tgt.TargetDensity(
        dim=1, support=tgt.Unbounded(1),
        log_density=lambda x: np.zeros(np.asarray(x).shape[:-1]))
    s = eqv.sign_flip_structure()
    cfg = eqv.TeleportConfig(mode="mtm", mtm_tries=3)
    rng = np.random.default_rng(11)
    n = 5000
    stayed = sum(eqv.teleport_mtm(np.array([1.0]), asym, s, cfg, rng)[0] == 1.0
                 for _ in range(n))
    assert abs(stayed / n - 0.5) < 3.0 * 0.5 / np.sqrt(n)
    del target


def test_mtm_occupancy_matches_exact_class_law():
    # finite 2-member class with unequal densities: the MTM chain's long-run
    # occupancy must match the class-conditional law that teleport_exact draws
    target = tgt.TargetDensity(
        dim=1, support=tgt.Unbounded(1),
        log_density=lambda x: np.where(np.asarray(x)[..., 0] > 0,
                                       np.log(0.7), np.log(0.3)))
    s = eqv.sign_flip_structure()
    cfg = eqv.TeleportConfig(mode="mtm", mtm_tries=5)
    rng = np.random.default_rng(12)
    theta = np.array([1.0])
    n = 20000
    hits = 0
    for _ in range(n):
        theta = eqv.teleport_mtm(theta, target, s, cfg, rng)
        hits += theta[0] < 0
    assert abs(hits / n - 0.3) < 0.02
