"""Tests for the finite-state spectral analysis."""

import numpy as np
import pytest

from iamcmc import spectral as spc
from iamcmc import targets as tgt


# ---------------------------------------------------------------------------
# Matrix construction
# ---------------------------------------------------------------------------

def test_transition_matrix_validation():
    with pytest.raises(ValueError):
        spc.TransitionMatrix(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        spc.TransitionMatrix(np.array([[1.2, -0.2], [0.5, 0.5]]))
    tm = spc.TransitionMatrix(np.eye(3))
    assert tm.n == 3


def test_gibbs_matrices_uniform_case():
    mats = spc.build_gibbs_matrices(0.25)
    assert np.all(mats["P1"][mats["P1"] > 0] == 0.5)
    assert np.all(mats["P2"][mats["P2"] > 0] == 0.5)


def test_gibbs_matrices_teleport_fixes_off_diagonal():
    mats = spc.build_gibbs_matrices(0.3)
    assert np.array_equal(mats["T"][1], [0.0, 1.0, 0.0, 0.0])
    assert np.array_equal(mats["T"][2], [0.0, 0.0, 1.0, 0.0])
    assert np.array_equal(mats["T"][0], [0.5, 0.0, 0.0, 0.5])


def test_gibbs_matrices_row_sums():
    mats = spc.build_gibbs_matrices(0.4)
    for m in mats.values():
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_gibbs_matrices_rejects_bad_a():
    for a in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            spc.build_gibbs_matrices(a)


def test_generic_four_state_matches_symmetric_build():
    a = 0.35
    got = spc.four_state_matrices([a, 0.5 - a, 0.5 - a, a])
    want = spc.build_gibbs_matrices(a)
    for key in ("P1", "P2", "P_sys", "P_RS", "T"):
        assert np.allclose(got[key], want[key], atol=1e-12)


# ---------------------------------------------------------------------------
# Stationary law
# ---------------------------------------------------------------------------

def test_stationary_doubly_stochastic():
    pi = spc.stationary_distribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert np.allclose(pi, [0.5, 0.5], atol=1e-12)


def test_stationary_of_random_scan_gibbs():
    a = 0.3
    mats = spc.build_gibbs_matrices(a)
    pi = spc.stationary_distribution(mats["P_RS"])
    assert np.allclose(pi, spc.four_state_pi(a), atol=1e-10)


def test_stationary_rejects_reducible():
    with pytest.raises(ValueError, match="communicating"):
        spc.stationary_distribution(np.eye(3))


def test_stationary_rejects_periodic():
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="periodic"):
        spc.stationary_distribution(flip)


# ---------------------------------------------------------------------------
# Reversibility and spectral gap
# ---------------------------------------------------------------------------

def test_two_state_gap_closed_form():
    P = np.array([[0.7, 0.3], [0.3, 0.7]])
    pi = np.array([0.5, 0.5])
    assert spc.spectral_gap(P, pi) == pytest.approx(0.6, abs=1e-12)


def test_rank_one_gap_is_one():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    P = np.tile(pi, (4, 1))
    assert spc.spectral_gap(P, pi) == pytest.approx(1.0, abs=1e-12)


def test_identity_gap_is_zero():
    pi = np.full(3, 1.0 / 3.0)
    assert spc.spectral_gap(np.eye(3), pi) == pytest.approx(0.0, abs=1e-12)


def test_gap_rejects_non_reversible():
    mats = spc.build_gibbs_matrices(0.4)
    pi = spc.four_state_pi(0.4)
    with pytest.raises(ValueError, match="not reversible"):
        spc.spectral_gap(mats["P_sys"], pi)


def test_reversibility_of_four_state_kernels():
    a = 0.4
    mats = spc.build_gibbs_matrices(a)
    pi = spc.four_state_pi(a)
    ok_rs, v_rs = spc.reversibility_check(mats["P_RS"], pi)
    assert ok_rs and v_rs <= 1e-12
    ok_sys, v_sys = spc.reversibility_check(mats["P_sys"], pi)
    assert not ok_sys and v_sys > 1e-6
    ok_t, v_t = spc.reversibility_check(mats["T"], pi)
    assert ok_t and v_t <= 1e-12


def test_reversibilize_fixes_systematic_scan():
    a = 0.4
    mats = spc.build_gibbs_matrices(a)
    pi = spc.four_state_pi(a)
    R = spc.reversibilize(mats["P_sys"], pi)
    ok, v = spc.reversibility_check(R, pi)
    assert ok and v <= 1e-14
    assert np.allclose(pi @ R, pi, atol=1e-14)


# ---------------------------------------------------------------------------
# Conductance and Cheeger bounds
# ---------------------------------------------------------------------------

def test_conductance_rank_one_uniform():
    pi = np.full(4, 0.25)
    P = np.tile(pi, (4, 1))
    h, cut = spc.conductance(P, pi)
    assert h == pytest.approx(0.5, abs=1e-12)
    assert pi[list(cut)].sum() == pytest.approx(0.5)


def test_conductance_disconnected_is_zero():
    P = np.zeros((4, 4))
    P[:2, :2] = 0.5
    P[2:, 2:] = 0.5
    h, _ = spc.conductance(P, np.full(4, 0.25))
    assert h == pytest.approx(0.0, abs=1e-15)


def test_conductance_two_state_symmetric():
    p = 0.2
    P = np.array([[1 - p, p], [p, 1 - p]])
    pi = np.array([0.5, 0.5])
    h, _ = spc.conductance(P, pi)
    assert h == pytest.approx(p, abs=1e-12)
    lo, gamma, hi = spc.cheeger_bounds(P, pi)
    assert lo - 1e-9 <= gamma <= hi + 1e-9


def test_conductance_refuses_large_chains():
    n = 30
    pi = np.full(n, 1.0 / n)
    with pytest.raises(ValueError):
        spc.conductance(np.tile(pi, (n, 1)), pi)


def test_cheeger_sandwich_random_chains():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n = int(rng.integers(4, 9))
        # symmetric flow matrix gives a reversible chain by construction
        F = rng.random((n, n))
        F = F + F.T
        pi = F.sum(axis=1) / F.sum()
        P = F / F.sum(axis=1, keepdims=True)
        lo, gamma, hi = spc.cheeger_bounds(P, pi)
        assert lo - 1e-9 <= gamma <= hi + 1e-9


def test_state_decomposition_bound():
    # partition into the diagonal pair D and off-diagonal pair O: the gap of
    # the envelope dominates half the product of the projected two-block
    # chain's gap and the worst within-block restricted gap
    for a in np.arange(0.1, 0.5, 0.05):
        mats = spc.build_gibbs_matrices(float(a))
        pi = spc.four_state_pi(float(a))
        env = spc.envelope_matrix(mats["P_RS"], mats["T"])
        gamma = spc.spectral_gap(env, pi)
        blocks = [(0, 3), (1, 2)]
        # projected chain across blocks
        PH = np.zeros((2, 2))
        piH = np.zeros(2)
        for i, bi in enumerate(blocks):
            piH[i] = pi[list(bi)].sum()
            for j, bj in enumerate(blocks):
                PH[i, j] = sum(pi[x] * env[x, y] for x in bi for y in bj) / piH[i]
        gamma_h = spc.spectral_gap(PH, piH)
        # restricted chains: mass leaving the block folds onto the diagonal
        gammas_r = []
        for bi in blocks:
            sub = env[np.ix_(bi, bi)].copy()
            sub[np.diag_indices(2)] += 1.0 - sub.sum(axis=1)
            pi_r = pi[list(bi)] / pi[list(bi)].sum()
            gammas_r.append(spc.spectral_gap(sub, pi_r))
        assert gamma >= 0.5 * gamma_h * min(gammas_r) - 1e-9


# ---------------------------------------------------------------------------
# Gap curves
# ---------------------------------------------------------------------------

def test_envelope_matrix_formula():
    mats = spc.build_gibbs_matrices(0.3)
    env = spc.envelope_matrix(mats["P_RS"], mats["T"])
    want = 0.5 * (mats["T"] @ mats["P_RS"] + mats["P_RS"] @ mats["T"])
    assert np.array_equal(env, want)


def test_gap_curve_trap_limits():
    rows = spc.gap_curve([0.3, 0.4, 0.45, 0.49, 0.499])
    gam_rs = [r["gamma_rs"] for r in rows]
    gam_env = [r["gamma_env_rs"] for r in rows]
    assert all(np.diff(gam_rs) < 0)  # local gap collapses toward the trap
    assert all(np.diff(gam_env) > 0)  # envelope gap grows instead
    assert gam_rs[-1] < 0.01
    assert gam_env[-1] > 0.95


def test_gap_curve_csv(tmp_path):
    rows = spc.gap_curve([0.2, 0.3])
    path = tmp_path / "curve.csv"
    spc.write_gap_curve_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "a,gamma_rs,gamma_env_rs,gamma_env_sys"
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# Discretized circle
# ---------------------------------------------------------------------------

def test_discretize_circle_masses():
    target = tgt.make_circle_bimodal(4.0, 2.0)
    pi_cells = spc.discretize_circle(target, 100)
    assert pi_cells.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        spc.discretize_circle(target, 101)


def test_circle_rwm_matrix_reversible():
    target = tgt.make_circle_bimodal(4.0, 2.0)
    pi_cells = spc.discretize_circle(target, 80)
    P = spc.circle_rwm_matrix(pi_cells, delta_cells=2)
    ok, v = spc.reversibility_check(P, pi_cells)
    assert ok and v <= 1e-15


def test_circle_teleport_matrix_antipodal():
    target = tgt.make_circle_bimodal(4.0, 2.0)
    pi_cells = spc.discretize_circle(target, 80)
    T = spc.circle_teleport_matrix(pi_cells)
    ok, _ = spc.reversibility_check(T, pi_cells)
    assert ok
    # support only on self and the antipodal cell
    for i in range(80):
        nz = np.flatnonzero(T[i])
        assert set(nz) <= {i, (i + 40) % 80}


def test_circle_gap_separation():
    nu = 2.0
    gaps = {}
    for L in (2.0, 4.0):
        target = tgt.make_circle_bimodal(L, nu)
        n = spc.circle_grid_size(L)
        gaps[L] = spc.circle_gap_pair(target, n_cells=n, delta_cells=2)
    local_ratio = gaps[2.0][0] / gaps[4.0][0]
    env_ratio = max(gaps[2.0][1], gaps[4.0][1]) / min(gaps[2.0][1], gaps[4.0][1])
    assert local_ratio > 10.0
    assert env_ratio < 2.0


def test_circle_grid_size_even_and_monotone():
    sizes = [spc.circle_grid_size(L) for L in (2.0, 4.0, 6.0, 8.0)]
    assert all(s % 2 == 0 for s in sizes)
    assert sizes == sorted(sizes)
    assert sizes[1] == 400
