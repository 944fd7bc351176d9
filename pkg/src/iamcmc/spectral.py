"""Exact finite-state spectral analysis.

Builds the four-state Gibbs and teleport matrices, computes stationary laws,
spectral gaps of reversible kernels via the symmetrized eigensolve, exact
conductance by exhaustive cut enumeration, and a discretized bimodal-circle
chain for the geometric gap-decay comparison.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .targets import TargetDensity

ROW_SUM_TOL = 1e-12
REVERSIBILITY_TOL = 1e-10
MAX_EXHAUSTIVE_STATES = 24


@dataclass
class TransitionMatrix:
    P: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        n = self.P.shape[0]
        if self.P.shape != (n, n):
            raise ValueError("transition matrix must be square")
        if np.any(self.P < -ROW_SUM_TOL) or np.any(self.P > 1.0 + ROW_SUM_TOL):
            raise ValueError("entries must lie in [0, 1]")
        rows = self.P.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise ValueError("rows must sum to 1")
        if not self.labels:
            self.labels = tuple(str(i) for i in range(n))

    @property
    def n(self) -> int:
        return self.P.shape[0]


FOUR_STATE_LABELS = ("(0,0)", "(0,1)", "(1,0)", "(1,1)")


def build_gibbs_matrices(a: float) -> dict:
    """Four-state binary-pair kernels for the target (a, 1/2-a, 1/2-a, a).

    States ordered (0,0), (0,1), (1,0), (1,1).  P1 redraws the first
    coordinate from its exact conditional, P2 the second; P_sys applies P1
    then P2; P_RS picks one of them with a fair coin; T swaps the two
    diagonal states with 1/2-1/2 rows and fixes the off-diagonal ones.
    """
    if not 0.0 < a < 0.5:
        raise ValueError("a must lie in (0, 1/2)")
    b = 1.0 - 2.0 * a
    P1 = np.array([
        [2 * a, 0.0, b, 0.0],
        [0.0, b, 0.0, 2 * a],
        [2 * a, 0.0, b, 0.0],
        [0.0, b, 0.0, 2 * a],
    ])
    P2 = np.array([
        [2 * a, b, 0.0, 0.0],
        [2 * a, b, 0.0, 0.0],
        [0.0, 0.0, b, 2 * a],
        [0.0, 0.0, b, 2 * a],
    ])
    T = np.array([
        [0.5, 0.0, 0.0, 0.5],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.5, 0.0, 0.0, 0.5],
    ])
    return {"P1": P1, "P2": P2, "P_sys": P1 @ P2,
            "P_RS": 0.5 * P1 + 0.5 * P2, "T": T}


def four_state_pi(a: float) -> np.ndarray:
    return np.array([a, 0.5 - a, 0.5 - a, a])


def four_state_matrices(probs) -> dict:
    """Generic four-state analogue of build_gibbs_matrices for arbitrary probs.

    Conditionals come from the supplied law; T swaps the diagonal states with
    rows proportional to their probabilities.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (4,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("need a strictly positive four-state law summing to 1")
    P1 = np.zeros((4, 4))
    P2 = np.zeros((4, 4))
    for t1 in range(2):
        for t2 in range(2):
            i = 2 * t1 + t2
            c1 = p[t2], p[2 + t2]  # theta1 = 0 or 1 given theta2
            P1[i, t2] = c1[0] / sum(c1)
            P1[i, 2 + t2] = c1[1] / sum(c1)
            c2 = p[2 * t1], p[2 * t1 + 1]  # theta2 = 0 or 1 given theta1
            P2[i, 2 * t1] = c2[0] / sum(c2)
            P2[i, 2 * t1 + 1] = c2[1] / sum(c2)
    w = p[0] + p[3]
    T = np.eye(4)
    T[0, 0] = T[3, 0] = p[0] / w
    T[0, 3] = T[3, 3] = p[3] / w
    return {"P1": P1, "P2": P2, "P_sys": P1 @ P2,
            "P_RS": 0.5 * P1 + 0.5 * P2, "T": T}


# ---------------------------------------------------------------------------
# Stationary law, reversibility, spectral gap
# ---------------------------------------------------------------------------

def _communicating_classes(P: np.ndarray) -> list:
    """Strongly connected components of the support graph (Tarjan-free BFS)."""
    n = P.shape[0]
    adj = P > 0.0
    reach = np.eye(n, dtype=bool) | adj
    for _ in range(n):
        new = reach | (reach @ reach)
        if np.array_equal(new, reach):
            break
        reach = new
    classes = []
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        members = np.where(reach[i] & reach[:, i])[0]
        seen[members] = True
        classes.append(tuple(int(m) for m in members))
    return classes


def _period(P: np.ndarray) -> int:
    n = P.shape[0]
    # gcd of return-time lengths from state 0 via powers of the support graph
    adj = P > 0.0
    power = np.eye(n, dtype=bool)
    g = 0
    for k in range(1, 2 * n + 1):
        power = power @ adj
        if power[0, 0]:
            g = np.gcd(g, k)
            if g == 1:
                break
    return g if g else 0


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Left fixed point pi P = pi with sum 1, residual below 1e-12.

    Requires an irreducible aperiodic chain; a reducible chain raises with
    the closed communicating classes named.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    classes = _communicating_classes(P)
    if len(classes) > 1:
        closed = [c for c in classes
                  if np.all(P[np.ix_(c, c)].sum(axis=1) > 1.0 - ROW_SUM_TOL)]
        raise ValueError(f"reducible chain; closed communicating classes: {closed}")
    if _period(P) != 1:
        raise ValueError("chain is periodic")
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    residual = np.max(np.abs(pi @ P - pi))
    if residual > 1e-12:
        raise ArithmeticError(f"stationary solve residual {residual:.2e}")
    return pi


def reversibility_check(P: np.ndarray, pi: np.ndarray) -> tuple[bool, float]:
    """Detailed-balance check: max |pi_x P_xy - pi_y P_yx| and a 1e-10 verdict."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if P.shape[0] != pi.size:
        raise ValueError("dimension mismatch")
    flow = pi[:, None] * P
    violation = float(np.max(np.abs(flow - flow.T)))
    return violation <= REVERSIBILITY_TOL, violation


def spectral_gap(P: np.ndarray, pi: np.ndarray) -> float:
    """Gap 1 - |lambda_2| of a pi-reversible kernel.

    Computed from the symmetric operator D^{1/2} P D^{-1/2}; non-reversible
    input raises (use the envelope or reversibilize first).
    """
    ok, violation = reversibility_check(P, pi)
    if not ok:
        raise ValueError(
            f"kernel is not reversible (violation {violation:.2e}); "
            "apply the order-randomized envelope or additive reversibilization")
    d = np.sqrt(np.asarray(pi, dtype=float))
    S = (d[:, None] * P) / d[None, :]
    vals = np.linalg.eigvalsh(0.5 * (S + S.T))
    vals = np.sort(np.abs(vals))[::-1]
    lam2 = vals[1] if vals.size > 1 else 0.0
    return float(np.clip(1.0 - lam2, 0.0, 1.0))


def time_reversal(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Adjoint kernel P*(x,y) = pi_y P(y,x) / pi_x."""
    pi = np.asarray(pi, dtype=float)
    return (pi[None, :] * np.asarray(P, dtype=float).T) / pi[:, None]


def reversibilize(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Additive reversibilization (P + P*) / 2, always pi-reversible."""
    return 0.5 * (np.asarray(P, dtype=float) + time_reversal(P, pi))


# ---------------------------------------------------------------------------
# Conductance and the Cheeger sandwich
# ---------------------------------------------------------------------------

def conductance(P: np.ndarray, pi: np.ndarray) -> tuple[float, tuple]:
    """Exact conductance min_S flow(S, S^c) / pi(S) over cuts with pi(S) <= 1/2.

    Exhaustive enumeration; refuses more than 24 states.  Returns the value
    and a minimizing cut as a tuple of state indices.
    """
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = P.shape[0]
    if n > MAX_EXHAUSTIVE_STATES:
        raise ValueError(f"exhaustive cut enumeration capped at {MAX_EXHAUSTIVE_STATES} states")
    flow = pi[:, None] * P
    best = np.inf
    best_cut = ()
    for size in range(1, n):
        for cut in combinations(range(n), size):
            s = list(cut)
            mass = pi[s].sum()
            if mass > 0.5 + 1e-15 or mass <= 0.0:
                continue
            comp = [i for i in range(n) if i not in cut]
            h = flow[np.ix_(s, comp)].sum() / mass
            if h < best:
                best = h
                best_cut = cut
    return float(best), best_cut


def cheeger_bounds(P: np.ndarray, pi: np.ndarray) -> tuple[float, float, float]:
    """Return (h^2/2, gamma, 2h); the gap must sit inside the sandwich."""
    h, _ = conductance(P, pi)
    gamma = spectral_gap(P, pi)
    return 0.5 * h * h, gamma, 2.0 * h


# ---------------------------------------------------------------------------
# Gap curves for the four-state family
# ---------------------------------------------------------------------------

def envelope_matrix(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Order-randomized composition: half teleport-then-local, half reverse.

    Teleport-then-local corresponds to the matrix product T P with
    row-stochastic kernels acting left to right.
    """
    return 0.5 * (T @ P + P @ T)


def gap_curve(a_grid) -> list[dict]:
    """Gaps of P_RS and the envelopes over a grid of trap parameters a.

    The systematic-scan envelope is not exactly reversible, so its gap is
    taken after additive reversibilization; the other two columns are exact.
    """
    rows = []
    for a in np.asarray(a_grid, dtype=float):
        mats = build_gibbs_matrices(float(a))
        pi = four_state_pi(float(a))
        env_rs = envelope_matrix(mats["P_RS"], mats["T"])
        env_sys = envelope_matrix(mats["P_sys"], mats["T"])
        ok, _ = reversibility_check(env_sys, pi)
        if not ok:
            env_sys = reversibilize(env_sys, pi)
        rows.append({
            "a": float(a),
            "gamma_rs": spectral_gap(mats["P_RS"], pi),
            "gamma_env_rs": spectral_gap(env_rs, pi),
            "gamma_env_sys": spectral_gap(env_sys, pi),
        })
    return rows


def write_gap_curve_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["a", "gamma_rs", "gamma_env_rs", "gamma_env_sys"])
        writer.writeheader()
        writer.writerows(rows)


def plot_gap_curve(rows: list[dict], path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    a = [r["a"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(a, [r["gamma_rs"] for r in rows], label="random-scan Gibbs")
    ax.plot(a, [r["gamma_env_rs"] for r in rows], label="envelope (random scan)")
    ax.plot(a, [r["gamma_env_sys"] for r in rows], label="envelope (systematic scan)")
    ax.set_xlabel("a")
    ax.set_ylabel("spectral gap")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ---------------------------------------------------------------------------
# Discretized bimodal circle
# ---------------------------------------------------------------------------

def discretize_circle(target: TargetDensity, n_cells: int) -> np.ndarray:
    """Midpoint-rule cell masses for a circle target, normalized to sum 1."""
    if n_cells % 2:
        raise ValueError("need an even cell count so antipodes map to cells")
    L = target.support.L
    centers = -2.0 * L + (np.arange(n_cells) + 0.5) * (4.0 * L / n_cells)
    mass = np.exp(target.log_density(centers[:, None]))
    return mass / mass.sum()


def circle_rwm_matrix(pi_cells: np.ndarray, delta_cells: int = 2) -> np.ndarray:
    """Metropolis chain with a uniform proposal over cells within delta_cells.

    Proposal excludes the current cell; rejected mass stays put; wraparound
    neighbors via circular indexing.  Reversible by construction.
    """
    n = pi_cells.size
    offsets = [o for o in range(-delta_cells, delta_cells + 1) if o != 0]
    q = 1.0 / len(offsets)
    P = np.zeros((n, n))
    for i in range(n):
        for o in offsets:
            j = (i + o) % n
            acc = min(1.0, pi_cells[j] / pi_cells[i]) if pi_cells[i] > 0 else 1.0
            P[i, j] += q * acc
        P[i, i] += 1.0 - P[i].sum()
    return P


def circle_teleport_matrix(pi_cells: np.ndarray) -> np.ndarray:
    """Teleport over antipodal pairs, weighted by the target on each member."""
    n = pi_cells.size
    if n % 2:
        raise ValueError("need an even cell count")
    P = np.zeros((n, n))
    half = n // 2
    for i in range(n):
        j = (i + half) % n
        total = pi_cells[i] + pi_cells[j]
        if total <= 0:
            P[i, i] = 1.0
            continue
        P[i, i] = pi_cells[i] / total
        P[i, j] = pi_cells[j] / total
    return P


def circle_grid_size(L: float, base: int = 400, ref_L: float = 4.0,
                     alpha: float = 0.6) -> int:
    """Even cell count scaled as (L / ref_L)^alpha from a base resolution.

    Scaling the resolution sublinearly with the circumference keeps the
    envelope's within-mode relaxation rate roughly flat across L, so the
    geometric decay of the local gap stands out against an L-free envelope.
    """
    n = int(round(base * (L / ref_L) ** alpha / 2)) * 2
    return max(n, 4)


def circle_gap_pair(target: TargetDensity, n_cells: int = 400,
                    delta_cells: int = 2) -> tuple[float, float]:
    """Gap of the local chain and of its teleport envelope on the circle grid."""
    pi_cells = discretize_circle(target, n_cells)
    P = circle_rwm_matrix(pi_cells, delta_cells)
    T = circle_teleport_matrix(pi_cells)
    env = envelope_matrix(P, T)
    ok, _ = reversibility_check(env, pi_cells)
    if not ok:
        env = reversibilize(env, pi_cells)
    return spectral_gap(P, pi_cells), spectral_gap(env, pi_cells)
