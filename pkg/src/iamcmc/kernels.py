"""One-step Markov transitions and chain drivers.

Local baselines (random-walk Metropolis, finite-state Gibbs, HMC, NUTS),
teleport moves, and their identification-aware compositions: teleport-then-
local (PT), local-then-teleport (TP), the order-randomized envelope
(1/2 PT + 1/2 TP), the convex mixture (1-eps) P + eps T, and post-hoc batch
augmentation.  Kernels are pure functions of (state, rng): the ChainState
carries its RNG stream, so independently seeded chains can run concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import equivalence as eqv
from .targets import Box, Circle, FiniteTarget, TargetDensity

FD_STEP = 1e-5
NUTS_DIVERGENCE = 1000.0


@dataclass
class ChainState:
    position: np.ndarray  # point in R^dim, or () int array for finite states
    log_pi: float
    rng: np.random.Generator
    stats: dict = field(default_factory=dict)

    def bump(self, key: str, accepted: bool) -> None:
        n, a = self.stats.get(key, (0, 0))
        self.stats[key] = (n + 1, a + int(accepted))

    def acceptance_rate(self, key: str) -> float:
        n, a = self.stats.get(key, (0, 0))
        return a / n if n else float("nan")


def init_state(target: TargetDensity, position, seed) -> ChainState:
    position = np.atleast_1d(np.asarray(position, dtype=float))
    logp = float(target.log_density(position))
    if not np.isfinite(logp):
        raise ValueError(f"initial position {position} has zero target density")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ChainState(position=position, log_pi=logp, rng=rng)


@dataclass
class SampleRun:
    draws: np.ndarray  # (N, dim)
    meta: dict

    @property
    def n(self) -> int:
        return self.draws.shape[0]


# ---------------------------------------------------------------------------
# Local kernels
# ---------------------------------------------------------------------------

def rwm_step(state: ChainState, target: TargetDensity, scale,
             proposal: str = "gauss") -> ChainState:
    """Metropolis step with a symmetric random-walk proposal.

    proposal="gauss" uses N(0, scale^2 I); "ball" uses the uniform ball of
    radius scale.  Circle supports wrap proposals; out-of-box proposals get
    log-density -inf and are rejected by the usual ratio.
    """
    if not np.isfinite(state.log_pi):
        raise ValueError("current state has non-finite log-density")
    rng = state.rng
    x = state.position
    scale = np.asarray(scale, dtype=float)
    if proposal == "gauss":
        prop = x + scale * rng.standard_normal(x.shape)
    elif proposal == "ball":
        d = rng.standard_normal(x.shape)
        d /= np.linalg.norm(d)
        r = scale * rng.random() ** (1.0 / x.size)
        prop = x + r * d
    else:
        raise ValueError(f"unknown proposal {proposal!r}")
    if isinstance(target.support, Circle):
        prop = target.support.wrap(prop)
    logp_prop = float(target.log_density(prop))
    accept = np.log(rng.random()) < logp_prop - state.log_pi
    state.bump("rwm", accept)
    if accept:
        return replace(state, position=prop, log_pi=logp_prop)
    return state


def gibbs_step_finite(state: ChainState, finite_target: FiniteTarget,
                      scan: str = "systematic") -> ChainState:
    """Exact-conditional Gibbs update on the four-state binary-pair target.

    State position is the index into finite_target.states.  systematic scan
    updates coordinate 1 then coordinate 2; random_scan updates one uniformly
    chosen coordinate.
    """
    if finite_target.states != ((0, 0), (0, 1), (1, 0), (1, 1)):
        raise ValueError("gibbs_step_finite expects the four-state target")
    rng = state.rng
    idx = int(state.position[0])
    t1, t2 = finite_target.states[idx]
    probs = finite_target.probs

    def draw_coord(which, t1, t2):
        if which == 0:  # theta1 | theta2
            p0 = probs[_idx(0, t2)]
            p1 = probs[_idx(1, t2)]
            t1 = int(rng.random() < p1 / (p0 + p1))
        else:  # theta2 | theta1
            p0 = probs[_idx(t1, 0)]
            p1 = probs[_idx(t1, 1)]
            t2 = int(rng.random() < p1 / (p0 + p1))
        return t1, t2

    if scan == "systematic":
        t1, t2 = draw_coord(0, t1, t2)
        t1, t2 = draw_coord(1, t1, t2)
    elif scan == "random_scan":
        t1, t2 = draw_coord(int(rng.integers(2)), t1, t2)
    else:
        raise ValueError(f"unknown scan {scan!r}")
    new_idx = _idx(t1, t2)
    return replace(state, position=np.array([float(new_idx)]),
                   log_pi=float(np.log(probs[new_idx])))


def _idx(t1: int, t2: int) -> int:
    return 2 * t1 + t2


# ---------------------------------------------------------------------------
# Gradient-based kernels
# ---------------------------------------------------------------------------

def _grad_log_density(target: TargetDensity, x: np.ndarray) -> np.ndarray:
    if target.grad_log_density is not None:
        return np.asarray(target.grad_log_density(x), dtype=float)
    # central differences, one batched density call for all 2*dim points
    eye = np.eye(x.size) * FD_STEP
    pts = np.concatenate([x + eye, x - eye], axis=0)
    vals = np.asarray(target.log_density(pts), dtype=float)
    return (vals[:x.size] - vals[x.size:]) / (2.0 * FD_STEP)


def _reflect_box(x: np.ndarray, p: np.ndarray, box: Box) -> tuple[np.ndarray, np.ndarray]:
    """Specular reflection of (position, momentum) at violated box bounds."""
    x = x.copy()
    p = p.copy()
    for _ in range(100):
        below = x < box.lower
        above = x > box.upper
        if not (below.any() or above.any()):
            break
        x = np.where(below, 2.0 * box.lower - x, x)
        p = np.where(below, -p, p)
        x = np.where(above, 2.0 * box.upper - x, x)
        p = np.where(above, -p, p)
    return x, p


def leapfrog(target: TargetDensity, x: np.ndarray, p: np.ndarray,
             eps: float, n_steps: int, mass_sigma: float = 1.0):
    """Leapfrog integration of H = U(x) + ||p||^2 / (2 sigma^2), U = -log pi.

    Box supports reflect position and momentum; circle supports wrap.
    Returns (x, p) after n_steps; raises FloatingPointError on non-finite
    gradients so callers can count a divergence.
    """
    inv_m = 1.0 / mass_sigma ** 2
    grad_u = lambda z: -_grad_log_density(target, z)
    g = grad_u(x)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    p = p - 0.5 * eps * g
    for i in range(n_steps):
        x = x + eps * inv_m * p
        if isinstance(target.support, Box):
            x, p = _reflect_box(x, p, target.support)
        elif isinstance(target.support, Circle):
            x = target.support.wrap(x)
        g = grad_u(x)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        p = p - (eps if i < n_steps - 1 else 0.5 * eps) * g
    return x, p


def hmc_step(state: ChainState, target: TargetDensity, eps: float, L: int,
             mass_sigma: float = 1.0) -> ChainState:
    """One HMC transition: momentum refresh, L leapfrog steps, MH accept."""
    rng = state.rng
    x = state.position
    p0 = mass_sigma * rng.standard_normal(x.shape)
    h0 = -state.log_pi + 0.5 * float(p0 @ p0) / mass_sigma ** 2
    try:
        x1, p1 = leapfrog(target, x, p0, eps, L, mass_sigma)
        logp1 = float(target.log_density(x1))
        h1 = -logp1 + 0.5 * float(p1 @ p1) / mass_sigma ** 2
        delta_h = h1 - h0
    except FloatingPointError:
        state.bump("hmc", False)
        state.stats["hmc_divergences"] = state.stats.get("hmc_divergences", 0) + 1
        return state
    state.stats.setdefault("hmc_delta_h", []).append(abs(delta_h))
    accept = np.isfinite(delta_h) and np.log(rng.random()) < -delta_h
    state.bump("hmc", accept)
    if accept:
        return replace(state, position=x1, log_pi=logp1)
    return state


# ---------------------------------------------------------------------------
# NUTS
# ---------------------------------------------------------------------------

@dataclass
class _Tree:
    x_minus: np.ndarray
    p_minus: np.ndarray
    x_plus: np.ndarray
    p_plus: np.ndarray
    x_prop: np.ndarray
    logp_prop: float
    log_sum_w: float
    ok: bool
    alpha_sum: float
    n_alpha: int


def _logaddexp(a, b):
    return float(np.logaddexp(a, b))


def _uturn(x_minus, x_plus, p_minus, p_plus) -> bool:
    dx = x_plus - x_minus
    return (float(dx @ p_minus) < 0.0) or (float(dx @ p_plus) < 0.0)


def nuts_step(state: ChainState, target: TargetDensity, step_size: float,
              max_depth: int = 10, mass_sigma: float = 1.0) -> ChainState:
    """One No-U-Turn transition: doubling tree, multinomial leaf selection.

    Sub-trees with energy error beyond NUTS_DIVERGENCE are discarded and
    counted as divergences.  max_depth=0 degenerates to a single leapfrog.
    """
    rng = state.rng
    x0 = state.position
    p0 = mass_sigma * rng.standard_normal(x0.shape)
    h0 = -state.log_pi + 0.5 * float(p0 @ p0) / mass_sigma ** 2

    def leaf(x, p, direction):
        try:
            x1, p1 = leapfrog(target, x, direction * p, abs(step_size), 1, mass_sigma)
        except FloatingPointError:
            return None
        p1 = direction * p1
        logp1 = float(target.log_density(x1))
        h1 = -logp1 + 0.5 * float(p1 @ p1) / mass_sigma ** 2
        if not np.isfinite(h1) or h1 - h0 > NUTS_DIVERGENCE:
            return None
        alpha = min(1.0, float(np.exp(h0 - h1)))
        return _Tree(x1, p1, x1, p1, x1, logp1, h0 - h1, True, alpha, 1)

    def build(x, p, direction, depth):
        if depth == 0:
            t = leaf(x, p, direction)
            if t is None:
                state.stats["nuts_divergences"] = state.stats.get("nuts_divergences", 0) + 1
            return t
        first = build(x, p, direction, depth - 1)
        if first is None or not first.ok:
            return first
        if direction == 1:
            second = build(first.x_plus, first.p_plus, direction, depth - 1)
        else:
            second = build(first.x_minus, first.p_minus, direction, depth - 1)
        if second is None:
            return None
        if direction == 1:
            first.x_plus, first.p_plus = second.x_plus, second.p_plus
        else:
            first.x_minus, first.p_minus = second.x_minus, second.p_minus
        total = _logaddexp(first.log_sum_w, second.log_sum_w)
        if np.log(rng.random()) < second.log_sum_w - total:
            first.x_prop, first.logp_prop = second.x_prop, second.logp_prop
        first.log_sum_w = total
        first.alpha_sum += second.alpha_sum
        first.n_alpha += second.n_alpha
        first.ok = second.ok and not _uturn(first.x_minus, first.x_plus,
                                            first.p_minus, first.p_plus)
        return first

    tree = _Tree(x0, p0, x0, p0, x0, state.log_pi, 0.0, True, 0.0, 0)
    depth = 0
    new_pos, new_logp = x0, state.log_pi
    accepted = False
    alpha_sum, n_alpha = 0.0, 0
    while depth < max(1, max_depth):
        direction = 1 if rng.random() < 0.5 else -1
        if direction == 1:
            sub = build(tree.x_plus, tree.p_plus, 1, depth)
        else:
            sub = build(tree.x_minus, tree.p_minus, -1, depth)
        if sub is None:
            break
        alpha_sum += sub.alpha_sum
        n_alpha += sub.n_alpha
        if sub.ok:
            total = _logaddexp(tree.log_sum_w, sub.log_sum_w)
            if np.log(rng.random()) < sub.log_sum_w - total:
                new_pos, new_logp = sub.x_prop, sub.logp_prop
                accepted = True
        if direction == 1:
            tree.x_plus, tree.p_plus = sub.x_plus, sub.p_plus
        else:
            tree.x_minus, tree.p_minus = sub.x_minus, sub.p_minus
        tree.log_sum_w = _logaddexp(tree.log_sum_w, sub.log_sum_w)
        if not sub.ok or _uturn(tree.x_minus, tree.x_plus, tree.p_minus, tree.p_plus):
            break
        depth += 1
        if max_depth == 0:
            break
    state.bump("nuts", accepted)
    if n_alpha:
        state.stats.setdefault("nuts_accept_stat", []).append(alpha_sum / n_alpha)
    if accepted:
        return replace(state, position=new_pos, log_pi=new_logp)
    return state


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, eps0: float, target: float = 0.80, gamma: float = 0.05,
                 t0: float = 10.0, kappa: float = 0.75):
        self.mu = np.log(10.0 * eps0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.h_bar = 0.0
        self.log_eps_bar = np.log(eps0)
        self.t = 0
        self.log_eps = np.log(eps0)

    def update(self, accept_stat: float) -> float:
        self.t += 1
        frac = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - np.sqrt(self.t) / self.gamma * self.h_bar
        eta = self.t ** (-self.kappa)
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar
        return float(np.exp(self.log_eps))

    def finalize(self) -> float:
        return float(np.exp(self.log_eps_bar))


def adapt_scale(log_scale: float, accept_rate: float, target_rate: float,
                t: int) -> float:
    """Robbins-Monro update of a log proposal scale during warmup."""
    if not (0.0 < target_rate < 1.0):
        raise ValueError("target_rate must be in (0, 1)")
    gamma_t = max(1, t) ** (-0.6)
    return log_scale + gamma_t * (accept_rate - target_rate)


# ---------------------------------------------------------------------------
# Teleport and compositions
# ---------------------------------------------------------------------------

def teleport_step(state: ChainState, target: TargetDensity,
                  structure: eqv.EquivalenceStructure,
                  config: Optional[eqv.TeleportConfig] = None) -> ChainState:
    """Apply the teleport kernel once (exact conditional draw or MTM)."""
    if config is not None and config.mode == "mtm":
        new = eqv.teleport_mtm(state.position, target, structure, config, state.rng)
    else:
        new = eqv.teleport_exact(state.position, target, structure, state.rng)
    return replace(state, position=np.atleast_1d(new),
                   log_pi=float(target.log_density(new)))


def compose_step(state: ChainState, first: Callable[[ChainState], ChainState],
                 second: Callable[[ChainState], ChainState]) -> ChainState:
    """Apply first, then second.  PT ordering = teleport first, then local."""
    return second(first(state))


def envelope_step(state: ChainState, local: Callable[[ChainState], ChainState],
                  teleport: Callable[[ChainState], ChainState]) -> ChainState:
    """Order-randomized envelope: fair coin picks teleport-local or local-teleport."""
    if state.rng.random() < 0.5:
        return local(teleport(state))
    return teleport(local(state))


def mixture_step(state: ChainState, local: Callable[[ChainState], ChainState],
                 teleport: Callable[[ChainState], ChainState],
                 epsilon: float) -> ChainState:
    """Convex mixture: with probability epsilon teleport, otherwise local move."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if state.rng.random() < epsilon:
        return teleport(state)
    return local(state)


def batch_augment(draws: np.ndarray, target: TargetDensity,
                  structure: eqv.EquivalenceStructure, M: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Emit M teleport draws per retained state; pooled draws target pi.

    Output is stacked (N*M, dim) with equal per-state batch size, matching the
    pooled empirical-measure estimator.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    draws = np.asarray(draws, dtype=float)
    repeated = np.repeat(draws, M, axis=0)
    return eqv.teleport_exact_batch(repeated, target, structure, rng)


# ---------------------------------------------------------------------------
# Kernel specs and chain driver
# ---------------------------------------------------------------------------

@dataclass
class KernelSpec:
    """Declarative kernel description resolved by make_kernel."""

    kind: str
    tuning: dict = field(default_factory=dict)


def make_kernel(spec: KernelSpec, target: TargetDensity,
                structure: Optional[eqv.EquivalenceStructure] = None,
                finite_target: Optional[FiniteTarget] = None
                ) -> Callable[[ChainState], ChainState]:
    """Resolve a KernelSpec into a step closure over the given target."""
    kind = spec.kind
    t = spec.tuning
    if kind in ("rwm_gauss", "rwm_ball"):
        proposal = "gauss" if kind == "rwm_gauss" else "ball"
        scale = t.get("scale", 1.0)
        return lambda s: rwm_step(s, target, scale, proposal)
    if kind == "gibbs_finite":
        scan = t.get("scan", "systematic")
        if finite_target is None:
            raise ValueError("gibbs_finite needs a finite target")
        return lambda s: gibbs_step_finite(s, finite_target, scan)
    if kind == "hmc":
        eps, L = t.get("eps", 0.1), t.get("leapfrog_steps", 10)
        sigma = t.get("mass_sigma", 1.0)
        return lambda s: hmc_step(s, target, eps, L, sigma)
    if kind == "nuts":
        step = t.get("step_size", 0.1)
        depth = t.get("max_depth", 10)
        return lambda s: nuts_step(s, target, step, depth)
    if kind == "teleport":
        cfg = t.get("config")
        if structure is None:
            raise ValueError("teleport needs an equivalence structure")
        return lambda s: teleport_step(s, target, structure, cfg)
    if kind in ("compose_pt", "compose_tp", "envelope", "mixture"):
        if structure is None:
            raise ValueError(f"{kind} needs an equivalence structure")
        local = make_kernel(KernelSpec(t.get("local", "rwm_gauss"),
                                       t.get("local_tuning", {})),
                            target, structure, finite_target)
        tp = make_kernel(KernelSpec("teleport", {"config": t.get("config")}),
                         target, structure, finite_target)
        if kind == "compose_pt":
            return lambda s: compose_step(s, tp, local)
        if kind == "compose_tp":
            return lambda s: compose_step(s, local, tp)
        if kind == "envelope":
            return lambda s: envelope_step(s, local, tp)
        epsilon = t.get("epsilon", 0.5)
        return lambda s: mixture_step(s, local, tp, epsilon)
    raise ValueError(f"unknown kernel kind {kind!r}")


def run_chain(kernel: Callable[[ChainState], ChainState], target: TargetDensity,
              init, n_draws: int, burn: int = 0, thin: int = 1,
              seed: int = 0) -> SampleRun:
    """Drive one chain: burn, then retain every thin-th of n_draws * thin steps.

    Deterministic given (seed, kernel config); acceptance counters and wall
    time land in run.meta.
    """
    if n_draws < 0 or burn < 0 or thin < 1:
        raise ValueError("need n_draws >= 0, burn >= 0, thin >= 1")
    state = init_state(target, init, seed)
    start = time.perf_counter()
    for _ in range(burn):
        state = kernel(state)
    draws = np.empty((n_draws, state.position.size))
    for i in range(n_draws):
        for _ in range(thin):
            state = kernel(state)
        draws[i] = state.position
    elapsed = time.perf_counter() - start
    rates = {k: v[1] / v[0] for k, v in state.stats.items()
             if isinstance(v, tuple)}
    meta = {"seed": seed, "burn": burn, "thin": thin, "n_draws": n_draws,
            "acceptance_rates": rates, "wall_time_s": elapsed,
            "stats": {k: v for k, v in state.stats.items()
                      if not isinstance(v, (tuple, list))}}
    return SampleRun(draws=draws, meta=meta)


def warmup_rwm_scale(target: TargetDensity, init, n_warmup: int, seed,
                     scale0: float = 1.0, target_rate: float = 0.234,
                     proposal: str = "gauss", window: int = 50) -> float:
    """Adapt an RWM proposal scale during warmup, then freeze it."""
    state = init_state(target, init, seed)
    log_scale = float(np.log(scale0))
    acc_window = []
    t = 0
    for i in range(n_warmup):
        before = state.stats.get("rwm", (0, 0))
        state = rwm_step(state, target, np.exp(log_scale), proposal)
        after = state.stats["rwm"]
        acc_window.append(after[1] - before[1])
        if len(acc_window) == window:
            t += 1
            log_scale = adapt_scale(log_scale, float(np.mean(acc_window)),
                                    target_rate, t)
            acc_window = []
    return float(np.exp(log_scale))


def warmup_nuts_step_size(target: TargetDensity, init, n_warmup: int, seed,
                          eps0: float = 0.1, target_accept: float = 0.80,
                          max_depth: int = 10) -> float:
    """Dual-averaging warmup of the NUTS step size; returns the frozen value."""
    state = init_state(target, init, seed)
    da = DualAveraging(eps0, target=target_accept)
    eps = eps0
    for _ in range(n_warmup):
        state.stats.pop("nuts_accept_stat", None)
        state = nuts_step(state, target, eps, max_depth)
        stat = state.stats.get("nuts_accept_stat", [0.0])[-1]
        eps = da.update(stat)
    return da.finalize()


# ---------------------------------------------------------------------------
# Vectorized multi-chain drivers (finite-state and RWM ensembles)
# ---------------------------------------------------------------------------

def simulate_matrix_chains(P: np.ndarray, init: int, n_steps: int,
                           n_chains: int, seed: int) -> np.ndarray:
    """Simulate n_chains independent finite-state chains of a transition matrix.

    Returns the (n_steps, n_chains) state-index paths; vectorized across
    chains for speed.
    """
    P = np.asarray(P, dtype=float)
    cum = np.cumsum(P, axis=1)
    rng = np.random.default_rng(seed)
    states = np.full(n_chains, init, dtype=np.int64)
    path = np.empty((n_steps, n_chains), dtype=np.int64)
    for t in range(n_steps):
        u = rng.random(n_chains)
        states = (cum[states] < u[:, None]).sum(axis=1)
        path[t] = states
    return path


def run_rwm_ensemble(target: TargetDensity, init: np.ndarray, n_steps: int,
                     burn: int, scale, seed: int,
                     structure: Optional[eqv.EquivalenceStructure] = None,
                     adapt: bool = True, target_rate: float = 0.234,
                     keep_every: int = 1, teleport_law: str = "target") -> np.ndarray:
    """Vectorized Gaussian RWM over many chains; optional teleport-first step.

    When a (two-member or fiber) structure is given, each iteration applies an
    exact teleport before the local move (PT ordering).  Proposal scales adapt
    per-chain during burn, then freeze.  Returns (n_kept, n_chains, dim).

    teleport_law="uniform" skips the per-member density evaluation and flips a
    fair coin between the two class members.  Only valid when the target is
    exactly invariant under the partner map (flat prior, symmetric support),
    in which case the conditional class law is uniform by construction.
    """
    rng = np.random.default_rng(seed)
    x = np.array(init, dtype=float)
    n_chains, dim = x.shape
    logp = np.asarray(target.log_density(x), dtype=float)
    if np.any(~np.isfinite(logp)):
        raise ValueError("ensemble initial positions must have positive density")
    log_scale = np.full(n_chains, np.log(float(np.asarray(scale))))
    kept = []
    window = 50
    acc_count = np.zeros(n_chains)
    t_adapt = 0
    for step in range(burn + n_steps):
        if structure is not None:
            if teleport_law == "uniform":
                partners = eqv.partner_batch(x, structure)
                take = rng.random(n_chains) < 0.5
                x = np.where(take[:, None], partners, x)
            else:
                x = eqv.teleport_exact_batch(x, target, structure, rng)
                logp = np.asarray(target.log_density(x), dtype=float)
        prop = x + np.exp(log_scale)[:, None] * rng.standard_normal((n_chains, dim))
        logp_prop = np.asarray(target.log_density(prop), dtype=float)
        accept = np.log(rng.random(n_chains)) < logp_prop - logp
        x = np.where(accept[:, None], prop, x)
        logp = np.where(accept, logp_prop, logp)
        if adapt and step < burn:
            acc_count += accept
            if (step + 1) % window == 0:
                t_adapt += 1
                gamma_t = t_adapt ** (-0.6)
                log_scale += gamma_t * (acc_count / window - target_rate)
                acc_count[:] = 0.0
        if step >= burn and (step - burn) % keep_every == 0:
            kept.append(x.copy())
    return np.array(kept)
