"""Observational-equivalence structures and teleport moves.

An EquivalenceStructure describes, for a target family, the set K(theta) of
parameters sharing the current parameter's likelihood.  Teleport moves draw
from the target restricted to K(theta): exactly when the class is finite or
carries a flat fiber, and via a within-class multiple-try Metropolis step
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .targets import TargetDensity

MA1_SINGULARITY_EPS = 1e-6


@dataclass(frozen=True)
class EquivalenceStructure:
    kind: str  # finite_map | antipodal_circle | ma1_flip | affine_sum_fiber | flat_y_fiber
    params: dict = field(default_factory=dict)

    def is_finite(self) -> bool:
        return self.kind in ("finite_map", "antipodal_circle", "ma1_flip")


@dataclass(frozen=True)
class TeleportConfig:
    mode: str = "exact"  # exact | mtm
    mtm_tries: int = 10
    # proposal_on_class: (theta, rng, M) -> candidates (M, dim); paired logpdf
    proposal_sampler: Optional[Callable] = None
    proposal_logpdf: Optional[Callable] = None

    def __post_init__(self):
        if self.mtm_tries < 1:
            raise ValueError("mtm_tries must be >= 1")
        if self.mode not in ("exact", "mtm"):
            raise ValueError(f"unknown teleport mode {self.mode!r}")


# ---------------------------------------------------------------------------
# Structure factories
# ---------------------------------------------------------------------------

def finite_map_structure(members_fn: Callable[[np.ndarray], list],
                         partner_batch_fn: Optional[Callable] = None
                         ) -> EquivalenceStructure:
    """Generic finite class given by an explicit member enumeration.

    members_fn(theta) must return a list of points containing theta itself and
    must be idempotent: enumerating from any member yields the same class.
    partner_batch_fn, if given, maps an (n, dim) batch to the batch of second
    members in one vectorized call.
    """
    params = {"members_fn": members_fn}
    if partner_batch_fn is not None:
        params["partner_batch_fn"] = partner_batch_fn
    return EquivalenceStructure("finite_map", params)


def identity_structure() -> EquivalenceStructure:
    """Degenerate structure whose classes are singletons (teleport is a no-op)."""
    return finite_map_structure(lambda theta: [np.asarray(theta, float)])


def sign_flip_structure() -> EquivalenceStructure:
    """Classes {theta, -theta}; valid for any symmetric target."""
    def members(theta):
        theta = np.asarray(theta, float)
        return [theta, -theta]
    return finite_map_structure(members, partner_batch_fn=lambda t: -t)


def mixture_label_switch_structure() -> EquivalenceStructure:
    """Two-component mixture label switch in (mu1, mu2, s1, s2, p)."""
    def members(theta):
        theta = np.asarray(theta, float)
        swapped = np.array([theta[1], theta[0], theta[3], theta[2], 1.0 - theta[4]])
        return [theta, swapped]

    def partner_batch(thetas):
        out = thetas[:, [1, 0, 3, 2, 4]].copy()
        out[:, 4] = 1.0 - thetas[:, 4]
        return out

    return finite_map_structure(members, partner_batch_fn=partner_batch)


def antipodal_circle_structure(L: float) -> EquivalenceStructure:
    return EquivalenceStructure("antipodal_circle", {"L": float(L)})


def ma1_flip_structure() -> EquivalenceStructure:
    return EquivalenceStructure("ma1_flip", {})


def affine_sum_fiber_structure(k: int, lower: float = -10.0, upper: float = 10.0,
                               n_inner: int = 64) -> EquivalenceStructure:
    """Fiber {mu : sum(mu) = const} intersected with the box [lower, upper]^k."""
    return EquivalenceStructure("affine_sum_fiber",
                                {"k": int(k), "lower": float(lower),
                                 "upper": float(upper), "n_inner": int(n_inner)})


def flat_y_fiber_structure(D: float, n_x: int = 1) -> EquivalenceStructure:
    """Fiber along the flat trailing coordinates: {(x, y') : |y'| <= D}."""
    return EquivalenceStructure("flat_y_fiber", {"D": float(D), "n_x": int(n_x)})


def circle_antipode(theta, L: float):
    """Antipodal shift on the circle [-2L, 2L): theta -> theta -/+ 2L."""
    theta = np.asarray(theta, dtype=float)
    period = 4.0 * L
    t = np.mod(theta + 2.0 * L, period) - 2.0 * L
    return np.where(t < 0, t + 2.0 * L, t - 2.0 * L)


def ma1_flip(point):
    """(theta, s) -> (1/theta, s + log|theta|); identity near theta = 0."""
    point = np.asarray(point, dtype=float)
    th = point[0]
    if abs(th) < MA1_SINGULARITY_EPS:
        return point.copy()
    return np.array([1.0 / th, point[1] + np.log(abs(th))])


# ---------------------------------------------------------------------------
# Class enumeration / fiber samplers
# ---------------------------------------------------------------------------

class FiberSampler:
    """Sampler over a continuum class; draws are uniform on the fiber."""

    def __init__(self, structure: EquivalenceStructure, theta: np.ndarray):
        self.structure = structure
        self.theta = np.asarray(theta, dtype=float)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        p = self.structure.params
        base = np.broadcast_to(self.theta, (n, self.theta.size)).copy()
        if self.structure.kind == "flat_y_fiber":
            n_x = p["n_x"]
            base[:, n_x:] = rng.uniform(-p["D"], p["D"], size=(n, base.shape[1] - n_x))
            return base
        if self.structure.kind == "affine_sum_fiber":
            return hit_and_run_affine_sum(base, p["lower"], p["upper"],
                                          p["n_inner"], rng)
        raise ValueError(f"no fiber sampler for kind {self.structure.kind!r}")

    def contains(self, point: np.ndarray, atol: float = 1e-10) -> bool:
        p = self.structure.params
        point = np.asarray(point, dtype=float)
        if self.structure.kind == "flat_y_fiber":
            n_x = p["n_x"]
            return (np.allclose(point[:n_x], self.theta[:n_x], atol=atol)
                    and bool(np.all(np.abs(point[n_x:]) <= p["D"] + atol)))
        if self.structure.kind == "affine_sum_fiber":
            in_box = bool(np.all((point >= p["lower"] - atol)
                                 & (point <= p["upper"] + atol)))
            return in_box and abs(point.sum() - self.theta.sum()) <= atol
        raise ValueError(f"no fiber for kind {self.structure.kind!r}")


def hit_and_run_affine_sum(points: np.ndarray, lower: float, upper: float,
                           n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Hit-and-run over {x : sum(x) = const} intersected with a box, batched.

    Directions are Gaussian projected onto the sum-zero hyperplane; each step
    samples uniformly on the chord cut by the box.  Converges to the uniform
    law on each point's slice.
    """
    x = np.array(points, dtype=float)
    n, k = x.shape
    for _ in range(n_steps):
        d = rng.standard_normal((n, k))
        d -= d.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        d /= norms
        # chord extents: lower <= x + t*d <= upper coordinatewise
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lower - x) / d
            t_hi = (upper - x) / d
        lo_cand = np.where(d > 0, t_lo, np.where(d < 0, t_hi, -np.inf))
        hi_cand = np.where(d > 0, t_hi, np.where(d < 0, t_lo, np.inf))
        t_min = lo_cand.max(axis=1)
        t_max = hi_cand.min(axis=1)
        t = t_min + (t_max - t_min) * rng.random(n)
        x = np.clip(x + t[:, None] * d, lower, upper)
    return x


def class_members(theta, structure: EquivalenceStructure, target: Optional[TargetDensity] = None):
    """Enumerate K(theta) for finite kinds; return a FiberSampler otherwise."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if target is not None and not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    kind = structure.kind
    if kind == "finite_map":
        return [np.atleast_1d(np.asarray(m, float))
                for m in structure.params["members_fn"](theta)]
    if kind == "antipodal_circle":
        return [theta, np.atleast_1d(circle_antipode(theta, structure.params["L"]))]
    if kind == "ma1_flip":
        if abs(theta[0]) < MA1_SINGULARITY_EPS:
            return [theta]
        return [theta, ma1_flip(theta)]
    if kind in ("affine_sum_fiber", "flat_y_fiber"):
        return FiberSampler(structure, theta)
    raise ValueError(f"unknown equivalence kind {kind!r}")


# ---------------------------------------------------------------------------
# Teleport moves
# ---------------------------------------------------------------------------

def teleport_exact(theta, target: TargetDensity, structure: EquivalenceStructure,
                   rng: np.random.Generator) -> np.ndarray:
    """One exact draw from the target restricted to K(theta).

    Finite classes: a member is selected with probability proportional to its
    target density (the likelihood contribution cancels within a class, so for
    posterior targets this reduces to the prior weights).  Flat fibers: a
    uniform draw on the fiber intersected with the box.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    members = class_members(theta, structure)
    if isinstance(members, FiberSampler):
        return members.sample(rng, 1)[0]
    logw = np.array([float(target.log_density(m)) for m in members])
    if not np.any(np.isfinite(logw)):
        raise ValueError("all equivalence-class members have zero density")
    logw = logw - logw[np.isfinite(logw)].max()
    w = np.where(np.isfinite(logw), np.exp(logw), 0.0)
    w /= w.sum()
    idx = rng.choice(len(members), p=w)
    return members[idx]


def teleport_exact_batch(thetas: np.ndarray, target: TargetDensity,
                         structure: EquivalenceStructure,
                         rng: np.random.Generator) -> np.ndarray:
    """Vectorized teleport for a batch of states (rows of thetas)."""
    thetas = np.asarray(thetas, dtype=float)
    if structure.kind in ("affine_sum_fiber", "flat_y_fiber"):
        sampler = FiberSampler(structure, thetas[0])
        if structure.kind == "flat_y_fiber":
            p = structure.params
            out = thetas.copy()
            n_x = p["n_x"]
            out[:, n_x:] = rng.uniform(-p["D"], p["D"],
                                       size=(len(thetas), thetas.shape[1] - n_x))
            return out
        p = structure.params
        return hit_and_run_affine_sum(thetas, p["lower"], p["upper"],
                                      p["n_inner"], rng)
    # finite two-member kinds: build the partner batch and pick by density
    partners = partner_batch(thetas, structure)
    lw0 = target.log_density(thetas)
    lw1 = target.log_density(partners)
    hi = np.maximum(lw0, lw1)
    p1 = np.where(np.isfinite(lw1),
                  np.exp(lw1 - hi) / (np.exp(lw0 - hi) + np.exp(lw1 - hi)), 0.0)
    take = rng.random(len(thetas)) < p1
    return np.where(take[:, None], partners, thetas)


def partner_batch(thetas: np.ndarray, structure: EquivalenceStructure) -> np.ndarray:
    """Second class member for every row of a batch, vectorized where possible."""
    thetas = np.asarray(thetas, dtype=float)
    if structure.kind == "antipodal_circle":
        return np.asarray(circle_antipode(thetas, structure.params["L"]))
    if structure.kind == "ma1_flip":
        th = thetas[:, 0]
        safe = np.abs(th) >= MA1_SINGULARITY_EPS
        th_safe = np.where(safe, th, 1.0)
        out = np.column_stack([np.where(safe, 1.0 / th_safe, th),
                               thetas[:, 1] + np.where(safe, np.log(np.abs(th_safe)), 0.0)])
        return out
    fn = structure.params.get("partner_batch_fn")
    if fn is not None:
        return np.asarray(fn(thetas), dtype=float)
    return np.stack([_partner(t, structure) for t in thetas])


def _partner(theta, structure: EquivalenceStructure) -> np.ndarray:
    members = class_members(theta, structure)
    if len(members) == 1:
        return np.asarray(members[0], float)
    if len(members) != 2:
        raise ValueError("batched teleport supports classes of size <= 2")
    return np.asarray(members[1], float)


def teleport_mtm(theta, target: TargetDensity, structure: EquivalenceStructure,
                 config: TeleportConfig, rng: np.random.Generator) -> np.ndarray:
    """Within-class multiple-try Metropolis step targeting pi restricted to K(theta).

    Draw M forward candidates from r(.|theta) on the class, weight by pi/r,
    select one, draw M reverse candidates from r(.|selected) with the first
    forced to theta, and accept with min{1, sum(forward w) / sum(reverse w)}.
    """
    if config.mode != "mtm":
        raise ValueError("teleport_mtm requires mode='mtm'")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    M = config.mtm_tries
    sampler, logpdf = _class_proposal(theta, structure, config)

    fwd = sampler(theta, rng, M)
    logw = np.array([float(target.log_density(u)) - logpdf(u, theta) for u in fwd])
    if not np.any(np.isfinite(logw)):
        return theta.copy()
    m = logw[np.isfinite(logw)].max()
    w = np.where(np.isfinite(logw), np.exp(logw - m), 0.0)
    pick = rng.choice(M, p=w / w.sum())
    u_star = fwd[pick]

    rev = sampler(u_star, rng, M)
    rev[0] = theta
    logw_rev = np.array([float(target.log_density(u)) - logpdf(u, u_star) for u in rev])
    w_rev = np.where(np.isfinite(logw_rev), np.exp(logw_rev - m), 0.0)
    ratio = w.sum() / w_rev.sum() if w_rev.sum() > 0 else np.inf
    if rng.random() < min(1.0, ratio):
        return np.asarray(u_star, float)
    return theta.copy()


def _class_proposal(theta, structure, config):
    """Resolve the candidate proposal r(.|theta) on the class."""
    if config.proposal_sampler is not None:
        if config.proposal_logpdf is None:
            raise ValueError("proposal_sampler requires proposal_logpdf")
        return config.proposal_sampler, config.proposal_logpdf
    members = class_members(theta, structure)
    if isinstance(members, FiberSampler):
        def sampler(point, rng, M):
            return FiberSampler(structure, point).sample(rng, M)

        def logpdf(u, point):
            return 0.0  # uniform on the fiber; constant cancels in the ratio
        return sampler, logpdf

    def sampler(point, rng, M):
        mem = class_members(point, structure)
        idx = rng.integers(len(mem), size=M)
        return np.stack([mem[i] for i in idx])

    def logpdf(u, point):
        mem = class_members(point, structure)
        return -np.log(len(mem))
    return sampler, logpdf
