"""Target distributions: unnormalized log-densities with explicit support.

Every target used by the samplers lives here, together with grid-integration
oracles used as ground truth in diagnostics and tests.  All log-density
callables are vectorized: they accept arrays of shape (..., dim) and return
shape (...,).  Evaluation is deterministic and targets are immutable, so they
can be shared freely across chains.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

MAX_GRID_CELLS = 4_000_000


# ---------------------------------------------------------------------------
# Support descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Unbounded:
    dim: int

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1], dtype=bool)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; membership is closed on both ends."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, float)))
        object.__setattr__(self, "upper", np.atleast_1d(np.asarray(self.upper, float)))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds must have matching shapes")
        if np.any(self.lower >= self.upper):
            raise ValueError("box lower bounds must be strictly below upper bounds")

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)


@dataclass(frozen=True)
class Circle:
    """One-dimensional circle of circumference 4L, coords wrapped to [-2L, 2L)."""

    L: float

    @property
    def dim(self) -> int:
        return 1

    def wrap(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        period = 4.0 * self.L
        return np.mod(x + 2.0 * self.L, period) - 2.0 * self.L

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1], dtype=bool)


Support = Unbounded | Box | Circle


# ---------------------------------------------------------------------------
# Core target types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized log-density over R^dim with a support descriptor.

    ``log_density`` is the full (posterior) log-density; ``log_likelihood`` and
    ``log_prior``, when present, expose the factorization needed by tempering
    and by teleport moves whose member weights reduce to the prior.
    """

    dim: int
    support: Support
    log_density: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    log_likelihood: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_prior: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad_log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.log_density(x)


@dataclass(frozen=True)
class FiniteTarget:
    """Finite-state target: labeled states with an explicit probability vector."""

    states: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != probs.size:
            raise ValueError("states and probs must have the same length")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {probs.sum()!r}")

    @property
    def n(self) -> int:
        return len(self.states)


def make_four_state(p00: float, p01: float, p10: float, p11: float) -> FiniteTarget:
    """Four-state binary-pair target with states ordered (0,0),(0,1),(1,0),(1,1)."""
    return FiniteTarget(
        states=((0, 0), (0, 1), (1, 0), (1, 1)),
        probs=np.array([p00, p01, p10, p11], dtype=float),
    )


# ---------------------------------------------------------------------------
# Continuous target factories
# ---------------------------------------------------------------------------

def make_gaussian(dim: int = 1, mean: float = 0.0, sd: float = 1.0,
                  box: Optional[Box] = None) -> TargetDensity:
    """Isotropic Gaussian, optionally truncated to a box (used as a test target)."""
    mean_v = np.full(dim, float(mean))
    inv_var = 1.0 / float(sd) ** 2
    support: Support = box if box is not None else Unbounded(dim)

    def logp(x):
        x = np.asarray(x, dtype=float)
        out = -0.5 * inv_var * np.sum((x - mean_v) ** 2, axis=-1)
        if box is not None:
            out = np.where(box.contains(x), out, -np.inf)
        return out

    def grad(x):
        return -inv_var * (np.asarray(x, dtype=float) - mean_v)

    return TargetDensity(dim=dim, support=support, log_density=logp,
                         grad_log_density=grad, name=f"gaussian{dim}d")


def make_circle_bimodal(L: float, nu: float) -> TargetDensity:
    """Bimodal target on a circle of circumference 4L.

    Log-density is -nu*|t| on [-L, L] and -nu*(2L - |t|) on the outer arcs,
    evaluated after wrapping coordinates into [-2L, 2L).  Modes sit at 0 and
    at the antipode +-2L (a single point on the circle).
    """
    if L <= 0 or nu <= 0:
        raise ValueError("L and nu must be positive")
    support = Circle(float(L))

    def logp(x):
        t = np.abs(support.wrap(x)[..., 0])
        return np.where(t <= L, -nu * t, -nu * (2.0 * L - t))

    return TargetDensity(dim=1, support=support, log_density=logp,
                         name=f"circle_bimodal(L={L},nu={nu})")


def make_cylinder_flat(D: float, p_x: Optional[TargetDensity] = None) -> TargetDensity:
    """Product target: identified coordinate times a flat coordinate on [-D, D].

    Default p_x is a standard Gaussian truncated to [-4, 4].
    """
    if D <= 0:
        raise ValueError("D must be positive")
    if p_x is None:
        p_x = make_gaussian(1, box=Box([-4.0], [4.0]))
    if not isinstance(p_x.support, Box):
        raise ValueError("p_x must have bounded box support")
    lower = np.concatenate([p_x.support.lower, [-D]])
    upper = np.concatenate([p_x.support.upper, [D]])
    support = Box(lower, upper)

    def logp(x):
        x = np.asarray(x, dtype=float)
        out = p_x.log_density(x[..., :1])
        return np.where(np.abs(x[..., 1]) <= D, out, -np.inf)

    return TargetDensity(dim=2, support=support, log_density=logp,
                         name=f"cylinder_flat(D={D})")


# Parameter box for the two-component mixture sampler: means in [-50, 50],
# scales in (0, 50], weight in [0.01, 0.99].  The source experiments do not
# state bounds; these are generous enough to be non-binding.
MIXTURE_BOX = Box(
    lower=np.array([-50.0, -50.0, 0.0, 0.0, 0.01]),
    upper=np.array([50.0, 50.0, 50.0, 50.0, 0.99]),
)


def make_mixture_gaussian_loglik(data: np.ndarray,
                                 precision: str = "double") -> TargetDensity:
    """Two-component Gaussian mixture log-likelihood in (mu1, mu2, s1, s2, p).

    Flat prior inside MIXTURE_BOX; -inf outside (including s <= 0).
    Invariant under the label switch (mu1,mu2,s1,s2,p) -> (mu2,mu1,s2,s1,1-p).
    precision="single" evaluates the data sweep in float32 (absolute
    log-likelihood error around 1e-4, immaterial for MH accept decisions) at
    about half the cost; the symmetry above still holds exactly.
    """
    if precision not in ("double", "single"):
        raise ValueError("precision must be 'double' or 'single'")
    work_dtype = np.float64 if precision == "double" else np.float32
    data = np.asarray(data, dtype=work_dtype).ravel()
    if data.size == 0:
        raise ValueError("data must be nonempty")
    box = MIXTURE_BOX

    def logp(x):
        x = np.asarray(x, dtype=float)
        ok_box = box.contains(x)
        x = x.astype(work_dtype)
        mu1, mu2 = x[..., 0], x[..., 1]
        s1, s2, p = x[..., 2], x[..., 3], x[..., 4]
        ok = ok_box & (s1 > 0) & (s2 > 0)
        s1s = np.where(s1 > 0, s1, 1.0)
        s2s = np.where(s2 > 0, s2, 1.0)
        # double complement keeps the weight pair exactly swap-symmetric:
        # the weights of (..., 1-p) are the reversed weights of (..., p)
        tiny = np.finfo(work_dtype).tiny
        q = np.clip(work_dtype(1.0) - p, tiny, 1.0)
        w1 = np.clip(work_dtype(1.0) - q, tiny, 1.0)
        # component log-densities, broadcasting data along a trailing axis
        z1 = (data - mu1[..., None]) / s1s[..., None]
        z2 = (data - mu2[..., None]) / s2s[..., None]
        half = work_dtype(0.5)
        la = (np.log(w1) - np.log(s1s))[..., None] - half * z1 * z1
        lb = (np.log(q) - np.log(s2s))[..., None] - half * z2 * z2
        ll = np.logaddexp(la, lb).sum(axis=-1, dtype=np.float64)
        ll = ll - 0.5 * data.size * LOG_2PI
        return np.where(ok, ll, -np.inf)

    return TargetDensity(dim=5, support=box, log_density=logp,
                         log_likelihood=logp, name="mixture_gaussian")


def make_conditional_gaussian_loglik(data: np.ndarray, k: int) -> TargetDensity:
    """Gaussian likelihood depending on mu only through its coordinate sum.

    X_t ~ N(sum(mu), 1); flat prior on [-10, 10]^k.  The observationally
    equivalent set of mu is the affine slice {sum = const} of the box.
    """
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("data must be nonempty")
    if k < 2:
        raise ValueError("k must be at least 2")
    T = data.size
    sx = float(data.sum())
    sxx = float(np.sum(data ** 2))
    box = Box(np.full(k, -10.0), np.full(k, 10.0))

    def logp(x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x, axis=-1)
        ll = -0.5 * (sxx - 2.0 * s * sx + T * s ** 2) - 0.5 * T * LOG_2PI
        return np.where(box.contains(x), ll, -np.inf)

    return TargetDensity(dim=k, support=box, log_density=logp,
                         log_likelihood=logp, name=f"conditional_gaussian(k={k})")


# ---------------------------------------------------------------------------
# MA(1) posterior
# ---------------------------------------------------------------------------

# Default box for the flat-prior MA(1) posterior in (theta, log sigma); chosen
# to cover both observationally equivalent modes of the benchmark data set.
MA1_FLAT_BOX = Box(np.array([-0.5, -1.5]), np.array([3.5, 1.0]))


def _ma1_sine_stats(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sine-basis summary of a series for the MA(1) likelihood.

    The T x T tridiagonal Toeplitz covariance sigma^2 [(1+theta^2) I + theta S]
    (S the 0/1 super/subdiagonal matrix) is diagonalized by the fixed discrete
    sine basis v_j(i) = sqrt(2/(T+1)) sin(i j pi / (T+1)) with S-eigenvalues
    2 cos(j pi / (T+1)).  Returns (cos_j, yhat_j^2) with yhat the basis
    coefficients of the data; both depend on the data only.
    """
    T = data.size
    j = np.arange(1, T + 1)
    cos_j = np.cos(j * np.pi / (T + 1))
    basis_angles = np.outer(np.arange(1, T + 1), j) * (np.pi / (T + 1))
    yhat = np.sqrt(2.0 / (T + 1)) * (np.sin(basis_angles).T @ data)
    return cos_j, yhat ** 2


def _ma1_eigs(theta, log_sigma, cos_j: np.ndarray) -> np.ndarray:
    """Covariance eigenvalues sigma^2 (1 + theta^2 + 2 theta cos_j), all > 0."""
    theta = np.asarray(theta, dtype=float)[..., None]
    sigma2 = np.exp(2.0 * np.asarray(log_sigma, dtype=float))[..., None]
    return sigma2 * (1.0 + theta ** 2 + 2.0 * theta * cos_j)


def ma1_loglik(data: np.ndarray, theta, log_sigma) -> np.ndarray:
    """Exact Gaussian MA(1) log-likelihood via the tridiagonal Toeplitz covariance.

    gamma0 = sigma^2 (1 + theta^2), gamma1 = sigma^2 theta; lags >= 2 vanish,
    so the covariance diagonalizes in the fixed discrete sine basis and each
    evaluation is O(T), vectorized over any batch shape of (theta, log_sigma).
    """
    data = np.asarray(data, dtype=float).ravel()
    T = data.size
    theta = np.asarray(theta, dtype=float)
    log_sigma = np.asarray(log_sigma, dtype=float)
    if T == 0:
        return np.zeros(np.broadcast(theta, log_sigma).shape)
    cos_j, yhat_sq = _ma1_sine_stats(data)
    lam = _ma1_eigs(theta, log_sigma, cos_j)
    out = -0.5 * (np.log(lam).sum(axis=-1) + (yhat_sq / lam).sum(axis=-1)
                  + T * LOG_2PI)
    if theta.ndim == 0 and log_sigma.ndim == 0:
        return np.asarray(out)
    return out


def make_ma1_log_posterior(data: np.ndarray, prior: str = "gaussian") -> TargetDensity:
    """MA(1) posterior in (theta, s = log sigma).

    prior="gaussian": theta ~ N(1, 0.5^2), log sigma ~ N(0, 0.25^2).
    prior="flat": uniform on MA1_FLAT_BOX.
    """
    data = np.asarray(data, dtype=float).ravel()
    if data.size and not np.all(np.isfinite(data)):
        raise ValueError("data must be finite")
    if prior not in ("gaussian", "flat"):
        raise ValueError(f"unknown prior {prior!r}")

    cos_j, yhat_sq = _ma1_sine_stats(data)
    T = data.size

    def loglik(x):
        x = np.asarray(x, dtype=float)
        lam = _ma1_eigs(x[..., 0], x[..., 1], cos_j)
        return -0.5 * (np.log(lam).sum(axis=-1) + (yhat_sq / lam).sum(axis=-1)
                       + T * LOG_2PI)

    def grad_loglik(x):
        # dL/dlam_j = -(1/lam_j - yhat_j^2/lam_j^2)/2, chain rule per param
        x = np.asarray(x, dtype=float)
        th = x[..., 0]
        lam = _ma1_eigs(th, x[..., 1], cos_j)
        sigma2 = np.exp(2.0 * x[..., 1])[..., None]
        dl = -0.5 * (1.0 / lam - yhat_sq / lam ** 2)
        d_theta = (dl * sigma2 * 2.0 * (th[..., None] + cos_j)).sum(axis=-1)
        d_s = (dl * 2.0 * lam).sum(axis=-1)
        return np.stack([d_theta, d_s], axis=-1)

    if prior == "gaussian":
        support: Support = Unbounded(2)

        def logprior(x):
            x = np.asarray(x, dtype=float)
            return (-0.5 * ((x[..., 0] - 1.0) / 0.5) ** 2
                    - 0.5 * (x[..., 1] / 0.25) ** 2)

        def grad(x):
            x = np.asarray(x, dtype=float)
            gp = np.stack([-(x[..., 0] - 1.0) / 0.25, -x[..., 1] / 0.0625],
                          axis=-1)
            return grad_loglik(x) + gp
    else:
        support = MA1_FLAT_BOX

        def logprior(x):
            x = np.asarray(x, dtype=float)
            return np.where(MA1_FLAT_BOX.contains(x), 0.0, -np.inf)

        grad = grad_loglik

    def logp(x):
        lp = logprior(x)
        out = np.where(np.isfinite(lp), lp + loglik(x), -np.inf)
        return out

    return TargetDensity(dim=2, support=support, log_density=logp,
                         log_likelihood=loglik, log_prior=logprior,
                         grad_log_density=grad, name=f"ma1({prior})")


def simulate_ma1(theta: float, sigma: float, T: int, seed: int) -> np.ndarray:
    """Simulate y_t = eps_t + theta * eps_{t-1}, eps ~ N(0, sigma^2)."""
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sigma, size=T + 1)
    return eps[1:] + theta * eps[:-1]


def load_series_csv(path) -> np.ndarray:
    """Load a single-column CSV, skipping a non-numeric header row if present."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        return np.empty(0)
    start = 0
    try:
        float(lines[0].split(",")[0])
    except ValueError:
        start = 1
    return np.array([float(ln.split(",")[0]) for ln in lines[start:]])


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------

@dataclass
class GridOracle:
    """Riemann-sum normalized posterior on a rectangular grid of cell centers."""

    axes: tuple  # of (lo, hi, count)
    log_post: np.ndarray  # shape = counts, unnormalized
    log_norm: float = field(init=False)

    def __post_init__(self):
        self.axes = tuple((float(a), float(b), int(n)) for a, b, n in self.axes)
        self.log_post = np.asarray(self.log_post, dtype=float)
        if self.log_post.shape != tuple(n for _, _, n in self.axes):
            raise ValueError("log_post shape does not match axes")
        finite = self.log_post[np.isfinite(self.log_post)]
        if finite.size == 0:
            raise ValueError("grid posterior has no finite cells")
        m = float(finite.max())
        total = np.exp(self.log_post - m).sum()
        self.log_norm = m + float(np.log(total)) + float(np.log(self.cell_volume))

    @property
    def centers(self) -> tuple:
        out = []
        for lo, hi, n in self.axes:
            w = (hi - lo) / n
            out.append(lo + w * (np.arange(n) + 0.5))
        return tuple(out)

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for lo, hi, n in self.axes:
            v *= (hi - lo) / n
        return v

    @property
    def cell_probs(self) -> np.ndarray:
        return np.exp(self.log_post - self.log_norm) * self.cell_volume

    def total_mass(self) -> float:
        return float(self.cell_probs.sum())

    def marginal(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (centers, cell masses) of the marginal along one axis."""
        mass = self.cell_probs
        keep = tuple(i for i in range(mass.ndim) if i != axis)
        return self.centers[axis], mass.sum(axis=keep)

    def marginal_density(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        centers, mass = self.marginal(axis)
        lo, hi, n = self.axes[axis]
        return centers, mass / ((hi - lo) / n)

    def mean(self) -> np.ndarray:
        mass = self.cell_probs
        out = []
        for ax in range(mass.ndim):
            c, m = self.marginal(ax)
            out.append(float(np.sum(c * m)))
        return np.array(out)

    def variance(self) -> np.ndarray:
        mu = self.mean()
        out = []
        for ax in range(len(self.axes)):
            c, m = self.marginal(ax)
            out.append(float(np.sum((c - mu[ax]) ** 2 * m)))
        return np.array(out)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw points: choose cells by mass, then jitter uniformly in-cell."""
        flat = self.cell_probs.ravel()
        flat = flat / flat.sum()
        idx = rng.choice(flat.size, size=n, p=flat)
        multi = np.unravel_index(idx, self.log_post.shape)
        cols = []
        for ax, (lo, hi, cnt) in enumerate(self.axes):
            w = (hi - lo) / cnt
            cols.append(lo + w * (multi[ax] + rng.random(n)))
        return np.stack(cols, axis=-1)

    # -- binary persistence: JSON header + little-endian float64 payload ----

    MAGIC = b"GRIDORCL"

    def save(self, path) -> None:
        header = json.dumps({"axes": list(self.axes),
                             "shape": list(self.log_post.shape)}).encode()
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(np.ascontiguousarray(self.log_post, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "GridOracle":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != cls.MAGIC:
                raise ValueError(f"{path}: not a grid oracle file")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen))
            data = np.frombuffer(fh.read(), dtype="<f8")
        shape = tuple(header["shape"])
        return cls(axes=tuple(tuple(a) for a in header["axes"]),
                   log_post=data.reshape(shape).astype(float))


def build_grid_oracle(target: TargetDensity, axes: Sequence[tuple],
                      max_cells: int = MAX_GRID_CELLS) -> GridOracle:
    """Evaluate a target on a rectangular grid and normalize by Riemann sum."""
    axes = tuple((float(a), float(b), int(n)) for a, b, n in axes)
    if len(axes) != target.dim:
        raise ValueError(f"need {target.dim} axes, got {len(axes)}")
    total = 1
    for lo, hi, n in axes:
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo and n > 0):
            raise ValueError(f"invalid axis ({lo}, {hi}, {n}): bounds must be finite")
        total *= n
    if total > max_cells:
        raise ValueError(f"grid has {total} cells, exceeding cap {max_cells}")
    centers = []
    for lo, hi, n in axes:
        w = (hi - lo) / n
        centers.append(lo + w * (np.arange(n) + 0.5))
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    logp = target.log_density(pts)
    return GridOracle(axes=axes, log_post=np.asarray(logp, dtype=float))
