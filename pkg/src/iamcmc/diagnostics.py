"""Convergence and sample-quality measurement.

Histogram total-variation and Kolmogorov-Smirnov distance against grid
oracles, autocorrelation-based effective sample size, Gaussian KDE, mode
occupancy, and a four-row summary table of posterior draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .targets import GridOracle, TargetDensity


@dataclass
class DiagnosticsReport:
    tv_to_oracle: dict = field(default_factory=dict)
    ks_to_oracle: dict = field(default_factory=dict)
    ess: dict = field(default_factory=dict)
    mode_fractions: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        for d in (self.tv_to_oracle, self.ks_to_oracle):
            for k, v in d.items():
                if not 0.0 <= v <= 1.0 + 1e-12:
                    raise ValueError(f"distance {k}={v} outside [0, 1]")
        if self.mode_fractions and sum(self.mode_fractions.values()) > 1.0 + 1e-9:
            raise ValueError("mode fractions exceed 1")

    def to_json(self, path) -> None:
        self.validate()
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, default=float)


# ---------------------------------------------------------------------------
# Distances to a grid oracle
# ---------------------------------------------------------------------------

def tv_distance_hist(samples: np.ndarray, oracle: GridOracle, axis: int = 0,
                     bins: int = 200) -> float:
    """Half L1 distance between a binned marginal and the oracle marginal.

    Bins span the oracle axis; sample mass falling outside the axis counts
    fully toward the distance.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[:, axis]
    if samples.size == 0:
        raise ValueError("empty sample")
    lo, hi, _ = oracle.axes[axis]
    edges = np.linspace(lo, hi, bins + 1)
    inside = (samples >= lo) & (samples <= hi)
    p_hat, _ = np.histogram(samples[inside], bins=edges)
    p_hat = p_hat / samples.size
    outside_mass = 1.0 - p_hat.sum()

    centers, marg = oracle.marginal(axis)
    cum = np.concatenate([[0.0], np.cumsum(marg)])
    cell_edges = np.concatenate([[lo], 0.5 * (centers[1:] + centers[:-1]), [hi]])
    # oracle mass per histogram bin by interpolating the marginal CDF
    cdf_at = np.interp(edges, cell_edges, np.concatenate([[0.0], cum[1:]]))
    p_orc = np.diff(cdf_at)
    p_orc = p_orc / p_orc.sum()
    return float(0.5 * (np.abs(p_hat - p_orc).sum() + outside_mass))


def ks_distance(samples: np.ndarray, oracle: GridOracle, axis: int = 0) -> float:
    """Sup distance between the empirical CDF and the oracle marginal CDF."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[:, axis]
    if samples.size == 0:
        raise ValueError("empty sample")
    lo, hi, _ = oracle.axes[axis]
    centers, marg = oracle.marginal(axis)
    cum = np.cumsum(marg)
    xs = np.sort(samples)
    ecdf = np.arange(1, xs.size + 1) / xs.size
    cell_edges = np.concatenate([[lo], 0.5 * (centers[1:] + centers[:-1]), [hi]])
    oracle_cdf = np.interp(xs, cell_edges, np.concatenate([[0.0], cum]))
    oracle_cdf = np.clip(oracle_cdf, 0.0, 1.0)
    d = np.maximum(np.abs(ecdf - oracle_cdf),
                   np.abs(np.concatenate([[0.0], ecdf[:-1]]) - oracle_cdf))
    return float(np.max(d))


# ---------------------------------------------------------------------------
# Effective sample size
# ---------------------------------------------------------------------------

def ess(series: np.ndarray) -> tuple[float, bool]:
    """ESS = N / (1 + 2 sum rho_k), initial-positive-sequence truncation.

    Pairs successive autocorrelations and stops at the first negative pair
    sum.  A constant series has no information; returns (1, True) with the
    flag marking degeneracy.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError("series too short for an ESS estimate")
    var = x.var()
    if var <= 0.0:
        return 1.0, True
    xc = x - x.mean()
    # FFT autocovariance, biased normalization
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / n
    rho = acov / acov[0]
    tau = 1.0
    for k in range(1, n - 1, 2):
        pair = rho[k] + rho[k + 1] if k + 1 < n else rho[k]
        if pair < 0.0:
            break
        tau += 2.0 * pair
    return float(np.clip(n / tau, 1.0, float(n) * 1.5)), False


# ---------------------------------------------------------------------------
# KDE, mode occupancy, summary
# ---------------------------------------------------------------------------

def kde(samples: np.ndarray, grid: np.ndarray, bandwidth: float | None = None
        ) -> np.ndarray:
    """Gaussian kernel density estimate on grid, Silverman bandwidth default."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples for a KDE")
    grid = np.asarray(grid, dtype=float)
    if bandwidth is None:
        sd = x.std()
        iqr = np.subtract(*np.percentile(x, [75, 25]))
        spread = min(sd, iqr / 1.349) if iqr > 0 else sd
        if spread <= 0:
            raise ValueError("degenerate sample needs an explicit bandwidth")
        bandwidth = 0.9 * spread * x.size ** (-0.2)
    z = (grid[:, None] - x[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * bandwidth * np.sqrt(2.0 * np.pi)
    return dens


def mode_fraction(samples: np.ndarray, mode_regions: dict) -> dict:
    """Fraction of draws inside each region (predicate over one draw batch).

    Regions must be disjoint: a draw matching two predicates is an error.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    hits = {}
    total = np.zeros(samples.shape[0], dtype=int)
    for label, pred in mode_regions.items():
        mask = np.asarray(pred(samples), dtype=bool)
        hits[label] = mask
        total += mask
    if np.any(total > 1):
        raise ValueError("mode regions overlap")
    return {label: float(mask.mean()) for label, mask in hits.items()}


def summary_table(samples: np.ndarray, target: TargetDensity) -> dict:
    """Four scalar summaries of a posterior sample.

    Log-density at the sample mean, average log-density over draws, the sum
    of per-parameter standard deviations, and the highest log-density seen.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("empty sample")
    logp = np.asarray(target.log_density(samples), dtype=float)
    finite = logp[np.isfinite(logp)]
    return {
        "logpost_at_mean": float(target.log_density(samples.mean(axis=0))),
        "avg_logpost": float(finite.mean()) if finite.size else float("-inf"),
        "sum_per_param_sd": float(samples.std(axis=0, ddof=1).sum())
        if samples.shape[0] > 1 else 0.0,
        "highest_logpost": float(finite.max()) if finite.size else float("-inf"),
    }


def occupied_bin_fraction(samples: np.ndarray, lo: float, hi: float,
                          bins: int) -> float:
    """Share of equal-width bins over [lo, hi] containing at least one draw."""
    counts, _ = np.histogram(np.asarray(samples, dtype=float).ravel(),
                             bins=bins, range=(lo, hi))
    return float((counts > 0).mean())


def overlay_plot(samples: np.ndarray, oracle: GridOracle, axis: int,
                 path, label: str = "sampler") -> None:
    """Oracle marginal density in gray with the sampler KDE on top."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    samples = np.asarray(samples, dtype=float)
    col = samples[:, axis] if samples.ndim == 2 else samples
    centers, dens = oracle.marginal_density(axis)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(centers, dens, color="0.7", lw=2, label="grid oracle")
    ax.plot(centers, kde(col, centers), lw=1.5, label=label)
    ax.set_xlabel(f"parameter {axis}")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
