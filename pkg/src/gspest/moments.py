"""Training sets and sample moments for estimator construction.

Training data are pairs of prior draws and their noiseless forward values;
measurement noise never enters the samples and is instead added analytically
to the second moments (its covariance is known). Moments are accumulated in
one blockwise pass, centered on the first sample to limit cancellation; the
result must match the naive two-pass formulas to high precision.

The frequency-domain diagonals are accumulated elementwise (Hadamard
products of centered GFT coefficients), not extracted from the full
covariances; agreement of the two routes is an identity that the tests
check, not something this module assumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMomentsError
from .graphs import SpectralGraph
from .models import MeasurementModel, NoiseModel

_BLOCK = 65536


@dataclass(frozen=True)
class TrainingSet:
    """Prior draws ``x`` with noiseless forward values ``g`` (rows aligned).

    Regenerable bit-exactly from (model, seed, count); carries the model's
    known prior mean, which the estimators use as their base point (second
    moments are sample-mean centered and never see it).
    """

    sg: SpectralGraph
    x: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    x_mean: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        n = self.sg.n_vertices
        if x.ndim != 2 or x.shape != g.shape or x.shape[1] != n:
            raise ValueError("x and g must be aligned (count, n_vertices) arrays")
        if x.shape[0] < 2:
            raise ValueError("need at least two samples")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "x_mean", np.asarray(self.x_mean, dtype=float))

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def write_csv(self, x_path, g_path) -> None:
        """Write the pair as plain numeric CSVs (%.17g, count rows)."""
        np.savetxt(x_path, self.x, fmt="%.17g", delimiter=",")
        np.savetxt(g_path, self.g, fmt="%.17g", delimiter=",")


def read_training_csv(
    sg: SpectralGraph, x_path, g_path, x_mean: np.ndarray | None = None
) -> TrainingSet:
    """Read back a CSV pair written by :meth:`TrainingSet.write_csv`."""
    x = np.loadtxt(x_path, delimiter=",", ndmin=2)
    g = np.loadtxt(g_path, delimiter=",", ndmin=2)
    mean = np.zeros(sg.n_vertices) if x_mean is None else x_mean
    return TrainingSet(sg, x, g, mean)


def generate(
    model: MeasurementModel, sg: SpectralGraph, count: int, seed: int
) -> TrainingSet:
    """Draw ``count`` prior samples and push them through the forward map."""
    if sg is not model.sg and not np.array_equal(sg.laplacian, model.sg.laplacian):
        raise ValueError("sg does not match the model's graph")
    if count < 2:
        raise ValueError("need at least two samples")
    x = model.sample_x(count, seed)
    g = model.forward(x)
    return TrainingSet(sg, x, np.asarray(g, dtype=float), model.mean_x, seed=seed)


@dataclass(frozen=True)
class SampleMoments:
    """First and second sample moments with analytic noise folded in.

    ``cross_cov``/``y_cov`` are the vertex-domain matrices; the frequency
    diagonals are the elementwise-accumulated GFT counterparts. ``y_cov`` and
    ``freq_var_diag`` both include the noise contribution.
    """

    sg: SpectralGraph
    count: int
    x_mean: np.ndarray = field(repr=False)
    y_mean: np.ndarray = field(repr=False)
    cross_cov: np.ndarray = field(repr=False)
    y_cov: np.ndarray = field(repr=False)
    freq_cross_diag: np.ndarray = field(repr=False)
    freq_var_diag: np.ndarray = field(repr=False)
    noise_cov: np.ndarray = field(repr=False)

    @classmethod
    def from_covariances(
        cls,
        sg: SpectralGraph,
        x_mean: np.ndarray,
        y_mean: np.ndarray,
        cross_cov: np.ndarray,
        y_cov: np.ndarray,
        noise_cov: np.ndarray | None = None,
        count: int = 0,
    ) -> "SampleMoments":
        """Build a moments object from externally supplied (e.g. analytic)
        covariances; ``y_cov`` must already include any noise term."""
        v = sg.eigenvectors
        n = sg.n_vertices
        noise = np.zeros((n, n)) if noise_cov is None else np.asarray(noise_cov, float)
        return cls(
            sg,
            count,
            np.asarray(x_mean, float),
            np.asarray(y_mean, float),
            np.asarray(cross_cov, float),
            np.asarray(y_cov, float),
            np.diag(v.T @ cross_cov @ v).copy(),
            np.diag(v.T @ y_cov @ v).copy(),
            noise,
        )

    def to_json(self) -> str:
        doc = {
            "count": int(self.count),
            "x_mean": self.x_mean.tolist(),
            "y_mean": self.y_mean.tolist(),
            "cross_cov": self.cross_cov.tolist(),
            "y_cov": self.y_cov.tolist(),
            "freq_cross_diag": self.freq_cross_diag.tolist(),
            "freq_var_diag": self.freq_var_diag.tolist(),
            "noise_cov": self.noise_cov.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, sg: SpectralGraph) -> "SampleMoments":
        doc = json.loads(text)
        return cls(
            sg,
            int(doc["count"]),
            np.asarray(doc["x_mean"], float),
            np.asarray(doc["y_mean"], float),
            np.asarray(doc["cross_cov"], float),
            np.asarray(doc["y_cov"], float),
            np.asarray(doc["freq_cross_diag"], float),
            np.asarray(doc["freq_var_diag"], float),
            np.asarray(doc["noise_cov"], float),
        )


def compute_moments(ts: TrainingSet, noise_cov) -> SampleMoments:
    """Sample moments of a training set with the noise term added analytically.

    ``noise_cov`` is the measurement-noise covariance matrix (or a
    NoiseModel). Second moments center both ``x`` and ``g`` on their sample
    means; the known prior mean never enters them and survives only as the
    estimator base point.
    """
    if isinstance(noise_cov, NoiseModel):
        noise_cov = noise_cov.covariance
    noise_cov = np.asarray(noise_cov, dtype=float)
    n = ts.sg.n_vertices
    if noise_cov.shape != (n, n):
        raise ValueError("noise covariance has wrong shape")

    v = ts.sg.eigenvectors
    p = ts.count
    x_ref = ts.x[0]
    g_ref = ts.g[0]

    sum_dx = np.zeros(n)
    sum_dg = np.zeros(n)
    ss_xg = np.zeros((n, n))
    ss_gg = np.zeros((n, n))
    ss_xtgt = np.zeros(n)
    ss_gt2 = np.zeros(n)
    for start in range(0, p, _BLOCK):
        dx = ts.x[start : start + _BLOCK] - x_ref
        dg = ts.g[start : start + _BLOCK] - g_ref
        sum_dx += dx.sum(axis=0)
        sum_dg += dg.sum(axis=0)
        ss_xg += dx.T @ dg
        ss_gg += dg.T @ dg
        dxt = dx @ v
        dgt = dg @ v
        ss_xtgt += np.sum(dxt * dgt, axis=0)
        ss_gt2 += np.sum(dgt * dgt, axis=0)

    mean_dx = sum_dx / p
    mean_dg = sum_dg / p
    y_mean = g_ref + mean_dg
    cross_cov = ss_xg / p - np.outer(mean_dx, mean_dg)
    y_cov = ss_gg / p - np.outer(mean_dg, mean_dg) + noise_cov
    mean_dxt = mean_dx @ v
    mean_dgt = mean_dg @ v
    freq_noise = np.diag(v.T @ noise_cov @ v)
    freq_cross = ss_xtgt / p - mean_dxt * mean_dgt
    freq_var = ss_gt2 / p - mean_dgt * mean_dgt + freq_noise

    return SampleMoments(
        ts.sg,
        p,
        ts.x_mean.copy(),
        y_mean,
        cross_cov,
        y_cov,
        freq_cross,
        freq_var,
        noise_cov,
    )


def require_positive_freq_var(m: SampleMoments) -> None:
    """Spectral estimators divide by the frequency variances; reject zeros."""
    if np.any(m.freq_var_diag <= 0):
        bad = int(np.argmin(m.freq_var_diag))
        raise SingularMomentsError(
            f"frequency variance {m.freq_var_diag[bad]:.3e} at index {bad} "
            "is not positive"
        )
