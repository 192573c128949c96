"""Exact Gaussian-process fusion of footstep measurements into terrain maps.

The kernel is a constant-scaled squared-exponential plus white noise:

    k(xi, xj) = C * exp(-d(xi, xj)^2 / (2 l^2)) + n * [xi == xj]

with the white-noise term entering the training Gram matrix as additive
variance on the diagonal.  Values are centered on their sample mean
before fitting so that unexplored regions revert to the mean of what was
seen rather than to zero strength.  Prediction uses the noise-free test
kernel (C at zero lag), so revisited points report residual uncertainty
below the prior.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .grids import GridSpec, Raster
from .proprioception import StepMeasurement

__all__ = [
    "KernelParams",
    "GprModel",
    "TerrainMap",
    "GprError",
    "kernel_eval",
    "fit",
    "predict",
    "update",
    "rasterize",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    "TerrainMapper",
]

DEFAULT_JITTER = 1e-8
_JITTER_RETRIES = 3  # escalate by a decade per retry before giving up


class GprError(ValueError):
    """Ill-conditioned fit or invalid model usage."""


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters: length scale l (m), noise floor n, constant C (variances)."""

    length_scale: float = 0.5
    noise_floor: float = 0.2
    constant: float = 5.0

    def __post_init__(self):
        if self.length_scale <= 0:
            raise GprError("length scale must be positive")
        if self.noise_floor < 0:
            raise GprError("noise floor must be non-negative")
        if self.constant <= 0:
            raise GprError("kernel constant must be positive")


def kernel_eval(x_i, x_j, params: KernelParams = KernelParams()) -> float:
    """Pointwise kernel value; the white-noise term fires on exact equality."""
    xi = np.asarray(x_i, dtype=float)
    xj = np.asarray(x_j, dtype=float)
    d2 = float(np.sum((xi - xj) ** 2))
    value = params.constant * np.exp(-d2 / (2.0 * params.length_scale**2))
    if d2 == 0.0:
        value += params.noise_floor
    return float(value)


def _cross_covariance(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Noise-free covariance matrix C * exp(-d^2 / 2l^2) between point sets."""
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return params.constant * np.exp(-d2 / (2.0 * params.length_scale**2))


@dataclass(frozen=True)
class GprModel:
    """Fitted exact-GP posterior over observed (position, value) pairs."""

    positions: np.ndarray  # (n, 2)
    values: np.ndarray  # (n,)
    params: KernelParams
    mean_offset: float
    cho: tuple[np.ndarray, bool]  # Cholesky factorization of K + jitter*I
    alpha: np.ndarray  # (K + jitter*I)^-1 (values - mean_offset)
    jitter: float

    @property
    def n_observations(self) -> int:
        return int(self.positions.shape[0])


def fit(
    observations,
    params: KernelParams = KernelParams(),
    jitter: float = DEFAULT_JITTER,
) -> GprModel:
    """Fit the exact GP to (x, y, value) observations.

    Duplicate positions are fine: the white-noise diagonal keeps the Gram
    matrix invertible.  If factorization fails, the jitter escalates by a
    decade at a time (three retries) before raising GprError.
    """
    obs = _as_observation_array(observations)
    if obs.shape[0] < 1:
        raise GprError("need at least one observation to fit")
    positions = obs[:, :2].copy()
    values = obs[:, 2].copy()
    mean_offset = float(values.mean())
    k = _cross_covariance(params, positions, positions)
    k[np.diag_indices_from(k)] += params.noise_floor
    centered = values - mean_offset
    current = jitter
    for attempt in range(_JITTER_RETRIES + 1):
        try:
            cho = cho_factor(k + current * np.eye(k.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            if attempt == _JITTER_RETRIES:
                raise GprError(
                    f"kernel matrix not positive definite even with jitter {current}"
                ) from None
            current *= 10.0
    alpha = cho_solve(cho, centered)
    return GprModel(
        positions=positions,
        values=values,
        params=params,
        mean_offset=mean_offset,
        cho=cho,
        alpha=alpha,
        jitter=current,
    )


def _as_observation_array(observations) -> np.ndarray:
    rows = []
    for ob in observations:
        if isinstance(ob, StepMeasurement):
            rows.append((ob.x, ob.y, ob.estimate.alpha_z))
        else:
            x, y, v = ob
            rows.append((float(x), float(y), float(v)))
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def predict(model: GprModel, query_points) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at query points (m, 2).

    Variance is clamped to [0, C]: the noise-free test kernel bounds it
    by the prior constant, and roundoff can otherwise dip it below zero.
    """
    query = np.atleast_2d(np.asarray(query_points, dtype=float))
    k_star = _cross_covariance(model.params, model.positions, query)  # (n, m)
    mean = model.mean_offset + k_star.T @ model.alpha
    l_factor, lower = model.cho
    v = solve_triangular(l_factor, k_star, lower=lower)
    var = model.params.constant - np.sum(v * v, axis=0)
    var = np.clip(var, 0.0, model.params.constant)
    return mean, var


def update(model: GprModel, new_observations) -> GprModel:
    """Refit on the union of old and new observations (exact, O(n^3)).

    Missions in scope stay under a few hundred steps, where a dense refit
    per step is cheap and keeps incremental and one-shot fits identical.
    """
    extra = _as_observation_array(new_observations)
    if extra.shape[0] == 0:
        return model
    combined = np.vstack(
        [np.column_stack([model.positions, model.values]), extra]
    )
    return fit(combined, params=model.params, jitter=DEFAULT_JITTER)


@dataclass(frozen=True)
class TerrainMap:
    """Posterior rasters: strength mean, variance, and model-fitness mean."""

    mean: Raster
    variance: Raster
    fitness: Raster
    n_observations: int

    def __post_init__(self):
        if not (self.mean.spec == self.variance.spec == self.fitness.spec):
            raise GprError("terrain map layers must share one grid")
        if np.any(self.variance.values < 0):
            raise GprError("posterior variance must be non-negative")


def rasterize(model: GprModel, fitness_model: GprModel, spec: GridSpec) -> TerrainMap:
    """Evaluate strength and fitness posteriors at every cell center."""
    xg, yg = spec.cell_centers()
    query = np.column_stack([xg.ravel(), yg.ravel()])
    mean, var = predict(model, query)
    fit_mean, _ = predict(fitness_model, query)
    shape = (spec.height, spec.width)
    return TerrainMap(
        mean=Raster(spec, mean.reshape(shape)),
        variance=Raster(spec, var.reshape(shape)),
        fitness=Raster(spec, fit_mean.reshape(shape)),
        n_observations=model.n_observations,
    )


def log_marginal_likelihood(model: GprModel) -> float:
    centered = model.values - model.mean_offset
    l_factor, _ = model.cho
    n = centered.size
    return float(
        -0.5 * centered @ model.alpha
        - np.sum(np.log(np.diag(l_factor)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def optimize_hyperparameters(
    observations,
    length_scales=(0.25, 0.5, 1.0, 2.0),
    constants=(1.0, 5.0, 10.0),
    noise_floor: float = 0.2,
) -> KernelParams:
    """Grid search maximizing the log marginal likelihood (optional path).

    The defaults stay fixed unless this is explicitly requested; the grid
    covers the plausible desk-scale range.
    """
    best_params = None
    best_lml = -np.inf
    for l in length_scales:
        for c in constants:
            params = KernelParams(length_scale=l, noise_floor=noise_floor, constant=c)
            lml = log_marginal_likelihood(fit(observations, params=params))
            if lml > best_lml:
                best_lml = lml
                best_params = params
    return best_params


class TerrainMapper:
    """Paired strength and fitness GPs fed by footstep measurements.

    The fitness model reuses the strength kernel; the R^2 heuristic is
    only read ordinally, so sharing hyperparameters is safe.  Instances
    are cheap immutable-state holders: ingest() returns nothing but swaps
    in freshly fitted models, and callers serialize ingests themselves
    (single-writer contract); reads are safe at any time.
    """

    def __init__(self, params: KernelParams = KernelParams()):
        self.params = params
        self._steps: list[StepMeasurement] = []
        self._strength: GprModel | None = None
        self._fitness: GprModel | None = None

    @property
    def steps(self) -> list[StepMeasurement]:
        return list(self._steps)

    @property
    def strength_model(self) -> GprModel:
        if self._strength is None:
            raise GprError("no steps ingested yet")
        return self._strength

    @property
    def fitness_model(self) -> GprModel:
        if self._fitness is None:
            raise GprError("no steps ingested yet")
        return self._fitness

    def ingest(self, steps) -> None:
        steps = list(steps)
        if not steps:
            return
        self._steps.extend(steps)
        strength_obs = [(s.x, s.y, s.estimate.alpha_z) for s in self._steps]
        fitness_obs = [(s.x, s.y, s.estimate.r_squared) for s in self._steps]
        self._strength = fit(strength_obs, params=self.params)
        self._fitness = fit(fitness_obs, params=self.params)

    def rasterize(self, spec: GridSpec) -> TerrainMap:
        return rasterize(self.strength_model, self.fitness_model, spec)
