"""Sample-based mixture proportion estimators.

Three families over a shared ``Estimate`` result type:

* ``roc_estimate`` - plug-in minimum of the penalized empirical ratio
  F(S)/H(S) over upper-level sets of a component-affinity score;
* ``en_estimate`` - posterior-calibration estimator: mean mixture score
  divided by the mean score on held-out component points;
* ``km_estimate`` - kernel mean matching: distance-to-mixture curve d(lambda)
  minimized over simplex reweightings of the mixture sample by projected
  gradient descent, with the proportion read off the curve's slope.

Score-level entry points (``*_from_scores``) take raw scores directly so the
estimators can be driven by exact densities or identity scores in oracle
checks; the model-level wrappers derive scores from a trained posterior
network.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .classifier import FlippedPosterior, Sample, TrainConfig, fit


@dataclass
class Estimate:
    """Estimator output: a proportion in [0, 1] plus a method-specific trace."""

    kappa_hat: float
    method: str
    diagnostics: dict = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True)
class RocConfig:
    penalty_scale: float = 1.0
    min_component_mass: float = 0.05
    grid_size: int = 200

    def __post_init__(self):
        if self.penalty_scale < 0:
            raise ValueError("penalty_scale must be non-negative")
        if not 0.0 < self.min_component_mass < 1.0:
            raise ValueError("min_component_mass must lie in (0, 1)")
        if self.grid_size < 10:
            raise ValueError("grid_size must be at least 10")


@dataclass(frozen=True)
class KmConfig:
    bandwidth_multiplier: float = 1.0
    lambda_grid: int = 64
    qp_iterations: int = 500
    variant: str = "km2"
    km1_slope_threshold: float = 0.2
    km2_slope_ratio: float = 0.25
    km2_slope_floor: float = 0.05

    def __post_init__(self):
        if self.lambda_grid < 8:
            raise ValueError("lambda_grid must be at least 8")
        if self.qp_iterations < 50:
            raise ValueError("qp_iterations must be at least 50")
        if self.variant not in ("km1", "km2"):
            raise ValueError("variant must be 'km1' or 'km2'")
        if self.bandwidth_multiplier <= 0:
            raise ValueError("bandwidth_multiplier must be positive")


def empirical_kappa(scores_f, scores_h, thresholds, min_component_mass=0.05):
    """Trace of the plug-in ratio over upper-level sets of a score.

    For each threshold t: f_frac = fraction of mixture scores strictly above
    t, h_frac likewise for the component, ratio = f_frac / h_frac wherever
    h_frac clears the mass floor (NaN elsewhere).
    """
    scores_f = np.sort(np.asarray(scores_f, dtype=float))
    scores_h = np.sort(np.asarray(scores_h, dtype=float))
    thresholds = np.asarray(thresholds, dtype=float)
    f_frac = 1.0 - np.searchsorted(scores_f, thresholds, side="right") / len(scores_f)
    h_frac = 1.0 - np.searchsorted(scores_h, thresholds, side="right") / len(scores_h)
    valid = h_frac >= min_component_mass
    ratio = np.full(len(thresholds), np.nan)
    ratio[valid] = f_frac[valid] / h_frac[valid]
    return {"thresholds": thresholds, "f_frac": f_frac, "h_frac": h_frac,
            "ratio": ratio, "valid": valid}


def roc_from_scores(scores_f, scores_h, cfg: RocConfig = RocConfig(),
                    seed: int = 0) -> Estimate:
    """Penalized minimum of the empirical ratio over a score threshold grid.

    Scores must rank component-like points high, so upper-level sets
    concentrate where the component dominates. The penalty inflates the
    numerator by penalty_scale * sqrt(log n_f / n_f).
    """
    scores_f = np.asarray(scores_f, dtype=float)
    scores_h = np.asarray(scores_h, dtype=float)
    lo = min(scores_f.min(), scores_h.min())
    hi = max(scores_f.max(), scores_h.max())
    thresholds = np.linspace(lo, hi, cfg.grid_size)
    trace = empirical_kappa(scores_f, scores_h, thresholds, cfg.min_component_mass)
    if not trace["valid"].any():
        raise ValueError("degenerate score distribution: no threshold keeps enough component mass")
    n_f = len(scores_f)
    penalty = cfg.penalty_scale * np.sqrt(np.log(max(n_f, 2)) / n_f)
    valid = trace["valid"]
    penalized = (trace["f_frac"][valid] + penalty) / trace["h_frac"][valid]
    best = int(np.argmin(penalized))
    kappa_hat = float(min(max(penalized[best], 0.0), 1.0))
    trace["penalty"] = float(penalty)
    trace["argmin_threshold"] = float(thresholds[valid][best])
    return Estimate(kappa_hat, "roc", trace, seed)


def roc_estimate(x_f: Sample, x_h: Sample, model, cfg: RocConfig = RocConfig(),
                 seed: int = 0) -> Estimate:
    """ROC estimator driven by a trained posterior network.

    ``model`` is the standard network from :func:`mpe.classifier.fit`
    (mixture positive); its complement 1 - p is used as the
    component-affinity score.
    """
    scores_f = 1.0 - model.predict(x_f.points)
    scores_h = 1.0 - model.predict(x_h.points)
    return roc_from_scores(scores_f, scores_h, cfg, seed)


def en_from_scores(scores_f, scores_h, seed: int = 0,
                   holdout_fraction: float = 0.2) -> Estimate:
    """Score-calibration estimate: mean mixture score over the mean score of
    a seeded held-out slice of the component sample."""
    scores_f = np.asarray(scores_f, dtype=float)
    scores_h = np.asarray(scores_h, dtype=float)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(scores_h))
    n_hold = max(1, int(len(scores_h) * holdout_fraction))
    holdout = perm[-n_hold:]
    c = float(scores_h[holdout].mean())
    if c < 1e-6:
        raise ValueError("degenerate labeling frequency")
    kappa_hat = float(min(max(scores_f.mean() / c, 0.0), 1.0))
    diagnostics = {"c": c, "holdout_size": n_hold,
                   "mean_score_f": float(scores_f.mean())}
    return Estimate(kappa_hat, "en", diagnostics, seed)


def en_estimate(x_f: Sample, x_h: Sample, model, seed: int = 0) -> Estimate:
    """Posterior-calibration estimator.

    ``model`` must score component membership high: either a network fit
    with the component sample as the positive side, or a
    :class:`FlippedPosterior` view of the standard mixture-positive network.
    """
    scores_f = model.predict(x_f.points)
    scores_h = model.predict(x_h.points)
    return en_from_scores(scores_f, scores_h, seed)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(v) + 1)
    cond = u - (css - 1.0) / idx > 0
    rho = idx[cond][-1]
    theta = (css[cond][-1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def _pairwise_sq_dists(a, b):
    aa = (a ** 2).sum(axis=1)[:, None]
    bb = (b ** 2).sum(axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


def _median_bandwidth(points, cap=2048):
    """Median pairwise distance, on an evenly strided subsample past ``cap``."""
    if len(points) > cap:
        points = points[np.linspace(0, len(points) - 1, cap).astype(int)]
    d2 = _pairwise_sq_dists(points, points)
    upper = d2[np.triu_indices(len(points), k=1)]
    med = float(np.sqrt(np.median(upper)))
    return med if med > 0 else 1.0


def _power_iteration_norm(k, iters=30):
    v = np.full(len(k), 1.0 / np.sqrt(len(k)))
    for _ in range(iters):
        v = k @ v
        norm = np.linalg.norm(v)
        if norm == 0:
            return 1.0
        v = v / norm
    return float(v @ (k @ v))


def km_estimate(x_f: Sample, x_h: Sample, cfg: KmConfig = KmConfig(),
                seed: int = 0) -> Estimate:
    """Kernel-mean-matching estimator.

    With an RBF kernel (bandwidth = median pairwise distance times the
    configured multiplier), computes d(lambda) = min over simplex weights w
    of || lambda*mu_H + (1-lambda)*Phi_F w - mu_F || by projected gradient
    descent with diminishing 1/sqrt(t) steps, warm-starting along the
    lambda grid. The estimate is the largest grid point before the curve's
    right-derivative exceeds the variant threshold: a fixed slope for km1,
    a fraction of the terminal slope (floored) for km2.
    """
    if len(x_f) < 16 or len(x_h) < 16:
        raise ValueError("kernel matching needs at least 16 points per side")
    pooled = np.vstack([x_f.points, x_h.points])
    bandwidth = cfg.bandwidth_multiplier * _median_bandwidth(pooled)
    gamma = 1.0 / (2.0 * bandwidth ** 2)

    k_ff = np.exp(-gamma * _pairwise_sq_dists(x_f.points, x_f.points))
    k_fh = np.exp(-gamma * _pairwise_sq_dists(x_f.points, x_h.points))
    k_hh = np.exp(-gamma * _pairwise_sq_dists(x_h.points, x_h.points))

    mu_ff = float(k_ff.mean())
    mu_hh = float(k_hh.mean())
    mu_fh = float(k_fh.mean())
    q = k_fh.mean(axis=1)       # <phi(f_i), mu_H>
    r = k_ff.mean(axis=1)       # <phi(f_i), mu_F>
    lip_base = 2.0 * _power_iteration_norm(k_ff)

    lambdas = np.linspace(0.0, 1.0, cfg.lambda_grid)
    distances = np.empty(cfg.lambda_grid)
    converged = np.ones(cfg.lambda_grid, dtype=bool)
    w = np.full(len(x_f), 1.0 / len(x_f))

    for i, lam in enumerate(lambdas):
        if lam >= 1.0:
            distances[i] = np.sqrt(max(mu_hh + mu_ff - 2 * mu_fh, 0.0))
            continue
        # gradient descent stays stable below 2/L; projection is non-expansive
        step0 = 1.5 / max(lip_base * (1 - lam) ** 2, 1e-12)
        lin = 2 * (1 - lam) * (lam * q - r)
        const = lam ** 2 * mu_hh + mu_ff - 2 * lam * mu_fh
        best_obj = np.inf
        prev_obj = np.inf
        flat_streak = 0
        last_rel = np.inf
        # one kernel matvec per iteration serves both the objective at the
        # current iterate and the gradient for the next step
        for t in range(1, cfg.qp_iterations + 1):
            kw = k_ff @ w
            obj = (1 - lam) ** 2 * (w @ kw) + w @ lin + const
            best_obj = min(best_obj, obj)
            change = abs(prev_obj - obj)
            last_rel = change / max(abs(obj), 1e-8)
            flat_streak = flat_streak + 1 if change < 1e-8 else 0
            prev_obj = obj
            if flat_streak >= 3:
                break
            grad = 2 * (1 - lam) ** 2 * kw + lin
            w = project_to_simplex(w - step0 / np.sqrt(t) * grad)
        else:
            converged[i] = last_rel <= 1e-4
        distances[i] = np.sqrt(max(best_obj, 0.0))

    slopes = np.diff(distances) / np.diff(lambdas)
    terminal = max(float(np.mean(slopes[-max(1, len(slopes) // 4):])), 0.0)
    if cfg.variant == "km1":
        threshold = cfg.km1_slope_threshold
    else:
        threshold = max(cfg.km2_slope_ratio * terminal, cfg.km2_slope_floor)
    exceeding = np.flatnonzero(slopes > threshold)
    kappa_hat = float(lambdas[exceeding[0]] if len(exceeding) else lambdas[-1])

    diagnostics = {
        "lambdas": lambdas, "distances": distances, "slopes": slopes,
        "threshold": float(threshold), "terminal_slope": terminal,
        "bandwidth": float(bandwidth), "qp_converged": converged,
        "qp_all_converged": bool(converged.all()),
    }
    return Estimate(kappa_hat, cfg.variant, diagnostics, seed)


class RocEstimator:
    """Harness handle: ROC estimator over a shared mixture-positive model."""

    needs_model = True

    def __init__(self, cfg: RocConfig = RocConfig(),
                 classifier_cfg: Optional[TrainConfig] = None):
        self.cfg = cfg
        self.classifier_cfg = classifier_cfg or TrainConfig()
        self.name = "roc"

    def estimate(self, x_f: Sample, x_h: Sample, model=None, seed: int = 0) -> Estimate:
        if model is None:
            model = fit(x_f, x_h, replace(self.classifier_cfg, seed=seed))
        return roc_estimate(x_f, x_h, model, self.cfg, seed)


class EnEstimator:
    """Harness handle: posterior-calibration estimator.

    Given a shared mixture-positive model, scores through its flipped view;
    without one, fits its own network with the component side positive.
    """

    needs_model = True

    def __init__(self, classifier_cfg: Optional[TrainConfig] = None):
        self.classifier_cfg = classifier_cfg or TrainConfig()
        self.name = "en"

    def estimate(self, x_f: Sample, x_h: Sample, model=None, seed: int = 0) -> Estimate:
        if model is None:
            flipped = fit(x_h, x_f, replace(self.classifier_cfg, seed=seed))
            return en_estimate(x_f, x_h, flipped, seed)
        return en_estimate(x_f, x_h, FlippedPosterior(model), seed)


class KmEstimator:
    """Harness handle: kernel-mean-matching estimator (no model needed)."""

    needs_model = False

    def __init__(self, cfg: KmConfig = KmConfig()):
        self.cfg = cfg
        self.name = cfg.variant

    def estimate(self, x_f: Sample, x_h: Sample, model=None, seed: int = 0) -> Estimate:
        return km_estimate(x_f, x_h, self.cfg, seed)


def make_estimator(name: str, classifier_cfg: Optional[TrainConfig] = None, **options):
    """Factory used by manifests: 'roc', 'en', 'km1' or 'km2'."""
    if name == "roc":
        return RocEstimator(RocConfig(**options), classifier_cfg)
    if name == "en":
        if options:
            raise ValueError(f"unknown options for 'en': {sorted(options)}")
        return EnEstimator(classifier_cfg)
    if name in ("km1", "km2"):
        return KmEstimator(KmConfig(variant=name, **options))
    raise ValueError(f"unknown estimator {name!r}; expected roc, en, km1 or km2")
