"""Exact mixture-proportion identities on finite discrete probability measures.

On an explicitly enumerated support the infimum over measurable sets reduces
to a minimum over support points, so every quantity here (maximum embeddable
proportion, measure splits, regrouped components, error bounds) is computable
to floating-point accuracy and serves as the ground-truth oracle for the
sample-based estimators.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Measure with finite support.

    Parameters
    ----------
    support : ordered, unique point identifiers (hashable, JSON-friendly).
    mass : non-negative weights aligned with ``support``. Must sum to one
        within ``MASS_TOL`` unless ``unnormalized=True`` (intermediate
        values produced by :func:`split_measure`).
    """

    support: tuple
    mass: np.ndarray
    unnormalized: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = tuple(self.support)
        mass = np.asarray(self.mass, dtype=float).copy()
        if mass.ndim != 1 or mass.size != len(support):
            raise ValueError("support and mass must be aligned 1-d sequences")
        if len(set(support)) != len(support):
            raise ValueError("support identifiers must be unique")
        if not np.isfinite(mass).all() or (mass < 0).any():
            raise ValueError("masses must be finite and non-negative")
        if not self.unnormalized and abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(
                f"masses sum to {mass.sum()!r}; a probability measure must sum to 1"
            )
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(support)})

    def __len__(self):
        return len(self.support)

    def prob(self, point) -> float:
        """Mass at a single support point (0 for points off the support)."""
        i = self._index.get(point)
        return 0.0 if i is None else float(self.mass[i])

    def mass_of(self, points: Iterable) -> float:
        """Total mass of a set of points; unknown identifiers raise."""
        return float(self.mass[self._mask(points)].sum())

    def total(self) -> float:
        return float(self.mass.sum())

    def _mask(self, points: Iterable) -> np.ndarray:
        members = set(points)
        unknown = [p for p in members if p not in self._index]
        if unknown:
            raise ValueError(
                f"mask references unknown identifier(s): {sorted(map(repr, unknown))}"
            )
        out = np.zeros(len(self.support), dtype=bool)
        for p in members:
            out[self._index[p]] = True
        return out

    def to_dict(self) -> dict:
        return {"support": list(self.support), "mass": [float(m) for m in self.mass]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict, unnormalized: bool = False) -> "DiscreteDistribution":
        return cls(tuple(obj["support"]), np.asarray(obj["mass"], dtype=float),
                   unnormalized=unnormalized)

    @classmethod
    def from_json(cls, text: str, unnormalized: bool = False) -> "DiscreteDistribution":
        return cls.from_dict(json.loads(text), unnormalized=unnormalized)


class RegroupResult(NamedTuple):
    """New mixture decomposition after moving part of the latent component."""

    kappa_prime: float
    g_prime: DiscreteDistribution
    h_prime: DiscreteDistribution


class SurrogateGap(NamedTuple):
    """Distance between two measures on a shared support.

    ``max_pointwise`` is the largest single-point discrepancy;
    ``total_variation`` is the supremum over all sets (half the L1 norm).
    """

    max_pointwise: float
    total_variation: float


@dataclass(frozen=True)
class BoundInputs:
    """Ingredients of the finite-sample estimation-error bound."""

    n_f: int
    n_hprime: int
    h_hat_A: float
    delta: float
    rademacher_f: float = 0.0
    rademacher_hprime: float = 0.0

    def __post_init__(self):
        if self.n_f < 1 or self.n_hprime < 1:
            raise ValueError("sample sizes must be at least 1")
        if not 0.0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 0.5]")
        if not 0.0 <= self.h_hat_A <= 1.0:
            raise ValueError("h_hat_A must lie in [0, 1]")
        if self.rademacher_f < 0 or self.rademacher_hprime < 0:
            raise ValueError("complexity terms must be non-negative")


def union_support(*dists: DiscreteDistribution) -> tuple:
    """Union of supports, ordered by first appearance across the arguments."""
    seen: dict = {}
    for d in dists:
        for x in d.support:
            seen.setdefault(x, None)
    return tuple(seen)


def _aligned(f: DiscreteDistribution, h: DiscreteDistribution):
    """Masses of both measures on the union support (order of first appearance)."""
    support = union_support(f, h)
    fm = np.array([f.prob(x) for x in support])
    hm = np.array([h.prob(x) for x in support])
    return support, fm, hm


def _mask_on(support: tuple, points: Iterable) -> np.ndarray:
    index = {x: i for i, x in enumerate(support)}
    members = set(points)
    unknown = [p for p in members if p not in index]
    if unknown:
        raise ValueError(
            f"mask references unknown identifier(s): {sorted(map(repr, unknown))}"
        )
    out = np.zeros(len(support), dtype=bool)
    for p in members:
        out[index[p]] = True
    return out


def mix(g: DiscreteDistribution, h: DiscreteDistribution, kappa: float) -> DiscreteDistribution:
    """Convex combination (1-kappa)*G + kappa*H on the union support."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    support, gm, hm = _aligned(g, h)
    return DiscreteDistribution(support, (1.0 - kappa) * gm + kappa * hm)


def kappa_max(f: DiscreteDistribution, h: DiscreteDistribution) -> float:
    """Maximum proportion of the component ``h`` embeddable in the mixture ``f``.

    The minimum of f(S)/h(S) over sets is attained on a single support point
    for finite discrete measures (the mediant of two fractions lies between
    them), so only singletons with positive component mass are inspected.
    Result is clamped to [0, 1]. Ties in the minimizing point go to the
    lowest support index.
    """
    if len(h) == 0 or not (np.asarray(h.mass) > 0).any():
        raise ValueError("degenerate component: no positive mass")
    _, fm, hm = _aligned(f, h)
    pos = hm > 0
    ratios = fm[pos] / hm[pos]
    return float(min(max(ratios.min(), 0.0), 1.0))


def kappa_argmin_point(f: DiscreteDistribution, h: DiscreteDistribution):
    """Support point attaining the minimum mixture/component mass ratio."""
    if len(h) == 0 or not (np.asarray(h.mass) > 0).any():
        raise ValueError("degenerate component: no positive mass")
    support, fm, hm = _aligned(f, h)
    pos = np.flatnonzero(hm > 0)
    ratios = fm[pos] / hm[pos]
    return support[pos[int(np.argmin(ratios))]]


def split_measure(m: DiscreteDistribution, a: Iterable):
    """Split a measure into its restrictions to a set and its complement.

    Both parts live on the full support of ``m`` with mass zeroed outside
    the respective set, so they add back to ``m`` exactly (no rounding:
    each point's mass appears unchanged in exactly one part).
    """
    amask = m._mask(a)
    m_a = DiscreteDistribution(m.support, np.where(amask, m.mass, 0.0), unnormalized=True)
    m_ac = DiscreteDistribution(m.support, np.where(amask, 0.0, m.mass), unnormalized=True)
    return m_a, m_ac


def regroup(g: DiscreteDistribution, h: DiscreteDistribution,
            kappa_star: float, a: Iterable) -> RegroupResult:
    """Move the latent component's mass on ``a`` into the observed component.

    For F = (1-kappa_star)*G + kappa_star*H this rewrites F as a mixture of
    G' (G renormalized off ``a``) and H' (H plus the moved G-part), with the
    new proportion kappa' = kappa_star + (1-kappa_star)*G(a). By construction
    G'(a) = 0 while H'(a) > 0, so no fraction of H' fits inside G'.
    """
    if not 0.0 < kappa_star < 1.0:
        raise ValueError("kappa_star must lie strictly inside (0, 1)")
    support, gm, hm = _aligned(g, h)
    amask = _mask_on(support, a)
    fm = (1.0 - kappa_star) * gm + kappa_star * hm
    f_a = float(fm[amask].sum())
    if f_a <= 0.0:
        raise ValueError("A outside support of F")
    g_a = float(gm[amask].sum())
    g_ac = float(gm[~amask].sum())
    if g_ac <= 0.0:
        raise ValueError("regrouping entire G")

    kappa_prime = kappa_star + (1.0 - kappa_star) * g_a
    g_prime = DiscreteDistribution(support, np.where(amask, 0.0, gm) / g_ac)
    h_norm = (1.0 - kappa_star) * g_a + kappa_star
    h_prime = DiscreteDistribution(
        support, ((1.0 - kappa_star) * np.where(amask, gm, 0.0) + kappa_star * hm) / h_norm
    )
    return RegroupResult(float(kappa_prime), g_prime, h_prime)


def bias_identity(kappa_star: float, beta: float) -> float:
    """Inflated proportion reported when the latent component overlaps: k* + (1-k*)*beta."""
    if not 0.0 <= kappa_star <= 1.0 or not 0.0 <= beta <= 1.0:
        raise ValueError("kappa_star and beta must lie in [0, 1]")
    return kappa_star + (1.0 - kappa_star) * beta


def regroup_ordering(g: DiscreteDistribution, h: DiscreteDistribution,
                     kappa_star: float, a: Iterable) -> str:
    """Classify where the regrouped proportion lands relative to the truth.

    Requires the regrouping set to be cheaper than the overlap level
    (G(a) below the minimum G/H ratio; both may be exactly zero). Returns
    ``"equal"`` when the overlap is zero and the regrouped proportion matches
    kappa_star, ``"strictly_between"`` when it falls strictly between
    kappa_star and the biased maximum, ``"violated"`` otherwise.
    """
    beta = kappa_max(g, h)
    support, gm, _ = _aligned(g, h)
    g_a = float(gm[_mask_on(support, a)].sum())
    if not (g_a < beta or (beta == 0.0 and g_a == 0.0)):
        raise ValueError("selection condition failed")
    result = regroup(g, h, kappa_star, a)
    if beta == 0.0:
        return "equal" if abs(result.kappa_prime - kappa_star) <= MASS_TOL else "violated"
    upper = bias_identity(kappa_star, beta)
    if kappa_star < result.kappa_prime < upper:
        return "strictly_between"
    return "violated"


def surrogate_component(f: DiscreteDistribution, h: DiscreteDistribution,
                        a: Iterable) -> DiscreteDistribution:
    """Sample-constructible stand-in for the regrouped component.

    Copies the mixture's mass on ``a`` onto the component and renormalizes:
    (F_a + H) / (F(a) + 1). This is what concatenating the selected mixture
    points onto the component sample realizes at the measure level.
    """
    support, fm, hm = _aligned(f, h)
    amask = _mask_on(support, a)
    f_a = float(fm[amask].sum())
    return DiscreteDistribution(support, (np.where(amask, fm, 0.0) + hm) / (f_a + 1.0))


def surrogate_gap(h_prime: DiscreteDistribution,
                  h_tilde: DiscreteDistribution) -> SurrogateGap:
    """Pointwise and total-variation distance between two measures.

    Both measures must share the same support set.
    """
    if set(h_prime.support) != set(h_tilde.support):
        raise ValueError("support mismatch")
    diffs = np.array([abs(h_prime.prob(x) - h_tilde.prob(x)) for x in h_prime.support])
    return SurrogateGap(float(diffs.max()), float(diffs.sum() / 2.0))


def finite_sample_bound(b: BoundInputs) -> float:
    """Two-sided deviation bound for the estimated regrouped proportion.

    eps(X) = 2*rademacher + 3*sqrt(log(4/delta) / (2|X|)); the bound is
    (eps_hprime + eps_f) / (h_hat_A + eps_hprime). The deterministic
    G(a)-dependent offset is the caller's to add when the truth is known.
    """
    def eps(n, rad):
        return 2.0 * rad + 3.0 * np.sqrt(np.log(4.0 / b.delta) / (2.0 * n))

    eps_f = eps(b.n_f, b.rademacher_f)
    eps_h = eps(b.n_hprime, b.rademacher_hprime)
    denom = b.h_hat_A + eps_h
    if denom <= 0.0:
        raise ValueError("empirical component mass plus deviation is zero")
    return float((eps_h + eps_f) / denom)


def latent_residual(f: DiscreteDistribution, h: DiscreteDistribution,
                    kappa: float) -> DiscreteDistribution:
    """Latent part left after removing a kappa-fraction of the component:
    (F - kappa*H) / (1 - kappa). Valid whenever kappa does not exceed the
    maximum embeddable proportion."""
    if not 0.0 <= kappa < 1.0:
        raise ValueError("kappa must lie in [0, 1)")
    support, fm, hm = _aligned(f, h)
    res = (fm - kappa * hm) / (1.0 - kappa)
    res[(res < 0) & (res > -MASS_TOL)] = 0.0
    if (res < 0).any():
        raise ValueError("kappa exceeds the maximum embeddable proportion")
    return DiscreteDistribution(support, res)
