"""Input probability measures: product measures, measure sets, mixtures.

Everything downstream (ANOVA decompositions, estimators, diagnostics) is
parameterised by a product measure on the input box, or by a finite *set*
of candidate product measures, optionally weighted by a prior.  This module
supplies those objects plus the config-file loader and the seeding helpers
that keep every stochastic code path reproducible.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
import yaml
from scipy.special import ndtr


class ConfigError(ValueError):
    """Raised when a measure/model config file is malformed."""


class SupportError(ValueError):
    """Raised when an operation requires overlapping supports and there are none."""


# ---------------------------------------------------------------------------
# deterministic RNG streams
# ---------------------------------------------------------------------------

def _tag_word(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf8"))


def substream(seed, *tags):
    """A ``numpy`` Generator for (seed, *tags), independent of call order.

    Distinct tag tuples give statistically independent streams, and the same
    tuple always gives the same stream, so parallel workers can draw their
    own samples without sharing state.
    """
    key = tuple(_tag_word(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


# ---------------------------------------------------------------------------
# univariate families
# ---------------------------------------------------------------------------

class UnivariateMeasure:
    """Interface for one input coordinate's distribution."""

    family = "abstract"

    def density(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def support(self):
        """(lower, upper) bounds; infinite for unbounded families."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def quad_nodes(self, order=64):
        """Nodes and probability weights so that sum(w * f(x)) ~ E[f(X)].

        Weights always sum to one; Gaussian rules are exact for polynomials
        up to degree 2*order - 1 against this measure.
        """
        raise NotImplementedError

    def expect(self, fn, order=64):
        x, w = self.quad_nodes(order)
        return float(np.dot(w, fn(x)))

    def plot_range(self):
        """Finite interval that carries essentially all of the mass."""
        lo, hi = self.support()
        return float(lo), float(hi)


@dataclass(frozen=True)
class Uniform(UnivariateMeasure):
    lo: float
    hi: float

    family = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def support(self):
        return (self.lo, self.hi)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size=size)

    def quad_nodes(self, order=64):
        t, w = np.polynomial.legendre.leggauss(order)
        x = 0.5 * (self.hi - self.lo) * t + 0.5 * (self.hi + self.lo)
        return x, w / 2.0


@dataclass(frozen=True)
class Normal(UnivariateMeasure):
    mean_: float
    sd: float

    family = "normal"

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigError(f"normal needs sd > 0, got {self.sd}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean_) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2.0 * math.pi))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return ndtr((x - self.mean_) / self.sd)

    def mean(self):
        return self.mean_

    def support(self):
        return (-math.inf, math.inf)

    def sample(self, rng, size):
        return rng.normal(self.mean_, self.sd, size=size)

    def quad_nodes(self, order=64):
        t, w = np.polynomial.hermite.hermgauss(order)
        x = self.mean_ + self.sd * math.sqrt(2.0) * t
        return x, w / math.sqrt(math.pi)

    def plot_range(self):
        return (self.mean_ - 4.0 * self.sd, self.mean_ + 4.0 * self.sd)


@dataclass(frozen=True)
class DiscreteUniform(UnivariateMeasure):
    """Equal mass on a finite set of points.

    Not part of the config-file schema; used programmatically when a model
    should be analysed on an exhaustive grid (quadrature then reduces to an
    exact finite sum).
    """

    points: tuple

    family = "discrete"

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 1:
            raise ConfigError("discrete measure needs at least one point")
        if len(set(pts)) != len(pts):
            raise ConfigError("discrete measure points must be distinct")
        object.__setattr__(self, "points", pts)

    def density(self, x):
        raise NotImplementedError("discrete measure has no Lebesgue density")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        pts = np.asarray(self.points)
        return (x[..., None] >= pts).mean(axis=-1)

    def mean(self):
        return float(np.mean(self.points))

    def support(self):
        return (min(self.points), max(self.points))

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.points), size=size)

    def quad_nodes(self, order=None):
        pts = np.asarray(self.points)
        return pts, np.full(pts.size, 1.0 / pts.size)


_FAMILIES = {"uniform": Uniform, "normal": Normal}


# ---------------------------------------------------------------------------
# product measures and sets of them
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductMeasure:
    """Independent product of univariate measures, one per input."""

    components: tuple
    name: str = ""

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigError("product measure needs at least one component")
        for c in comps:
            if not isinstance(c, UnivariateMeasure):
                raise ConfigError(f"not a univariate measure: {c!r}")
        object.__setattr__(self, "components", comps)

    @property
    def n(self):
        return len(self.components)

    def density(self, x):
        """Joint density at points of shape (..., n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[:-1])
        for i, c in enumerate(self.components):
            out = out * c.density(x[..., i])
        return out

    def in_support(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i, c in enumerate(self.components):
            lo, hi = c.support()
            ok &= (x[..., i] >= lo) & (x[..., i] <= hi)
        return ok

    def mean(self):
        return np.array([c.mean() for c in self.components])

    def support(self):
        return [c.support() for c in self.components]

    def sample(self, count, seed=None, rng=None):
        """Draw ``count`` iid points, shape (count, n).

        Exactly one of ``seed``/``rng`` must be given; with a seed the draw
        is reproducible and independent of where in a program it happens.
        """
        if (seed is None) == (rng is None):
            raise ValueError("pass exactly one of seed or rng")
        if rng is None:
            rng = substream(seed, "sample", self.name or "measure")
        cols = [c.sample(rng, count) for c in self.components]
        return np.column_stack(cols)

    def quad_nodes(self, order=64):
        """Per-coordinate (nodes, weights) pairs for tensorised quadrature."""
        return [c.quad_nodes(order) for c in self.components]


@dataclass(frozen=True)
class MeasureSet:
    """A finite family of candidate product measures, optionally weighted.

    The prior, when present, indicates how much belief each candidate
    carries; weights must be nonnegative and sum to one.
    """

    measures: tuple
    prior: tuple = None

    def __post_init__(self):
        ms = tuple(self.measures)
        if not ms:
            raise ConfigError("measure set is empty")
        n = ms[0].n
        for m in ms:
            if m.n != n:
                raise ConfigError("all measures in a set must share the input dimension")
        object.__setattr__(self, "measures", ms)
        if self.prior is not None:
            p = tuple(float(v) for v in self.prior)
            if len(p) != len(ms):
                raise ConfigError(f"prior has {len(p)} weights for {len(ms)} measures")
            # zero weights are allowed (degenerate priors are legitimate
            # edge cases); negative ones are not
            if any(v < 0 for v in p):
                raise ConfigError("prior weights must be nonnegative")
            if abs(sum(p) - 1.0) > 1e-12:
                raise ConfigError(f"prior weights sum to {sum(p)!r}, expected 1")
            object.__setattr__(self, "prior", p)

    @property
    def n(self):
        return self.measures[0].n

    @property
    def names(self):
        return tuple(m.name or f"m{k}" for k, m in enumerate(self.measures))

    def __len__(self):
        return len(self.measures)

    def __getitem__(self, k):
        return self.measures[k]

    def by_name(self, name):
        for m, nm in zip(self.measures, self.names):
            if nm == name:
                return m
        raise KeyError(name)

    def require_prior(self):
        if self.prior is None:
            raise ConfigError("this operation needs a prior over the measure set "
                              "(add a 'prior' entry to the measures file)")
        return np.asarray(self.prior)


@dataclass(frozen=True)
class MixtureMeasure:
    """The prior-averaged measure: first draw a candidate, then draw X from it.

    Its coordinates are conditionally independent given the candidate but
    dependent unconditionally; ``covariance`` quantifies that.
    """

    mset: MeasureSet

    def __post_init__(self):
        self.mset.require_prior()

    @property
    def n(self):
        return self.mset.n

    @property
    def prior(self):
        return np.asarray(self.mset.prior)

    def density(self, x):
        p = self.prior
        return sum(pk * m.density(x) for pk, m in zip(p, self.mset.measures))

    def marginal_density(self, keep, x):
        """Joint density of the coordinates in ``keep`` (1-based), at ``x``.

        ``x`` has shape (..., len(keep)).  Because mixing happens at the level
        of the whole vector, the marginal is the mixture of the component
        marginals, *not* a product of univariate mixtures.
        """
        keep = tuple(keep)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[:-1])
        for pk, m in zip(self.prior, self.mset.measures):
            part = np.ones(x.shape[:-1])
            for j, i in enumerate(keep):
                part = part * m.components[i - 1].density(x[..., j])
            out += pk * part
        return out

    def mean(self, i):
        p = self.prior
        return float(sum(pk * m.components[i - 1].mean() for pk, m in zip(p, self.mset.measures)))

    def covariance(self, i, j):
        """Cov(X_i, X_j) for i != j; nonzero mixing means make inputs dependent."""
        if i == j:
            raise ValueError("use per-component variances for the diagonal")
        p = self.prior
        ei = np.array([m.components[i - 1].mean() for m in self.mset.measures])
        ej = np.array([m.components[j - 1].mean() for m in self.mset.measures])
        return float(np.dot(p, ei * ej) - np.dot(p, ei) * np.dot(p, ej))

    def sample(self, count, seed=None, rng=None):
        """Two-stage draw: candidate index by the prior, then X from it."""
        if (seed is None) == (rng is None):
            raise ValueError("pass exactly one of seed or rng")
        if rng is None:
            rng = substream(seed, "sample", "mixture")
        which = rng.choice(len(self.mset), size=count, p=self.prior)
        out = np.empty((count, self.n))
        for k, m in enumerate(self.mset.measures):
            rows = np.nonzero(which == k)[0]
            if rows.size:
                out[rows] = m.sample(rows.size, rng=rng)
        return out


# ---------------------------------------------------------------------------
# logarithmic pooling
# ---------------------------------------------------------------------------

def log_pool(mset, weights=None):
    """Geometric (log-linear) pooling of the candidate measures.

    The pooled density is proportional to ``prod_k f_k^{w_k}``.  For product
    measures this factorises coordinate-wise; two families stay closed under
    it and are supported here:

    * all-uniform coordinates pool to the uniform on the support
      intersection (error if that intersection is empty);
    * all-normal coordinates pool to a normal with precision-weighted mean
      and summed precision.

    Mixing families in one coordinate has no closed form and raises.
    """
    ms = mset.measures
    if weights is None:
        w = np.asarray(mset.require_prior())
    else:
        w = np.asarray([float(v) for v in weights])
        if w.size != len(ms):
            raise ConfigError("one pooling weight per measure required")
        if np.any(w <= 0):
            raise ConfigError("pooling weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError(f"pooling weights sum to {w.sum()!r}, expected 1")
    w = w / w.sum()

    pooled = []
    for i in range(mset.n):
        comps = [m.components[i] for m in ms]
        fams = {type(c) for c in comps}
        if fams == {Uniform}:
            lo = max(c.lo for c in comps)
            hi = min(c.hi for c in comps)
            if not lo < hi:
                raise SupportError(f"coordinate {i + 1}: uniform supports do not overlap")
            pooled.append(Uniform(lo, hi))
        elif fams == {Normal}:
            prec = np.array([wk / c.sd**2 for wk, c in zip(w, comps)])
            tau = prec.sum()
            mu = float(np.dot(prec, [c.mean_ for c in comps]) / tau)
            pooled.append(Normal(mu, 1.0 / math.sqrt(tau)))
        else:
            raise SupportError(f"coordinate {i + 1}: log pooling across different "
                               "families has no closed form here")
    return ProductMeasure(tuple(pooled), name="log_pool")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def _reject_extras(mapping, allowed, where):
    extras = sorted(set(mapping) - set(allowed))
    if extras:
        raise ConfigError(f"{where}: unknown field(s) {extras}")


def _component_from_config(entry, where):
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: component must be a mapping")
    _reject_extras(entry, {"family", "params"}, where)
    try:
        family = str(entry["family"]).lower()
        params = entry["params"]
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc}") from None
    if family not in _FAMILIES:
        raise ConfigError(f"{where}: unknown family {entry['family']!r} "
                          f"(expected one of {sorted(_FAMILIES)})")
    if not isinstance(params, dict):
        raise ConfigError(f"{where}: params must be a mapping")
    if family == "uniform":
        _reject_extras(params, {"lo", "hi"}, where + ".params")
        try:
            return Uniform(float(params["lo"]), float(params["hi"]))
        except KeyError as exc:
            raise ConfigError(f"{where}.params: missing field {exc}") from None
    _reject_extras(params, {"mean", "sd"}, where + ".params")
    try:
        return Normal(float(params["mean"]), float(params["sd"]))
    except KeyError as exc:
        raise ConfigError(f"{where}.params: missing field {exc}") from None


def measure_set_from_dict(doc):
    """Build a MeasureSet from an already-parsed config mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("measures config must be a mapping at the top level")
    _reject_extras(doc, {"n", "measures", "prior"}, "top level")
    try:
        n = int(doc["n"])
        raw_measures = doc["measures"]
    except KeyError as exc:
        raise ConfigError(f"top level: missing field {exc}") from None
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not isinstance(raw_measures, list) or not raw_measures:
        raise ConfigError("'measures' must be a non-empty list")

    measures = []
    seen = set()
    for k, entry in enumerate(raw_measures):
        where = f"measures[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be a mapping")
        _reject_extras(entry, {"name", "components"}, where)
        try:
            name = str(entry["name"])
            comps = entry["components"]
        except KeyError as exc:
            raise ConfigError(f"{where}: missing field {exc}") from None
        if name in seen:
            raise ConfigError(f"{where}: duplicate measure name {name!r}")
        seen.add(name)
        if not isinstance(comps, list) or len(comps) != n:
            raise ConfigError(f"{where}: expected {n} components, got "
                              f"{len(comps) if isinstance(comps, list) else type(comps).__name__}")
        built = tuple(_component_from_config(c, f"{where}.components[{j}]")
                      for j, c in enumerate(comps))
        measures.append(ProductMeasure(built, name=name))

    prior = doc.get("prior")
    if prior is not None:
        if not isinstance(prior, list):
            raise ConfigError("'prior' must be a list of weights")
        prior = tuple(float(v) for v in prior)
    return MeasureSet(tuple(measures), prior=prior)


def load_measure_set(path):
    """Parse a measures config file (YAML/JSON) into a MeasureSet."""
    with open(path, "r", encoding="utf8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not parseable: {exc}") from None
    try:
        return measure_set_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def measure_set_to_dict(mset):
    """Inverse of measure_set_from_dict, for round-trip tests and provenance."""
    out = {"n": mset.n, "measures": []}
    for m, name in zip(mset.measures, mset.names):
        comps = []
        for c in m.components:
            if isinstance(c, Uniform):
                comps.append({"family": "uniform", "params": {"lo": c.lo, "hi": c.hi}})
            elif isinstance(c, Normal):
                comps.append({"family": "normal", "params": {"mean": c.mean_, "sd": c.sd}})
            else:
                raise ConfigError(f"family {c.family!r} has no config representation")
        out["measures"].append({"name": name, "components": comps})
    if mset.prior is not None:
        out["prior"] = list(mset.prior)
    return out
