"""Prior-weighted (mixture) sensitivity analysis over a set of measures.

With a prior p over candidate measures mu^1..mu^Q, the object of study is
the hierarchical model: first the measure, then X from it.  Two routes
produce the mixture effect functions:

* average the per-measure ANOVA terms, ``sum_k p_k g_z^k``, each component
  gated by the indicator of its own support (a candidate says nothing about
  points it assigns no mass to) — :func:`mixture_effect_from_components`;
* pool the per-measure conditional means ``w_v = sum_k p_k w_v^k`` and run
  the ANOVA recursion on those — :func:`mixture_effect_from_pooled_conditionals`.

On the intersection of the supports every indicator equals one and the two
routes agree exactly (the recursion is linear in the conditionals); off the
intersection the pooled route is the natural analytic continuation.  Note
what the mixture terms are *not*: they are generally not annihilating with
respect to the mixture's own marginals — mixing couples the coordinates, so
no orthogonal decomposition against the mixture exists.
``mixture_annihilation_defect`` quantifies the failure.

Variance splits in two stages: the prior-average of the per-measure variances
(itself a sum of per-subset terms B_z) plus the variance of the per-measure
means across candidates,

    Var[G] = sum_z B_z + Var_p(E_k[G]),   B_z = sum_k p_k V_z^k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anova import AnovaEngine, canonical_key, _subsets_of
from .measures import DiscreteUniform, Normal


def component_engines(mset, model, order=64, seed=0):
    """One AnovaEngine per candidate measure, sharing settings."""
    return [AnovaEngine(model, m, order=order, seed=seed) for m in mset.measures]


def _check(engines, prior):
    p = np.asarray(prior, dtype=float)
    if p.size != len(engines):
        raise ValueError("one prior weight per engine required")
    return p


def support_indicator(measure, z, x):
    """Boolean mask: which rows of ``x`` lie in the measure's z-marginal support."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inside = np.ones(x.shape[0], dtype=bool)
    for j, i in enumerate(z):
        lo, hi = measure.components[i - 1].support()
        inside &= (x[:, j] >= lo) & (x[:, j] <= hi)
    return inside


def outside_all_supports(engines, z, x):
    """Rows of ``x`` that no candidate measure covers (mixture effect is 0 there)."""
    z = tuple(sorted(z))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    outside = np.ones(x.shape[0], dtype=bool)
    for eng in engines:
        outside &= ~support_indicator(eng.measure, z, x)
    return outside


def mixture_effect_from_components(engines, prior, z, x, gated=True):
    """The mixture effect as the prior-average of per-measure effects g_z^k.

    By default each component contributes only inside its own support
    (indicator semantics): a candidate distribution carries no information
    about points it assigns zero mass.  Points outside *every* support
    therefore evaluate to 0; ``outside_all_supports`` flags them.

    ``gated=False`` drops the indicators and evaluates each component
    effect as the globally defined function its integrals produce, which
    matches the pooled route everywhere.
    """
    p = _check(engines, prior)
    z = tuple(sorted(z))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    for pk, eng in zip(p, engines):
        if pk == 0.0:
            continue
        vals = eng.effect(z, x)
        if gated and z:
            vals = np.where(support_indicator(eng.measure, z, x), vals, 0.0)
        out += pk * vals
    return out


def mixture_effect_from_pooled_conditionals(engines, prior, z, x):
    """The mixture effect from pooled conditional means.

    Pools ``w_v = sum_k p_k w_v^k`` — the conditional expectation of the
    model under the two-stage mixture — and applies the ANOVA recursion to
    the pooled quantities.  Globally defined; agrees exactly with the
    component route on the intersection of the supports.
    """
    p = _check(engines, prior)
    z = tuple(sorted(z))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pooled_mean = float(sum(pk * eng.mean() for pk, eng in zip(p, engines)))
    if not z:
        return np.full(x.shape[0], pooled_mean)
    effects = {(): np.full(x.shape[0], pooled_mean)}
    for v in sorted(_subsets_of(z), key=canonical_key):
        if not v:
            continue
        cols = [z.index(i) for i in v]
        w_v = np.zeros(x.shape[0])
        for pk, eng in zip(p, engines):
            w_v += pk * eng.conditional_mean(v, x[:, cols])
        effects[v] = w_v - sum(effects[u] for u in _subsets_of(v) if u != v)
    return effects[z]


@dataclass
class MixtureDecomposition:
    """Two-stage variance split of a model over a weighted measure set.

    ``terms`` holds B_z (prior-averaged per-subset variances); ``between``
    the variance of per-measure means across the prior; ``total`` their sum
    (equal to the variance of the hierarchical model).  ``components`` keeps
    the per-measure decompositions the averages came from.
    """

    names: tuple
    prior: tuple
    terms: dict
    residual: float
    between: float
    component_means: np.ndarray
    mixture_mean: float
    components: list
    n: int
    mode: str = "quadrature"

    @property
    def structural(self):
        return sum(self.terms.values()) + self.residual

    @property
    def total(self):
        return self.structural + self.between

    @property
    def structural_share(self):
        return self.structural / self.total


def mixture_variance_decomposition(engines, prior, max_order=None):
    p = _check(engines, prior)
    vds = [eng.variance_decomposition(max_order) for eng in engines]
    subsets = list(vds[0].terms)
    terms = {z: float(sum(pk * vd.terms[z] for pk, vd in zip(p, vds)))
             for z in subsets}
    residual = float(sum(pk * vd.residual for pk, vd in zip(p, vds)))
    means = np.array([vd.mean for vd in vds])
    mbar = float(np.dot(p, means))
    between = float(np.dot(p, (means - mbar) ** 2))
    mode = "qmc" if any(vd.mode == "qmc" for vd in vds) else "quadrature"
    return MixtureDecomposition(
        names=tuple(vd.measure for vd in vds), prior=tuple(float(v) for v in p),
        terms=terms, residual=residual, between=between, component_means=means,
        mixture_mean=mbar, components=vds, n=vds[0].n, mode=mode)


def _restricted_rule(component, box, order=96):
    """Quadrature for E[f(X) 1{a <= X <= b}] with f smooth.

    Returns (nodes, weights) with weights absorbing the density (they sum to
    P(a <= X <= b)), or None when the restriction carries no mass.  The box
    edges are where the indicator jumps, so putting them at the ends of a
    Gauss-Legendre interval keeps the actual integrand smooth and the rule
    spectrally accurate; naive quadrature straight through the jump would
    stall around 1e-3.
    """
    a, b = box
    if isinstance(component, DiscreteUniform):
        pts = np.asarray(component.points, dtype=float)
        keep = (pts >= a) & (pts <= b)
        if not keep.any():
            return None
        return pts[keep], np.full(int(keep.sum()), 1.0 / pts.size)
    lo, hi = component.support()
    if a <= lo and b >= hi:
        return component.quad_nodes(order)
    a, b = max(a, lo), min(b, hi)
    if isinstance(component, Normal):
        # clip unbounded ends; the discarded tail mass is ~1e-17
        a = max(a, component.mean_ - 8.5 * component.sd)
        b = min(b, component.mean_ + 8.5 * component.sd)
    if not b > a:
        return None
    t, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    return x, 0.5 * (b - a) * w * component.density(x)


def mixture_annihilation_defect(engines, prior, z, gated=True, order=96):
    """Integral of the mixture effect g_z against the mixture's z-marginal.

    For a single measure this is identically zero (that is what makes the
    decomposition unique); under a genuine mixture it typically is not, and
    the value measures how far the mixture terms are from an orthogonal
    decomposition.

    The mixture marginal is the prior-average of component marginals and the
    (gated) mixture effect is the prior-average of indicator-masked component
    effects, so the defect splits into pair terms

        sum_{k,j} p_k p_j E_{mu^k_z}[ 1{supp_j,z} g_z^j ],

    each integrable by a smooth rule over the box intersection of the two
    supports.  ``gated`` selects which mixture-effect semantics is
    integrated; the default matches :func:`mixture_effect_from_components`.
    """
    p = _check(engines, prior)
    z = tuple(sorted(z))
    if not z:
        return 0.0
    total = 0.0
    for pk, k_eng in zip(p, engines):            # expectation measure
        if pk == 0.0:
            continue
        for pj, j_eng in zip(p, engines):        # effect term and its gate
            if pj == 0.0:
                continue
            rules = []
            for i in z:
                comp = k_eng.measure.components[i - 1]
                box = j_eng.measure.components[i - 1].support() if gated \
                    else (-np.inf, np.inf)
                rule = _restricted_rule(comp, box, order)
                if rule is None:
                    break
                rules.append(rule)
            else:
                mesh = np.meshgrid(*[x for x, _ in rules], indexing="ij")
                pts = np.stack([m.ravel() for m in mesh], axis=-1)
                g = j_eng.effect(z, pts).reshape([x.size for x, _ in rules])
                for ax in reversed(range(len(z))):
                    g = np.tensordot(g, rules[ax][1], axes=([ax], [0]))
                total += pk * pj * float(g)
    return total


@dataclass
class MixtureEffectCurve:
    """First-order effect of one input: per-component curves plus mixture.

    The grid spans the union of the components' plotting ranges.  Curves are
    tabulated via the pooled (globally defined) representation so that, for
    a monotone model, the mixture curve is monotone across the whole grid
    rather than jumping at component support boundaries.
    """

    input: int
    grid: np.ndarray
    component_values: dict
    mixture_values: np.ndarray


def mixture_effect_curve(engines, prior, i, npts=129):
    p = _check(engines, prior)
    ranges = [eng.measure.components[i - 1].plot_range() for eng in engines]
    lo = min(r[0] for r in ranges)
    hi = max(r[1] for r in ranges)
    grid = np.linspace(lo, hi, npts)
    comp = {}
    for eng in engines:
        comp[eng.measure.name or "measure"] = eng.effect((i,), grid[:, None])
    mix = np.zeros(npts)
    for pk, name in zip(p, comp):
        mix += pk * comp[name]
    return MixtureEffectCurve(input=i, grid=grid, component_values=comp,
                              mixture_values=mix)
