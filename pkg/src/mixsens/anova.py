"""Functional ANOVA of a model under one product measure.

The decomposition writes ``g(x) = sum_z g_z(x_z)`` over subsets ``z`` of the
inputs, built recursively from conditional means

    w_z(x_z) = E[g(X) | X_z = x_z],
    g_z(x_z) = w_z(x_z) - sum over proper subsets v of z of g_v(x_v),

with the empty-set term the overall mean.  Each ``g_z`` integrates to zero
against its measure in every coordinate of ``z`` and the terms are mutually
orthogonal, so the model variance splits into per-subset pieces
``V_z = int g_z^2``; normalising by the total variance gives the usual
sensitivity indices.  All of it depends on the chosen input measure, which is
the entire point of this package: change the measure and every term changes.

Integrals use tensorised Gaussian quadrature (exact finite sums for discrete
coordinates); when an integral would run over more than three continuous
coordinates at once the engine switches to scrambled-Sobol QMC for that
integral and labels the result accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .measures import DiscreteUniform, Normal, ProductMeasure, Uniform, substream


class ZeroVarianceError(ArithmeticError):
    """Total variance is (numerically) zero, so indices are undefined."""


DEFAULT_ORDER = 64          # Gaussian quadrature nodes per coordinate
DEFAULT_QMC_LOG2 = 14       # 2**14 scrambled-Sobol points per QMC integral
FULL_GRID_CAP = 2**22       # largest full tensor grid we will materialise
TENSOR_DIM_CAP = 3          # beyond this many integration dims, use QMC


# ---------------------------------------------------------------------------
# subset bookkeeping (inputs are 1-based everywhere in the public API)
# ---------------------------------------------------------------------------

def subset_mask(z):
    return sum(1 << (i - 1) for i in z)


def canonical_key(z):
    """Sort key: by cardinality, then by bitmask value."""
    return (len(z), subset_mask(z))


def all_subsets(n, max_order=None, nonempty=True):
    """All subsets of {1..n} up to ``max_order``, in canonical order."""
    if max_order is None:
        max_order = n
    out = []
    for mask in range(0 if not nonempty else 1, 1 << n):
        z = tuple(i + 1 for i in range(n) if mask >> i & 1)
        if len(z) <= max_order:
            out.append(z)
    out.sort(key=canonical_key)
    return out


def subset_label(z):
    """Stable text id for a subset: () -> 'const', (1, 3) -> 'x1x3'."""
    if not z:
        return "const"
    return "".join(f"x{i}" for i in z)


def parse_subset_label(label):
    if label == "const":
        return ()
    if not label.startswith("x"):
        raise ValueError(f"bad subset label {label!r}")
    return tuple(int(tok) for tok in label[1:].split("x"))


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class VarianceDecomposition:
    """Variance split of one model under one measure.

    ``terms`` maps each subset (1-based tuple) to its raw variance share
    V_z; tiny negative values are quadrature noise and are clamped only in
    the derived views.  ``residual`` holds whatever ``max_order`` truncated
    away (zero when every order was computed).
    """

    measure: str
    total: float
    mean: float
    terms: dict
    residual: float
    n: int
    mode: str = "quadrature"

    def clamped_terms(self):
        return {z: max(v, 0.0) for z, v in self.terms.items()}

    def sobol_indices(self):
        """S_z = V_z / V, clamped to [0, 1]."""
        if not np.isfinite(self.total) or self.total <= 0.0:
            raise ZeroVarianceError(f"measure {self.measure!r}: total variance "
                                    f"{self.total!r} admits no indices")
        return {z: min(max(v / self.total, 0.0), 1.0) for z, v in self.terms.items()}

    def first_order(self):
        s = self.sobol_indices()
        return np.array([s.get((i,), 0.0) for i in range(1, self.n + 1)])

    def total_order(self):
        """ST_i = sum of S_z over computed subsets containing i.

        With a truncated ``max_order`` this misses interactions beyond the
        cutoff, i.e. it is a lower bound.
        """
        s = self.sobol_indices()
        st = np.zeros(self.n)
        for z, v in s.items():
            for i in z:
                st[i - 1] += v
        return st


def first_and_total_indices(vd):
    """Per-input (S_i, ST_i) arrays; raises ZeroVarianceError when V = 0."""
    scale = max(1.0, vd.mean * vd.mean)
    if not np.isfinite(vd.total) or vd.total <= 1e-12 * scale:
        raise ZeroVarianceError(f"measure {vd.measure!r}: total variance "
                                f"{vd.total!r} is numerically zero")
    return vd.first_order(), vd.total_order()


@dataclass
class EffectCurve:
    """An ANOVA effect tabulated on a plotting grid.

    For |z| = 1 ``grids`` holds one axis and ``values`` is 1-d; for |z| = 2
    values live on the tensor grid of the two axes.
    """

    measure: str
    subset: tuple
    grids: list
    values: np.ndarray


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

def _qmc_transform(components, u):
    """Map uniform(0,1) QMC points to the given univariate measures."""
    out = np.empty_like(u)
    for j, c in enumerate(components):
        col = u[:, j]
        if isinstance(c, Uniform):
            out[:, j] = c.lo + (c.hi - c.lo) * col
        elif isinstance(c, Normal):
            out[:, j] = c.mean_ + c.sd * ndtri(np.clip(col, 1e-15, 1.0 - 1e-15))
        elif isinstance(c, DiscreteUniform):
            pts = np.asarray(c.points)
            idx = np.minimum((col * pts.size).astype(int), pts.size - 1)
            out[:, j] = pts[idx]
        else:  # pragma: no cover - family set is closed
            raise TypeError(f"no QMC transform for {type(c).__name__}")
    return out


class AnovaEngine:
    """Computes conditional means, effects and variance terms for one measure.

    Parameters
    ----------
    model : callable
        Vectorised map taking points of shape (..., n) to values (...,).
    measure : ProductMeasure
        Input distribution the decomposition is taken against.
    order : int
        Gaussian nodes per continuous coordinate.
    qmc_log2, seed : int
        Size (log2) and seed of the scrambled-Sobol rule used whenever an
        integral runs over more than three continuous coordinates.
    """

    def __init__(self, model, measure, order=DEFAULT_ORDER,
                 qmc_log2=DEFAULT_QMC_LOG2, seed=0):
        if not isinstance(measure, ProductMeasure):
            raise TypeError("AnovaEngine needs a ProductMeasure")
        self.model = model
        self.measure = measure
        self.order = int(order)
        self.qmc_log2 = int(qmc_log2)
        self.seed = int(seed)
        self.n = measure.n
        nodes = measure.quad_nodes(order)
        self.nodes = [np.asarray(x) for x, _ in nodes]
        self.weights = [np.asarray(w) for _, w in nodes]
        self._sizes = [x.size for x in self.nodes]
        self._full_grid_ok = int(np.prod([float(s) for s in self._sizes])) <= FULL_GRID_CAP \
            and self.n <= 16
        self._G = None            # model on the full tensor grid, lazily
        self._w_cache = {}        # subset -> conditional mean on its subgrid
        self._g_cache = {}        # subset -> effect on its subgrid
        self._qmc_used = False

    # -- infrastructure ----------------------------------------------------

    def _full_grid_values(self):
        if self._G is None:
            mesh = np.meshgrid(*self.nodes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            self._G = np.asarray(self.model(pts), dtype=float).reshape(self._sizes)
        return self._G

    def _complement_rule(self, z):
        """Integration rule over the complement of z: (points, weights).

        Tensor product when few enough coordinates, scrambled Sobol QMC
        otherwise (weights then uniform).
        """
        comp = [i for i in range(1, self.n + 1) if i not in z]
        if not comp:
            return np.zeros((1, 0)), np.ones(1)
        n_cont = sum(1 for i in comp
                     if not isinstance(self.measure.components[i - 1], DiscreteUniform))
        if n_cont <= TENSOR_DIM_CAP:
            axes = [self.nodes[i - 1] for i in comp]
            wts = [self.weights[i - 1] for i in comp]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            wmesh = np.meshgrid(*wts, indexing="ij")
            w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
            return pts, w
        self._qmc_used = True
        rng_seed = substream(self.seed, "qmc", subset_label(z)).integers(2**31)
        sob = qmc.Sobol(d=len(comp), scramble=True, seed=int(rng_seed))
        u = sob.random_base2(self.qmc_log2)
        pts = _qmc_transform([self.measure.components[i - 1] for i in comp], u)
        return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])

    @property
    def mode(self):
        return "qmc" if self._qmc_used else "quadrature"

    # -- conditional means and effects at arbitrary points -------------------

    def conditional_mean(self, z, x):
        """w_z at points ``x`` of shape (N, |z|): E[g(X) | X_z = x_row].

        For the empty subset returns the overall mean as shape-() array.
        """
        z = tuple(z)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(z) == 0:
            return np.full(x.shape[0] if x.size else 1, self.mean())
        if x.shape[1] != len(z):
            raise ValueError(f"points have {x.shape[1]} columns for subset {z}")
        comp = [i for i in range(1, self.n + 1) if i not in z]
        cpts, cw = self._complement_rule(z)
        m = cpts.shape[0]
        out = np.empty(x.shape[0])
        # chunk the query points so the (chunk, m, n) block stays modest
        chunk = max(1, int(2**21 // max(m, 1)))
        zi = [i - 1 for i in z]
        ci = [i - 1 for i in comp]
        for a in range(0, x.shape[0], chunk):
            xa = x[a:a + chunk]
            block = np.empty((xa.shape[0], m, self.n))
            block[:, :, zi] = xa[:, None, :]
            if ci:
                block[:, :, ci] = cpts[None, :, :]
            vals = np.asarray(self.model(block.reshape(-1, self.n)), dtype=float)
            out[a:a + xa.shape[0]] = vals.reshape(xa.shape[0], m) @ cw
        return out

    def mean(self):
        if () not in self._w_cache:
            if self._full_grid_ok:
                g = self._full_grid_values()
                for w in reversed(self.weights):
                    g = g @ w
                self._w_cache[()] = float(g)
            else:
                pts, w = self._complement_rule(())
                vals = np.asarray(self.model(pts), dtype=float)
                self._w_cache[()] = float(vals @ w)
        return self._w_cache[()]

    def total_variance(self):
        if self._full_grid_ok:
            g2 = self._full_grid_values() ** 2
            for w in reversed(self.weights):
                g2 = g2 @ w
            return float(g2) - self.mean() ** 2
        pts, w = self._complement_rule(())
        vals = np.asarray(self.model(pts), dtype=float)
        return float(vals**2 @ w) - self.mean() ** 2

    def effect(self, z, x):
        """The ANOVA term g_z at arbitrary points ``x`` of shape (N, |z|).

        Built by the defining recursion; conditional means of sub-subsets are
        evaluated at the projected points and cached per call.
        """
        z = tuple(sorted(z))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(z) == 0:
            return np.full(x.shape[0] if x.size else 1, self.mean())
        effects = {(): np.full(x.shape[0], self.mean())}
        for v in sorted(_subsets_of(z), key=canonical_key):
            if not v:
                continue
            cols = [z.index(i) for i in v]
            w_v = self.conditional_mean(v, x[:, cols])
            g_v = w_v - sum(effects[u] for u in _subsets_of(v) if u != v)
            effects[v] = g_v
        return effects[z]

    # -- grid-based decomposition -------------------------------------------

    def _subgrid_shape(self, z):
        return tuple(self._sizes[i - 1] for i in z)

    def _w_on_subgrid(self, z):
        """Conditional mean w_z on the tensor grid of z's own quad nodes."""
        z = tuple(z)
        if z in self._w_cache:
            return self._w_cache[z]
        if len(z) == 0:
            return self.mean()
        if self._full_grid_ok:
            g = self._full_grid_values()
            keep = [i - 1 for i in z]
            out = g
            # contract the complement axes against their weights, back to front
            for ax in reversed(range(self.n)):
                if ax in keep:
                    continue
                out = np.tensordot(out, self.weights[ax], axes=([ax], [0]))
            w = out
        else:
            axes = [self.nodes[i - 1] for i in z]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            w = self.conditional_mean(z, pts).reshape(self._subgrid_shape(z))
        self._w_cache[z] = w
        return w

    def effect_on_subgrid(self, z):
        """g_z on the tensor grid of z's quad nodes (cached)."""
        z = tuple(z)
        if z in self._g_cache:
            return self._g_cache[z]
        if len(z) == 0:
            g = self.mean()
        else:
            g = np.array(self._w_on_subgrid(z), dtype=float, copy=True)
            for v in _subsets_of(z):
                if v == z:
                    continue
                gv = self.effect_on_subgrid(v)
                if not v:
                    g -= gv
                else:
                    # broadcast g_v across the axes of z \ v
                    shape = [s if i in v else 1
                             for i, s in zip(z, self._subgrid_shape(z))]
                    g -= np.asarray(gv).reshape(shape)
        self._g_cache[z] = g
        return g

    def term_variance(self, z):
        """V_z = integral of g_z^2 against the subset's marginal measure."""
        z = tuple(z)
        if len(z) == 0:
            return 0.0
        g2 = self.effect_on_subgrid(z) ** 2
        for k in reversed(range(len(z))):
            g2 = np.tensordot(g2, self.weights[z[k] - 1], axes=([k], [0]))
        return float(g2)

    def variance_decomposition(self, max_order=None):
        if max_order is None:
            max_order = self.n if self.n <= 4 else 2
        terms = {}
        for z in all_subsets(self.n, max_order):
            terms[z] = self.term_variance(z)
        total = self.total_variance()
        residual = total - sum(terms.values()) if max_order < self.n else 0.0
        return VarianceDecomposition(measure=self.measure.name or "measure",
                                     total=total, mean=self.mean(), terms=terms,
                                     residual=residual, n=self.n, mode=self.mode)

    # -- plotting-oriented output -------------------------------------------

    def effect_curve(self, z, npts=129):
        """g_z tabulated on an even grid over the measure's plotting range."""
        z = tuple(sorted(z))
        if not 1 <= len(z) <= 2:
            raise ValueError("effect curves are for singletons and pairs")
        grids = [np.linspace(*self.measure.components[i - 1].plot_range(), npts)
                 for i in z]
        if len(z) == 1:
            vals = self.effect(z, grids[0][:, None])
        else:
            mesh = np.meshgrid(*grids, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            vals = self.effect(z, pts).reshape(npts, npts)
        return EffectCurve(measure=self.measure.name or "measure",
                           subset=z, grids=grids, values=vals)

    def annihilation_defect(self, z):
        """max_i |int g_z dmu_i| over i in z — zero for an exact decomposition."""
        z = tuple(z)
        if not z:
            return 0.0
        g = self.effect_on_subgrid(z)
        worst = 0.0
        for k, i in enumerate(z):
            contracted = np.tensordot(g, self.weights[i - 1], axes=([k], [0]))
            worst = max(worst, float(np.max(np.abs(contracted))))
        return worst


def _subsets_of(z):
    """All subsets of tuple z (including empty and z itself), canonical order."""
    z = tuple(z)
    out = []
    for mask in range(1 << len(z)):
        out.append(tuple(z[k] for k in range(len(z)) if mask >> k & 1))
    out.sort(key=canonical_key)
    return out
