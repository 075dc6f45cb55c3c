"""Monte Carlo estimators of first-order and total sensitivity indices.

Four routes, in decreasing order of access to the model:

* brute force — a double loop directly implementing the defining variance of
  a conditional mean (expensive; mostly a trust anchor);
* pick-freeze — paired designs, one model call per design row;
* given data — no fresh model calls: bin an existing evaluated sample along
  one input and compare between-bin to total variance;
* reweighting — reuse a sample drawn under one measure for estimates under
  another via self-normalised density ratios (the cheap way to ask "would
  the ranking change under that other candidate distribution?").

All estimators take seeds, not generators, so results are reproducible and
independent of call order.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .measures import substream


class SampleFormatError(ValueError):
    """An evaluated-sample file does not follow the expected layout."""


class EstimationError(ArithmeticError):
    """The requested estimate is not computable from the given data."""


# ---------------------------------------------------------------------------
# evaluated samples and their files
# ---------------------------------------------------------------------------

@dataclass
class EvaluatedSample:
    """Model evaluations y = g(x) at iid draws x from one measure."""

    x: np.ndarray
    y: np.ndarray
    measure_name: str = ""
    seed: int = None
    measure: object = None          # the ProductMeasure, when known

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.shape[0] != self.y.size:
            raise SampleFormatError(f"{self.x.shape[0]} points but {self.y.size} values")

    @property
    def n(self):
        return self.x.shape[1]

    def __len__(self):
        return self.y.size


@dataclass
class WeightedSample:
    """An evaluated sample plus importance weights targeting another measure."""

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    base_name: str = ""
    target_name: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != np.asarray(self.y).size:
            raise SampleFormatError("one weight per evaluation required")
        if np.any(self.weights < 0):
            raise EstimationError("negative importance weight")

    @property
    def ess(self):
        """Kish effective sample size (sum w)^2 / sum w^2."""
        s = self.weights.sum()
        if s <= 0:
            return 0.0
        return float(s * s / np.dot(self.weights, self.weights))


def generate_sample(model, measure, count, seed):
    x = measure.sample(count, seed=seed)
    y = np.asarray(model(x), dtype=float)
    return EvaluatedSample(x=x, y=y, measure_name=measure.name or "",
                           seed=seed, measure=measure)


def write_sample(sample, path):
    """CSV with header x1..xn,g plus a JSON sidecar <path>.meta.json."""
    path = str(path)
    header = [f"x{i}" for i in range(1, sample.n + 1)] + ["g"]
    with open(path, "w", newline="", encoding="utf8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row, val in zip(sample.x, sample.y):
            wr.writerow([f"{v:.17g}" for v in row] + [f"{val:.17g}"])
    meta = {"measure": sample.measure_name, "seed": sample.seed,
            "count": len(sample), "n": sample.n}
    with open(path + ".meta.json", "w", encoding="utf8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_sample(path, measure=None):
    """Read a sample CSV (and its sidecar, if present) back in.

    ``measure`` optionally attaches the actual measure object, which is
    required later for reweighting.
    """
    path = str(path)
    with open(path, "r", encoding="utf8") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise SampleFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "g" or \
                header[:-1] != [f"x{i}" for i in range(1, len(header))]:
            raise SampleFormatError(f"{path}: header must be x1,..,xn,g "
                                    f"(got {','.join(header)})")
        rows = []
        for k, row in enumerate(rd):
            if not row:
                continue
            if len(row) != len(header):
                raise SampleFormatError(f"{path}: row {k + 2} has {len(row)} "
                                        f"fields, expected {len(header)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SampleFormatError(f"{path}: row {k + 2}: {exc}") from None
    if not rows:
        raise SampleFormatError(f"{path}: no data rows")
    data = np.asarray(rows)
    name, seed = "", None
    try:
        with open(path + ".meta.json", "r", encoding="utf8") as fh:
            meta = json.load(fh)
        name = meta.get("measure", "")
        seed = meta.get("seed")
    except FileNotFoundError:
        pass
    except (OSError, json.JSONDecodeError) as exc:
        raise SampleFormatError(f"{path}.meta.json: {exc}") from None
    return EvaluatedSample(x=data[:, :-1], y=data[:, -1], measure_name=name,
                           seed=seed, measure=measure)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

CLAMP_HI = 1.05


@dataclass
class SobolEstimate:
    """Estimated indices with standard errors where the method provides them.

    ``s``/``st`` hold the raw estimates (possibly slightly negative or above
    one, as MC noise allows); ``clamped_s``/``clamped_st`` give the views
    meant for reports, clipped to [0, 1.05].
    """

    s: np.ndarray
    st: np.ndarray = None
    s_se: np.ndarray = None
    st_se: np.ndarray = None
    method: str = ""
    n_evals: int = 0

    @property
    def clamped_s(self):
        return np.clip(self.s, 0.0, CLAMP_HI)

    @property
    def clamped_st(self):
        return None if self.st is None else np.clip(self.st, 0.0, CLAMP_HI)


def brute_force_first_order(model, measure, n_outer=500, n_inner=500, seed=0):
    """Nested-loop estimate of S_i: variance of conditional means, directly.

    For each input, outer draws fix x_i while an independent inner sample
    averages over the rest.  The naive between-outer variance is biased up
    by the inner noise, so the standard correction (mean within-variance /
    n_inner) is subtracted.
    """
    if n_outer < 2 or n_inner < 2:
        raise ValueError("need at least 2 outer and 2 inner draws")
    n = measure.n
    s = np.empty(n)
    se = np.empty(n)
    all_vals = []
    cond_means = []
    for i in range(n):
        rng = substream(seed, "bruteforce", measure.name or "measure", i)
        xi = measure.components[i].sample(rng, n_outer)
        block = measure.sample(n_outer * n_inner, rng=rng).reshape(n_outer, n_inner, n)
        block[:, :, i] = xi[:, None]
        vals = np.asarray(model(block.reshape(-1, n)), dtype=float)
        vals = vals.reshape(n_outer, n_inner)
        m = vals.mean(axis=1)
        within = vals.var(axis=1, ddof=1)
        cond_means.append((m, within))
        all_vals.append(vals.ravel())
    pooled = np.concatenate(all_vals)
    v_hat = pooled.var(ddof=1)
    if v_hat <= 0:
        raise EstimationError("sample variance is zero; indices undefined")
    for i, (m, within) in enumerate(cond_means):
        v_between = m.var(ddof=1) - within.mean() / n_inner
        s[i] = v_between / v_hat
        centred = m - m.mean()
        m4 = np.mean(centred**4)
        se[i] = np.sqrt(max(m4 - m.var(ddof=0) ** 2, 0.0) / n_outer) / v_hat
    return SobolEstimate(s=s, s_se=se, method="bruteforce",
                         n_evals=n * n_outer * n_inner)


def pick_freeze_indices(model, measure, n=2**14, seed=0):
    """Paired-design estimates of S_i and total-order ST_i.

    Uses the covariance form for S_i, mean of f(B).(f(AB_i) - f(A)), and the
    squared-difference form for ST_i, mean of (f(A) - f(AB_i))^2 / 2, both
    normalised by the pooled sample variance.  Costs n*(d+2) model calls for
    d inputs.
    """
    if n < 16:
        raise ValueError("pick-freeze needs at least 16 design rows")
    d = measure.n
    a = measure.sample(n, rng=substream(seed, "pickfreeze", measure.name or "measure", "A"))
    b = measure.sample(n, rng=substream(seed, "pickfreeze", measure.name or "measure", "B"))
    fa = np.asarray(model(a), dtype=float)
    fb = np.asarray(model(b), dtype=float)
    v_hat = np.concatenate([fa, fb]).var(ddof=1)
    if v_hat <= 0:
        raise EstimationError("sample variance is zero; indices undefined")
    s = np.empty(d)
    st = np.empty(d)
    s_se = np.empty(d)
    st_se = np.empty(d)
    for i in range(d):
        ab = a.copy()
        ab[:, i] = b[:, i]
        fab = np.asarray(model(ab), dtype=float)
        u = fb * (fab - fa)
        t = 0.5 * (fa - fab) ** 2
        s[i] = u.mean() / v_hat
        st[i] = t.mean() / v_hat
        s_se[i] = u.std(ddof=1) / np.sqrt(n) / v_hat
        st_se[i] = t.std(ddof=1) / np.sqrt(n) / v_hat
    return SobolEstimate(s=s, st=st, s_se=s_se, st_se=st_se,
                         method="pickfreeze", n_evals=n * (d + 2))


def given_data_first_order(sample, i, bins=None):
    """First-order index of input ``i`` (1-based) from an existing sample.

    Points are sorted along the input and split into near-equal-count
    quantile bins; S_i is the (weighted) between-bin variance of the bin
    means over the (weighted) total variance.  Works for plain and weighted
    samples; with all weights equal it reduces to the ordinary estimator.

    Default bin count is floor(sqrt(N)) — the usual bias/variance balance.
    For a weighted sample the balance acts on the effective sample size, so
    there the default is floor(sqrt(ESS)) (skewed weights inflate the
    between-bin noise exactly as a smaller sample would).
    """
    if isinstance(sample, WeightedSample):
        x, y, w = sample.x, sample.y, sample.weights
        n_eff = sample.ess
    else:
        x, y, w = sample.x, sample.y, np.ones(len(sample.y))
        n_eff = len(sample.y)
    x = np.atleast_2d(x)
    npts = x.shape[0]
    if not 1 <= i <= x.shape[1]:
        raise ValueError(f"input index {i} out of range 1..{x.shape[1]}")
    if bins is None:
        bins = max(2, min(int(np.sqrt(n_eff)), npts // 5))
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if npts / bins < 5:
        raise ValueError(f"{bins} bins for {npts} points leaves fewer than "
                         "5 points per bin")
    wsum = w.sum()
    if wsum <= 0:
        raise EstimationError("weights sum to zero")
    ybar = np.dot(w, y) / wsum
    v_hat = np.dot(w, (y - ybar) ** 2) / wsum
    if v_hat <= 0:
        raise EstimationError("sample variance is zero; indices undefined")
    col = x[:, i - 1]
    if np.min(col) == np.max(col):
        raise EstimationError(f"degenerate binning: input {i} takes a "
                              "single value")
    order = np.argsort(col, kind="stable")
    between = 0.0
    for idx in np.array_split(order, bins):
        wb = w[idx].sum()
        if wb <= 0:
            continue
        mb = np.dot(w[idx], y[idx]) / wb
        between += wb * (mb - ybar) ** 2
    return float(between / wsum / v_hat)


def given_data_indices(sample, bins=None):
    """All first-order indices of a sample via given_data_first_order."""
    d = np.atleast_2d(sample.x).shape[1]
    s = np.array([given_data_first_order(sample, i, bins) for i in range(1, d + 1)])
    method = "reweighted" if isinstance(sample, WeightedSample) else "givendata"
    return SobolEstimate(s=s, method=method, n_evals=0)


# ---------------------------------------------------------------------------
# reweighting
# ---------------------------------------------------------------------------

DEFAULT_ESS_FLOOR = 50.0


def reweight(sample, target, ess_floor=DEFAULT_ESS_FLOOR):
    """Importance weights turning a sample under one measure into estimates
    under ``target``: w = f_target(x) / f_base(x), self-normalised downstream.

    Raises when the base measure is unknown or assigns zero density to an
    observed point; warns when the effective sample size falls below
    ``ess_floor`` (estimates are then dominated by a handful of points).
    """
    if sample.measure is None:
        raise EstimationError("reweighting needs the sample's base measure; "
                              "attach one via read_sample(..., measure=...)")
    base = sample.measure.density(sample.x)
    if np.any(base <= 0):
        raise EstimationError("base measure has zero density at an observed "
                              "point; importance weights are undefined")
    w = target.density(sample.x) / base
    if w.sum() <= 0:
        raise EstimationError(f"target {target.name or 'measure'!r} puts no "
                              "mass on the sampled region")
    ws = WeightedSample(x=sample.x, y=sample.y, weights=w,
                        base_name=sample.measure_name,
                        target_name=target.name or "")
    if ws.ess < ess_floor:
        warnings.warn(f"effective sample size {ws.ess:.1f} below {ess_floor:g}; "
                      f"reweighted estimates toward {ws.target_name!r} are "
                      "unreliable", stacklevel=2)
    return ws


def weighted_moments(values, weights):
    """Self-normalised mean and variance; equals the ordinary (population)
    moments when all weights coincide."""
    w = np.asarray(weights, dtype=float)
    y = np.asarray(values, dtype=float)
    s = w.sum()
    if s <= 0:
        raise EstimationError("weights sum to zero")
    m = np.dot(w, y) / s
    return float(m), float(np.dot(w, (y - m) ** 2) / s)
