"""Statistical attribution of perceived complexity to metric vectors.

Single-response PLS fit by iterative latent components, bootstrap
coefficient significance, Cohen's drop-one f-squared effect sizes,
Pearson matrices, subgroup pipelines, and binned trend analysis.
Predictors are z-standardized, the response is centered only;
coefficients are reported in standardized-predictor space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class DegenerateColumn(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class SubgroupTooSmall(ValueError):
    pass


class InsufficientBins(ValueError):
    pass


MIN_ROW_MARGIN = 5  # rows must exceed columns by this much for modeling


@dataclass
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: list
    column_mean: np.ndarray
    column_sd: np.ndarray
    y_mean: float
    dropped_columns: list = field(default_factory=list)

    @classmethod
    def build(cls, raw_X: np.ndarray, y: np.ndarray, columns: list) -> "DesignMatrix":
        """Standardize columns and center y; degenerate columns are
        dropped with a warning rather than failing the fit."""
        raw_X = np.asarray(raw_X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if raw_X.ndim != 2 or raw_X.shape[0] != y.shape[0]:
            raise ValueError("X and y row counts must match")
        if not (np.all(np.isfinite(raw_X)) and np.all(np.isfinite(y))):
            raise ValueError("design matrix has missing or non-finite cells")
        sd = raw_X.std(axis=0, ddof=1)
        keep = sd > 0
        dropped = [c for c, k in zip(columns, keep) if not k]
        if dropped:
            warnings.warn(f"dropping zero-variance columns: {dropped}")
        X = raw_X[:, keep]
        kept_cols = [c for c, k in zip(columns, keep) if k]
        if X.shape[0] < X.shape[1] + MIN_ROW_MARGIN:
            raise SubgroupTooSmall(
                f"{X.shape[0]} rows is too few for {X.shape[1]} predictors"
            )
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        y_mean = float(y.mean())
        return cls(
            X=(X - mean) / sd,
            y=y - y_mean,
            columns=kept_cols,
            column_mean=mean,
            column_sd=sd,
            y_mean=y_mean,
            dropped_columns=dropped,
        )

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    def subset(self, row_index: np.ndarray) -> "DesignMatrix":
        """Re-standardized design over a row subset (used by bootstrap)."""
        raw = self.X[row_index] * self.column_sd + self.column_mean
        return DesignMatrix.build(raw, self.y[row_index] + self.y_mean, self.columns)

    def without_column(self, column: str) -> "DesignMatrix":
        j = self.columns.index(column)
        keep = [i for i in range(self.n_cols) if i != j]
        raw = self.X[:, keep] * self.column_sd[keep] + self.column_mean[keep]
        return DesignMatrix.build(raw, self.y + self.y_mean, [self.columns[i] for i in keep])


@dataclass
class PLSModel:
    n_components: int
    weights: np.ndarray       # (p, A)
    loadings: np.ndarray      # (p, A)
    scores: np.ndarray        # (n, A)
    y_loadings: np.ndarray    # (A,)
    coefficients: np.ndarray  # (p,) in standardized-X space
    r_squared: float
    columns: list

    def coefficient(self, column: str) -> float:
        return float(self.coefficients[self.columns.index(column)])


@dataclass
class BootstrapReport:
    columns: list
    coefficient_samples: np.ndarray  # (B_ok, p)
    standard_errors: np.ndarray
    p_values: np.ndarray
    significant: np.ndarray
    n_resamples: int
    n_skipped: int

    def p_value(self, column: str) -> float:
        return float(self.p_values[self.columns.index(column)])

    def is_significant(self, column: str) -> bool:
        return bool(self.significant[self.columns.index(column)])


@dataclass
class EffectSizeReport:
    columns: list
    f_squared: np.ndarray
    r_squared_full: float
    r_squared_dropped: np.ndarray

    def f2(self, column: str) -> float:
        return float(self.f_squared[self.columns.index(column)])


def pearson_matrix(X: np.ndarray, columns: list) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Pearson r and two-sided p-values for the given columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    p = X.shape[1]
    if np.any(X.std(axis=0) == 0):
        bad = [columns[i] for i in range(p) if X[:, i].std() == 0]
        raise DegenerateColumn(f"constant columns: {bad}")
    r = np.eye(p)
    pv = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            ri, pij = stats.pearsonr(X[:, i], X[:, j])
            r[i, j] = r[j, i] = ri
            pv[i, j] = pv[j, i] = pij
    return r, pv


def fit_pls(dm: DesignMatrix, n_components: int = 5) -> PLSModel:
    """Iterative single-response latent-component fit.

    Per component: weight = X'y normalized, score t = Xw, X-loading
    p = X't/t't, y-loading q = y't/t't, then deflate X and y. The final
    coefficient vector is composed back into standardized-input space.
    """
    A = n_components
    if A < 1:
        raise ValueError("need at least one component")
    X = dm.X.copy()
    y = dm.y.copy()
    n, p = X.shape
    if A > min(n - 1, p):
        raise RankDeficient(f"cannot extract {A} components from {n}x{p}")
    W = np.zeros((p, A))
    P = np.zeros((p, A))
    T = np.zeros((n, A))
    q = np.zeros(A)
    for a in range(A):
        w = X.T @ y
        norm_w = np.linalg.norm(w)
        if norm_w < 1e-12:
            raise RankDeficient(
                f"residual covariance vanished at component {a + 1}"
            )
        w /= norm_w
        t = X @ w
        tt = float(t @ t)
        if tt < 1e-12:
            raise RankDeficient(f"degenerate score vector at component {a + 1}")
        p_a = X.T @ t / tt
        q_a = float(y @ t / tt)
        X = X - np.outer(t, p_a)
        y = y - q_a * t
        W[:, a] = w
        P[:, a] = p_a
        T[:, a] = t
        q[a] = q_a
    coefficients = W @ np.linalg.solve(P.T @ W, q)
    fitted = dm.X @ coefficients
    ss_res = float(np.sum((dm.y - fitted) ** 2))
    ss_tot = float(np.sum(dm.y**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return PLSModel(
        n_components=A,
        weights=W,
        loadings=P,
        scores=T,
        y_loadings=q,
        coefficients=coefficients,
        r_squared=r2,
        columns=list(dm.columns),
    )


def bootstrap_coefficients(
    dm: DesignMatrix,
    n_components: int = 5,
    n_resamples: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> BootstrapReport:
    """Row-resampled refits; p-value is the two-sided sign fraction
    2 * min(frac(coef <= 0), frac(coef >= 0)), clamped to [1/B, 1]."""
    fit_pls(dm, n_components)  # the full fit must succeed first
    rng = np.random.default_rng(seed)
    n = dm.n_rows
    samples = []
    skipped = 0
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        try:
            sub = dm.subset(idx)
            if sub.columns != dm.columns:
                raise RankDeficient("resample lost a column")
            model = fit_pls(sub, n_components)
            samples.append(model.coefficients)
        except (RankDeficient, SubgroupTooSmall):
            skipped += 1
            if skipped > 0.05 * n_resamples:
                raise RankDeficient(
                    f"more than 5% of resamples failed ({skipped})"
                )
    coefs = np.array(samples)
    b = coefs.shape[0]
    frac_le = (coefs <= 0).mean(axis=0)
    frac_ge = (coefs >= 0).mean(axis=0)
    p_values = np.clip(2 * np.minimum(frac_le, frac_ge), 1.0 / n_resamples, 1.0)
    return BootstrapReport(
        columns=list(dm.columns),
        coefficient_samples=coefs,
        standard_errors=coefs.std(axis=0, ddof=1),
        p_values=p_values,
        significant=p_values < alpha,
        n_resamples=b,
        n_skipped=skipped,
    )


def effect_sizes(dm: DesignMatrix, n_components: int = 5) -> EffectSizeReport:
    """Cohen's drop-one f-squared per column.

    f2 = (R2_full - R2_drop) / (1 - R2_full); drop-one refits reuse the
    same component count, capped at the reduced rank. Small negative
    values from refit noise are reported as-is.
    """
    full = fit_pls(dm, n_components)
    r2_drop = np.zeros(dm.n_cols)
    for j, col in enumerate(dm.columns):
        reduced = dm.without_column(col)
        a = min(n_components, reduced.n_cols)
        r2_drop[j] = fit_pls(reduced, a).r_squared
    denom = 1.0 - full.r_squared
    if denom <= 0:
        denom = np.finfo(float).eps
    return EffectSizeReport(
        columns=list(dm.columns),
        f_squared=(full.r_squared - r2_drop) / denom,
        r_squared_full=full.r_squared,
        r_squared_dropped=r2_drop,
    )


@dataclass
class SubgroupResult:
    tag: str
    n_rows: int
    model: PLSModel
    bootstrap: BootstrapReport
    effects: EffectSizeReport


def subgroup_analysis(
    raw_X: np.ndarray,
    y: np.ndarray,
    columns: list,
    tags: list,
    group_tags: list,
    exclude: tuple = (),
    n_components: int = 5,
    n_resamples: int = 1000,
    seed: int = 0,
) -> dict:
    """Full fit + bootstrap + effect sizes per tag-filtered subset."""
    raw_X = np.asarray(raw_X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep_cols = [i for i, c in enumerate(columns) if c not in exclude]
    kept_names = [columns[i] for i in keep_cols]
    results = {}
    for tag in group_tags:
        rows = np.array([tag in t for t in tags])
        if rows.sum() < len(keep_cols) + MIN_ROW_MARGIN:
            raise SubgroupTooSmall(
                f"subgroup '{tag}' has only {int(rows.sum())} rows"
            )
        dm = DesignMatrix.build(raw_X[np.ix_(rows, keep_cols)], y[rows], kept_names)
        a = min(n_components, dm.n_cols)
        results[tag] = SubgroupResult(
            tag=tag,
            n_rows=int(rows.sum()),
            model=fit_pls(dm, a),
            bootstrap=bootstrap_coefficients(dm, a, n_resamples, seed),
            effects=effect_sizes(dm, a),
        )
    return results


@dataclass
class TrendReport:
    bin_edges: np.ndarray
    bin_means: np.ndarray
    bin_ci95: np.ndarray
    bin_counts: np.ndarray
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int


def binned_trend(values: np.ndarray, y: np.ndarray, n_bins: int = 7) -> TrendReport:
    """Per-bin mean response over equal-width bins, with a one-way ANOVA.

    Empty bins are dropped before the F-test; degrees of freedom reflect
    the non-empty bins.
    """
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if n_bins < 2:
        raise InsufficientBins("need at least 2 bins")
    edges = np.linspace(values.min(), values.max(), n_bins + 1)
    which = np.clip(np.digitize(values, edges[1:-1]), 0, n_bins - 1)
    groups = [y[which == b] for b in range(n_bins)]
    non_empty = [g for g in groups if g.size > 0]
    if len(non_empty) < 2:
        raise InsufficientBins("fewer than 2 non-empty bins")
    means = np.array([g.mean() if g.size else np.nan for g in groups])
    ci = np.array(
        [1.96 * g.std(ddof=1) / np.sqrt(g.size) if g.size > 1 else np.nan for g in groups]
    )
    counts = np.array([g.size for g in groups])
    if all(np.allclose(g, non_empty[0].mean()) for g in non_empty):
        f_stat, p = 0.0, 1.0
    else:
        f_stat, p = stats.f_oneway(*non_empty)
    return TrendReport(
        bin_edges=edges,
        bin_means=means,
        bin_ci95=ci,
        bin_counts=counts,
        f_statistic=float(f_stat),
        p_value=float(p),
        df_between=len(non_empty) - 1,
        df_within=int(sum(g.size for g in non_empty)) - len(non_empty),
    )
