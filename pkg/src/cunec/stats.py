"""Shadowing statistics, correlation-distance estimation and path-loss fits."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError, RankDeficiencyError

DCORR_FLOOR_M = 0.1
# Fit window: lags until the correlation first drops to 1/e.  Lower
# thresholds let noisy tail lags flatten the fitted slope on short series.
RHO_THRESHOLD = float(np.exp(-1.0))
MIN_LINE_SAMPLES = 10


class DistanceMetric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"


@dataclass(frozen=True)
class FitResult:
    alpha_db: float
    beta: float
    sigma_resid_db: float
    n_points: int
    distance_metric: DistanceMetric = DistanceMetric.MANHATTAN


@dataclass
class ShadowingStats:
    sigma_total_db: float
    per_row_sigma_db: np.ndarray
    per_col_sigma_db: np.ndarray
    per_row_dcorr_m: np.ndarray = field(default_factory=lambda: np.array([]))
    per_col_dcorr_m: np.ndarray = field(default_factory=lambda: np.array([]))


def estimate_sigmas(values_db) -> ShadowingStats:
    """Total, per-row (UE) and per-column (AP) population stds of a field."""
    S = np.asarray(getattr(values_db, "values_db", values_db), dtype=float)
    if S.ndim != 2 or min(S.shape) < 2:
        raise InsufficientDataError(f"need at least a 2x2 field, got shape {S.shape}")
    return ShadowingStats(float(S.std()), S.std(axis=1), S.std(axis=0))


def autocorrelation(samples, positions=None, demean: bool = False):
    """Normalized biased autocorrelation versus lag distance.

    Samples are binned onto a regular grid with the median position
    spacing; empty bins are skipped.  Shadowing is zero mean by
    construction, so by default the sample mean is not removed.
    Returns ``(lags_m, rho)`` with ``rho[0] == 1``.
    """
    x = np.asarray(samples, dtype=float)
    if positions is None:
        positions = np.arange(x.size, dtype=float)
    t = np.asarray(positions, dtype=float)
    if t.shape != x.shape or x.ndim != 1:
        raise InvalidArgumentError("samples and positions must be 1-D of equal length")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("positions must be strictly increasing")
    if demean:
        x = x - x.mean()
    step = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    idx = np.rint((t - t[0]) / step).astype(int)
    n = idx[-1] + 1
    vals = np.zeros(n)
    mask = np.zeros(n)
    np.add.at(vals, idx, x)
    np.add.at(mask, idx, 1.0)
    vals = np.where(mask > 0, vals / np.maximum(mask, 1.0), 0.0)
    mask = (mask > 0).astype(float)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    fv, fm = np.fft.rfft(vals, nfft), np.fft.rfft(mask, nfft)
    num = np.fft.irfft(fv * np.conj(fv), nfft)[:n]
    cnt = np.rint(np.fft.irfft(fm * np.conj(fm), nfft)[:n])
    keep = cnt > 0
    if num[0] <= 0:
        return np.arange(n)[keep] * step, np.where(np.arange(n)[keep] == 0, 1.0, 0.0)
    # biased: every lag normalized by the same total count
    rho = num / num[0]
    return np.arange(n)[keep] * step, rho[keep]


def fit_corr_distance(lags, rho, threshold: float = RHO_THRESHOLD, floor: float = DCORR_FLOOR_M) -> float:
    """Least-squares slope of ``log rho = -d / d_corr`` through the origin.

    Uses the contiguous run of positive lags whose correlation exceeds
    ``threshold``; returns ``floor`` when there is none.
    """
    lags = np.asarray(lags, dtype=float)
    rho = np.asarray(rho, dtype=float)
    pos = lags > 0
    lags, rho = lags[pos], rho[pos]
    order = np.argsort(lags)
    lags, rho = lags[order], rho[order]
    below = np.nonzero(~(rho > threshold))[0]
    stop = below[0] if below.size else rho.size
    if stop == 0:
        return floor
    d, y = lags[:stop], np.log(rho[:stop])
    slope = np.dot(d, y) / np.dot(d, d)
    if slope >= 0:
        return floor
    return max(float(-1.0 / slope), floor)


def estimate_corr_distance(samples, positions=None, threshold: float = RHO_THRESHOLD,
                           floor: float = DCORR_FLOOR_M, demean: bool = False) -> float:
    """Correlation distance of samples along a line (positions in meters)."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_LINE_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_LINE_SAMPLES} samples, got {x.size}")
    lags, rho = autocorrelation(x, positions, demean=demean)
    return fit_corr_distance(lags, rho, threshold, floor)


def estimate_field_stats(values_db, ue_positions=None, ap_positions=None, **kw) -> ShadowingStats:
    """Stds plus correlation distances along every row and column.

    Row ``i`` runs along the AP axis (its d_corr is an AP-side estimate);
    column ``j`` runs along the UE axis.  Positions are along-line
    coordinates; defaults are unit spacing.
    """
    S = np.asarray(getattr(values_db, "values_db", values_db), dtype=float)
    st = estimate_sigmas(S)
    M, N = S.shape
    tu = np.arange(M, dtype=float) if ue_positions is None else np.asarray(ue_positions, dtype=float)
    ta = np.arange(N, dtype=float) if ap_positions is None else np.asarray(ap_positions, dtype=float)
    if N >= MIN_LINE_SAMPLES:
        st.per_row_dcorr_m = np.array([estimate_corr_distance(S[i], ta, **kw) for i in range(M)])
    if M >= MIN_LINE_SAMPLES:
        st.per_col_dcorr_m = np.array([estimate_corr_distance(S[:, j], tu, **kw) for j in range(N)])
    return st


def fit_linear_pl(pl_db, distance_m, metric=DistanceMetric.MANHATTAN,
                  fix_alpha_to_zero: bool = False) -> FitResult:
    """OLS of PL on ``10 log10(d)``, optionally without intercept."""
    y = np.asarray(pl_db, dtype=float).ravel()
    d = np.asarray(distance_m, dtype=float).ravel()
    if y.shape != d.shape:
        raise InvalidArgumentError("pl and distance lengths differ")
    if y.size < 2:
        raise InsufficientDataError("need at least two points to fit")
    if np.any(d < 1.0):
        raise InvalidArgumentError("distances must be at least 1 m")
    x = 10.0 * np.log10(d)
    if fix_alpha_to_zero:
        if not np.any(x > 0):
            raise RankDeficiencyError("all distances are 1 m; slope is undetermined")
        alpha, beta = 0.0, float(np.dot(x, y) / np.dot(x, x))
    else:
        if np.ptp(x) == 0:
            raise RankDeficiencyError("all distances are equal; slope is undetermined")
        beta, alpha = np.polyfit(x, y, 1)
        alpha, beta = float(alpha), float(beta)
    resid = y - alpha - beta * x
    return FitResult(alpha, beta, float(resid.std()), int(y.size), DistanceMetric(metric))


def rmse(model_pl, reference_pl) -> float:
    a = np.asarray(model_pl, dtype=float)
    b = np.asarray(reference_pl, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise InvalidArgumentError("rmse needs two non-empty vectors of equal length")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# Keys of the five shadowing-generation metrics, in report order.
METRICS = ("sigma_total_db", "sigma_row_db", "sigma_col_db", "dcorr_ue_m", "dcorr_ap_m")


def field_metrics(values_db, ue_positions=None, ap_positions=None) -> dict[str, float]:
    """The five summary metrics of one field.

    ``dcorr_ue_m`` is the mean over columns (UE axis), ``dcorr_ap_m`` the
    mean over rows (AP axis).
    """
    st = estimate_field_stats(values_db, ue_positions, ap_positions)
    return {
        "sigma_total_db": st.sigma_total_db,
        "sigma_row_db": float(np.mean(st.per_row_sigma_db)),
        "sigma_col_db": float(np.mean(st.per_col_sigma_db)),
        "dcorr_ue_m": float(np.mean(st.per_col_dcorr_m)) if st.per_col_dcorr_m.size else float("nan"),
        "dcorr_ap_m": float(np.mean(st.per_row_dcorr_m)) if st.per_row_dcorr_m.size else float("nan"),
    }


def validate_generation(fields, targets: Mapping[str, float] | None = None,
                        ue_positions=None, ap_positions=None) -> list[dict]:
    """Ensemble-mean field metrics next to targets and relative errors.

    ``fields`` is one field or a sequence of fields.  Rows without a target
    report ``None`` for the target and the relative error.
    """
    if isinstance(fields, np.ndarray) and fields.ndim == 2 or hasattr(fields, "values_db"):
        fields = [fields]
    per = [field_metrics(f, ue_positions, ap_positions) for f in fields]
    targets = targets or {}
    rows = []
    for key in METRICS:
        value = float(np.mean([p[key] for p in per]))
        tgt = targets.get(key)
        rel = None if tgt is None else (value - tgt) / tgt if tgt != 0 else None
        rows.append({"metric": key, "value": value, "target": tgt, "rel_error": rel})
    return rows


def format_report(rows: Sequence[dict]) -> str:
    lines = [f"{'metric':<16}{'generated':>12}{'target':>12}{'rel.err':>10}"]
    for r in rows:
        tgt = "" if r["target"] is None else f"{r['target']:.4g}"
        rel = "" if r["rel_error"] is None else f"{100 * r['rel_error']:+.1f}%"
        lines.append(f"{r['metric']:<16}{r['value']:>12.4g}{tgt:>12}{rel:>10}")
    return "\n".join(lines)
