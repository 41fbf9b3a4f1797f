"""Spatially correlated shadowing over UE x AP link grids.

Links are indexed column-major: link ``(i, j)`` (UE ``i``, AP ``j``) sits at
position ``i + j*M`` of the vectorized field, matching ``reshape(order="F")``.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (DegenerateFieldError, InvalidArgumentError, NumericalFailureError,
                     ResourceLimitError)
from .params import nearest_spd

DEFAULT_MAX_LINKS = 2000
JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
MIN_EMPIRICAL_AXIS = 10  # shorter axes are scaled analytically, not by sample std
_COLLINEAR_TOL = 1e-6


@dataclass
class ShadowingField:
    values_db: np.ndarray
    ue_positions: np.ndarray
    ap_positions: np.ndarray
    d_corr_ue_m: float
    d_corr_ap_m: float
    target_sigma_ue_db: float
    target_sigma_ap_db: float

    def __post_init__(self):
        self.values_db = np.asarray(self.values_db, dtype=float)
        self.ue_positions = _points(self.ue_positions)
        self.ap_positions = _points(self.ap_positions)
        if self.values_db.shape != (len(self.ue_positions), len(self.ap_positions)):
            raise InvalidArgumentError(
                f"field shape {self.values_db.shape} does not match "
                f"{len(self.ue_positions)} UEs x {len(self.ap_positions)} APs")
        if not np.isfinite(self.values_db).all():
            raise NumericalFailureError("shadowing field contains non-finite entries")


def _points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or len(p) == 0:
        raise InvalidArgumentError("positions must be a non-empty (n, dim) array")
    return p


def _check_dcorr(*ds):
    for d in ds:
        if not d > 0:
            raise InvalidArgumentError(f"correlation distance must be positive, got {d}")


def joint_covariance(ue_positions, ap_positions, d_corr_ue: float, d_corr_ap: float,
                     max_links: int = DEFAULT_MAX_LINKS) -> np.ndarray:
    """Anisotropic exponential correlation between all UE x AP links."""
    _check_dcorr(d_corr_ue, d_corr_ap)
    ue, ap = _points(ue_positions), _points(ap_positions)
    M, N = len(ue), len(ap)
    if M * N > max_links:
        raise ResourceLimitError(
            f"{M}x{N} = {M * N} links exceeds the dense-covariance cap of {max_links}; "
            "split the links into smaller correlation groups or raise max_links")
    du2 = (cdist(ue, ue) / d_corr_ue) ** 2
    da2 = (cdist(ap, ap) / d_corr_ap) ** 2
    q = np.kron(da2, np.ones((M, M))) + np.kron(np.ones((N, N)), du2)
    return np.exp(-np.sqrt(q))


def cov_factor(cov) -> np.ndarray:
    """``L`` with ``L @ L.T ~= cov``: Cholesky with escalating jitter, then eigen."""
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(len(cov))
    for jit in JITTERS:
        try:
            return np.linalg.cholesky(cov + jit * eye)
        except np.linalg.LinAlgError:
            continue
    try:
        w, V = np.linalg.eigh(nearest_spd(cov, eps=0.0))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"covariance factorization failed: {exc}") from exc
    L = V * np.sqrt(np.clip(w, 0.0, None))
    if not np.isfinite(L).all():
        raise NumericalFailureError("covariance factorization produced non-finite values")
    return L


def sample_field(cov, M: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean Gaussian field with the given link covariance, as M x N."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (M * N, M * N):
        raise InvalidArgumentError(f"covariance shape {cov.shape} does not match {M}x{N} links")
    L = cov_factor(cov)
    return (L @ rng.standard_normal(M * N)).reshape((M, N), order="F")


def uniform_spacing(positions, rtol: float = 1e-9) -> float | None:
    """Step length if ``positions`` are equally spaced along a straight line, else None."""
    p = _points(positions)
    if len(p) == 1:
        return 1.0
    steps = np.diff(p, axis=0)
    h = np.linalg.norm(steps[0])
    if h == 0 or not np.allclose(steps, steps[0], rtol=0, atol=rtol * max(h, 1.0)):
        return None
    return float(h)


def lattice_field(M: int, N: int, step_ue: float, step_ap: float, d_corr_ue: float,
                  d_corr_ap: float, rng: np.random.Generator, max_pad: int = 8) -> np.ndarray:
    """Unit-variance field on a uniform UE x AP lattice by circulant embedding.

    Exact for the anisotropic exponential correlation; needs no dense
    covariance, so it has no link cap.
    """
    _check_dcorr(d_corr_ue, d_corr_ap)
    pad = 1
    while True:
        P, Q = 2 * M * pad, 2 * N * pad
        lag_u = np.minimum(np.arange(P), P - np.arange(P)) * step_ue / d_corr_ue
        lag_a = np.minimum(np.arange(Q), Q - np.arange(Q)) * step_ap / d_corr_ap
        c = np.exp(-np.hypot(lag_u[:, None], lag_a[None, :]))
        lam = np.fft.fft2(c).real
        if lam.min() >= -1e-10 * lam.max() or pad >= max_pad:
            break
        pad *= 2
    if lam.min() < -1e-6 * lam.max():
        raise NumericalFailureError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    z = rng.standard_normal((P, Q)) + 1j * rng.standard_normal((P, Q))
    y = np.fft.fft2(np.sqrt(lam / (P * Q)) * z)
    return np.ascontiguousarray(y.real[:M, :N])


def scale_field(raw, target_sigma_ue_db: float, target_sigma_ap_db: float,
                split: str = "sqrt") -> np.ndarray:
    """Rescale a unit field towards target row (UE) and column (AP) stds.

    Row ``i`` collects UE ``i`` over all APs, column ``j`` AP ``j`` over all
    UEs; both factors come from the stds (population convention) of the
    unscaled ``raw``.  With ``split="sqrt"`` each entry is multiplied by
    ``sqrt(target_ue/row_std_i) * sqrt(target_ap/col_std_j)``, which keeps
    the result in dB.  ``split="full"`` applies both full ratios, which
    yields entries of order ``target_ue * target_ap``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2 or raw.shape[1] < 2:
        raise DegenerateFieldError(f"need at least a 2x2 field to scale, got shape {raw.shape}")
    if target_sigma_ue_db < 0 or target_sigma_ap_db < 0:
        raise InvalidArgumentError("target stds must be non-negative")
    row = raw.std(axis=1)
    col = raw.std(axis=0)
    if (row == 0).any() or (col == 0).any():
        raise DegenerateFieldError("field has a constant row or column")
    if split == "sqrt":
        return raw * np.sqrt(target_sigma_ue_db / row)[:, None] * np.sqrt(target_sigma_ap_db / col)[None, :]
    if split == "full":
        return raw * (target_sigma_ue_db / row)[:, None] * (target_sigma_ap_db / col)[None, :]
    raise InvalidArgumentError(f"unknown split {split!r}")


def line_coordinates(positions, tol: float = _COLLINEAR_TOL) -> np.ndarray | None:
    """Coordinates along the common line of ``positions``, or None if not collinear."""
    p = _points(positions)
    if len(p) <= 2:
        return np.r_[0.0, np.linalg.norm(p[-1] - p[0])] if len(p) == 2 else np.zeros(1)
    c = p - p.mean(axis=0)
    _, s, Vt = np.linalg.svd(c, full_matrices=False)
    if s.size > 1 and s[1] > tol * max(s[0], 1.0):
        return None
    t = c @ Vt[0]
    return t - t.min()


def exp_correlated(positions, d_corr: float, z) -> np.ndarray:
    """Apply the exponential-correlation factor of ``positions`` to white ``z``.

    ``z`` has shape ``(n, k)``; each column comes out with correlation
    ``exp(-|r_a - r_b| / d_corr)``.  Collinear points use the exact
    first-order Markov recursion, other layouts a dense factorization.
    """
    _check_dcorr(d_corr)
    z = np.asarray(z, dtype=float)
    t = line_coordinates(positions)
    if t is None:
        p = _points(positions)
        return cov_factor(np.exp(-cdist(p, p) / d_corr)) @ z
    order = np.argsort(t, kind="stable")
    rho = np.exp(-np.diff(t[order]) / d_corr)
    innov = np.sqrt(-np.expm1(-2.0 * np.diff(t[order]) / d_corr))
    out = np.empty_like(z)
    prev = z[order[0]]
    out[order[0]] = prev
    for k in range(1, len(order)):
        prev = rho[k - 1] * prev + innov[k - 1] * z[order[k]]
        out[order[k]] = prev
    return out


def gudmundson_1d(positions, sigma_db: float, d_corr_m: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian vector with covariance ``sigma^2 exp(-|d|/d_corr)``."""
    if sigma_db < 0:
        raise InvalidArgumentError("sigma must be non-negative")
    if line_coordinates(positions) is None:
        raise InvalidArgumentError("positions are not collinear")
    p = _points(positions)
    return sigma_db * exp_correlated(p, d_corr_m, rng.standard_normal((len(p), 1)))[:, 0]


def separable_field(ue_positions, ap_positions, sigma_db: float, d_corr_m: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Field with covariance ``sigma^2 exp(-d_ue/d_corr) exp(-d_ap/d_corr)``.

    Exponential decay along each trajectory axis independently.
    """
    ue, ap = _points(ue_positions), _points(ap_positions)
    z = rng.standard_normal((len(ue), len(ap)))
    x = exp_correlated(ue, d_corr_m, z)
    x = exp_correlated(ap, d_corr_m, x.T).T
    return sigma_db * x


def generate_field(ue_positions, ap_positions, sigma_ue_db: float, sigma_ap_db: float,
                   d_corr_ue_m: float, d_corr_ap_m: float, rng: np.random.Generator,
                   max_links: int = DEFAULT_MAX_LINKS, split: str = "sqrt") -> ShadowingField:
    """Correlated shadowing for every UE x AP pair of one correlation group.

    A single UE (or AP) reduces the group to a 1-D process along the other
    side, with that side's std and correlation distance.  Fields with both
    axes long enough are rescaled from their sample row/column stds; short
    ones are scaled by ``sqrt(sigma_ue * sigma_ap)``.
    """
    ue, ap = _points(ue_positions), _points(ap_positions)
    M, N = len(ue), len(ap)
    if M == 1 and N == 1:
        vals = np.sqrt(sigma_ue_db * sigma_ap_db) * rng.standard_normal((1, 1))
    elif M == 1:
        vals = sigma_ap_db * exp_correlated(ap, d_corr_ap_m, rng.standard_normal((N, 1))).T
    elif N == 1:
        vals = sigma_ue_db * exp_correlated(ue, d_corr_ue_m, rng.standard_normal((M, 1)))
    else:
        hu, ha = uniform_spacing(ue), uniform_spacing(ap)
        if M * N > max_links and hu is not None and ha is not None:
            raw = lattice_field(M, N, hu, ha, d_corr_ue_m, d_corr_ap_m, rng)
        else:
            # small lattices can defeat the embedding; the dense factor is cheap there
            raw = sample_field(joint_covariance(ue, ap, d_corr_ue_m, d_corr_ap_m, max_links), M, N, rng)
        if M >= MIN_EMPIRICAL_AXIS and N >= MIN_EMPIRICAL_AXIS:
            vals = scale_field(raw, sigma_ue_db, sigma_ap_db, split)
        else:
            vals = np.sqrt(sigma_ue_db * sigma_ap_db) * raw
    return ShadowingField(vals, ue, ap, d_corr_ue_m, d_corr_ap_m, sigma_ue_db, sigma_ap_db)


def group_stream(seed: int, key: Sequence) -> np.random.Generator:
    """RNG for one correlation group, independent of which other groups exist."""
    words = [zlib.crc32(str(k).encode()) for k in key]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x5AD0, *words)))


def group_links(ue_streets: Sequence[str], ap_streets: Sequence[str], orders) -> dict:
    """Partition reachable links by (AP street, UE street, order).

    Returns ``{key: (ue_indices, ap_indices)}``; every UE x AP pair of a
    group is a link of that group.
    """
    orders = np.asarray(orders)
    M, N = len(ue_streets), len(ap_streets)
    if orders.shape != (M, N):
        raise InvalidArgumentError(f"orders shape {orders.shape} does not match {M}x{N}")
    if any(s is None for s in ue_streets) or any(s is None for s in ap_streets):
        raise InvalidArgumentError("every terminal needs a street id")
    members: dict = {}
    for i in range(M):
        for j in range(N):
            if orders[i, j] < 0:
                continue
            members.setdefault((ap_streets[j], ue_streets[i], int(orders[i, j])), set()).add((i, j))
    out = {}
    for key, links in members.items():
        ui = sorted({i for i, _ in links})
        aj = sorted({j for _, j in links})
        out[key] = (np.array(ui), np.array(aj))
    return out


def assemble_scenario_shadowing(ue_positions, ap_positions, ue_streets, ap_streets, orders,
                                street_params: Mapping, seed: int,
                                max_links: int = DEFAULT_MAX_LINKS) -> np.ndarray:
    """Shadowing for every link; NaN where ``orders`` marks a link unreachable.

    Links on the same (AP street, UE street) pair share one correlated
    field; different pairs are independent.  The std and correlation
    distances come from the order-``N`` realization of the UE's street.
    """
    ue, ap = _points(ue_positions), _points(ap_positions)
    out = np.full((len(ue), len(ap)), np.nan)
    for key, (ui, aj) in sorted(group_links(ue_streets, ap_streets, orders).items()):
        _, ue_street, order = key
        try:
            p = street_params[(ue_street, order)]
        except KeyError:
            raise InvalidArgumentError(f"no order-{order} parameters for street {ue_street}") from None
        v = p if isinstance(p, Mapping) else p.values
        try:
            f = generate_field(ue[ui], ap[aj], v["sigma_ue"], v["sigma_ap"], v["dcorr_ue"], v["dcorr_ap"],
                               group_stream(seed, key), max_links=max_links)
        except ResourceLimitError as exc:
            raise ResourceLimitError(f"correlation group AP street {key[0]} / UE street {ue_street}: {exc}") from None
        out[np.ix_(ui, aj)] = f.values_db
    out[np.asarray(orders) < 0] = np.nan
    return out
