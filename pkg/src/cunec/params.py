"""Per-street parameter realizations from the joint Gaussian parameter model.

Each street order has a joint vector of environment variables and free model
parameters.  A realization is drawn from the Gaussian conditioned on whatever
environment values are known for the street, then clamped at the lower
bounds of parameters that must stay positive.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import linalg, optimize, stats

from .errors import ConditioningError, InvalidArgumentError
from .geometry import Route
from .tables import ParameterTables

EIG_FLOOR = 1e-8
# Bounds further than this many stds below the mean never bind in practice.
_MOMENT_MATCH_MAX_Z = 6.0


def nearest_spd(M, eps: float = EIG_FLOOR) -> np.ndarray:
    """Nearest symmetric matrix (Frobenius norm) with eigenvalues >= ``eps``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {M.shape}")
    S = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(S)
    if w.min() >= eps:
        return S
    # clip slightly above eps so rebuild roundoff cannot push the spectrum below it
    floor = eps + 16 * len(w) * np.finfo(float).eps * max(np.abs(w).max(), 1.0)
    out = (V * np.maximum(w, floor)) @ V.T
    return 0.5 * (out + out.T)


def nearest_correlation(C, eps: float = EIG_FLOOR) -> np.ndarray:
    """SPD projection of a correlation matrix, rescaled back to unit diagonal."""
    P = nearest_spd(C, eps)
    d = np.sqrt(np.diag(P))
    return P / np.outer(d, d)


def conditional_gaussian(mu, sigma, corr, fixed_idx=(), fixed_values=()):
    """Mean and covariance of the unfixed components given the fixed ones.

    Returns ``(mu_u, cov_uu)`` over the indices not in ``fixed_idx``, in
    their original order.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    corr = np.asarray(corr, dtype=float)
    cov = sigma[:, None] * corr * sigma[None, :]
    fixed = np.asarray(fixed_idx, dtype=int).reshape(-1)
    if len(set(fixed.tolist())) != fixed.size:
        raise InvalidArgumentError("fixed indices must be distinct")
    xf = np.asarray(fixed_values, dtype=float).reshape(-1)
    if xf.size != fixed.size:
        raise InvalidArgumentError("one fixed value is needed per fixed index")
    free = np.setdiff1d(np.arange(mu.size), fixed)
    if fixed.size == 0:
        return mu.copy(), cov
    S_ff = cov[np.ix_(fixed, fixed)]
    S_uf = cov[np.ix_(free, fixed)]
    try:
        cf = linalg.cho_factor(S_ff)
    except linalg.LinAlgError:
        raise ConditioningError("covariance of the conditioning variables is singular") from None
    mu_u = mu[free] + S_uf @ linalg.cho_solve(cf, xf - mu[fixed])
    cov_u = cov[np.ix_(free, free)] - S_uf @ linalg.cho_solve(cf, S_uf.T)
    return mu_u, 0.5 * (cov_u + cov_u.T)


def psd_factor(cov) -> np.ndarray:
    """A matrix ``L`` with ``L @ L.T == cov`` (Cholesky, eigen fallback)."""
    cov = np.asarray(cov, dtype=float)
    if cov.size == 0:
        return cov
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def moment_matched_latent(mean: float, std: float, lower: float) -> tuple[float, float]:
    """Latent Gaussian (m, s) such that ``max(X, lower)`` has the given mean and std.

    Plain clamping of N(mean, std) shifts the mean upward when the bound
    sits within a few stds of it.  Matching both moments of the clamped
    variable keeps the published statistics.  Falls back to the identity
    when the bound is far away or the target is not reachable.
    """
    if std <= 0 or mean <= lower or (mean - lower) / std > _MOMENT_MATCH_MAX_Z:
        return mean, std
    target_cv = std / (mean - lower)

    def cv(t):
        P, p = stats.norm.cdf(t), stats.norm.pdf(t)
        m1 = t * P + p
        m2 = (t * t + 1.0) * P + t * p
        return np.sqrt(max(m2 - m1 * m1, 0.0)) / m1 - target_cv

    # cv() decreases in t; as t -> -inf the clamped CV grows without bound.
    try:
        t = optimize.brentq(cv, -30.0, 40.0, xtol=1e-12)
    except ValueError:
        return mean, std
    s = (mean - lower) / (t * stats.norm.cdf(t) + stats.norm.pdf(t))
    return lower + t * s, s


@dataclass(frozen=True)
class StreetParams:
    order: int
    values: Mapping[str, float]
    clamped_flags: Mapping[str, bool] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]


class OrderSampler:
    """Joint (environment + free parameter) Gaussian for one street order."""

    def __init__(self, tables: ParameterTables, order: int):
        if order not in tables.orders:
            raise InvalidArgumentError(f"unknown street order {order!r}")
        tab = tables.orders[order]
        self.order = order
        self.env_vars = tab.env_vars
        self.free = tab.free
        self.names = tab.names
        k = len(self.names)
        idx = {n: i for i, n in enumerate(self.names)}

        C = np.eye(k)
        for (a, b), rho in tab.corr.items():
            C[idx[a], idx[b]] = C[idx[b], idx[a]] = rho
        self.target_corr = C
        self.corr = nearest_correlation(C)

        self.lower = np.array([np.nan] * len(self.env_vars)
                              + [np.nan if (lb := tables.lower_bound(order, n)) is None else lb
                                 for n in self.free])
        self.table_mean = np.array([tables.env_mean[n] for n in self.env_vars]
                                   + [tab.mean[n] for n in self.free])
        self.table_std = np.array([tables.env_std[n] for n in self.env_vars]
                                  + [tab.std[n] for n in self.free])
        self.mu = self.table_mean.copy()
        self.sigma = self.table_std.copy()
        for i in range(len(self.env_vars), k):
            if not np.isnan(self.lower[i]):
                self.mu[i], self.sigma[i] = moment_matched_latent(
                    self.table_mean[i], self.table_std[i], self.lower[i])
        self._cache: dict = {}

    def conditional(self, env: Mapping[str, float] | None = None):
        """``(names, mean, factor)`` of the unfixed variables given ``env``.

        Environment values for variables this order does not model are
        ignored; modelled variables missing from ``env`` stay random.
        """
        env = {k: float(v) for k, v in (env or {}).items() if k in self.env_vars}
        for k, v in env.items():
            if not v > 0:
                raise InvalidArgumentError(f"environment value {k} = {v} must be positive")
        fixed = [self.names.index(k) for k in self.env_vars if k in env]
        key = tuple(fixed)
        if key not in self._cache:
            cov = self.sigma[:, None] * self.corr * self.sigma[None, :]
            free = np.setdiff1d(np.arange(len(self.names)), fixed)
            if fixed:
                S_ff = cov[np.ix_(fixed, fixed)]
                try:
                    cf = linalg.cho_factor(S_ff)
                except linalg.LinAlgError:
                    raise ConditioningError("covariance of the conditioning variables is singular") from None
                S_uf = cov[np.ix_(free, fixed)]
                gain = linalg.cho_solve(cf, S_uf.T).T
                cov_u = cov[np.ix_(free, free)] - gain @ S_uf.T
            else:
                gain = np.zeros((free.size, 0))
                cov_u = cov
            self._cache[key] = (free, gain, psd_factor(0.5 * (cov_u + cov_u.T)))
        free, gain, L = self._cache[key]
        xf = np.array([env[self.names[i]] for i in fixed])
        mean = self.mu[free] + gain @ (xf - self.mu[fixed]) if fixed else self.mu[free]
        return [self.names[i] for i in free], mean, L

    def draw(self, n: int, rng: np.random.Generator, env: Mapping[str, float] | None = None):
        """``n`` draws as ``(names, values[n, k], clamped[n, k])``, bounds applied."""
        names, mean, L = self.conditional(env)
        z = rng.standard_normal((n, len(names)))
        x = mean + z @ L.T
        lower = np.array([self.lower[self.names.index(nm)] for nm in names])
        clamped = x < lower  # NaN bound compares False
        x = np.where(clamped, lower, x)
        return names, x, clamped


def sample_street_params(order: int, env: Mapping[str, float] | None, tables: ParameterTables,
                         rng: np.random.Generator) -> StreetParams:
    """One parameter realization for a street of the given order."""
    if order not in (0, 1, 2):
        raise InvalidArgumentError(f"unknown street order {order!r}")
    sampler = tables.sampler(order)
    names, x, clamped = sampler.draw(1, rng, env)
    values = {nm: float(v) for nm, v in zip(names, x[0]) if nm in sampler.free}
    flags = {nm: bool(c) for nm, c in zip(names, clamped[0]) if nm in sampler.free}
    return StreetParams(order, values, flags)


def street_stream(seed: int, street_id: str, order: int) -> np.random.Generator:
    """Independent RNG stream for one (street, order) pair.

    Derived from the seed and a stable hash of the street id, so adding
    streets never changes the draws of existing ones.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(street_id.encode()), order))
    return np.random.default_rng(ss)


def required_keys(routes: Iterable[Route]) -> list[tuple[str, int]]:
    """Sorted ``(street_id, n)`` pairs referenced by the AP-first segments of ``routes``."""
    keys = set()
    for r in routes:
        r = r.ap_first()
        keys.update((sid, n) for n, sid in enumerate(r.street_ids))
    return sorted(keys)


def assign_street_params(routes: Iterable[Route], env_per_street: Mapping[str, Mapping[str, float]] | None,
                         tables: ParameterTables, seed: int,
                         extra_keys: Iterable[tuple[str, int]] = ()) -> dict[tuple[str, int], StreetParams]:
    """One shared realization per (street, order) referenced by any route.

    Every segment that runs on street ``s`` as the ``n``-th street of its
    route looks up the same ``StreetParams`` object under ``(s, n)``.
    """
    env_per_street = env_per_street or {}
    keys = set(required_keys(routes)) | set(extra_keys)
    out = {}
    for sid, n in sorted(keys):
        out[(sid, n)] = sample_street_params(n, env_per_street.get(sid), tables,
                                             street_stream(seed, sid, n))
    return out
