"""Published parameter statistics and their flat-file overrides.

Override files are flat YAML mappings with one key per table cell::

    order1.mean.kappa: 0.037
    order1.std.kappa: 0.02
    order0.corr.street_width.exponent: 0.9
    env.mean.street_width: 22.5
    alphabeta.nlos.beta: 6.3
    bounds.dcorr: 0.1
    d_th: 70

Parameter names per street order:

* ``delta``          offset (order 0) or base corner loss (order 1), dB
* ``exponent``       path-loss exponent of the segment
* ``kappa``          corner-loss saturation rate, 1/m (order 1)
* ``corner_offset``  extra corner loss when away from the walls, dB (order 1)
* ``sigma_ap``, ``sigma_ue``  shadowing std for AP / UE trajectories, dB
* ``dcorr_ap``, ``dcorr_ue``  shadowing correlation distances, m

Environment variables: ``street_width``, ``block_length``, ``building_height``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .pathloss import ALPHA_BETA_LOS, ALPHA_BETA_NLOS, AlphaBetaParams, Condition

ENV_VARS = ("street_width", "block_length", "building_height")
SHADOW_PARAMS = ("sigma_ap", "sigma_ue", "dcorr_ap", "dcorr_ue")
FREE_PARAMS = {
    0: ("delta", "exponent") + SHADOW_PARAMS,
    1: ("delta", "exponent", "kappa", "corner_offset") + SHADOW_PARAMS,
    2: ("exponent",) + SHADOW_PARAMS,
}
# Environment variables each order's correlation table names.
ORDER_ENV = {
    0: ("street_width", "block_length", "building_height"),
    1: ("block_length", "building_height"),
    2: ("block_length",),
}

_MEANS = {
    0: dict(delta=6.3, exponent=1.56, sigma_ap=1.1, sigma_ue=0.9, dcorr_ap=17.8, dcorr_ue=12.4),
    1: dict(delta=29.7, exponent=1.4, kappa=0.037, corner_offset=9.2,
            sigma_ap=4.8, sigma_ue=4.7, dcorr_ap=9.9, dcorr_ue=14.4),
    2: dict(exponent=1.3, sigma_ap=7.0, sigma_ue=7.0, dcorr_ap=10.4, dcorr_ue=16.0),
}
_STDS = {
    0: dict(delta=0.6, exponent=0.05, sigma_ap=0.11, sigma_ue=0.11, dcorr_ap=6.1, dcorr_ue=2.8),
    1: dict(delta=11.0, exponent=0.65, kappa=0.02, corner_offset=4.6,
            sigma_ap=2.6, sigma_ue=1.6, dcorr_ap=6.7, dcorr_ue=9.5),
    2: dict(exponent=0.58, sigma_ap=2.4, sigma_ue=1.9, dcorr_ap=10.6, dcorr_ue=9.2),
}
_W, _B, _H = ENV_VARS
_CORR = {
    0: {
        (_B, "sigma_ap"): -0.6, (_B, "sigma_ue"): -0.8, (_B, "dcorr_ap"): 0.5, (_B, "dcorr_ue"): 0.8,
        (_H, "exponent"): 0.4, (_H, "sigma_ap"): -0.5, (_H, "sigma_ue"): -0.5,
        (_H, "dcorr_ap"): 0.6, (_H, "dcorr_ue"): 0.6,
        (_W, "exponent"): 0.9, (_W, "delta"): -0.6, (_W, "dcorr_ap"): 0.9, (_W, "dcorr_ue"): 0.8,
        ("exponent", "delta"): -0.8, ("exponent", "dcorr_ap"): 0.7, ("exponent", "dcorr_ue"): 0.5,
        ("delta", "sigma_ap"): -0.4, ("delta", "dcorr_ap"): -0.5,
        ("sigma_ap", "dcorr_ap"): -0.4, ("sigma_ue", "dcorr_ue"): -0.5,
    },
    1: {
        (_B, "exponent"): -0.5, (_B, "kappa"): 0.6, (_B, "sigma_ap"): -0.4,
        (_H, "exponent"): -0.5, (_H, "delta"): 0.4,
        ("exponent", "delta"): -0.9,
        ("kappa", "corner_offset"): 0.4, ("kappa", "sigma_ue"): -0.4,
    },
    2: {
        (_B, "exponent"): -0.7, (_B, "sigma_ap"): 0.5, (_B, "sigma_ue"): 0.5,
        ("exponent", "sigma_ue"): -0.4,
    },
}

# Not published: environment statistics spanning the simulated ranges
# (widths 15-30 m, heights 20-60 m) as uniform-equivalent mean/std; block
# length assumed 50-150 m.
_ENV_MEAN = {_W: 22.5, _B: 100.0, _H: 40.0}
_ENV_STD = {_W: 4.33, _B: 28.9, _H: 11.5}

# Lower bounds applied after sampling, by parameter kind.  The base corner
# loss is bounded only for order 1.
_LOWER_BOUNDS = dict(exponent=0.05, kappa=1e-3, corner_offset=0.0, delta=0.0, sigma=0.01, dcorr=0.1)

VALIDITY_M = {0: (15.0, 500.0), 1: (1.0, 250.0), 2: (1.0, 500.0)}


def bound_kind(name: str) -> str:
    return name.split("_")[0] if name.startswith(("sigma_", "dcorr_")) else name


@dataclass
class OrderTable:
    order: int
    env_vars: tuple[str, ...]
    free: tuple[str, ...]
    mean: dict[str, float]
    std: dict[str, float]
    corr: dict[tuple[str, str], float]

    @property
    def names(self) -> tuple[str, ...]:
        return self.env_vars + self.free


@dataclass
class ParameterTables:
    orders: dict[int, OrderTable]
    env_mean: dict[str, float]
    env_std: dict[str, float]
    alpha_beta: dict[Condition, AlphaBetaParams]
    lower_bounds: dict[str, float]
    d_th_m: float = 70.0
    _samplers: dict = field(default_factory=dict, repr=False, compare=False)

    def lower_bound(self, order: int, name: str) -> float | None:
        if name == "delta" and order != 1:
            return None
        return self.lower_bounds.get(bound_kind(name))

    def sampler(self, order: int):
        """Cached conditional sampler for one street order."""
        from .params import OrderSampler

        if order not in self._samplers:
            self._samplers[order] = OrderSampler(self, order)
        return self._samplers[order]

    def with_overrides(self, overrides: dict) -> "ParameterTables":
        new = ParameterTables(copy.deepcopy(self.orders), dict(self.env_mean), dict(self.env_std),
                              dict(self.alpha_beta), dict(self.lower_bounds), self.d_th_m)
        for key, value in overrides.items():
            _apply(new, str(key), value)
        return new


def default_tables() -> ParameterTables:
    orders = {
        n: OrderTable(n, ORDER_ENV[n], FREE_PARAMS[n], dict(_MEANS[n]), dict(_STDS[n]), dict(_CORR[n]))
        for n in (0, 1, 2)
    }
    return ParameterTables(orders, dict(_ENV_MEAN), dict(_ENV_STD),
                           {Condition.LOS: ALPHA_BETA_LOS, Condition.NLOS: ALPHA_BETA_NLOS},
                           dict(_LOWER_BOUNDS))


def load_tables(path: str | Path) -> ParameterTables:
    """Default tables with the cells listed in ``path`` overridden."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}{where}: cannot parse table overrides: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat mapping of table cells")
    try:
        return default_tables().with_overrides(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _number(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"key {key!r}: expected a finite number, got {value!r}")
    return float(value)


def _apply(t: ParameterTables, key: str, value) -> None:
    parts = key.split(".")
    v = _number(key, value)
    head = parts[0]
    if head.startswith("order") and head[5:] in ("0", "1", "2") and len(parts) >= 3:
        tab = t.orders[int(head[5:])]
        kind = parts[1]
        if kind in ("mean", "std") and len(parts) == 3 and parts[2] in tab.free:
            if kind == "std" and v < 0:
                raise ConfigError(f"key {key!r}: std must be non-negative")
            getattr(tab, kind)[parts[2]] = v
            return
        if kind == "corr" and len(parts) == 4 and {parts[2], parts[3]} <= set(tab.names) \
                and parts[2] != parts[3]:
            if not -1.0 <= v <= 1.0:
                raise ConfigError(f"key {key!r}: correlation must lie in [-1, 1]")
            tab.corr.pop((parts[3], parts[2]), None)
            tab.corr[(parts[2], parts[3])] = v
            return
    elif head == "env" and len(parts) == 3 and parts[1] in ("mean", "std") and parts[2] in ENV_VARS:
        if v < 0 or (parts[1] == "mean" and v == 0):
            raise ConfigError(f"key {key!r}: environment statistics must be positive")
        (t.env_mean if parts[1] == "mean" else t.env_std)[parts[2]] = v
        return
    elif head == "alphabeta" and len(parts) == 3 and parts[1] in ("los", "nlos"):
        cond = Condition(parts[1].upper())
        fields = {"delta": "delta_db", "beta": "beta", "sigma_s": "sigma_s_db", "d_corr": "d_corr_m"}
        if parts[2] in fields:
            cur = t.alpha_beta[cond]
            kw = {f: getattr(cur, f) for f in ("delta_db", "beta", "sigma_s_db", "d_corr_m")}
            kw[fields[parts[2]]] = v
            t.alpha_beta[cond] = AlphaBetaParams(condition=cond, **kw)
            return
    elif head == "bounds" and len(parts) == 2 and parts[1] in _LOWER_BOUNDS:
        t.lower_bounds[parts[1]] = v
        return
    elif key == "d_th":
        t.d_th_m = v
        return
    raise ConfigError(f"unknown table key {key!r}")
