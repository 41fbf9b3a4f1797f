"""Scenario configuration, the end-to-end generation pipeline and CSV output.

Configuration files are flat YAML mappings::

    block_length_m: 100        # building side
    street_width_m: 20
    building_height_m: 40
    blocks_x: 3
    blocks_y: 3
    frequency_hz: 3.5e9
    seed: 7
    model: both                # cunec | alphabeta | both
    ap_positions: [[0, 40, 10], [0, 80, 10]]
    ue_line_start: [5, 0, 1.5] # or ue_positions
    ue_line_end: [95, 0, 1.5]
    ue_spacing_m: 5
    tables: overrides.yaml     # optional, relative to this file
    ort_csv: ort.csv           # optional columns ue_idx, ap_idx, ort_pl_db
    output: links.csv

Optional model knobs: ``conditioning`` (subset of street_width,
block_length, building_height; default all), ``d_th_m``, ``k_act``,
``max_order``, ``max_links``, ``origin``.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .errors import ConfigError, InvalidPositionError, ResourceLimitError
from .geometry import (UNREACHABLE, GridLayout, LinkClassification, Role, Terminal,
                       classify_link)
from .params import assign_street_params
from .pathloss import (DEFAULT_CARRIER_HZ, K_ACT_DEFAULT, Condition, alpha_beta_pl,
                       combine_routes, combine_with_ort, mean_pl_route)
from .shadowing import DEFAULT_MAX_LINKS, assemble_scenario_shadowing, separable_field
from .tables import ENV_VARS, ParameterTables, default_tables, load_tables

CSV_COLUMNS = ("ue_idx", "ap_idx", "order", "d_euclid_m", "d_manhattan_m", "mean_pl_db",
               "shadow_db", "total_pl_db", "n_routes", "valid", "model")


class Model(str, enum.Enum):
    CUNEC = "cunec"
    ALPHABETA = "alphabeta"
    BOTH = "both"


@dataclass
class ScenarioConfig:
    block_length_m: float
    street_width_m: float
    building_height_m: float
    blocks_x: int
    blocks_y: int
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    frequency_hz: float = DEFAULT_CARRIER_HZ
    seed: int = 0
    model: Model = Model.CUNEC
    tables_path: Path | None = None
    ort_csv: Path | None = None
    output: Path | None = None
    conditioning: tuple[str, ...] = ENV_VARS
    d_th_m: float | None = None
    k_act: float = K_ACT_DEFAULT
    max_order: int = 2
    max_links: int = DEFAULT_MAX_LINKS
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.ap_positions = _as_points(self.ap_positions, "ap_positions")
        self.ue_positions = _as_points(self.ue_positions, "ue_positions")
        self.model = Model(self.model)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.seed = int(self.seed)
        bad = set(self.conditioning) - set(ENV_VARS)
        if bad:
            raise ConfigError(f"unknown conditioning variables {sorted(bad)}")
        if self.max_order not in (0, 1, 2):
            raise ConfigError("max_order must be 0, 1 or 2")

    def grid(self) -> GridLayout:
        return GridLayout(self.block_length_m, self.street_width_m, self.building_height_m,
                          self.blocks_x, self.blocks_y, self.origin)

    def tables(self) -> ParameterTables:
        return load_tables(self.tables_path) if self.tables_path else default_tables()

    def street_env(self) -> dict[str, float]:
        env = {"street_width": self.street_width_m, "block_length": self.block_length_m,
               "building_height": self.building_height_m}
        return {k: v for k, v in env.items() if k in self.conditioning}


def _as_points(p, name: str) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] not in (2, 3):
        raise ConfigError(f"{name}: need a non-empty list of [x, y] or [x, y, z] points")
    if a.shape[1] == 2:
        a = np.c_[a, np.zeros(len(a))]
    if not np.isfinite(a).all():
        raise ConfigError(f"{name}: positions must be finite")
    return a


def line_positions(start, end, spacing_m: float) -> np.ndarray:
    """Points from ``start`` towards ``end`` every ``spacing_m`` (end included if hit)."""
    if not spacing_m > 0:
        raise ConfigError(f"trajectory spacing must be positive, got {spacing_m}")
    a, b = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    if a.shape != b.shape or a.shape not in ((2,), (3,)):
        raise ConfigError("trajectory start and end need matching [x, y] or [x, y, z]")
    length = float(np.linalg.norm(b - a))
    n = int(math.floor(length / spacing_m + 1e-9)) + 1
    if length == 0:
        return a[None, :]
    return a + np.outer(np.arange(n) * spacing_m / length, b - a)


_REQUIRED = ("block_length_m", "street_width_m", "building_height_m", "blocks_x", "blocks_y")
_OPTIONAL = ("frequency_hz", "seed", "model", "tables", "ort_csv", "output", "conditioning",
             "d_th_m", "k_act", "max_order", "max_links", "origin")
_TERMINAL_KEYS = tuple(f"{r}_{k}" for r in ("ap", "ue")
                       for k in ("positions", "line_start", "line_end", "spacing_m"))
_KNOWN = set(_REQUIRED) | set(_OPTIONAL) | set(_TERMINAL_KEYS)


def parse_config(text: str, base_dir: Path | str = ".", source: str = "<config>") -> ScenarioConfig:
    """Build a config from YAML text; errors name the offending line and key."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}:{where} YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping of configuration keys")
    lines = {}
    if root is not None:
        lines = {k.value: k.start_mark.line + 1 for k, _ in root.value}

    def where(key):
        return f"{source}: line {lines.get(key, '?')}, key {key!r}"

    for key in data:
        if key not in _KNOWN:
            raise ConfigError(f"{where(key)}: unknown key")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")

    base = Path(base_dir)
    kw = {}
    current = None
    try:
        for key in _REQUIRED:
            current = key
            if not isinstance(data[key], (int, float)) or isinstance(data[key], bool):
                raise ConfigError("expected a number")
            kw[key] = data[key]
        for role in ("ap", "ue"):
            current = f"{role}_positions"
            kw[current] = _terminals(data, role)
        for key, cast in (("frequency_hz", float), ("seed", int), ("d_th_m", float), ("k_act", float),
                          ("max_order", int), ("max_links", int)):
            current = key
            if key in data:
                if isinstance(data[key], (bool, list, dict)) or data[key] is None:
                    raise ConfigError("expected a number")
                kw[key] = cast(data[key])
        if kw.get("frequency_hz", 1.0) <= 0:
            current = "frequency_hz"
            raise ConfigError("frequency must be positive")
        current = "model"
        if "model" in data:
            kw["model"] = Model(str(data["model"]).lower())
        current = "origin"
        if "origin" in data:
            kw["origin"] = tuple(float(v) for v in data["origin"])
        current = "conditioning"
        if "conditioning" in data:
            kw["conditioning"] = tuple(data["conditioning"] or ())
        for key, dest in (("tables", "tables_path"), ("ort_csv", "ort_csv"), ("output", "output")):
            if data.get(key):
                kw[dest] = base / str(data[key])
        current = None
        return ScenarioConfig(**kw)
    except (ConfigError, TypeError, ValueError) as exc:
        key = getattr(exc, "key", None) or current
        prefix = where(key) if key else source
        raise ConfigError(f"{prefix}: {exc}") from None


def _terminals(data: dict, role: str) -> np.ndarray:
    pk, sk, ek, hk = (f"{role}_positions", f"{role}_line_start", f"{role}_line_end", f"{role}_spacing_m")
    has_line = any(k in data for k in (sk, ek, hk))

    def fail(msg, key):
        err = ConfigError(msg)
        err.key = key
        return err

    if pk in data and has_line:
        raise fail("give either explicit positions or a line trajectory, not both", pk)
    if pk in data:
        try:
            return _as_points(data[pk], pk)
        except (ConfigError, TypeError, ValueError) as exc:
            raise fail(str(exc), pk) from None
    missing = [k for k in (sk, ek, hk) if k not in data]
    if missing:
        raise fail(f"no {role.upper()} positions: set {pk} or {sk}/{ek}/{hk}",
                   missing[0] if has_line else None)
    try:
        return line_positions(data[sk], data[ek], float(data[hk]))
    except (ConfigError, TypeError, ValueError) as exc:
        raise fail(str(exc), hk) from None


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, str(path))


@dataclass(frozen=True)
class LinkResult:
    ue_index: int
    ap_index: int
    order: int
    euclidean_d_m: float
    manhattan_d_m: float
    mean_pl_db: float  # NaN when unreachable
    shadowing_db: float
    total_pl_db: float
    n_routes_combined: int
    in_validity_range: bool
    model: str

    @property
    def reachable(self) -> bool:
        return self.order != UNREACHABLE


@dataclass
class ScenarioState:
    """Intermediate products shared by the CUNEC run and the baseline."""

    grid: GridLayout
    aps: list[Terminal]
    ues: list[Terminal]
    links: list[list[LinkClassification]]  # [ue][ap]
    ue_streets: list[str] = field(default_factory=list)
    ap_streets: list[str] = field(default_factory=list)


def prepare(cfg: ScenarioConfig) -> ScenarioState:
    """Steps 1-2: build the grid and classify every UE x AP link."""
    grid = cfg.grid()
    aps = [Terminal(tuple(p), Role.AP) for p in cfg.ap_positions]
    ues = [Terminal(tuple(p), Role.UE) for p in cfg.ue_positions]
    _check_heights(aps, ues)
    streets = {}
    for name, terms in (("AP", aps), ("UE", ues)):
        for k, t in enumerate(terms):
            try:
                streets[(name, k)] = grid.locate(t.xy).street_id
            except InvalidPositionError as exc:
                raise InvalidPositionError(f"{name} {k} at {t.xy}: {exc}") from None
    links = [[classify_link(grid, ap, ue, cfg.max_order) for ap in aps] for ue in ues]
    return ScenarioState(grid, aps, ues, links,
                         [streets[("UE", i)] for i in range(len(ues))],
                         [streets[("AP", j)] for j in range(len(aps))])


def _check_heights(aps, ues):
    ap_h = min(t.position[2] for t in aps)
    ue_h = max(t.position[2] for t in ues)
    if ap_h < ue_h:
        warnings.warn(f"an AP sits lower ({ap_h} m) than a UE ({ue_h} m); "
                      "shadowing statistics still follow the declared roles", stacklevel=3)


def read_ort(path: Path, M: int, N: int) -> np.ndarray:
    """Per-link rooftop path loss; links not listed get +inf (no rooftop path)."""
    ort = np.full((M, N), np.inf)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"ue_idx", "ap_idx", "ort_pl_db"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise ConfigError(f"{path}: ORT file needs columns {sorted(need)}")
        for n, row in enumerate(reader, start=2):
            try:
                i, j, v = int(row["ue_idx"]), int(row["ap_idx"]), float(row["ort_pl_db"])
            except ValueError as exc:
                raise ConfigError(f"{path}: line {n}: {exc}") from None
            if not (0 <= i < M and 0 <= j < N):
                raise ConfigError(f"{path}: line {n}: link ({i}, {j}) outside the {M}x{N} scenario")
            ort[i, j] = v
    return ort


def run_scenario(cfg: ScenarioConfig, state: ScenarioState | None = None,
                 tables: ParameterTables | None = None) -> list[list[LinkResult]]:
    """CUNEC path loss for every UE x AP link, as ``results[ue][ap]``."""
    state = state or prepare(cfg)
    tables = tables or cfg.tables()
    d_th = tables.d_th_m if cfg.d_th_m is None else cfg.d_th_m
    M, N = len(state.ues), len(state.aps)

    routes = [r for row in state.links for lc in row for r in lc.routes]
    env = {sid: cfg.street_env() for sid in state.grid.street_ids}
    params = assign_street_params(routes, env, tables, cfg.seed)

    mean = np.full((M, N), np.nan)
    valid = np.zeros((M, N), dtype=bool)
    orders = np.full((M, N), UNREACHABLE)
    for i in range(M):
        for j in range(N):
            lc = state.links[i][j]
            if not lc.reachable:
                continue
            res = [mean_pl_route(r, params, cfg.frequency_hz, d_th, cfg.k_act) for r in lc.routes]
            mean[i, j] = combine_routes([r.total_db for r in res])
            valid[i, j] = lc.in_validity_range and all(r.in_validity_range for r in res)
            orders[i, j] = lc.order

    try:
        shadow = assemble_scenario_shadowing(cfg.ue_positions, cfg.ap_positions, state.ue_streets,
                                             state.ap_streets, orders, params, cfg.seed, cfg.max_links)
    except ResourceLimitError as exc:
        raise ResourceLimitError(f"{exc}. Use fewer terminals per street, or uniformly spaced "
                                 "trajectories, which need no dense covariance") from None
    if cfg.ort_csv is not None:
        ort = read_ort(cfg.ort_csv, M, N)
        for i, j in zip(*np.nonzero(orders != UNREACHABLE)):
            mean[i, j] = combine_with_ort(mean[i, j], ort[i, j])
    return _results(state, orders, mean, shadow, valid, Model.CUNEC.value)


def run_baseline(cfg: ScenarioConfig, state: ScenarioState | None = None,
                 tables: ParameterTables | None = None) -> list[list[LinkResult]]:
    """Alpha-beta baseline: LOS parameters for order-0 links, NLOS otherwise.

    Shadowing decays exponentially along both the UE and the AP trajectory
    with the condition's std and correlation distance.
    """
    state = state or prepare(cfg)
    tables = tables or cfg.tables()
    M, N = len(state.ues), len(state.aps)
    orders = np.array([[lc.order for lc in row] for row in state.links]).reshape(M, N)
    d = np.array([[lc.euclidean_distance_m for lc in row] for row in state.links]).reshape(M, N)
    los = orders == 0
    mean = np.empty((M, N))
    shadow = np.empty((M, N))
    for k, cond in enumerate((Condition.LOS, Condition.NLOS)):
        p = tables.alpha_beta[cond]
        mask = los if cond == Condition.LOS else ~los
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xBA5E, k)))
        field = separable_field(cfg.ue_positions, cfg.ap_positions, p.sigma_s_db, p.d_corr_m, rng)
        for i, j in zip(*np.nonzero(mask)):
            mean[i, j] = alpha_beta_pl(max(d[i, j], 1.0), p, cfg.frequency_hz)
        shadow[mask] = field[mask]
    valid = np.array([[lc.in_validity_range and lc.euclidean_distance_m >= 1.0 for lc in row]
                      for row in state.links]).reshape(M, N)
    return _results(state, orders, mean, shadow, valid, Model.ALPHABETA.value, baseline=True)


def _results(state, orders, mean, shadow, valid, model, baseline=False):
    out = []
    for i, row in enumerate(state.links):
        res_row = []
        for j, lc in enumerate(row):
            reach = baseline or lc.reachable
            m = float(mean[i, j]) if reach else math.nan
            s = float(shadow[i, j]) if reach else math.nan
            res_row.append(LinkResult(i, j, int(orders[i, j]), lc.euclidean_distance_m,
                                      lc.manhattan_distance_m, m, s, m + s,
                                      len(lc.routes) if not baseline else 1, bool(valid[i, j]), model))
        out.append(res_row)
    return out


def run(cfg: ScenarioConfig) -> list[list[list[LinkResult]]]:
    """Result sets for the configured model(s), sharing one link classification."""
    state = prepare(cfg)
    tables = cfg.tables()
    sets = []
    if cfg.model in (Model.CUNEC, Model.BOTH):
        sets.append(run_scenario(cfg, state, tables))
    if cfg.model in (Model.ALPHABETA, Model.BOTH):
        sets.append(run_baseline(cfg, state, tables))
    return sets


def _num(v: float) -> str:
    return "" if not math.isfinite(v) else f"{v:.6g}"


def write_csv(result_sets: Iterable[Sequence[Sequence[LinkResult]]], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rs in result_sets:
        for row in rs:
            for r in row:
                w.writerow([r.ue_index, r.ap_index, r.order, _num(r.euclidean_d_m),
                            _num(r.manhattan_d_m), _num(r.mean_pl_db), _num(r.shadowing_db),
                            _num(r.total_pl_db), r.n_routes_combined, int(r.in_validity_range),
                            r.model])


def to_csv_text(result_sets) -> str:
    buf = io.StringIO()
    write_csv(result_sets, buf)
    return buf.getvalue()
