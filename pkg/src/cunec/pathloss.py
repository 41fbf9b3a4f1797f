"""Mean path loss per street order, route combining and the alpha-beta baseline.

All values are in dB.  Route combining works in the linear power-gain domain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.constants import speed_of_light
from scipy.special import logsumexp

from .errors import InvalidArgumentError, OutOfRangeError, UnsampledParameterError
from .geometry import VALIDITY_BOUNDS_M, Route

DEFAULT_CARRIER_HZ = 3.5e9
DEFAULT_D_TH_M = 70.0
# Slope inside the corner activation arctan: a gentle ramp by default, or a
# near step at d_th with the steep value.  Any other slope goes through ``k_act``.
K_ACT_DEFAULT = 1.0 / 100.0
K_ACT_STEEP = 10.0

_LN10_OVER_10 = math.log(10.0) / 10.0


def fspl_1m(carrier_hz: float) -> float:
    """Free-space path loss at 1 m: ``20 log10(4 pi f / c)``."""
    if not carrier_hz > 0:
        raise InvalidArgumentError(f"carrier frequency must be positive, got {carrier_hz!r}")
    return 20.0 * math.log10(4.0 * math.pi * carrier_hz / speed_of_light)


def mean_pl_zeroth(d0_m: float, delta0_db: float, b0: float,
                   carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    """Line-of-sight street segment: ``delta0 + 10 b0 log10(d0) + FSPL_1m``."""
    if d0_m < 1.0:
        raise OutOfRangeError(f"d0 = {d0_m} m is below the 1 m reference distance")
    return delta0_db + 10.0 * b0 * math.log10(d0_m) + fspl_1m(carrier_hz)


def corner_activation(d_c_m: float, d_th_m: float = DEFAULT_D_TH_M,
                      k_act: float = K_ACT_DEFAULT) -> float:
    """Smooth 0-to-1 switch around the diffraction threshold distance."""
    if d_c_m < 0:
        raise InvalidArgumentError("d_c must be non-negative")
    return math.atan(k_act * (d_c_m - d_th_m)) / math.pi + 0.5


def mean_pl_first_segment(d1_m: float, d_c_m: float, indicator: int, delta1_db: float,
                          c_offset_db: float, kappa: float, b1: float,
                          d_th_m: float = DEFAULT_D_TH_M, k_act: float = K_ACT_DEFAULT) -> float:
    """Post-corner segment loss of a first-order street.

    Saturating corner loss ``(delta1 + C*I) (1 - exp(-kappa d1))`` plus the
    activated distance term, which only applies beyond 1 m.
    """
    if not d1_m > 0:
        raise InvalidArgumentError(f"d1 must be positive, got {d1_m}")
    if not kappa > 0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa}")
    corner = (delta1_db + c_offset_db * indicator) * -math.expm1(-kappa * d1_m)
    if d1_m <= 1.0:
        return corner
    return corner + corner_activation(d_c_m, d_th_m, k_act) * 10.0 * b1 * math.log10(d1_m)


def mean_pl_second_segment(d2_m: float, b2: float) -> float:
    """Post-second-corner segment: ``10 b2 log10(d2)``."""
    if d2_m < 1.0:
        raise OutOfRangeError(f"d2 = {d2_m} m is below the 1 m reference distance")
    return 10.0 * b2 * math.log10(d2_m)


@dataclass(frozen=True)
class MeanPlResult:
    total_db: float
    per_segment_db: tuple[float, ...]
    order: int
    in_validity_range: bool = True


def _lookup(params: Mapping, street_id: str, n: int) -> Mapping[str, float]:
    try:
        p = params[(street_id, n)]
    except KeyError:
        raise UnsampledParameterError(f"no order-{n} parameters sampled for street {street_id}") from None
    return p if isinstance(p, Mapping) else p.values


def mean_pl_route(route: Route, params: Mapping, carrier_hz: float = DEFAULT_CARRIER_HZ,
                  d_th_m: float = DEFAULT_D_TH_M, k_act: float = K_ACT_DEFAULT) -> MeanPlResult:
    """Mean PL of one route, summed over its street segments.

    ``params`` maps ``(street_id, n)`` to the order-``n`` parameter realization
    of that street (a ``StreetParams`` or a plain name->value mapping).
    Segment ``n`` of the route uses the order-``n`` parameters of the street it
    runs on.  Distances below the 1 m reference are evaluated at 1 m and flag
    the result as out of range.
    """
    r = route.ap_first()
    seg = r.segment_lengths
    lo, hi = VALIDITY_BOUNDS_M[r.order]
    valid = lo < seg[-1] < hi and seg[0] >= 1.0

    p0 = _lookup(params, r.street_ids[0], 0)
    d_first = max(seg[0], 1.0)
    terms = [mean_pl_zeroth(d_first, p0["delta"], p0["exponent"], carrier_hz)]
    if r.order >= 1:
        p1 = _lookup(params, r.street_ids[1], 1)
        d1 = seg[1] if seg[1] > 0 else 1.0
        terms.append(mean_pl_first_segment(d1, seg[0], r.indicator, p1["delta"],
                                           p1["corner_offset"], p1["kappa"], p1["exponent"],
                                           d_th_m, k_act))
    if r.order == 2:
        p2 = _lookup(params, r.street_ids[2], 2)
        valid &= seg[2] >= 1.0
        terms.append(mean_pl_second_segment(max(seg[2], 1.0), p2["exponent"]))
    return MeanPlResult(float(sum(terms)), tuple(terms), r.order, bool(valid))


def combine_routes(pl_db: Sequence[float]) -> float:
    """Power-domain sum of parallel paths: ``-10 log10(sum 10^(-PL_i/10))``."""
    x = np.asarray(pl_db, dtype=float)
    if x.size == 0:
        raise InvalidArgumentError("cannot combine an empty list of path losses")
    if np.isnan(x).any() or np.isneginf(x).any():
        raise InvalidArgumentError("path losses must be finite (or +inf for 'no path')")
    if np.isposinf(x).all():
        return math.inf
    # sorted so the floating-point sum does not depend on input order
    return float(-logsumexp(-np.sort(x) * _LN10_OVER_10) / _LN10_OVER_10)


def combine_with_ort(pl_street_db: float, pl_ort_db: float) -> float:
    """Add an over-the-rooftop component in the power domain (+inf means none)."""
    return combine_routes([pl_street_db, pl_ort_db])


class Condition(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class AlphaBetaParams:
    delta_db: float
    beta: float
    sigma_s_db: float
    d_corr_m: float
    condition: Condition = Condition.LOS

    def __post_init__(self):
        if self.sigma_s_db < 0:
            raise InvalidArgumentError("sigma_s_db must be non-negative")
        if not self.d_corr_m > 0:
            raise InvalidArgumentError("d_corr_m must be positive")
        object.__setattr__(self, "condition", Condition(self.condition))


ALPHA_BETA_LOS = AlphaBetaParams(6.0, 1.58, 1.2, 9.0, Condition.LOS)
ALPHA_BETA_NLOS = AlphaBetaParams(-56.2, 6.3, 11.5, 1.0, Condition.NLOS)


def alpha_beta_pl(d_m: float, params: AlphaBetaParams, carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    """Euclidean log-distance baseline: ``delta + 10 beta log10(d) + FSPL_1m``."""
    if d_m < 1.0:
        raise OutOfRangeError(f"d = {d_m} m is below the 1 m reference distance")
    return params.delta_db + 10.0 * params.beta * math.log10(d_m) + fspl_1m(carrier_hz)
