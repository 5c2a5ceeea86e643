"""
Weighted empirical CDFs, their monotone improvements and moment estimators

All CDFs use the strict-inequality convention F(x) = (1/N) sum_j w_j 1{xi_j < x},
so a StepCdf is left-continuous and its value on (knot_i, knot_{i+1}] is values[i].
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from config import Config
from weights import WeightArray

logger = logging.getLogger(__name__)

CDF_KINDS = ('raw', 'improved_plus', 'improved_minus', 'improved_pm')


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class StepCdf:
    """Piecewise-constant CDF stored by its knots and the values right of each knot"""

    knots: np.ndarray
    values: np.ndarray
    n_obs: int
    kind: str = 'raw'

    def __post_init__(self):
        if self.kind not in CDF_KINDS:
            raise ValueError(f"Unknown CDF kind: {self.kind}")
        knots = _frozen(self.knots)
        values = _frozen(self.values)
        if knots.shape != values.shape or knots.ndim != 1:
            raise ValueError("knots and values must be 1-d arrays of the same length")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, 'knots', knots)
        object.__setattr__(self, 'values', values)

    def __call__(self, x):
        # number of knots strictly below x
        idx = np.searchsorted(self.knots, x, side='left')
        return np.r_[0.0, self.values][idx]

    @property
    def total_mass(self) -> float:
        return float(self.values[-1]) if self.values.size else 0.0

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(np.r_[0.0, self.values])

    def interval_values(self) -> np.ndarray:
        """Values on (-inf, k_1], (k_1, k_2], ..., (k_n, +inf)"""
        return np.r_[0.0, self.values]


@dataclass(frozen=True)
class MomentFunction:
    """A vector-valued moment function g_k attached to one mixture component"""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    component: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a sample; always returns an (N, dim) array"""
        values = np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)
        values = values.reshape(len(x), -1)
        if values.shape[1] != self.dim:
            raise ValueError(f"Moment function {self.name} returned dimension "
                             f"{values.shape[1]}, expected {self.dim}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Moment function {self.name} is not finite on the sample")
        return values


@dataclass(frozen=True)
class MomentModel:
    """Moment functions g_1..g_K and the component each one describes"""

    funcs: Tuple[MomentFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, 'funcs', tuple(self.funcs))
        if not self.funcs:
            raise ValueError("A moment model needs at least one moment function")

    @property
    def K(self) -> int:
        return len(self.funcs)

    @property
    def dims(self) -> List[int]:
        return [g.dim for g in self.funcs]

    @property
    def d(self) -> int:
        return sum(self.dims)

    @property
    def component_of(self) -> Dict[int, int]:
        return {k: g.component for k, g in enumerate(self.funcs)}

    def slices(self) -> List[slice]:
        """Position of each g_k inside the long vector"""
        bounds = np.cumsum([0] + self.dims)
        return [slice(int(bounds[k]), int(bounds[k + 1])) for k in range(self.K)]

    def block_index(self) -> np.ndarray:
        """For each coordinate of the long vector, the index k of its moment function"""
        return np.repeat(np.arange(self.K), self.dims)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Stack every g_k(x) column-wise into an (N, d) array"""
        return np.hstack([g.evaluate(x) for g in self.funcs])


def _as_sample(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("Sample contains non-finite observations")
    return x


def weighted_ecdf(x: Sequence[float], w: WeightArray) -> StepCdf:
    """
    Raw weighted empirical CDF (1/N) sum_j w_j 1{x_j < t}

    Args:
        x: Observations
        w: Weights of one component

    Returns:
        StepCdf of kind 'raw'; may be non-monotone and leave [0, 1]
    """
    x = _as_sample(x)
    if x.shape[0] != w.N:
        raise ValueError(f"Sample length {x.shape[0]} does not match weight length {w.N}")
    knots, inverse = np.unique(x, return_inverse=True)
    jumps = np.bincount(inverse, weights=w.w, minlength=knots.size) / x.shape[0]
    return StepCdf(knots=knots, values=np.cumsum(jumps), n_obs=x.shape[0], kind='raw')


def improve_plus(F: StepCdf) -> StepCdf:
    """Upward improvement min(1, sup_{y<x} F(y))"""
    # F is 0 left of the first knot, so the running maximum starts at 0
    running_max = np.maximum.accumulate(np.maximum(F.values, 0.0))
    return StepCdf(knots=F.knots, values=np.minimum(running_max, 1.0),
                   n_obs=F.n_obs, kind='improved_plus')


def improve_minus(F: StepCdf) -> StepCdf:
    """Downward improvement inf_{y>=x} F(y), clipped to [0, 1]"""
    running_min = np.minimum.accumulate(F.values[::-1])[::-1]
    return StepCdf(knots=F.knots, values=np.clip(running_min, 0.0, 1.0),
                   n_obs=F.n_obs, kind='improved_minus')


def improve_pm(F: StepCdf) -> StepCdf:
    """Combined improvement: F+ below 1/2, F- above 1/2, 1/2 in between"""
    plus = improve_plus(F).values
    minus = improve_minus(F).values
    values = np.where(plus <= 0.5, plus, np.where(minus >= 0.5, minus, 0.5))
    return StepCdf(knots=F.knots, values=values, n_obs=F.n_obs, kind='improved_pm')


IMPROVEMENTS = {
    'improved_plus': improve_plus,
    'improved_minus': improve_minus,
    'improved_pm': improve_pm,
}


def improved_weights(x: Sequence[float], F_star: StepCdf) -> WeightArray:
    """
    Observation weights b reproducing an improved CDF

    Each knot's jump times N is shared equally between the observations tied at it.

    Args:
        x: Observations the CDF was built from
        F_star: Improved CDF

    Returns:
        WeightArray of the improved kind; mass_deficit is set when clipping removed mass
    """
    if F_star.kind == 'raw':
        raise ValueError("improved_weights expects an improved CDF")
    x = _as_sample(x)
    knots, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    if knots.shape != F_star.knots.shape or np.any(knots != F_star.knots):
        raise ValueError("The improved CDF was not built from this sample")

    per_knot = x.shape[0] * F_star.jumps / counts
    b = per_knot[inverse]
    deficit = F_star.total_mass < 1.0 - Config.MASS_TOLERANCE
    if deficit:
        logger.debug(f"Improved CDF ({F_star.kind}) has mass {F_star.total_mass:.6f} < 1")
    return WeightArray(w=b, component_index=-1, kind=F_star.kind, mass_deficit=deficit)


def improve_weights(x: Sequence[float], a: WeightArray, kind: str = 'improved_pm') -> WeightArray:
    """Improved weights of a component straight from its simple weights"""
    if kind not in IMPROVEMENTS:
        raise ValueError(f"Unknown improvement: {kind}")
    F_star = IMPROVEMENTS[kind](weighted_ecdf(x, a))
    b = improved_weights(x, F_star)
    return WeightArray(w=b.w, component_index=a.component_index, kind=kind,
                       mass_deficit=b.mass_deficit)


def _weighted_average(x, w: WeightArray, g: Callable) -> np.ndarray:
    x = _as_sample(x)
    if x.shape[0] != w.N:
        raise ValueError(f"Sample length {x.shape[0]} does not match weight length {w.N}")
    values = np.asarray(g(x), dtype=float).reshape(x.shape[0], -1)
    return w.w @ values / x.shape[0]


def simple_moment(x: Sequence[float], w: WeightArray, g: Callable) -> np.ndarray:
    """(1/N) sum_j a_j g(x_j) with minimax weights"""
    return _weighted_average(x, w, g)


def improved_moment(x: Sequence[float], b: WeightArray, g: Callable) -> np.ndarray:
    """(1/N) sum_j b_j g(x_j) with the weights of an improved CDF"""
    return _weighted_average(x, b, g)


def component_mean_variance(x: Sequence[float], w: WeightArray) -> Tuple[float, float]:
    """Mean and variance of one component, E[x^2] - E[x]^2 under the weights"""
    first, second = _weighted_average(x, w, lambda t: np.column_stack([t, t ** 2]))
    return float(first), float(second - first ** 2)
