"""
Named hypotheses on component moments with analytic Jacobians

Library constructors take 0-based component indices; HypothesisSpec and its
text grammar use the 1-based numbering printed in reports.
"""
import logging
import shlex
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from empirical import MomentFunction, MomentModel
from moment_tests import Hypothesis

logger = logging.getLogger(__name__)

HYPOTHESIS_KINDS = (
    'mean_homogeneity_all',
    'mean_equality_pair',
    'mean_value',
    'variance_equality_pair',
    'variance_homogeneity_all',
    'distribution_homogeneity_grouped',
)


class HypothesisSpecError(ValueError):
    """Hypothesis text or parameters cannot be turned into a test"""
    pass


def _identity(x):
    return x


def _powers(x):
    return np.column_stack([x, x ** 2])


def _check_component(index: int, M: int):
    if not 0 <= index < M:
        raise HypothesisSpecError(f"Component index {index + 1} outside 1..{M}")


def _check_pair(i: int, k: int, M: int):
    _check_component(i, M)
    _check_component(k, M)
    if i == k:
        raise HypothesisSpecError("A pair hypothesis needs two different components")


def _chain_differences(size: int) -> np.ndarray:
    """(size-1) x size matrix mapping y to (y_1 - y_2, ..., y_{size-1} - y_size)"""
    return np.eye(size)[:-1] - np.eye(size, k=1)[:-1]


def mean_homogeneity(M: int) -> Tuple[MomentModel, Hypothesis]:
    """All component means are equal: g_m(x) = x, T(y) = chained differences"""
    if M < 2:
        raise HypothesisSpecError("Mean homogeneity needs at least two components")
    model = MomentModel(tuple(MomentFunction(f"x@{m + 1}", _identity, 1, m) for m in range(M)))
    C = _chain_differences(M)
    hypothesis = Hypothesis(
        name='='.join(f"mu{m + 1}" for m in range(M)),
        L=M - 1,
        T=lambda y: C @ y,
        jacobian=lambda y: C,
    )
    return model, hypothesis


def mean_equality_pair(i: int, k: int, M: int) -> Tuple[MomentModel, Hypothesis]:
    """Means of components i and k are equal"""
    _check_pair(i, k, M)
    model = MomentModel((MomentFunction(f"x@{i + 1}", _identity, 1, i),
                         MomentFunction(f"x@{k + 1}", _identity, 1, k)))
    J = np.array([[1.0, -1.0]])
    hypothesis = Hypothesis(
        name=f"mu{i + 1}=mu{k + 1}",
        L=1,
        T=lambda y: np.array([y[0] - y[1]]),
        jacobian=lambda y: J,
    )
    return model, hypothesis


def mean_value(i: int, value: float, M: int) -> Tuple[MomentModel, Hypothesis]:
    """Mean of component i equals a given value"""
    _check_component(i, M)
    model = MomentModel((MomentFunction(f"x@{i + 1}", _identity, 1, i),))
    hypothesis = Hypothesis(
        name=f"mu{i + 1}={value:g}",
        L=1,
        T=lambda y: np.array([y[0] - value]),
        jacobian=lambda y: np.array([[1.0]]),
    )
    return model, hypothesis


def _variance_jacobian(y: np.ndarray, C: np.ndarray) -> np.ndarray:
    # d var_m / d(y_m1, y_m2) = (-2 y_m1, 1)
    grads = np.zeros((C.shape[1], 2 * C.shape[1]))
    for m in range(C.shape[1]):
        grads[m, 2 * m] = -2.0 * y[2 * m]
        grads[m, 2 * m + 1] = 1.0
    return C @ grads


def _variances(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1, 2)
    return y[:, 1] - y[:, 0] ** 2


def variance_equality_pair(i: int, k: int, M: int) -> Tuple[MomentModel, Hypothesis]:
    """
    Variances of components i and k are equal

    g(x) = (x, x^2) on both components and
    T(y) = (y12 - y11^2) - (y22 - y21^2), a scalar, so the test has one degree of freedom.
    """
    _check_pair(i, k, M)
    model = MomentModel((MomentFunction(f"(x,x^2)@{i + 1}", _powers, 2, i),
                         MomentFunction(f"(x,x^2)@{k + 1}", _powers, 2, k)))
    C = _chain_differences(2)
    hypothesis = Hypothesis(
        name=f"sigma2_{i + 1}=sigma2_{k + 1}",
        L=1,
        T=lambda y: C @ _variances(y),
        jacobian=lambda y: _variance_jacobian(y, C),
    )
    return model, hypothesis


def variance_homogeneity_all(M: int) -> Tuple[MomentModel, Hypothesis]:
    """All component variances are equal: chained differences of variances"""
    if M < 2:
        raise HypothesisSpecError("Variance homogeneity needs at least two components")
    model = MomentModel(tuple(MomentFunction(f"(x,x^2)@{m + 1}", _powers, 2, m) for m in range(M)))
    C = _chain_differences(M)
    hypothesis = Hypothesis(
        name='='.join(f"sigma2_{m + 1}" for m in range(M)),
        L=M - 1,
        T=lambda y: C @ _variances(y),
        jacobian=lambda y: _variance_jacobian(y, C),
    )
    return model, hypothesis


def _cell_indicators(cuts: np.ndarray):
    def indicators(x):
        # cell of x among (-inf, c1), [c1, c2), ..., [c_{r-1}, inf)
        cell = np.searchsorted(cuts, x, side='right')
        return (cell[:, None] == np.arange(len(cuts))[None, :]).astype(float)
    return indicators


def _check_breakpoints(cells: Sequence[float]) -> np.ndarray:
    cells = np.asarray(cells, dtype=float)
    if cells.ndim != 1 or cells.size < 3:
        raise HypothesisSpecError("Grouping needs at least three breakpoints (two cells)")
    if not np.all(np.diff(cells) > 0):
        raise HypothesisSpecError("Grouping breakpoints must be strictly increasing")
    if cells[0] != -np.inf or cells[-1] != np.inf:
        raise HypothesisSpecError(f"Outer breakpoints must be -inf and inf, got {cells[0]:g} and {cells[-1]:g}")
    return cells


def distribution_homogeneity_grouped(i: int, k: int, cells: Sequence[float],
                                     M: int) -> Tuple[MomentModel, Hypothesis]:
    """
    Components i and k have equal probabilities on grouped cells

    Breakpoints -inf = c0 < c1 < ... < cr = inf define r cells that partition
    the real line. g is the indicator vector of the first r - 1 cells.
    """
    _check_pair(i, k, M)
    cells = _check_breakpoints(cells)

    cuts = cells[1:-1]
    r_minus_1 = cuts.size
    indicators = _cell_indicators(cuts)
    model = MomentModel((MomentFunction(f"cells@{i + 1}", indicators, r_minus_1, i),
                         MomentFunction(f"cells@{k + 1}", indicators, r_minus_1, k)))
    J = np.hstack([np.eye(r_minus_1), -np.eye(r_minus_1)])
    hypothesis = Hypothesis(
        name=f"F{i + 1}=F{k + 1} ({r_minus_1 + 1} cells)",
        L=r_minus_1,
        T=lambda y: J @ y,
        jacobian=lambda y: J,
    )
    return model, hypothesis


@dataclass(frozen=True)
class HypothesisSpec:
    """Serializable description of a named hypothesis (1-based component indices)"""

    kind: str
    M: int
    indices: Tuple[int, ...] = ()
    cells: Tuple[float, ...] = ()
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in HYPOTHESIS_KINDS:
            raise HypothesisSpecError(f"Unknown hypothesis kind: {self.kind}")
        if self.M < 1:
            raise HypothesisSpecError("M must be positive")
        for index in self.indices:
            if not 1 <= index <= self.M:
                raise HypothesisSpecError(f"Component index {index} outside 1..{self.M}")
        if self.kind == 'distribution_homogeneity_grouped':
            _check_breakpoints(self.cells)

    def build(self) -> Tuple[MomentModel, Hypothesis]:
        """Construct the moment model and hypothesis"""
        idx = [i - 1 for i in self.indices]
        if self.kind == 'mean_homogeneity_all':
            return mean_homogeneity(self.M)
        if self.kind == 'variance_homogeneity_all':
            return variance_homogeneity_all(self.M)
        if self.kind == 'mean_value':
            return mean_value(idx[0], self.value, self.M)
        if self.kind == 'mean_equality_pair':
            return mean_equality_pair(idx[0], idx[1], self.M)
        if self.kind == 'variance_equality_pair':
            return variance_equality_pair(idx[0], idx[1], self.M)
        return distribution_homogeneity_grouped(idx[0], idx[1], self.cells, self.M)

    def to_text(self) -> str:
        """Inverse of parse_hypothesis_spec"""
        if self.kind == 'mean_homogeneity_all':
            return 'means-all'
        if self.kind == 'variance_homogeneity_all':
            return 'vars-all'
        if self.kind == 'mean_value':
            return f"mean {self.indices[0]} value={self.value!r}"
        if self.kind == 'mean_equality_pair':
            return f"means {self.indices[0]} {self.indices[1]}"
        if self.kind == 'variance_equality_pair':
            return f"vars {self.indices[0]} {self.indices[1]}"
        cells = ','.join(repr(c) for c in self.cells)
        return f"dist {self.indices[0]} {self.indices[1]} cells={cells}"


def _parse_indices(tokens, count: int, text: str) -> Tuple[int, ...]:
    if len(tokens) != count:
        raise HypothesisSpecError(f"'{text}': expected {count} component indices")
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise HypothesisSpecError(f"'{text}': component indices must be integers")


def parse_hypothesis_spec(text: str, M: int) -> HypothesisSpec:
    """
    Parse the hypothesis mini-grammar

    means-all | vars-all | means i k | vars i k | mean i value=c |
    dist i k cells=-inf,c1,...,c(r-1),inf

    Args:
        text: Hypothesis text
        M: Number of mixture components

    Returns:
        HypothesisSpec
    """
    tokens = shlex.split(text.strip())
    if not tokens:
        raise HypothesisSpecError("Empty hypothesis")
    head, rest = tokens[0].lower(), tokens[1:]
    options = dict(t.split('=', 1) for t in rest if '=' in t)
    positional = [t for t in rest if '=' not in t]

    if head == 'means-all':
        kind, indices = 'mean_homogeneity_all', _parse_indices(positional, 0, text)
    elif head == 'vars-all':
        kind, indices = 'variance_homogeneity_all', _parse_indices(positional, 0, text)
    elif head == 'means':
        kind, indices = 'mean_equality_pair', _parse_indices(positional, 2, text)
    elif head == 'vars':
        kind, indices = 'variance_equality_pair', _parse_indices(positional, 2, text)
    elif head == 'mean':
        kind, indices = 'mean_value', _parse_indices(positional, 1, text)
    elif head == 'dist':
        kind, indices = 'distribution_homogeneity_grouped', _parse_indices(positional, 2, text)
    else:
        raise HypothesisSpecError(f"Unknown hypothesis '{head}' in '{text}'")

    value, cells = 0.0, ()
    try:
        if kind == 'mean_value':
            value = float(options.get('value', 0.0))
        if kind == 'distribution_homogeneity_grouped':
            if 'cells' not in options:
                raise HypothesisSpecError(f"'{text}': dist needs cells=-inf,c1,...,inf")
            cells = tuple(float(c) for c in options['cells'].split(','))
    except ValueError as e:
        if isinstance(e, HypothesisSpecError):
            raise
        raise HypothesisSpecError(f"'{text}': numeric option expected ({e})")

    spec = HypothesisSpec(kind=kind, M=M, indices=indices, cells=cells, value=value)
    logger.debug(f"Parsed hypothesis '{text}' as {spec}")
    return spec
