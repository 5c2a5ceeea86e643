"""
Concentration design, Gram matrix and minimax weights for mixtures with
varying concentrations
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from config import Config

logger = logging.getLogger(__name__)

WEIGHT_KINDS = ('simple', 'improved_plus', 'improved_minus', 'improved_pm')


class InvalidConcentrations(ValueError):
    """Concentration matrix violates the probability constraints"""
    pass


class SingularDesign(ValueError):
    """The concentration design cannot separate the mixture components"""
    pass


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ConcentrationMatrix:
    """Known mixing probabilities, one row per observation and one column per component"""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.ndim != 2:
            raise InvalidConcentrations(f"Concentrations must be a 2-d array, got shape {P.shape}")

        errors = []
        n_obs, n_comp = P.shape
        if n_comp < 1:
            errors.append("at least one component is required")
        if n_obs < n_comp:
            errors.append(f"need N >= M, got N={n_obs}, M={n_comp}")
        if not np.all(np.isfinite(P)):
            errors.append("entries must be finite")
        elif np.any(P < 0.0) or np.any(P > 1.0):
            errors.append("entries must lie in [0, 1]")
        else:
            bad_rows = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > Config.ROW_SUM_TOLERANCE)
            if bad_rows.size:
                errors.append(f"{bad_rows.size} rows do not sum to 1 (first: row {bad_rows[0]})")

        if errors:
            raise InvalidConcentrations(f"Invalid concentrations: {', '.join(errors)}")

        object.__setattr__(self, 'P', _frozen(P))

    @classmethod
    def from_array(cls, P, renormalize: bool = False) -> 'ConcentrationMatrix':
        """
        Build a concentration matrix, optionally dividing each row by its sum

        Args:
            P: N x M array of concentrations
            renormalize: Rescale rows so they sum to one

        Returns:
            Validated ConcentrationMatrix
        """
        P = np.asarray(P, dtype=float)
        if renormalize:
            sums = P.sum(axis=1, keepdims=True)
            if np.any(sums <= 0.0):
                raise InvalidConcentrations("Cannot renormalize rows with non-positive sum")
            P = P / sums
        return cls(P)

    @property
    def N(self) -> int:
        return self.P.shape[0]

    @property
    def M(self) -> int:
        return self.P.shape[1]


@dataclass(frozen=True)
class GramMatrix:
    """Gamma_N = P'P / N with its inverse and a condition estimate"""

    Gamma: np.ndarray
    GammaInv: np.ndarray
    condition_estimate: float
    factor: tuple = field(repr=False, compare=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve Gamma X = rhs through the stored Cholesky factor"""
        return cho_solve(self.factor, rhs)


@dataclass(frozen=True)
class WeightArray:
    """Per-observation weights of one mixture component"""

    w: np.ndarray
    component_index: int
    kind: str = 'simple'
    mass_deficit: bool = False

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"Unknown weight kind: {self.kind}")
        object.__setattr__(self, 'w', _frozen(self.w))

    @property
    def N(self) -> int:
        return self.w.shape[0]

    @property
    def mass(self) -> float:
        """(1/N) sum of weights, i.e. the total mass of the weighted ECDF"""
        return float(self.w.mean())


def gram_matrix(P: ConcentrationMatrix) -> GramMatrix:
    """
    Compute the Gram matrix of the concentration design

    Args:
        P: Concentration matrix

    Returns:
        GramMatrix with Gamma_N, its inverse and condition estimate

    Raises:
        SingularDesign: if the reciprocal condition estimate falls below the threshold
    """
    Gamma = P.P.T @ P.P / P.N
    Gamma = (Gamma + Gamma.T) / 2.0

    eigenvalues = np.linalg.eigvalsh(Gamma)
    largest = float(np.max(np.abs(eigenvalues)))
    rcond = float(np.min(eigenvalues) / largest) if largest > 0 else 0.0
    condition = 1.0 / rcond if rcond > 0 else np.inf
    logger.debug(f"Gram matrix for N={P.N}, M={P.M}: condition estimate {condition:.3e}")

    if rcond < Config.SINGULAR_RCOND:
        raise SingularDesign(
            f"Gram matrix is numerically singular (reciprocal condition {rcond:.3e} "
            f"< {Config.SINGULAR_RCOND:g}); the design cannot separate the components"
        )

    try:
        factor = cho_factor(Gamma, lower=True)
    except LinAlgError as e:
        raise SingularDesign(f"Gram matrix factorization failed: {e}") from e

    GammaInv = cho_solve(factor, np.eye(P.M))
    return GramMatrix(
        Gamma=_frozen(Gamma),
        GammaInv=_frozen((GammaInv + GammaInv.T) / 2.0),
        condition_estimate=condition,
        factor=factor,
    )


def minimax_weights(P: ConcentrationMatrix, G: GramMatrix, m: int) -> WeightArray:
    """
    Minimax weights a^m = P Gamma^{-1} e_m of component m

    Args:
        P: Concentration matrix
        G: Gram matrix of P
        m: Component index (0-based)

    Returns:
        WeightArray of kind 'simple'
    """
    if not 0 <= m < P.M:
        raise IndexError(f"Component index {m} outside 0..{P.M - 1}")
    e_m = np.zeros(P.M)
    e_m[m] = 1.0
    return WeightArray(w=P.P @ G.solve(e_m), component_index=m, kind='simple')


def all_minimax_weights(P: ConcentrationMatrix, G: GramMatrix = None) -> List[WeightArray]:
    """Minimax weights for every component, computed with one solve"""
    G = G if G is not None else gram_matrix(P)
    W = G.solve(P.P.T).T
    weights = [WeightArray(w=W[:, m], component_index=m, kind='simple') for m in range(P.M)]
    residual = unbiasedness_residual(P, weights)
    if residual > Config.UNBIASEDNESS_TOLERANCE:
        logger.warning(f"Minimax weights are unbiased only up to {residual:.3e} "
                       f"(condition estimate {G.condition_estimate:.3e})")
    return weights


def unbiasedness_residual(P: ConcentrationMatrix, weights: List[WeightArray]) -> float:
    """Largest deviation of <a^m p^i>_N from the Kronecker delta"""
    W = np.column_stack([w.w for w in weights])
    identity = W.T @ P.P / P.N
    return float(np.max(np.abs(identity - np.eye(P.M))))
