"""
Plug-in estimation of the asymptotic covariance of the moment estimators
and of the test covariance D
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from config import Config
from empirical import MomentModel
from weights import ConcentrationMatrix, WeightArray

logger = logging.getLogger(__name__)

ESTIMATOR_KINDS = ('simple', 'improved_plus', 'improved_minus', 'improved_pm')


@dataclass(frozen=True)
class CovarianceCoefficients:
    """
    Finite-N coefficient arrays

    alpha[r, s, k, l] = <a^k a^l p^r p^s>_N and beta[m, k, l] = <a^k a^l p^m>_N,
    where a^k are the weights of the component that g_k describes.
    """

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def M(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True)
class MomentEstimates:
    """
    Moment estimates needed by the test

    g_hat: long vector of g_k estimated on its own component, shape (d,)
    component_moments: g_k estimated on every component r, shape (M, d)
    g2_hat: mixed second moments g g' on every component m, shape (M, d, d)
    """

    g_hat: np.ndarray
    component_moments: np.ndarray
    g2_hat: np.ndarray
    block_index: np.ndarray
    estimator_kind: str = 'simple'

    @property
    def d(self) -> int:
        return self.g_hat.shape[0]

    def second_moment(self, m: int, k: int, l: int) -> np.ndarray:
        """The d_k x d_l block of g_k g_l' on component m"""
        rows = np.flatnonzero(self.block_index == k)
        cols = np.flatnonzero(self.block_index == l)
        return self.g2_hat[m][np.ix_(rows, cols)]


@dataclass(frozen=True)
class SigmaMatrix:
    """Estimated asymptotic covariance of sqrt(N)(g_hat - g)"""

    Sigma: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.Sigma)

    @property
    def has_negative_diagonal(self) -> bool:
        return bool(np.any(self.diagonal < 0.0))


def coefficient_matrices(P: ConcentrationMatrix, A: Sequence[WeightArray]) -> CovarianceCoefficients:
    """
    Averages <a^k a^l p^r p^s>_N and <a^k a^l p^m>_N

    Args:
        P: Concentration matrix
        A: One weight array per moment function g_k (the minimax weights of its component)

    Returns:
        CovarianceCoefficients
    """
    W = np.column_stack([a.w for a in A])
    if W.shape[0] != P.N:
        raise ValueError(f"Weights have length {W.shape[0]}, design has N={P.N}")
    alpha = np.einsum('jk,jl,jr,js->rskl', W, W, P.P, P.P, optimize=True) / P.N
    beta = np.einsum('jk,jl,jm->mkl', W, W, P.P, optimize=True) / P.N
    return CovarianceCoefficients(alpha=alpha, beta=beta)


def second_moment_estimates(x, weights: Sequence[WeightArray], model: MomentModel,
                            kind: str = 'simple') -> MomentEstimates:
    """
    First and mixed second moment estimates of every g_k on every component

    Args:
        x: Observations
        weights: One weight array per component (minimax for 'simple', b-weights otherwise)
        model: Moment model
        kind: Estimator kind the weights represent

    Returns:
        MomentEstimates
    """
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"Unknown estimator kind: {kind}")
    x = np.asarray(x, dtype=float).ravel()
    W = np.column_stack([w.w for w in weights])
    n_obs = x.shape[0]
    if W.shape[0] != n_obs:
        raise ValueError(f"Weights have length {W.shape[0]}, sample has {n_obs} observations")
    for w in weights:
        if w.kind != kind:
            raise ValueError(f"Expected {kind} weights, got {w.kind}")

    Phi = model.evaluate(x)
    component_moments = W.T @ Phi / n_obs
    g2_hat = np.einsum('jm,ja,jb->mab', W, Phi, Phi, optimize=True) / n_obs

    block_index = model.block_index()
    own_component = np.array([model.funcs[k].component for k in block_index])
    g_hat = component_moments[own_component, np.arange(model.d)]

    return MomentEstimates(
        g_hat=g_hat,
        component_moments=component_moments,
        g2_hat=g2_hat,
        block_index=block_index,
        estimator_kind=kind,
    )


def sigma_matrix(coef: CovarianceCoefficients, est: MomentEstimates) -> SigmaMatrix:
    """
    Assemble Sigma from the blocks
    sum_m beta_m^{kl} g_{kl}^m - sum_{r,s} alpha_{rs}^{kl} g_k^r (g_l^s)'

    Args:
        coef: Coefficient arrays
        est: Moment estimates (simple or improved)

    Returns:
        Symmetrized SigmaMatrix
    """
    blk = est.block_index
    # expand K x K coefficients to d x d by repeating each block index
    beta = coef.beta[:, blk][:, :, blk]
    alpha = coef.alpha[:, :, blk][:, :, :, blk]
    G = est.component_moments

    first = np.einsum('mab,mab->ab', beta, est.g2_hat)
    second = np.einsum('rsab,ra,sb->ab', alpha, G, G, optimize=True)
    Sigma = first - second
    Sigma = (Sigma + Sigma.T) / 2.0

    result = SigmaMatrix(Sigma=Sigma)
    if result.has_negative_diagonal:
        logger.debug(f"Sigma estimate ({est.estimator_kind}) has negative diagonal entries")
    return result


def is_positive_definite(D: np.ndarray) -> bool:
    """Cholesky test with pivots bounded below by a fraction of the largest diagonal"""
    D = np.atleast_2d(D)
    scale = float(np.max(np.diag(D))) if D.size else 0.0
    if not np.isfinite(scale) or scale <= 0.0:
        return False
    try:
        L = cholesky(D, lower=True)
    except LinAlgError:
        return False
    pivots = np.diag(L) ** 2
    return bool(np.all(pivots > Config.PD_PIVOT_TOLERANCE * scale))


def test_covariance(T_jac: np.ndarray, Sigma: SigmaMatrix) -> Tuple[np.ndarray, bool]:
    """
    D = J Sigma J' and whether it is numerically positive definite

    Args:
        T_jac: L x d Jacobian of the hypothesis map
        Sigma: Estimated Sigma

    Returns:
        Tuple of (D, positive-definite flag)
    """
    J = np.atleast_2d(np.asarray(T_jac, dtype=float))
    if J.shape[1] != Sigma.Sigma.shape[0]:
        raise ValueError(f"Jacobian has {J.shape[1]} columns, Sigma is {Sigma.Sigma.shape[0]}-dimensional")
    D = J @ Sigma.Sigma @ J.T
    D = (D + D.T) / 2.0
    return D, is_positive_definite(D)


# not a pytest test when imported into test modules
test_covariance.__test__ = False
