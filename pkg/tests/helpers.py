"""
Naive loop oracles for the vectorized estimators
"""
import numpy as np

from weights import WeightArray


def weights_of(values, component=0, kind='simple'):
    return WeightArray(w=np.asarray(values, dtype=float), component_index=component, kind=kind)


def loop_coefficients(P, W):
    """alpha[r, s, k, l] and beta[m, k, l] by explicit sums over observations"""
    n_obs, n_comp = P.shape
    K = W.shape[1]
    alpha = np.zeros((n_comp, n_comp, K, K))
    beta = np.zeros((n_comp, K, K))
    for j in range(n_obs):
        for k in range(K):
            for l in range(K):
                for m in range(n_comp):
                    beta[m, k, l] += W[j, k] * W[j, l] * P[j, m] / n_obs
                    for s in range(n_comp):
                        alpha[m, s, k, l] += W[j, k] * W[j, l] * P[j, m] * P[j, s] / n_obs
    return alpha, beta


def loop_moments(x, W, Phi):
    """First moments (M, d) and mixed second moments (M, d, d) of Phi under each weight column"""
    n_obs, n_comp = W.shape
    d = Phi.shape[1]
    first = np.zeros((n_comp, d))
    second = np.zeros((n_comp, d, d))
    for m in range(n_comp):
        for j in range(n_obs):
            for a in range(d):
                first[m, a] += W[j, m] * Phi[j, a] / n_obs
                for b in range(d):
                    second[m, a, b] += W[j, m] * Phi[j, a] * Phi[j, b] / n_obs
    return first, second


def loop_sigma(alpha, beta, first, second, block_index):
    """Sigma entry by entry from the block formula"""
    n_comp = beta.shape[0]
    d = first.shape[1]
    Sigma = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            k, l = block_index[a], block_index[b]
            total = 0.0
            for m in range(n_comp):
                total += beta[m, k, l] * second[m, a, b]
            for r in range(n_comp):
                for s in range(n_comp):
                    total -= alpha[r, s, k, l] * first[r, a] * first[s, b]
            Sigma[a, b] = total
    return (Sigma + Sigma.T) / 2.0
