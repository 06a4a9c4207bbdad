"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each oracle recomputes
its quantity from first principles (enumeration, exact rationals or
quadrature).
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def median_score_moments(k: int, a: Fraction) -> tuple[Fraction, Fraction]:
    """Mean and variance of the {0, 1/2, 1} median score by enumerating all 2^k sequences."""
    mean = Fraction(0)
    second = Fraction(0)
    for seq in itertools.product((0, 1), repeat=k):
        ones = sum(seq)
        prob = a**ones * (1 - a) ** (k - ones)
        score = Fraction(1) if 2 * ones > k else Fraction(1, 2) if 2 * ones == k else Fraction(0)
        mean += prob * score
        second += prob * score * score
    return mean, second - mean * mean


def risk_argmin(a, b, c, d, theta) -> Fraction:
    """Bayes decision for P(T=1) = theta; exact arithmetic, ties go to 1/2."""
    a, b, c, d, theta = (Fraction(x) for x in (a, b, c, d, theta))
    r0 = c * theta
    r_half = a + (d - a) * theta
    r1 = b * (1 - theta)
    best = min(r0, r_half, r1)
    if r_half == best:
        return Fraction(1, 2)
    return Fraction(0) if r0 == best else Fraction(1)


def majority_window(n: int, v_U: Fraction) -> list[int]:
    """Counts s that the median rule calls positive but the average rule with v_U does not."""
    return [s for s in range(n + 1) if 2 * s > n and Fraction(s, n) <= v_U]


def posterior_quadrature(ns, ss, prior=(0.5, 0.5, 2, 2, 2, 2), nodes=200, predict=()):
    """Posterior means of (theta, p, q), E[Y_L] per individual and predictive scores.

    The unnormalised posterior is integrated on a tensor grid: Gauss-Jacobi
    in theta (absorbing the Beta prior's endpoint singularities) and
    Gauss-Legendre in p and q on (0, 1/2).
    """
    a_T, b_T, a_FP, b_FP, a_FN, b_FN = prior
    ns = np.asarray(ns, float)
    ss = np.asarray(ss, float)
    x, w_theta = roots_jacobi(nodes, b_T - 1, a_T - 1)
    theta = (x + 1) / 2
    z, w = roots_legendre(nodes)
    r = (z + 1) / 4
    w_r = w / 4
    p = r[:, None]
    q = r[None, :]
    log_prior_pq = ((a_FP - 1) * np.log(p) + (b_FP - 1) * np.log1p(-p)
                    + (a_FN - 1) * np.log(q) + (b_FN - 1) * np.log1p(-q))
    w_pq = w_r[:, None] * w_r[None, :]
    # log of the two mixture components per individual: shape (N, P, Q) without theta
    log_pos = ss[:, None, None] * np.log1p(-q) + (ns - ss)[:, None, None] * np.log(q) + 0 * p
    log_neg = ss[:, None, None] * np.log(p) + (ns - ss)[:, None, None] * np.log1p(-p) + 0 * q
    pred = [(float(n), float(s)) for n, s in predict]
    pred_pos = np.array([s * np.log1p(-q) + (n - s) * np.log(q) + 0 * p for n, s in pred]).reshape(len(pred), *w_pq.shape)
    pred_neg = np.array([s * np.log(p) + (n - s) * np.log1p(-p) + 0 * q for n, s in pred]).reshape(len(pred), *w_pq.shape)

    # streaming accumulation with a running log-scale to avoid underflow
    shift = -np.inf
    Z = m_theta = m_p = m_q = 0.0
    m_y = np.zeros(len(ns))
    m_pred = np.zeros(len(pred))
    for th, wt in zip(theta, w_theta):
        lp1 = np.log(th) + log_pos
        lp0 = np.log1p(-th) + log_neg
        mix = np.logaddexp(lp1, lp0)
        log_w = mix.sum(axis=0) + log_prior_pq + np.log(w_pq) + np.log(wt)
        top = log_w.max()
        if top > shift:
            scale = np.exp(shift - top) if np.isfinite(shift) else 0.0
            Z, m_theta, m_p, m_q = Z * scale, m_theta * scale, m_p * scale, m_q * scale
            m_y *= scale
            m_pred *= scale
            shift = top
        wgt = np.exp(log_w - shift)
        tot = wgt.sum()
        Z += tot
        m_theta += th * tot
        m_p += (wgt * p).sum()
        m_q += (wgt * q).sum()
        m_y += (wgt[None] * np.exp(lp1 - mix)).sum(axis=(1, 2))
        if pred:
            yp = 1 / (1 + np.exp(np.log1p(-th) + pred_neg - np.log(th) - pred_pos))
            m_pred += (wgt[None] * yp).sum(axis=(1, 2))
    return {
        "theta": m_theta / Z,
        "p": m_p / Z,
        "q": m_q / Z,
        "y": m_y / Z,
        "predict": m_pred / Z,
    }
