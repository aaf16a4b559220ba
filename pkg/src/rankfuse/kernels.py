"""Random draws and Gaussian-conditional algebra shared by the samplers.

Notation follows the latent model ``Z_j = V eta + noise`` with
``V = (I_n | X)`` and ``eta = (alpha, beta) ~ N(0, Lambda)``,
``Lambda = diag(sigma_alpha^2 I_n, sigma_beta^2 I_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, solve_triangular
from scipy.special import ndtr, ndtri

# beyond this many sd from the mean the exponential rejection sampler is used
TAIL_CUTOFF = 4.0
MIN_WIDTH = 1e-12


class DegenerateError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


# -- truncated normal -------------------------------------------------------

def truncnorm_draws(mean, sd, lower, upper, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draws from N(mean, sd^2) restricted to (lower, upper)."""
    mean, sd, lower, upper = np.broadcast_arrays(
        np.asarray(mean, float), np.asarray(sd, float),
        np.asarray(lower, float), np.asarray(upper, float))
    shape = mean.shape
    mean, sd, lower, upper = (x.ravel() for x in (mean, sd, lower, upper))
    if np.any(sd <= 0):
        raise ValueError("sd must be positive")
    if np.any(lower >= upper):
        bad = np.flatnonzero(lower >= upper)[0]
        raise ValueError(f"empty interval ({lower[bad]}, {upper[bad]})")

    # collisions at machine precision; widen so a draw exists
    narrow = (upper - lower) < MIN_WIDTH
    if np.any(narrow):
        lower = np.where(narrow, lower - MIN_WIDTH, lower)
        upper = np.where(narrow, upper + MIN_WIDTH, upper)

    a = (lower - mean) / sd
    b = (upper - mean) / sd
    x = np.empty_like(a)

    right = a >= TAIL_CUTOFF
    left = b <= -TAIL_CUTOFF
    central = ~(right | left)

    if np.any(central):
        ac, bc = a[central], b[central]
        u = rng.random(ac.size)
        # work on the side of zero where the interval lives to keep precision
        upper_side = ac > 0
        xs = np.empty_like(ac)
        if np.any(upper_side):
            sa, sb = ndtr(-ac[upper_side]), ndtr(-bc[upper_side])
            xs[upper_side] = -ndtri(sa - u[upper_side] * (sa - sb))
        lo = ~upper_side
        if np.any(lo):
            fa, fb = ndtr(ac[lo]), ndtr(bc[lo])
            xs[lo] = ndtri(fa + u[lo] * (fb - fa))
        x[central] = xs
    if np.any(right):
        x[right] = _tail_draws(a[right], b[right], rng)
    if np.any(left):
        x[left] = -_tail_draws(-b[left], -a[left], rng)

    out = mean + sd * x
    # rounding can land on a bound; pull strictly inside
    out = np.where(out <= lower, np.nextafter(lower, upper), out)
    out = np.where(out >= upper, np.nextafter(upper, lower), out)
    return out.reshape(shape)


def _tail_draws(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard normal on [a, b] with a >= TAIL_CUTOFF, by rejection.

    Wide intervals use the shifted-exponential proposal with the optimal
    rate; narrow ones a uniform proposal on [a, b].
    """
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    out = np.empty_like(a)
    todo = np.arange(a.size)
    use_unif = (b - a) < 2.0 / lam
    while todo.size:
        aa, bb, ll = a[todo], b[todo], lam[todo]
        unif = use_unif[todo]
        e = rng.standard_exponential(todo.size)
        v = rng.random(todo.size)
        u = rng.random(todo.size)
        xe = aa + e / ll
        xu = aa + v * (bb - aa)
        x = np.where(unif, xu, xe)
        log_acc = np.where(unif, 0.5 * (aa * aa - x * x), -0.5 * (x - ll) ** 2)
        ok = (x < bb) & (np.log(u) <= log_acc)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def sample_truncated_normal(mean: float, sd: float, lower: float, upper: float, rng) -> float:
    if not lower < upper:
        raise ValueError(f"empty interval ({lower}, {upper})")
    return float(truncnorm_draws(mean, sd, lower, upper, as_generator(rng)))


# -- scale expansion ---------------------------------------------------------

def sample_theta(S: float, dof: int, rng) -> float:
    """Draw theta > 0 with theta^2 ~ S / chi^2_dof."""
    if not S > 0:
        raise DegenerateError(f"S must be positive, got {S}")
    if dof < 1:
        raise ValueError("dof must be >= 1")
    return float(np.sqrt(S / as_generator(rng).chisquare(dof)))


# -- design block --------------------------------------------------------------

@dataclass
class DesignBlock:
    """``V = (I_n | X)`` with the diagonal prior precision and a factor cache.

    ``factor(c)`` returns the Cholesky factor of ``Lambda^-1 + c V'V``; it is
    computed once per multiplicity ``c``.
    """

    X: np.ndarray
    sigma_alpha: float = 1.0
    sigma_beta: float = 100.0
    _chol: dict = field(default_factory=dict, init=False, repr=False)
    _eig: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 0) if X.size == 0 else X[:, None]
        self.X = X
        if not (self.sigma_alpha > 0 and self.sigma_beta > 0):
            raise ValueError("sigma_alpha and sigma_beta must be positive")

    @classmethod
    def without_covariates(cls, n: int, sigma_alpha: float = 1.0, sigma_beta: float = 100.0):
        return cls(np.zeros((n, 0)), sigma_alpha, sigma_beta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def V(self) -> np.ndarray:
        return np.hstack([np.eye(self.n), self.X])

    @property
    def prior_precision(self) -> np.ndarray:
        return np.concatenate([
            np.full(self.n, self.sigma_alpha ** -2.0),
            np.full(self.p, self.sigma_beta ** -2.0),
        ])

    def vt(self, z: np.ndarray) -> np.ndarray:
        """``V' z`` without forming V."""
        return np.concatenate([z, self.X.T @ z])

    def v(self, eta: np.ndarray) -> np.ndarray:
        """``V eta``: the score vector alpha + X beta."""
        return eta[: self.n] + self.X @ eta[self.n:]

    def precision(self, c: float) -> np.ndarray:
        n, X = self.n, self.X
        A = np.empty((n + self.p, n + self.p))
        A[:n, :n] = c * np.eye(n)
        A[:n, n:] = c * X
        A[n:, :n] = c * X.T
        A[n:, n:] = c * (X.T @ X)
        A[np.diag_indices_from(A)] += self.prior_precision
        return A

    def factor(self, c: float):
        key = float(c)
        f = self._chol.get(key)
        if f is None:
            f = cho_factor(self.precision(key), lower=True)
            self._chol[key] = f
        return f

    def kernel_eigen(self):
        """Eigen-decomposition of ``V Lambda V'`` (n x n), cached.

        With ``K = U diag(d) U'``, ``V (Lambda^-1 + cV'V)^-1 V' = U diag(d/(1+cd)) U'``
        and ``det(Lambda^-1 + cV'V) = det(Lambda^-1) prod(1 + c d)``.
        """
        if self._eig is None:
            K = self.sigma_alpha ** 2 * np.eye(self.n) + self.sigma_beta ** 2 * (self.X @ self.X.T)
            d, U = eigh(K)
            self._eig = (np.clip(d, 0.0, None), U)
        return self._eig


def _weights_for(Z: np.ndarray, weights) -> np.ndarray:
    m = Z.shape[1]
    if weights is None:
        return np.ones(m)
    w = np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise ValueError(f"expected {m} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return w


def marginal_quadratic_S(Z, weights, block: DesignBlock) -> float:
    """Penalised residual of Z after integrating out (alpha, beta).

    ``S = sum_j w_j Z_j'Z_j - s' V (Lambda^-1 + (sum w) V'V)^-1 V' s`` with
    ``s = sum_j w_j Z_j``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[1] == 0:
        raise ValueError("ranker set is empty")
    if not np.all(np.isfinite(Z)):
        raise ValueError("latent scores contain non-finite values")
    w = _weights_for(Z, weights)
    s = Z @ w
    vs = block.vt(s)
    quad = vs @ cho_solve(block.factor(w.sum()), vs)
    S = float(w @ np.einsum("ij,ij->j", Z, Z) - quad)
    # the form is nonnegative; cancellation can leave a tiny negative value
    return max(S, 0.0)


def sample_alpha_beta(Z, weights, theta: float, block: DesignBlock, rng):
    """Exact draw of (alpha, beta) given latent scores rescaled by 1/theta."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    w = _weights_for(Z, weights)
    eta = _draw_eta(Z @ w, w.sum(), theta, block, as_generator(rng))
    return eta[: block.n], eta[block.n:]


def _draw_eta(s: np.ndarray, c: float, theta: float, block: DesignBlock,
              rng: np.random.Generator) -> np.ndarray:
    L, lower = block.factor(c)
    mean = cho_solve((L, lower), block.vt(s)) / theta
    eps = rng.standard_normal(mean.size)
    return mean + solve_triangular(L, eps, lower=True, trans="T")


def posterior_moments(Z, weights, theta: float, block: DesignBlock):
    """Mean and covariance of the (alpha, beta) conditional, for checks."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    w = _weights_for(Z, weights)
    f = block.factor(w.sum())
    cov = cho_solve(f, np.eye(block.n + block.p))
    mean = cho_solve(f, block.vt(Z @ w)) / theta
    return mean, cov
