"""Competitive Lotka-Volterra dynamics on a uniform hypergraph of order ``t``.

Each neuron obeys

    dz_i/dt = z_i (b_i - k S(z) + (k - 1) z_i^p),    S(z) = (sum_l z_l)^p,

with ``p = t - 1`` and ``b_i = 1 + w_i``.  This is the expanded form of
``diag(z) (b + A z^p)`` for the two-value tensor ``A`` with ``-1`` on the
diagonal and ``-k`` everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .tensor import SymmetricTensor, contract, model_tensor

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class CompetitionModel:
    """Parameters ``(n, t, k, w)`` of the competition dynamics.

    ``w`` are the neuron-specific inputs; ``b = 1 + w`` is derived.
    """

    t: int
    k: float
    w: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise ValueError("model needs at least one neuron")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("inputs w must be finite and nonnegative")
        if int(self.t) != self.t or self.t < 2:
            raise ValueError(f"interaction order t must be an integer >= 2, got {self.t}")
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "k", float(self.k))

    @classmethod
    def from_inputs(cls, w: Sequence[float], t: int = 3, k: float = 1.0) -> "CompetitionModel":
        return cls(t=t, k=k, w=np.asarray(w, dtype=np.float64))

    @property
    def n(self) -> int:
        return int(self.w.size)

    @property
    def p(self) -> int:
        return self.t - 1

    @property
    def b(self) -> FloatArray:
        return 1.0 + self.w

    @property
    def tensor(self) -> SymmetricTensor:
        return model_tensor(self.t, self.n, self.k)

    def with_params(self, *, t: int | None = None, k: float | None = None) -> "CompetitionModel":
        return CompetitionModel(t=self.t if t is None else t, k=self.k if k is None else k, w=self.w)

    def __repr__(self) -> str:
        return f"CompetitionModel(n={self.n}, t={self.t}, k={self.k}, w={self.w.tolist()})"


def _state(model: CompetitionModel, z) -> FloatArray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.n,):
        raise ValueError(f"state of shape {z.shape} does not match n={model.n}")
    if np.any(z < 0):
        raise ValueError("state must be entrywise nonnegative")
    return z


def field_unchecked(b: FloatArray, k: float, p: int, z: FloatArray) -> FloatArray:
    """Closed-form right-hand side without validation (integrator hot path)."""
    return z * (b - k * z.sum() ** p + (k - 1.0) * z ** p)


def vector_field(model: CompetitionModel, z) -> FloatArray:
    """Right-hand side ``dz/dt`` in closed form, O(n) per call."""
    z = _state(model, z)
    return field_unchecked(model.b, model.k, model.p, z)


def vector_field_tensor(model: CompetitionModel, z) -> FloatArray:
    """Right-hand side via tensor contraction, ``diag(z)(b + A z^p)``."""
    z = _state(model, z)
    return z * (model.b + contract(model.tensor, z))


def jacobian(model: CompetitionModel, z) -> FloatArray:
    """Analytic Jacobian ``d(dz_i/dt)/dz_j``."""
    z = _state(model, z)
    k, p = model.k, model.p
    total = z.sum()
    growth = model.b - k * total ** p + (k - 1.0) * z ** p
    cross = -k * p * total ** (p - 1)
    jac = np.outer(z * cross, np.ones(model.n))
    jac[np.diag_indices(model.n)] += growth + z * p * (k - 1.0) * z ** (p - 1)
    return jac


def finite_difference_jacobian(model: CompetitionModel, z, step: float = 1e-6) -> FloatArray:
    """Central-difference Jacobian of :func:`vector_field`.

    Points closer than ``step`` to the orthant boundary use a one-sided
    forward difference in that coordinate.
    """
    z = _state(model, z)
    n = model.n
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        if z[j] >= step:
            jac[:, j] = (vector_field(model, z + e) - vector_field(model, z - e)) / (2 * step)
        else:
            jac[:, j] = (vector_field(model, z + e) - vector_field(model, z)) / step
    return jac


@dataclass(frozen=True)
class BlockSpectrum:
    """Eigenvalues of the winner block and the loser diagonal entries."""

    winner_eigs: NDArray[np.complex128]
    loser_diags: FloatArray
    winners: tuple[int, ...]
    losers: tuple[int, ...]


def winner_block_spectrum(model: CompetitionModel, z_star, winners: Sequence[int],
                          residual_tol: float = 1e-8) -> BlockSpectrum:
    """Split the Jacobian spectrum at an equilibrium with support ``winners``.

    At such a point the Jacobian is block upper-triangular: the winner block
    carries the coupled eigenvalues and every loser contributes its diagonal
    entry ``1 + w_i - k r^p`` with ``r`` the total winner activity.
    """
    z = _state(model, z_star)
    winners = tuple(sorted(int(i) for i in winners))
    res = float(np.max(np.abs(vector_field(model, z))))
    if res > residual_tol:
        raise ValueError(f"not an equilibrium: residual {res:.3e} > {residual_tol:.1e}")
    support = set(np.flatnonzero(z > 0).tolist())
    if support != set(winners):
        raise ValueError(f"state support {sorted(support)} differs from winner set {list(winners)}")
    losers = tuple(i for i in range(model.n) if i not in support)
    jac = jacobian(model, z)
    idx = np.array(winners, dtype=int)
    block = jac[np.ix_(idx, idx)]
    winner_eigs = np.linalg.eigvals(block) if idx.size else np.empty(0, dtype=complex)
    r = z[idx].sum()
    loser_diags = model.b[list(losers)] - model.k * r ** model.p
    return BlockSpectrum(winner_eigs=winner_eigs.astype(np.complex128),
                         loser_diags=np.asarray(loser_diags, dtype=np.float64),
                         winners=winners, losers=losers)


def pairwise_lv_field(w, k: float, z) -> FloatArray:
    """Classical pairwise competition ``z_i(1 + w_i - z_i - k sum_{j != i} z_j)``."""
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return z * (1.0 + w - z - k * (z.sum() - z))
