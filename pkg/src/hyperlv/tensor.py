"""Supersymmetric uniform tensors and the structured-tensor predicates.

A tensor of order ``m`` and dimension ``n`` is stored either densely (the
full ``n**m`` array) or in the two-value form used by every competition
model: one value on the fully repeated diagonal ``A[i, i, ..., i]`` and a
single shared value everywhere else.  All operations are pure functions of
immutable tensors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

MAX_DENSE_ENTRIES = 10**7
SYMMETRY_TOL = 1e-12


class SymmetricTensor:
    """Order-``m``, dimension-``n`` supersymmetric tensor.

    Build with :meth:`dense` or :meth:`two_value`; the constructor is
    internal.  Instances are read-only.
    """

    __slots__ = ("order", "dim", "_data", "_diag", "_offdiag")

    def __init__(self, order: int, dim: int, data: Optional[FloatArray] = None,
                 diag: float = 0.0, offdiag: float = 0.0) -> None:
        if order < 2:
            raise ValueError(f"order must be >= 2, got {order}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.order = int(order)
        self.dim = int(dim)
        self._data = data
        self._diag = float(diag)
        self._offdiag = float(offdiag)

    # -- construction -----------------------------------------------------

    @classmethod
    def dense(cls, array, symmetrize: bool = False) -> "SymmetricTensor":
        """Wrap a full cubical array.

        With ``symmetrize=True`` the array is replaced by the average over
        all index permutations; otherwise it must already be symmetric.
        """
        arr = np.array(array, dtype=np.float64)
        m = arr.ndim
        if m < 2 or len(set(arr.shape)) != 1:
            raise ValueError(f"expected a cubical array of order >= 2, got shape {arr.shape}")
        if arr.size > MAX_DENSE_ENTRIES:
            raise ValueError(
                f"dense storage capped at {MAX_DENSE_ENTRIES} entries ({arr.size} requested); "
                "use two_value storage")
        perms = list(itertools.permutations(range(m)))
        if symmetrize:
            arr = sum(np.transpose(arr, p) for p in perms) / len(perms)
        else:
            scale = max(1.0, float(np.max(np.abs(arr))))
            for p in perms[1:]:
                if np.max(np.abs(arr - np.transpose(arr, p))) > SYMMETRY_TOL * scale:
                    raise ValueError(f"array is not symmetric under axis permutation {p}")
        arr.setflags(write=False)
        return cls(m, arr.shape[0], data=arr)

    @classmethod
    def two_value(cls, order: int, dim: int, diag: float, offdiag: float) -> "SymmetricTensor":
        return cls(order, dim, diag=diag, offdiag=offdiag)

    @classmethod
    def identity(cls, order: int, dim: int) -> "SymmetricTensor":
        return cls.two_value(order, dim, 1.0, 0.0)

    @classmethod
    def all_ones(cls, order: int, dim: int) -> "SymmetricTensor":
        return cls.two_value(order, dim, 1.0, 1.0)

    # -- inspection -------------------------------------------------------

    @property
    def is_two_value(self) -> bool:
        return self._data is None

    @property
    def diag_value(self) -> float:
        if not self.is_two_value:
            raise AttributeError("dense tensor has no single diagonal value")
        return self._diag

    @property
    def offdiag_value(self) -> float:
        if not self.is_two_value:
            raise AttributeError("dense tensor has no single off-diagonal value")
        return self._offdiag

    def diagonal(self) -> FloatArray:
        """Entries ``A[i, i, ..., i]`` as an ``n``-vector."""
        if self.is_two_value:
            return np.full(self.dim, self._diag)
        idx = np.arange(self.dim)
        return self._data[(idx,) * self.order].copy()

    def to_dense(self) -> FloatArray:
        if not self.is_two_value:
            return self._data.copy()
        if self.dim ** self.order > MAX_DENSE_ENTRIES:
            raise ValueError("tensor too large to expand densely")
        arr = np.full((self.dim,) * self.order, self._offdiag)
        idx = np.arange(self.dim)
        arr[(idx,) * self.order] = self._diag
        return arr

    def entry(self, index) -> float:
        if len(index) != self.order:
            raise IndexError(f"expected {self.order} indices, got {len(index)}")
        if self.is_two_value:
            return self._diag if len(set(index)) == 1 else self._offdiag
        return float(self._data[tuple(index)])

    def __neg__(self) -> "SymmetricTensor":
        if self.is_two_value:
            return SymmetricTensor.two_value(self.order, self.dim, -self._diag, -self._offdiag)
        return SymmetricTensor.dense(-self._data)

    def __repr__(self) -> str:
        if self.is_two_value:
            return (f"SymmetricTensor(order={self.order}, dim={self.dim}, "
                    f"diag={self._diag!r}, offdiag={self._offdiag!r})")
        return f"SymmetricTensor(order={self.order}, dim={self.dim}, dense)"


def model_tensor(order: int, dim: int, k: float) -> SymmetricTensor:
    """Interaction tensor of the competition model: -1 on the diagonal, -k elsewhere."""
    return SymmetricTensor.two_value(order, dim, -1.0, -k)


def _offdiag_mask(order: int, dim: int) -> NDArray[np.bool_]:
    mask = np.ones((dim,) * order, dtype=bool)
    idx = np.arange(dim)
    mask[(idx,) * order] = False
    return mask


# -- contraction ----------------------------------------------------------

def contract(tensor: SymmetricTensor, z) -> FloatArray:
    """Return ``A z^{m-1}``, i.e. ``sum A[i, i2..im] z[i2]...z[im]`` for each ``i``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (tensor.dim,):
        raise ValueError(f"vector of shape {z.shape} does not match tensor dim {tensor.dim}")
    p = tensor.order - 1
    if tensor.is_two_value:
        return tensor._offdiag * z.sum() ** p + (tensor._diag - tensor._offdiag) * z ** p
    out = tensor._data
    for _ in range(p):
        out = out @ z
    return np.asarray(out, dtype=np.float64)


# -- spectral radius ------------------------------------------------------

@dataclass(frozen=True)
class EigenEstimate:
    """Perron H-eigenpair estimate with a certified Collatz bracket."""

    value: float
    vector: FloatArray
    residual: float
    iterations: int
    lower: float
    upper: float
    converged: bool


def h_residual(tensor: SymmetricTensor, value: float, vector) -> float:
    """Infinity norm of ``A x^{m-1} - lambda x^{[m-1]}``."""
    x = np.asarray(vector, dtype=np.float64)
    return float(np.max(np.abs(contract(tensor, x) - value * x ** (tensor.order - 1))))


def spectral_radius(tensor: SymmetricTensor, tol: float = 1e-10,
                    max_iter: int = 10_000) -> EigenEstimate:
    """Spectral radius of a nonnegative tensor by shifted power iteration.

    Iterates on ``A + I`` (primitive whenever ``A`` is irreducible) from the
    uniform vector.  For every positive iterate ``x`` the ratios
    ``(A x^{m-1})_i / x_i^{m-1}`` bracket the spectral radius from below and
    above; iteration stops once the bracket is narrower than ``tol``.  On
    budget exhaustion the best bracket is returned with ``converged=False``.
    """
    if tensor.is_two_value:
        if (tensor.dim > 1 and tensor._offdiag < 0) or tensor._diag < 0:
            raise ValueError("spectral_radius requires a nonnegative tensor")
    elif np.any(tensor._data < 0):
        raise ValueError("spectral_radius requires a nonnegative tensor")

    n, p = tensor.dim, tensor.order - 1
    shift = 1.0
    x = np.full(n, n ** (-1.0 / p))
    lower, upper = -np.inf, np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        y = contract(tensor, x) + shift * x ** p
        ratios = y / x ** p
        lower = max(lower, float(ratios.min()) - shift)
        upper = min(upper, float(ratios.max()) - shift)
        if upper - lower < tol:
            converged = True
            break
        x = y ** (1.0 / p)
        x = x / x.sum()
        if np.any(x <= 0):
            # reducible pattern collapsed a component; the last bracket stands
            break
    value = 0.5 * (lower + upper)
    if not np.all(x > 0):
        x = np.where(x > 0, x, np.finfo(float).tiny)
    vec = x / np.linalg.norm(x)
    return EigenEstimate(value=value, vector=vec, residual=h_residual(tensor, value, vec),
                         iterations=it, lower=lower, upper=upper, converged=converged)


# -- pattern and structure predicates ------------------------------------

def is_irreducible(tensor: SymmetricTensor) -> bool:
    """Strong connectivity of the pattern digraph.

    There is an arc ``i -> j`` whenever some nonzero entry ``A[i, i2..im]``
    has ``j`` among ``i2..im`` (``j != i``).
    """
    n = tensor.dim
    if n == 1:
        return True
    if tensor.is_two_value:
        return tensor._offdiag != 0.0
    nz = tensor._data != 0
    adj = np.zeros((n, n), dtype=bool)
    for axis in range(1, tensor.order):
        other = tuple(a for a in range(1, tensor.order) if a != axis)
        reach = nz.any(axis=other) if other else nz
        adj |= reach
    np.fill_diagonal(adj, False)

    def reaches_all(a: NDArray[np.bool_]) -> bool:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for j in np.flatnonzero(a[i] & ~seen):
                seen[j] = True
                frontier.append(int(j))
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


def offdiag_row_sums(tensor: SymmetricTensor) -> FloatArray:
    """``sum |A[i, i2..im]|`` over all ``(i2..im) != (i..i)``."""
    n, m = tensor.dim, tensor.order
    if tensor.is_two_value:
        return np.full(n, abs(tensor._offdiag) * (n ** (m - 1) - 1))
    total = np.abs(tensor._data).reshape(n, -1).sum(axis=1)
    return total - np.abs(tensor.diagonal())


def is_diagonally_dominant(tensor: SymmetricTensor, strict: bool = False) -> bool:
    diag = np.abs(tensor.diagonal())
    rest = offdiag_row_sums(tensor)
    return bool(np.all(diag > rest)) if strict else bool(np.all(diag >= rest))


def comparison_tensor(tensor: SymmetricTensor) -> SymmetricTensor:
    """``|A|`` on the diagonal, ``-|A|`` elsewhere."""
    if tensor.is_two_value:
        return SymmetricTensor.two_value(tensor.order, tensor.dim,
                                         abs(tensor._diag), -abs(tensor._offdiag))
    arr = np.abs(tensor._data)
    arr = np.where(_offdiag_mask(tensor.order, tensor.dim), -arr, arr)
    return SymmetricTensor.dense(arr)


def _offdiag_values(tensor: SymmetricTensor) -> FloatArray:
    if tensor.is_two_value:
        return np.array([tensor._offdiag]) if tensor.dim > 1 else np.empty(0)
    return tensor._data[_offdiag_mask(tensor.order, tensor.dim)]


@dataclass(frozen=True)
class StructureFlags:
    """Structured-tensor classification.

    ``None`` means the spectral bracket could not decide the comparison
    (power iteration ran out of budget with ``s`` inside the bracket).
    """

    metzler: bool
    m_tensor: Optional[bool]
    nonsingular_m: Optional[bool]
    h_tensor: Optional[bool]
    h_plus: Optional[bool]
    shift: float
    rho: Optional[EigenEstimate]


def _m_tensor_test(tensor: SymmetricTensor, tol: float, max_iter: int):
    """Return ``(m_tensor, nonsingular_m, s, estimate)``."""
    if np.any(_offdiag_values(tensor) > 0):
        return False, False, float(tensor.diagonal().max()), None
    s = float(tensor.diagonal().max())
    if tensor.is_two_value:
        off = -tensor._offdiag if tensor.dim > 1 else 0.0
        b = SymmetricTensor.two_value(tensor.order, tensor.dim, s - tensor._diag, off)
    else:
        arr = -tensor._data.copy()
        idx = np.arange(tensor.dim)
        arr[(idx,) * tensor.order] += s
        b = SymmetricTensor.dense(arr)
    est = spectral_radius(b, tol=tol, max_iter=max_iter)
    band = max(tol, est.upper - est.lower) * max(1.0, abs(s))
    if est.converged and abs(s - est.value) <= band:
        # s agrees with rho(B) to within the bracket width: singular M-tensor
        return True, False, s, est
    if s > est.upper:
        return True, True, s, est
    if s < est.lower:
        return False, False, s, est
    return None, None, s, est


def classify_structure(tensor: SymmetricTensor, tol: float = 1e-10,
                       max_iter: int = 10_000) -> StructureFlags:
    offdiag = _offdiag_values(tensor)
    metzler = bool(np.all(offdiag >= 0))
    m_tensor, nonsingular, s, est = _m_tensor_test(tensor, tol, max_iter)
    h_tensor, _, _, _ = _m_tensor_test(comparison_tensor(tensor), tol, max_iter)
    if h_tensor is None:
        h_plus = None
    else:
        h_plus = h_tensor and bool(np.all(tensor.diagonal() > 0))
    return StructureFlags(metzler=metzler, m_tensor=m_tensor, nonsingular_m=nonsingular,
                          h_tensor=h_tensor, h_plus=h_plus, shift=s, rho=est)
