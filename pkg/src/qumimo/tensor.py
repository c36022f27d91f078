"""Dense complex linear algebra and multi-qubit tensor bookkeeping.

Conventions used throughout the package:

* Operators are dense ``complex128`` numpy arrays.
* A multi-mode operator lives on the tensor product of its modes with
  mode 1 as the *most significant* factor, i.e. the basis index of
  ``|a_1 ... a_n>`` is ``sum_i a_i * 2**(n-i)``.  This matches the order
  produced by chaining ``np.kron(A_1, np.kron(A_2, ...))``.
* Kept deliberately free of any channel/Choi semantics; those live in
  the higher-level modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionLimitError, LabelError, NotHermitianError, NotPsdError

# Any single constructed matrix is capped at this dimension so that a
# misconfigured pipeline fails loudly instead of thrashing memory.
DEFAULT_DIM_CAP = 2 ** 14

HERMITIAN_RTOL = 1e-12
PSD_SUPPORT_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)

# Swap of two qubits and the unnormalized maximally entangled projector
# |Phi><Phi| with |Phi> = |00> + |11> (so <Phi|Phi> = 2).
SWAP2 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
PHI_UNNORM = np.zeros((4, 4), dtype=complex)
for _i in range(2):
    for _j in range(2):
        PHI_UNNORM[3 * _i, 3 * _j] = 1.0
del _i, _j


def dagger(x: np.ndarray) -> np.ndarray:
    return x.conj().T


def is_hermitian(x: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(x))) if x.size else 0.0)
    return bool(np.max(np.abs(x - dagger(x))) <= rtol * scale)


def kron(a: np.ndarray, b: np.ndarray, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """Kronecker product with a loud failure above the dimension cap."""
    a = np.asarray(a)
    b = np.asarray(b)
    out_rows = a.shape[0] * b.shape[0]
    out_cols = a.shape[1] * b.shape[1]
    if max(out_rows, out_cols) > dim_cap:
        raise DimensionLimitError(
            f"kron result {out_rows}x{out_cols} exceeds cap {dim_cap}"
        )
    return np.kron(a, b)


def kron_all(mats: Sequence[np.ndarray], dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = kron(out, m, dim_cap=dim_cap)
    return out


@dataclass(frozen=True)
class ModeSpace:
    """Ordered collection of labeled local modes.

    ``labels[i]`` names the i-th tensor factor (most significant first)
    and ``dims[i]`` is its local dimension (2 for qubits).
    """

    labels: tuple
    dims: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate mode labels: {self.labels}")

    @staticmethod
    def qubits(labels: Iterable) -> "ModeSpace":
        labels = tuple(labels)
        return ModeSpace(labels=labels, dims=(2,) * len(labels))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def axes(self, subset: Iterable) -> list[int]:
        subset = tuple(subset)
        missing = [s for s in subset if s not in self.labels]
        if missing:
            raise LabelError(f"unknown mode labels {missing}; have {self.labels}")
        return [self.labels.index(s) for s in subset]


def _as_tensor(x: np.ndarray, space: ModeSpace) -> np.ndarray:
    if x.shape != (space.dim, space.dim):
        raise ValueError(f"matrix shape {x.shape} does not match space dim {space.dim}")
    return x.reshape(space.dims + space.dims)


def partial_trace(x: np.ndarray, space: ModeSpace, keep: Iterable) -> np.ndarray:
    """Trace out every mode not listed in ``keep`` (order of ``keep`` kept)."""
    keep = tuple(keep)
    keep_axes = space.axes(keep)
    n = len(space.dims)
    traced_axes = [i for i in range(n) if i not in keep_axes]
    t = _as_tensor(np.asarray(x), space)
    perm = keep_axes + traced_axes + [a + n for a in keep_axes] + [a + n for a in traced_axes]
    t = t.transpose(perm)
    dk = int(np.prod([space.dims[a] for a in keep_axes], dtype=np.int64)) if keep_axes else 1
    dt = space.dim // dk
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("abcb->ac", t)


def partial_transpose(x: np.ndarray, space: ModeSpace, subset: Iterable) -> np.ndarray:
    """Transpose the listed modes only; involutive and trace-preserving."""
    sub_axes = set(space.axes(subset))
    n = len(space.dims)
    t = _as_tensor(np.asarray(x), space)
    perm = []
    for i in range(n):
        perm.append(i + n if i in sub_axes else i)
    for i in range(n):
        perm.append(i if i in sub_axes else i + n)
    return t.transpose(perm).reshape(space.dim, space.dim)


def hermitian_eig(x: np.ndarray, rtol: float = HERMITIAN_RTOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Returns ``(w, v)`` with ``x @ v == v @ diag(w)``.  Backed by LAPACK's
    Hermitian solver; inputs failing the Hermiticity tolerance are
    rejected rather than silently symmetrized.
    """
    x = np.asarray(x, dtype=complex)
    if not is_hermitian(x, rtol=rtol):
        raise NotHermitianError(
            f"matrix deviates from Hermiticity by {np.max(np.abs(x - dagger(x))):.3e}"
        )
    w, v = np.linalg.eigh((x + dagger(x)) / 2.0)
    return w, v


def psd_sqrt_pinv(x: np.ndarray, support_tol: float = PSD_SUPPORT_TOL) -> np.ndarray:
    """Inverse square root of a PSD matrix on its support, zero elsewhere.

    Eigenvalues in ``(-support_tol, support_tol]`` are treated as zero;
    anything below ``-support_tol`` raises.
    """
    w, v = hermitian_eig(x)
    if w[0] < -support_tol:
        raise NotPsdError(f"eigenvalue {w[0]:.3e} below -{support_tol:.1e}")
    inv_sqrt = np.where(w > support_tol, 1.0 / np.sqrt(np.clip(w, support_tol, None)), 0.0)
    return (v * inv_sqrt) @ dagger(v)


def support_projector(x: np.ndarray, support_tol: float = PSD_SUPPORT_TOL) -> np.ndarray:
    w, v = hermitian_eig(x)
    mask = (w > support_tol).astype(float)
    return (v * mask) @ dagger(v)


def haar_qubit(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random pure qubit state as a length-2 complex vector."""
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return z / np.linalg.norm(z)


def haar_state(rng: np.random.Generator, n_qubits: int = 1) -> np.ndarray:
    z = rng.standard_normal(2 ** n_qubits) + 1j * rng.standard_normal(2 ** n_qubits)
    return z / np.linalg.norm(z)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi).reshape(-1)
    return np.outer(psi, psi.conj())


def perm_basis_map(perm: Sequence[int], n: int) -> np.ndarray:
    """Basis-index action of a qubit permutation.

    ``perm`` is 1-indexed with ``perm[i-1] = pi(i)``: the value held by
    qubit ``i`` moves to qubit ``pi(i)``.  Returns ``map`` such that the
    permutation unitary acts as ``U |b> = |map[b]>`` on computational
    basis indices (mode 1 = most significant bit).
    """
    perm = tuple(perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{n}")
    dim = 2 ** n
    out = np.zeros(dim, dtype=np.int64)
    basis = np.arange(dim, dtype=np.int64)
    for i, target in enumerate(perm, start=1):
        bits = (basis >> (n - i)) & 1
        out |= bits << (n - target)
    return out


def embed_two_qubit(op4: np.ndarray, n: int, i: int, j: int) -> np.ndarray:
    """Embed a two-qubit operator on qubits ``(i, j)`` of ``n`` qubits."""
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"invalid qubit pair ({i}, {j}) for n={n}")
    rest = [q for q in range(1, n + 1) if q not in (i, j)]
    # Build on position order (i, j, rest...) then relabel positions.
    base = kron(op4, np.eye(2 ** (n - 2), dtype=complex))
    perm = [0] * n
    perm[0] = i
    perm[1] = j
    for pos, q in enumerate(rest, start=3):
        perm[pos - 1] = q
    qmap = perm_basis_map(perm, n)
    out = np.zeros_like(base)
    out[np.ix_(qmap, qmap)] = base
    return out
