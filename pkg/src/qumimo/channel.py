"""N x N multi-mode qubit channel: per-branch depolarization composed
with a stochastic permutation-unitary crosstalk mixture.

The channel Choi operator lives on (N input qubits) (x) (N output
qubits), unnormalized (``Tr_out J = I``).  Crosstalk permutes the output
legs: noise first, then mode shuffling.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionLimitError
from .tensor import (
    DEFAULT_DIM_CAP,
    I2,
    PHI_UNNORM,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    perm_basis_map,
)

MAX_MODES = 6


@dataclass(frozen=True)
class ChannelParams:
    n: int
    eta: float
    lam: tuple
    delta: float

    def __post_init__(self):
        if not (1 <= self.n <= MAX_MODES):
            raise DimensionLimitError(f"mode count {self.n} outside 1..{MAX_MODES}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta {self.eta} outside [0, 1]")
        if self.delta <= 0:
            raise ValueError(f"delta {self.delta} must be positive")
        lam = tuple(float(x) for x in self.lam)
        if len(lam) != self.n:
            raise ValueError(f"lambda vector length {len(lam)} != N={self.n}")
        if any(x < 0.0 or x > 1.0 for x in lam):
            raise ValueError(f"lambda components outside [0, 1]: {lam}")
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class CouplingKernel:
    c: np.ndarray


@dataclass(frozen=True)
class PermutationEnsemble:
    perms: tuple
    weights: tuple


@dataclass(frozen=True)
class ChannelChoi:
    choi: np.ndarray
    params: ChannelParams

    @property
    def n(self) -> int:
        return self.params.n


def depolarizing_kraus(lam: float) -> list[np.ndarray]:
    """Kraus set of ``rho -> (1 - lam) rho + lam I/2``."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"depolarization strength {lam} outside [0, 1]")
    w0 = np.sqrt(1.0 - 3.0 * lam / 4.0)
    w1 = np.sqrt(lam / 4.0)
    return [w0 * I2, w1 * SIGMA_X, w1 * SIGMA_Y, w1 * SIGMA_Z]


def depolarizing_choi_1q(lam: float) -> np.ndarray:
    """Unnormalized single-qubit depolarizing Choi on (in, out)."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"depolarization strength {lam} outside [0, 1]")
    return (1.0 - lam) * PHI_UNNORM + lam * np.eye(4, dtype=complex) / 2.0


def circular_distance(i: int, j: int, n: int) -> int:
    d = abs(i - j)
    return min(d, n - d)


def coupling_kernel(n: int, delta: float) -> CouplingKernel:
    """Row-stochastic spatial coupling, exponential in circular distance."""
    if n < 2:
        raise ValueError("coupling kernel needs at least 2 modes")
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = np.array(
        [[circular_distance(i, j, n) for j in range(n)] for i in range(n)], dtype=float
    )
    w = np.exp(-delta * d)
    return CouplingKernel(c=w / w.sum(axis=1, keepdims=True))


def permutation_weights(kernel: CouplingKernel) -> PermutationEnsemble:
    """Normalized product weights over all N! mode permutations."""
    c = kernel.c
    n = c.shape[0]
    if n > MAX_MODES:
        raise DimensionLimitError(f"permutation enumeration capped at N={MAX_MODES}")
    perms, raw = [], []
    for pi in itertools.permutations(range(1, n + 1)):
        w = 1.0
        for i, target in enumerate(pi):
            w *= c[i, target - 1]
        perms.append(pi)
        raw.append(w)
    raw = np.asarray(raw)
    weights = raw / raw.sum()
    return PermutationEnsemble(perms=tuple(perms), weights=tuple(float(w) for w in weights))


def permutation_unitary(pi, n: int) -> np.ndarray:
    """Unitary sending the value on mode i to mode pi(i)."""
    qmap = perm_basis_map(pi, n)
    dim = 2 ** n
    u = np.zeros((dim, dim), dtype=complex)
    u[qmap, np.arange(dim)] = 1.0
    return u


def _depolarizing_choi(lam: tuple) -> np.ndarray:
    """Choi of the tensor product of per-mode depolarizing maps,
    rearranged from the per-mode (in_i, out_i) pairing to the block
    layout (all inputs) (x) (all outputs)."""
    n = len(lam)
    t = depolarizing_choi_1q(lam[0])
    for x in lam[1:]:
        t = np.kron(t, depolarizing_choi_1q(x))
    if n == 1:
        return t
    # Qubit at interleaved position 2i-1 (in_i) moves to position i,
    # position 2i (out_i) moves to position n+i.
    perm = [0] * (2 * n)
    for i in range(1, n + 1):
        perm[2 * i - 2] = i
        perm[2 * i - 1] = n + i
    qmap = perm_basis_map(perm, 2 * n)
    out = np.zeros_like(t)
    out[np.ix_(qmap, qmap)] = t
    return out


def channel_choi(params: ChannelParams) -> ChannelChoi:
    """Complete channel Choi: depolarize every branch, then mix modes
    with probability eta according to the permutation ensemble."""
    n = params.n
    dim = 2 ** n
    if dim * dim > DEFAULT_DIM_CAP:
        raise DimensionLimitError(f"channel Choi dimension {dim * dim} exceeds cap")
    j_dep = _depolarizing_choi(params.lam)
    if params.eta == 0.0 or n == 1:
        return ChannelChoi(choi=j_dep, params=params)

    ens = permutation_weights(coupling_kernel(n, params.delta))
    mixed = np.zeros_like(j_dep)
    full = np.arange(dim * dim)
    in_idx, out_idx = full // dim, full % dim
    for pi, w in zip(ens.perms, ens.weights):
        qmap = perm_basis_map(pi, n)
        inv = np.empty_like(qmap)
        inv[qmap] = np.arange(dim)
        src = in_idx * dim + inv[out_idx]
        mixed += w * j_dep[np.ix_(src, src)]
    j = (1.0 - params.eta) * j_dep + params.eta * mixed
    return ChannelChoi(choi=j, params=params)


def coupling_report(params: ChannelParams) -> np.ndarray:
    """Mode-level mixing matrix ``P = (1 - eta) I + eta C`` (plot data only)."""
    if params.n == 1:
        return np.ones((1, 1))
    c = coupling_kernel(params.n, params.delta).c
    return (1.0 - params.eta) * np.eye(params.n) + params.eta * c


def apply_channel(channel, rho: np.ndarray) -> np.ndarray:
    """Apply a Choi operator: ``Tr_in[J (rho^T (x) I_out)]``."""
    j = channel.choi if isinstance(channel, ChannelChoi) else channel
    dim_sq = j.shape[0]
    d_in = rho.shape[0]
    if dim_sq % d_in != 0:
        raise ValueError(f"Choi dim {dim_sq} incompatible with input dim {d_in}")
    d_out = dim_sq // d_in
    j4 = j.reshape(d_in, d_out, d_in, d_out)
    return np.einsum("iokp,ik->op", j4, rho)


# Binary cache ("QMCH"): little-endian header (magic, version u32, N u32,
# dim u32) followed by the row-major complex128 entries of the Choi in
# the *normalized* convention (Tr_out J = I / 2^N), i.e. the stored
# matrix is the in-memory operator divided by 2^N.
_MAGIC = b"QMCH"
_CACHE_VERSION = 1


def cache_key(params: ChannelParams) -> str:
    lam = "_".join(f"{x:.9f}" for x in params.lam)
    return f"qmch_N{params.n}_eta{params.eta:.9f}_delta{params.delta:.9f}_lam{lam}"


def save_channel_cache(path, channel: ChannelChoi) -> None:
    j = channel.choi / (2 ** channel.n)
    dim = j.shape[0]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _MAGIC, _CACHE_VERSION, channel.n, dim))
        fh.write(np.ascontiguousarray(j, dtype="<c16").tobytes())


def load_channel_cache(path, params: ChannelParams) -> ChannelChoi:
    with open(path, "rb") as fh:
        magic, version, n, dim = struct.unpack("<4sIII", fh.read(16))
        if magic != _MAGIC or version != _CACHE_VERSION:
            raise ValueError(f"not a QMCH v{_CACHE_VERSION} cache: {path}")
        if n != params.n:
            raise ValueError(f"cache holds N={n}, expected {params.n}")
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(dim, dim)
    return ChannelChoi(choi=data.astype(complex) * (2 ** n), params=params)
