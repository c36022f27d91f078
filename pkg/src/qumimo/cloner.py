"""Universal asymmetric 1 -> M qubit cloning.

Two routes to the same object:

* a closed form for the per-clone fidelity vector ``F(gamma)`` built from
  the Perron eigenvector of a weight matrix, and
* a physically valid covariant Choi operator obtained by maximizing the
  gamma-weighted Haar-averaged clone fidelities over CPTP maps (an SDP)
  and projecting onto the permutation algebra.

Choi convention: unnormalized, input leg first, so a map ``E`` acts as
``E(rho) = Tr_in[J (rho^T (x) I_out)]`` and trace preservation reads
``Tr_out J = I_2``.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass

import numpy as np

from . import sdp
from .errors import ConvergenceError, DimensionLimitError, SimplexError, SolverError
from .tensor import (
    I2,
    PAULIS,
    PHI_UNNORM,
    ModeSpace,
    dagger,
    embed_two_qubit,
    partial_trace,
    partial_transpose,
    perm_basis_map,
)

SIMPLEX_TOL = 1e-10
FIDELITY_TIEBREAK_EPS = 1e-6
TWIRL_MAX_QUBITS = 6
_SUPPORT_CUTOFF = 1e-12


@dataclass(frozen=True)
class AsymmetryVector:
    """Point on the M-simplex steering how fidelity is shared among clones."""

    gamma: tuple

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or g.size < 1:
            raise SimplexError("gamma must be a nonempty vector")
        if np.any(g < -SIMPLEX_TOL):
            raise SimplexError(f"negative gamma component in {self.gamma}")
        if abs(g.sum() - 1.0) > SIMPLEX_TOL:
            raise SimplexError(f"gamma sums to {g.sum():.12f}, expected 1")
        object.__setattr__(self, "gamma", tuple(float(x) for x in g))

    @property
    def m(self) -> int:
        return len(self.gamma)

    @property
    def alpha(self) -> np.ndarray:
        g = np.asarray(self.gamma)
        return g / g.sum()


@dataclass(frozen=True)
class CloneAmplitudes:
    beta: tuple
    perron_value: float
    perron_vector: tuple


@dataclass(frozen=True)
class CloneFidelityVector:
    fidelities: tuple
    gamma: AsymmetryVector


@dataclass(frozen=True)
class ClonerChoi:
    choi: np.ndarray
    m: int
    fidelities: tuple


def _as_gamma(gamma) -> AsymmetryVector:
    return gamma if isinstance(gamma, AsymmetryVector) else AsymmetryVector(tuple(gamma))


def weight_matrix(gamma) -> np.ndarray:
    """Rank-one-plus-diagonal weight matrix ``alpha 1^T + diag(alpha)``."""
    gamma = _as_gamma(gamma)
    alpha = gamma.alpha
    return np.outer(alpha, np.ones(gamma.m)) + np.diag(alpha)


def clone_amplitudes(
    gamma, tol: float = 1e-12, max_iter: int = 10_000
) -> CloneAmplitudes:
    """Stinespring amplitudes from the Perron eigenvector of the weight matrix.

    Clones with zero gamma are excluded from the (otherwise strictly
    positive, hence irreducible) matrix and get amplitude zero.  The
    returned vector satisfies ``sum(beta^2) + sum(beta)^2 = 2``.
    """
    gamma = _as_gamma(gamma)
    g = np.asarray(gamma.gamma)
    support = np.flatnonzero(g > _SUPPORT_CUTOFF)
    alpha = g[support] / g[support].sum()
    a = np.outer(alpha, np.ones(support.size)) + np.diag(alpha)

    u = np.ones(support.size) / np.sqrt(support.size)
    lam = 0.0
    for _ in range(max_iter):
        v = a @ u
        lam = float(np.linalg.norm(v))
        v /= lam
        if np.linalg.norm(v - u) <= tol:
            u = v
            break
        u = v
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    lam = float(u @ (a @ u))

    u_full = np.zeros(gamma.m)
    u_full[support] = u
    beta = np.sqrt(2.0 / (u.sum() ** 2 + 1.0)) * u_full
    return CloneAmplitudes(
        beta=tuple(beta), perron_value=lam, perron_vector=tuple(u_full)
    )


def clone_fidelities(gamma) -> CloneFidelityVector:
    """Per-clone fidelity vector of the optimal asymmetric cloner.

    On the support, ``F_k = 1/3 + (beta_k + sum_j beta_j)^2 / 6``; clones
    with zero weight sit at the maximally mixed baseline 1/2.
    """
    gamma = _as_gamma(gamma)
    amp = clone_amplitudes(gamma)
    beta = np.asarray(amp.beta)
    total = beta.sum()
    f = np.full(gamma.m, 0.5)
    support = np.flatnonzero(np.asarray(gamma.gamma) > _SUPPORT_CUTOFF)
    f[support] = 1.0 / 3.0 + (beta[support] + total) ** 2 / 6.0
    return CloneFidelityVector(fidelities=tuple(float(x) for x in f), gamma=gamma)


def fidelity_functionals(m: int) -> list[np.ndarray]:
    """Haar-averaged clone-fidelity functionals ``G_k`` with
    ``F_k = Tr[J G_k]`` for an unnormalized cloner Choi ``J``.

    ``G_k`` places ``(I + |Phi><Phi|)/6`` on the (input, clone-k) pair,
    identity elsewhere; the partial transpose of the two-qubit twirl
    identity is already folded in.
    """
    pair = (np.eye(4, dtype=complex) + PHI_UNNORM) / 6.0
    return [embed_two_qubit(pair, m + 1, 1, k + 1) for k in range(1, m + 1)]


_TWIRL_CACHE: dict = {}
_TWIRL_LOCK = threading.Lock()


def _twirl_data(n: int):
    with _TWIRL_LOCK:
        if n in _TWIRL_CACHE:
            return _TWIRL_CACHE[n]
    dim = 2 ** n
    maps = np.array(
        [perm_basis_map(p, n) for p in itertools.permutations(range(1, n + 1))]
    )
    count = maps.shape[0]
    gram = np.zeros((count, count))
    for b in range(dim):
        col = maps[:, b]
        gram += col[:, None] == col[None, :]
    gram_pinv = np.linalg.pinv(gram, rcond=1e-10)
    with _TWIRL_LOCK:
        _TWIRL_CACHE[n] = (maps, gram_pinv)
    return maps, gram_pinv


def twirl_permutation_algebra(j: np.ndarray, n: int) -> np.ndarray:
    """Orthogonal projection onto ``span{P_sigma : sigma in S_n}``.

    Equals the Haar average over diagonal unitary conjugations
    ``U^(x)n (.) U^(x)n dagger`` by Schur-Weyl duality.  The permutation
    operators are linearly dependent for n > 2, so the Gram system is
    solved in the least-squares sense with a rank cutoff of 1e-10.
    """
    if n > TWIRL_MAX_QUBITS:
        raise DimensionLimitError(f"twirl limited to {TWIRL_MAX_QUBITS} qubits, got {n}")
    dim = 2 ** n
    if j.shape != (dim, dim):
        raise ValueError(f"operator shape {j.shape} does not match {n} qubits")
    maps, gram_pinv = _twirl_data(n)
    basis = np.arange(dim)
    overlaps = j[maps, basis[None, :]].sum(axis=1)
    coeff = gram_pinv @ overlaps
    out = np.zeros_like(j, dtype=complex)
    for qmap, x in zip(maps, coeff):
        out[qmap, basis] += x
    return out


_CLONER_CACHE: dict = {}
_CLONER_LOCK = threading.Lock()


def cloner_choi(gamma, solver_tol: float = 1e-8) -> ClonerChoi:
    """Covariant Choi operator of the gamma-weighted optimal cloner.

    Maximizes ``sum_k (gamma_k + eps) Tr[J G_k]`` over CPTP maps (the
    eps term resolves degenerate optima at simplex vertices), then
    projects the input-transposed operator onto the permutation algebra
    to enforce universality.  Results are memoized per (M, gamma).
    """
    gamma = _as_gamma(gamma)
    m = gamma.m
    if m > 5:
        raise DimensionLimitError(f"cloner limited to M <= 5, got {m}")
    key = (m, tuple(round(g, 9) for g in gamma.gamma))
    with _CLONER_LOCK:
        cached = _CLONER_CACHE.get(key)
    if cached is not None:
        return cached

    g_ops = fidelity_functionals(m)
    objective = sum(
        (gamma.gamma[k] + FIDELITY_TIEBREAK_EPS) * g_ops[k] for k in range(m)
    )
    dim_out = 2 ** m
    equalities = []
    for alpha, pauli in enumerate(PAULIS):
        coeff = np.kron(pauli, np.eye(dim_out, dtype=complex))
        equalities.append(({0: coeff}, 2.0 if alpha == 0 else 0.0))
    problem = sdp.SdpProblem(
        block_dims=[2 * dim_out], objective=[objective], equalities=equalities
    )
    sol = sdp.solve(problem, tol=solver_tol)
    if sol.status != sdp.OPTIMAL:
        raise SolverError(sol.status, f"cloner SDP failed: {sol.message}")

    space = ModeSpace.qubits(range(1, m + 2))
    j_raw = sol.X_blocks[0]
    k_op = partial_transpose(j_raw, space, (1,))
    k_tw = twirl_permutation_algebra(k_op, m + 1)
    j = partial_transpose(k_tw, space, (1,))
    j = (j + dagger(j)) / 2.0

    _validate_cloner(j, m, space)
    fids = tuple(float(np.real(np.trace(j @ g_ops[k]))) for k in range(m))
    result = ClonerChoi(choi=j, m=m, fidelities=fids)
    with _CLONER_LOCK:
        _CLONER_CACHE[key] = result
    return result


def _validate_cloner(j: np.ndarray, m: int, space: ModeSpace) -> None:
    floor = float(np.linalg.eigvalsh(j)[0])
    if floor < -1e-9:
        raise ValueError(f"cloner Choi eigenvalue floor {floor:.2e} below -1e-9")
    tp = partial_trace(j, space, (1,))
    if np.max(np.abs(tp - I2)) > 1e-8:
        raise ValueError("cloner Choi violates trace preservation")
    # Isotropic marginals: each (input, clone) pair lies in span{Phi, I4}.
    gram = np.array([[4.0, 2.0], [2.0, 4.0]])
    for k in range(2, m + 2):
        marg = partial_trace(j, space, (1, k))
        v = np.array([np.real(np.trace(marg)), np.real(np.trace(PHI_UNNORM @ marg))])
        c_i, c_phi = np.linalg.solve(gram, v)
        resid = marg - c_i * np.eye(4) - c_phi * PHI_UNNORM
        if np.max(np.abs(resid)) > 1e-7:
            raise ValueError(f"clone {k - 1} marginal not isotropic")


def clone_fidelities_from_choi(choi: ClonerChoi) -> np.ndarray:
    return np.asarray(choi.fidelities)


def simplex_grid(m: int, steps: int) -> list[tuple]:
    """All points of the simplex lattice {k/steps} with m coordinates."""
    pts = []
    for comp in itertools.combinations_with_replacement(range(m), steps):
        counts = [0] * m
        for c in comp:
            counts[c] += 1
        pts.append(tuple(c / steps for c in counts))
    return sorted(set(pts))


def feasible_boundary(m: int, grid_resolution: float) -> list[CloneFidelityVector]:
    """Fidelity trade-off surface sampled on a simplex grid.

    Every emitted point dominates the maximally mixed baseline of 1/2.
    """
    if m not in (2, 3):
        raise ValueError(f"boundary enumeration supports M in {{2, 3}}, got {m}")
    if not (0.0 < grid_resolution <= 0.25):
        raise ValueError("grid_resolution must lie in (0, 0.25]")
    steps = int(round(1.0 / grid_resolution))
    return [clone_fidelities(pt) for pt in simplex_grid(m, steps)]
