"""Haar-averaged decoder design and cloning-asymmetry optimization.

The composite encoder-channel map ``L`` (one qubit in, K selected modes
out) is summarized by two fixed operators on (K qubits) (x) (reference
qubit), stored with the partial transpose on the K-qubit factor already
applied:

    Qt = integral  L(psi)^T (x) psi  dpsi
    Rt = L(I/2)^T (x) I

With these, the Haar-averaged conditional fidelity of a probabilistic
decoder with Choi ``J`` (K qubits -> 1) is ``Tr[J Qt] / p`` subject to
``Tr[J Rt] = p``, ``J >= 0`` and ``Tr_B J <= I``; the transpose
convention is pinned by the identity-channel sanity value of exactly 1.
Dropping the partial-trace dominance yields a generalized Rayleigh
quotient whose top eigenvalue upper-bounds the SDP for every p.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp
from .channel import ChannelChoi
from .cloner import (
    AsymmetryVector,
    ClonerChoi,
    clone_fidelities,
    cloner_choi,
    simplex_grid,
)
from .errors import SolverError
from .metrics import asymmetry_index
from .tensor import (
    I2,
    SWAP2,
    dagger,
    hermitian_eig,
    perm_basis_map,
    projector,
    psd_sqrt_pinv,
    support_projector,
)

SURROGATE_TIE_TOL = 1e-6
GRID_STEP_DENOM = 20
MULTISTART_COUNT = 64
REFINE_TOL = 1e-4

# Haar second moment of psi (x) psi on two qubits.
TWIRL_SECOND_MOMENT = (np.eye(4, dtype=complex) + SWAP2) / 6.0


@dataclass(frozen=True)
class EffectiveMap:
    """Choi of the encoder-channel cascade restricted to receive modes."""

    choi: np.ndarray
    t: tuple
    r: tuple
    k: int


@dataclass(frozen=True)
class QROperators:
    qt: np.ndarray
    rt: np.ndarray
    k: int


@dataclass(frozen=True)
class DecoderSolution:
    j: np.ndarray
    p_target: float
    f_success: float
    f_avg: float
    gap: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class GammaOptimum:
    gamma: AsymmetryVector
    surrogate: float
    decoder: DecoderSolution
    p_real: float
    trace_rows: tuple = field(default=(), repr=False)


def compose_effective_map(
    encoder: ClonerChoi, chan: ChannelChoi, t, r
) -> EffectiveMap:
    """Embed clones onto transmit modes, feed unused modes with I/2,
    push through the channel, keep the receive modes.

    Composition is the link product over the intermediate N-mode space.
    """
    t = tuple(int(x) for x in t)
    r = tuple(int(x) for x in r)
    n = chan.n
    m = encoder.m
    if len(t) != m or len(set(t)) != m:
        raise ValueError(f"transmit modes {t} must be {m} distinct indices")
    if len(set(r)) != len(r) or not r:
        raise ValueError(f"receive modes {r} must be distinct and nonempty")
    if any(not 1 <= x <= n for x in t + r):
        raise ValueError(f"mode indices outside 1..{n}")

    j_enc = encoder.choi
    if m < n:
        extra = np.eye(2 ** (n - m), dtype=complex) / 2 ** (n - m)
        j_enc = np.kron(j_enc, extra)
    # Route clone k to mode t_k; leftover modes take the I/2 legs.
    rest = [q for q in range(1, n + 1) if q not in t]
    perm = list(t) + rest
    if perm != list(range(1, n + 1)):
        qmap = perm_basis_map(perm, n)
        inv = np.empty_like(qmap)
        inv[qmap] = np.arange(2 ** n)
        dim = 2 ** n
        flat = np.arange(2 * dim)
        src = (flat // dim) * dim + inv[flat % dim]
        j_enc = j_enc[np.ix_(src, src)]

    dim = 2 ** n
    je4 = j_enc.reshape(2, dim, 2, dim)
    jh4 = chan.choi.reshape(dim, dim, dim, dim)
    jc4 = np.einsum("imjn,monp->iojp", je4, jh4)

    keep_axes = [x - 1 for x in r]
    drop_axes = [x for x in range(n) if x not in keep_axes]
    tens = jc4.reshape([2] + [2] * n + [2] + [2] * n)
    for ax in sorted(drop_axes, reverse=True):
        tens = np.trace(tens, axis1=1 + ax, axis2=1 + tens.ndim // 2 + ax)
    # Reorder kept output axes to follow the order of r.
    kept_sorted = sorted(keep_axes)
    pos = [kept_sorted.index(x) for x in keep_axes]
    half = 1 + len(keep_axes)
    axes = [0] + [1 + p for p in pos] + [half] + [half + 1 + p for p in pos]
    tens = tens.transpose(axes)
    k = len(r)
    dk = 2 ** k
    return EffectiveMap(choi=tens.reshape(2 * dk, 2 * dk), t=t, r=r, k=k)


def build_qr(emap: EffectiveMap) -> QROperators:
    """Haar-averaged operators of the cascade, input transpose folded in."""
    dk = 2 ** emap.k
    jl4 = emap.choi.reshape(2, dk, 2, dk)
    w4 = TWIRL_SECOND_MOMENT.reshape(2, 2, 2, 2)
    q4 = np.einsum("iojp,irjs->orps", jl4, w4)
    qt = q4.transpose(2, 1, 0, 3).reshape(2 * dk, 2 * dk)
    sigma = np.einsum("iojp,ij->op", jl4, I2 / 2.0)
    rt = np.kron(sigma.T, I2)
    qt = (qt + dagger(qt)) / 2.0
    rt = (rt + dagger(rt)) / 2.0
    return QROperators(qt=qt, rt=rt, k=emap.k)


_HERM_BASIS_CACHE: dict = {}


def _hermitian_basis(d: int) -> list[np.ndarray]:
    if d in _HERM_BASIS_CACHE:
        return _HERM_BASIS_CACHE[d]
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            x = np.zeros((d, d), dtype=complex)
            x[i, j] = x[j, i] = 1.0
            basis.append(x)
            y = np.zeros((d, d), dtype=complex)
            y[i, j] = 1j
            y[j, i] = -1j
            basis.append(y)
    _HERM_BASIS_CACHE[d] = basis
    return basis


def purification_sdp(
    qr: QROperators, p: float, tol: float = 1e-8, max_iter: int = 200
) -> DecoderSolution:
    """Optimal probabilistic purification map at success probability p.

    At p = 1 the acceptance constraint pins ``Tr_B J = I`` exactly
    (``Rt`` has a full-rank state on its K-qubit factor), so the slack
    block is dropped and the trace constraint becomes that equality; for
    p < 1 the dominance ``Tr_B J <= I`` is encoded with a PSD slack
    block coupled by ``Tr_B J + S = I``.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"success probability {p} outside (0, 1]")
    da = qr.qt.shape[0] // 2
    dj = 2 * da
    basis = _hermitian_basis(da)

    equalities = []
    for h in basis:
        coeff = {0: np.kron(h, I2)}
        if p < 1.0:
            coeff[1] = h
        equalities.append((coeff, float(np.real(np.trace(h)))))
    if p < 1.0:
        equalities.append(({0: qr.rt}, p))
        blocks = [dj, da]
        objective = [qr.qt, np.zeros((da, da), dtype=complex)]
    else:
        blocks = [dj]
        objective = [qr.qt]

    problem = sdp.SdpProblem(block_dims=blocks, objective=objective, equalities=equalities)
    sol = sdp.solve(problem, tol=tol, max_iter=max_iter)
    if sol.status != sdp.OPTIMAL:
        raise SolverError(sol.status, f"purification SDP: {sol.message}")

    j = sol.X_blocks[0]
    f_success = float(np.real(np.trace(j @ qr.qt))) / p
    f_avg = p * f_success + (1.0 - p) / 2.0
    _validate_decoder(j, qr, p)
    return DecoderSolution(
        j=j,
        p_target=p,
        f_success=f_success,
        f_avg=f_avg,
        gap=sol.gap,
        iterations=sol.iterations,
    )


def _validate_decoder(j: np.ndarray, qr: QROperators, p: float) -> None:
    floor = float(np.linalg.eigvalsh(j)[0])
    if floor < -1e-8:
        raise ValueError(f"decoder Choi eigenvalue floor {floor:.2e}")
    da = j.shape[0] // 2
    tr_b = np.trace(j.reshape(da, 2, da, 2), axis1=1, axis2=3)
    top = float(np.linalg.eigvalsh((tr_b + dagger(tr_b)) / 2)[-1])
    if top > 1.0 + 1e-7:
        raise ValueError(f"decoder violates Tr_B J <= I by {top - 1.0:.2e}")
    acc = float(np.real(np.trace(j @ qr.rt)))
    if abs(acc - p) > 1e-7:
        raise ValueError(f"acceptance probability {acc:.9f} != target {p}")


def rayleigh_bound(qr: QROperators, support_tol: float = 1e-10):
    """Spectral relaxation of the decoder problem.

    Returns ``(value, vector)`` where value is the top eigenvalue of the
    Hermitian part of ``Rt^{-1/2} Qt Rt^{-1/2}`` on the support of Rt;
    it dominates the SDP conditional fidelity for every p.
    """
    rinv = psd_sqrt_pinv(qr.rt, support_tol=support_tol)
    if np.max(np.abs(rinv)) == 0.0:
        raise ValueError("Rt has empty support")
    mat = rinv @ qr.qt @ rinv
    mat = (mat + dagger(mat)) / 2.0
    w, v = hermitian_eig(mat)
    return float(w[-1]), v[:, -1]


def rank_one_certificate(qr: QROperators, p: float) -> np.ndarray:
    """Relaxation witness ``p R^{-1/2} |v><v| R^{-1/2}``; PSD and on
    budget, but free to violate the partial-trace dominance."""
    _, v = rayleigh_bound(qr)
    rinv = psd_sqrt_pinv(qr.rt)
    proj = support_projector(qr.rt)
    v = proj @ v
    nrm = np.linalg.norm(v)
    if nrm > 0:
        v = v / nrm
    return p * (rinv @ projector(v) @ rinv)


_BLIND_QR_CACHE: dict = {}
_BLIND_DEC_CACHE: dict = {}
_BLIND_LOCK = threading.Lock()


def blind_qr(m: int, k: int) -> QROperators:
    """Haar operators of the symmetric cloner under an identity-channel
    prior; the non-adaptive decoder design point."""
    if m != k:
        raise ValueError(f"blind design requires M == K, got {m} != {k}")
    with _BLIND_LOCK:
        cached = _BLIND_QR_CACHE.get(m)
    if cached is not None:
        return cached
    enc = cloner_choi(tuple([1.0 / m] * m))
    emap = EffectiveMap(choi=enc.choi, t=tuple(range(1, m + 1)), r=tuple(range(1, m + 1)), k=m)
    qr = build_qr(emap)
    with _BLIND_LOCK:
        _BLIND_QR_CACHE[m] = qr
    return qr


def blind_decoder(m: int, p: float) -> DecoderSolution:
    key = (m, round(p, 12))
    with _BLIND_LOCK:
        cached = _BLIND_DEC_CACHE.get(key)
    if cached is not None:
        return cached
    dec = purification_sdp(blind_qr(m, m), p)
    with _BLIND_LOCK:
        _BLIND_DEC_CACHE[key] = dec
    return dec


def evaluate_gamma_surrogate(gamma, chan: ChannelChoi, t, r) -> float:
    enc = cloner_choi(gamma)
    qr = build_qr(compose_effective_map(enc, chan, t, r))
    value, _ = rayleigh_bound(qr)
    return value


def _candidate_set(m: int) -> list[tuple]:
    pts = simplex_grid(m, GRID_STEP_DENOM)
    uniform = tuple([1.0 / m] * m)
    if uniform not in pts:
        pts.append(uniform)
    return pts


def _refine_candidates(m: int, chan, t, r, rng: np.random.Generator) -> list[tuple]:
    from scipy.optimize import minimize

    starts = [rng.dirichlet(np.ones(m)) for _ in range(MULTISTART_COUNT)]
    starts.append(np.full(m, 1.0 / m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        starts.append(e)

    def as_simplex(x):
        x = np.clip(x, 0.0, None)
        s = x.sum()
        return np.full(m, 1.0 / m) if s <= 0 else x / s

    seen = {}

    def neg_surrogate(x):
        g = tuple(round(v, 9) for v in as_simplex(x))
        g = tuple(np.asarray(g) / sum(g))
        if g not in seen:
            seen[g] = -evaluate_gamma_surrogate(g, chan, t, r)
        return seen[g]

    out = []
    for s in starts:
        res = minimize(
            neg_surrogate,
            s,
            method="Nelder-Mead",
            options={"fatol": REFINE_TOL, "xatol": 1e-3, "maxiter": 60, "adaptive": True},
        )
        out.append(tuple(float(v) for v in as_simplex(res.x)))
    return out


def optimize_gamma(
    m: int,
    chan: ChannelChoi,
    t,
    r,
    p: float,
    seed: Optional[int] = None,
    trace: bool = False,
) -> GammaOptimum:
    """Search the asymmetry simplex for the best Rayleigh surrogate.

    M <= 3 scans an exhaustive 1/20 lattice (augmented with the exact
    uniform point, which the lattice misses for M = 3); larger M runs
    Dirichlet multistarts with simplex-descent refinement.  The
    surrogate is the spectral relaxation, independent of p; ties within
    1e-6 break toward the most uniform gamma (highest asymmetry index),
    then lexicographically smallest.  The winner's reported fidelity is
    always re-evaluated through the full decoder SDP at the requested p.
    """
    if m > 5:
        raise ValueError("gamma optimization limited to M <= 5")
    if m <= 3:
        candidates = _candidate_set(m)
    else:
        rng = np.random.Generator(np.random.Philox(0 if seed is None else seed))
        refined = _refine_candidates(m, chan, t, r, rng)
        candidates = sorted(set(refined) | {tuple([1.0 / m] * m)})

    surrogates = {}
    best_val = -np.inf
    for g in candidates:
        val = evaluate_gamma_surrogate(g, chan, t, r)
        surrogates[g] = val
        if val > best_val:
            best_val = val

    ties = [g for g, val in surrogates.items() if val >= best_val - SURROGATE_TIE_TOL]
    ties.sort(key=lambda g: (-asymmetry_index(clone_fidelities(g).fidelities), g))
    gamma_star = ties[0]

    qr = build_qr(compose_effective_map(cloner_choi(gamma_star), chan, t, r))
    dec = purification_sdp(qr, p)
    p_real = float(np.real(np.trace(dec.j @ qr.rt)))
    trace_rows = (
        tuple(
            (g, surrogates[g], dec.f_success if g == gamma_star else None)
            for g in sorted(surrogates)
        )
        if trace
        else ()
    )
    return GammaOptimum(
        gamma=AsymmetryVector(gamma_star),
        surrogate=surrogates[gamma_star],
        decoder=dec,
        p_real=p_real,
        trace_rows=trace_rows,
    )


def write_candidate_trace(path, optimum: GammaOptimum) -> None:
    """Per-candidate optimizer diagnostics CSV."""
    m = optimum.gamma.m
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"gamma_{i + 1}" for i in range(m)] + ["surrogate", "sdp_value", "p_real"]
        )
        chosen = tuple(round(x, 12) for x in optimum.gamma.gamma)
        for g, val, sdp_val in optimum.trace_rows:
            row = [format(x, ".12g") for x in g] + [format(val, ".12g")]
            row.append("" if sdp_val is None else format(sdp_val, ".12g"))
            if tuple(round(x, 12) for x in g) == chosen:
                row.append(format(optimum.p_real, ".12g"))
            else:
                row.append("")
            writer.writerow(row)
