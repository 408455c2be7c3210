"""Shift-invert Arnoldi for the eigenvalues of the band operator
nearest the shift, plus a dense oracle for small test matrices.

The operator's spectrum sits in (-inf, 0] (it approximates the surface
Laplacian), so a small positive shift keeps the factorization away from
the exact kernel of closed surfaces while making the physically
interesting eigenvalues dominant after inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ComplexSpectrum, NoConvergence
from .linalg import (SparseMatrix, SolveStats, _diag_positions, add_diagonal,
                     gmres, ilu0, spmv)

DEFAULT_SIGMA = 0.1
RESIDUAL_TOL = 1e-6
IM_TOL = 1e-6
DEFAULT_SEED = 42


@dataclass
class RitzPair:
    value: complex
    residual: float
    vector: np.ndarray


@dataclass
class Spectrum:
    """Ascending eigenvalues of the negated surface Laplacian."""

    values: np.ndarray
    k: int
    dx: float
    bc: str
    surface: dict
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)


def _op_residual(a: SparseMatrix, vec: np.ndarray, mu: complex) -> float:
    """|| A v - mu v ||_2 / || v ||_2 for a possibly complex pair."""
    vr, vi = np.real(vec), np.imag(vec)
    avr, avi = spmv(a, np.ascontiguousarray(vr)), spmv(a, np.ascontiguousarray(vi))
    rr = avr - (mu.real * vr - mu.imag * vi)
    ri = avi - (mu.real * vi + mu.imag * vr)
    return float(np.sqrt(np.linalg.norm(rr) ** 2 + np.linalg.norm(ri) ** 2)
                 / np.sqrt(np.linalg.norm(vr) ** 2 + np.linalg.norm(vi) ** 2))


def _orth_against(w: np.ndarray, basis: list[np.ndarray]):
    for _ in range(2):
        for q in basis:
            w -= (q @ w) * q
    return w


def arnoldi_smallest(m, k: int, sigma: float | None = None,
                     inner_tol: float = 1e-10, seed: int = DEFAULT_SEED,
                     precondition: bool = True, restart: int = 60,
                     maxit: int = 500, stats_out: list | None = None):
    """Eigenvalues of the band operator nearest the shift.

    `m` is either an assembled operator (anything with `.M`, `.gamma`,
    `.dx`, `.band`) or a plain SparseMatrix.  Runs Arnoldi on
    (M - sigma I)^{-1}; the inner solves use preconditioned GMRES on the
    ILU(0) factors of the shifted matrix.  Returns the k RitzPairs with
    values nearest sigma, sorted by that distance.  Raises NoConvergence
    if fewer than k pairs reach the residual tolerance after enlarging
    the Krylov space three times; ZeroPivot from the factorization means
    the shift landed on the spectrum (the caller may retry with a
    perturbed shift).
    """
    if hasattr(m, "M"):
        a = m.M
        if sigma is None:
            # scale-follows-gamma heuristic; equals 0.1 for the default gamma
            sigma = 0.05 * m.gamma * m.dx ** 2 / m.band.dim
    else:
        a = m
        if sigma is None:
            sigma = DEFAULT_SIGMA
    n = a.nrows
    if k < 1:
        raise ValueError("k must be >= 1")
    if k + 20 > n:
        raise ValueError(f"k={k} too large for operator size {n} (need k+20 <= n)")
    shifted = add_diagonal(a, -sigma)
    diag_pos = _diag_positions(shifted)
    factors = ilu0(shifted) if precondition else None
    rng = np.random.default_rng(seed)

    def solve(rhs: np.ndarray) -> np.ndarray:
        x, stats = gmres(shifted, rhs, factors, tol=inner_tol,
                         restart=restart, maxit=maxit)
        if stats_out is not None:
            stats_out.append(stats)
        if not stats.converged:
            raise NoConvergence(
                f"inner GMRES stalled at residual {stats.final_residual:.3e}")
        return x

    def polish(x: np.ndarray, mu: float, res: float):
        """Inverse iteration on (M - mu I), preconditioned by the sigma
        factors; recovers full-space eigenvectors that deflated rounds
        can only deliver up to the non-normal coupling.  The inner solves
        are deliberately loose: inexact inverse iteration only needs the
        near-null direction amplified, not an accurate solution."""
        for _ in range(4):
            vals = shifted.values.copy()
            vals[diag_pos] += sigma - mu
            moved = SparseMatrix(n, n, shifted.row_ptr, shifted.col_idx, vals)
            y, stats = gmres(moved, x, factors, tol=1e-4, restart=restart,
                             maxit=1)
            if stats_out is not None:
                stats_out.append(stats)
            ynorm = np.linalg.norm(y)
            if not np.isfinite(ynorm) or ynorm == 0.0:
                break
            xn = y / ynorm
            mun = float(xn @ spmv(a, xn))
            rn = float(np.linalg.norm(spmv(a, xn) - mun * xn))
            if not np.isfinite(rn) or rn >= res:
                break
            x, mu, res = xn, mun, rn
            if res <= RESIDUAL_TOL:
                break
        return x, mu, res

    m0 = min(max(2 * k + 20, 40), n)
    locked_pairs: list[tuple[complex, np.ndarray]] = []
    locked_basis: list[np.ndarray] = []

    def run_round(mdim):
        """One deflated Arnoldi sweep; returns the number of pairs locked
        strictly inside the current k-best radius."""
        v0 = _orth_against(rng.standard_normal(n), locked_basis)
        v0n = np.linalg.norm(v0)
        if v0n < 1e-8:
            return 0  # locked space exhausts the start vector: nothing left
        radius = (sorted(abs(mu - sigma) for mu, _ in locked_pairs)[k - 1]
                  if len(locked_pairs) >= k else np.inf)
        V = np.empty((mdim + 1, n))
        H = np.zeros((mdim + 1, mdim))
        V[0] = v0 / v0n
        steps = mdim
        for j in range(mdim):
            w = _orth_against(solve(V[j]), locked_basis)
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            c = V[:j + 1] @ w
            if np.linalg.norm(c) > 1e-8 * max(np.linalg.norm(w), 1e-300):
                w -= V[:j + 1].T @ c
                H[:j + 1, j] += c
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] <= 1e-12 * max(np.abs(H[:j + 2, j]).max(), 1e-300):
                steps = j + 1
                break
            V[j + 1] = w / H[j + 1, j]

        theta, y = np.linalg.eig(H[:steps, :steps])
        order = np.argsort(-np.abs(theta), kind="stable")
        seen_conjugate = set()
        news_inside = 0
        polish_budget = 2 * k
        for idx in order:
            th = theta[idx]
            if abs(th) < 1e-300 or int(idx) in seen_conjugate:
                continue
            mu = sigma + 1.0 / th
            if len(locked_pairs) >= k:
                live = sorted(abs(m - sigma) for m, _ in locked_pairs)[k - 1]
                if abs(mu - sigma) > min(radius, live * 1.05):
                    break  # |mu - sigma| grows along this order: done
            vec = V[:steps].T @ y[:, idx]
            res = _op_residual(a, vec, complex(mu))
            polished = False
            if res > RESIDUAL_TOL:
                # Krylov-side residual estimate: tiny for pairs that
                # converged in the deflated space but carry the
                # non-normal coupling in their full-space residual
                est = abs(H[steps, steps - 1]) * abs(y[steps - 1, idx]) \
                    if steps < V.shape[0] else 0.0
                if (th.imag == 0.0 and est <= 1e-3 * abs(th)
                        and polish_budget > 0):
                    polish_budget -= 1
                    x0 = np.real(vec)
                    x0 /= np.linalg.norm(x0)
                    xp, mup, resp = polish(x0, float(np.real(mu)), res)
                    if resp <= RESIDUAL_TOL:
                        # discard polished vectors that drifted back into
                        # the locked space (rediscoveries, not new copies)
                        q = _orth_against(xp.copy(), locked_basis)
                        if np.linalg.norm(q) < 0.3:
                            continue
                        vec, mu, res = xp, complex(mup), resp
                        polished = True
                if not polished:
                    continue
            if abs(mu - sigma) < radius * (1.0 - 1e-6):
                news_inside += 1
            if (not polished) and th.imag != 0.0:
                conj = np.argmin(np.abs(theta - np.conj(th)))
                seen_conjugate.add(int(conj))
                locked_pairs.append((complex(mu), vec))
                locked_pairs.append((complex(np.conj(mu)), np.conj(vec)))
                parts = (np.real(vec), np.imag(vec))
            else:
                locked_pairs.append((complex(mu), np.real(vec)))
                parts = (np.real(vec),)
            for part in parts:
                q = _orth_against(part.copy(), locked_basis)
                qn = np.linalg.norm(q)
                if qn > 1e-10:
                    locked_basis.append(q / qn)
        return news_inside

    # grow the Krylov space until k pairs converge, then rerun deflated
    # sweeps with fresh start vectors until no eigenvalue enters the
    # k-best set: one start vector cannot see more than one copy of a
    # degenerate eigenvalue, so missed copies only appear after locking.
    mdim = m0
    mverify = min(max(k + 14, 24), n)
    enlargements = verifications = 0
    while True:
        had_k = len(locked_pairs) >= k
        news = run_round(mverify if had_k else mdim)
        if len(locked_pairs) < k:
            enlargements += 1
            if enlargements > 3:
                raise NoConvergence(
                    f"only {len(locked_pairs)} of {k} eigenpairs converged "
                    f"(residual tol {RESIDUAL_TOL})")
            mdim = min(mdim + 20, n)
            continue
        if had_k and news == 0:
            break
        verifications += 1
        if verifications > 6:
            raise NoConvergence(
                "eigenvalue multiplicities did not stabilize after 6 "
                "deflated restarts")

    locked_pairs.sort(key=lambda p: (abs(p[0] - sigma), p[0].real, p[0].imag))
    out = []
    for mu, vec in locked_pairs[:k]:
        nv = vec / np.linalg.norm(vec)
        out.append(RitzPair(mu, _op_residual(a, nv, mu), nv))
    return out


def extract_spectrum(pairs: list[RitzPair], meta: dict | None = None,
                     im_tol: float = IM_TOL) -> Spectrum:
    """Turn Ritz values of the band operator into eigenvalues of the
    negated surface Laplacian: lambda = -Re(mu), ascending.

    Spurious slightly-negative lambdas (within lambda_tol of zero) are
    clamped to zero; anything more negative is dropped as a penalty
    artifact.  A Ritz value with a non-negligible imaginary part aborts:
    it signals an under-resolved grid or a bad shift.
    """
    if not pairs:
        raise ValueError("no Ritz pairs to extract from")
    meta = dict(meta or {})
    for p in pairs:
        if abs(p.value.imag) > im_tol * max(1.0, abs(p.value.real)):
            raise ComplexSpectrum(
                f"Ritz value {p.value} has imaginary part beyond "
                f"{im_tol} * max(1, |Re|)")
    lam = np.array([-p.value.real for p in pairs])
    res = np.array([p.residual for p in pairs])
    lam_tol = 1e-6 * max(lam.max(), 0.0)
    keep = lam >= -lam_tol
    lam, res = lam[keep], res[keep]
    lam[lam < 0.0] = 0.0
    order = np.argsort(lam, kind="stable")
    lam, res = lam[order], res[order]
    return Spectrum(values=lam, k=len(lam), dx=meta.get("dx", float("nan")),
                    bc=meta.get("bc", ""), surface=meta.get("surface", {}),
                    residuals=res, meta=meta)


def dense_eig(a: np.ndarray) -> np.ndarray:
    """All eigenvalues of a small dense matrix (test oracle).

    Backed by LAPACK's Hessenberg-reduction + shifted-QR driver; capped
    at n = 500 so it stays a desk-scale oracle, never a solver path.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("dense_eig needs a square matrix")
    if a.shape[0] > 500:
        raise ValueError("dense_eig is an oracle for n <= 500 only")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QR iteration failed: {exc}") from exc
