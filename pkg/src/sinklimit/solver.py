"""Linear-algebra kernels for absorbing and irreducible Markov chains.

Dense direct solves are used up to moderate sizes and simple vectorized
iterations beyond that; the fancy almost-linear directed-Laplacian machinery
is deliberately out of scope, so these routines favor robustness over
asymptotics.  All functions are pure and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from .errors import SolverConvergenceError

if TYPE_CHECKING:  # pragma: no cover
    from .epsmc import EpsilonMC

_DENSE_STATIONARY_LIMIT = 512
_DENSE_ABSORPTION_LIMIT = 2048
_MAX_SWEEPS = 10**6


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic sparse matrix with a mask of absorbing rows.

    Non-absorbing rows must sum to one within 1e-12; absorbing rows carry no
    out-probability (the chain stops there).
    """

    matrix: sp.csr_matrix
    absorbing: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix is {m.shape}, not square")
        if self.absorbing.shape != (m.shape[0],):
            raise ValueError("absorbing mask length does not match the matrix")
        if m.nnz and m.data.min() < 0:
            raise ValueError("negative transition probability")
        sums = np.asarray(m.sum(axis=1)).ravel()
        bad = ~self.absorbing & (np.abs(sums - 1.0) > 1e-12)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"row {i} sums to {sums[i]!r}, expected 1")
        if np.any(self.absorbing & (sums != 0.0)):
            raise ValueError("absorbing row has outgoing probability")

    @property
    def num_states(self) -> int:
        return self.matrix.shape[0]


@dataclass
class AbsorptionResult:
    """Hitting probabilities of an absorbing chain.

    `hitting[i, j]` is the probability that the chain started at transient
    state `transient[i]` is absorbed at state `absorbing[j]`; `residual` is
    the max-abs residual of the linear system and `bound_excess` how far any
    entry fell outside [0, 1] before clamping.
    """

    hitting: np.ndarray
    transient: np.ndarray
    absorbing: np.ndarray
    residual: float
    bound_excess: float


def stationary_distribution(chain, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of one irreducible row-stochastic chain.

    Parameters
    ----------
    chain : (n, n) ndarray or sparse matrix
        Transition matrix of a strongly connected component.  Rows are
        renormalized to one defensively.

    Returns
    -------
    pi : (n,) ndarray
        The unique probability vector with ``pi @ T = pi``.  Solved as a
        linear system with one balance equation replaced by the
        normalization row: dense LU up to 512 states, sparse LU beyond.
        Being a direct solve, it is correct for periodic chains, where
        power iteration on the raw matrix would oscillate.
    """
    dense = not sp.issparse(chain)
    T = np.asarray(chain, dtype=float) if dense else chain.tocsr().astype(float)
    n = T.shape[0]
    if T.shape != (n, n):
        raise ValueError(f"transition matrix is {T.shape}, not square")
    if n == 1:
        return np.array([1.0])
    sums = T.sum(axis=1) if dense else np.asarray(T.sum(axis=1)).ravel()
    if np.any(sums <= 0):
        raise SolverConvergenceError(
            "component has a node with no internal transitions; not irreducible"
        )
    if dense:
        T = T / sums[:, None]
    else:
        T = sp.diags(1.0 / sums) @ T

    if n <= _DENSE_STATIONARY_LIMIT:
        A = (T.toarray() if sp.issparse(T) else T).T - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SolverConvergenceError(
                f"singular balance system; component not strongly connected ({exc})"
            ) from exc
    else:
        Tc = sp.csr_matrix(T) if not sp.issparse(T) else T
        A = (Tc.T - sp.eye(n, format="csr")).tolil()
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        with np.errstate(all="ignore"):
            pi = sp.linalg.spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(pi)):
            raise SolverConvergenceError(
                "singular balance system; component not strongly connected"
            )

    if np.any(pi <= 0):
        raise SolverConvergenceError(
            "stationary vector has non-positive entries; component not strongly connected"
        )
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ T - pi)))
    if residual > 1e-10:
        raise SolverConvergenceError(f"stationary residual {residual} exceeds 1e-10")
    return pi


def absorption_probabilities(chain: StochasticMatrix, stable: bool = False) -> AbsorptionResult:
    """Hitting probabilities of every absorbing state from every transient one.

    Solves ``(I - Q) H = R`` where Q is the transient-to-transient block and
    R the transient-to-absorbing block: dense direct up to 2048 transient
    states, beyond that vectorized fixed-point sweeps ``H <- Q H + R`` with a
    1e-10 residual target.  Entries are clamped to [0, 1] only after the
    residual and bound checks, so pathologies surface before cosmetic repair.

    With ``stable=True`` the system is solved by state-reduction elimination
    instead (dense, cubic): each pivot ``1 - p_kk`` is formed as the sum of
    the off-diagonal row entries, so there is no cancellation and the result
    stays componentwise accurate even when escape probabilities are tiny, as
    happens when a vanishing-weight chain is instantiated at a very small
    epsilon.
    """
    mask = chain.absorbing
    n = chain.num_states
    absorbing = np.flatnonzero(mask)
    transient = np.flatnonzero(~mask)
    if absorbing.size == 0:
        raise SolverConvergenceError("chain has no absorbing state")
    if transient.size == 0:
        return AbsorptionResult(
            np.zeros((0, absorbing.size)), transient, absorbing, 0.0, 0.0
        )

    _check_absorption_reachable(chain.matrix, mask)
    csr = chain.matrix.tocsr()
    Q = csr[transient][:, transient]
    R = csr[transient][:, absorbing]

    t = transient.size
    if stable:
        H = _state_reduction_hitting(csr.toarray(), mask)
    elif t <= _DENSE_ABSORPTION_LIMIT:
        A = np.eye(t) - Q.toarray()
        try:
            H = np.linalg.solve(A, R.toarray())
        except np.linalg.LinAlgError as exc:
            raise SolverConvergenceError(f"absorption system is singular ({exc})") from exc
    else:
        # Fixed-point sweeps H <- Q H + R.  The solution error is bounded by
        # residual / (1 - rho), so the residual target is scaled by the
        # contraction factor estimated from successive residuals; otherwise a
        # slowly mixing transient block could pass a naive residual check
        # while the hitting rows are still visibly off.
        H = R.toarray()
        Rd = H.copy()
        converged = False
        check = 256
        prev_res = None
        margin = 1e-8
        for sweep in range(1, _MAX_SWEEPS + 1):
            H = Q @ H + Rd
            if sweep % check == 0:
                res = float(np.max(np.abs(H - (Q @ H + Rd))))
                if prev_res is not None and 0.0 < res < prev_res:
                    rho = (res / prev_res) ** (1.0 / check)
                    margin = max(1.0 - rho, 1e-8)
                if res <= 1e-10 * margin:
                    converged = True
                    break
                prev_res = res
        if not converged:
            raise SolverConvergenceError(
                f"absorption sweeps did not converge in {_MAX_SWEEPS} iterations"
            )

    residual = float(np.max(np.abs(H - (Q @ H + R.toarray()))))
    if residual > 1e-9:
        raise SolverConvergenceError(f"absorption residual {residual} exceeds 1e-9")
    row_sums = H.sum(axis=1)
    worst_row = float(np.max(np.abs(row_sums - 1.0)))
    if worst_row > 1e-9:
        i = int(np.argmax(np.abs(row_sums - 1.0)))
        raise SolverConvergenceError(
            f"hitting row for state {transient[i]} sums to {row_sums[i]!r}"
        )
    bound_excess = float(max(0.0, np.max(-H, initial=0.0), np.max(H - 1.0, initial=0.0)))
    if bound_excess > 1e-9:
        raise SolverConvergenceError(
            f"hitting probability outside [0, 1] by {bound_excess}"
        )
    H = np.clip(H, 0.0, 1.0)
    return AbsorptionResult(H, transient, absorbing, residual, bound_excess)


def _state_reduction_hitting(P: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Censoring elimination of the transient states, then back-substitution.

    Every quantity is a sum or product of nonnegative numbers, which is what
    makes this accurate on nearly-reducible chains where LU loses digits to
    cancellation in the pivots.
    """
    n = P.shape[0]
    work = P.astype(float).copy()
    np.fill_diagonal(work, 0.0)  # self-loops never affect absorption
    transient = np.flatnonzero(~mask)
    absorbing = np.flatnonzero(mask)
    alive = np.ones(n, dtype=bool)
    stack = []
    for k in transient[::-1]:
        alive[k] = False
        row = work[k].copy()
        row[~alive] = 0.0
        denom = row.sum()
        if denom <= 0.0:
            raise SolverConvergenceError(
                f"transient state {k} has no path to an absorbing state"
            )
        row /= denom
        stack.append((k, row))
        factor = work[:, k].copy()
        factor[~alive] = 0.0
        work += np.outer(factor, row)
        work[:, k] = 0.0
        work[k, :] = 0.0
    hrows = np.zeros((n, absorbing.size))
    for j, a in enumerate(absorbing):
        hrows[a, j] = 1.0
    for k, row in reversed(stack):
        hrows[k] = row @ hrows
    return hrows[transient]


def _check_absorption_reachable(matrix: sp.spmatrix, mask: np.ndarray) -> None:
    """BFS on the reversed graph; every transient state must reach absorption."""
    csc = matrix.tocsc()
    n = matrix.shape[0]
    seen = mask.copy()
    frontier = list(np.flatnonzero(mask))
    while frontier:
        nxt = []
        for v in frontier:
            sources = csc.indices[csc.indptr[v] : csc.indptr[v + 1]]
            for s in sources:
                if not seen[s]:
                    seen[s] = True
                    nxt.append(int(s))
        frontier = nxt
    if not seen.all():
        offender = int(np.flatnonzero(~seen)[0])
        raise SolverConvergenceError(
            f"transient state {offender} has no path to an absorbing state"
        )


def chain_matrix(chain: "EpsilonMC", nodes: list[int] | None = None) -> StochasticMatrix:
    """Concrete stochastic matrix of a chain whose epsilon edges are gone.

    `nodes[i]` gives the chain node id sitting at matrix index `i`.
    """
    if nodes is None:
        nodes = chain.live_nodes()
    index = {v: i for i, v in enumerate(nodes)}
    rows, cols, vals = [], [], []
    for v in nodes:
        if chain.eps_out(v):
            raise ValueError(f"node {v} still has epsilon edges")
        for tgt, w in sorted(chain.regular_out(v).items()):
            rows.append(index[v])
            cols.append(index[tgt])
            vals.append(w)
    n = len(nodes)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mask = np.array([v in chain.absorbing for v in nodes])
    return StochasticMatrix(matrix, mask)


def oracle_hitting_at_epsilon(chain: "EpsilonMC", eps: float) -> AbsorptionResult:
    """Solve the chain with the vanishing weight frozen at a concrete `eps`.

    Each epsilon edge gets weight ``coeff * eps`` and the node's regular
    weights are scaled by one minus that mass, which keeps rows stochastic
    and preserves the limit.  A node with only epsilon edges would formally
    keep the residual mass as a self-loop; since self-loops do not change
    absorption probabilities, such rows are renormalized to the exact
    coefficient ratios instead, which keeps the system well-conditioned for
    very small `eps`.

    Matrix index `i` corresponds to ``sorted(chain.live_nodes())[i]``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    nodes = chain.live_nodes()
    index = {v: i for i, v in enumerate(nodes)}
    rows, cols, vals = [], [], []
    for v in nodes:
        reg = chain.regular_out(v)
        epsd = chain.eps_out(v)
        eps_mass = sum(c * eps for _, c in sorted(epsd.items()))
        if eps_mass >= 1.0:
            raise ValueError(
                f"eps={eps} too large: node {v} gets epsilon mass {eps_mass} >= 1"
            )
        if reg:
            scale = 1.0 - eps_mass
            for tgt, w in sorted(reg.items()):
                rows.append(index[v])
                cols.append(index[tgt])
                vals.append(w * scale)
            for tgt, c in sorted(epsd.items()):
                rows.append(index[v])
                cols.append(index[tgt])
                vals.append(c * eps)
        elif epsd:
            total = sum(c for _, c in sorted(epsd.items()))
            for tgt, c in sorted(epsd.items()):
                rows.append(index[v])
                cols.append(index[tgt])
                vals.append(c / total)
    n = len(nodes)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mask = np.array([v in chain.absorbing for v in nodes])
    return absorption_probabilities(StochasticMatrix(matrix, mask), stable=True)
