"""Continuous-time Markov model of the two-queue chain and its stationary law.

States are pairs ``(i, j)``: ``i`` requests wait for inclusion in a mined
block, ``j`` requests occupy the access stage (queued or being served on
one of ``s`` links).  Transitions out of ``(i, j)``:

* arrival      ``-> (i+1, j)``                      at rate ``R_a``
* block mined  ``-> (i-m, j+m)``, ``m = min(i, k)`` at rate ``R_m``, needs ``i >= 1``
* service      ``-> (i, j-1)``                      at rate ``min(j, s) * R_s``
* rejection    ``-> (i-min(i, r), j)``              at rate ``R_r``, needs ``i >= 1``

Mining is disabled on an empty pending queue (no empty blocks), and a
partial block carries all pending requests when ``i <= k``.

The infinite lattice is truncated to a box ``0 <= i <= i_max``,
``0 <= j <= j_max``.  Transitions that would leave the box are dropped and
excluded from the diagonal, which keeps the generator a proper generator;
the stationary mass on the box frontier is reported so the truncation bias
is measured rather than hidden.

The generator is column-oriented: column ``n`` holds the outflows of state
``n``, every column sums to zero, and the stationary vector solves
``Q @ p = 0`` together with ``sum(p) == 1``.  States are enumerated in
levels of constant ``i + j``, descending ``i`` within a level, so the
vector reads ``[p00 | p10 p01 | p20 p11 p02 | ...]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .config import ChainConfig, validate

DEFAULT_MAX_STATES = 4_000_000

# Dense LU is faster than a sparse factorisation only on small boxes.
DENSE_CUTOFF = 2048


class StateSpaceLimitError(ValueError):
    """Requested truncation box exceeds the configured state-count cap."""


class SolverConvergenceError(RuntimeError):
    """The stationary solve did not reach the required residual."""


class ReducibleChainError(RuntimeError):
    """The generator admits no unique stationary vector."""


class TruncationDidNotConverge(RuntimeError):
    """Frontier mass or queue-length stability never met the tolerance
    before the state-count cap; carries the last bounds tried."""

    def __init__(self, message: str, i_max: int, j_max: int, frontier_mass: float):
        super().__init__(message)
        self.i_max = i_max
        self.j_max = j_max
        self.frontier_mass = frontier_mass


class StateSpace:
    """Level-ordered enumeration of the truncated state box."""

    __slots__ = ("i_max", "j_max", "pending", "queued", "_lookup")

    def __init__(self, i_max: int, j_max: int, pending: np.ndarray, queued: np.ndarray):
        self.i_max = i_max
        self.j_max = j_max
        self.pending = pending  # i coordinate per state, in level order
        self.queued = queued  # j coordinate per state, in level order
        lookup = np.full((i_max + 1, j_max + 1), -1, dtype=np.int64)
        lookup[pending, queued] = np.arange(pending.size)
        self._lookup = lookup

    @property
    def count(self) -> int:
        return self.pending.size

    def index_of(self, i: int, j: int) -> int:
        if not (0 <= i <= self.i_max and 0 <= j <= self.j_max):
            raise IndexError(f"state ({i}, {j}) outside the truncation box")
        return int(self._lookup[i, j])

    def state_of(self, index: int) -> tuple[int, int]:
        return int(self.pending[index]), int(self.queued[index])

    def states(self) -> Iterator[tuple[int, int]]:
        return zip(self.pending.tolist(), self.queued.tolist())

    @property
    def frontier_mask(self) -> np.ndarray:
        """Boolean mask of states sitting on the truncation frontier."""
        return (self.pending == self.i_max) | (self.queued == self.j_max)

    def __repr__(self) -> str:
        return f"StateSpace(i_max={self.i_max}, j_max={self.j_max}, count={self.count})"


def enumerate_states(
    i_max: int, j_max: int, max_states: int = DEFAULT_MAX_STATES
) -> StateSpace:
    """All ``(i, j)`` with ``0 <= i <= i_max``, ``0 <= j <= j_max`` in level order."""
    if i_max < 0 or j_max < 0:
        raise ValueError("truncation bounds must be nonnegative")
    count = (i_max + 1) * (j_max + 1)
    if count > max_states:
        raise StateSpaceLimitError(
            f"box ({i_max}, {j_max}) holds {count} states, above the cap of {max_states}"
        )
    pending = np.empty(count, dtype=np.int64)
    queued = np.empty(count, dtype=np.int64)
    pos = 0
    for level in range(i_max + j_max + 1):
        i_hi = min(level, i_max)
        i_lo = max(0, level - j_max)
        width = i_hi - i_lo + 1
        block = np.arange(i_hi, i_lo - 1, -1, dtype=np.int64)
        pending[pos : pos + width] = block
        queued[pos : pos + width] = level - block
        pos += width
    return StateSpace(i_max, j_max, pending, queued)


@dataclass(frozen=True)
class RateMatrix:
    """Sparse generator over a state space, columns holding each state's outflows."""

    matrix: sparse.csc_matrix
    space: StateSpace

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def entries(self) -> Iterator[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        return zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())


def build_generator(config: ChainConfig, space: StateSpace) -> RateMatrix:
    """Assemble the truncated generator for ``config`` on ``space``."""
    validate(config)
    n = space.count
    ii, jj = space.pending, space.queued
    lookup = space._lookup
    col_idx = np.arange(n, dtype=np.int64)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def emit(mask: np.ndarray, targets: np.ndarray, rates: np.ndarray | float) -> None:
        rows.append(targets)
        cols.append(col_idx[mask])
        if np.isscalar(rates):
            vals.append(np.full(targets.size, rates, dtype=np.float64))
        else:
            vals.append(np.asarray(rates, dtype=np.float64))

    mask = ii < space.i_max
    emit(mask, lookup[ii[mask] + 1, jj[mask]], config.arrival_rate)

    batch = np.minimum(ii, config.block_capacity)
    mask = (ii >= 1) & (jj + batch <= space.j_max)
    emit(mask, lookup[ii[mask] - batch[mask], jj[mask] + batch[mask]], config.mining_rate)

    mask = jj >= 1
    emit(
        mask,
        lookup[ii[mask], jj[mask] - 1],
        np.minimum(jj[mask], config.servers) * config.service_rate,
    )

    if config.rejection_rate > 0:
        drop = np.minimum(ii, config.rejection_batch)
        mask = ii >= 1
        emit(mask, lookup[ii[mask] - drop[mask], jj[mask]], config.rejection_rate)

    all_rows = np.concatenate(rows)
    all_cols = np.concatenate(cols)
    all_vals = np.concatenate(vals)

    outflow = np.bincount(all_cols, weights=all_vals, minlength=n)
    all_rows = np.concatenate([all_rows, col_idx])
    all_cols = np.concatenate([all_cols, col_idx])
    all_vals = np.concatenate([all_vals, -outflow])

    matrix = sparse.coo_matrix((all_vals, (all_rows, all_cols)), shape=(n, n)).tocsc()
    return RateMatrix(matrix=matrix, space=space)


@dataclass(frozen=True)
class SteadyStateDistribution:
    """Stationary probabilities over a state space, plus solve diagnostics."""

    probabilities: np.ndarray
    truncation_mass_bound: float
    residual: float
    space: StateSpace


def _finalize(p: np.ndarray, Q: RateMatrix) -> SteadyStateDistribution:
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise ReducibleChainError("stationary solve produced no probability mass")
    p = p / total
    if np.min(p) < -1e-12:
        raise SolverConvergenceError(
            f"stationary solve produced probability {np.min(p):.3e} below the clamp threshold"
        )
    p = np.maximum(p, 0.0)
    p = p / p.sum()
    residual = float(np.max(np.abs(Q.matrix @ p)))
    if residual > 1e-9:
        raise SolverConvergenceError(
            f"stationary residual {residual:.3e} exceeds 1e-9 after normalisation"
        )
    frontier = float(p[Q.space.frontier_mask].sum())
    return SteadyStateDistribution(
        probabilities=p, truncation_mass_bound=frontier, residual=residual, space=Q.space
    )


def _solve_dense(Q: RateMatrix) -> np.ndarray:
    # Replace one balance equation with the normalisation row; the rows of a
    # proper generator are linearly dependent, so rank is preserved.
    A = Q.matrix.toarray()
    A[0, :] = 1.0
    b = np.zeros(Q.dimension)
    b[0] = 1.0
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise ReducibleChainError(f"singular truncated generator: {exc}") from exc


def _solve_sparse(Q: RateMatrix) -> np.ndarray:
    # Pin the probability of state (0, 0) at one and solve the remaining
    # balance equations: A @ x = -q0 with A the trailing principal submatrix,
    # which is nonsingular exactly when the chain is irreducible.  Unlike
    # appending a normalisation row, this keeps the factorisation sparse.
    A = Q.matrix[1:, 1:].tocsc()
    b = -Q.matrix[1:, [0]].toarray().ravel()
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise ReducibleChainError(f"singular truncated generator: {exc}") from exc
    x = lu.solve(b)
    # One refinement step keeps the residual at rounding level on large boxes.
    x += lu.solve(b - A @ x)
    p = np.empty(Q.dimension)
    p[0] = 1.0
    p[1:] = x
    return p


def solve_steady_state(Q: RateMatrix, method: str = "auto") -> SteadyStateDistribution:
    """Stationary vector of ``Q``: ``Q @ p = 0``, ``sum(p) = 1``.

    ``method`` selects the linear-algebra path: ``dense`` (LAPACK LU),
    ``sparse`` (SuperLU with one refinement step), or ``auto`` which takes
    the dense path below :data:`DENSE_CUTOFF` states.  Both paths verify a
    residual of at most 1e-9 and clamp sub-1e-12 negative noise to zero.
    """
    if method == "auto":
        method = "dense" if Q.dimension <= DENSE_CUTOFF else "sparse"
    if method == "dense":
        p = _solve_dense(Q)
    elif method == "sparse":
        p = _solve_sparse(Q)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _finalize(p, Q)


def mean_queue_length(
    dist: SteadyStateDistribution, space: StateSpace | None = None
) -> float:
    """Expected number of requests in the system, ``sum((i+j) * p_ij)``."""
    space = space or dist.space
    return float(np.dot(space.pending + space.queued, dist.probabilities))


@dataclass(frozen=True)
class TruncationResult:
    """Outcome of the adaptive truncation search."""

    space: StateSpace
    distribution: SteadyStateDistribution
    mean_queue_length: float
    extents_tried: tuple[int, ...]


def _solve_box(config: ChainConfig, extent: int, max_states: int) -> TruncationResult:
    space = enumerate_states(extent, extent, max_states=max_states)
    dist = solve_steady_state(build_generator(config, space))
    return TruncationResult(
        space=space,
        distribution=dist,
        mean_queue_length=mean_queue_length(dist),
        extents_tried=(extent,),
    )


def auto_truncate(
    config: ChainConfig,
    tol: float = 1e-9,
    initial_extent: int = 16,
    max_states: int = DEFAULT_MAX_STATES,
    stability_rtol: float = 1e-3,
) -> TruncationResult:
    """Grow the truncation box until the result is insensitive to it.

    Starting from a square ``initial_extent`` box, both bounds double until
    the frontier mass drops below ``tol`` and the mean queue length moves by
    less than ``stability_rtol`` (0.1 percent) between successive sizes.
    The initial box is accepted only after a doubled solve confirms its
    queue length; larger boxes are accepted against the previous size, so
    the search never solves beyond the first adequate box.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    validate(config)

    def stable(a: float, b: float) -> bool:
        return abs(a - b) <= stability_rtol * max(abs(b), 1e-6)

    extent = initial_extent
    tried = [extent]
    current = _solve_box(config, extent, max_states)
    previous: TruncationResult | None = None
    while True:
        if current.distribution.truncation_mass_bound < tol:
            if previous is not None and stable(
                current.mean_queue_length, previous.mean_queue_length
            ):
                return TruncationResult(
                    space=current.space,
                    distribution=current.distribution,
                    mean_queue_length=current.mean_queue_length,
                    extents_tried=tuple(tried),
                )
            if previous is None:
                probe = _solve_box(config, extent * 2, max_states)
                tried.append(extent * 2)
                if stable(probe.mean_queue_length, current.mean_queue_length):
                    return TruncationResult(
                        space=current.space,
                        distribution=current.distribution,
                        mean_queue_length=current.mean_queue_length,
                        extents_tried=tuple(tried),
                    )
                previous, current, extent = current, probe, extent * 2
                continue
        extent *= 2
        if (extent + 1) ** 2 > max_states:
            raise TruncationDidNotConverge(
                f"no convergence below {max_states} states; last box "
                f"({current.space.i_max}, {current.space.j_max}) left frontier mass "
                f"{current.distribution.truncation_mass_bound:.3e}",
                i_max=current.space.i_max,
                j_max=current.space.j_max,
                frontier_mass=current.distribution.truncation_mass_bound,
            )
        tried.append(extent)
        previous, current = current, _solve_box(config, extent, max_states)


@lru_cache(maxsize=32)
def _stationary_for_rates(
    arrival_rate: float,
    mining_rate: float,
    rejection_rate: float,
    service_rate: float,
    servers: int,
    block_capacity: int,
    rejection_batch: int,
    tol: float,
    max_states: int,
) -> TruncationResult:
    # The chain dynamics do not involve the confirmation depth, so solves
    # are shared across sweeps over it.
    config = ChainConfig(
        arrival_rate=arrival_rate,
        mining_rate=mining_rate,
        rejection_rate=rejection_rate,
        service_rate=service_rate,
        servers=servers,
        block_capacity=block_capacity,
        rejection_batch=rejection_batch,
        confirmations=1,
    )
    return auto_truncate(config, tol=tol, max_states=max_states)


def stationary_solution(
    config: ChainConfig, tol: float = 1e-9, max_states: int = DEFAULT_MAX_STATES
) -> TruncationResult:
    """Auto-truncated stationary solve, cached on the rate tuple."""
    validate(config)
    return _stationary_for_rates(
        config.arrival_rate,
        config.mining_rate,
        config.rejection_rate,
        config.service_rate,
        config.servers,
        config.block_capacity,
        config.rejection_batch,
        tol,
        max_states,
    )


def latency(
    config: ChainConfig, tol: float = 1e-9, max_states: int = DEFAULT_MAX_STATES
) -> float:
    """Mean request latency: submission to service start, in time units.

    Computed from the stationary mean queue length via Little's law,
    ``E[i+j] / R_a``, minus one mean service interval, plus ``N - 1`` mean
    block intervals for the confirmations beyond block inclusion.
    """
    result = stationary_solution(config, tol=tol, max_states=max_states)
    base = result.mean_queue_length / config.arrival_rate - 1.0 / config.service_rate
    return base + (config.confirmations - 1) / config.mining_rate
