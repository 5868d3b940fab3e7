import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from branlab.config import ChainConfig, with_intensity
from branlab.markov import (
    ReducibleChainError,
    StateSpaceLimitError,
    TruncationDidNotConverge,
    auto_truncate,
    build_generator,
    enumerate_states,
    latency,
    mean_queue_length,
    solve_steady_state,
    stationary_solution,
)
from branlab.queueing import closed_form_latency


def brute_force_stationary(dense_q: np.ndarray) -> np.ndarray:
    """Independent oracle: least squares on the stacked system [Q; 1] p = [0; 1]."""
    n = dense_q.shape[0]
    stacked = np.vstack([dense_q, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    sol, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    return sol


def mm1_tandem_config(rho=0.5, mining_rate=200.0):
    # mining fast enough to be transparent: the system is effectively one
    # memoryless single-server queue at utilisation rho
    return ChainConfig(rho, mining_rate, 0.0, 1.0, servers=1)


# ---------------------------------------------------------------- state space


def test_level_order_enumeration():
    sp = enumerate_states(1, 1)
    assert list(sp.states()) == [(0, 0), (1, 0), (0, 1), (1, 1)]
    assert enumerate_states(2, 2).count == 9
    sp05 = enumerate_states(0, 5)
    assert sp05.count == 6
    assert all(i == 0 for i, _ in sp05.states())


def test_state_count_cap():
    with pytest.raises(StateSpaceLimitError):
        enumerate_states(4000, 4000)


@given(i_max=st.integers(0, 12), j_max=st.integers(0, 12))
def test_index_is_a_bijection(i_max, j_max):
    sp = enumerate_states(i_max, j_max)
    seen = set()
    for idx, (i, j) in enumerate(sp.states()):
        assert sp.index_of(i, j) == idx
        assert sp.state_of(idx) == (i, j)
        seen.add((i, j))
    assert len(seen) == sp.count == (i_max + 1) * (j_max + 1)


# ----------------------------------------------------------------- generator


def test_empty_state_has_only_the_arrival_outflow():
    cfg = ChainConfig(0.7, 1.0, 0.3, 1.0, servers=1)
    sp = enumerate_states(4, 4)
    q = build_generator(cfg, sp).matrix.toarray()
    i00 = sp.index_of(0, 0)
    assert q[i00, i00] == pytest.approx(-0.7)
    # no mining or rejection column entries out of (0, 0)
    outflows = {sp.state_of(r): q[r, i00] for r in range(sp.count) if r != i00 and q[r, i00]}
    assert outflows == {(1, 0): pytest.approx(0.7)}


def test_state_with_one_queued_request():
    cfg = ChainConfig(0.7, 1.0, 0.3, 1.0, servers=1)
    sp = enumerate_states(4, 4)
    q = build_generator(cfg, sp).matrix.toarray()
    i01 = sp.index_of(0, 1)
    assert q[i01, i01] == pytest.approx(-(0.7 + 1.0))
    assert q[sp.index_of(0, 0), i01] == pytest.approx(1.0)
    assert q[sp.index_of(1, 1), i01] == pytest.approx(0.7)


def test_partial_block_and_rejection_targets():
    # capacity-2 blocks: both pending requests mine together; a rejection
    # removes a single pending request
    cfg = ChainConfig(0.7, 1.0, 0.3, 1.0, servers=1, block_capacity=2)
    sp = enumerate_states(5, 5)
    rates = build_generator(cfg, sp)
    q = rates.matrix.toarray()
    i20 = sp.index_of(2, 0)
    assert q[sp.index_of(0, 2), i20] == pytest.approx(1.0)
    assert q[sp.index_of(1, 0), i20] == pytest.approx(0.3)
    assert q[i20, i20] == pytest.approx(-(0.7 + 1.0 + 0.3))
    # the sparse entry view agrees with the dense matrix
    assert all(q[row, col] == rate for row, col, rate in rates.entries())


def test_generator_matches_hand_built_block():
    """First ten level-ordered states for capacity 2, rejection batch 1, one
    server, far from the truncation frontier, against a hand-built matrix."""
    ra, rm, rr, rs = 0.7, 1.0, 0.3, 1.0
    cfg = ChainConfig(ra, rm, rr, rs, servers=1, block_capacity=2)
    sp = enumerate_states(5, 5)
    order = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
             (3, 0), (2, 1), (1, 2), (0, 3)]
    idx = [sp.index_of(i, j) for i, j in order]
    got = build_generator(cfg, sp).matrix.toarray()[np.ix_(idx, idx)]

    expected = np.zeros((10, 10))
    pos = {s: n for n, s in enumerate(order)}
    for i, j in order:
        col = pos[(i, j)]
        out = ra  # arrival always leaves the 10-state window upward or sideways
        if (i + 1, j) in pos:
            expected[pos[(i + 1, j)], col] += ra
        if i >= 1:
            m = min(i, 2)
            if (i - m, j + m) in pos:
                expected[pos[(i - m, j + m)], col] += rm
            out += rm
            if (i - 1, j) in pos:
                expected[pos[(i - 1, j)], col] += rr
            out += rr
        if j >= 1:
            expected[pos[(i, j - 1)], col] += rs
            out += rs
        expected[col, col] = -out
    np.testing.assert_allclose(got, expected, atol=1e-14)


@given(
    ra=st.floats(0.05, 0.9),
    rm=st.floats(1.0, 5.0),
    rr=st.floats(0.0, 1.0),
    rs=st.floats(0.5, 3.0),
    servers=st.integers(1, 4),
    capacity=st.integers(1, 4),
    extent=st.integers(2, 8),
)
def test_generator_invariants(ra, rm, rr, rs, servers, capacity, extent):
    from hypothesis import assume

    from branlab.config import is_valid

    cfg = ChainConfig(ra, rm, rr, rs, servers=servers, block_capacity=capacity)
    assume(is_valid(cfg))
    q = build_generator(cfg, enumerate_states(extent, extent))
    assert np.max(np.abs(q.column_sums())) <= 1e-12
    dense = q.matrix.toarray()
    off = dense - np.diag(np.diag(dense))
    assert np.all(off >= 0)
    assert np.all(np.diag(dense) <= 0)


# -------------------------------------------------------------- steady state


def test_empty_system_limit():
    cfg = ChainConfig(1e-9, 1.0, 0.0, 1.0, servers=1)
    sp = enumerate_states(6, 6)
    dist = solve_steady_state(build_generator(cfg, sp))
    p = dist.probabilities
    assert p[sp.index_of(0, 0)] == pytest.approx(1.0, abs=1e-6)
    assert np.all(p[1:] < 1e-6)


def test_degenerate_chain_recovers_single_queue_law():
    rho = 0.5
    cfg = mm1_tandem_config(rho)
    sp = enumerate_states(4, 40)
    dist = solve_steady_state(build_generator(cfg, sp))
    marginal = np.zeros(41)
    for idx, (_, j) in enumerate(sp.states()):
        marginal[j] += dist.probabilities[idx]
    expected = (1 - rho) * rho ** np.arange(41)
    np.testing.assert_allclose(marginal[:20], expected[:20], atol=2e-3)


def test_normalisation_tolerance():
    cfg = ChainConfig(0.8, 2.5, 0.1, 1.0, servers=2, block_capacity=3)
    dist = solve_steady_state(build_generator(cfg, enumerate_states(40, 40)))
    assert abs(dist.probabilities.sum() - 1.0) <= 1e-10
    assert dist.residual <= 1e-9


def test_solver_matches_brute_force_on_small_spaces():
    cfg = ChainConfig(0.6, 1.5, 0.2, 1.0, servers=2, block_capacity=2)
    sp = enumerate_states(12, 12)  # 169 states
    q = build_generator(cfg, sp)
    expected = brute_force_stationary(q.matrix.toarray())
    for method in ("dense", "sparse"):
        got = solve_steady_state(q, method=method).probabilities
        np.testing.assert_allclose(got, expected, atol=1e-8)


def test_reducible_generator_raises():
    from branlab.markov import RateMatrix
    from scipy import sparse

    sp = enumerate_states(1, 0)
    zero = RateMatrix(matrix=sparse.csc_matrix((2, 2)), space=sp)
    with pytest.raises(ReducibleChainError):
        solve_steady_state(zero)


# ---------------------------------------------------------------- statistics


def test_mean_queue_length_hand_values():
    sp = enumerate_states(1, 1)
    q = build_generator(ChainConfig(0.5, 2.0, 0.0, 1.0), sp)
    dist = solve_steady_state(q)

    concentrated = dist.__class__(
        probabilities=np.array([1.0, 0, 0, 0]), truncation_mass_bound=0.0,
        residual=0.0, space=sp,
    )
    assert mean_queue_length(concentrated) == 0.0

    uniform = dist.__class__(
        probabilities=np.full(4, 0.25), truncation_mass_bound=0.0,
        residual=0.0, space=sp,
    )
    assert mean_queue_length(uniform) == pytest.approx(1.0)


def test_mean_queue_length_single_queue_oracle():
    rho = 0.5
    res = stationary_solution(mm1_tandem_config(rho))
    # queue law rho/(1-rho) plus the vanishing pending stage
    expected = rho / (1 - rho) + (rho / 200.0) / (1 - rho / 200.0)
    assert res.mean_queue_length == pytest.approx(expected, rel=1e-6)


def test_mean_queue_length_monotone_in_arrivals():
    values = []
    for ra in (0.2, 0.4, 0.6, 0.8, 1.0, 1.2):
        cfg = ChainConfig(ra, 2.5, 0.1, 1.0, servers=2, block_capacity=2)
        values.append(stationary_solution(cfg).mean_queue_length)
    assert all(a < b for a, b in zip(values, values[1:]))


# -------------------------------------------------------------------- latency


def test_worked_latency_example():
    cfg = ChainConfig(0.5, 1.0, 0.0, 1.0, servers=1)
    assert latency(cfg) == pytest.approx(3.0, rel=0.02)


def test_confirmation_additivity():
    from dataclasses import replace

    base = ChainConfig(0.5, 2.0, 0.1, 1.0, servers=2, block_capacity=2)
    one = latency(base)
    four = latency(replace(base, confirmations=4))
    assert four - one == pytest.approx(3 / base.mining_rate, rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("rho", [0.1, 0.3, 0.5, 0.8])
@pytest.mark.parametrize("servers", [1, 5])
def test_latency_matches_closed_form_when_tandem_decouples(rho, servers):
    cfg = with_intensity(
        ChainConfig(0.1, 1.25 * servers, 0.0, 1.0, servers=servers), rho
    )
    assert latency(cfg) == pytest.approx(closed_form_latency(cfg).total, rel=0.02)


def test_unstable_config_is_refused():
    from branlab.config import ConfigValidationError

    with pytest.raises(ConfigValidationError):
        latency(ChainConfig(2.0, 1.0, 0.0, 1.0, servers=1))


# ------------------------------------------------------------ auto truncation


def test_light_traffic_converges_at_the_initial_box():
    cfg = ChainConfig(0.1, 1.0, 0.0, 1.0, servers=1)
    res = auto_truncate(cfg)
    assert (res.space.i_max, res.space.j_max) == (16, 16)
    assert res.distribution.truncation_mass_bound < 1e-9


def test_heavier_traffic_needs_larger_boxes():
    light = auto_truncate(with_intensity(ChainConfig(0.1, 2.5, 0.0, 1.0), 0.3))
    heavy = auto_truncate(with_intensity(ChainConfig(0.1, 2.5, 0.0, 1.0), 0.8))
    assert heavy.space.i_max > light.space.i_max


def test_unreachable_tolerance_hits_the_cap():
    cfg = ChainConfig(0.5, 2.5, 0.0, 1.0, servers=1)
    with pytest.raises(TruncationDidNotConverge) as err:
        auto_truncate(cfg, tol=0.0, max_states=100_000)
    assert err.value.i_max >= 16
    assert err.value.frontier_mass >= 0.0
