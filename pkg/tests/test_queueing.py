import math

import pytest
from hypothesis import given, strategies as st

from branlab.config import ChainConfig, ConfigValidationError
from branlab.queueing import ClosedFormDomainError, closed_form_latency, erlang_c


def test_single_server_delay_probability_is_the_load():
    assert erlang_c(1, 0.5) == pytest.approx(0.5, abs=1e-12)


def test_two_server_hand_value():
    # a=1, s=2: C = (1/2)/(1/2 + 1) = 1/3 by direct evaluation of the formula
    assert erlang_c(2, 1.0) == pytest.approx(1 / 3, abs=1e-12)


def test_empty_system_never_queues():
    assert erlang_c(10, 1e-12) == pytest.approx(0.0, abs=1e-9)


@given(a=st.floats(0.0, 1.0 - 1e-9))
def test_single_server_identity(a):
    assert math.isclose(erlang_c(1, a), a, rel_tol=0, abs_tol=1e-12)


def test_monotone_in_load_and_servers():
    loads = [0.1, 0.5, 1.0, 2.0, 3.5]
    for s in (4, 8, 16):
        vals = [erlang_c(s, a) for a in loads]
        assert all(x < y for x, y in zip(vals, vals[1:]))
    for a in (0.5, 2.0, 3.5):
        vals = [erlang_c(s, a) for s in (4, 8, 16, 64)]
        assert all(x > y for x, y in zip(vals, vals[1:]))


def test_large_server_counts_are_stable():
    val = erlang_c(500, 450.0)
    assert 0.0 < val < 1.0
    assert math.isfinite(erlang_c(600, 300.0))


@pytest.mark.parametrize("s,a", [(1, 1.0), (4, 4.0), (2, -0.1), (0, 0.5)])
def test_erlang_domain_errors(s, a):
    with pytest.raises(ValueError):
        erlang_c(s, a)


# ------------------------------------------------------------- closed form


def test_worked_breakdown():
    cfg = ChainConfig(0.5, 1.0, 0.0, 1.0, servers=1)
    bd = closed_form_latency(cfg)
    assert bd.block_wait == pytest.approx(2.0)
    assert bd.service_stage == pytest.approx(2.0)
    assert bd.confirmation_wait == 0.0
    assert bd.sojourn == pytest.approx(4.0)
    assert bd.total == pytest.approx(3.0)
    assert not bd.approximate


def test_confirmation_term():
    cfg = ChainConfig(0.5, 2.0, 0.0, 1.0, servers=1, confirmations=4)
    assert closed_form_latency(cfg).confirmation_wait == pytest.approx(1.5)
    one = ChainConfig(0.5, 2.0, 0.0, 1.0, servers=1, confirmations=1)
    assert closed_form_latency(one).confirmation_wait == 0.0


@given(
    ra=st.floats(0.01, 0.85),
    rs=st.floats(0.9, 3.0),
)
def test_single_server_stage_collapses(ra, rs):
    # with one link the service-stage expression reduces to 1/(Rs - Ra)
    cfg = ChainConfig(ra * rs, 10.0 * rs, 0.0, rs, servers=1)
    bd = closed_form_latency(cfg)
    assert math.isclose(bd.service_stage, 1.0 / (rs - cfg.arrival_rate), rel_tol=1e-10)


def test_components_positive_and_divergent_at_saturation():
    cfg = ChainConfig(0.3, 2.0, 0.0, 1.0, servers=2, confirmations=3)
    bd = closed_form_latency(cfg)
    assert bd.block_wait > 0 and bd.service_stage > 0 and bd.confirmation_wait > 0
    assert bd.sojourn == pytest.approx(bd.block_wait + bd.service_stage + bd.confirmation_wait)
    assert bd.total == pytest.approx(bd.sojourn - 1.0)

    mining_saturated = ChainConfig(2.0 * (1 - 1e-6), 2.0, 0.0, 10.0, servers=1)
    assert closed_form_latency(mining_saturated).block_wait > 1e3
    service_saturated = ChainConfig(1.0 - 1e-6, 100.0, 0.0, 1.0, servers=1)
    assert closed_form_latency(service_saturated).service_stage > 1e3


def test_domain_guard_for_batched_or_rejecting_chains():
    batched = ChainConfig(0.5, 2.0, 0.0, 1.0, servers=1, block_capacity=3)
    with pytest.raises(ClosedFormDomainError):
        closed_form_latency(batched)
    assert closed_form_latency(batched, approximate=True).approximate

    rejecting = ChainConfig(0.5, 2.0, 0.3, 1.0, servers=1)
    with pytest.raises(ClosedFormDomainError):
        closed_form_latency(rejecting)


def test_stage_instability_errors():
    with pytest.raises(ConfigValidationError) as err:
        closed_form_latency(ChainConfig(1.5, 1.0, 0.0, 1.0, servers=4))
    assert err.value.code == "unstable-mining-queue"
    with pytest.raises(ConfigValidationError) as err:
        closed_form_latency(ChainConfig(1.5, 9.0, 0.0, 1.0, servers=1))
    assert err.value.code == "unstable-service-queue"
