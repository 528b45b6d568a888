import pytest

from pareto_relay import (
    CriteriaVector,
    ForwardingMatrix,
    SimConfig,
    evaluate,
    simulate,
    solve_chain_closed_form,
)
from pareto_relay.errors import FlowConservationError, InconsistentForwardingError
from pareto_relay.mc_oracle import CriterionEstimate

from conftest import injected_channel, line_spec, make_spec, rate_matrix


def single_relay_fixture():
    spec = line_spec(slots=2)
    tau = rate_matrix(spec, [[0.0, 0.4]], [[1.0, 0.0]])
    P = injected_channel(3, 2, {(1, 2, 1): 0.8, (1, 3, 1): 0.2, (2, 3, 2): 0.9})
    X = solve_chain_closed_form(tau, P, spec)
    analytic = evaluate(tau, X, spec, channel=P)
    return spec, tau, P, X, analytic


def two_relay_fixture():
    spec = make_spec(
        [
            (1, "source", 0, 0),
            (2, "relay", 1, 0),
            (3, "relay", 2, 0),
            (4, "destination", 3, 0),
        ],
        slots=3,
    )
    tau = rate_matrix(
        spec, [[0.0, 0.4, 0.0], [0.0, 0.0, 0.2]], [[1.0, 0.0, 0.0]]
    )
    P = injected_channel(
        4,
        3,
        {
            (1, 2, 1): 0.8,
            (1, 4, 1): 0.1,
            (2, 3, 2): 0.7,
            (2, 4, 2): 0.3,
            (3, 4, 3): 0.9,
        },
    )
    X = solve_chain_closed_form(tau, P, spec)
    analytic = evaluate(tau, X, spec, channel=P)
    return spec, tau, P, X, analytic


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_packets": 0, "seed": 0},
        {"n_packets": 10, "seed": 0, "max_epochs": 0},
        {"n_packets": 10, "seed": 0, "confidence": 0.0},
        {"n_packets": 10, "seed": 0, "confidence": 1.0},
        {"n_packets": 10, "seed": 0, "block_size": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_deterministic_direct_link(three_node):
    tau = rate_matrix(three_node, [[0.0, 0.0]], [[1.0, 0.0]])
    P = injected_channel(3, 2, {(1, 3, 1): 1.0})
    X = ForwardingMatrix.zeros(3, 2)
    est = simulate(tau, X, three_node, SimConfig(n_packets=5000, seed=0), channel=P)
    assert est.flow.mean == 1.0
    assert est.flow.se == 0.0
    assert est.flow.covers(1.0)
    assert est.delay.mean == 0.0 and est.delay.se == 0.0
    assert est.energy.mean == 0.0 and est.energy.se == 0.0
    assert est.truncated == 0 and not est.truncation_warning


def test_same_seed_reproducible():
    spec, tau, P, X, _ = single_relay_fixture()
    cfg = SimConfig(n_packets=20_000, seed=42)
    a = simulate(tau, X, spec, cfg, channel=P)
    b = simulate(tau, X, spec, cfg, channel=P)
    assert a == b
    c = simulate(tau, X, spec, SimConfig(n_packets=20_000, seed=43), channel=P)
    assert a.flow.mean != c.flow.mean


def test_thread_count_invariance():
    spec, tau, P, X, _ = single_relay_fixture()
    serial = simulate(
        tau, X, spec,
        SimConfig(n_packets=20_000, seed=3, block_size=1000, threads=1),
        channel=P,
    )
    parallel = simulate(
        tau, X, spec,
        SimConfig(n_packets=20_000, seed=3, block_size=1000, threads=4),
        channel=P,
    )
    assert serial == parallel


def test_ci_covers_analytic_single_relay():
    spec, tau, P, X, analytic = single_relay_fixture()
    est = simulate(tau, X, spec, SimConfig(n_packets=100_000, seed=0), channel=P)
    assert est.flow.se > 0
    assert est.flow.covers(analytic.f)
    assert est.delay.covers(analytic.f_d)
    assert est.energy.covers(analytic.f_e)


def test_ci_covers_analytic_two_relay_chain():
    spec, tau, P, X, analytic = two_relay_fixture()
    est = simulate(tau, X, spec, SimConfig(n_packets=50_000, seed=1), channel=P)
    assert est.flow.covers(analytic.f)
    assert est.delay.covers(analytic.f_d)
    assert est.energy.covers(analytic.f_e)


def test_standard_error_scales_inverse_sqrt():
    spec, tau, P, X, _ = single_relay_fixture()
    small = simulate(tau, X, spec, SimConfig(n_packets=25_000, seed=5), channel=P)
    big = simulate(tau, X, spec, SimConfig(n_packets=100_000, seed=5), channel=P)
    assert small.flow.se / big.flow.se == pytest.approx(2.0, rel=0.2)
    assert small.energy.se / big.energy.se == pytest.approx(2.0, rel=0.2)


def test_truncation_is_reported():
    spec, tau, P, X, analytic = single_relay_fixture()
    est = simulate(
        tau, X, spec, SimConfig(n_packets=5000, seed=0, max_epochs=1), channel=P
    )
    # roughly 40% of trials spawn a relay copy that the cap now drops
    assert est.truncated > 0
    assert est.truncation_warning
    assert est.flow.mean < analytic.f
    assert est.energy.mean == 0.0
    # one extra epoch lets the single-hop cascade finish
    full = simulate(
        tau, X, spec, SimConfig(n_packets=5000, seed=0, max_epochs=2), channel=P
    )
    assert full.truncated == 0 and not full.truncation_warning


def test_simulate_applies_feasibility_gates():
    spec, _, P, X, _ = single_relay_fixture()
    too_fast = rate_matrix(spec, [[0.0, 0.9]], [[1.0, 0.0]])
    with pytest.raises(FlowConservationError, match="flow conservation"):
        simulate(too_fast, ForwardingMatrix.zeros(3, 2), spec,
                 SimConfig(n_packets=10, seed=0), channel=P)
    tau = rate_matrix(spec, [[0.0, 0.4]], [[1.0, 0.0]])
    with pytest.raises(InconsistentForwardingError):
        simulate(tau, ForwardingMatrix.zeros(3, 2), spec,
                 SimConfig(n_packets=10, seed=0), channel=P)


def test_estimate_json_shape():
    spec, tau, P, X, _ = single_relay_fixture()
    est = simulate(tau, X, spec, SimConfig(n_packets=1000, seed=0), channel=P)
    doc = est.to_json_dict()
    assert set(doc) == {
        "f", "f_d", "f_e", "n_packets", "confidence", "truncated",
        "truncation_warning",
    }
    assert set(doc["f"]) == {"mean", "se", "ci_low", "ci_high"}
    assert doc["n_packets"] == 1000


def test_criterion_estimate_covers():
    est = CriterionEstimate(mean=0.5, se=0.1, ci_low=0.3, ci_high=0.7)
    assert est.covers(0.3) and est.covers(0.7) and est.covers(0.5)
    assert not est.covers(0.29) and not est.covers(0.71)
