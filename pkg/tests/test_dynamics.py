import itertools

import numpy as np
import pytest

from sinklimit import (
    Prior,
    ReplicatorParams,
    best_response_vector,
    build_response_graph,
    decode_profile,
    estimate_limit_distribution,
    exact_limit_distribution,
    limit_hitting_probabilities,
    noisy_replicator_step,
    project_to_simplex,
    random_game,
    simulate_to_sink,
    sink_equilibria,
    total_variation,
    vertex_profile,
)
from sinklimit.dynamics import _simulate_batch, _sink_lookup


def exact_simplex_projection(v, mask):
    """Exact projection by enumerating candidate supports: the optimum's
    support yields the affine formula, so the best feasible candidate over
    all subsets is the projection."""
    idx = [i for i in range(len(v)) if mask[i]]
    best = None
    for r in range(1, len(idx) + 1):
        for sub in itertools.combinations(idx, r):
            lam = (1.0 - sum(v[list(sub)])) / len(sub)
            x = np.zeros(len(v))
            x[list(sub)] = v[list(sub)] + lam
            if np.all(x[list(sub)] >= -1e-14):
                obj = float(np.sum((x - np.where(mask, v, 0.0)) ** 2))
                if best is None or obj < best[0] - 1e-15:
                    best = (obj, x)
    return best[1]


def reference_simulate(game, x0, sinks, params, rng):
    """Independent re-implementation of the trajectory classification rule,
    driven by the public single-step function."""
    lookup = _sink_lookup(game, sinks)
    x = x0
    streak_sink, streak_len, streak_close = -2, 0, False
    for _ in range(params.max_steps):
        x = noisy_replicator_step(game, x, params, rng)
        nearest = [int(np.argmax(xi)) for xi in x]
        pid = sum(a * s for a, s in zip(nearest, game.strides))
        s = int(lookup[pid])
        dist = max(
            float(np.max(np.abs(xi - np.eye(len(xi))[a])))
            for xi, a in zip(x, nearest)
        )
        close = dist < params.vertex_tolerance
        if s >= 0 and s == streak_sink:
            streak_len += 1
            streak_close = streak_close or close
        elif s >= 0:
            streak_sink, streak_len, streak_close = s, 1, close
        else:
            streak_sink, streak_len, streak_close = -2, 0, False
        if streak_len >= params.window and streak_close:
            return s
        if all(int(np.sum(xi > 0)) == 1 for xi in x):
            return s if s >= 0 else None
    return None


# -- best response -------------------------------------------------------------


def test_best_response_pure_profiles():
    game = random_game(4, 2, (3, 3))
    x = vertex_profile(game, 4)
    br = best_response_vector(game, x, 0)
    # against a pure opponent the supported best response is the vertex itself
    np.testing.assert_array_equal(br, [0, 1, 0])


def test_best_response_fig2_uniform_breaks_tie_low(fig2_game):
    x = (np.full(3, 1 / 3), np.full(3, 1 / 3))
    br = best_response_vector(fig2_game, x, 0)
    np.testing.assert_array_equal(br, [1, 0, 0])


def test_best_response_respects_support(fig2_game):
    x = (np.array([0.0, 0.0, 1.0]), np.full(3, 1 / 3))
    br = best_response_vector(fig2_game, x, 0)
    np.testing.assert_array_equal(br, [0, 0, 1])


def test_best_response_global_mode_can_vanish(fig2_game):
    x = (np.array([0.0, 0.0, 1.0]), np.array([0.5, 0.5, 0.0]))
    br = best_response_vector(fig2_game, x, 0, mode="global")
    np.testing.assert_array_equal(br, [0, 0, 0])


# -- simplex projection ----------------------------------------------------------


def test_projection_identity_on_simplex():
    v = np.array([0.2, 0.5, 0.3])
    np.testing.assert_allclose(project_to_simplex(v), v, atol=1e-15)


def test_projection_symmetric_overshoot():
    np.testing.assert_allclose(
        project_to_simplex(np.array([0.8, 0.8])), [0.5, 0.5], atol=1e-15
    )


def test_projection_thresholds_to_vertex():
    np.testing.assert_allclose(
        project_to_simplex(np.array([1.3, -0.1, 0.1])), [1.0, 0.0, 0.0], atol=1e-15
    )


def test_projection_against_enumeration_oracle():
    rng = np.random.default_rng(17)
    for _ in range(100):
        k = int(rng.integers(2, 7))
        v = rng.normal(0, 1.5, k)
        mask = np.zeros(k, dtype=bool)
        mask[rng.choice(k, size=int(rng.integers(1, k + 1)), replace=False)] = True
        got = project_to_simplex(v, support=mask)
        want = exact_simplex_projection(v, mask)
        np.testing.assert_allclose(got, want, atol=1e-8)
        assert np.all(got[~mask] == 0.0)


def test_projection_support_as_index_list():
    got = project_to_simplex(np.array([5.0, 5.0, 5.0]), support=[0, 2])
    np.testing.assert_allclose(got, [0.5, 0.0, 0.5], atol=1e-15)


def test_projection_extinction_floor():
    v = np.array([0.9999999995, 5e-10])
    got = project_to_simplex(v, floor=1e-9)
    np.testing.assert_array_equal(got, [1.0, 0.0])


def test_projection_all_extinguished_falls_back_to_pure():
    # Every coordinate projects below the (absurdly large) floor except none;
    # the fallback puts everything on the largest input coordinate.
    got = project_to_simplex(np.array([0.4, 0.6]), floor=0.7)
    np.testing.assert_array_equal(got, [0.0, 1.0])


def test_projection_empty_support_rejected():
    with pytest.raises(ValueError):
        project_to_simplex(np.array([1.0, 0.0]), support=np.zeros(2, dtype=bool))


# -- replicator step -------------------------------------------------------------


def test_step_fixed_point_at_vertex(fig2_game):
    params = ReplicatorParams(delta=1e-300)
    x = vertex_profile(fig2_game, 8)
    rng = np.random.default_rng(0)
    nxt = noisy_replicator_step(fig2_game, x, params, rng)
    for a, b in zip(nxt, x):
        np.testing.assert_array_equal(a, b)


def test_step_singleton_supports_never_move(fig2_game):
    params = ReplicatorParams(eta=0.5, delta=0.5)
    x = vertex_profile(fig2_game, 2)
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = noisy_replicator_step(fig2_game, x, params, rng)
    np.testing.assert_array_equal(x[0], [0, 0, 1.0])
    np.testing.assert_array_equal(x[1], [1.0, 0, 0])


def test_step_invariants_over_random_walks():
    params = ReplicatorParams()
    games = [random_game(s, 2, (3, 3)) for s in range(3)]
    games += [random_game(s, 3, (2, 2, 2), mode="integer") for s in range(2)]
    rng = np.random.default_rng(5)
    steps = 0
    for game in games:
        x = tuple(rng.dirichlet(np.ones(s)) for s in game.strategy_counts)
        for _ in range(400):
            prev_support = [xi > 0 for xi in x]
            x = noisy_replicator_step(game, x, params, rng)
            steps += 1
            for xi, sup in zip(x, prev_support):
                assert abs(float(xi.sum()) - 1.0) <= 1e-9
                assert np.all(xi >= 0)
                assert np.all(sup | (xi == 0))  # support never grows
    assert steps == 2000


def test_engine_matches_reference_classification(fig2_game, fig3_game):
    params = ReplicatorParams(max_steps=4000)
    for game in (fig2_game, fig3_game):
        sinks = sink_equilibria(build_response_graph(game))
        for seed in range(6):
            x0 = tuple(
                np.random.default_rng(seed + 50).dirichlet(np.ones(s))
                for s in game.strategy_counts
            )
            got = simulate_to_sink(
                game, x0, sinks, params, np.random.default_rng(seed)
            )
            want = reference_simulate(
                game, x0, sinks, params, np.random.default_rng(seed)
            )
            assert got == want


# -- trajectory classification ------------------------------------------------------


def test_vertex_inside_sink_classifies_immediately(fig2_game):
    sinks = sink_equilibria(build_response_graph(fig2_game))
    params = ReplicatorParams()
    out = simulate_to_sink(
        fig2_game, vertex_profile(fig2_game, 0), sinks, params, np.random.default_rng(3)
    )
    assert out == 0  # the 4-cycle sink
    out = simulate_to_sink(
        fig2_game, vertex_profile(fig2_game, 8), sinks, params, np.random.default_rng(3)
    )
    assert out == 1


def test_zero_step_budget_never_classifies(fig2_game):
    sinks = sink_equilibria(build_response_graph(fig2_game))
    params = ReplicatorParams(max_steps=0)
    out = simulate_to_sink(
        fig2_game, vertex_profile(fig2_game, 0), sinks, params, np.random.default_rng(0)
    )
    assert out is None


def test_near_strict_equilibrium_attraction(fig2_game):
    # Regression: from full-support states concentrated on (3,3), the
    # dynamics stays with the strict equilibrium in at least 90% of runs.
    sinks = sink_equilibria(build_response_graph(fig2_game))
    x0 = tuple(np.array([0.025, 0.025, 0.95]) for _ in range(2))
    params = ReplicatorParams()
    rngs = [np.random.default_rng(np.random.SeedSequence([777, r])) for r in range(100)]
    res = _simulate_batch(fig2_game, x0, _sink_lookup(fig2_game, sinks), params, rngs)
    assert np.mean(res == 1) > 0.9


# -- limit distribution estimation ----------------------------------------------------


def test_estimate_single_sink_game(matching_pennies):
    dist = estimate_limit_distribution(
        matching_pennies,
        Prior("uniform"),
        ReplicatorParams(rng_seed=1),
        runs_per_sample=10,
        max_samples=16,
        checkpoint_every=4,
    )
    np.testing.assert_allclose(dist.sink_probabilities, [1.0])
    assert dist.non_converged == 0
    assert dist.converged


def test_estimate_point_mass_on_sink_vertex(fig3_game):
    weights = np.zeros(9)
    weights[0] = 1.0  # the strict equilibrium (1,1)
    dist = estimate_limit_distribution(
        fig3_game,
        Prior.pure(weights),
        ReplicatorParams(rng_seed=2),
        max_samples=24,
    )
    np.testing.assert_allclose(dist.sink_probabilities, [1.0, 0.0])
    assert dist.converged


def test_estimate_deterministic_bit_for_bit(fig2_game):
    # short step budget: non-converged runs are fine, determinism is the point
    kwargs = dict(tv_tol=0.02, runs_per_sample=6, max_samples=12, checkpoint_every=4)
    a = estimate_limit_distribution(
        fig2_game, Prior("uniform"), ReplicatorParams(rng_seed=31, max_steps=600), **kwargs
    )
    b = estimate_limit_distribution(
        fig2_game, Prior("uniform"), ReplicatorParams(rng_seed=31, max_steps=600), **kwargs
    )
    np.testing.assert_array_equal(a.sink_probabilities, b.sink_probabilities)
    assert a.tv_trace == b.tv_trace
    assert a.samples == b.samples and a.non_converged == b.non_converged
    c = estimate_limit_distribution(
        fig2_game, Prior("uniform"), ReplicatorParams(rng_seed=32, max_steps=600), **kwargs
    )
    assert not np.array_equal(a.sink_probabilities, c.sink_probabilities)


def test_estimate_parallel_equals_serial(fig2_game):
    kwargs = dict(tv_tol=0.02, runs_per_sample=8, max_samples=16, checkpoint_every=4)
    serial = estimate_limit_distribution(
        fig2_game, Prior("uniform"), ReplicatorParams(rng_seed=7, max_steps=800), workers=1, **kwargs
    )
    threaded = estimate_limit_distribution(
        fig2_game, Prior("uniform"), ReplicatorParams(rng_seed=7, max_steps=800), workers=4, **kwargs
    )
    np.testing.assert_array_equal(serial.sink_probabilities, threaded.sink_probabilities)
    assert serial.tv_trace == threaded.tv_trace


def test_estimate_consistent_with_exact_on_pinned_no_tie_games():
    # Vertex-prior simulation reproduces the exact pure-prior distribution on
    # games whose basins match the chain's hitting pattern; pinned seeds.
    cases = [
        (3, 2, (3, 3)),
        (23, 2, (3, 3)),  # two sinks with a genuine split
        (1, 3, (2, 2, 2)),
        (14, 2, (4, 4)),
        (0, 2, (2, 3)),
    ]
    for seed, p, counts in cases:
        game = random_game(seed, p, counts)
        n = game.num_profiles
        w = np.full(n, 1.0 / n)
        exact = exact_limit_distribution(game, w)
        est = estimate_limit_distribution(
            game,
            Prior.pure(w, vertex_smoothing=0.1),
            ReplicatorParams(rng_seed=99),
            max_samples=64,
        )
        tv = total_variation(
            np.append(exact.sink_probabilities, 0.0),
            np.append(est.sink_probabilities, est.non_converged_fraction),
        )
        assert tv <= 0.05, f"game {seed},{p},{counts}: TV {tv}"


def test_estimate_fig2_uniform_smoke(fig2_game):
    # Light-budget version of the uniform-prior run; the full-budget
    # regression lives in the acceptance suite.
    dist = estimate_limit_distribution(
        fig2_game,
        Prior("uniform"),
        ReplicatorParams(rng_seed=2024),
        tv_tol=0.02,
        runs_per_sample=6,
        max_samples=24,
    )
    assert dist.sink_probabilities.sum() >= 0.95
    assert dist.sink_probabilities[0] > dist.sink_probabilities[1]


# -- exact path -------------------------------------------------------------------


def test_exact_point_mass_inside_sink(fig3_game):
    w = np.zeros(9)
    w[4] = 1.0
    dist = exact_limit_distribution(fig3_game, w)
    np.testing.assert_array_equal(dist.sink_probabilities, [0.0, 1.0])
    assert dist.method == "exact"


def test_exact_fig3_point_mass_on_tie_profile(fig3_game):
    w = np.zeros(9)
    w[8] = 1.0  # profile (3,3)
    dist = exact_limit_distribution(fig3_game, w)
    np.testing.assert_allclose(dist.sink_probabilities, [1.0, 0.0], atol=1e-12)


def test_exact_uniform_prior_averages_rows(fig3_game):
    hit = limit_hitting_probabilities(fig3_game)
    w = np.full(9, 1 / 9)
    dist = exact_limit_distribution(fig3_game, w)
    np.testing.assert_allclose(
        dist.sink_probabilities, hit.probabilities.mean(axis=0), atol=1e-12
    )


def test_exact_rejects_bad_priors(fig3_game):
    with pytest.raises(ValueError, match="sum"):
        exact_limit_distribution(fig3_game, np.full(9, 0.2))
    with pytest.raises(ValueError, match="weights"):
        exact_limit_distribution(fig3_game, np.full(4, 0.25))
    with pytest.raises(ValueError, match="nonnegative"):
        w = np.zeros(9)
        w[0], w[1] = 1.5, -0.5
        exact_limit_distribution(fig3_game, w)


# -- misc ------------------------------------------------------------------------


def test_prior_parsing():
    assert Prior.parse("uniform").kind == "uniform"
    assert Prior.parse("dirichlet:0.5").alpha == 0.5
    with pytest.raises(ValueError):
        Prior.parse("dirichlet:-1")
    with pytest.raises(ValueError):
        Prior.parse("gaussian")
    with pytest.raises(ValueError, match="sum"):
        Prior.pure([0.5, 0.2])


def test_prior_samples_match_game_shape(fig2_game):
    rng = np.random.default_rng(0)
    x = Prior.parse("uniform").sample(fig2_game, rng)
    assert [len(xi) for xi in x] == [3, 3]
    for xi in x:
        assert abs(float(xi.sum()) - 1.0) <= 1e-12


def test_vertex_profile_smoothing(fig2_game):
    x = vertex_profile(fig2_game, 8, smoothing=0.3)
    np.testing.assert_allclose(x[0], [0.1, 0.1, 0.8], atol=1e-15)
    assert decode_profile(8, fig2_game) == (2, 2)


def test_total_variation():
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert total_variation([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.2)


def test_replicator_params_validation():
    with pytest.raises(ValueError):
        ReplicatorParams(eta=0.0)
    with pytest.raises(ValueError):
        ReplicatorParams(delta=-1.0)
    with pytest.raises(ValueError):
        ReplicatorParams(window=0)
    with pytest.raises(ValueError):
        ReplicatorParams(br_mode="greedy")
