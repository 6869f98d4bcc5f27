import numpy as np
import pytest

import oracles
from peftbo import pareto
from peftbo.errors import InvalidConfigurationError
from peftbo.pareto import ObjectiveVector as OV


def _random_vectors(rng, n):
    return [OV(float(s), float(c)) for s, c in rng.uniform(0, 1, (n, 2))]


class TestDominates:
    def test_clear_domination(self):
        assert pareto.dominates(OV(0.9, 0.1), OV(0.8, 0.2))

    def test_identical_vectors_do_not_dominate(self):
        assert not pareto.dominates(OV(0.5, 0.5), OV(0.5, 0.5))

    def test_incomparable(self):
        assert not pareto.dominates(OV(0.9, 0.5), OV(0.8, 0.2))
        assert not pareto.dominates(OV(0.8, 0.2), OV(0.9, 0.5))

    def test_strict_partial_order_properties(self):
        rng = np.random.default_rng(0)
        vectors = _random_vectors(rng, 60)
        for u in vectors:
            assert not pareto.dominates(u, u)
        for u in vectors:
            for v in vectors:
                if pareto.dominates(u, v):
                    assert not pareto.dominates(v, u)
        for _ in range(2000):
            u, v, w = (vectors[i] for i in rng.integers(0, len(vectors), 3))
            if pareto.dominates(u, v) and pareto.dominates(v, w):
                assert pareto.dominates(u, w)


class TestNonDominated:
    def test_example_set(self):
        pts = [("a", OV(0.9, 0.5)), ("b", OV(0.8, 0.2)), ("c", OV(0.7, 0.4))]
        front = pareto.non_dominated(pts)
        assert front.vectors == [OV(0.8, 0.2), OV(0.9, 0.5)]
        assert front.configs == ["b", "a"]

    def test_singleton(self):
        front = pareto.non_dominated([("x", OV(0.3, 0.3))])
        assert front.vectors == [OV(0.3, 0.3)]

    def test_matches_pairwise_oracle_on_random_sets(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            vectors = _random_vectors(rng, int(rng.integers(1, 51)))
            front = pareto.non_dominated((i, v) for i, v in enumerate(vectors))
            assert front.vectors == oracles.pairwise_non_dominated(vectors)

    def test_cost_tie_keeps_higher_score(self):
        front = pareto.non_dominated([("lo", OV(0.4, 0.2)), ("hi", OV(0.6, 0.2))])
        assert front.vectors == [OV(0.6, 0.2)]
        assert front.configs == ["hi"]

    def test_duplicate_vectors_keep_first_seen(self):
        front = pareto.non_dominated([("first", OV(0.5, 0.5)), ("second", OV(0.5, 0.5))])
        assert front.configs == ["first"]

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        vectors = _random_vectors(rng, 40)
        once = pareto.non_dominated((None, v) for v in vectors)
        twice = pareto.non_dominated((e.config, e.vector) for e in once.entries)
        assert once.vectors == twice.vectors

    def test_sorted_by_ascending_cost(self):
        rng = np.random.default_rng(4)
        front = pareto.non_dominated((None, v) for v in _random_vectors(rng, 100))
        costs = [v.cost for v in front.vectors]
        assert costs == sorted(costs)


class TestHypervolume:
    def test_single_rectangle(self):
        assert pareto.hypervolume([OV(0.8, 0.2)], OV(0.0, 1.0)) == pytest.approx(0.64)

    def test_two_point_staircase(self):
        hv = pareto.hypervolume([OV(0.9, 0.5), OV(0.8, 0.2)], OV(0.0, 1.0))
        assert hv == pytest.approx(0.69)

    def test_two_point_staircase_against_uniform_grid(self):
        pts = [OV(0.9, 0.5), OV(0.8, 0.2)]
        ref = OV(0.0, 1.0)
        approx = oracles.uniform_grid_hypervolume(pts, ref, cells=1000)
        assert pareto.hypervolume(pts, ref) == pytest.approx(approx, rel=1e-3)

    def test_empty_front(self):
        assert pareto.hypervolume([], OV(0.0, 1.0)) == 0.0

    def test_points_not_dominating_ref_contribute_nothing(self):
        ref = OV(0.5, 0.5)
        assert pareto.hypervolume([OV(0.4, 0.4), OV(0.9, 0.6)], ref) == 0.0
        assert pareto.hypervolume(
            [OV(0.6, 0.4), OV(0.4, 0.3)], ref
        ) == pytest.approx(0.01)

    def test_matches_cell_oracle_on_random_fronts(self):
        rng = np.random.default_rng(7)
        ref = OV(0.0, 1.0)
        for _ in range(200):
            vectors = _random_vectors(rng, int(rng.integers(1, 51)))
            hv = pareto.hypervolume(vectors, ref)
            oracle = oracles.cell_hypervolume(vectors, ref)
            assert hv == pytest.approx(oracle, rel=1e-3, abs=1e-12)

    def test_monotone_in_added_points(self):
        rng = np.random.default_rng(8)
        ref = OV(0.0, 1.0)
        vectors = _random_vectors(rng, 30)
        hv = pareto.hypervolume(vectors, ref)
        for extra in _random_vectors(rng, 50):
            assert pareto.hypervolume(vectors + [extra], ref) >= hv - 1e-15

    def test_dominated_point_leaves_hv_unchanged(self):
        ref = OV(0.0, 1.0)
        vectors = [OV(0.9, 0.5), OV(0.8, 0.2)]
        hv = pareto.hypervolume(vectors, ref)
        assert pareto.hypervolume(vectors + [OV(0.7, 0.4)], ref) == pytest.approx(hv)


class TestNadir:
    def test_example(self):
        assert pareto.nadir([OV(0.9, 0.5), OV(0.8, 0.2)]) == OV(0.8, 0.5)

    def test_singleton(self):
        assert pareto.nadir([OV(0.3, 0.1)]) == OV(0.3, 0.1)

    def test_empty_raises(self):
        with pytest.raises(InvalidConfigurationError):
            pareto.nadir([])

    def test_componentwise_weakening_property(self):
        rng = np.random.default_rng(9)
        vectors = _random_vectors(rng, 30)
        base = pareto.nadir(vectors)
        for extra in _random_vectors(rng, 50):
            grown = pareto.nadir(vectors + [extra])
            assert grown.score <= base.score + 1e-15
            assert grown.cost >= base.cost - 1e-15


def test_write_front_format(tmp_path, bert, reference_config):
    from peftbo.pareto import FrontEntry, ParetoFront

    front = ParetoFront((FrontEntry(reference_config, OV(72.2, 0.0076)),))
    out = tmp_path / "front.jsonl"
    with open(out, "w") as fh:
        pareto.write_front(front, fh)
    import json

    lines = out.read_text().splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["config"]["layers"] == [3, 4, 8, 9, 10]
    assert record["score"] == 72.2
