import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omnifair import LinearSource, PmfSource, SourceSpecError, gf_rank, load_source
from omnifair.setfn import SetFunction, is_submodular, subsets

from conftest import DEMO_HOLDINGS, DEMO_PACKETS, pmf_from_packets


class TestLinearEntropy:
    def test_single_user(self, demo_source):
        assert demo_source.entropy({1}) == F(5)

    def test_per_user_packet_counts(self, demo_source):
        assert [demo_source.entropy({u}) for u in demo_source.users] == [5, 4, 4, 8, 6]

    def test_whole_set(self, demo_source):
        assert demo_source.entropy(demo_source.ground) == F(10)

    def test_empty_set(self, demo_source):
        value = demo_source.entropy(frozenset())
        assert value == 0 and isinstance(value, F)

    def test_unknown_user(self, demo_source):
        with pytest.raises(ValueError, match="unknown user"):
            demo_source.entropy({1, 99})

    def test_vector_form_matches_packet_form(self, demo_source):
        width = len(DEMO_PACKETS)
        unit = {p: [int(q == p) for q in DEMO_PACKETS] for p in DEMO_PACKETS}
        vectors = {u: [unit[p] for p in holdings] for u, holdings in DEMO_HOLDINGS.items()}
        vec_source = LinearSource.from_vectors(vectors, field=2)
        assert all(len(v) == width for rows in vectors.values() for v in rows)
        for X in subsets(demo_source.users):
            assert vec_source.entropy(X) == demo_source.entropy(X)

    def test_vector_form_sees_linear_dependence(self):
        src = LinearSource.from_vectors(
            {1: [[1, 0], [0, 1]], 2: [[1, 1]]}, field=2)
        assert src.entropy({1}) == 2
        assert src.entropy({2}) == 1
        assert src.entropy({1, 2}) == 2

    def test_gf_rank_nonbinary(self):
        # over GF(3): second row is twice the first, third is independent
        assert gf_rank([[1, 2, 0], [2, 4, 0], [0, 0, 1]], 3) == 2

    def test_field_must_be_prime(self):
        with pytest.raises(SourceSpecError, match="prime"):
            LinearSource.from_packets({1: ["a"], 2: ["b"]}, field=4)

    def test_single_user_rejected(self):
        with pytest.raises(SourceSpecError, match="two users"):
            LinearSource.from_packets({1: ["a"]})

    def test_stray_packet_rejected(self):
        with pytest.raises(SourceSpecError, match="universe"):
            LinearSource.from_packets({1: ["a"], 2: ["z"]}, universe=["a", "b"])


class TestConditionalEntropy:
    def test_packet_unique_to_user(self, demo_source):
        # packet g is held by user 4 only
        others = frozenset({1, 2, 3, 5})
        union_others = set().union(*(DEMO_HOLDINGS[u] for u in others))
        unique = set(DEMO_HOLDINGS[4]) - union_others
        assert unique == {"g"}
        assert demo_source.conditional_entropy({4}, others) == F(1)

    def test_conditioning_on_nothing(self, demo_source):
        assert demo_source.conditional_entropy({2}, frozenset()) == F(4)

    def test_empty_given_anything(self, demo_source):
        assert demo_source.conditional_entropy(frozenset(), {1, 3}) == 0

    def test_overlap_rejected(self, demo_source):
        with pytest.raises(ValueError, match="disjoint"):
            demo_source.conditional_entropy({1, 2}, {2, 3})


class TestPmfSource:
    def test_independent_bits_match_packet_model(self):
        holdings = {1: ["a"], 2: ["a", "b"], 3: ["b", "c"]}
        universe = ["a", "b", "c"]
        pmf = pmf_from_packets(holdings, universe)
        linear = LinearSource.from_packets(holdings, universe=universe)
        for X in subsets(pmf.users):
            assert pmf.entropy(X) == pytest.approx(float(linear.entropy(X)), abs=1e-9)

    def test_entropy_is_float(self):
        pmf = pmf_from_packets({1: ["a"], 2: ["a"]}, ["a"])
        assert isinstance(pmf.entropy({1}), float)

    def test_normalization_enforced(self):
        with pytest.raises(SourceSpecError, match="sums to"):
            PmfSource({1: (0, 1), 2: (0, 1)}, [[0.25, 0.25], [0.25, 0.2]])

    def test_negative_entry_rejected(self):
        with pytest.raises(SourceSpecError, match="negative"):
            PmfSource({1: (0, 1), 2: (0, 1)}, [[0.5, 0.5], [0.5, -0.5]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SourceSpecError, match="shape"):
            PmfSource({1: (0, 1), 2: (0, 1, 2)}, [[0.5, 0.5], [0.0, 0.0]])


class TestLoadSource:
    def test_linear_spec(self, tmp_path, demo_source):
        spec = {
            "model": "linear",
            "field": 2,
            "packets": list(DEMO_PACKETS),
            "users": {str(u): list(p) for u, p in DEMO_HOLDINGS.items()},
        }
        path = tmp_path / "source.json"
        path.write_text(json.dumps(spec))
        loaded = load_source(path)
        for X in subsets(loaded.users):
            assert loaded.entropy(X) == demo_source.entropy(X)

    def test_vector_spec(self):
        spec = {"model": "linear", "field": 2,
                "users": {"1": [[1, 0], [0, 1]], "2": [[1, 1]]}}
        src = load_source(spec)
        assert src.entropy({1, 2}) == 2

    def test_pmf_spec(self):
        spec = {"model": "pmf",
                "alphabets": {"1": [0, 1], "2": [0, 1]},
                "table": [[0.5, 0.0], [0.0, 0.5]]}
        src = load_source(spec)
        assert src.entropy({1}) == pytest.approx(1.0)
        assert src.entropy({1, 2}) == pytest.approx(1.0)

    def test_unknown_model(self):
        with pytest.raises(SourceSpecError, match="unknown source model"):
            load_source({"model": "gaussian"})

    def test_missing_file(self):
        with pytest.raises(SourceSpecError, match="no such source file"):
            load_source("/nonexistent/source.json")

    def test_invalid_json_text(self):
        with pytest.raises(SourceSpecError, match="invalid JSON"):
            load_source('{"model": "linear",')

    def test_bad_user_key(self):
        with pytest.raises(SourceSpecError, match="not an integer"):
            load_source({"model": "linear", "users": {"alice": ["a"], "2": ["a"]}})

    def test_single_user_spec_rejected(self):
        with pytest.raises(SourceSpecError, match="two users"):
            load_source({"model": "linear", "users": {"1": ["a"]}})


def assert_polymatroid(source):
    """Normalized, monotone, submodular; exhaustive over all subset pairs."""
    assert source.entropy(frozenset()) == 0
    subs = list(subsets(source.users))
    for X in subs:
        for Y in subs:
            if Y <= X:
                assert source.entropy(Y) <= source.entropy(X)
    assert is_submodular(SetFunction(source.ground, source.entropy))[0]


def test_demo_entropy_is_polymatroid(demo_source):
    assert_polymatroid(demo_source)


@st.composite
def small_linear_sources(draw):
    n = draw(st.integers(min_value=2, max_value=4))
    m = draw(st.integers(min_value=1, max_value=5))
    packets = [f"p{k}" for k in range(m)]
    holdings = {
        u: draw(st.sets(st.sampled_from(packets), max_size=m))
        for u in range(1, n + 1)
    }
    return LinearSource.from_packets(holdings, universe=packets)


@settings(max_examples=60, deadline=None)
@given(small_linear_sources())
def test_linear_entropy_is_polymatroid(source):
    assert_polymatroid(source)


@settings(max_examples=20, deadline=None)
@given(small_linear_sources())
def test_pmf_agrees_with_packet_model(source):
    holdings = {u: sorted(source._packets[u]) for u in source.users}
    pmf = pmf_from_packets(holdings, list(source.universe))
    for X in subsets(source.users):
        assert pmf.entropy(X) == pytest.approx(float(source.entropy(X)), abs=1e-9)
