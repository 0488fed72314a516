from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binomtest

from oracles import brute_membership
from subscan.errors import ContractError, LoadError
from subscan.tabular import (
    TRUE_FALSE_ALIASES,
    Dataset,
    Schema,
    SubsetDescriptor,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    membership,
    membership_mask,
    planted_outcome_rate,
    write_csv,
)

from conftest import make_recovery_cohort, random_dataset


class TestSchema:
    def test_duplicate_feature_names_rejected(self):
        with pytest.raises(ContractError):
            Schema((("a", ("x",)), ("a", ("y",))))

    def test_duplicate_category_labels_rejected(self):
        with pytest.raises(ContractError):
            Schema((("a", ("x", "x")),))

    def test_empty_category_list_rejected(self):
        with pytest.raises(ContractError):
            Schema((("a", ()),))

    def test_lookups(self):
        s = Schema((("a", ("x", "y")), ("b", ("p", "q", "r"))))
        assert s.cardinalities() == (2, 3)
        assert s.feature_index("b") == 1
        assert s.value_index(1, "r") == 2
        with pytest.raises(ContractError):
            s.feature_index("nope")
        with pytest.raises(ContractError):
            s.value_index(0, "zzz")


class TestDataset:
    def test_cached_mean_matches_recompute(self, tiny_dataset):
        assert tiny_dataset.global_mean == tiny_dataset.outcomes.sum() / 10

    def test_wrong_cached_mean_rejected(self):
        s = Schema((("a", ("x", "y")),))
        with pytest.raises(ContractError):
            Dataset(s, [[0], [1]], [1, 0], global_mean=0.9)

    def test_non_binary_outcome_rejected(self):
        s = Schema((("a", ("x", "y")),))
        with pytest.raises(ContractError):
            Dataset(s, [[0], [1]], [1, 2])

    def test_out_of_range_index_rejected(self):
        s = Schema((("a", ("x", "y")),))
        with pytest.raises(ContractError):
            Dataset(s, [[0], [2]], [1, 0])

    def test_empty_table_rejected(self):
        s = Schema((("a", ("x",)),))
        with pytest.raises(ContractError):
            Dataset(s, np.empty((0, 1), dtype=np.int32), np.empty(0, dtype=np.int8))

    def test_arrays_immutable(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.rows[0, 0] = 1
        with pytest.raises(ValueError):
            tiny_dataset.outcomes[0] = 0

    def test_with_outcomes_keeps_features(self, tiny_dataset):
        flipped = tiny_dataset.with_outcomes(1 - tiny_dataset.outcomes)
        assert np.array_equal(flipped.rows, tiny_dataset.rows)
        assert flipped.global_mean == 1 - tiny_dataset.global_mean


class TestDescriptor:
    def test_canonical_ordering(self):
        d1 = SubsetDescriptor(((1, (2, 0)), (0, (1,))))
        d2 = SubsetDescriptor.from_dict({0: [1], 1: [0, 2]})
        assert d1 == d2
        assert d1.constraints == ((0, (1,)), (1, (0, 2)))

    def test_empty_value_set_rejected(self):
        with pytest.raises(ContractError):
            SubsetDescriptor(((0, ()),))

    def test_duplicate_feature_rejected(self):
        with pytest.raises(ContractError):
            SubsetDescriptor(((0, (1,)), (0, (0,))))

    def test_label_round_trip(self):
        s = Schema((("a", ("x", "y")), ("b", ("p", "q", "r"))))
        d = SubsetDescriptor.from_labels(s, {"b": ["r", "p"]})
        assert d.to_labels(s) == {"b": ["p", "r"]}

    def test_normalized_drops_full_sets(self):
        s = Schema((("a", ("x", "y")), ("b", ("p", "q", "r"))))
        d = SubsetDescriptor.from_dict({0: [0, 1], 1: [2]})
        assert d.normalized(s) == SubsetDescriptor.from_dict({1: [2]})


class TestMembership:
    def test_empty_descriptor_matches_everything(self, tiny_dataset):
        assert membership(tiny_dataset, SubsetDescriptor()).tolist() == list(range(10))

    def test_full_set_constraint_is_vacuous(self, tiny_dataset):
        d = SubsetDescriptor.from_dict({1: [0, 1, 2]})
        assert membership(tiny_dataset, d).tolist() == list(range(10))

    def test_conjunction_of_disjunctions(self, tiny_dataset):
        d = SubsetDescriptor.from_dict({0: [0], 1: [0, 2]})
        expected = brute_membership(tiny_dataset.rows.tolist(), {0: {0}, 1: {0, 2}})
        assert set(membership(tiny_dataset, d).tolist()) == expected

    def test_out_of_range_rejected(self, tiny_dataset):
        with pytest.raises(ContractError):
            membership(tiny_dataset, SubsetDescriptor.from_dict({5: [0]}))
        with pytest.raises(ContractError):
            membership(tiny_dataset, SubsetDescriptor.from_dict({0: [7]}))

    def test_planted_membership_matches_row_loop(self):
        dataset, planted = make_recovery_cohort(seed=5, n_records=400)
        expected = brute_membership(
            dataset.rows.tolist(), {f: set(vs) for f, vs in planted.constraints}
        )
        assert set(membership(dataset, planted).tolist()) == expected

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_descriptor(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
        ds = random_dataset(rng, 60, (2, 3, 4))
        feature = data.draw(st.integers(0, 2))
        card = ds.schema.cardinality(feature)
        values = data.draw(
            st.sets(st.integers(0, card - 1), min_size=1, max_size=card - 1)
        )
        base = SubsetDescriptor.from_dict({feature: sorted(values)})
        extra = data.draw(st.integers(0, card - 1))
        widened = SubsetDescriptor.from_dict({feature: sorted(values | {extra})})
        base_members = set(membership(ds, base).tolist())
        assert base_members <= set(membership(ds, widened).tolist())

        other = (feature + 1) % 3
        other_card = ds.schema.cardinality(other)
        other_vals = data.draw(
            st.sets(st.integers(0, other_card - 1), min_size=1, max_size=other_card)
        )
        narrowed = base.with_feature(other, sorted(other_vals))
        assert set(membership(ds, narrowed).tolist()) <= base_members

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_single_value_counts_partition_records(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 80, (3, 2, 5))
        for z, card in enumerate(ds.schema.cardinalities()):
            total = sum(
                membership(ds, SubsetDescriptor.from_dict({z: [v]})).size
                for v in range(card)
            )
            assert total == ds.n_records


class TestLoadCsv:
    def test_four_row_file(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("Gender,Smoking,y\nF,Y,1\nF,N,0\nM,Y,0\nM,N,1\n")
        ds = load_csv(p, "y")
        assert ds.n_records == 4
        assert ds.schema.feature_names == ("Gender", "Smoking")
        assert ds.schema.features[0][1] == ("F", "M")
        assert ds.outcomes.tolist() == [1, 0, 0, 1]

    def test_non_binary_outcome_names_row(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,y\nx,1\nx,2\n")
        with pytest.raises(LoadError, match="row 2"):
            load_csv(p, "y")

    def test_ragged_row_names_row(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b,y\nx,p,1\nx,0\n")
        with pytest.raises(LoadError, match="row 2"):
            load_csv(p, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError, match="no such file"):
            load_csv(tmp_path / "nope.csv", "y")

    def test_missing_outcome_column(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\nx,p\n")
        with pytest.raises(LoadError, match="outcome column"):
            load_csv(p, "y")

    def test_true_false_aliases(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,y\nx,true\nz,false\n")
        ds = load_csv(p, "y", outcome_aliases=TRUE_FALSE_ALIASES)
        assert ds.outcomes.tolist() == [1, 0]
        with pytest.raises(LoadError):
            load_csv(p, "y")  # default aliases only accept 0/1

    def test_empty_cell_becomes_missing_category(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,y\nx,1\n,0\n")
        ds = load_csv(p, "y")
        assert ds.schema.features[0][1] == ("x", "<missing>")

    def test_round_trip(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b,y\nx,one,1\ny,two,0\nx,two,1\nz,one,0\n")
        first = load_csv(p, "y")
        q = tmp_path / "rt.csv"
        write_csv(first, q, "y")
        assert first == load_csv(q, "y")

    def test_quoted_fields_with_commas_and_quotes(self, tmp_path):
        p = tmp_path / "q.csv"
        p.write_text(
            'region,status,y\r\n'
            '"North, Central","Retiree ""Status Unknown""",1\r\n'
            'West,Active,0\r\n'
        )
        ds = load_csv(p, "y")
        assert ds.schema.features[0][1] == ("North, Central", "West")
        assert ds.schema.features[1][1] == ('Retiree "Status Unknown"', "Active")
        q = tmp_path / "rt.csv"
        write_csv(ds, q, "y")
        assert load_csv(q, "y") == ds

    def test_round_trip_random(self, tmp_path):
        ds = random_dataset(np.random.default_rng(99), 120, (4, 2, 6))
        path = tmp_path / "r.csv"
        write_csv(ds, path, "outcome")
        again = load_csv(path, "outcome")
        write_csv(again, tmp_path / "r2.csv", "outcome")
        assert again == load_csv(tmp_path / "r2.csv", "outcome")
        assert np.array_equal(again.outcomes, ds.outcomes)


class TestSynthetic:
    def test_odds_multiplier_at_one_rejected(self):
        with pytest.raises(ContractError):
            SyntheticSpec(100, (2, 2), 0.1, SubsetDescriptor.from_dict({0: [0]}), 1.0, 0)

    def test_base_rate_bounds_rejected(self):
        with pytest.raises(ContractError):
            SyntheticSpec(100, (2,), 0.0, SubsetDescriptor.from_dict({0: [0]}), 2.0, 0)
        with pytest.raises(ContractError):
            SyntheticSpec(100, (2,), 1.0, SubsetDescriptor.from_dict({0: [0]}), 2.0, 0)

    def test_probability_overflow_rejected(self):
        spec = SyntheticSpec(
            100, (2,), 0.5, SubsetDescriptor.from_dict({0: [0]}), 1e20, 0
        )
        with pytest.raises(ContractError, match="probability"):
            planted_outcome_rate(spec)
        with pytest.raises(ContractError):
            generate_synthetic(spec)

    def test_deterministic_given_seed(self):
        spec = SyntheticSpec(
            300, (2, 3, 4), 0.1, SubsetDescriptor.from_dict({0: [0], 2: [1, 2]}), 2.5, 7
        )
        a, _ = generate_synthetic(spec)
        b, _ = generate_synthetic(spec)
        assert a == b

    def test_planted_subset_rate_lifted(self):
        spec = SyntheticSpec(
            2000, (2, 3, 4, 5, 2), 0.05,
            SubsetDescriptor.from_dict({0: [0], 2: [0, 1]}), 3.0, seed=11,
        )
        dataset, planted = generate_synthetic(spec)
        mask = membership_mask(dataset, planted)
        inside = int(dataset.outcomes[mask].sum())
        test = binomtest(inside, int(mask.sum()), 0.05, alternative="greater")
        assert test.pvalue < 0.01

    def test_outside_rate_near_base(self):
        spec = SyntheticSpec(
            5000, (2, 3), 0.05, SubsetDescriptor.from_dict({0: [0]}), 3.0, seed=3
        )
        dataset, planted = generate_synthetic(spec)
        outside = ~membership_mask(dataset, planted)
        rate = dataset.outcomes[outside].mean()
        assert binomtest(int(dataset.outcomes[outside].sum()), int(outside.sum()),
                         0.05).pvalue > 0.001
        assert abs(rate - 0.05) < 0.02
