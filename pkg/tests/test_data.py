"""Interaction file parsing, integrity checks, export, and splitting."""

import numpy as np
import pytest

from mgdcf.data import (
    build_dataset,
    density,
    load_dataset,
    load_interactions,
    random_split,
    save_interactions,
)
from mgdcf.errors import DataFormatError


def write(path, text):
    path.write_text(text, encoding="ascii")
    return path


class TestParsing:
    def test_basic_file(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 0 1 2\n1 1\n2 0 2\n")
        test = write(tmp_path / "test.txt", "0 3\n2 1\n")
        ds = load_dataset(train, test)
        assert ds.num_users == 3
        assert ds.num_items == 4
        assert ds.num_train == 6
        assert ds.num_test == 2

    def test_counts_are_max_id_plus_one_across_splits(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 0\n")
        test = write(tmp_path / "test.txt", "5 9\n")
        ds = load_dataset(train, test)
        assert ds.num_users == 6
        assert ds.num_items == 10

    def test_duplicate_pairs_collapse(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 1 1 1\n0 1\n")
        edges, _, _ = load_interactions(train)
        assert edges.shape == (1, 2)

    def test_user_only_line_contributes_user_without_edges(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 1\n7\n")
        test = write(tmp_path / "test.txt", "0 0\n")
        ds = load_dataset(train, test)
        assert ds.num_users == 8
        assert ds.num_train == 1

    def test_tabs_and_crlf_accepted(self, tmp_path):
        train = write(tmp_path / "train.txt", "0\t1\t2\r\n1 0\r\n")
        edges, max_user, max_item = load_interactions(train)
        assert edges.shape[0] == 3
        assert (max_user, max_item) == (1, 2)

    def test_non_integer_token_reports_line(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 1\n1 x\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_interactions(train)

    def test_negative_id_reports_line(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 1\n-1 2\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_interactions(train)

    def test_train_test_overlap_rejected(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 1 2\n")
        test = write(tmp_path / "test.txt", "0 2\n")
        with pytest.raises(DataFormatError, match="overlap"):
            load_dataset(train, test)


class TestDerivedStructures:
    def test_interaction_matrix_matches_edges(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 0 2\n1 1\n")
        test = write(tmp_path / "test.txt", "1 2\n")
        ds = load_dataset(train, test)
        m = ds.interaction_matrix.toarray()
        assert m.sum() == ds.num_train
        assert m[0, 0] == 1.0 and m[0, 2] == 1.0 and m[1, 1] == 1.0

    def test_per_user_lookups(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 0 2\n1 1\n2\n")
        test = write(tmp_path / "test.txt", "0 1\n")
        ds = load_dataset(train, test)
        assert np.array_equal(ds.train_items[0], [0, 2])
        assert np.array_equal(ds.test_items[0], [1])
        assert ds.train_items[2].size == 0

    def test_density(self, tmp_path):
        train = write(tmp_path / "train.txt", "0 0\n1 1\n")
        test = write(tmp_path / "test.txt", "0 1\n")
        ds = load_dataset(train, test)
        assert density(ds) == pytest.approx(3 / 4)


class TestExport:
    def test_round_trip_identity(self, tmp_path):
        """Writing a split and reloading it reproduces the edge sets."""
        rng = np.random.default_rng(21)
        edges = set()
        while len(edges) < 60:
            edges.add((int(rng.integers(12)), int(rng.integers(30))))
        edges = np.array(sorted(edges))
        train, test = random_split(edges, 0.25, seed=5)
        train_path = tmp_path / "train.txt"
        test_path = tmp_path / "test.txt"
        save_interactions(train_path, train, num_users=12)
        save_interactions(test_path, test, num_users=12)
        ds = load_dataset(train_path, test_path)
        assert np.array_equal(ds.train_edges, np.unique(train, axis=0))
        assert np.array_equal(ds.test_edges, np.unique(test, axis=0))


class TestRandomSplit:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        edges = np.unique(rng.integers(0, 40, size=(300, 2)), axis=0)
        a = random_split(edges, 0.2, seed=9)
        b = random_split(edges, 0.2, seed=9)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_partition_is_disjoint_and_complete(self):
        rng = np.random.default_rng(4)
        edges = np.unique(rng.integers(0, 40, size=(300, 2)), axis=0)
        train, test = random_split(edges, 0.2, seed=1)
        combined = np.concatenate([train, test])
        assert combined.shape[0] == edges.shape[0]
        assert np.array_equal(np.unique(combined, axis=0), edges)

    def test_single_item_users_keep_their_edge_in_train(self):
        edges = np.array([[0, 3], [1, 0], [1, 1], [1, 2], [1, 4], [1, 5]])
        train, test = random_split(edges, 0.4, seed=0)
        assert [0, 3] in train.tolist()

    def test_build_dataset_rejects_out_of_range(self):
        with pytest.raises(DataFormatError):
            build_dataset(2, 2, np.array([[0, 5]]), np.zeros((0, 2), int))
