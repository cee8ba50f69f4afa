"""Tests for dataset files and architecture-level splits."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcsb.core import Architecture, CurveDataset
from lcsb.ingest import DatasetFormatError, SchemaVersionError, read_dataset, split_dataset, write_dataset
from lcsb.synthspace import NB201_SPACE, generate_dataset

from conftest import chain_space


def _lines(path):
    return path.read_text().split("\n")


class TestRoundTrip:
    def test_write_then_read(self, tmp_path, small_dataset):
        p = tmp_path / "d.lcds"
        write_dataset(p, small_dataset)
        assert read_dataset(p).equals(small_dataset)

    def test_empty_dataset(self, tmp_path):
        empty = CurveDataset(NB201_SPACE, [], [], np.empty((0, 100)))
        p = tmp_path / "e.lcds"
        write_dataset(p, empty)
        assert len(_lines(p)) == 2 and _lines(p)[1] == ""
        back = read_dataset(p)
        assert len(back) == 0 and back.space == NB201_SPACE

    def test_full_precision(self, tmp_path, oracle):
        ds = generate_dataset(oracle, 2000, 1, rng_seed=2)
        p = tmp_path / "big.lcds"
        write_dataset(p, ds)
        back = read_dataset(p)
        np.testing.assert_array_equal(back.curves, ds.curves)
        np.testing.assert_array_equal(back.epoch_costs, ds.epoch_costs)

    def test_lf_utf8(self, tmp_path, small_dataset):
        p = tmp_path / "d.lcds"
        write_dataset(p, small_dataset.subset(range(3)))
        assert b"\r" not in p.read_bytes()
        assert json.loads(_lines(p)[0])["schema_version"] == 1

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(-2**40, 2**40),
                              st.lists(st.floats(0, 1), min_size=3, max_size=3)), max_size=6))
    def test_property_round_trip(self, tmp_path_factory, rows):
        space = chain_space(2, 3, e_max=3)
        ds = CurveDataset(space, [Architecture((r[0], 2 - r[0])) for r in rows], [r[1] for r in rows],
                          np.array([r[2] for r in rows]).reshape(len(rows), 3))
        p = tmp_path_factory.mktemp("rt") / "x.lcds"
        write_dataset(p, ds)
        assert read_dataset(p).equals(ds)


class TestReadErrors:
    @pytest.fixture
    def path(self, tmp_path, small_dataset):
        p = tmp_path / "d.lcds"
        write_dataset(p, small_dataset.subset(range(5)))
        return p

    def _edit(self, path, lineno, fn):
        lines = _lines(path)
        lines[lineno - 1] = fn(lines[lineno - 1])
        path.write_text("\n".join(lines))

    def test_value_out_of_range(self, path):
        self._edit(path, 3, lambda l: ",".join(l.split(",")[:2] + ["1.2"] + l.split(",")[3:]))
        with pytest.raises(DatasetFormatError, match="line 3"):
            read_dataset(path)

    def test_truncated_record(self, path):
        # drop the cost and one accuracy: 99 of 100 values remain
        self._edit(path, 4, lambda l: ",".join(l.split(",")[:-2]))
        with pytest.raises(DatasetFormatError, match="line 4: expected 100"):
            read_dataset(path)

    def test_unknown_schema_version(self, path):
        self._edit(path, 1, lambda l: json.dumps({**json.loads(l), "schema_version": 99}))
        with pytest.raises(SchemaVersionError, match="schema version 99"):
            read_dataset(path)

    def test_garbage_number(self, path):
        self._edit(path, 2, lambda l: l.replace(",", ",abc", 1))
        with pytest.raises(DatasetFormatError, match="line 2"):
            read_dataset(path)

    def test_bad_header(self, path):
        self._edit(path, 1, lambda l: "not json")
        with pytest.raises(DatasetFormatError, match="line 1"):
            read_dataset(path)


class TestSplit:
    def _dataset(self, n_arch, seeds=1):
        space = chain_space(1, n_arch, e_max=2)
        archs = [Architecture((i,)) for i in range(n_arch) for _ in range(seeds)]
        return CurveDataset(space, archs, list(range(len(archs))), np.full((len(archs), 2), 0.5))

    def test_counts(self):
        train, test = split_dataset(self._dataset(10), 0.1, seed=0)
        assert len(train.unique_archs()) == 9 and len(test.unique_archs()) == 1

    def test_partition_by_architecture(self, small_dataset):
        train, test = split_dataset(small_dataset, 0.2, seed=3)
        assert not set(train.unique_archs()) & set(test.unique_archs())
        assert len(train) + len(test) == len(small_dataset)
        assert sorted(map(str, train.archs + test.archs)) == sorted(map(str, small_dataset.archs))

    def test_full_space_rounding(self):
        n = NB201_SPACE.size
        assert round(0.1 * n) == 1562  # half-even on 1562.5
        ds = CurveDataset(NB201_SPACE, [Architecture(tuple(o)) for o in np.ndindex(*(5,) * 6)], np.zeros(n),
                          np.full((n, 100), 0.5))
        _, test = split_dataset(ds, 0.1, seed=0)
        assert len(test.unique_archs()) in (1562, 1563)

    def test_deterministic(self, small_dataset):
        a = split_dataset(small_dataset, 0.3, seed=5)
        b = split_dataset(small_dataset, 0.3, seed=5)
        assert a[0].equals(b[0]) and a[1].equals(b[1])

    def test_needs_two_architectures(self):
        with pytest.raises(ValueError):
            split_dataset(self._dataset(1, seeds=3), 0.5, seed=0)

    @pytest.mark.parametrize("frac", [0.0, 1.0])
    def test_fraction_range(self, frac):
        with pytest.raises(ValueError):
            split_dataset(self._dataset(5), frac, seed=0)

    @given(st.integers(2, 40), st.floats(0.01, 0.99), st.integers(0, 1000))
    def test_property_partition(self, n, frac, seed):
        ds = self._dataset(n, seeds=2)
        train, test = split_dataset(ds, frac, seed)
        tr, te = set(train.unique_archs()), set(test.unique_archs())
        assert not tr & te and len(tr | te) == n
        assert len(train) + len(test) == 2 * n
