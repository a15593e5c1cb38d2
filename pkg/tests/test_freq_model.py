import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratiopop import (
    FrequencyTable,
    FrequencyTableError,
    NBParams,
    format_frequency_table,
    parse_frequency_table,
    ratio_points,
    read_frequency_table,
    truncate,
)
from ratiopop.datasets import resolve_table

tables = st.dictionaries(st.integers(1, 40), st.integers(1, 10_000), min_size=1, max_size=15)


class TestParse:
    def test_scrapie_text(self):
        t = parse_frequency_table("1 84\n2 15\n3 7\n4 5\n5 2\n6 1\n7 2\n8 2")
        assert t.n == 118
        assert t.max_count == 8

    def test_single_cell(self):
        t = parse_frequency_table("1 10")
        assert (t.n, t.max_count) == (10, 1)

    def test_comments_blanks_and_zero_rows(self):
        t = parse_frequency_table("# header\n\n1 5\n2 0\n3 2\n")
        assert t.entries == {1: 5, 3: 2}
        assert t.f(2) == 0

    def test_tail_record(self):
        t = parse_frequency_table("1 5\n2 3\n>2 7")
        assert t.tail == (2, 7)
        assert t.n == 15
        assert t.max_count == 2

    @pytest.mark.parametrize("text", [
        "1.5 3", "a 3", "1 -2", "1 x", "1 2.5", "0 4", "1 2\n1 3", "", "# only a comment",
        "1 2 3",
    ])
    def test_malformed(self, text):
        with pytest.raises(FrequencyTableError):
            parse_frequency_table(text)

    def test_error_is_value_error(self):
        with pytest.raises(ValueError):
            parse_frequency_table("1 2\n1 2")


class TestTable:
    def test_zero_frequency_not_stored(self):
        t = FrequencyTable({1: 3, 2: 0, 5: 1})
        assert list(t.counts) == [1, 5]
        assert t.max_count == 5
        assert t[2] == 0

    @pytest.mark.parametrize("entries", [{0: 1}, {1: -1}, {1: math.inf}, {1: math.nan}, {}])
    def test_invalid_entries(self, entries):
        with pytest.raises(FrequencyTableError):
            FrequencyTable(entries)

    def test_tail_must_sit_above_exact_counts(self):
        with pytest.raises(FrequencyTableError):
            FrequencyTable({1: 3, 5: 1}, tail=(4, 2))

    def test_equality_and_hash(self):
        a = FrequencyTable({1: 3, 2: 1})
        b = FrequencyTable({2: 1, 1: 3})
        assert a == b and hash(a) == hash(b)

    def test_builtin_totals(self, datasets):
        got = {k: t.n for k, t in datasets.items()}
        assert got == {"meth": 3345, "polyps_low": 299, "polyps_high": 341, "scrapie": 118,
                       "butterfly": 620, "microbial": 84}

    def test_microbial_shape(self, datasets):
        t = datasets["microbial"]
        assert t.max_count == 53
        assert (t.f(1), t.f(2), t.f(3), t.f(4), t.f(5), t.f(6)) == (48, 9, 6, 2, 0, 2)

    def test_resolve_unknown(self):
        with pytest.raises(KeyError):
            resolve_table("no_such_dataset_or_file")

    def test_resolve_alias(self):
        assert resolve_table("polyps-low").n == 299


class TestTruncate:
    def test_butterfly_m10(self, datasets):
        head, tail = truncate(datasets["butterfly"], 10)
        assert head.n == 118 + 74 + 44 + 24 + 29 + 22 + 20 + 19 + 20 + 15 == 385
        assert tail == 235

    def test_scrapie_at_max(self, datasets):
        head, tail = truncate(datasets["scrapie"], 8)
        assert (head.n, tail) == (118, 0)

    def test_meth_m2(self, datasets):
        head, tail = truncate(datasets["meth"], 2)
        assert (head.n, tail) == (3277, 68)

    def test_m_below_two(self, datasets):
        with pytest.raises(ValueError):
            truncate(datasets["scrapie"], 1)

    @given(tables, st.integers(2, 45))
    def test_partition(self, entries, m):
        t = FrequencyTable(entries)
        if min(entries) > m:
            with pytest.raises(ValueError):
                truncate(t, m)
            return
        head, tail = truncate(t, m)
        assert head.n + tail == t.n
        assert all(x <= m for x in head.counts)


class TestRatioPoints:
    def test_meth_first_point(self, datasets):
        pts = ratio_points(datasets["meth"], 10)
        assert pts.x[0] == 1
        # log(326/3114) = -2.25677 by direct evaluation
        assert pts.y[0] == pytest.approx(math.log(2 * 163 / 3114), abs=1e-12)
        assert pts.y[0] == pytest.approx(-2.25677, abs=1e-5)
        assert len(pts) == 9

    def test_poisson_shape(self, poisson_shape):
        pts = ratio_points(poisson_shape, 4)
        np.testing.assert_allclose(pts.y, 0.0, atol=1e-15)
        assert list(pts.x) == [1, 2, 3]

    def test_microbial_gap(self, datasets):
        pts = ratio_points(datasets["microbial"], 6)
        assert list(pts.x) == [1, 2, 3]
        assert set(pts.skipped) == {4, 5}

    def test_empty_point_set(self):
        pts = ratio_points(FrequencyTable({1: 4, 3: 1}), 3)
        assert len(pts) == 0
        assert pts.skipped == (1, 2)

    def test_raw_ratios(self, datasets):
        pts = ratio_points(datasets["scrapie"], 8)
        assert pts.ratios[0] == pytest.approx(2 * 15 / 84)

    @given(tables, st.integers(2, 45), st.floats(0.01, 1000))
    def test_scale_invariance(self, entries, m, c):
        t = FrequencyTable(entries)
        a, b = ratio_points(t, m), ratio_points(t.scaled(c), m)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_allclose(a.y, b.y, rtol=0, atol=1e-12)
        assert a.skipped == b.skipped

    @given(tables, st.integers(2, 45))
    def test_point_invariants(self, entries, m):
        t = FrequencyTable(entries)
        pts = ratio_points(t, m)
        assert np.all(np.diff(pts.x) > 0)
        assert np.all(np.isfinite(pts.y))
        for x in range(1, m):
            has = x in set(pts.x.tolist())
            assert has == (t.f(x) > 0 and t.f(x + 1) > 0)


class TestSerialization:
    @given(tables)
    def test_round_trip(self, entries):
        t = FrequencyTable(entries)
        assert parse_frequency_table(format_frequency_table(t)) == t

    def test_round_trip_with_tail(self, datasets):
        t = datasets["butterfly"]
        again = parse_frequency_table(format_frequency_table(t, header="butterflies"))
        assert again == t

    def test_writer_ascending(self):
        text = format_frequency_table(FrequencyTable({5: 1, 1: 2, 3: 4}))
        assert [int(line.split()[0]) for line in text.splitlines()] == [1, 3, 5]

    def test_read_file(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("1 3\n2 1\n")
        assert read_frequency_table(p).n == 4


@settings(max_examples=200)
@given(st.floats(0.05, 50), st.floats(0.02, 0.98))
def test_katz_ratio_nondecreasing(k, p):
    pmf = NBParams(k, p).pmf(np.arange(0, 30))
    x = np.arange(0, 29)
    r = (x + 1) * pmf[1:] / pmf[:-1]
    assert np.all(np.diff(r) >= -1e-9 * np.abs(r[1:]))
