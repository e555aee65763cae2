import os

import numpy as np
import pytest

from priceopt import (
    ContractError,
    GenConfig,
    ParseError,
    SolverParams,
    adjusted_gap,
    generate,
    gpa_solve,
    read_instance,
    write_instance,
    write_report,
)
from priceopt.storage import read_vector, write_vector
from conftest import two_product_instance


class TestInstanceRoundTrip:
    def test_unbounded(self, tmp_path):
        inst = generate(GenConfig(n=40, seed=4))
        path = tmp_path / "inst.txt"
        write_instance(inst, str(path))
        assert read_instance(str(path)).same_data(inst)

    def test_bounded(self, tmp_path):
        inst = generate(GenConfig(n=40, seed=4, bounds_mode=(1, 5, 5, 10), delta_mode=("const", 0.5)))
        path = tmp_path / "inst.txt"
        write_instance(inst, str(path))
        assert read_instance(str(path)).same_data(inst)

    def test_awkward_floats_survive(self, tmp_path):
        inst = two_product_instance()
        # push in values with no short decimal representation
        inst = type(inst)(
            n=2, k=1,
            a=[1 / 3, np.nextafter(2.0, 3.0)],
            D=[[np.pi, -1e-17 - 0.1], [-0.25, np.e]],
            c=[0.1, 0.2],
            p0=[0.3, 0.7],
            delta=[1e-9, 123456.789012345],
        )
        path = tmp_path / "inst.txt"
        write_instance(inst, str(path))
        assert read_instance(str(path)).same_data(inst)


class TestReaderErrors:
    def _write(self, tmp_path, text):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        return str(p)

    def test_missing_delta_names_field(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 1\nk 1\na 1.0\nc 1.0\np0 2.0\nD 1\n0 0 1.0\n",
        )
        with pytest.raises(ParseError, match="delta"):
            read_instance(path)

    def test_wrong_vector_length(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 2\nk 1\na 1.0\nc 1.0 1.0\np0 2.0 2.0\ndelta 1.0 1.0\nD 2\n0 0 1.0\n1 1 1.0\n",
        )
        with pytest.raises(ParseError, match="a"):
            read_instance(path)

    def test_duplicate_matrix_entry(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 1\nk 1\na 1.0\nc 1.0\np0 2.0\ndelta 1.0\nD 2\n0 0 1.0\n0 0 2.0\n",
        )
        with pytest.raises(ParseError, match="duplicate"):
            read_instance(path)

    def test_explicit_zero_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 2\nk 1\na 1 1\nc 1 1\np0 2 2\ndelta 1 1\nD 3\n0 0 1.0\n0 1 0.0\n1 1 1.0\n",
        )
        with pytest.raises(ParseError, match="zero"):
            read_instance(path)

    def test_garbage_number_has_line_context(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 1\nk 1\na oops\nc 1.0\np0 2.0\ndelta 1.0\nD 1\n0 0 1.0\n",
        )
        with pytest.raises(ParseError, match="line 3"):
            read_instance(path)

    def test_truncated_matrix_list(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 1\nk 1\na 1.0\nc 1.0\np0 2.0\ndelta 1.0\nD 2\n0 0 1.0\n",
        )
        with pytest.raises(ParseError, match="D"):
            read_instance(path)

    def test_lone_bound_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "n 1\nk 1\na 1.0\nc 1.0\np0 2.0\ndelta 1.0\nl 0.5\nD 1\n0 0 1.0\n",
        )
        with pytest.raises(ParseError, match="u"):
            read_instance(path)


class TestVectors:
    def test_round_trip(self, tmp_path):
        v = np.array([1 / 3, -2.5, 1e-17])
        path = tmp_path / "v.txt"
        write_vector(v, str(path))
        assert np.array_equal(read_vector(str(path), 3), v)

    def test_length_check(self, tmp_path):
        path = tmp_path / "v.txt"
        write_vector(np.ones(3), str(path))
        with pytest.raises(ParseError):
            read_vector(str(path), 5)


class TestWriteReport:
    def _reports(self, count):
        inst = two_product_instance()
        reports = []
        for i in range(count):
            r = gpa_solve(inst, inst.p0, SolverParams())
            r.start_id = i + 1
            r.instance_id = "two_product"
            reports.append(r)
        return reports

    def test_empty_is_header_only(self, tmp_path):
        path = tmp_path / "r.csv"
        write_report([], str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("instance_id,n,k,")

    def test_row_count_and_columns(self, tmp_path):
        path = tmp_path / "r.csv"
        write_report(self._reports(3), str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert all(len(line.split(",")) == 12 for line in lines)

    def test_wall_time_suppression_is_deterministic(self, tmp_path):
        reports = self._reports(2)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report(reports, str(p1), include_wall_time=False)
        reports2 = self._reports(2)
        write_report(reports2, str(p2), include_wall_time=False)
        assert p1.read_bytes() == p2.read_bytes()

    def test_lines_format(self, tmp_path):
        path = tmp_path / "r.txt"
        write_report(self._reports(1), str(path), format="lines")
        text = path.read_text()
        assert "final_profit:" in text and "stationary: 1" in text

    def test_bad_format(self, tmp_path):
        with pytest.raises(ContractError):
            write_report([], str(tmp_path / "r"), format="json")


class TestAdjustedGap:
    def test_equal_solutions(self):
        assert adjusted_gap(100.0, 110.0, 110.0) == 0.0

    def test_percentage_gap_value(self):
        assert adjusted_gap(100.0, 100.0, 129.37) == pytest.approx(29.37)

    def test_absolute_value_semantics(self):
        assert adjusted_gap(-50.0, 10.0, 5.0) == pytest.approx(-10.0)

    def test_antisymmetric(self):
        assert adjusted_gap(7.0, 3.0, 9.0) == -adjusted_gap(7.0, 9.0, 3.0)

    def test_zero_baseline_rejected(self):
        with pytest.raises(ContractError):
            adjusted_gap(0.0, 1.0, 2.0)


class TestAtomicity:
    def test_no_partial_file_on_failure(self, tmp_path):
        from priceopt.storage import atomic_write_text

        target = tmp_path / "sub" / "x.txt"
        with pytest.raises(FileNotFoundError):
            atomic_write_text(str(target), "data")
        assert not target.exists()
        assert not any(p.name.startswith(".tmp-") for p in tmp_path.iterdir())


class TestValueInvariants:
    def test_negative_delta_in_file_rejected(self, tmp_path):
        from priceopt import ValidationError

        path = tmp_path / "bad.txt"
        path.write_text("n 1\nk 1\na 1.0\nc 1.0\np0 2.0\ndelta -1.0\nD 1\n0 0 1.0\n")
        with pytest.raises(ValidationError, match="delta"):
            read_instance(str(path))

    def test_file_bounds_must_be_consistent(self, tmp_path):
        from priceopt import ValidationError

        path = tmp_path / "bad.txt"
        path.write_text(
            "n 1\nk 1\na 1.0\nc 1.0\np0 2.0\ndelta 1.0\nl 1.5\nu 4.0\nD 1\n0 0 1.0\n"
        )
        with pytest.raises(ValidationError, match="l"):
            read_instance(str(path))
