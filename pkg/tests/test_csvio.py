import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssimgen import csvio
from ssimgen.errors import MalformedHeader

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite))
def test_matrix_roundtrip_bit_exact(tmp_path_factory, m):
    p = tmp_path_factory.mktemp("m") / "m.csv"
    csvio.write_matrix_csv(p, m)
    back = csvio.read_matrix_csv(p)
    assert back.shape == m.shape
    assert np.array_equal(back.view(np.uint64), m.view(np.uint64))


def test_matrix_csv_is_headerless(tmp_path):
    text = csvio.matrix_to_csv(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert text == "1.0,-1.0\n-1.0,1.0\n"


def test_spectrum_roundtrip(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(csvio.spectrum_to_csv([2.0, 1e-17, -0.0], 0.1))
    vals, mass = csvio.read_spectrum_csv(p)
    assert vals.tolist() == [2.0, 1e-17, 0.0] and mass == 0.1
    assert p.read_text().splitlines()[-1] == "# clipped_mass=0.1"


def test_spectrum_needs_footer(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("1.0\n")
    with pytest.raises(MalformedHeader):
        csvio.read_spectrum_csv(p)


def test_table_roundtrip(tmp_path):
    rows = [("gauss-noise", 0.1 + 0.2, 400), ("mean-shift", 1 / 3, 401)]
    p = tmp_path / "t.csv"
    csvio.atomic_write(p, csvio.table_to_csv(("family", "param", "mse"), rows).encode())
    back = csvio.read_table_csv(p)
    assert [r["family"] for r in back] == ["gauss-noise", "mean-shift"]
    assert [float(r["param"]) for r in back] == [0.1 + 0.2, 1 / 3]


def test_records_union_of_keys():
    text = csvio.records_to_csv([{"epoch": 0, "a": 1.5}, {"epoch": 1, "a": 2.5, "b": 3.0}])
    assert text.splitlines() == ["epoch,a,b", "0,1.5,", "1,2.5,3.0"]


def test_non_numeric_matrix(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,x\n")
    with pytest.raises(MalformedHeader):
        csvio.read_matrix_csv(p)


def test_atomic_write_leaves_no_temp(tmp_path):
    csvio.atomic_write(tmp_path / "f", b"abc")
    assert [p.name for p in tmp_path.iterdir()] == ["f"]


def test_matrix_roundtrip_keeps_negative_zero(tmp_path):
    csvio.write_matrix_csv(tmp_path / "z.csv", np.array([[-0.0, 0.0]]))
    back = csvio.read_matrix_csv(tmp_path / "z.csv")
    assert np.signbit(back).tolist() == [[True, False]]
