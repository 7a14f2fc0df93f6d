import io
import math

import pytest
from hypothesis import given

from slns.model import LinearConstraint, MipModel, Sense, Variable, VarKind
from slns.mps import MpsError, parse_mps, read_mps, save_mps, write_mps
from conftest import FIXTURES
from strategies import models

MPS_DIR = FIXTURES / "mps"
CORPUS = sorted(MPS_DIR.glob("*.mps"))


def test_corpus_size():
    assert len(CORPUS) >= 10


def test_two_var_fixture_matches_hand_model():
    expected = MipModel(
        "TWOVAR",
        (Variable("X1", VarKind.BINARY, 0.0, 1.0, 1.0), Variable("Y1", VarKind.CONTINUOUS, 0.0, math.inf, 2.0)),
        (LinearConstraint(((0, 1.0), (1, 3.0)), Sense.LE, 4.0, "LIM1"),),
    )
    m = read_mps(MPS_DIR / "two_var.mps")
    assert m.same_as(expected)
    assert len(m.binary_indices) == 1 and len(m.continuous_indices) == 1


def test_senses():
    m = read_mps(MPS_DIR / "senses.mps")
    assert [c.sense for c in m.constraints] == [Sense.LE, Sense.GE, Sense.EQ]
    assert [c.rhs for c in m.constraints] == [10.0, 2.0, 0.0]
    assert m.constraints[2].terms == ((0, 1.0), (2, -1.0))


def test_markers_default_integer_bounds():
    m = read_mps(MPS_DIR / "markers.mps")
    kinds = [v.kind for v in m.variables]
    assert kinds == [VarKind.BINARY, VarKind.BINARY, VarKind.CONTINUOUS, VarKind.INTEGER]
    n = m.variables[3]
    assert (n.lower, n.upper) == (0.0, math.inf)


def test_ranges_expand_to_two_rows():
    m = read_mps(MPS_DIR / "ranges.mps")
    rows = {c.name: (c.sense, c.rhs) for c in m.constraints}
    assert rows["r_le"] == (Sense.LE, 8.0) and rows["r_le_range"] == (Sense.GE, 5.0)
    assert rows["r_ge"] == (Sense.GE, 1.0) and rows["r_ge_range"] == (Sense.LE, 3.5)
    assert rows["r_eq_pos"] == (Sense.LE, 3.5) and rows["r_eq_pos_range"] == (Sense.GE, 2.0)
    assert rows["r_eq_neg"] == (Sense.LE, 4.0) and rows["r_eq_neg_range"] == (Sense.GE, 2.0)


def test_bound_codes():
    up = {v.name: (v.lower, v.upper) for v in read_mps(MPS_DIR / "bounds_up_lo.mps").variables}
    assert up == {"p": (1.5, 4.25), "q": (-math.inf, -2.0), "r": (-3.0, 2.0)}
    fx = {v.name: (v.lower, v.upper) for v in read_mps(MPS_DIR / "bounds_fx_fr.mps").variables}
    assert fx == {"f": (3.0, 3.0), "g": (-math.inf, math.inf), "h": (0.0, 6.0)}
    mi = {v.name: (v.lower, v.upper) for v in read_mps(MPS_DIR / "bounds_mi_pl.mps").variables}
    assert mi == {"u": (-math.inf, 0.0), "v": (2.0, math.inf)}
    li = read_mps(MPS_DIR / "bounds_li_ui.mps").variables
    assert (li[0].kind, li[0].lower, li[0].upper) == (VarKind.INTEGER, 2.0, 5.0)
    assert (li[1].kind, li[1].lower, li[1].upper) == (VarKind.BINARY, 0.0, 1.0)


def test_bv_makes_binary():
    m = read_mps(MPS_DIR / "bounds_bv.mps")
    assert [v.kind for v in m.variables] == [VarKind.BINARY] * 3 + [VarKind.CONTINUOUS]
    assert all((v.lower, v.upper) == (0.0, 1.0) for v in m.variables[:3])


def test_objsense_max_is_negated():
    m = read_mps(MPS_DIR / "objsense_max.mps")
    assert m.c.tolist() == [-3.0, -2.0, -4.0]
    # RHS on the objective row is minus the constant, then negated with the objective
    assert m.obj_offset == -1.5
    inline = read_mps(MPS_DIR / "objsense_inline.mps")
    assert inline.c.tolist() == [-1.0, -1.0]


def test_fixed_format_with_set_names():
    m = read_mps(MPS_DIR / "fixed_format.mps")
    assert m.name == "FIXEDFMT"
    assert [v.kind for v in m.variables] == [VarKind.BINARY, VarKind.BINARY, VarKind.CONTINUOUS]
    assert [c.rhs for c in m.constraints] == [1.0, 10.0]


def test_objective_only_document():
    m = read_mps(MPS_DIR / "empty_rows.mps")
    assert m.n_rows == 0
    text = write_mps(m)
    assert "ROWS\n N  OBJ\nCOLUMNS" in text


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_round_trip_corpus(path):
    m = read_mps(path)
    again = parse_mps(write_mps(m))
    assert again.same_as(m)
    assert parse_mps(write_mps(again)).same_as(again)


@given(models())
def test_round_trip_property(m):
    assert parse_mps(write_mps(m)).same_as(m)


def test_writer_conventions(tmp_path):
    vs = (Variable("b", VarKind.BINARY, 0, 1, 1.0), Variable("z", VarKind.CONTINUOUS, 0, 5, 0.0))
    m = MipModel("w", vs, (LinearConstraint(((0, 1.0), (1, 0.0)), Sense.GE, 0.5, "c"),))
    text = write_mps(m)
    assert "'MARKER' 'INTORG'" in text and "'MARKER' 'INTEND'" in text
    assert " BV BND b" in text
    assert "z c" not in text  # zero coefficient dropped
    buf = io.StringIO()
    write_mps(m, buf)
    assert buf.getvalue() == text
    save_mps(m, tmp_path / "w.mps")
    assert read_mps(tmp_path / "w.mps").constraints[0].terms == ((0, 1.0),)


def test_ten_digit_reals():
    m = MipModel("d", (Variable("x", VarKind.CONTINUOUS, 0, math.inf, 0.1234567891),))
    assert " x OBJ 0.1234567891" in write_mps(m)


BAD = {
    "missing_endata": "NAME a\nROWS\n N obj\nCOLUMNS\n x obj 1\n",
    "unknown_section": "NAME a\nROWS\n N obj\nFOO\nENDATA\n",
    "duplicate_row": "NAME a\nROWS\n N obj\n L r\n L r\nENDATA\n",
    "duplicate_column": "NAME a\nROWS\n N obj\n L r\nCOLUMNS\n x obj 1\n y obj 1\n x r 1\nENDATA\n",
    "rhs_unknown_row": "NAME a\nROWS\n N obj\nCOLUMNS\n x obj 1\nRHS\n rhs nope 1\nENDATA\n",
    "bad_bound": "NAME a\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n XX bnd x 1\nENDATA\n",
    "no_objective": "NAME a\nROWS\n L r\nCOLUMNS\n x r 1\nENDATA\n",
    "sos": "NAME a\nROWS\n N obj\nCOLUMNS\n x obj 1\nSOS\nENDATA\n",
    "bad_number": "NAME a\nROWS\n N obj\nCOLUMNS\n x obj one\nENDATA\n",
}


@pytest.mark.parametrize("key", sorted(BAD))
def test_parse_errors(key):
    with pytest.raises(MpsError):
        parse_mps(BAD[key])


def test_error_carries_line_number():
    with pytest.raises(MpsError) as err:
        parse_mps(BAD["bad_bound"])
    assert err.value.lineno == 7
    assert "line 7" in str(err.value)
