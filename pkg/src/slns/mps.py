"""Free/fixed MPS reading and free-format MPS writing.

Supported sections: NAME, OBJSENSE, ROWS, COLUMNS (with MARKER INTORG/INTEND),
RHS, RANGES, BOUNDS, ENDATA. Ranged rows are expanded into two one-sided
rows at parse time, so a written file never contains RANGES.
"""
from __future__ import annotations

import io
import logging
import math
from pathlib import Path
from typing import TextIO, Union

from .model import LinearConstraint, MipModel, Sense, Variable, VarKind

log = logging.getLogger(__name__)

BOUND_CODES = {"UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"}


class MpsError(ValueError):
    def __init__(self, msg: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


def _num(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"bad number {tok!r}", lineno) from None


def parse_mps(source: Union[str, TextIO]) -> MipModel:
    """Parse MPS text (a string or an open text stream) into a minimisation model."""
    text = source.read() if hasattr(source, "read") else source
    name = ""
    maximize = False
    section = None
    obj_row = None
    row_sense: dict[str, Sense] = {}
    row_order: list[str] = []
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    obj_const = 0.0

    col_order: list[str] = []
    col_entries: dict[str, dict[str, float]] = {}
    col_obj: dict[str, float] = {}
    col_int: dict[str, bool] = {}
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    bv: set[str] = set()
    closed_cols: set[str] = set()
    in_int = False
    last_col = None
    seen_end = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        if seen_end:
            raise MpsError("content after ENDATA", lineno)
        if not line[0].isspace():
            toks = line.split()
            head = toks[0].upper()
            if head == "NAME":
                section = "NAME"
                name = " ".join(toks[1:])
                continue
            if head == "OBJSENSE":
                section = "OBJSENSE"
                if len(toks) > 1:
                    maximize = toks[1].upper() in ("MAX", "MAXIMIZE")
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = head
                continue
            if head == "ENDATA":
                seen_end = True
                continue
            if head in ("SOS", "QUADOBJ", "QMATRIX", "QSECTION", "QCMATRIX", "INDICATORS"):
                raise MpsError(f"unsupported section {head}", lineno)
            raise MpsError(f"unknown section {toks[0]!r}", lineno)

        toks = line.split()
        if section == "OBJSENSE":
            maximize = toks[0].upper() in ("MAX", "MAXIMIZE")
        elif section == "ROWS":
            if len(toks) != 2:
                raise MpsError("ROWS entry needs a type and a name", lineno)
            kind, rname = toks[0].upper(), toks[1]
            if rname in row_sense or rname == obj_row:
                raise MpsError(f"duplicate row {rname!r}", lineno)
            if kind == "N":
                if obj_row is not None:
                    # Extra free rows carry no constraint; keep the first as objective.
                    log.warning("ignoring additional free row %s", rname)
                    row_sense[rname] = None  # type: ignore[assignment]
                    continue
                obj_row = rname
            elif kind in ("L", "G", "E"):
                row_sense[rname] = Sense(kind)
                row_order.append(rname)
            else:
                raise MpsError(f"unknown row type {kind!r}", lineno)
        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1].strip("'\"").upper() == "MARKER":
                marker = toks[2].strip("'\"").upper()
                if marker == "INTORG":
                    in_int = True
                elif marker == "INTEND":
                    in_int = False
                else:
                    raise MpsError(f"unknown marker {marker!r}", lineno)
                continue
            if len(toks) not in (3, 5):
                raise MpsError("COLUMNS entry must have 3 or 5 fields", lineno)
            cname = toks[0]
            if cname not in col_entries:
                if cname in closed_cols:
                    raise MpsError(f"duplicate column {cname!r}", lineno)
                if last_col is not None:
                    closed_cols.add(last_col)
                col_order.append(cname)
                col_entries[cname] = {}
                col_obj[cname] = 0.0
                col_int[cname] = in_int
            elif cname != last_col:
                raise MpsError(f"duplicate column {cname!r}", lineno)
            elif col_int[cname] != in_int:
                raise MpsError(f"column {cname!r} changes integrality marker state", lineno)
            last_col = cname
            for rname, val in zip(toks[1::2], toks[2::2]):
                v = _num(val, lineno)
                if rname == obj_row:
                    col_obj[cname] += v
                elif rname in row_sense:
                    if row_sense[rname] is None:
                        continue
                    if rname in col_entries[cname]:
                        raise MpsError(f"duplicate entry for row {rname!r} in column {cname!r}", lineno)
                    col_entries[cname][rname] = v
                else:
                    raise MpsError(f"unknown row {rname!r}", lineno)
        elif section in ("RHS", "RANGES"):
            if len(toks) % 2 == 1:
                toks = toks[1:]  # leading set name
            if len(toks) not in (2, 4):
                raise MpsError(f"{section} entry must have 1 or 2 (row, value) pairs", lineno)
            for rname, val in zip(toks[0::2], toks[1::2]):
                v = _num(val, lineno)
                if section == "RHS":
                    if rname == obj_row:
                        obj_const = -v
                    elif rname in row_sense:
                        if row_sense[rname] is not None:
                            rhs[rname] = v
                    else:
                        raise MpsError(f"RHS for unknown row {rname!r}", lineno)
                else:
                    if rname not in row_sense or row_sense[rname] is None:
                        raise MpsError(f"RANGES for unknown row {rname!r}", lineno)
                    ranges[rname] = v
        elif section == "BOUNDS":
            code = toks[0].upper()
            if code not in BOUND_CODES:
                raise MpsError(f"malformed bound code {toks[0]!r}", lineno)
            needs_value = code not in ("FR", "MI", "PL", "BV")
            if needs_value:
                if len(toks) == 4:
                    cname, val = toks[2], _num(toks[3], lineno)
                elif len(toks) == 3:
                    cname, val = toks[1], _num(toks[2], lineno)
                else:
                    raise MpsError(f"bound {code} needs a column and a value", lineno)
            else:
                if len(toks) >= 3:
                    cname = toks[2]
                elif len(toks) == 2:
                    cname = toks[1]
                else:
                    raise MpsError(f"bound {code} needs a column", lineno)
                val = None
            if cname not in col_entries:
                raise MpsError(f"bound for unknown column {cname!r}", lineno)
            if code == "UP" or code == "UI":
                if val < 0 and lower.get(cname, 0.0) == 0.0:
                    log.warning("negative upper bound on %s with zero lower bound: lower set to -inf", cname)
                    lower[cname] = -math.inf
                upper[cname] = val
                if code == "UI":
                    col_int[cname] = True
            elif code in ("LO", "LI"):
                lower[cname] = val
                if code == "LI":
                    col_int[cname] = True
            elif code == "FX":
                lower[cname] = upper[cname] = val
            elif code == "FR":
                lower[cname], upper[cname] = -math.inf, math.inf
            elif code == "MI":
                lower[cname] = -math.inf
            elif code == "PL":
                upper[cname] = math.inf
            elif code == "BV":
                lower[cname], upper[cname] = 0.0, 1.0
                col_int[cname] = True
                bv.add(cname)
        elif section == "NAME":
            name = name or toks[0]
        else:
            raise MpsError("data line outside of any section", lineno)

    if not seen_end:
        raise MpsError("missing ENDATA")
    if obj_row is None:
        raise MpsError("no objective (N) row")

    sign = -1.0 if maximize else 1.0
    variables = []
    for cname in col_order:
        lo = lower.get(cname, 0.0)
        hi = upper.get(cname, math.inf)
        if col_int[cname]:
            is_bin = (lo == 0.0 and hi == 1.0) or (cname in bv and 0.0 <= lo <= hi <= 1.0)
            kind = VarKind.BINARY if is_bin else VarKind.INTEGER
        else:
            kind = VarKind.CONTINUOUS
        obj = sign * col_obj[cname]
        variables.append(Variable(cname, kind, lo, hi, obj + 0.0))

    col_index = {c: j for j, c in enumerate(col_order)}
    row_terms: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for cname in col_order:
        j = col_index[cname]
        for rname, v in col_entries[cname].items():
            if v != 0.0:
                row_terms[rname].append((j, v))

    taken = set(row_order)
    constraints = []
    for rname in row_order:
        sense = row_sense[rname]
        b = rhs.get(rname, 0.0)
        terms = tuple(row_terms[rname])
        if rname not in ranges:
            constraints.append(LinearConstraint(terms, sense, b, rname))
            continue
        rng = ranges[rname]
        if sense is Sense.LE:
            lo_b, hi_b = b - abs(rng), b
        elif sense is Sense.GE:
            lo_b, hi_b = b, b + abs(rng)
        else:
            lo_b, hi_b = (b, b + rng) if rng >= 0 else (b + rng, b)
        other = rname + "_range"
        k = 1
        while other in taken:
            other = f"{rname}_range{k}"
            k += 1
        taken.add(other)
        if sense is Sense.GE:
            constraints.append(LinearConstraint(terms, Sense.GE, lo_b, rname))
            constraints.append(LinearConstraint(terms, Sense.LE, hi_b, other))
        else:
            constraints.append(LinearConstraint(terms, Sense.LE, hi_b, rname))
            constraints.append(LinearConstraint(terms, Sense.GE, lo_b, other))

    return MipModel(name, tuple(variables), tuple(constraints), sign * obj_const + 0.0)


def read_mps(path: Union[str, Path]) -> MipModel:
    with open(path) as fh:
        return parse_mps(fh)


def _fmt(x: float) -> str:
    s = f"{x:.10g}"
    # Fall back to the shortest exact repr when ten digits would lose information.
    return s if float(s) == x else repr(float(x))


def write_mps(model: MipModel, stream: TextIO | None = None) -> str:
    """Write ``model`` as free-format MPS; returns the text (also written to ``stream``)."""
    out = io.StringIO()
    w = out.write
    w(f"NAME {model.name}\n" if model.name else "NAME\n")
    obj_name = "OBJ"
    row_names = {c.name for c in model.constraints}
    k = 1
    while obj_name in row_names:
        obj_name = f"OBJ{k}"
        k += 1
    names = []
    for idx, con in enumerate(model.constraints):
        names.append(con.name or f"R{idx}")
    if len(set(names)) != len(names):
        names = [f"R{idx}" for idx in range(len(names))]

    w("ROWS\n")
    w(f" N  {obj_name}\n")
    for nm, con in zip(names, model.constraints):
        w(f" {con.sense.value}  {nm}\n")

    by_col: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for nm, con in zip(names, model.constraints):
        for j, a in con.terms:
            if a != 0.0:
                by_col[j].append((nm, a))

    w("COLUMNS\n")
    in_int = False
    marker = 0
    for j, var in enumerate(model.variables):
        is_int = var.kind is not VarKind.CONTINUOUS
        if is_int and not in_int:
            w(f"    MARKER{marker} 'MARKER' 'INTORG'\n")
            in_int = True
        elif not is_int and in_int:
            w(f"    MARKER{marker} 'MARKER' 'INTEND'\n")
            marker += 1
            in_int = False
        entries = by_col[j]
        if var.obj_coeff != 0.0:
            entries = [(obj_name, var.obj_coeff)] + entries
        if not entries:
            # Every column must appear at least once.
            entries = [(obj_name, 0.0)]
        for rname, a in entries:
            w(f"    {var.name} {rname} {_fmt(a)}\n")
    if in_int:
        w(f"    MARKER{marker} 'MARKER' 'INTEND'\n")

    w("RHS\n")
    if model.obj_offset != 0.0:
        w(f"    RHS {obj_name} {_fmt(-model.obj_offset)}\n")
    for nm, con in zip(names, model.constraints):
        if con.rhs != 0.0:
            w(f"    RHS {nm} {_fmt(con.rhs)}\n")

    w("BOUNDS\n")
    for var in model.variables:
        lo, hi, n = var.lower, var.upper, var.name
        if var.kind is VarKind.BINARY:
            w(f" BV BND {n}\n")
            if (lo, hi) == (0.0, 1.0):
                continue
        if lo == hi:
            w(f" FX BND {n} {_fmt(lo)}\n")
            continue
        if lo == -math.inf and hi == math.inf:
            w(f" FR BND {n}\n")
            continue
        if lo == -math.inf:
            w(f" MI BND {n}\n")
        elif lo != 0.0 or var.kind is VarKind.BINARY:
            w(f" LO BND {n} {_fmt(lo)}\n")
        if hi != math.inf:
            w(f" UP BND {n} {_fmt(hi)}\n")
    w("ENDATA\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def save_mps(model: MipModel, path: Union[str, Path]) -> None:
    Path(path).write_text(write_mps(model))
