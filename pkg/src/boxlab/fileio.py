"""JSON and CSV formats.  Exact values are always strings, never floats.

Rationals are "num/den"; elements of Q(sqrt 2) are ["a", "b"] meaning
a + b sqrt(2).  Box entries are listed with the input tuple as the slow
index and the output tuple as the fast index; within a tuple the
interfaces come in order (Alice, Bob, Eve) and rounds in order within an
interface, each symbol numbered from 0.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .boxes import Alphabets, Box, Predicate, SymBox
from .numerics import QSqrt2, to_mpf

BOX_FORMAT = "boxlab/box-v1"
SYMBOX_FORMAT = "boxlab/symbox-v1"
REPORT_HEADER = "# boxlab-report-v1"


class FormatError(ValueError):
    pass


def dump_scalar(v):
    if isinstance(v, QSqrt2):
        return [dump_scalar(v.a), dump_scalar(v.b)]
    if isinstance(v, int):
        v = Fraction(v)
    if not isinstance(v, Fraction):
        raise FormatError(f"cannot serialize {type(v).__name__} exactly")
    return f"{v.numerator}/{v.denominator}"


def load_scalar(s):
    if isinstance(s, list):
        if len(s) != 2:
            raise FormatError(f"Q(sqrt 2) values need two parts, got {s!r}")
        return QSqrt2(load_scalar(s[0]), load_scalar(s[1]))
    if isinstance(s, str):
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as e:
            raise FormatError(f"bad rational {s!r}") from e
    if isinstance(s, int) and not isinstance(s, bool):
        return Fraction(s)
    raise FormatError(f"exact values must be strings, got {s!r}")


def decimal(v) -> str:
    """17 significant digits, for human-readable columns only."""
    if isinstance(v, float):
        return f"{v:.17g}"
    return f"{float(to_mpf(v)):.17g}"


def exact_str(v) -> str:
    if isinstance(v, QSqrt2):
        if v.b == 0:
            return dump_scalar(v.a)
        sign = "-" if v.b < 0 else "+"
        return f"{dump_scalar(v.a)}{sign}{dump_scalar(abs(v.b))}*sqrt(2)"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (int, Fraction)):
        return dump_scalar(Fraction(v))
    return str(v)


def _scalar_kind(values) -> str:
    return "qsqrt2" if any(isinstance(v, QSqrt2) for v in values) else "rational"


# --- boxes -----------------------------------------------------------------------------

def box_to_json(box: Box) -> dict:
    alph = box.alphabets
    ifaces = [{"in": i, "out": o} for i, o in zip(alph.inputs, alph.outputs)]
    if alph.eve is not None:
        ifaces.append({"in": alph.eve[0], "out": alph.eve[1]})
    entries = box.entries()
    return {"format": BOX_FORMAT, "n": box.n, "interfaces": ifaces,
            "eve": alph.eve is not None, "scalar": _scalar_kind(entries),
            "entries": [dump_scalar(v) for v in entries]}


def symbox_to_json(sym: SymBox) -> dict:
    return {"format": SYMBOX_FORMAT, "n": sym.n, "scalar": _scalar_kind(sym.p),
            "p": [dump_scalar(v) for v in sym.p]}


def box_from_json(doc: dict) -> Box | SymBox:
    fmt = doc.get("format")
    try:
        n = int(doc["n"])
        if fmt == SYMBOX_FORMAT:
            return SymBox(n, tuple(load_scalar(v) for v in doc["p"]))
        if fmt != BOX_FORMAT:
            raise FormatError(f"unknown format {fmt!r}")
        ifaces = doc["interfaces"]
        eve = bool(doc.get("eve", len(ifaces) == 3))
        parties = ifaces[:-1] if eve else ifaces
        alph = Alphabets(tuple(int(i["in"]) for i in parties),
                         tuple(int(i["out"]) for i in parties),
                         (int(ifaces[-1]["in"]), int(ifaces[-1]["out"])) if eve else None)
        entries = [load_scalar(v) for v in doc["entries"]]
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed box file: {e}") from e
    if len(entries) != alph.size(n):
        raise FormatError(f"expected {alph.size(n)} entries, got {len(entries)}")
    table = np.empty(len(entries), dtype=object)
    table[:] = entries
    return Box(n, alph, table.reshape(alph.x_shape(n) + alph.a_shape(n)))


def save_json(doc: dict, path) -> None:
    text = json.dumps(doc, indent=1) + "\n"
    if path in (None, "-"):
        print(text, end="")
    else:
        Path(path).write_text(text)


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e}") from e


def save_box(obj, path) -> None:
    save_json(symbox_to_json(obj) if isinstance(obj, SymBox) else box_to_json(obj), path)


def load_box(path) -> Box | SymBox:
    return box_from_json(load_json(path))


# --- channels, predicates, families ---------------------------------------------------------

def channels_to_json(E, F) -> dict:
    def kern(ch):
        return [[[dump_scalar(v) for v in ch.kernel[x, a]] for a in range(ch.a_count)]
                for x in range(ch.x_count)]

    doc = {"PX": [dump_scalar(v) for v in E.px], "PE_R|AX": kern(E), "PF_R|AX": kern(F)}
    if F.px != E.px:
        doc["PX_F"] = [dump_scalar(v) for v in F.px]
    return doc


def channels_from_json(doc: dict):
    from .channels import Channel

    try:
        px_e = tuple(load_scalar(v) for v in doc.get("PX_E", doc["PX"]))
        px_f = tuple(load_scalar(v) for v in doc.get("PX_F", doc["PX"]))

        def kern(rows):
            arr = np.empty((len(rows), len(rows[0]), len(rows[0][0])), dtype=object)
            for x, row in enumerate(rows):
                for a, dist in enumerate(row):
                    arr[x, a, :] = [load_scalar(v) for v in dist]
            return arr

        return Channel(px_e, kern(doc["PE_R|AX"])), Channel(px_f, kern(doc["PF_R|AX"]))
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise FormatError(f"malformed channel file: {e}") from e


def predicate_from_json(doc: dict) -> Predicate:
    try:
        return Predicate(int(doc["d"]), tuple(tuple(int(v) for v in row) for row in doc["table"]))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed predicate: {e}") from e


def mu_from_json(doc) -> tuple:
    vals = doc["mu"] if isinstance(doc, dict) else doc
    return tuple(load_scalar(v) for v in vals)


def family_from_json(doc: dict):
    """{"family": "chsh"} or {"base", "directions", "lower", "upper"}."""
    from .definetti import ConvexFamily

    if doc.get("family") == "chsh":
        return ConvexFamily.chsh()
    try:
        table = lambda t: [[load_scalar(v) for v in row] for row in t]
        return ConvexFamily(table(doc["base"]), tuple(table(t) for t in doc.get("directions", [])),
                            tuple(load_scalar(v) for v in doc.get("lower", [])),
                            tuple(load_scalar(v) for v in doc.get("upper", [])))
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed family: {e}") from e


# --- reports ----------------------------------------------------------------------------

def write_report(rows, columns, path=None) -> str:
    """CSV with a version comment line; exact columns get a decimal twin."""
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    header = []
    for c, exact in columns:
        header.append(c)
        if exact:
            header.append(c + "_decimal")
    w.writerow(header)
    for row in rows:
        out = []
        for (c, exact), v in zip(columns, row):
            if exact:
                out += [exact_str(v), decimal(v)]
            else:
                out.append(v if not isinstance(v, tuple) else " ".join(map(str, v)))
        w.writerow(out)
    text = buf.getvalue()
    if path not in (None, ""):
        Path(path).write_text(text)
    return text
