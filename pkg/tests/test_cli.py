import csv
import json
import time
from fractions import Fraction

import pytest

from boxlab.boxes import CHSH, Box, SymBox, dense_from_sym, iid_power, q_box, symbox_iid
from boxlab.channels import ALICE, counterexample_channels
from boxlab.cli import main
from boxlab.definetti import tau_chsh
from boxlab.fileio import (REPORT_HEADER, box_from_json, box_to_json, channels_from_json,
                           channels_to_json, load_box, save_box, symbox_to_json)
from boxlab.numerics import QSqrt2


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def read_report(path):
    lines = path.read_text().splitlines()
    assert lines[0] == REPORT_HEADER
    return list(csv.DictReader(lines[1:]))


# --- files --------------------------------------------------------------------------------

def test_box_file_round_trip(tmp_path):
    boxes = [iid_power(q_box(Fraction(3, 4)), 2), dense_from_sym(tau_chsh(2))]
    for i, box in enumerate(boxes):
        p = tmp_path / f"b{i}.json"
        save_box(box, p)
        back = load_box(p)
        assert back == box
        assert json.loads(p.read_text())["scalar"] == ("qsqrt2" if i else "rational")
    for sym in (tau_chsh(5), symbox_iid(Fraction(2, 7), 4)):
        p = tmp_path / "s.json"
        save_box(sym, p)
        assert load_box(p) == sym


def test_box_json_layout():
    doc = box_to_json(q_box(Fraction(3, 4)))
    assert doc["format"] == "boxlab/box-v1" and doc["n"] == 1 and not doc["eve"]
    assert doc["interfaces"] == [{"in": 2, "out": 2}, {"in": 2, "out": 2}]
    # x = y = 0, outputs fastest: (0,0) wins, (0,1) loses
    assert doc["entries"][:4] == ["3/8", "1/8", "1/8", "3/8"]
    assert symbox_to_json(tau_chsh(1))["p"] == [["1/2", "0/1"], ["1/2", "0/1"]]


def test_rejects_floats_and_bad_sizes():
    from boxlab.fileio import FormatError
    doc = box_to_json(q_box(Fraction(1, 2)))
    doc["entries"][0] = 0.125
    with pytest.raises(FormatError):
        box_from_json(doc)
    doc = box_to_json(q_box(Fraction(1, 2)))
    doc["entries"].pop()
    with pytest.raises(FormatError):
        box_from_json(doc)


def test_channel_round_trip():
    cx = counterexample_channels(3, 2)
    E, F = channels_from_json(json.loads(json.dumps(channels_to_json(cx.E, cx.F))))
    assert E.px == cx.E.px and (E.kernel == cx.E.kernel).all() and (F.kernel == cx.F.kernel).all()


# --- commands ---------------------------------------------------------------------------

def test_tau_command(tmp_path, capsys):
    code, out, _ = run(capsys, "tau", "--n", 1)
    assert code == 0 and json.loads(out)["p"] == [["1/2", "0/1"], ["1/2", "0/1"]]
    p = tmp_path / "t.json"
    assert run(capsys, "tau", "--n", 1, "--dense", "-o", p)[0] == 0
    assert all(v == Fraction(1, 4) for v in load_box(p).entries())
    assert run(capsys, "tau", "--n", 0)[0] == 2
    start = time.perf_counter()
    assert run(capsys, "tau", "--n", 16, "-o", tmp_path / "t16.json")[0] == 0
    assert time.perf_counter() - start < 5


def test_certification_commands(tmp_path, capsys):
    tau = tmp_path / "tau.json"
    save_box(tau_chsh(6), tau)
    report = tmp_path / "r.csv"
    assert run(capsys, "cert1", "-i", tau, "--report", report)[0] == 0
    rows = read_report(report)
    assert [r["k"] for r in rows] == [str(k) for k in range(7)]
    assert set(rows[0]) == {"k", "lhs", "lhs_decimal", "rhs", "rhs_decimal", "slack", "slack_decimal"}
    assert all(float(Fraction(r["lhs"])) == float(r["lhs_decimal"]) for r in rows)
    pr = tmp_path / "pr.json"
    save_box(SymBox(4, (0, 0, 0, 0, 1)), pr)
    assert run(capsys, "cert1", "-i", pr)[0] == 2
    assert run(capsys, "threshold", "-i", pr)[0] == 1
    q = tmp_path / "q.json"
    save_box(symbox_iid(Fraction(3, 4), 12), q)
    assert run(capsys, "cert2", "-i", q, "--k", 2)[0] == 0
    assert run(capsys, "dfcheck", "-i", q, "--k", 3, "--report", report)[0] == 0
    row = read_report(report)[0]
    assert row["rhs"] == "1/1" and float(row["lhs_decimal"]) == float(Fraction(row["lhs"]))
    assert run(capsys, "threshold", "-i", q)[0] == 0
    assert run(capsys, "cert1", "-i", tmp_path / "missing.json")[0] == 2


def test_dense_input_accepted(tmp_path, capsys):
    p = tmp_path / "d.json"
    save_box(iid_power(q_box(Fraction(3, 4)), 2), p)
    assert run(capsys, "cert1", "-i", p)[0] == 0


def test_diamond_command(tmp_path, capsys):
    cx = counterexample_channels(3, 2)
    ch = write_json(tmp_path / "ch.json", channels_to_json(cx.E, cx.F))
    code, out, _ = run(capsys, "diamond", "--channels", ch, "--polytope", "roundns", "--n", 3)
    assert code == 0 and json.loads(out)["value"] == "0/1"
    wit = tmp_path / "w.json"
    code, out, _ = run(capsys, "diamond", "--channels", ch, "--polytope", "ns", "--n", 3,
                       "--witness", wit)
    assert code == 0 and Fraction(json.loads(out)["value"]) > 0
    assert load_box(wit).alphabets == ALICE.with_eve(1, 2)
    same = write_json(tmp_path / "same.json", channels_to_json(cx.E, cx.E))
    code, out, _ = run(capsys, "diamond", "--channels", same, "--polytope", "ns", "--n", 3)
    assert json.loads(out)["value"] == "0/1"
    assert run(capsys, "diamond", "--channels", ch, "--polytope", "ns", "--n", 2)[0] == 2
    assert run(capsys, "diamond", "--channels", ch, "--polytope", "cube", "--n", 3)[0] == 2


def test_diamond_extension_polytope(tmp_path, capsys):
    from boxlab.channels import random_channel_pair
    import random
    E, F = random_channel_pair(4, 4, 2, random.Random(0))
    ch = write_json(tmp_path / "ch.json", channels_to_json(E, F))
    tau = tmp_path / "tau.json"
    save_box(tau_chsh(1), tau)
    code, out, _ = run(capsys, "diamond", "--channels", ch, "--polytope", f"ext:{tau}", "--n", 1)
    from boxlab.fileio import load_scalar
    value = load_scalar(json.loads(out)["value"])
    assert code == 0 and isinstance(value, QSqrt2) and value > 0


def test_counterexample_command(tmp_path, capsys):
    code, out, _ = run(capsys, "counterexample", "--n", 3, "--m", 2)
    doc = json.loads(out)
    assert code == 0 and doc["roundns_value"] == "0/1" and Fraction(doc["q_value"]) > 0
    assert Fraction(doc["twirled_value"]) > 0 and "delta" not in doc
    assert run(capsys, "counterexample", "--n", 2, "--m", 2)[0] == 2
    saved = tmp_path / "cx.json"
    code, out, _ = run(capsys, "counterexample", "--n", 4, "--m", 3, "--full", "--save-channels", saved)
    doc = json.loads(out)
    assert code == 0 and len(doc["delta"]) == 2 and len(doc["delta"][0]) == 4
    assert channels_from_json(json.loads(saved.read_text()))[0].x_count == 16


def test_general_command(tmp_path, capsys):
    fam = write_json(tmp_path / "fam.json", {"family": "chsh"})
    pred = write_json(tmp_path / "pred.json", {"d": 2, "table": [[1, 2, 2, 1]] * 3 + [[2, 1, 1, 2]]})
    mu = write_json(tmp_path / "mu.json", ["1/4"] * 4)
    box = tmp_path / "q.json"
    save_box(symbox_iid(Fraction(3, 4), 5), box)
    report = tmp_path / "g.csv"
    code, out, _ = run(capsys, "general", "--family", fam, "--pred", pred, "--mu", mu, "-i", box,
                       "--grid", 16, "--report", report)
    assert code == 0 and "prefactor 36" in out
    assert len(read_report(report)) == 6

    single = write_json(tmp_path / "single.json", {"base": [["3/4", "1/4"], ["1/4", "3/4"]]})
    p2 = write_json(tmp_path / "p2.json", {"d": 2, "table": [[1, 2], [2, 1]]})
    mu2 = write_json(tmp_path / "mu2.json", ["1/2", "1/2"])
    import numpy as np
    one = Box(1, ALICE, np.array([[Fraction(3, 4), Fraction(1, 4)], [Fraction(1, 4), Fraction(3, 4)]],
                                 dtype=object))
    iid = tmp_path / "iid.json"
    save_box(iid_power(one, 4), iid)
    assert run(capsys, "general", "--family", single, "--pred", p2, "--mu", mu2, "-i", iid, "--C", 1)[0] == 0

    bad = write_json(tmp_path / "bad.json", {"d": 2, "table": [[1, 3], [2, 1]]})
    assert run(capsys, "general", "--family", single, "--pred", bad, "--mu", mu2, "-i", iid)[0] == 2
    assert run(capsys, "general", "--family", single, "--pred", p2, "--mu", mu2, "-i", iid,
               "--C", "x")[0] == 2


def test_corpus_command(capsys):
    code, out, _ = run(capsys, "corpus", "--count", 20, "--n-max", 6, "--seed", 3)
    assert code == 0 and "0 violations" in out


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--help")[0] == 0
