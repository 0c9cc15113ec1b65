"""Command-line interface: exit codes, output formats, determinism."""

import json
from pathlib import Path

import pytest

from krepair import load_database
from krepair.cli import EXIT_BUDGET, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, run

DATA = Path(__file__).parent / "data"
STOCK = str(DATA / "stock.kdb")
PRODUCTS = str(DATA / "products.kdb")


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_eval(capsys):
    code, out = call(capsys, "eval", "--db", STOCK,
                     "--formula", "exists x y z . STOCK(x, y, z)")
    assert code == EXIT_OK
    assert "17" in out          # 4 + 6 + 7


def test_eval_free_variables(capsys):
    code, out = call(capsys, "eval", "--db", STOCK,
                     "--formula", "exists x z . STOCK(x, y, z)")
    assert code == EXIT_OK
    assert "cabbage" in out and "6" in out


def test_im(capsys):
    code, out = call(capsys, "im", "--db", STOCK,
                     "--framework", str(DATA / "measure-annotated.rf"))
    assert code == EXIT_OK and "48" in out


def test_repair_text(capsys):
    code, out = call(capsys, "repair", "--db", STOCK,
                     "--framework", str(DATA / "subset-distance.rf"))
    assert code == EXIT_OK
    assert "repair 0:" in out and "carrot" in out
    assert "distance" in out and "4" in out


def test_repair_json_round_trips(capsys):
    code, out = call(capsys, "repair", "--db", STOCK,
                     "--framework", str(DATA / "subset-order.rf"),
                     "--output-format", "json-lines")
    assert code == EXIT_OK
    records = [json.loads(line) for line in out.splitlines()]
    dbs = [load_database(r["kdb"]) for r in records if r["type"] == "repair"]
    assert len(dbs) == 2
    base = load_database(Path(STOCK).read_text())
    for db in dbs:
        assert db.support("STOCK") < base.support("STOCK")


def test_repair_deterministic(capsys):
    args = ("repair", "--db", PRODUCTS,
            "--framework", str(DATA / "warehouses.rf"), "--ann-cap", "7")
    _, first = call(capsys, *args)
    _, second = call(capsys, *args)
    assert first == second
    assert first.count("repair ") == 3


def test_exists_and_eso_agree(capsys):
    code_a, _ = call(capsys, "exists", "--db", STOCK,
                     "--framework", str(DATA / "subset-distance.rf"))
    assert code_a == EXIT_OK


def test_cqa_exit_codes(capsys):
    code, out = call(capsys, "cqa", "--db", STOCK,
                     "--framework", str(DATA / "subset-distance.rf"),
                     "--query", 'exists x . STOCK(x, "carrot", "B")')
    assert code == EXIT_OK and "consistent" in out
    code, out = call(capsys, "cqa", "--db", STOCK,
                     "--framework", str(DATA / "subset-distance.rf"),
                     "--query", 'exists x . STOCK(x, "potato", "A")',
                     "--algo", "binsearch")
    assert code == EXIT_NEGATIVE and "not-consistent" in out


def test_reduce_and_oracle(tmp_path, capsys):
    gfile = tmp_path / "g.txt"
    gfile.write_text("a b\nb c\na c\n")
    code, out = call(capsys, "reduce", "3col-exists", "--graph", str(gfile))
    assert code == EXIT_OK
    assert "semiring boolean" in out
    code, _ = call(capsys, "oracle", "3col", "--graph", str(gfile))
    assert code == EXIT_OK          # a triangle is colourable
    k4 = tmp_path / "k4.txt"
    k4.write_text("a b\na c\na d\nb c\nb d\nc d\n")
    code, _ = call(capsys, "oracle", "3col", "--graph", str(k4))
    assert code == EXIT_NEGATIVE


def test_oracle_classical(tmp_path, capsys):
    dbf = tmp_path / "d.kdb"
    dbf.write_text("semiring boolean\nattr V : string\nrel R(V, V)\n"
                   "fact R(a, a) @ 1\nfact R(a, b) @ 1\n")
    code, out = call(capsys, "oracle", "classical", "--db", str(dbf),
                     "--ic", "forall x . !R(x, x)", "--repair-kind", "subset")
    assert code == EXIT_OK
    assert "repair 0:" in out


def test_usage_errors(capsys, tmp_path):
    assert run(["repair", "--db", "/nonexistent.kdb",
                "--framework", str(DATA / "subset-order.rf")]) == EXIT_USAGE
    assert run(["eval", "--db", STOCK, "--formula", "R(x"]) == EXIT_USAGE
    assert run(["nonsense"]) == EXIT_USAGE
    capsys.readouterr()


def test_budget_exit(capsys):
    code = run(["repair", "--db", STOCK,
                "--framework", str(DATA / "subset-order.rf"),
                "--ann-cap", "7", "--max-candidates", "10"])
    assert code == EXIT_BUDGET
    capsys.readouterr()
