from __future__ import annotations

import io
import json
import math
from pathlib import Path

import pytest

from boxentropy import __version__
from boxentropy.errors import OutputIOError
from boxentropy.output import (
    METADATA_PREFIX,
    build_metadata,
    format_number,
    parse_table,
    read_table,
    render_table,
    write_table,
)

COLUMNS = ["N", "a_1", "mean_bits", "note", "flag"]
ROWS = [
    {"N": 3, "a_1": 1.0, "mean_bits": 1 / 3, "note": "ok", "flag": True},
    {"N": 100, "a_1": None, "mean_bits": math.pi, "note": "a,b", "flag": False},
]


@pytest.fixture(autouse=True)
def _no_source_date(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def test_format_number():
    assert format_number(1 / 3) == "0.333333333333"
    assert format_number(12345678901234.5) == "1.23456789012e+13"
    assert format_number(7) == "7"
    assert format_number(None) == ""
    assert format_number(True) == "true"
    assert format_number("x") == "x"


def test_metadata_block():
    metadata = build_metadata("sweep", {"seed": 1}, {"failures": []})
    assert metadata == {
        "tool": "boxentropy",
        "version": __version__,
        "command": "sweep",
        "config": {"seed": 1},
        "failures": [],
    }


def test_timestamp_only_on_request(monkeypatch: pytest.MonkeyPatch):
    assert "timestamp" in build_metadata("mi", {}, timestamp=True)
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert build_metadata("mi", {})["timestamp"] == "1970-01-01T00:00:00+00:00"


def test_csv_layout():
    text = render_table(COLUMNS, ROWS, {"b": 1, "a": [1.0, math.nan]})
    lines = text.splitlines()
    assert lines[0] == METADATA_PREFIX + '{"a":[1.0,null],"b":1}'
    assert lines[1] == "N,a_1,mean_bits,note,flag"
    assert lines[2] == "3,1,0.333333333333,ok,true"
    assert lines[3] == '100,,3.14159265359,"a,b",false'


def test_csv_parse():
    table = parse_table(render_table(COLUMNS, ROWS, {"command": "sweep"}))
    assert table.metadata == {"command": "sweep"}
    assert table.columns == COLUMNS
    assert table.column("N") == [3, 100]
    assert table.column("a_1") == [1, None]
    assert table.column("note") == ["ok", "a,b"]
    assert table.column("flag") == [True, False]


def test_jsonl_layout_and_parse():
    text = render_table(COLUMNS, ROWS + [{"N": 1, "mean_bits": math.inf}], {"command": "mi"}, "jsonl")
    records = [json.loads(line) for line in text.splitlines()]
    assert records[0] == {"metadata": {"command": "mi"}}
    assert records[1]["mean_bits"] == 0.333333333333
    assert records[3]["mean_bits"] is None
    table = parse_table(text, "jsonl")
    assert table.columns == COLUMNS
    assert table.column("note") == ["ok", "a,b", None]


def test_identical_inputs_give_identical_bytes():
    first = render_table(COLUMNS, ROWS, {"z": 1, "a": {"y": 2, "x": 3}})
    second = render_table(COLUMNS, ROWS, {"a": {"x": 3, "y": 2}, "z": 1})
    assert first == second


def test_unknown_format():
    with pytest.raises(ValueError):
        render_table(COLUMNS, ROWS, {}, "xlsx")
    with pytest.raises(ValueError):
        parse_table("", "xlsx")


def test_write_targets(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    write_table(tmp_path / "out.jsonl", COLUMNS, ROWS, {"command": "sweep"}, "jsonl")
    assert read_table(tmp_path / "out.jsonl").column("N") == [3, 100]

    stream = io.StringIO()
    write_table(stream, COLUMNS, ROWS, {})
    assert stream.getvalue().startswith(METADATA_PREFIX)

    write_table(None, COLUMNS, ROWS, {})
    assert capsys.readouterr().out.splitlines()[1] == "N,a_1,mean_bits,note,flag"


def test_io_errors(tmp_path: Path):
    with pytest.raises(OutputIOError):
        write_table(tmp_path / "missing" / "out.csv", COLUMNS, ROWS, {})
    with pytest.raises(OutputIOError):
        read_table(tmp_path / "absent.csv")
