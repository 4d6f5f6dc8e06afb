"""Diagnostic records: ordering, text and JSON serializations."""
from __future__ import annotations

import json

import pytest

from scuba_mini.report import (
    ALL_KINDS,
    BUG_KINDS,
    Diagnostic,
    render_json_lines,
    render_text_lines,
    sort_diagnostics,
)
from scuba_mini.source import SourceLocation


def diag(kind="oob-upper", file="a.mcu", line=3, col=5, target="buf",
         space="global", message="m", witness=None):
    return Diagnostic(kind, SourceLocation(file, line, col), target, space,
                      message, witness)


def test_kind_vocabulary_is_closed():
    assert set(BUG_KINDS) <= set(ALL_KINDS)
    assert "unverifiable" in ALL_KINDS and "unverifiable" not in BUG_KINDS
    assert "suspicious-partition-layout" not in BUG_KINDS


def test_json_object_has_exactly_the_documented_keys_in_order():
    d = diag(witness={"n": 3, "a": 1})
    obj = json.loads(d.to_json_line())
    assert list(obj) == [
        "kind", "file", "line", "column", "target", "space", "witness",
        "message",
    ]
    # witness keys are emitted sorted for determinism
    assert list(obj["witness"]) == ["a", "n"]


def test_witness_null_versus_empty_object():
    assert json.loads(diag().to_json_line())["witness"] is None
    assert json.loads(diag(witness={}).to_json_line())["witness"] == {}


def test_text_line_format():
    d = diag(message="offset 4 exceeds extent 3 of 'buf' (global)")
    assert d.to_text_line() == (
        "a.mcu:3:5: oob-upper: offset 4 exceeds extent 3 of 'buf' (global)"
    )


def test_sorting_is_by_file_line_column_kind():
    diags = [
        diag(file="b.mcu", line=1, col=1, kind="uaf"),
        diag(file="a.mcu", line=2, col=9, kind="oob-upper"),
        diag(file="a.mcu", line=2, col=1, kind="uaf"),
        diag(file="a.mcu", line=2, col=1, kind="oob-underflow"),
    ]
    ordered = sort_diagnostics(diags)
    assert [(d.location.file, d.location.line, d.location.column, d.kind)
            for d in ordered] == [
        ("a.mcu", 2, 1, "oob-underflow"),
        ("a.mcu", 2, 1, "uaf"),
        ("a.mcu", 2, 9, "oob-upper"),
        ("b.mcu", 1, 1, "uaf"),
    ]


def test_render_is_byte_deterministic():
    diags = [diag(line=9), diag(line=2, witness={"x": 0})]
    assert render_json_lines(diags) == render_json_lines(list(diags))
    assert render_text_lines(diags) == render_text_lines(list(diags))
    # renderers sort; input order must not matter
    assert render_json_lines(diags) == render_json_lines(diags[::-1])


def test_json_round_trip_preserves_every_field():
    original = diag(kind="intra-allocation-oob",
                    space="shared-dynamic-partition",
                    witness={"sections": 2})
    restored = Diagnostic.from_json_line(original.to_json_line())
    assert restored == original


def test_from_dict_rejects_missing_keys():
    incomplete = json.loads(diag().to_json_line())
    del incomplete["space"]
    with pytest.raises(ValueError, match="missing keys.*space"):
        Diagnostic.from_dict(incomplete)
