"""Diagnostic records and their two serializations.

Text form (stderr): ``file:line:col: kind: message`` -- one line each.
JSON form (stdout): one object per line with exactly the keys
``kind, file, line, column, target, space, witness, message``; ``witness``
is an object only when the finding came with a satisfying model (it may be
empty), otherwise ``null``.  Output order is always (file, line, column,
kind), and rendering is byte-deterministic for a fixed input and
configuration, so the JSON stream round-trips and diffs cleanly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .source import SourceLocation

# Diagnostic kinds.
OOB_UPPER = "oob-upper"
OOB_UNDERFLOW = "oob-underflow"
INTRA_OOB = "intra-allocation-oob"
UAF = "uaf"
DOUBLE_FREE = "double-free"
UNVERIFIABLE = "unverifiable"
SUSPICIOUS_LAYOUT = "suspicious-partition-layout"

ALL_KINDS = (
    OOB_UPPER,
    OOB_UNDERFLOW,
    INTRA_OOB,
    UAF,
    DOUBLE_FREE,
    UNVERIFIABLE,
    SUSPICIOUS_LAYOUT,
)

# Kinds that are definite bugs (drive the process exit code).
BUG_KINDS = (OOB_UPPER, OOB_UNDERFLOW, INTRA_OOB, UAF, DOUBLE_FREE)

_JSON_KEYS = (
    "kind",
    "file",
    "line",
    "column",
    "target",
    "space",
    "witness",
    "message",
)


@dataclass
class Diagnostic:
    kind: str
    location: SourceLocation
    target: str
    space: Optional[str]
    message: str
    witness: Optional[dict[str, int]] = None

    @property
    def sort_key(self):
        return (
            self.location.file,
            self.location.line,
            self.location.column,
            self.kind,
        )

    def to_dict(self) -> dict:
        witness = None
        if self.witness is not None:
            witness = {k: self.witness[k] for k in sorted(self.witness)}
        return {
            "kind": self.kind,
            "file": self.location.file,
            "line": self.location.line,
            "column": self.location.column,
            "target": self.target,
            "space": self.space,
            "witness": witness,
            "message": self.message,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def to_text_line(self) -> str:
        loc = self.location
        return f"{loc.file}:{loc.line}:{loc.column}: {self.kind}: {self.message}"

    @classmethod
    def from_dict(cls, data: dict) -> "Diagnostic":
        missing = [k for k in _JSON_KEYS if k not in data]
        if missing:
            raise ValueError(f"diagnostic object missing keys: {missing}")
        return cls(
            kind=data["kind"],
            location=SourceLocation(data["file"], data["line"], data["column"]),
            target=data["target"],
            space=data["space"],
            message=data["message"],
            witness=data["witness"],
        )

    @classmethod
    def from_json_line(cls, line: str) -> "Diagnostic":
        return cls.from_dict(json.loads(line))


def sort_diagnostics(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=lambda d: d.sort_key)


def render_json_lines(diags: list[Diagnostic]) -> str:
    return "".join(d.to_json_line() + "\n" for d in sort_diagnostics(diags))


def render_text_lines(diags: list[Diagnostic]) -> str:
    return "".join(d.to_text_line() + "\n" for d in sort_diagnostics(diags))
