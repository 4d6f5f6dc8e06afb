"""Shared test plumbing: corpus discovery and small program helpers."""
from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
CORPUS = REPO_ROOT / "corpus"


def corpus_paths() -> list[Path]:
    paths = sorted(CORPUS.glob("*/*.mcu"))
    assert paths, f"no corpus programs under {CORPUS}"
    return paths


def corpus_path(relative: str) -> Path:
    path = CORPUS / relative
    assert path.is_file(), f"missing corpus program {path}"
    return path


@pytest.fixture(scope="session")
def corpus_sources() -> dict[str, str]:
    """Map of corpus-relative names to source text, read once per run."""
    return {
        f"{p.parent.name}/{p.name}": p.read_text() for p in corpus_paths()
    }


# Criterion number -> (passed, one-line detail), filled by test_acceptance.
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion after the run."""
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number} {verdict} - {detail}")
