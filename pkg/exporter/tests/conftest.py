"""Shared corpus fixture plus the round-trip acceptance summary line."""

import json

import pytest

from corpus_helpers import TEXTS, make_image

ACCEPTANCE_LABELS = {
    "test_toy_corpus_round_trips_through_engine_reader": "exporter round-trip",
}

_verdicts: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = item.name.split("[")[0]
    if "test_export.py" not in item.nodeid or name not in ACCEPTANCE_LABELS:
        return
    if rep.failed or rep.skipped:
        _verdicts[name] = "FAIL"
    elif rep.when == "call" and rep.passed:
        _verdicts.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.write_line("")
    for name, label in ACCEPTANCE_LABELS.items():
        if name in _verdicts:
            terminalreporter.write_line(f"ACCEPTANCE: {label}: {_verdicts[name]}")


@pytest.fixture
def toy_corpus(tmp_path):
    """Write a 20-record corpus: 7 with both modalities, 7 text-only,
    6 image-only. Returns (jsonl path, records as dicts)."""
    records = []
    for i in range(20):
        rid = f"rec{i:02d}"
        kind = ("both", "text", "image")[i % 3] if i < 18 else ("both", "text")[i - 18]
        text = TEXTS[i % len(TEXTS)] if kind in ("both", "text") else None
        image = None
        if kind in ("both", "image"):
            image = str(tmp_path / f"{rid}.png")
            make_image(image, seed=100 + i)
        records.append({"id": rid, "text": text, "image": image, "label": i % 2})
    path = tmp_path / "records.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return str(path), records
