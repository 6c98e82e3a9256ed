"""Terminal summary for the release gate in test_acceptance.py."""

import pytest

ACCEPTANCE_LABELS = {
    "test_gradients_match_finite_differences": "gradient suite",
    "test_mixed_op_softmax_and_discretization_contract": "mixed-op and discretization",
    "test_forward_equations_match_brute_force_oracles": "forward-equation oracles",
    "test_partial_modality_contract": "partial-modality contract",
    "test_planted_search_recovers_rule_and_operator": "planted-search behavior",
    "test_partial_robustness_beats_concat_baseline": "partial-robustness trend",
    "test_ablation_shapes_and_auxiliary_knockout": "ablation shapes",
    "test_cli_replay_is_byte_identical": "replay determinism",
}

_verdicts: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = item.name.split("[")[0]
    if "test_acceptance.py" not in item.nodeid or name not in ACCEPTANCE_LABELS:
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
