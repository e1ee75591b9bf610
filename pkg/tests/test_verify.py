import pytest

from otscuts.verify import SUITES, run_suite


@pytest.mark.parametrize("name, trials", [("hull", 3), ("lemma7", 5), ("prop8", 4),
                                          ("separation", 25), ("reduction", 200)])
def test_suites_pass_small(name, trials):
    res = run_suite(name, trials=trials, seed=1)
    assert res.ok, res.failures
    assert res.passed > 0
    assert res.line().startswith(f"PASS {name}")


def test_suites_are_deterministic():
    a = run_suite("separation", trials=30, seed=9).to_dict()
    b = run_suite("separation", trials=30, seed=9).to_dict()
    a.pop("seconds"), b.pop("seconds")
    assert a == b


def test_nonuniform_injection_skips_equalities():
    res = run_suite("prop8", trials=5, seed=2, inject_nonuniform=True)
    assert res.ok and res.skipped > 0 and res.notes


def test_integrality_negative_control_recorded():
    res = run_suite("lemma7", trials=2)
    assert any("premise violated" in n for n in res.notes)


def test_suite_registry():
    assert set(SUITES) == {"hull", "lemma7", "prop8", "separation", "reduction"}
