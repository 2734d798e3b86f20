"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a ``[PASS]``/``[FAIL]`` line with the measured figures. The
checks themselves live in :mod:`qsl.checks` so that ``qsl selftest`` runs the
same code.
"""

import pytest

from qsl import checks

CRITERIA = [
    pytest.param(checks.check_lz_formula, id="01_lz_formula"),
    pytest.param(checks.check_sandwich, id="02_sandwich", marks=pytest.mark.slow),
    pytest.param(checks.check_majorant, id="03_majorant", marks=pytest.mark.slow),
    pytest.param(checks.check_grover_closed_forms, id="04_grover_closed_forms", marks=pytest.mark.slow),
    pytest.param(checks.check_path_independence, id="05_path_independence", marks=pytest.mark.slow),
    pytest.param(checks.check_cd_oracle, id="06_cd_oracle"),
    pytest.param(checks.check_floquet_magnus, id="07_floquet_magnus"),
    pytest.param(checks.check_optimizer, id="08_optimizer", marks=pytest.mark.slow),
    pytest.param(checks.check_standard_qsl, id="09_standard_qsl"),
    pytest.param(checks.check_hygiene, id="10_hygiene", marks=pytest.mark.slow),
]


@pytest.mark.parametrize("check", CRITERIA)
def test_criterion(check, capsys):
    result = check(fast=False)
    with capsys.disabled():
        print("\n" + result.line())
    assert not result.skipped
    assert result.passed, result.detail
