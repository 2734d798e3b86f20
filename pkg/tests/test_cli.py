import csv
import subprocess
import sys

import numpy as np
import pytest

from qsl import cli, scenarios
from qsl.config import EXAMPLE_CONFIGS
from qsl.errors import ConvergenceError

HEADER = "t,theta,theta_l_raw,theta_l,theta_u_raw,theta_u,std_qsl,variance_integral"


@pytest.fixture()
def docs(tmp_path):
    assert cli.main(["--seed-docs", "--out", str(tmp_path)]) == 0
    return tmp_path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) if r[k] else np.nan for r in rows]) for k in rows[0]}


def write_config(path, text):
    path.write_text(text)
    return str(path)


def test_seed_docs_writes_every_example(docs):
    assert sorted(p.name for p in docs.iterdir()) == sorted(EXAMPLE_CONFIGS)


@pytest.mark.parametrize("name", ["twisted_lz", "grover", "periodic", "periodic_optimized", "custom"])
def test_examples_run_and_write_csv_and_manifest(docs, name):
    assert cli.main(["run", str(docs / f"{name}.yaml"), "--out", str(docs)]) == 0
    lines = (docs / f"{name}.csv").read_text().splitlines()
    assert lines[0] == HEADER
    assert all(len(line.split(",")) == 8 for line in lines)
    manifest = (docs / f"{name}.manifest.txt").read_text()
    assert "[resolved]" in manifest and "n_steps" in manifest and "backend" in manifest


def test_repeated_runs_are_byte_identical(docs, tmp_path_factory):
    other = tmp_path_factory.mktemp("again")
    for out in (docs, other):
        assert cli.main(["run", str(docs / "periodic.yaml"), "--out", str(out)]) == 0
    assert (docs / "periodic.csv").read_bytes() == (other / "periodic.csv").read_bytes()
    assert (docs / "periodic.manifest.txt").read_bytes() == (other / "periodic.manifest.txt").read_bytes()


def test_grover_example_theta_stays_below_upper_bound(docs):
    assert cli.main(["run", str(docs / "grover.yaml"), "--out", str(docs)]) == 0
    d = read_csv(docs / "grover.csv")
    # equal at t = 0 by construction; constant up to trapezoid error
    assert d["theta"][0] <= d["theta_u"][0] + 1e-12
    assert np.all(d["theta"][1:] < d["theta_u"][1:])
    assert np.ptp(d["theta_u"]) < 1e-5


def test_twisted_lz_example_final_row_is_bracketed(docs):
    assert cli.main(["run", str(docs / "twisted_lz.yaml"), "--out", str(docs)]) == 0
    d = read_csv(docs / "twisted_lz.csv")
    assert d["theta_l"][-1] - 2e-6 <= d["theta"][-1] <= d["theta_u"][-1] + 2e-6


def test_periodic_lower_bound_sign(docs, tmp_path):
    # h = 0.8: negative at every t > 0; h = 0.2: a small positive excursion over the
    # first ~3 periods (see the decision ledger), negative afterwards
    base = (docs / "periodic.yaml").read_text()
    period = 2 * np.pi / 20.0
    for h, positive_until in ((0.8, 0.0), (0.2, 3.2 * period)):
        cfg = write_config(tmp_path / f"p{h}.yaml", base.replace("h_over_delta: 0.2", f"h_over_delta: {h}"))
        assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 0
        d = read_csv(tmp_path / "periodic.csv")
        later = d["t"] > positive_until
        assert np.all(d["theta_l_raw"][later] < 0)
        assert np.max(d["theta_l_raw"]) < 2e-3


def test_single_point_sweep_reproduces_run(tmp_path):
    cfg = write_config(
        tmp_path / "one.yaml",
        "scenario: twisted_lz\n"
        "model: {protocol: gaussian, delta_tau: 0.1, v_over_delta2: 2.0}\n"
        "sweep:\n  delta_tau: {max: 0.1, count: 1}\n  v_over_delta2: {max: 2.0, count: 1}\n"
        "output: {csv: one.csv}\n",
    )
    assert cli.main(["sweep", cfg, "--out", str(tmp_path)]) == 0
    sweep_lines = (tmp_path / "one.csv").read_text().splitlines()
    assert sweep_lines[0] == ",".join(scenarios.SWEEP_COLUMNS)
    assert len(sweep_lines) == 2
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 0
    run_last = dict(zip(HEADER.split(","), (tmp_path / "one.csv").read_text().splitlines()[-1].split(",")))
    row = dict(zip(scenarios.SWEEP_COLUMNS, sweep_lines[1].split(",")))
    assert row["theta_final"] == run_last["theta"]
    assert row["theta_l"] == run_last["theta_l"]
    assert row["theta_u"] == run_last["theta_u"]


def test_sweep_rows_are_row_major_and_bracketed(tmp_path):
    cfg = write_config(
        tmp_path / "box.yaml",
        "scenario: twisted_lz\nmodel: {protocol: tanh_step, delta_tau: 0.5, v_over_delta2: 2.0}\n"
        "sweep:\n  delta_tau: {max: 1.0, count: 2}\n  v_over_delta2: {max: 4.0, count: 2}\n  jobs: 2\n"
        "output: {csv: box.csv}\n",
    )
    assert cli.main(["sweep", cfg, "--out", str(tmp_path)]) == 0
    d = read_csv(tmp_path / "box.csv")
    assert d["delta_tau"] == pytest.approx([0.5, 0.5, 1.0, 1.0])
    assert d["v_over_delta2"] == pytest.approx([2.0, 4.0, 2.0, 4.0])
    assert np.all(d["theta_l"] - 2e-6 <= d["theta_final"]) and np.all(d["theta_final"] <= d["theta_u"] + 2e-6)


@pytest.mark.parametrize(
    "text",
    [
        "scenario: [unclosed\n",
        "scenario: nonsense\n",
        "scenario: periodic\nmodel: {h_over_delta: -1}\n",
        "scenario: periodic\nmodel: {h_over_delta: 0.2, colour: red}\n",
        "scenario: periodic\nmodel: {h_over_delta: 0.2}\ngrid: {n_steps: 10}\n",
        "scenario: custom\nmodel: {psi0: [1, 0], target: [1, 0], hamiltonian: [{matrix: [[0, 1], [0, 0]]}]}\n"
        "grid: {horizon: [0, 1]}\n",
    ],
)
def test_config_errors_exit_with_code_2(tmp_path, text, capsys):
    assert cli.main(["run", write_config(tmp_path / "bad.yaml", text)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err.strip()
    assert err.startswith("qsl: config error") and "\n" not in err


def test_other_usage_errors_exit_with_code_2(tmp_path, docs):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    assert cli.main(["run", str(docs / "periodic.yaml"), "--steps", "10"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", str(docs / "periodic.yaml")]) == cli.EXIT_CONFIG
    assert cli.main([]) == cli.EXIT_CONFIG


def test_convergence_failure_exits_with_code_3(docs, monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise ConvergenceError("step doubling exhausted", estimates=(0.0, 1.0))

    monkeypatch.setattr(scenarios, "run_periodic", fail)
    assert cli.main(["run", str(docs / "periodic.yaml"), "--out", str(docs)]) == cli.EXIT_CONVERGENCE
    assert "convergence failure" in capsys.readouterr().err


def test_overflow_exits_with_code_4(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "huge.yaml",
        "scenario: custom\nmodel:\n  psi0: [1, 0]\n  target: [1, 0]\n"
        "  hamiltonian: [{matrix: [[0, 1], [1, 0]]}]\n  reference: []\n"
        "grid: {horizon: [0.0, 1.0e308], n_steps: 100}\n",
    )
    assert cli.main(["run", cfg, "--out", str(tmp_path)]) == cli.EXIT_NUMERIC
    err = capsys.readouterr().err.strip()
    assert err.startswith("qsl: numeric error") and "\n" not in err


def test_help_documents_exit_codes():
    out = subprocess.run([sys.executable, "-m", "qsl.cli", "--help"], capture_output=True, text=True, check=True).stdout
    for code in ("0  success", "1  selftest", "2  configuration error", "3  convergence failure", "4  internal numeric"):
        assert code in out
    for command in ("run", "sweep", "selftest"):
        assert command in out


def test_flags_may_follow_the_subcommand(docs):
    assert cli.main(["run", str(docs / "custom.yaml"), "--out", str(docs), "--steps", "300"]) == 0
    assert len((docs / "custom.csv").read_text().splitlines()) == 301
    assert "steps_override = 300" in (docs / "custom.manifest.txt").read_text()
