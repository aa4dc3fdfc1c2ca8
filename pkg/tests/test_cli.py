import json

import numpy as np
import pytest

from rabistark.cli import main
from rabistark.runner import write_series_csv


def test_oracle_command(capsys, tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle", "--delta", "0.5", "--g", "0.3", "--levels", "3", "--json", str(out)]) == 0
    text = capsys.readouterr().out
    assert "-0.44805677885322" in text
    data = json.loads(out.read_text())
    assert len(data["levels"]) == 3


def test_fit_command(capsys, tmp_path):
    x = np.logspace(-3, -1, 7)
    path = tmp_path / "cubic.csv"
    write_series_csv(path, [(a, 2 * a ** 3, 64, True, float("nan")) for a in x],
                     {"size_label": 1.0, "size_kind": "effective_L"})
    assert main(["fit", "--input", str(path)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["exponent"] == pytest.approx(3.0, abs=1e-12)


def test_sweep_then_fit(capsys, tmp_path):
    out = tmp_path / "run"
    rc = main(["sweep", "fig2a", "--output-dir", str(out), "--set", "n_tr=512",
               "--set", "observables=[\"order_parameter\"]", "--cache-dir", str(tmp_path / "c")])
    assert rc == 0
    capsys.readouterr()
    assert main(["fit", "--input", str(out / "order_parameter.csv"), "--window", "1e-2:0.1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert 0.8 < data["exponent"] < 1.2


@pytest.mark.parametrize("argv", [
    ["fit"],
    ["fit", "--input", "x.csv", "--window", "3"],
    ["collapse", "--inputs", "a.csv", "--ansatz", "nope", "--nu", "1"],
    ["nosuchcommand"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_bad_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"kind": "RSM", "delta": 0.5}, "unknown_key": 1}')
    assert main(["sweep", str(bad)]) == 2
    assert "unknown" in capsys.readouterr().err


def test_numerical_error_exit_1(tmp_path, capsys):
    path = tmp_path / "short.csv"
    write_series_csv(path, [(1.0, 1.0, 8, True, float("nan"))], {"size_label": 1.0})
    assert main(["fit", "--input", str(path)]) == 1
    assert "FitError" in capsys.readouterr().err
