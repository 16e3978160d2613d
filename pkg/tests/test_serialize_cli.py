import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uml.cli import main
from uml.fourier import theta_table
from uml.generators import random_measure
from uml.measures import haar
from uml.padic import PrimePair
from uml.serialize import (
    FormatError, dump_measure, dump_table, frac_str, load_measure, load_table, parse_frac,
)

PP = PrimePair(2, 3)


@given(st.fractions())
def test_frac_round_trip(x):
    assert parse_frac(frac_str(x)) == x


@pytest.mark.parametrize("text", ["1/0", "abc", "", "1.5.2"])
def test_parse_frac_rejects_garbage(text):
    with pytest.raises((FormatError, ValueError)):
        parse_frac(text)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_measure_round_trip_and_determinism(seed, dim):
    mu = random_measure(random.Random(seed), PP, dim, 3)
    text = dump_measure(mu)
    assert load_measure(text) == mu
    assert dump_measure(load_measure(text)) == text


def test_table_round_trip():
    mu = random_measure(random.Random(2), PP, 2, 2)
    t = theta_table(mu, 2)
    back = load_table(dump_table(t))
    assert back.samples == t.samples and back.level == 2


def test_load_rejects_bad_mass_and_format():
    obj = json.loads(dump_measure(haar(PP)))
    obj["mass"] = "2/1"
    with pytest.raises(FormatError):
        load_measure(json.dumps(obj))
    obj["format"] = "other/1"
    with pytest.raises(FormatError):
        load_measure(json.dumps(obj))


# -- command line ---------------------------------------------------------------


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_haar(capsys):
    code, out, _ = run(capsys, "haar")
    assert code == 0 and json.loads(out)["mass"] == "1/1"


def test_cli_theta_examples(tmp_path, capsys):
    path = tmp_path / "h.json"
    assert run(capsys, "haar", "--out", str(path))[0] == 0
    assert run(capsys, "theta", "--measure", str(path), "--z", "1/2")[1].split()[0] == "0/1"
    assert run(capsys, "theta", "--measure", str(path), "--z", "3")[1].split()[0] == "1/1"


def test_cli_theta_invert_round_trip(tmp_path, capsys):
    mu = random_measure(random.Random(5), PP, 1, 2)
    m, t, back = tmp_path / "m.json", tmp_path / "t.json", tmp_path / "b.json"
    m.write_text(dump_measure(mu))
    assert run(capsys, "theta", "--measure", str(m), "--grid", "2", "--out", str(t))[0] == 0
    assert run(capsys, "invert", "--table", str(t), "--out", str(back))[0] == 0
    assert load_measure(back.read_text()) == mu


def test_cli_shellmeasure(capsys):
    code, out, _ = run(capsys, "shellmeasure", "--n", "1", "--jmin", "-2")
    obj = json.loads(out)
    dens = {tuple(c["center"]): c["density"] for c in obj["cells"]}
    assert dens[("1/1",)] == "-3/2"
    code, out, _ = run(capsys, "shellmeasure", "--n", "1", "--jmin", "-2", "--normalized")
    assert code == 0


def test_cli_rho(capsys):
    code, out, _ = run(capsys, "rho", "--levels", "1", "--a", "1", "--x", "1")
    assert code == 0 and out.startswith("-2/9") and "3^2" in out


def test_cli_convolve_and_product(tmp_path, capsys):
    h = tmp_path / "h.json"
    h.write_text(dump_measure(haar(PP)))
    code, out, _ = run(capsys, "convolve", str(h), str(h))
    assert code == 0 and load_measure(out) == haar(PP)
    code, out, _ = run(capsys, "product", str(h), str(h))
    assert code == 0 and load_measure(out).dim == 2


def test_cli_kakutani(capsys):
    code, out, _ = run(capsys, "kakutani", "--tail", "1/3")
    assert code == 0 and "Singular" in out
    code, out, _ = run(capsys, "kakutani", "--betas", "1/3,1/3", "--tail", "1")
    assert "Equivalent" in out


def test_cli_transform_check(capsys):
    code, out, _ = run(capsys, "transform", "--matrix", "2,0;0,1", "--x", "1,1/2", "--check")
    assert code == 0


def test_cli_pd(tmp_path, capsys):
    h = tmp_path / "h.json"
    h.write_text(dump_measure(haar(PP)))
    code, out, _ = run(capsys, "pd", "--f", str(h), "--x", "0", "--T", "1")
    assert code == 0 and "-3/5" in out
    code, out, _ = run(capsys, "pdshift", "--measure", str(h), "--a", "1", "--set", "0:0", "--T", "1")
    assert code == 0 and "3/5" in out


def test_cli_weakdist(capsys):
    assert run(capsys, "weakdist", "check", "--levels", "1,2")[0] == 0
    assert run(capsys, "weakdist", "tight", "--haar", "3", "--c", "1/3")[0] == 0
    assert run(capsys, "weakdist", "sxi", "--haar", "2", "--xi", "2")[0] == 0
    assert run(capsys, "weakdist", "sxi", "--levels", "1,2", "--truncate", "3")[0] == 0
    assert run(capsys, "weakdist", "sxi", "--levels", "1,2")[0] == 2
    code, _, err = run(capsys, "weakdist", "check", "--haar", "0")
    assert code != 0 and err.startswith("error:")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "theta", "--measure", str(bad), "--z", "0")
    assert code == 2 and err.startswith("error: input:")
    code, _, err = run(capsys, "rho", "--levels", "1", "--a", "1,1", "--x", "1,1")
    assert code == 2 and "coordinates" in err
    code, _, err = run(capsys, "rho", "--levels", "1", "--a", "0", "--x", "1", "--trunc", "4")
    assert code == 3 and err.startswith("error: precondition:")
    code, _, err = run(capsys, "transform", "--matrix", "1,2;2,4", "--x", "0,0")
    assert code == 3 and err.startswith("error: precondition:")
    code, _, err = run(capsys, "pd", "--f", str(tmp_path / "missing.json"), "--x", "0")
    assert code == 2


def test_cli_divergent_tail_is_precondition(tmp_path, capsys):
    h = tmp_path / "h.json"
    h.write_text(dump_measure(haar(PP)))
    code, out, err = run(capsys, "pd", "--f", str(h), "--x", "0", "--tnorm", "1/3")
    assert code == 0 and "converges: no" in out and "divergent tail" in out


def test_frac_strings_are_reduced():
    assert frac_str(Fraction(2, 4)) == "1/2"
