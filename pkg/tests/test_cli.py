import json
import sys

import numpy as np
import pytest

from kllime import cli
from kllime import explanation as ex
from kllime.io import load_instance, pgm_bytes, read_pgm
from kllime.render import coefficient_pixels, variance_pixels

from conftest import run_cli


@pytest.fixture(scope="module")
def linear_model_file(tmp_path_factory, linear_posterior):
    path = tmp_path_factory.mktemp("m") / "linear.json"
    path.write_text(json.dumps(linear_posterior.to_dict()))
    return str(path)


@pytest.fixture(scope="module")
def image_setup(tmp_path_factory):
    """4x4 PGM instance plus a logistic model over its 16 pixels."""
    from kllime.models import fit_bayes_logistic
    d = tmp_path_factory.mktemp("img")
    g = np.random.default_rng(0)
    X = (g.random((200, 16)) < 0.5) * g.uniform(0.5, 1, (200, 16))
    y = (X @ g.normal(size=16) * 2 > 0).astype(float)
    (d / "model.json").write_text(json.dumps(fit_bayes_logistic(X, y).to_dict()))
    pix = (X[0] * 255).astype(int)
    (d / "inst.pgm").write_text("P2\n# comment\n4 4\n255\n" + " ".join(map(str, pix)) + "\n")
    return d


def _explain_img(d, out, *extra):
    return cli.main(["explain", str(d / "inst.pgm"), "--model", f"builtin:{d / 'model.json'}",
                     "--num-perturbations", "300", "--num-posterior-samples", "6",
                     "--num-lambdas", "12", "--out", str(out), *extra])


def test_pgm_and_csv_readers(tmp_path):
    (tmp_path / "a.pgm").write_text("P2\n3 2\n# c\n10\n0 5 10\n10 5 0\n")
    px, shape = read_pgm(tmp_path / "a.pgm")
    assert shape == (2, 3)
    np.testing.assert_allclose(px, [0, 0.5, 1, 1, 0.5, 0])
    (tmp_path / "a.csv").write_text("0.0,0.7,0.3\n")
    inst = load_instance(str(tmp_path / "a.csv"), background=0.0, shape=(1, 3))
    assert inst.features.tolist() == [0.0, 0.7, 0.3] and inst.shape == (1, 3)
    (tmp_path / "bad.pgm").write_text("P5\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "bad.pgm")


def test_render_rules():
    assert np.all(coefficient_pixels(np.zeros(6)) == 127)
    px = coefficient_pixels([0, 0, 2.5, 0])
    assert px.tolist() == [127, 127, 255, 127]
    assert coefficient_pixels([-1.0, 1.0]).tolist() == [0, 255]
    assert np.all(variance_pixels(np.zeros(4)) == 0)
    assert variance_pixels([0, 1, 2]).tolist() == [0, 127, 255]
    assert pgm_bytes([1, 2, 3, 4], (2, 2)) == b"P2\n2 2\n255\n1 2\n3 4\n"


def test_self_projection_exit_zero(tmp_path, linear_model_file):
    (tmp_path / "x.csv").write_text(",".join(str(v) for v in np.linspace(0.5, 2, 8)) + "\n")
    out = tmp_path / "a.json"
    code = cli.main(["explain", str(tmp_path / "x.csv"), "--model", f"builtin:{linear_model_file}",
                     "--representation", "identity", "--num-perturbations", "300",
                     "--num-posterior-samples", "10", "--lambda-min-ratio", "1e-6",
                     "--target-power", "0.99", "--out", str(out)])
    assert code == 0
    art = ex.load(out)
    assert art["curve"]["relative_power"][-1] >= 1 - 1e-6
    assert art["metadata"]["family"] == "gaussian"


def test_constant_adapter_exit_one(tmp_path, caplog):
    (tmp_path / "x.csv").write_text("0.1,0.2,0.3\n")
    code = cli.main(["explain", str(tmp_path / "x.csv"), "--model",
                     f"adapter-cmd:{sys.executable} -m kllime.adapters.echo --p 0.5",
                     "--num-perturbations", "50", "--out", str(tmp_path / "a.json")])
    assert code == 1
    assert "undefined" in caplog.text


def test_unattained_target_exit_two(tmp_path, image_setup):
    out = tmp_path / "a.json"
    assert _explain_img(image_setup, out, "--target-power", "1.0") == 2
    art = ex.load(out)
    assert art["curve"]["attained"] is False


def test_bad_model_spec(tmp_path, image_setup):
    assert cli.main(["explain", str(image_setup / "inst.pgm"), "--model", "magic:x",
                     "--out", str(tmp_path / "a.json")]) == 1


def test_power_curve_and_render(tmp_path, image_setup, capsys):
    art_path = tmp_path / "a.json"
    assert _explain_img(image_setup, art_path, "--full") == 0
    art = ex.load(art_path)
    assert cli.main(["power-curve", "--artifact", str(art_path)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "lambda\tmean_complexity\trelative_power"
    assert len(rows) - 1 == 12
    power = np.array([float(r.split("\t")[2]) for r in rows[1:]])
    assert np.all(np.diff(power) >= -1e-6)
    assert abs(power[0]) <= 1e-9
    for r in rows[1:]:
        for v in r.split("\t"):
            assert len(v.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 9

    for what, at in [("mean", "selected"), ("variance", "lambda-index:11"), ("sample:2", "lambda-index:5")]:
        out = tmp_path / f"{what.replace(':', '_')}.pgm"
        assert cli.main(["render", str(art_path), "--what", what, "--at", at, "--out", str(out)]) == 0
        assert out.read_bytes() == ex.render(art, what, at)
        px, shape = read_pgm(out)
        assert shape == (4, 4)
    # inactive pixels carry no coefficient: rendered at the midpoint
    inactive = np.array(art["instance"]["features"]) == 0
    px, _ = read_pgm(tmp_path / "mean.pgm")
    assert np.all(np.round(px[inactive] * 255) == 127)

    assert cli.main(["render", str(art_path), "--what", "sample:99", "--out", str(tmp_path / "x.pgm")]) == 1
    assert cli.main(["render", str(art_path), "--at", "lambda-index:12", "--out", str(tmp_path / "x.pgm")]) == 1


def test_render_needs_per_sample_maps(tmp_path, image_setup):
    art_path = tmp_path / "a.json"
    _explain_img(image_setup, art_path)
    assert ex.load(art_path)["per_sample_coefficients"] is None
    assert cli.main(["render", str(art_path), "--what", "sample:0", "--out", str(tmp_path / "x.pgm")]) == 1


def test_render_needs_shape(tmp_path, linear_model_file):
    (tmp_path / "x.csv").write_text(",".join(["1.0"] * 8) + "\n")
    art = tmp_path / "a.json"
    cli.main(["explain", str(tmp_path / "x.csv"), "--model", f"builtin:{linear_model_file}",
              "--num-perturbations", "100", "--num-posterior-samples", "3", "--num-lambdas", "5",
              "--out", str(art)])
    assert cli.main(["render", str(art), "--out", str(tmp_path / "x.pgm")]) == 1


def test_variance_of_single_sample_is_black(tmp_path, image_setup):
    art_path = tmp_path / "a.json"
    cli.main(["explain", str(image_setup / "inst.pgm"), "--model", f"builtin:{image_setup / 'model.json'}",
              "--num-perturbations", "200", "--num-posterior-samples", "1", "--num-lambdas", "8",
              "--out", str(art_path)])
    data = ex.render(ex.load(art_path), "variance", "lambda-index:7")
    assert data.split(b"\n", 3)[3].split() == [b"0"] * 16


def test_fresh_power_curve_matches_artifact(tmp_path, image_setup):
    art_path = tmp_path / "a.json"
    _explain_img(image_setup, art_path)
    tsv = tmp_path / "c.tsv"
    code = cli.main(["power-curve", str(image_setup / "inst.pgm"), "--model",
                     f"builtin:{image_setup / 'model.json'}", "--num-perturbations", "300",
                     "--num-posterior-samples", "6", "--num-lambdas", "12", "--out", str(tsv)])
    assert code == 0
    assert tsv.read_text() == ex.curve_tsv(ex.load(art_path))


def test_adapter_through_cli(tmp_path, image_setup):
    spec = (f"adapter-cmd:{sys.executable} -m kllime.adapters.loopback "
            f"--model {image_setup / 'model.json'} --num-samples 4 --seed 1")
    out = tmp_path / "a.json"
    code = cli.main(["explain", str(image_setup / "inst.pgm"), "--model", spec,
                     "--num-perturbations", "200", "--num-lambdas", "6", "--out", str(out)])
    assert code in (0, 2)
    assert ex.load(out)["metadata"]["num_posterior_samples"] == 4


def test_module_entry_point(tmp_path):
    res = run_cli("render", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x.pgm"))
    assert res.returncode == 1
    assert "missing.json" in res.stderr
