import json
import time

import numpy as np
import pytest

from iclv import io
from iclv.cli import main
from iclv.errors import InputError
from iclv.synthetic import benchmark_spec, d_error, random_design

DATA = io.data_path("")
REF = str(io.data_path("reference_params.json"))


def run(*argv):
    return main([str(a) for a in argv])


def test_params_roundtrip(tmp_path, truth, reference):
    for params in (truth, reference[0]):
        io.write_params(tmp_path / "p.json", params, {"ev_constant": 1.5})
        back, cal = io.read_params(tmp_path / "p.json")
        assert cal["ev_constant"] == 1.5
        assert np.array_equal(back.A, params.A) and back.beta == params.beta
        assert back.interactions == params.interactions
        assert (back.measurement is None) == (params.measurement is None)
        if params.measurement is not None:
            assert np.array_equal(back.measurement.thresholds, params.measurement.thresholds)
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["schema_version"] == 1 and "units" in doc


def test_dataset_roundtrip(tmp_path, small_dataset):
    io.write_dataset(tmp_path / "d.csv", small_dataset)
    back = io.read_dataset(tmp_path / "d.csv")
    assert back == small_dataset


def test_missing_indicator_roundtrip(tmp_path, small_dataset):
    from dataclasses import replace

    people = list(small_dataset.individuals)
    people[0] = replace(people[0], indicators=(None,) + people[0].indicators[1:])
    ds = type(small_dataset)(people, small_dataset.panel_length, small_dataset.indicator_names)
    io.write_dataset(tmp_path / "d.csv", ds)
    assert io.read_dataset(tmp_path / "d.csv").individuals[0].indicators[0] is None


def test_malformed_row_names_line(tmp_path, small_dataset, capsys):
    path = tmp_path / "d.csv"
    io.write_dataset(path, small_dataset)
    lines = path.read_text().splitlines()
    fields = lines[5].split(",")
    fields[5] = "cheap"  # price column of the first data row
    lines[5] = ",".join(fields)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(InputError) as err:
        io.read_dataset(path)
    assert err.value.line == 6 and err.value.column == 6
    assert run("estimate", path, io.data_path("recovery_spec.json")) == 2
    assert "line 6" in capsys.readouterr().err
    assert io.validate(path)


def test_bad_json_and_versions(tmp_path):
    (tmp_path / "a.json").write_text('{"schema_version": 1, "kind": "params",')
    with pytest.raises(InputError) as err:
        io.read_params(tmp_path / "a.json")
    assert err.value.line == 1
    (tmp_path / "b.json").write_text('{"schema_version": 99, "kind": "params"}')
    with pytest.raises(InputError, match="schema_version"):
        io.read_params(tmp_path / "b.json")


def test_bundled_files_validate():
    files = sorted(DATA.glob("*.json")) + sorted((DATA / "fixture").glob("*"))
    assert len(files) >= 10
    findings = [f for p in files for f in io.validate(p)]
    assert findings == []
    assert run("validate", *files) == 0


def test_generate_empty_dataset(tmp_path):
    assert run("generate", DATA / "design_benchmark.json", DATA / "recovery_params.json", "-n", 0,
               "--out-dir", tmp_path) == 0
    ds = io.read_dataset(tmp_path / "dataset.csv")
    assert len(ds) == 0 and ds.indicator_names
    assert io.validate(tmp_path / "dataset.csv") == []
    assert (tmp_path / "manifest.json").exists()


def test_generate_roundtrip_and_determinism(tmp_path, truth):
    args = ("generate", DATA / "design_benchmark.json", DATA / "recovery_params.json", "-n", 12, "--seed", 4)
    assert run(*args, "--out-dir", tmp_path / "a") == 0
    assert run(*args, "--out-dir", tmp_path / "b") == 0
    for name in ("dataset.csv", "dataset_individuals.csv", "design.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    from iclv.synthetic import simulate_dataset

    design = io.read_design(tmp_path / "a" / "design.csv", io.read_design_spec(DATA / "design_benchmark.json"))
    assert io.read_dataset(tmp_path / "a" / "dataset.csv") == simulate_dataset(design, truth, 12, seed=4)


def test_design_zero_swaps(tmp_path):
    assert run("design", DATA / "design_benchmark.json", DATA / "priors.json", "--swaps", 0, "--seed", 3,
               "--out-dir", tmp_path) == 0
    report = json.loads((tmp_path / "design_report.json").read_text())
    expected = d_error(random_design(benchmark_spec(), 3), io.read_priors(DATA / "priors.json"))
    assert report["d_error"] == report["d_error_random"] == expected
    assert io.validate(tmp_path / "design.csv") == []


def test_simulate_outputs(tmp_path, capsys):
    for sub in ("a", "b"):
        assert run("simulate", REF, "--scenario", 2, "--out-dir", tmp_path / sub) == 0
    a, b = (tmp_path / "a" / "curves.csv").read_bytes(), (tmp_path / "b" / "curves.csv").read_bytes()
    assert a == b
    rows = [r.split(",") for r in a.decode().splitlines() if not r.startswith("#")]
    assert rows[0] == ["scenario", "cohort", "gender", "x", "probability"]
    gy = [(float(r[3]), float(r[4])) for r in rows[1:] if r[1] == "Gen Y" and r[2] == "male"]
    assert 19 <= 100 * (gy[-1][1] - gy[0][1]) <= 25
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["latents"]["Gen Y male"]["design"] == pytest.approx(3.46, abs=0.01)
    assert manifest["inputs"][0]["sha256"] == io.sha256(REF)
    assert "ev_constant" in manifest
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["curves.csv", "manifest.json"]


def test_simulate_errors(tmp_path, reference, capsys):
    with pytest.raises(SystemExit) as err:
        run("simulate", REF, "--scenario", 7)
    assert err.value.code == 2
    params, cal = reference
    broken = params.copy()
    del broken.beta["energy_discount"]
    io.write_params(tmp_path / "p.json", broken, cal)
    assert run("simulate", tmp_path / "p.json", "--scenario", 5, "--out-dir", tmp_path) == 3
    assert "energy_discount" in capsys.readouterr().err
    # scenario 3 extrapolates beyond the surveyed range
    assert run("simulate", REF, "--scenario", 3, "--strict", "--out-dir", tmp_path) == 3
    assert run("simulate", tmp_path / "missing.json", "--scenario", 3, "--out-dir", tmp_path) == 2


def test_estimate_zero_iterations(tmp_path):
    settings = tmp_path / "s.json"
    from iclv.estimation import EstimationSettings
    from iclv.likelihood import DrawSettings

    io.write_settings(settings, EstimationSettings(max_iterations=0, draw_settings=DrawSettings(n_draws=20)))
    out = tmp_path / "out"
    assert run("estimate", DATA / "fixture" / "fixture.csv", DATA / "fixture" / "spec.json", settings,
               "--out-dir", out) == 0
    result = json.loads((out / "result.json").read_text())
    assert result["converged"] is False and result["iterations"] == 0
    assert result["fit"]["n_individuals"] == 50
    assert result["settings"]["max_iterations"] == 0
    assert io.validate(out / "result.json") == [] and io.validate(out / "manifest.json") == []


def test_estimate_bundled_fixture(tmp_path, capsys):
    t0 = time.perf_counter()
    assert run("estimate", DATA / "fixture" / "fixture.csv", DATA / "fixture" / "spec.json",
               DATA / "default_settings.json", "--out-dir", tmp_path) == 0
    elapsed = time.perf_counter() - t0
    result = json.loads((tmp_path / "result.json").read_text())
    print(f"fixture estimate: converged={result['converged']} iterations={result['iterations']} "
          f"elapsed={elapsed:.1f}s")
    assert result["converged"] is True
    assert elapsed < 300
    t = result["choice"]["price"]
    assert t["estimate"] < 0
