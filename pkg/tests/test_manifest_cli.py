import json
import math
import subprocess

import pytest

from remlab.cli import main
from remlab.experiments import resolve_workers, run_experiment
from remlab.manifest import (
    EXPERIMENTS,
    ExperimentManifest,
    ManifestError,
    from_dict,
    from_json,
    load,
)
from remlab.rng import seed_derivation
from remlab.theory import free_energy_limit
from remlab.verify import BUILTIN_NAMES, builtin_manifest, run_builtin

# Key layout golden values, fixed at first release: master_seed=42,
# replica_id 0..7, stream 0..1.  These must never change.
GOLDEN_KEYS = [
    774763251095801167872,
    774763251095801167873,
    774763251095801233408,
    774763251095801233409,
    774763251095801298944,
    774763251095801298945,
    774763251095801364480,
    774763251095801364481,
    774763251095801430016,
    774763251095801430017,
    774763251095801495552,
    774763251095801495553,
    774763251095801561088,
    774763251095801561089,
    774763251095801626624,
    774763251095801626625,
]


def tiny_doc(**overrides):
    doc = {
        "experiment": "free_energy",
        "env": {"alpha": 1.0, "n": 8},
        "betas": [0.5],
        "replicas": 3,
        "master_seed": 11,
        "checks": [{"check": "mean_within", "beta": 0.5, "tol": 0.5}],
    }
    doc.update(overrides)
    return doc


def test_seed_derivation_golden_keys():
    keys = [seed_derivation(42, r, s) for r in range(8) for s in (0, 1)]
    assert keys == GOLDEN_KEYS


def test_round_trip_all_builtins():
    for name in BUILTIN_NAMES:
        manifest = builtin_manifest(name)
        assert from_json(manifest.to_json()) == manifest


def test_round_trip_full_manifest():
    doc = {
        "experiment": "pd_compare",
        "env": {"alpha": 1.0, "n": 12},
        "betas": [2.0],
        "replicas": 5,
        "master_seed": 99,
        "top_m": 64,
        "pd": {
            "m": 0.5,
            "epsilon_mass": 0.001,
            "draws": 7,
            "truncation_b": -1.0,
            "stick_draws": 3,
            "stick_length": 50,
        },
        "checks": [{"check": "ks_w1", "max_statistic": 0.9}],
        "output_dir": "somewhere",
        "workers": "auto",
    }
    manifest = from_dict(doc)
    assert from_json(manifest.to_json()) == manifest
    assert manifest.pd.truncation_b == -1.0
    assert manifest.workers == "auto"


def test_builtin_names_cover_all_experiments():
    experiments = {builtin_manifest(name).experiment for name in BUILTIN_NAMES}
    assert experiments == set(EXPERIMENTS)


def test_builtin_unknown_name():
    with pytest.raises(ValueError):
        builtin_manifest("nonexistent")


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.update(replicas=0), "replicas"),
        (lambda d: d.update(replicas=2.5), "replicas"),
        (lambda d: d.update(env={"alpha": 1.0, "n": 31}), "env.n"),
        (lambda d: d.update(env={"alpha": 0.9, "n": 8}), "env.alpha"),
        (lambda d: d.update(env={"alpha": 1.0}), "env"),
        (lambda d: d.update(bogus=1), "unknown keys"),
        (lambda d: d.update(experiment="melt"), "experiment"),
        (lambda d: d.update(betas=[]), "betas"),
        (lambda d: d.update(betas=[0.5, -1.0]), "betas[1]"),
        (lambda d: d.update(master_seed=-1), "master_seed"),
        (lambda d: d.update(master_seed=1 << 64), "master_seed"),
        (lambda d: d.update(k_marginal=9), "k_marginal"),
        (lambda d: d.update(top_m=0), "top_m"),
        (lambda d: d.update(workers=0), "workers"),
        (lambda d: d.update(workers="many"), "workers"),
        (lambda d: d.update(checks=[{"check": "ks_w1", "max_statistic": 0.1}]), "checks[0]"),
        (lambda d: d.update(checks=[{"check": "mean_within", "beta": 0.7, "tol": 0.1}]), "beta"),
        (lambda d: d.update(checks=[{"check": "mean_within", "beta": 0.5}]), "tol"),
    ],
)
def test_manifest_validation_errors(mutate, fragment):
    doc = tiny_doc()
    mutate(doc)
    with pytest.raises(ManifestError) as err:
        from_dict(doc)
    assert fragment in str(err.value)


def test_rate_manifest_requires_intervals():
    doc = tiny_doc(experiment="rate_function", betas=[], checks=[])
    with pytest.raises(ManifestError) as err:
        from_dict(doc)
    assert "intervals" in str(err.value)


def test_interval_check_must_reference_declared_interval():
    doc = tiny_doc(
        experiment="rate_function",
        betas=[],
        intervals=[[0.2, 0.3]],
        checks=[{"check": "zero_hits", "interval": [0.4, 0.5]}],
    )
    with pytest.raises(ManifestError) as err:
        from_dict(doc)
    assert "interval" in str(err.value)


def test_pd_compare_requires_matching_m():
    doc = tiny_doc(
        experiment="pd_compare",
        betas=[2.0],
        checks=[],
        pd={"m": 0.4, "draws": 5},
    )
    with pytest.raises(ManifestError) as err:
        from_dict(doc)
    assert "pd.m" in str(err.value)


def test_json_syntax_error_reports_position():
    with pytest.raises(ManifestError) as err:
        from_json('{"experiment": "free_energy",\n  "env": }')
    assert "line 2" in str(err.value)


def test_resolve_workers_precedence(monkeypatch):
    manifest = from_dict(tiny_doc())
    monkeypatch.delenv("REMLAB_WORKERS", raising=False)
    assert resolve_workers(manifest) == 1
    monkeypatch.setenv("REMLAB_WORKERS", "3")
    assert resolve_workers(manifest) == 3
    withworkers = from_dict(tiny_doc(workers=2))
    assert resolve_workers(withworkers) == 2
    assert resolve_workers(withworkers, 5) == 5
    assert resolve_workers(withworkers, "auto") >= 1
    monkeypatch.setenv("REMLAB_WORKERS", "junk")
    with pytest.raises(ValueError):
        resolve_workers(manifest)


def test_run_experiment_artifacts(tmp_path):
    manifest = from_dict(tiny_doc(betas=[0.5, 2.0]))
    outcome = run_experiment(manifest, output_dir=tmp_path / "out")
    assert outcome.passed
    out = tmp_path / "out"
    for name in ("results.csv", "theory.csv", "manifest.json", "summary.json"):
        assert (out / name).exists()

    raw = (out / "results.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "beta,replica,log_z,free_energy"
    assert len(lines) == 1 + 2 * manifest.replicas
    # shortest round-trip float formatting: every numeric cell reparses
    # to a float whose repr is the cell itself
    for line in lines[1:]:
        for cell in line.split(",")[2:]:
            assert repr(float(cell)) == cell

    theory = (out / "theory.csv").read_text(encoding="utf-8").splitlines()
    assert theory[0] == "beta,limit"
    assert float(theory[1].split(",")[1]) == free_energy_limit(1.0, 0.5)

    resolved = from_json((out / "manifest.json").read_text(encoding="utf-8"))
    assert resolved.master_seed == manifest.master_seed
    assert resolved.output_dir == str(out)
    assert resolved.workers == 1

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["passed"] is True
    assert summary["seeds"]["master_seed"] == 11
    assert {c["name"]: c["passed"] for c in summary["checks"]}
    assert "remlab" in summary["versions"]


def test_run_experiment_is_deterministic_across_workers(tmp_path):
    manifest = from_dict(tiny_doc(replicas=6, betas=[0.5, 1.5]))
    a = run_experiment(manifest, workers=1, output_dir=tmp_path / "w1")
    b = run_experiment(manifest, workers=4, output_dir=tmp_path / "w4")
    for name in ("results.csv", "theory.csv"):
        assert (a.output_dir / name).read_bytes() == (b.output_dir / name).read_bytes()


def test_run_experiment_seed_override_changes_results(tmp_path):
    manifest = from_dict(tiny_doc())
    a = run_experiment(manifest, output_dir=tmp_path / "a")
    b = run_experiment(manifest, output_dir=tmp_path / "b", master_seed=12)
    assert (a.output_dir / "results.csv").read_bytes() != (
        b.output_dir / "results.csv"
    ).read_bytes()
    assert b.manifest.master_seed == 12


def test_exceedance_artifacts_consistent(tmp_path):
    doc = {
        "experiment": "exceedance",
        "env": {"alpha": 1.0, "n": 10},
        "replicas": 40,
        "master_seed": 5,
        "b_levels": [0.0, 1.0],
        "checks": [{"check": "count_zero_prob", "b": 0.0, "tol": 0.5}],
    }
    outcome = run_experiment(from_dict(doc), output_dir=tmp_path)
    counts = {}
    for line in (tmp_path / "results.csv").read_text().splitlines()[1:]:
        b, replica, count = line.split(",")
        counts[(b, replica)] = int(count)
    positions = (tmp_path / "positions.csv").read_text().splitlines()[1:]
    assert positions
    tally = {}
    for line in positions:
        b, replica, pos = line.split(",")
        tally[(b, replica)] = tally.get((b, replica), 0) + 1
        assert float(pos) >= float(b)
    for key, observed in tally.items():
        assert counts[key] == observed
    assert sum(counts.values()) == sum(tally.values())
    assert outcome.checks[0].name == "count_zero_prob(b=0)"


def test_rate_artifacts(tmp_path):
    doc = {
        "experiment": "rate_function",
        "env": {"alpha": 1.0, "n": 10},
        "replicas": 4,
        "master_seed": 9,
        "intervals": [[0.2, 0.3], [0.8, 0.9]],
        "checks": [{"check": "pooled_rate_in", "interval": [0.2, 0.3], "low": 0.0, "high": 1.0}],
    }
    outcome = run_experiment(from_dict(doc), output_dir=tmp_path)
    theory = (tmp_path / "theory.csv").read_text().splitlines()
    assert theory[0] == "interval_low,interval_high,rate_limit"
    limits = {tuple(line.split(",")[:2]): line.split(",")[2] for line in theory[1:]}
    assert limits[("0.2", "0.3")] == "0.2"
    assert limits[("0.8", "0.9")] == "inf"
    assert outcome.checks[0].detail["total_hits"] >= 0


def test_pd_compare_artifacts(tmp_path):
    doc = {
        "experiment": "pd_compare",
        "env": {"alpha": 1.0, "n": 10},
        "betas": [2.0],
        "replicas": 12,
        "master_seed": 21,
        "pd": {"m": 0.5, "epsilon_mass": 0.01, "draws": 12, "stick_draws": 8, "stick_length": 30},
        "checks": [
            {"check": "ks_w1", "max_statistic": 0.99},
            {"check": "stick_ks_w1", "max_statistic": 0.99},
        ],
    }
    outcome = run_experiment(from_dict(doc), output_dir=tmp_path)
    theory = (tmp_path / "theory.csv").read_text().splitlines()
    sources = [line.split(",")[0] for line in theory[1:]]
    assert sources.count("pd_poisson") == 12
    assert sources.count("pd_poisson_cross") == 8
    assert sources.count("pd_stick") == 8
    for line in theory[1:]:
        w1 = float(line.split(",")[2])
        sumsq = float(line.split(",")[3])
        assert 0.0 < w1 <= 1.0
        assert 0.0 < sumsq <= 1.0 + 1e-12
    results = (tmp_path / "results.csv").read_text().splitlines()
    assert results[0] == "beta,replica,w1,sumsq"
    assert len(results) == 1 + 12
    assert {c.name for c in outcome.checks} == {"ks_w1", "stick_ks_w1"}


def test_diagnostics_runs_clean(tmp_path):
    record = run_builtin("diagnostics", output_root=tmp_path)
    assert record.passed
    assert not record.retried
    rows = (record.outcome.output_dir / "results.csv").read_text().splitlines()
    assert rows[0] == "check,cases,violations"
    for line in rows[1:]:
        assert line.split(",")[2] == "0"


def test_cli_run_exit_codes(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(tiny_doc()), encoding="utf-8")
    code = main(["run", str(path), "--output-dir", str(tmp_path / "ok")])
    assert code == 0
    assert "[PASS]" in capsys.readouterr().out

    # an impossible tolerance makes the check fail -> exit 1
    failing = tiny_doc(checks=[{"check": "mean_within", "beta": 0.5, "tol": 1e-15}])
    path.write_text(json.dumps(failing), encoding="utf-8")
    code = main(["run", str(path), "--output-dir", str(tmp_path / "bad")])
    assert code == 1
    assert "[FAIL]" in capsys.readouterr().out

    path.write_text(json.dumps(tiny_doc(replicas=0)), encoding="utf-8")
    assert main(["run", str(path)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    capsys.readouterr()


def test_cli_seed_flag_overrides_manifest(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(tiny_doc()), encoding="utf-8")
    assert main(["run", str(path), "--output-dir", str(tmp_path / "s"), "--seed", "77"]) == 0
    capsys.readouterr()
    resolved = load(tmp_path / "s" / "manifest.json")
    assert resolved.master_seed == 77


def test_cli_theory_output(capsys):
    assert main(["theory", "1.0", "0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "alpha 1.0"
    assert out[1] == "beta 0.5"
    assert out[2] == "critical_beta 1.0"
    assert out[3] == f"free_energy_limit {math.log(2.0)!r}"
    assert out[4] == "regime high_temperature"
    assert main(["theory", "0.5", "1.0"]) == 2
    capsys.readouterr()


def test_cli_verify_subset(tmp_path, capsys):
    code = main(["verify", "--only", "diagnostics", "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] diagnostics" in out
    assert "verification passed" in out
    assert main(["verify", "--only", "nonsense"]) == 2
    capsys.readouterr()


def test_console_script_installed():
    proc = subprocess.run(
        ["remlab", "theory", "2", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "regime low_temperature" in proc.stdout


def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
