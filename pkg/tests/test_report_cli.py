from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from synthmeter import cli, demo, privacy, report
from synthmeter.errors import RatioNotComputed
from synthmeter.generators import MemorizerConfig, memorizer_generate
from synthmeter.poisoning import OutlierSpec, make_attack_registry, write_registry
from synthmeter.profiles import Horizon, Role, SplitSpec, read_wide, split_households, write_wide


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small end-to-end workspace: train/holdout/synthetic/registry files."""
    base = tmp_path_factory.mktemp("workspace")
    population = demo.make_population(40, 8, seed=2)
    train, holdout = split_households(population, SplitSpec(holdout_fraction=0.5, seed=0))
    registry = make_attack_registry(OutlierSpec(count=20, seed=1), Horizon.DAILY)
    synthetic = memorizer_generate(train, 200, MemorizerConfig(jitter_sigma=0.02, seed=3))
    write_wide(train, base / "train.csv")
    write_wide(holdout, base / "holdout.csv")
    write_wide(synthetic, base / "synthetic.csv")
    write_registry(registry, base / "registry.csv")
    return base


def write_manifest(base: Path, payload: dict, name: str = "manifest.json") -> Path:
    path = base / name
    path.write_text(json.dumps(payload, indent=1))
    return path


class TestThresholdPolicy:
    def _result(self):
        ratios = privacy.default_threshold_ratios()
        fractions = {r: (0.0 if r < 0.3 else 0.25 if r < 0.6 else 1.0) for r in ratios}
        return privacy.ReconstructionResult(
            fraction_reconstructed=fractions,
            per_outlier_nn_distance_ratio=np.linspace(0.3, 1.0, 20),
        )

    def test_pass(self):
        verdict = report.threshold_policy_check(self._result(), 0.25, 0.0)
        assert verdict.passed

    def test_fail(self):
        verdict = report.threshold_policy_check(self._result(), 0.3, 0.0)
        assert not verdict.passed
        assert verdict.fraction_at_ratio == 0.25

    def test_vacuous_policy_always_passes(self):
        verdict = report.threshold_policy_check(self._result(), 1.0, 1.0)
        assert verdict.passed

    def test_missing_ratio(self):
        with pytest.raises(RatioNotComputed):
            report.threshold_policy_check(self._result(), 0.33, 0.0)


class TestRunFullEvaluation:
    def test_fidelity_only_marks_others_not_run(self, workspace, tmp_path):
        manifest = write_manifest(
            workspace,
            {
                "horizon": "daily",
                "seed": 0,
                "train": "train.csv",
                "holdout": "holdout.csv",
                "synthetic": "synthetic.csv",
                "fidelity": {"clusters_k": 4},
            },
            name="fidelity_only.json",
        )
        outcome = report.run_full_evaluation(manifest, output_dir=tmp_path / "out")
        assert outcome.ok
        assert outcome.report["privacy"] == {"status": "not_run"}
        assert outcome.report["utility"] == {"status": "not_run"}
        assert "acf_mmd" in outcome.report["fidelity"]

    def test_reports_byte_identical_except_timestamp(self, workspace, tmp_path):
        manifest = write_manifest(
            workspace,
            {
                "horizon": "daily",
                "seed": 1,
                "train": "train.csv",
                "holdout": "holdout.csv",
                "synthetic": "synthetic.csv",
                "registry": "registry.csv",
                "fidelity": {"clusters_k": 4},
                "privacy": {"recon": True, "recon_poisoned": True, "mia": True, "mia_poisoned": True},
            },
            name="full.json",
        )
        first = report.run_full_evaluation(manifest, output_dir=tmp_path / "a")
        second = report.run_full_evaluation(manifest, output_dir=tmp_path / "b")
        body_a = {k: v for k, v in first.report.items() if k != "timestamp"}
        body_b = {k: v for k, v in second.report.items() if k != "timestamp"}
        assert body_a == body_b
        text_a = (tmp_path / "a" / "report.json").read_text().splitlines()
        text_b = (tmp_path / "b" / "report.json").read_text().splitlines()
        diff = [
            (a, b) for a, b in zip(text_a, text_b) if a != b and "timestamp" not in a
        ]
        assert diff == []

    def test_policy_verdict_embedded(self, workspace, tmp_path):
        manifest = write_manifest(
            workspace,
            {
                "horizon": "daily",
                "train": "train.csv",
                "holdout": "holdout.csv",
                "synthetic": "synthetic.csv",
                "registry": "registry.csv",
                "privacy": {
                    "recon_poisoned": True,
                    "policy": {"ratio": 0.3, "max_fraction": 0.0},
                },
            },
            name="policy.json",
        )
        outcome = report.run_full_evaluation(manifest, output_dir=tmp_path / "out")
        assert outcome.ok
        verdict = outcome.report["privacy"]["policy_verdict"]
        assert set(verdict) == {"policy_ratio", "max_fraction", "fraction_at_ratio", "passed"}

    def test_missing_registry_fails_privacy_section(self, workspace, tmp_path):
        manifest = write_manifest(
            workspace,
            {
                "horizon": "daily",
                "train": "train.csv",
                "holdout": "holdout.csv",
                "synthetic": "synthetic.csv",
                "privacy": {"recon_poisoned": True},
            },
            name="broken.json",
        )
        outcome = report.run_full_evaluation(manifest, output_dir=tmp_path / "out")
        assert not outcome.ok
        assert outcome.report["privacy"]["status"] == "failed"

    def test_side_file_schemas_round_trip(self, workspace, tmp_path):
        manifest = write_manifest(
            workspace,
            {
                "horizon": "daily",
                "train": "train.csv",
                "holdout": "holdout.csv",
                "synthetic": "synthetic.csv",
                "registry": "registry.csv",
                "fidelity": True,
                "privacy": {"recon_poisoned": True},
            },
            name="sides.json",
        )
        outcome = report.run_full_evaluation(manifest, output_dir=tmp_path / "out")
        stats = np.genfromtxt(
            tmp_path / "out" / "per_slot_statistics.csv", delimiter=",", names=True
        )
        assert len(stats) == 48
        curve = np.genfromtxt(
            tmp_path / "out" / "reconstruction_cdf.csv", delimiter=",", names=True
        )
        assert set(curve.dtype.names) == {"ratio", "fraction"}
        fractions = [row["fraction"] for row in curve]
        assert all(a <= b for a, b in zip(fractions, fractions[1:]))
        coords = (tmp_path / "out" / "pca_coordinates.csv").read_text().splitlines()
        assert coords[0] == "set,x,y"


class TestCli:
    def test_ingest_split_pipeline(self, tmp_path, capsys):
        population = demo.make_population(12, 4, seed=9)
        demo.write_long_csv(population, tmp_path / "readings.csv")
        rc = cli.main(
            [
                "ingest",
                "--input", str(tmp_path / "readings.csv"),
                "--horizon", "daily",
                "--output", str(tmp_path / "wide.csv"),
            ]
        )
        assert rc == 0
        rc = cli.main(
            [
                "split",
                "--input", str(tmp_path / "wide.csv"),
                "--holdout-fraction", "0.5",
                "--seed", "3",
                "--train-out", str(tmp_path / "train.csv"),
                "--holdout-out", str(tmp_path / "holdout.csv"),
            ]
        )
        assert rc == 0
        train = read_wide(tmp_path / "train.csv", Role.TRAIN)
        holdout = read_wide(tmp_path / "holdout.csv", Role.HOLDOUT)
        assert set(train.household_ids).isdisjoint(holdout.household_ids)

    def test_inject_generate_attack_pipeline(self, tmp_path):
        population = demo.make_population(30, 6, seed=4)
        write_wide(population, tmp_path / "train.csv")
        rc = cli.main(
            [
                "inject-outliers",
                "--train", str(tmp_path / "train.csv"),
                "--count", "10",
                "--seed", "2",
                "--poisoned-out", str(tmp_path / "poisoned.csv"),
                "--registry-out", str(tmp_path / "registry.csv"),
            ]
        )
        assert rc == 0
        rc = cli.main(
            [
                "generate",
                "--kind", "memorizer",
                "--train", str(tmp_path / "poisoned.csv"),
                "--n", "200",
                "--seed", "5",
                "--output", str(tmp_path / "synthetic.csv"),
            ]
        )
        assert rc == 0
        rc = cli.main(
            [
                "privacy", "recon-poisoned",
                "--registry", str(tmp_path / "registry.csv"),
                "--synthetic", str(tmp_path / "synthetic.csv"),
                "--report", str(tmp_path / "recon.json"),
            ]
        )
        assert rc == 0
        payload = json.loads((tmp_path / "recon.json").read_text())
        assert "fraction_reconstructed" in payload

    def test_generate_gmm_and_fidelity(self, tmp_path):
        population = demo.make_population(40, 6, seed=8)
        write_wide(population, tmp_path / "real.csv")
        rc = cli.main(
            [
                "generate",
                "--kind", "gmm",
                "--train", str(tmp_path / "real.csv"),
                "--n", "200",
                "--k", "5",
                "--seed", "1",
                "--output", str(tmp_path / "synthetic.csv"),
            ]
        )
        assert rc == 0
        config = tmp_path / "fid.json"
        config.write_text(json.dumps({"clusters_k": 4}))
        rc = cli.main(
            [
                "fidelity",
                "--real", str(tmp_path / "real.csv"),
                "--synthetic", str(tmp_path / "synthetic.csv"),
                "--config", str(config),
                "--report", str(tmp_path / "fidelity.json"),
            ]
        )
        assert rc == 0
        payload = json.loads((tmp_path / "fidelity.json").read_text())
        assert set(payload) >= {"acf_mmd", "profile_mmd", "peaks_mmd", "cluster_kl"}

    def test_utility_year_overlap_guard(self, tmp_path):
        fit = demo.make_population(20, 6, seed=3)
        write_wide(fit, tmp_path / "fit.csv")
        rc = cli.main(
            [
                "utility", "tstr-classify",
                "--real-fit", str(tmp_path / "fit.csv"),
                "--synthetic-fit", str(tmp_path / "fit.csv"),
                "--eval", str(tmp_path / "fit.csv"),
                "--epochs", "2",
                "--report", str(tmp_path / "u.json"),
            ]
        )
        assert rc == 2  # same years on both sides without --allow-overlap

    def test_utility_allow_overlap(self, tmp_path):
        fit = demo.make_population(20, 8, seed=3, day_step=36)
        write_wide(fit, tmp_path / "fit.csv")
        rc = cli.main(
            [
                "utility", "tstr-classify",
                "--real-fit", str(tmp_path / "fit.csv"),
                "--synthetic-fit", str(tmp_path / "fit.csv"),
                "--eval", str(tmp_path / "fit.csv"),
                "--epochs", "2",
                "--allow-overlap",
                "--report", str(tmp_path / "u.json"),
            ]
        )
        assert rc == 0
        payload = json.loads((tmp_path / "u.json").read_text())
        assert payload["absolute_gap"] == 0.0

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["--version"])
        assert excinfo.value.code == 0

    def test_demo_then_evaluate(self, tmp_path):
        rc = cli.main(
            ["demo", "--output-dir", str(tmp_path / "ws"), "--households", "40", "--days", "8", "--seed", "1"]
        )
        assert rc == 0
        rc = cli.main(
            [
                "evaluate",
                "--manifest", str(tmp_path / "ws" / "manifest.json"),
                "--output-dir", str(tmp_path / "ws" / "out"),
            ]
        )
        assert rc == 0
        payload = json.loads((tmp_path / "ws" / "out" / "report.json").read_text())
        assert payload["privacy"]["mia_plain"]["precision"] is not None
        assert payload["input_digests"]["train"]

    def test_evaluate_literal_demo_manifest(self, tmp_path, monkeypatch):
        original = cli.build_demo_workspace

        def small_demo(target, households=250, days=20, seed=0):
            return original(target, households=40, days=8, seed=seed)

        monkeypatch.setattr(cli, "build_demo_workspace", small_demo)
        monkeypatch.chdir(tmp_path)
        rc = cli.main(["--output-dir", str(tmp_path / "bundle"), "evaluate", "--manifest", "demo"])
        assert rc == 0
        assert list((tmp_path / "bundle").rglob("report.json"))
