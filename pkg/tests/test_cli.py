import csv

import numpy as np
import pytest

from frnet import cli, study
from frnet.sampler import SamplerError
from frnet.simgen import ScenarioSpec

FAST = ["--set", "n_iter=300", "--set", "burn_in=50", "--set", "thin=1", "--set", "seed=11"]


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    return study.write_scenario_dataset(ScenarioSpec(n=15, m=3, seed=5, name="tiny"), 0, root)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_ranks_preset(self, tmp_path, capsys):
        assert cli.main(["simulate", "--set", f"output_dir={tmp_path}"]) == cli.EXIT_OK
        dirs = sorted(p for p in tmp_path.iterdir() if p.is_dir())
        assert len(dirs) == 16
        for d in dirs:
            for name in ("roster.csv", "nominations.csv", "node_covariates.csv", "dyad_covariates.csv",
                         "truth.csv", "scenario.txt"):
                assert (d / name).exists()
        assert len(capsys.readouterr().out.splitlines()) == 16

    def test_custom(self, tmp_path):
        args = ["simulate", "--set", f"output_dir={tmp_path}", "--set", "preset=custom", "--set", "n=12",
                "--set", "m=2", "--set", "replicates=2"]
        assert cli.main(args) == cli.EXIT_OK
        assert len(list(tmp_path.iterdir())) == 2

    def test_unknown_preset(self, tmp_path):
        assert cli.main(["simulate", "--set", f"output_dir={tmp_path}", "--set", "preset=huge"]) == cli.EXIT_USAGE


class TestFit:
    def test_deterministic_output(self, small_dataset, tmp_path):
        for k in (1, 2):
            args = ["fit", "--set", f"data_dir={small_dataset}", "--set", f"output_dir={tmp_path / str(k)}",
                    "--set", "family=FRN,BINARY"] + FAST
            assert cli.main(args) == cli.EXIT_OK
        for fam in ("FRN", "BINARY"):
            a = (tmp_path / "1" / small_dataset.name / f"samples_{fam}.csv").read_bytes()
            b = (tmp_path / "2" / small_dataset.name / f"samples_{fam}.csv").read_bytes()
            assert a == b
        rows = read_csv(tmp_path / "1" / small_dataset.name / "summary_FRN.csv")
        assert rows[0]["parameter"] == "intercept"

    def test_config_file(self, small_dataset, tmp_path):
        cfg = tmp_path / "fit.txt"
        cfg.write_text(f"data_dir = {small_dataset}\noutput_dir = {tmp_path / 'out'}\nfamily = CB\n"
                       "n_iter = 200\nburn_in = 20\nthin = 2\n")
        assert cli.main(["fit", str(cfg)]) == cli.EXIT_OK
        assert (tmp_path / "out" / small_dataset.name / "samples_CENSORED_BINARY.csv").exists()

    def test_rank_with_row_terms_is_usage_error(self, small_dataset, tmp_path, capsys):
        args = ["fit", "--set", f"data_dir={small_dataset}", "--set", f"output_dir={tmp_path}",
                "--set", "family=RANK"] + FAST
        assert cli.main(args) == cli.EXIT_USAGE
        assert "RANK" in capsys.readouterr().err
        assert not any(tmp_path.iterdir())

    def test_rank_without_row_terms(self, small_dataset, tmp_path):
        args = ["fit", "--set", f"data_dir={small_dataset}", "--set", f"output_dir={tmp_path}",
                "--set", "family=RANK", "--set", "intercept=false", "--set", "row_covariates="] + FAST
        assert cli.main(args) == cli.EXIT_OK
        rows = read_csv(tmp_path / small_dataset.name / "summary_RANK.csv")
        names = [r["parameter"] for r in rows]
        assert "intercept" not in names and not any(n.startswith("row.") for n in names)

    def test_unknown_key(self, small_dataset):
        assert cli.main(["fit", "--set", f"data_dir={small_dataset}", "--set", "n_iterations=5"]) == cli.EXIT_USAGE

    def test_bad_family(self, small_dataset):
        assert cli.main(["fit", "--set", f"data_dir={small_dataset}", "--set", "family=POISSON"]) == cli.EXIT_USAGE

    def test_missing_data_dir(self, tmp_path):
        assert cli.main(["fit", "--set", f"data_dir={tmp_path / 'nope'}", "--set", "m=3"]) == cli.EXIT_DATA

    def test_invalid_data(self, tmp_path):
        (tmp_path / "roster.csv").write_text("node_id,participated\na,1\nb,1\n")
        (tmp_path / "nominations.csv").write_text("nominator_id,nominee_id,rank\na,b,1\na,b,2\n")
        assert cli.main(["fit", "--set", f"data_dir={tmp_path}", "--set", "m=3"]) == cli.EXIT_DATA

    def test_numerical_failure(self, small_dataset, monkeypatch):
        def boom(*args, **kwargs):
            raise SamplerError("singular precision matrix")

        monkeypatch.setattr(study, "run_fits", boom)
        assert cli.main(["fit", "--set", f"data_dir={small_dataset}"]) == cli.EXIT_NUMERIC

    def test_missing_config_and_bad_set(self, tmp_path):
        assert cli.main(["fit", str(tmp_path / "absent.txt")]) == cli.EXIT_USAGE
        assert cli.main(["fit", "--set", "oops"]) == cli.EXIT_USAGE
        assert cli.main(["bogus"]) == cli.EXIT_USAGE
        assert cli.main(["fit"]) == cli.EXIT_USAGE


@pytest.fixture(scope="module")
def fits(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("fits")
    args = ["fit", "--set", f"data_dir={small_dataset}", "--set", f"output_dir={out}",
            "--set", "family=FRN,CB"] + FAST
    assert cli.main(args) == cli.EXIT_OK
    return out


class TestSummarizeAndCompare:
    def test_summarize(self, fits, small_dataset, tmp_path):
        dst = tmp_path / "s.csv"
        src = fits / small_dataset.name / "samples_FRN.csv"
        assert cli.main(["summarize", "--set", f"input={src}", "--set", f"output={dst}"]) == cli.EXIT_OK
        rows = read_csv(dst)
        assert {"parameter", "mean", "sd", "q025", "q50", "q975", "ess"} <= set(rows[0])

    def test_summarize_missing_input(self, tmp_path):
        assert cli.main(["summarize", "--set", f"input={tmp_path / 'x.csv'}"]) == cli.EXIT_DATA

    def test_compare_single_family_is_one(self, fits, small_dataset, tmp_path):
        only = tmp_path / "only"
        (only / small_dataset.name).mkdir(parents=True)
        src = fits / small_dataset.name / "samples_FRN.csv"
        (only / small_dataset.name / "samples_FRN.csv").write_bytes(src.read_bytes())
        assert cli.main(["compare", "--set", f"samples_dir={only}", "--set", f"output_dir={tmp_path / 'r'}"]) == 0
        for row in read_csv(tmp_path / "r" / "table1.csv"):
            if row["magnitude_ratio"] != "NA":
                assert float(row["magnitude_ratio"]) == 1.0 and float(row["width_ratio"]) == 1.0

    def test_compare_report(self, fits, small_dataset, tmp_path):
        data_root = small_dataset.parent
        args = ["compare", "--set", f"samples_dir={fits}", "--set", f"output_dir={tmp_path}",
                "--set", f"data_dir={data_root}"]
        assert cli.main(args) == cli.EXIT_OK
        for name in ("table1.csv", "intervals.csv", "intervals.png", "concentration.csv", "concentration.png"):
            assert (tmp_path / name).stat().st_size > 0
        assert (tmp_path / "intervals.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        rows = read_csv(tmp_path / "intervals.csv")
        assert all(np.isfinite(float(r["truth"])) for r in rows)
        table = {(r["family"], r["effect_type"]): r for r in read_csv(tmp_path / "table1.csv")}
        assert float(table[("FRN", "row")]["magnitude_ratio"]) == 1.0

    def test_compare_without_samples(self, tmp_path):
        assert cli.main(["compare", "--set", f"samples_dir={tmp_path}"]) == cli.EXIT_DATA
