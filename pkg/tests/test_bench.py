import numpy as np
import pytest

from rcebench.bench import (
    BenchConfig, BenchmarkReport, ConfigError, EvalSettings, aggregate, default_benchmark, read_detail_csv,
    read_report_csv, render_table, report_csv, run_benchmark, write_csv,
)
from rcebench.cli import main
from rcebench.model import TrainConfig

from conftest import dataset, make_l1
from rcebench.task import ClassificationTask

SMALL = dict(synthetic=(30, 2, 3.0), layers=(2, 4, 1), train=TrainConfig(0.1, 30, 16, 0))


def without_time(text):
    """Drop the time_s column from a report CSV."""
    out = []
    col = None
    for line in text.splitlines():
        if line.startswith("#"):
            out.append(line)
            continue
        cells = line.split(",")
        if col is None:
            col = cells.index("time_s")
        out.append(",".join(c for k, c in enumerate(cells) if k != col))
    return "\n".join(out)


@pytest.fixture(scope="module")
def small_report():
    cfg = BenchConfig(methods=("kdtree-nnce", "mce", "rnce", "wachter"),
                      evaluations=("validity", "proximity", "delta-robustness", "approx-delta", "retraining",
                                   "set-distance", "multiplicity"),
                      eval_settings=EvalSettings(retrain_variants=3, ensemble_size=2, set_perturb=2), **SMALL)
    return run_benchmark(cfg)


class TestConfig:
    def test_unknown_method(self):
        with pytest.raises(ConfigError, match="choose from"):
            BenchConfig(methods=("dice",), **SMALL)

    def test_unknown_evaluation(self):
        with pytest.raises(ConfigError, match="choose from"):
            BenchConfig(methods=("mce",), evaluations=("beauty",), **SMALL)

    def test_negative_delta(self):
        with pytest.raises(ConfigError):
            BenchConfig(methods=("mce",), delta=-1, **SMALL)

    def test_source_required(self):
        with pytest.raises(ConfigError):
            BenchConfig(methods=("mce",))


class TestReport:
    def test_columns_and_metadata(self, small_report):
        r = small_report
        assert r.columns == ["time_s", "validity_pct", "proximity_l2", "robust_pct", "approx_robust_pct",
                             "retrain_valid_pct", "set_distance", "multiplicity_pct"]
        assert [row["method"] for row in r.rows] == ["kdtree-nnce", "mce", "rnce", "wachter"]
        assert r.metadata["instance_count"] > 0
        assert len(r.details) == 4 * r.metadata["instance_count"]
        assert {"seed", "delta", "dataset_fingerprint"} <= set(r.metadata)

    def test_valid(self, small_report):
        for row in small_report.rows:
            assert row["validity_pct"] == 100.0
            for c in small_report.columns:
                if c.endswith("_pct"):
                    assert 0 <= row[c] <= 100

    def test_certified_generators(self, small_report):
        assert small_report.row("rnce")["robust_pct"] == 100.0

    def test_recompute_from_details(self, small_report, tmp_path):
        write_csv(small_report, tmp_path / "r.csv", tmp_path / "d.csv")
        rows, meta = read_report_csv(tmp_path / "r.csv")
        details = read_detail_csv(tmp_path / "d.csv")
        evals = meta["evaluations"].split(",")
        for row in rows:
            again = aggregate(details, row["method"], evals)
            for c in small_report.columns:
                assert again[c] == pytest.approx(row[c], rel=1e-15, nan_ok=True)

    def test_csv_round_trip(self, small_report, tmp_path):
        write_csv(small_report, tmp_path / "r.csv")
        rows, meta = read_report_csv(tmp_path / "r.csv")
        for got, want in zip(rows, small_report.rows):
            for c in small_report.columns:
                assert got[c] == want[c] or (np.isnan(got[c]) and np.isnan(want[c]))
        assert meta["seed"] == "0" and meta["delta"] == "0.005"

    def test_header(self, small_report):
        assert report_csv(small_report).splitlines()[0].startswith("method,time_s,validity_pct,proximity_l2,robust_pct")

    def test_deterministic_and_parallel(self):
        cfg = BenchConfig(methods=("kdtree-nnce", "mce", "stce"), evaluations=("validity", "proximity",
                          "delta-robustness", "approx-delta"), **SMALL)
        a = without_time(report_csv(run_benchmark(cfg)))
        b = without_time(report_csv(run_benchmark(cfg)))
        from dataclasses import replace
        c = without_time(report_csv(run_benchmark(replace(cfg, workers=3))))
        assert a == b == c


class TestRender:
    def report(self, **vals):
        row = {"method": "kdtree-nnce", "time_s": 0.123, "validity_pct": 100.0, "proximity_l2": 5.7561,
               "robust_pct": 51.6}
        row.update(vals)
        return BenchmarkReport(["time_s", "validity_pct", "proximity_l2", "robust_pct"], [row], {})

    def test_single_row(self):
        lines = render_table(self.report()).splitlines()
        assert len(lines) == 3
        assert lines[0].split("|")[0].strip() == "Method"
        cells = [c.strip() for c in lines[2].split("|")]
        assert cells == ["KDTreeNNCE", "0.1", "100.0", "5.76", "51.6"]

    def test_robust_fraction(self):
        assert "51.6" in render_table(self.report(robust_pct=100 * 0.516))

    def test_nan(self):
        assert "n/a" in render_table(self.report(proximity_l2=float("nan")))


def test_empty_negatives():
    t = ClassificationTask(make_l1(), dataset([[1, 1], [0.9, 0.9]]))
    r = default_benchmark(t, ["mce", "rnce"])
    assert r.metadata["instance_count"] == 0 and r.metadata["empty"] == 1
    assert all(np.isnan(row["validity_pct"]) for row in r.rows)
    assert "n/a" in render_table(r)


class TestCli:
    def test_table(self, capsys):
        assert main(["--synthetic", "blobs:20,2,3", "--layers", "2,3,1", "--epochs", "10",
                     "--methods", "kdtree-nnce,RNCE"]) == 0
        out = capsys.readouterr().out
        assert "KDTreeNNCE" in out and "RNCE" in out and "Rob. (%)" in out

    def test_csv_files(self, tmp_path):
        p, d = tmp_path / "r.csv", tmp_path / "d.csv"
        assert main(["--synthetic", "blobs:20,2,3", "--epochs", "10", "--methods", "mce", "--out", "csv",
                     "--out-path", str(p), "--detail-path", str(d)]) == 0
        rows, meta = read_report_csv(p)
        assert rows[0]["method"] == "mce" and meta["delta"] == "0.005"
        assert len(read_detail_csv(d)) == int(meta["instance_count"])

    def test_config_error(self, capsys):
        assert main(["--synthetic", "blobs:20,2,3", "--methods", "dice"]) == 2
        assert "choose from" in capsys.readouterr().err

    def test_layers_mismatch(self):
        assert main(["--synthetic", "blobs:20,2,3", "--layers", "3,2,1", "--methods", "mce"]) == 2

    def test_data_error(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("a,target\n1,0\n2,7\n")
        assert main(["--data", str(p), "--methods", "mce"]) == 3
        assert ":3:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["--data", str(tmp_path / "none.csv"), "--methods", "mce"]) == 3

    def test_usage_error(self):
        with pytest.raises(SystemExit) as e:
            main(["--methods", "mce"])
        assert e.value.code == 2
