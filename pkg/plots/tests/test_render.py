import csv
import json
from pathlib import Path

import pytest

from iurlse_plots import FigureSpec, RenderError, load_series, render
from iurlse_plots.render import main

SAMPLE = Path(__file__).parent.parent / "sample_data" / "report.csv"


def read_report(path, metric):
    """Reference parse of the report CSV, independent of the renderer."""
    series = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["metric"] != metric:
                continue
            slot = series.setdefault(row["method"], {})
            slot[int(row["t"])] = (float(row["mean"]), float(row["se"]))
    return series


class TestRenderOnSample:
    def test_exit_zero_and_outputs_exist(self, tmp_path):
        out = tmp_path / "f1.png"
        code = main(["render", "--csv", str(SAMPLE), "--metric", "f1", "--out", str(out)])
        assert code == 0
        assert out.exists() and out.stat().st_size > 0
        assert out.with_suffix(".png.json").exists()

    @pytest.mark.parametrize("metric", ["f1", "precision", "recall"])
    def test_sidecar_equals_csv_aggregates_exactly(self, tmp_path, metric):
        out = tmp_path / f"{metric}.png"
        sidecar = render(FigureSpec(csv_path=SAMPLE, metric=metric, out_path=out))
        doc = json.loads(sidecar.read_text())
        want = read_report(SAMPLE, metric)
        assert set(doc["series"]) == set(want)
        for method, data in doc["series"].items():
            for t, mean, se in zip(data["t"], data["mean"], data["se"]):
                ref_mean, ref_se = want[method][t]
                assert mean == ref_mean
                assert se == ref_se
            assert data["t"] == sorted(want[method])

    def test_four_method_sample_has_four_series(self, tmp_path):
        sidecar = render(FigureSpec(csv_path=SAMPLE, metric="f1", out_path=tmp_path / "x.png"))
        doc = json.loads(sidecar.read_text())
        assert set(doc["series"]) == {"proposed", "random", "straddle", "mile"}


class TestErrorHandling:
    def test_unknown_metric(self, tmp_path):
        code = main(["render", "--csv", str(SAMPLE), "--metric", "accuracy",
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert not (tmp_path / "x.png").exists()

    def test_empty_data_rows(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("schema_version,method,t,metric,mean,se,n\n")
        code = main(["render", "--csv", str(empty), "--metric", "f1",
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert not (tmp_path / "x.png").exists()

    def test_malformed_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("method,t\nproposed,1\n")
        with pytest.raises(RenderError, match="malformed"):
            load_series(bad, "f1")

    def test_schema_version_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("schema_version,method,t,metric,mean,se,n\n2,m,1,f1,0.5,0.0,1\n")
        with pytest.raises(RenderError, match="schema_version"):
            load_series(bad, "f1")

    def test_missing_file(self, tmp_path):
        with pytest.raises(RenderError, match="cannot read"):
            load_series(tmp_path / "nope.csv", "f1")


def test_zero_se_band_collapses_to_line(tmp_path):
    single = tmp_path / "single.csv"
    single.write_text(
        "schema_version,method,t,metric,mean,se,n\n"
        "1,proposed,1,f1,0.5,0.0,1\n"
        "1,proposed,2,f1,0.75,0.0,1\n"
    )
    sidecar = render(FigureSpec(csv_path=single, metric="f1", out_path=tmp_path / "s.png"))
    doc = json.loads(sidecar.read_text())
    assert doc["series"]["proposed"]["se"] == [0.0, 0.0]
    assert (tmp_path / "s.png").exists()
