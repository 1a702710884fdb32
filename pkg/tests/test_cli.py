import json

import numpy as np
import pytest

from infmc.cli import main
from infmc.models import load_dataset


class TestGaussCommand:
    def test_writes_metrics_csv(self, tmp_path, capsys):
        out = tmp_path / "gauss.csv"
        code = main([
            "gauss", "--seed", "42", "--budgets", "200,400", "--replications", "2",
            "--output", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("experiment,method,budget")
        assert len(lines) == 9

    def test_seed_is_mandatory(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["gauss", "--output", str(tmp_path / "x.csv")])

    def test_config_file_drives_run(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "schema_version = 1\nexperiment = gauss-centered\nseed = 1\n"
            "budgets = 200\nreplications = 2\nmethod = plain\n"
        )
        out = tmp_path / "from_config.csv"
        code = main(["gauss", "--seed", "1", "--config", str(cfg), "--output", str(out)])
        assert code == 0
        assert out.exists()


class TestDmmCommand:
    def test_writes_metrics_and_traces(self, tmp_path):
        out = tmp_path / "dmm.csv"
        traces = tmp_path / "dmm_traces.json"
        code = main([
            "dmm", "--seed", "3", "--budgets", "40", "--replications", "2",
            "--generations", "2", "--data-count", "20",
            "--output", str(out), "--traces", str(traces),
        ])
        assert code == 0
        assert out.exists()
        payload = json.loads(traces.read_text())
        assert payload["schema_version"] == 1
        assert len(payload["runs"]) == 2
        run = payload["runs"][0]
        assert run["plain"]["block_evals"] == run["inflated"]["block_evals"]


class TestTheoremsCommand:
    def test_passing_suite_exits_zero(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["theorems", "--seed", "9", "--instances", "25", "--output", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["passed"] is True
        assert all(c["passed"] for c in payload["checks"])


class TestEmitDataCommand:
    def test_round_trips_through_loader(self, tmp_path):
        out = tmp_path / "data.txt"
        code = main([
            "emit-data", "--seed", "7", "--kind", "student-t", "--means=-1.5,2.5",
            "--count", "60", "--output", str(out),
        ])
        assert code == 0
        ds = load_dataset(out)
        assert ds.kind == "student-t"
        assert ds.seed == 7
        assert ds.true_means == (-1.5, 2.5)
        assert ds.observations.size == 60
        assert np.isfinite(ds.observations).all()
