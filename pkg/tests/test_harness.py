import csv
import io
import json

import numpy as np
import pytest

from modalbound import harness
from modalbound.exceptions import InvalidConfigError
from modalbound.harness import Cell, ExperimentSpec, ResultTable, emit, load_table, run

TINY = dict(dim=4, n_samples=2000, replicates=2)


def test_spec_rejects_unknown_keys():
    with pytest.raises(InvalidConfigError, match="bogus"):
        ExperimentSpec.from_dict({"scenario": "table5", "bogus": 1})


@pytest.mark.parametrize("bad", [dict(scenario="nope"), dict(scenario="table5", w_grid=[]),
                                 dict(scenario="table5", replicates=0),
                                 dict(scenario="table5", w_grid=[1.5])])
def test_spec_validation(bad):
    with pytest.raises(InvalidConfigError):
        ExperimentSpec(**bad)


def test_spec_defaults():
    s = ExperimentSpec("table5")
    assert s.n_replicates == 5 and s.modality_dim == 100 and s.total_samples == 100_000
    f = ExperimentSpec("table5", fast=True)
    assert f.modality_dim == 20 and f.total_samples == 20_000
    assert ExperimentSpec("bound_suite").n_replicates == 100


def test_table5_shape_and_oracle():
    spec = ExperimentSpec("table5", w_grid=[0.0, 0.5, 1.0], dim=5, n_samples=20000, replicates=2)
    table = run(spec)
    assert table.row_labels == ["m1", "m1+m2", "m1+m2+m3", "m1+m2+m3+m4"]
    assert table.col_labels == ["0.0", "0.5", "1.0"]
    assert table.cell("m1", "0.0").mean == pytest.approx(15.0, rel=0.05)
    assert table.cell("m1", "0.0").count == 2
    assert table.passed, table.checks
    header = table.to_csv().splitlines()[0]
    assert header == "modalities,0.0,0.5,1.0"
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert len(rows) == 5 and all(len(r) == 4 for r in rows)
    mean, sd, count = rows[1][1].split(",")
    assert float(mean) == table.cell("m1", "0.0").mean and int(count) == 2


def test_default_grid_gives_4x5_csv():
    table = run(ExperimentSpec("table5", **TINY))
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert len(rows) == 5 and rows[0][1:] == ["0.0", "0.2", "0.5", "0.8", "1.0"]


def test_cell_order_independent():
    a = run(ExperimentSpec("table5", w_grid=[0.2, 0.8], **TINY))
    b = run(ExperimentSpec("table5", w_grid=[0.8, 0.2], **TINY))
    for r in a.row_labels:
        for c in a.col_labels:
            assert a.cell(r, c) == b.cell(r, c)


def test_csv_bytes_reproducible():
    spec = ExperimentSpec("sample_sweep", ratios=[0.01, 1.0], **TINY)
    assert run(spec).to_csv() == run(spec).to_csv()


def test_workers_do_not_change_results():
    spec = dict(scenario="table5", w_grid=[0.5], dim=3, n_samples=1000, replicates=2)
    assert run(ExperimentSpec(**spec)).to_csv() == run(ExperimentSpec(**spec, workers=2)).to_csv()


def test_sample_sweep_checks():
    table = run(ExperimentSpec("sample_sweep", ratios=[0.001, 0.01, 1.0], **TINY))
    assert table.checks["more_data_helps"] and table.checks["full_exact_at_ratio_1"]
    assert "full_worse_than_unimodal_at_smallest_ratio" in table.summary


def test_gamma_vs_risk_examples():
    spec = ExperimentSpec("gamma_vs_risk", w_grid=[0.0, 0.8], dim=10, n_samples=10000, replicates=2)
    table = run(spec)
    cell = table.cell("m1+m2 vs m1: gamma", "0.8")
    assert cell.mean == pytest.approx(-0.04 * 10 * 1, rel=0.15)
    assert table.cell("m1 vs m1: risk_diff", "0.0").mean == 0.0
    full = table.cell("m1+m2+m3+m4 vs m1: gamma", "0.0").mean
    assert full == pytest.approx(-30.0, rel=0.05)
    assert table.checks["sign_agreement"]


def test_gamma_vs_risk_warns_on_non_nested(caplog):
    spec = ExperimentSpec("gamma_vs_risk", w_grid=[0.5], dim=3, n_samples=1000, replicates=1,
                          pairs=[["m1", "m2"]])
    table = run(spec)
    assert table.summary["warnings"]


def test_prop1_suite():
    table = run(ExperimentSpec("prop1_suite", replicates=20))
    assert table.summary["pass_eta_M"] == 20 and table.summary["pass_gamma"] == 20


def test_prop1_zero_head_gives_zero_gamma():
    inst = harness.random_linear_instance([2, 2], 0, 50, 0.0, beta_scale=0.0)
    from modalbound.latent_quality import eta_closed_form
    from modalbound.training import erm_linear_closed_form
    cfg = inst.config
    fit_N = erm_linear_closed_form(inst.train, inst.drop_last)
    eta_N = eta_closed_form(fit_N.model.effective_matrix(inst.drop_last), cfg.A_star, cfg.beta_star, cfg.covariance)
    assert eta_N.value == 0.0


def test_bound_suite_holds():
    table = run(ExperimentSpec("bound_suite", replicates=10))
    assert all(v == 1.0 for v in table.summary["hold_fractions"].values())
    assert table.summary["appendix_le_body"] == 10


def test_bound_trial_delta_monotone():
    loose = harness.bound_trial(ExperimentSpec("bound_suite", delta=0.2), 7)["reports"]
    tight = harness.bound_trial(ExperimentSpec("bound_suite", delta=0.01), 7)["reports"]
    for k in loose:
        assert tight[k].rhs > loose[k].rhs


def test_cell_statistics():
    c = Cell.of([1.0, 3.0, None], "d", [1, 2, 3])
    assert (c.mean, c.count) == (2.0, 2) and c.sd == pytest.approx(np.sqrt(2))
    assert Cell.of([None], "d", []).count == 0


def test_json_round_trip_and_emit(tmp_path):
    table = run(ExperimentSpec("sample_sweep", ratios=[0.01, 1.0], **TINY))
    paths = emit(table, tmp_path, ("csv", "json", "svg"))
    names = sorted(p.name for p in paths)
    assert names == ["sample_sweep.csv", "sample_sweep.json", "sample_sweep.svg", "sample_sweep_long.csv"]
    assert load_table(tmp_path / "sample_sweep.json") == table
    svg = (tmp_path / "sample_sweep.svg").read_text()
    assert svg.count("<path") >= len(table.row_labels)
    data = json.loads((tmp_path / "sample_sweep.json").read_text())
    assert all(len(c["digest"]) == 16 and c["seeds"] for c in data["cells"])


def test_result_table_from_dict_equality():
    cells = {("a", "x"): Cell(1.0, 0.0, 1, "d", [0])}
    t = ResultTable("t", ["a"], ["x"], cells, summary={"k": 1}, checks={"ok": True})
    assert ResultTable.from_dict(json.loads(json.dumps(t.to_dict()))) == t


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    table = ResultTable("t", ["a"], ["x"], {("a", "x"): Cell(1.0, 0.0, 1, "d")})
    with pytest.raises(OSError):
        emit(table, blocker / "sub")
