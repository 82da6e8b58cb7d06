import csv

import numpy as np
import pytest

from bbstab import harness as H
from bbstab import problems as P
from bbstab.core import DeltaPolicy, SolverConfig
from bbstab.solver import gradient_step_x1, run_from_pair


def _quad_result(delta="inf", n=10):
    prob = P.diagonal_quadratic(np.arange(1.0, n + 1))
    return H.solve_instance(H.Instance(prob, True), np.full(n, -50.0), None, SolverConfig(delta_policy=delta))


def test_trace_csv_header_and_rows(tmp_path):
    res = _quad_result("auto:0.25")
    path = tmp_path / "t.csv"
    H.write_trace_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,g_norm,s_norm,alpha,branch,region,q_k"
    assert len(lines) - 1 == res.iterations
    first = lines[1].split(",")
    assert first[4] == "Bootstrap" and first[5] == "" and first[6] == ""


def test_trace_csv_short_run(tmp_path):
    prob = P.diagonal_quadratic([1.0, 2.0])
    x1 = gradient_step_x1(prob, np.zeros(2)).x1
    res = run_from_pair(prob, np.zeros(2), x1, SolverConfig())
    assert res.converged and res.iterations == 3
    H.write_trace_csv(res, tmp_path / "t.csv")
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 4


def test_trace_csv_round_trip(tmp_path):
    res = _quad_result(DeltaPolicy.fixed(3.0))
    assert any(r.region is not None for r in res.trace)
    path = tmp_path / "t.csv"
    H.write_trace_csv(res, path)
    assert H.read_trace_csv(path) == res.trace.records()


def test_trace_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n")
    with pytest.raises(ValueError):
        H.read_trace_csv(path)


def test_infinite_radius_has_no_stab_rows(tmp_path):
    H.write_trace_csv(_quad_result("inf"), tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as fh:
        assert all(row["branch"] != "StabCap" for row in csv.DictReader(fh))


def test_summary_row_fields():
    res = _quad_result("auto:0.25")
    row = dict(zip(H.SUMMARY_HEADER, H.summary_row(res)))
    assert row["problem"] == "diag:n=10" and row["n"] == 10
    assert row["solver"] == "BB1stab(c=0.25)" and row["status"] == "Converged"
    assert row["iterations"] == res.iterations
    assert float(row["delta"]) == res.delta_used


def test_run_experiment_writes_outputs(tmp_path):
    spec = H.ExperimentSpec(
        problem="diag:n=10",
        configs=[SolverConfig(), SolverConfig(delta_policy="auto:0.25")],
        out_dir=str(tmp_path),
    )
    results = H.run_experiment(spec)
    assert all(r.converged for r in results)
    for res in results:
        assert H.bb_stepsize_violations(res, P.diagonal_quadratic(np.arange(1.0, 11.0)).spectral_bounds) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert "summary.csv" in files and len(files) == 3
    rows = H.read_summary_csv(tmp_path / "summary.csv")
    assert [r["solver"] for r in rows] == ["BB1", "BB1stab(c=0.25)"]


def test_summary_is_deterministic(tmp_path):
    spec_text = "problem = randdiag:n=30,lo=1,hi=100,seed=3\nrules = bb1, bb2\ndeltas = inf, auto:0.25\n"
    outputs = []
    for name in ("a", "b"):
        spec = H.parse_spec_file(spec_text + f"out = {tmp_path / name}\n")
        H.run_experiment(spec)
        outputs.append((tmp_path / name / "summary.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_counterexample_experiment_cycles():
    spec = H.ExperimentSpec(problem="counterexample", x0="cycle", configs=[SolverConfig(max_iterations=200)])
    (res,) = H.run_experiment(spec)
    assert res.status.status.value == "IterationLimit"
    (entry,) = H.check_cycle()
    assert entry["passed"] and entry["measured"] == 4


def test_parse_spec_file():
    spec = H.parse_spec_file(
        "# comment\nproblem = raydan:n=10\nx0 = const:-1\nrules = bb1,bb2\ndeltas = inf, 2 , auto:0.3\nmaxit = 50\ntol = 1e-8\nseed = 4\n"
    )
    assert len(spec.configs) == 6
    assert spec.configs[-1].label == "BB2stab(c=0.3)"
    assert spec.configs[0].max_iterations == 50 and spec.configs[0].rel_tol == 1e-8
    assert spec.x0 == "const:-1" and spec.seed == 4


@pytest.mark.parametrize(
    "text", ["problem raydan", "colour = red\nproblem = raydan", "problem = raydan\nmatrix = a.mtx", "x0 = zero"]
)
def test_parse_spec_file_rejects(text):
    with pytest.raises(ValueError):
        H.parse_spec_file(text)


def test_parse_x0(tmp_path):
    assert H.parse_x0("zero", 3)[0].tolist() == [0.0, 0.0, 0.0]
    assert H.parse_x0("const:-10", 2)[0].tolist() == [-10.0, -10.0]
    x0, x1 = H.parse_x0("cycle", 2)
    assert x0[0] == -P.CONSTANTS.b and x1[0] == -P.CONSTANTS.a
    path = tmp_path / "x0.txt"
    path.write_text("1\n2\n3\n")
    assert H.parse_x0(f"file:{path}", 3)[0].tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        H.parse_x0(f"file:{path}", 4)
    with pytest.raises(ValueError):
        H.parse_x0("random", 2)
    assert H.parse_x0([1.0, 2.0], 2)[1] is None


def test_load_instance(matrix_files):
    inst = H.load_instance(matrix=str(matrix_files[0]))
    assert inst.quadratic and inst.problem.spectral_bounds is not None
    assert H.load_instance("diag:n=4").quadratic
    assert not H.load_instance("raydan:n=4").quadratic
    with pytest.raises(ValueError):
        H.load_instance()
    with pytest.raises(OSError):
        H.load_instance(matrix="/nonexistent/file.mtx")


def test_profile_two_by_two():
    results = {"A": {"p1": (True, 10), "p2": (True, 30)}, "B": {"p1": (True, 20), "p2": (True, 15)}}
    curves = {c.solver: c for c in H.performance_profile(results, [1.0, 1.5, 2.0, 3.0])}
    assert curves["A"].fraction_at(1.0) == 0.5 and curves["B"].fraction_at(1.0) == 0.5
    assert curves["A"].fraction_at(2.0) == 1.0 and curves["B"].fraction_at(2.0) == 1.0


def test_profile_single_and_failing():
    (only,) = H.performance_profile({"A": {"p1": (True, 3), "p2": (True, 9)}}, [1.0, 5.0])
    assert [f for _, f in only.points] == [1.0, 1.0]
    curves = H.performance_profile({"A": {"p": (True, 3)}, "B": {"p": (False, 100)}}, [1.0, 100.0])
    assert [f for _, f in curves[1].points] == [0.0, 0.0]


def test_profile_rejects():
    with pytest.raises(ValueError):
        H.performance_profile({"A": {}})
    with pytest.raises(ValueError):
        H.performance_profile({"A": {"p": (True, 1)}, "B": {}})
    with pytest.raises(ValueError):
        H.performance_profile({"A": {"p": (True, 1)}}, [0.5])


def test_profile_csv(tmp_path):
    curves = H.performance_profile({"A": {"p": (True, 1)}}, [1.0, 2.0])
    H.write_profile_csv(curves, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines() == ["solver,tau,fraction", "A,1,1", "A,2,1"]


def test_check_suites_pass():
    report = H.check("all")
    assert report["passed"], H.report_json(report)
    assert set(report["suites"]) == set(H.SUITES)
    with pytest.raises(ValueError):
        H.check("nonsense")


def test_matrix_quadratics_converge(matrix_files):
    for path in matrix_files:
        inst = H.load_instance(matrix=str(path))
        for delta in ("inf", "auto:0.25"):
            res = H.solve_instance(inst, np.zeros(inst.problem.dimension), None, SolverConfig(delta_policy=delta))
            assert res.converged
            viol = H.region_violations(res, inst.problem.spectral_bounds)
            assert viol["contraction"] == 0 and viol["growth"] == 0 and viol["outer_after_inner"] == 0
