import csv
import io

import numpy as np
import pytest

from ahom import cli
from ahom.cg import ConvergenceError
from ahom.sweep import CSV_HEADER, SUMMARY_HEADER, SweepConfig, default_truth, fit_slope, \
    run_sweep, summarize, summary_path, write_rows
from oracles import synthetic_line


def test_valid_hier_config():
    args = cli.parse_args("hier --d 2 --n 8 --law bernoulli:1,9 --seed 7 --reps 30".split())
    cfg = cli.make_config(args)
    assert (cfg.method, cfg.d, cfg.levels, cfg.seed, cfg.reps) == ("hier", 2, [8], 7, 30)
    assert cfg.seeds() == list(range(7, 37))


def test_eps_too_large_rejected():
    args = cli.parse_args("hier --d 2 --n 4 --eps 0.3".split())
    with pytest.raises(cli.ConfigError):
        cli.make_config(args)
    assert cli.main("hier --d 2 --n 4 --eps 0.3".split()) == cli.EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    "hier --n 4 --law gamma:1".split(),
    "hier --n 4 --n-range 5:3".split(),
    "hier".split(),
    "parabolic --half-factor maybe --L 4".split(),
    "frobnicate --n 3".split(),
])
def test_config_errors_exit_2(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert capsys.readouterr().err


def test_config_file_and_flags_merge(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# sweep settings\nn = 5\nseed = 3\nlaw = bernoulli:1,4\nreps=2\n")
    cfg = cli.make_config(cli.parse_args(["hier", "--config", str(path), "--seed", "11"]))
    assert cfg.seed == 11 and cfg.levels == [5] and cfg.law == "bernoulli:1,4" and cfg.reps == 2


def test_config_file_unknown_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("L = 5\n")
    assert cli.main(["hier", "--config", str(path)]) == cli.EXIT_CONFIG


def test_nonconvergence_exit_3(monkeypatch, capsys):
    def boom(cfg):
        raise ConvergenceError("no luck", residual=1.0, iterations=5, level=2)
    monkeypatch.setattr(cli, "run_sweep", boom)
    assert cli.main("hier --n 4".split()) == cli.EXIT_NONCONVERGENCE
    assert "converge" in capsys.readouterr().err


def test_tiny_iteration_cap_raises():
    cfg = SweepConfig("hier", [5], extra={})
    from ahom.cg import SolveParams
    from ahom.env import Environment, parse_law
    from ahom.hier import make_plan, run_hier
    with pytest.raises(ConvergenceError):
        run_hier(Environment(parse_law(cfg.law), 2, 0), None, make_plan(2, 5),
                 SolveParams(1.0, 1e-12, 3))


def _csv(tmp_path, argv):
    out = tmp_path / "rows.csv"
    assert cli.main(argv + ["--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    with open(summary_path(str(out))) as fh:
        summary = list(csv.reader(fh))
    return rows, summary


def test_csv_schema_and_summary(tmp_path):
    rows, summary = _csv(tmp_path, "hier --n-range 3:5 --reps 2 --seed 1".split())
    assert rows[0] == CSV_HEADER
    assert ",".join(rows[0]) == "method,d,n,seed,estimate,sigma2_stat,abs_error,work_units,wall_seconds"
    assert [(r[2], r[3]) for r in rows[1:]] == [(str(n), str(s)) for n in (3, 4, 5) for s in (1, 2)]
    for r in rows[1:]:
        assert int(r[7]) > 0 and float(r[8]) >= 0
        assert np.isclose(float(r[6]), abs(float(r[4]) - 3.0))
    assert summary[0] == SUMMARY_HEADER
    kinds = [r[0] for r in summary[1:]]
    assert kinds == ["level"] * 3 + ["error_fit", "work_fit"]
    assert summary_path("x.csv") == "x.summary.csv"


def test_deterministic_except_wall_time(tmp_path):
    argv = "parabolic --L-range 2:3 --reps 2".split()
    a, _ = _csv(tmp_path, argv)
    b, _ = _csv(tmp_path, argv)
    assert [r[:-1] for r in a] == [r[:-1] for r in b]


def test_workers_do_not_change_rows():
    base = dict(method="hier", levels=[4, 3], reps=3)
    serial = run_sweep(SweepConfig(**base))
    pooled = run_sweep(SweepConfig(**base, workers=2))

    def text(results, cfg):
        buf = io.StringIO()
        write_rows(cfg, results, buf)
        return [line.rsplit(",", 1)[0] for line in buf.getvalue().splitlines()]
    cfg = SweepConfig(**base)
    assert text(serial, cfg) == text(pooled, cfg)
    assert [(lv, s) for lv, s, _ in serial] == [(3, 0), (3, 1), (3, 2), (4, 0), (4, 1), (4, 2)]


def test_abs_error_empty_without_truth():
    cfg = SweepConfig("hier", [3], d=2, law="uniform:1,2")
    assert default_truth("uniform:1,2", 2) is None
    buf = io.StringIO()
    write_rows(cfg, run_sweep(cfg), buf)
    assert buf.getvalue().splitlines()[1].split(",")[6] == ""


def test_truth_rules():
    assert default_truth("bernoulli:1,9", 2) == pytest.approx(3.0)
    assert default_truth("bernoulli:1,9", 3) is None
    assert default_truth("constant:2.5", 3) == 2.5


def test_mc_and_chain_commands(tmp_path, capsys):
    rows, _ = _csv(tmp_path, "mc --N 200 --t 4,8".split())
    assert [r[2] for r in rows[1:]] == ["4", "8"]
    assert cli.main("chain-verify --trials 4 --states 6".split()) == 0
    assert "ok" in capsys.readouterr().err


def test_fit_slope_exact_line():
    x = np.arange(6.0)
    slope, intercept, ci = fit_slope(np.column_stack([x, 2 * x + 1]))
    assert np.isclose(slope, 2) and np.isclose(intercept, 1) and ci < 1e-12


@pytest.mark.parametrize("pts", [[(0, 1), (1, 3)], [(1, 0), (1, 1), (1, 2)], [1, 2, 3]])
def test_fit_slope_rejects(pts):
    with pytest.raises(ValueError):
        fit_slope(pts)


def test_fit_slope_interval_coverage():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(100):
        slope, _, ci = fit_slope(synthetic_line(rng, -1.0, 1.0))
        hits += abs(slope + 1.0) <= ci
    assert hits >= 90


def test_summary_slopes_on_synthetic_rows():
    from ahom.report import EstimateReport
    cfg = SweepConfig("hier", [4, 5, 6], truth=0.0)
    results = [(n, s, EstimateReport("hier", s, 2.0 ** -n * (1 + 0.0 * s), 0.0, 4 ** n))
               for n in (4, 5, 6) for s in range(2)]
    summ = summarize(cfg, results)
    assert np.isclose(summ.error_fit[0], -1) and np.isclose(summ.work_fit[0], 2)
