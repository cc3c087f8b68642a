import numpy as np
import pytest

from acorsis.errors import AllReplicatesFailed, ConfigError, InvalidRho
from acorsis.simulate import (
    RepRecord, Scenario, aggregate, binomial_se, gen_design, gen_response, parse_config,
    rng_for, run_replication, run_scenario, table_rows, truth,
)

from oracles import corr


def test_design_independent():
    X = gen_design(10_000, 3, 0.0, rng_for(1, 0))
    assert abs(corr(X[:, 0], X[:, 1])) < 0.05


def test_design_ar1_lag2():
    X = gen_design(10_000, 3, 0.5, rng_for(2, 0))
    assert corr(X[:, 0], X[:, 2]) == pytest.approx(0.25, abs=0.03)
    assert np.var(X[:, 2]) == pytest.approx(1.0, abs=0.05)


def test_design_deterministic():
    a = gen_design(50, 20, 0.8, rng_for(3, 7))
    b = gen_design(50, 20, 0.8, rng_for(3, 7))
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != gen_design(50, 20, 0.8, rng_for(3, 8)).tobytes()


@pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5])
def test_design_bad_rho(rho):
    with pytest.raises(InvalidRho):
        gen_design(10, 6, rho, rng_for(0, 0))


def test_response_noise_free():
    X = gen_design(30, 8, 0.0, rng_for(4, 0))
    y, spec = gen_response("b", X, None, noise=False)
    expect = 3 * X[:, :6].sum(axis=1) + 3 * (X[:, 0] * X[:, 3] + X[:, 0] * X[:, 4]
                                             + X[:, 4] * X[:, 5])
    np.testing.assert_allclose(y, expect, rtol=1e-14)


def test_truth_sets():
    a, b, c = truth("a"), truth("b"), truth("c")
    assert a.T_M == {1, 2, 3, 4} and a.T == {1, 2, 3, 4, 5, 6}
    assert b.T_M == b.T == {1, 2, 3, 4, 5, 6}
    assert c.T_M == set() and c.T == {1, 4, 5, 6}
    for s in (a, b, c):
        assert s.T_I == {(1, 4), (1, 5), (5, 6)}
        assert s.T == s.T_M | {j for e in s.T_I for j in e}


def test_scenario_validation():
    with pytest.raises(ConfigError):
        Scenario(5, 10, 0.0, "a")
    with pytest.raises(ConfigError):
        Scenario(20, 5, 0.0, "a")
    with pytest.raises(ConfigError):
        Scenario(20, 10, 0.0, "d")
    with pytest.raises(InvalidRho):
        Scenario(20, 10, 1.0, "a")


def test_full_screen_covers():
    sc = Scenario(40, 10, 0.0, "a", seed=1, reps=1, d=10)
    assert run_replication(sc, "acor", 0).covered


def test_replication_all_methods():
    sc = Scenario(60, 30, 0.5, "b", seed=9, reps=1, d=12)
    recs = run_replication(sc, ["acor", "all_pairs", "acor+gresh", "acor+shim"], 0)
    assert [r.method for r in recs] == ["acor", "all_pairs", "acor+gresh", "acor+shim"]
    for r in recs[2:]:
        assert 0 <= r.tp_main <= 1 and 0 <= r.tp_inter <= 1
        assert r.fp_main >= 0 and r.fp_inter >= 0 and r.sh
    assert recs[1].hierarchy_complete in (True, False)


def test_replication_deterministic():
    sc = Scenario(50, 40, 0.0, "c", seed=5, reps=3, d=10)
    a = run_replication(sc, ["acor", "acor+gresh"], 2)
    b = run_replication(sc, ["acor", "acor+gresh"], 2)
    assert a == b


def test_aggregate_rates():
    recs = [RepRecord("acor", i, covered=c) for i, c in enumerate([1, 0, 1, 1])]
    m = aggregate(recs)
    assert m.coverage == 0.75 and m.reps == 4
    assert aggregate([RepRecord("acor", 0, covered=True)]).coverage == 1.0


def test_aggregate_failures():
    recs = [RepRecord("acor", 0, failed=True, error="x"), RepRecord("acor", 1, covered=True)]
    m = aggregate(recs)
    assert m.failed == 1 and m.reps == 1 and m.errors == ["x"]
    with pytest.raises(AllReplicatesFailed):
        aggregate([RepRecord("acor", 0, failed=True)])


def test_binomial_se():
    assert binomial_se(0.95, 100) == pytest.approx(0.0218, abs=1e-4)
    assert binomial_se(0.5, 100) <= 0.05


def test_scenario_thread_invariance():
    sc = Scenario(40, 30, 0.5, "a", seed=3, reps=4, d=10)
    a = run_scenario(sc, ["acor", "acor+gresh"], threads=1)
    b = run_scenario(sc, ["acor", "acor+gresh"], threads=3)
    assert table_rows(a.values()) == table_rows(b.values())


def test_sure_screening_trend():
    cov = {}
    for n in (100, 400):
        sc = Scenario(n, 100, 0.0, "a", seed=21, reps=30, d=int(n / np.log(n)))
        cov[n] = run_scenario(sc, ["acor"])["acor"].coverage
    se = binomial_se(0.5, 30)
    assert cov[400] >= cov[100] - 2 * se


def test_parse_config():
    scen, methods = parse_config("""
        # grid
        n = 50
        p = 20
        rho = 0, 0.5
        case = a, c
        seed = 4
        reps = 2
        d = 10
        methods = acor, acor+gresh
    """)
    assert len(scen) == 4 and methods == ["acor", "acor+gresh"]
    assert {(s.case, s.rho) for s in scen} == {("a", 0.0), ("a", 0.5), ("c", 0.0), ("c", 0.5)}
    assert all(s.screen_d == 10 for s in scen)


@pytest.mark.parametrize("text", ["n = 50\n", "n = x\np = 10\n", "n=50\np=10\nfoo=1\n",
                                  "n=50\np=10\nmethods=lasso\n", "n=50\np=10\nrho=2\n",
                                  "garbage without equals\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_table_shapes():
    sc = Scenario(40, 20, 0.0, "b", seed=1, reps=2, d=8)
    res = run_scenario(sc, ["acor", "acor+shim"])
    rows = table_rows(res.values())
    assert len(rows["table1"]) == 3 and len(rows["table2"]) == 2 and len(rows["table3"]) == 2
    assert rows["table1"][0].split("\t")[:3] == ["method", "case", "rho"]
