"""Monte-Carlo harness for screening and selection under AR(1) designs.

Each replicate draws from its own Philox stream keyed by ``(seed, rep)``,
so replicates can run in any order or concurrently and still give the same
numbers.
"""

from __future__ import annotations

import configparser
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import standardize
from .errors import AcorsisError, AllReplicatesFailed, ConfigError, InvalidRho
from .penalize import GRESH, SHIM, check_sh, lambda_path_gic
from .screening import acor_all, all_pairs_sis, screen_size, shrunk_variable_set

log = logging.getLogger(__name__)

CASES = ("a", "b", "c")
METHODS = ("acor", "all_pairs", "acor+gresh", "acor+shim")
TRUE_INTERACTIONS = ((1, 4), (1, 5), (5, 6))
SIGNAL = 3.0
_MAINS = {"a": (1, 2, 3, 4), "b": (1, 2, 3, 4, 5, 6), "c": ()}


@dataclass(frozen=True)
class Scenario:
    n: int
    p: int
    rho: float
    case: str
    seed: int = 0
    reps: int = 100
    gamma: float | None = None
    d: int | None = None

    def __post_init__(self):
        if self.n < 10 or self.p < 6 or self.reps < 1:
            raise ConfigError(f"need n >= 10, p >= 6, reps >= 1 (got {self.n}, {self.p}, {self.reps})")
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}")
        if not 0.0 <= self.rho < 1.0:
            raise InvalidRho(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def screen_d(self) -> int:
        return screen_size(self.n, self.gamma, self.d)


@dataclass(frozen=True)
class TruthSpec:
    T_M: frozenset
    T_I: frozenset
    T: frozenset
    beta_main: dict


def truth(case: str) -> TruthSpec:
    mains = _MAINS[case]
    inter = frozenset(TRUE_INTERACTIONS)
    T = frozenset(mains) | {j for e in inter for j in e}
    return TruthSpec(frozenset(mains), inter, T, {j: SIGNAL for j in mains})


def rng_for(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


def gen_design(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows with ``cov(x_j, x_k) = rho^|j-k|`` via the AR(1) recursion."""
    if not 0.0 <= rho < 1.0:
        raise InvalidRho(f"rho must lie in [0, 1), got {rho}")
    X = rng.standard_normal((n, p))
    if rho:
        s = math.sqrt(1.0 - rho * rho)
        for j in range(1, p):
            X[:, j] *= s
            X[:, j] += rho * X[:, j - 1]
    return X


def gen_response(case: str, X: np.ndarray, rng: np.random.Generator, noise: bool = True):
    """Quadratic response with three interactions of size 3 plus N(0,1) noise."""
    if X.shape[1] < 6:
        raise ConfigError("need at least 6 variables")
    spec = truth(case)
    y = np.zeros(X.shape[0])
    for j, b in spec.beta_main.items():
        y += b * X[:, j - 1]
    for j, k in TRUE_INTERACTIONS:
        y += SIGNAL * X[:, j - 1] * X[:, k - 1]
    if noise:
        y += rng.standard_normal(X.shape[0])
    return y, spec


@dataclass
class RepRecord:
    method: str
    rep: int
    failed: bool = False
    error: str = ""
    covered: bool | None = None
    tp_main: float | None = None
    tp_inter: float | None = None
    fp_main: int | None = None
    fp_inter: int | None = None
    sh: bool | None = None
    hierarchy_complete: bool | None = None


def _selection_metrics(rec, model, spec):
    mains = set(model.support_main)
    inter = set(model.support_inter)
    rec.tp_main = len(mains & spec.T) / len(spec.T)
    rec.fp_main = len(mains - spec.T)
    rec.tp_inter = len(inter & spec.T_I) / len(spec.T_I)
    rec.fp_inter = len(inter - spec.T_I)
    rec.sh = check_sh(model).satisfied


def run_replication(sc: Scenario, method, rep: int, backend=None, threads: int = 1):
    """One replicate for one method (a string) or several (a sequence sharing
    the data and the screening pass)."""
    single = isinstance(method, str)
    methods = [method] if single else list(method)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    rng = rng_for(sc.seed, rep)
    X = gen_design(sc.n, sc.p, sc.rho, rng)
    y, spec = gen_response(sc.case, X, rng)
    ds = standardize(y, X)
    del X
    d = sc.screen_d
    out = []
    S = None
    for m in methods:
        rec = RepRecord(m, rep)
        try:
            if m == "all_pairs":
                es = all_pairs_sis(ds, d, backend=backend)
                rec.covered = spec.T <= es.variables()
                rec.hierarchy_complete = es.hierarchy_complete()
            else:
                if S is None:
                    S = shrunk_variable_set(acor_all(ds, threads, backend), d=d)
                rec.covered = spec.T <= set(S.indices)
                if m != "acor":
                    res = lambda_path_gic(ds, S, GRESH if m == "acor+gresh" else SHIM,
                                          backend=backend)
                    _selection_metrics(rec, res.best, spec)
        except (AcorsisError, np.linalg.LinAlgError) as exc:
            rec.failed, rec.error = True, f"{type(exc).__name__}: {exc}"
            log.warning("rep %d %s failed: %s", rep, m, rec.error)
        out.append(rec)
    return out[0] if single else out


@dataclass
class ScenarioMetrics:
    method: str
    case: str
    rho: float
    n: int
    p: int
    d: int
    reps: int
    failed: int
    coverage: float
    tp_main: float | None = None
    tp_inter: float | None = None
    fp_main: float | None = None
    fp_inter: float | None = None
    sh_rate: float | None = None
    hierarchy_incomplete: float | None = None
    errors: list = field(default_factory=list, repr=False)

    @property
    def coverage_se(self) -> float:
        return binomial_se(self.coverage, self.reps)


def binomial_se(rate: float, reps: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / reps)


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate(records, sc: Scenario | None = None, method: str | None = None) -> ScenarioMetrics:
    """Fold replicate records (in ``rep`` order) into rates and means."""
    records = sorted(records, key=lambda r: r.rep)
    ok = [r for r in records if not r.failed]
    if not ok:
        raise AllReplicatesFailed(f"all {len(records)} replicates failed")
    method = method or ok[0].method
    hc = [r.hierarchy_complete for r in ok if r.hierarchy_complete is not None]
    sh = [r.sh for r in ok if r.sh is not None]
    return ScenarioMetrics(
        method=method,
        case=sc.case if sc else "",
        rho=sc.rho if sc else float("nan"),
        n=sc.n if sc else 0,
        p=sc.p if sc else 0,
        d=sc.screen_d if sc else 0,
        reps=len(ok),
        failed=len(records) - len(ok),
        coverage=_mean([float(r.covered) for r in ok if r.covered is not None]) or 0.0,
        tp_main=_mean([r.tp_main for r in ok]),
        tp_inter=_mean([r.tp_inter for r in ok]),
        fp_main=_mean([r.fp_main for r in ok]),
        fp_inter=_mean([r.fp_inter for r in ok]),
        sh_rate=float(np.mean(sh)) if sh else None,
        hierarchy_incomplete=1.0 - float(np.mean(hc)) if hc else None,
        errors=[r.error for r in records if r.failed],
    )


def run_scenario(sc: Scenario, methods=METHODS, threads: int = 1, backend=None) -> dict:
    """All replicates of ``sc``; returns ``{method: ScenarioMetrics}``.

    With ``threads > 1`` replicates run on a thread pool (the kernels drop
    the GIL); the fold is in rep order either way.
    """
    methods = list(methods)

    def one(rep):
        return run_replication(sc, methods, rep, backend=backend)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_rep = list(pool.map(one, range(sc.reps)))
    else:
        per_rep = [one(rep) for rep in range(sc.reps)]
    return {m: aggregate([recs[i] for recs in per_rep], sc, m) for i, m in enumerate(methods)}


# ---------------------------------------------------------------------------
# config and tables


def _list(value, conv):
    return [conv(v.strip()) for v in value.replace(";", ",").split(",") if v.strip()]


def parse_config(text: str) -> tuple[list, list]:
    """Key-value scenario file.  ``rho`` and ``case`` may be comma lists;
    the grid of all combinations is returned with the method list."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    sec = cp["scenario"]
    known = {"n", "p", "rho", "case", "seed", "reps", "gamma", "d", "methods", "method"}
    extra = set(sec) - known
    if extra:
        raise ConfigError(f"unknown keys: {', '.join(sorted(extra))}")
    try:
        n = int(sec["n"])
        p = int(sec["p"])
        rhos = _list(sec.get("rho", "0"), float)
        cases = _list(sec.get("case", "a"), str.lower)
        seed = int(sec.get("seed", "0"))
        reps = int(sec.get("reps", "100"))
        gamma = float(sec["gamma"]) if "gamma" in sec else None
        d = int(sec["d"]) if "d" in sec else None
        methods = _list(sec.get("methods", sec.get("method", "acor")), str.lower)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    try:
        scenarios = [Scenario(n, p, rho, case, seed, reps, gamma, d)
                     for case in cases for rho in rhos]
    except InvalidRho as exc:
        raise ConfigError(str(exc)) from exc
    return scenarios, methods


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


TABLE_COLUMNS = {
    "table1": ("method", "case", "rho", "n", "p", "d", "reps", "failed", "coverage", "se"),
    "table2": ("method", "case", "rho", "reps", "failed", "tp_main", "tp_inter",
               "fp_main", "fp_inter"),
    "table3": ("method", "case", "rho", "reps", "failed", "sh_rate"),
}


def table_rows(metrics) -> dict:
    """TSV lines for the coverage, true/false-positive and hierarchy tables."""
    out = {k: ["\t".join(v)] for k, v in TABLE_COLUMNS.items()}
    for m in metrics:
        key = (m.method, m.case, f"{m.rho:.2f}")
        out["table1"].append("\t".join(key + tuple(_fmt(v) for v in (
            m.n, m.p, m.d, m.reps, m.failed, m.coverage, m.coverage_se))))
        if m.tp_main is not None:
            out["table2"].append("\t".join(key + tuple(_fmt(v) for v in (
                m.reps, m.failed, m.tp_main, m.tp_inter, m.fp_main, m.fp_inter))))
            out["table3"].append("\t".join(key + tuple(_fmt(v) for v in (
                m.reps, m.failed, m.sh_rate))))
    return out
