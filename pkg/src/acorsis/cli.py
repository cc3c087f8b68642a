"""Command-line entry point: ``acorsis {screen,fit,simulate}``.

Reports are plain text: ``key<TAB>value`` lines followed by TSV blocks that
start with a ``[name]`` line.  Exit codes: 0 ok, 2 malformed CSV,
3 degenerate column or response, 4 invalid screening size, 5 optimizer
failure, 6 bad simulation config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import BINOMIAL, FAMILIES, GAUSSIAN, standardize
from .errors import (
    AllReplicatesFailed,
    ConfigError,
    DegenerateBinaryResponse,
    DimensionMismatch,
    InvalidGamma,
    MaxSweepsExceeded,
    ZeroVariance,
    ZeroVarianceColumn,
)

EXIT_CSV, EXIT_DEGENERATE, EXIT_GAMMA, EXIT_OPTIMIZER, EXIT_CONFIG = 2, 3, 4, 5, 6
NA_TOKENS = {"", "na", "nan", "null", "none", "n/a"}

log = logging.getLogger("acorsis")


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


# ---------------------------------------------------------------------------
# CSV


def read_csv(path):
    """Header and float matrix from a comma-separated file with a header row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise CliError(EXIT_CSV, f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise CliError(EXIT_CSV, f"{path}: need a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header) or any(not h for h in header):
        raise CliError(EXIT_CSV, f"{path}: header names must be unique and non-empty")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CliError(EXIT_CSV, f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in NA_TOKENS:
                raise CliError(EXIT_CSV, f"{path}:{i}: missing value in column {header[j]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise CliError(EXIT_CSV, f"{path}:{i}: non-numeric value {cell!r} "
                                         f"in column {header[j]!r}") from None
            if not math.isfinite(v):
                raise CliError(EXIT_CSV, f"{path}:{i}: non-finite value in column {header[j]!r}")
            data[i - 2, j] = v
    return header, data


def write_csv(path_or_buf, header, data):
    """Inverse of read_csv; floats are written with ``repr`` so they round-trip."""
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.asarray(data, dtype=np.float64):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def load_dataset(path, response, family, reference=None):
    header, data = read_csv(path)
    if response not in header:
        raise CliError(EXIT_CSV, f"{path}: response column {response!r} not found")
    jy = header.index(response)
    names = [h for i, h in enumerate(header) if i != jy]
    if not names:
        raise CliError(EXIT_CSV, f"{path}: no predictor columns")
    X = np.delete(data, jy, axis=1)
    try:
        ds = standardize(data[:, jy], X, family, names, response, reference=reference)
    except ZeroVarianceColumn as exc:
        raise CliError(EXIT_DEGENERATE, f"degenerate column: {exc.name or exc.j}") from exc
    except (ZeroVariance, DegenerateBinaryResponse) as exc:
        raise CliError(EXIT_DEGENERATE, f"degenerate response {response!r}: {exc}") from exc
    except DimensionMismatch as exc:
        raise CliError(EXIT_CSV, str(exc)) from exc
    return ds


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# reports


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Report:
    def __init__(self, command, params, inputs=()):
        self.lines = []
        self.t0 = time.time()
        self.kv("command", command)
        self.kv("version", __version__)
        for k, v in params.items():
            self.kv(f"param.{k}", "NA" if v is None else _num(v))
        for p in inputs:
            self.kv(f"input.sha256.{Path(p).name}", file_digest(p))

    def kv(self, key, value):
        self.lines.append(f"{key}\t{_num(value)}")

    def table(self, name, columns, rows):
        self.lines.append(f"[{name}]")
        self.lines.append("\t".join(columns))
        for r in rows:
            self.lines.append("\t".join(_num(v) for v in r))
        self.lines.append(f"[/{name}]")

    def render(self, warnings=()):
        tail = [f"wall_clock_s\t{time.time() - self.t0:.3f}"]
        tail += [f"warning\t{w}" for w in warnings]
        return "\n".join(self.lines[:2] + tail + self.lines[2:]) + "\n"


def _emit(text, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    from .screening import default_threads
    return default_threads()


def _screen(ds, args, report):
    from .screening import acor_all, shrunk_variable_set

    scores = acor_all(ds, _threads(args))
    try:
        S = shrunk_variable_set(scores, gamma=args.gamma, d=args.d)
    except InvalidGamma as exc:
        raise CliError(EXIT_GAMMA, str(exc)) from exc
    report.kv("n", ds.n)
    report.kv("p", ds.p)
    report.kv("d", S.d)
    report.kv("gamma", S.gamma if S.gamma is not None else "NA")
    report.kv("screened_size", len(S))
    report.kv("zero_variance_effects", scores.zero_variance)
    return scores, S


# ---------------------------------------------------------------------------
# commands


def cmd_screen(args):
    ds = load_dataset(args.data, args.response, args.family)
    report = Report("screen", {"response": args.response, "family": args.family,
                               "gamma": args.gamma, "d": args.d,
                               "threads": _threads(args)}, [args.data])
    scores, S = _screen(ds, args, report)
    rank = np.empty(ds.p, dtype=np.int64)
    rank[scores.ranking() - 1] = np.arange(1, ds.p + 1)
    names = ("(main)",) + ds.names
    report.table("scores", ("variable", "name", "score", "partner", "rank", "screened"),
                 [(j, ds.names[j - 1], float(scores.scores[j - 1]),
                   names[scores.partner[j - 1]], int(rank[j - 1]), j in S)
                  for j in range(1, ds.p + 1)])
    report.table("screened_set", ("variable", "name"),
                 [(j, ds.names[j - 1]) for j in S.indices])
    return report


def _coef_rows(model, ds):
    rows = [("(intercept)", "", model.beta0)]
    rows += [(ds.names[j - 1], "", b) for j, b in sorted(model.main.items()) if b]
    rows += [(ds.names[j - 1], ds.names[k - 1], b)
             for (j, k), b in sorted(model.inter.items()) if b]
    return rows


def cmd_fit(args):
    from .penalize import check_sh, default_kappa, lambda_path_gic, logistic_select, \
        prediction_deviance

    ds = load_dataset(args.data, args.response, args.family)
    inputs = [args.data] + ([args.test_data] if args.test_data else [])
    report = Report("fit", {"response": args.response, "family": args.family,
                            "method": args.method, "gamma": args.gamma, "d": args.d,
                            "kappa": args.kappa, "seed": args.seed,
                            "threads": _threads(args)}, inputs)
    _, S = _screen(ds, args, report)
    kappa = default_kappa(ds.n, ds.p) if args.kappa == "auto" else float(args.kappa)
    report.kv("kappa", kappa)
    try:
        if ds.family == BINOMIAL:
            model = logistic_select(ds, S, kappa=kappa)
            report.kv("method_used", "logistic")
            report.kv("train_deviance", model.extra["deviance"])
        else:
            res = lambda_path_gic(ds, S, args.method, kappa=kappa)
            model = res.best
            report.kv("method_used", args.method)
            report.kv("lambda_chosen", res.lambda_chosen)
            report.kv("sigma2_hat", float(res.sigma2[res.chosen]))
            report.kv("converged", model.converged)
    except MaxSweepsExceeded as exc:
        raise CliError(EXIT_OPTIMIZER, f"optimizer failure: {exc}") from exc
    except np.linalg.LinAlgError as exc:
        raise CliError(EXIT_OPTIMIZER, f"optimizer failure: {exc}") from exc
    sh = check_sh(model)
    report.kv("df", model.df)
    report.kv("n_main", model.n_main)
    report.kv("n_inter", model.n_inter)
    report.kv("sh_satisfied", sh.satisfied)
    report.kv("sh_violations", ";".join(f"{j}:{k}" for j, k in sh.violations) or "none")
    if ds.family == BINOMIAL and args.test_data:
        test = load_dataset(args.test_data, args.response, args.family, reference=ds)
        report.kv("test_n", test.n)
        report.kv("test_deviance", prediction_deviance(model, test))
    report.table("coefficients", ("term1", "term2", "estimate"), _coef_rows(model, ds))
    if ds.family == BINOMIAL:
        pv = model.extra["pvalues"]
        report.table("pvalues", ("term1", "term2", "p_value"),
                     [(ds.names[t - 1], "", v) if isinstance(t, int)
                      else (ds.names[t[0] - 1], ds.names[t[1] - 1], v)
                      for t, v in pv.items()])
    else:
        report.table("gic_path", ("lambda1", "loglik", "df", "sigma2", "gic", "converged"),
                     res.rows())
    return report


def cmd_simulate(args):
    from .simulate import parse_config, run_scenario, table_rows

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from exc
    try:
        scenarios, methods = parse_config(text)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"config error: {exc}") from exc
    try:
        d = scenarios[0].screen_d
    except InvalidGamma as exc:
        raise CliError(EXIT_GAMMA, str(exc)) from exc
    sc0 = scenarios[0]
    threads = _threads(args)
    report = Report("simulate", {"n": sc0.n, "p": sc0.p, "seed": sc0.seed, "reps": sc0.reps,
                                 "gamma": sc0.gamma, "d": d, "methods": ",".join(methods),
                                 "threads": threads}, [args.config])
    metrics = []
    failed = 0
    for sc in scenarios:
        try:
            res = run_scenario(sc, methods, threads=threads)
        except AllReplicatesFailed as exc:
            raise CliError(EXIT_OPTIMIZER, f"case {sc.case} rho {sc.rho}: {exc}") from exc
        for m in methods:
            metrics.append(res[m])
            failed += res[m].failed
            report.kv(f"failed.{m}.{sc.case}.{sc.rho:.2f}", res[m].failed)
    report.kv("failed_total", failed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, lines in table_rows(metrics).items():
        (out / f"{name}.tsv").write_text(
            "# manifest: manifest.txt\n" + "\n".join(lines) + "\n", encoding="utf-8")
    report.kv("tables", "table1.tsv,table2.tsv,table3.tsv")
    args.out = str(out / "manifest.txt")
    return report


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="acorsis", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_opts(p):
        p.add_argument("--data", required=True)
        p.add_argument("--response", required=True)
        p.add_argument("--family", choices=FAMILIES, default=GAUSSIAN)
        g = p.add_mutually_exclusive_group()
        g.add_argument("--gamma", type=float)
        g.add_argument("--d", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)

    p = sub.add_parser("screen", help="aggregated-correlation screening")
    data_opts(p)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("fit", help="screen, then penalized selection tuned by GIC")
    data_opts(p)
    p.add_argument("--method", choices=("gresh", "shim"), default="gresh")
    p.add_argument("--kappa", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-data", dest="test_data")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte-Carlo coverage / selection tables")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "kappa", "auto") != "auto":
        try:
            float(args.kappa)
        except ValueError:
            print("acorsis: --kappa must be a number or 'auto'", file=sys.stderr)
            return EXIT_GAMMA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="acorsis: %(levelname)s: %(message)s")
    collector = _WarningCollector()
    root = logging.getLogger("acorsis")
    root.addHandler(collector)
    try:
        report = args.func(args)
    except CliError as exc:
        print(f"acorsis: {exc}", file=sys.stderr)
        return exc.code
    finally:
        root.removeHandler(collector)
    _emit(report.render(collector.messages), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
