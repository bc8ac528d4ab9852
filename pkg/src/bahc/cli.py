"""``bahc`` command-line tool.

Subcommands: ``cluster``, ``bench``, ``consensus`` and ``mi``.  Exit codes
are 0 on success, 2 for invalid arguments or inputs, 3 for numerical
failures and 4 for I/O failures.  Output files are written atomically and
contain no timestamps, so repeated runs with the same flags are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .document import HierarchyDocument, dumps, load_partition, partition_document
from .errors import (
    BahcError,
    ConfigurationError,
    InvalidArgumentError,
    NumericalError,
    UnreachableLevelError,
    UnsupportedMeasureError,
)
from .measures import mutual_info_plugin, normalized_mutual_info
from .methods import METHODS, canonical_name, prepare
from .engine import ahc
from .metrics import consensus
from .numerics import ScatterInput, scatter_from_data
from .simgen import (
    SimConfig,
    analytic_homogeneous_mi,
    homogeneous_matrix,
    mi_bias,
    run_benchmark,
    summarize,
    write_results_csv,
    write_summary_csv,
)

log = logging.getLogger("bahc")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class InputFileError(BahcError):
    """A file could not be read or parsed."""


def write_atomic(path, text: str) -> None:
    """Write `text` to `path` via a temporary file in the same directory and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_table(path) -> tuple[Optional[list[str]], np.ndarray]:
    """Numeric CSV block, with the first row taken as names when it is not numeric."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except (UnicodeDecodeError, csv.Error) as exc:
        raise InputFileError(f"cannot parse {path}: {exc}") from exc
    if not rows:
        raise InputFileError(f"{path} is empty")
    names = None
    if not all(_is_number(c) for c in rows[0]):
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(names) if names is not None else len(rows[0])
    data = []
    for k, r in enumerate(rows, start=2 if names is not None else 1):
        if len(r) != width:
            raise InputFileError(f"{path}: line {k} has {len(r)} fields, expected {width}")
        try:
            data.append([float(c) for c in r])
        except ValueError:
            raise InputFileError(f"{path}: line {k} is not numeric") from None
    if not data:
        raise InputFileError(f"{path} has no numeric rows")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise InputFileError(f"{path} contains non-finite values")
    return names, arr


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y", "on"):
        return True
    if t in ("0", "false", "no", "n", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _stop(text: str) -> str:
    t = text.strip().lower()
    if t in ("auto", "full"):
        return t
    if t.startswith("k="):
        try:
            k = int(t[2:])
        except ValueError:
            k = 0
        if k >= 1:
            return f"k={k}"
    raise argparse.ArgumentTypeError(f"--stop must be auto, full or k=<positive int>, got {text!r}")


def _method(text: str) -> str:
    try:
        return canonical_name(text)
    except InvalidArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_scatter(args) -> tuple[ScatterInput, list[str]]:
    names, arr = read_table(args.input)
    if args.input_kind == "data":
        n, d = arr.shape
        if args.n is not None and args.n != n:
            raise InvalidArgumentError(f"--n {args.n} disagrees with the {n} data rows")
        if args.mean_known:
            scatter = scatter_from_data(arr, mean_known=True, mu=np.zeros(d))
        else:
            scatter = scatter_from_data(arr)
        n_used = n
    else:
        if arr.shape[0] != arr.shape[1]:
            raise InvalidArgumentError(f"matrix input must be square, got {arr.shape[0]}x{arr.shape[1]}")
        if args.n is None:
            raise InvalidArgumentError(f"--n is required with --input-kind {args.input_kind}")
        d = arr.shape[0]
        if args.input_kind == "corr":
            scatter = ScatterInput.from_correlation(arr, args.n, args.mean_known)
        else:
            scatter = ScatterInput.from_covariance(arr, args.n, args.mean_known)
        n_used = args.n
    if names is None:
        names = [f"X{k + 1}" for k in range(d)]
    if len(names) != d:
        raise InvalidArgumentError(f"{len(names)} names for {d} variables")
    if len(set(names)) != len(names):
        raise InvalidArgumentError("variable names must be unique")
    args.n_used = n_used
    return scatter, names


def cmd_cluster(args) -> int:
    scatter, names = _load_scatter(args)
    name = args.measure
    mdef = METHODS[name]
    stop = args.stop or ("auto" if mdef.auto else "full")
    if stop == "auto" and not mdef.measure.has_log_bf:
        raise ConfigurationError(f"--stop auto needs a log-Bayes-factor measure, {name} is not one")
    if stop.startswith("k=") and int(stop[2:]) > scatter.dim:
        raise InvalidArgumentError(f"{stop} exceeds the {scatter.dim} variables")
    spec, s = prepare(name, scatter)
    h = ahc(s, spec, stop="auto" if stop == "auto" else "full", seed=args.seed)
    doc = HierarchyDocument.build(
        h, names,
        {"file": str(args.input), "kind": args.input_kind, "n": args.n_used, "mean_known": bool(args.mean_known)},
        name, spec, stop, args.seed,
    )
    text = dumps(doc.to_dict())
    if args.out is None or str(args.out) == "-":
        sys.stdout.write(text)
    else:
        write_atomic(args.out, text)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        with open(args.config) as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputFileError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: invalid JSON ({exc})") from None
    cfg = SimConfig.from_dict(doc)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputFileError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc
    log.info("running %d replications x %d cells x %d methods", cfg.replications,
             len(cfg.c_values) * len(cfg.n_values) * len(cfg.distributions), len(cfg.methods))
    rows = run_benchmark(cfg, workers=args.workers)
    buf = io.StringIO()
    write_results_csv(rows, buf, timing=args.timing)
    write_atomic(out_dir / "results.csv", buf.getvalue())
    buf = io.StringIO()
    write_summary_csv(summarize(rows), buf)
    write_atomic(out_dir / "summary.csv", buf.getvalue())
    return EXIT_OK


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputFileError(f"cannot parse {path}: {exc}") from exc


def cmd_consensus(args) -> int:
    parts = []
    names_ref = None
    for path in args.inputs:
        names, p = load_partition(_read_json(path))
        if names_ref is None:
            names_ref = sorted(names)
        elif sorted(names) != names_ref:
            raise InvalidArgumentError(f"{path} covers variables {sorted(names)}, expected {names_ref}")
        if len(set(names)) != len(names):
            raise InvalidArgumentError(f"{path} repeats a variable name")
        # re-index on the sorted names so input column order does not matter
        pos = {name: k for k, name in enumerate(names_ref)}
        parts.append(type(p)(p.d, tuple(tuple(pos[names[i]] for i in b) for b in p.blocks)))
    d = len(names_ref)
    if not 1 <= args.k <= d:
        raise InvalidArgumentError(f"--k must lie in [1, {d}], got {args.k}")
    parts.sort(key=lambda p: p.blocks)
    stab, part = consensus(parts, args.k, seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + names_ref)
    for name, row in zip(names_ref, stab.freq):
        w.writerow([name] + [repr(float(v)) for v in row])
    prefix = str(args.out_prefix)
    write_atomic(prefix + "_stability.csv", buf.getvalue())
    write_atomic(prefix + "_partition.json",
                 dumps(partition_document(names_ref, part, k=args.k, inputs=len(parts))))
    return EXIT_OK


def cmd_mi(args) -> int:
    if args.homog is not None:
        di, dj, rho = args.homog
        di, dj = _posint(di, "di"), _posint(dj, "dj")
        rho = float(rho)
        a = homogeneous_matrix(di + dj, rho)
        scatter = ScatterInput.from_correlation(a, 2, mean_known=True)
        i, j = tuple(range(di)), tuple(range(di, di + dj))
        out = {
            "di": di, "dj": dj, "rho": rho,
            "analytic_mi": analytic_homogeneous_mi(di, dj, rho),
            "plugin_mi": mutual_info_plugin(scatter, i, j),
            "normalized_mi": normalized_mutual_info(scatter, i, j),
        }
    else:
        di, dj, n = (_posint(x, k) for x, k in zip(args.bias, ("di", "dj", "n")))
        out = {"di": di, "dj": dj, "n": n, "bias": mi_bias(di, dj, n)}
    sys.stdout.write(dumps(out))
    return EXIT_OK


def _posint(tok, what: str) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise InvalidArgumentError(f"{what} must be a positive integer, got {tok!r}") from None
    if not (math.isfinite(v) and v == int(v) and v >= 1):
        raise InvalidArgumentError(f"{what} must be a positive integer, got {tok!r}")
    return int(v)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bahc", description="Bayesian agglomerative clustering of variables.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cluster", help="cluster the variables of a matrix or data file")
    c.add_argument("--input", required=True, help="CSV file; an optional first row of names")
    c.add_argument("--input-kind", choices=("cov", "corr", "data"), default="corr")
    c.add_argument("--n", type=int, default=None, help="sample size behind a cov/corr matrix")
    c.add_argument("--mean-known", type=_bool, default=False, metavar="BOOL")
    c.add_argument("--measure", type=_method, required=True,
                   help="method name, e.g. bayescorr, bayescov, bic, infomut, averageabs")
    c.add_argument("--stop", type=_stop, default=None, help="auto, full or k=<int>")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("bench", help="run the simulation benchmark")
    b.add_argument("--config", required=True, help="JSON document with SimConfig fields")
    b.add_argument("--out-dir", required=True)
    b.add_argument("--workers", type=int, default=None, help="process count (capped by BAHC_THREADS)")
    b.add_argument("--timing", action="store_true", help="add a wall_time column (not reproducible)")
    b.set_defaults(func=cmd_bench)

    k = sub.add_parser("consensus", help="evidence-accumulation consensus of several partitions")
    k.add_argument("--k", type=int, required=True)
    k.add_argument("--out-prefix", required=True)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("inputs", nargs="+", help="hierarchy or partition JSON documents")
    k.set_defaults(func=cmd_consensus)

    m = sub.add_parser("mi", help="mutual-information analytics for homogeneous matrices")
    g = m.add_mutually_exclusive_group(required=True)
    g.add_argument("--homog", nargs=3, metavar=("DI", "DJ", "RHO"))
    g.add_argument("--bias", nargs=3, metavar=("DI", "DJ", "N"))
    m.set_defaults(func=cmd_mi)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputFileError as exc:
        print(f"bahc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"bahc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"bahc: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, ConfigurationError, UnsupportedMeasureError, UnreachableLevelError) as exc:
        print(f"bahc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
