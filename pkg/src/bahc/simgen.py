"""Synthetic block-structured data and the benchmark runner.

A replication draws a uniform random partition of ``d`` variables into
``c`` blocks, one random correlation matrix per block, and ``n`` rows from
independent Gaussian or Student-t blocks.  Each method is scored against
the true partition, with the hierarchy cut at ``c`` blocks unless the
method carries its own stopping rule.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .engine import auto_partition, cut
from .errors import BahcError, ConfigurationError, InvalidArgumentError
from .methods import METHODS, canonical_name, run_method
from .metrics import adjusted_rand, exact_recovery, rand_index
from .numerics import cov_to_corr, scatter_from_data
from .partition import Partition

__all__ = [
    "Distribution",
    "SimConfig",
    "SimResult",
    "analytic_homogeneous_mi",
    "derive_seed",
    "homogeneous_matrix",
    "random_cluster_correlation",
    "random_partition",
    "run_benchmark",
    "sample_dataset",
    "stirling2",
    "summarize",
    "wishart_bartlett",
]

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------- partitions

@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind (exact integer)."""
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def random_partition(d: int, c: int, rng: np.random.Generator) -> Partition:
    """Uniform draw among the ``S(d, c)`` partitions of d elements into c blocks.

    Element ``m`` (taken from the top down) either opens its own block, with
    probability ``S(m-1, k-1) / S(m, k)``, or joins one of the ``k`` blocks of
    a partition of the remaining elements, chosen uniformly.
    """
    if not 1 <= c <= d:
        raise InvalidArgumentError(f"need 1 <= c <= d, got c={c}, d={d}")
    # top-down decisions, replayed bottom-up
    plan = []
    m, k = d, c
    while m > k and k > 1:
        if rng.random() * stirling2(m, k) < stirling2(m - 1, k - 1):
            plan.append(None)
            k -= 1
        else:
            plan.append(int(rng.integers(k)))
        m -= 1
    if k == 1:
        blocks = [list(range(m))]
    else:  # m == k
        blocks = [[i] for i in range(m)]
    for elem, choice in zip(range(m, d), reversed(plan)):
        if choice is None:
            blocks.append([elem])
        else:
            blocks[choice].append(elem)
    return Partition(d, tuple(tuple(b) for b in blocks))


# ------------------------------------------------------------------ matrices

def wishart_bartlett(df: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``W ~ Wishart(df, I)`` from the Bartlett triangular factor."""
    if df <= dim - 1:
        raise InvalidArgumentError(f"Wishart needs df > dim - 1, got df={df}, dim={dim}")
    a = np.zeros((dim, dim))
    a[np.diag_indices(dim)] = np.sqrt(rng.chisquare(df - np.arange(dim)))
    low = np.tril_indices(dim, -1)
    a[low] = rng.standard_normal(len(low[0]))
    return a @ a.T


def random_cluster_correlation(dk: int, rng: np.random.Generator, *, inverse: bool = True,
                               max_retries: int = 100) -> np.ndarray:
    """Random ``dk x dk`` correlation matrix with uniform marginal correlations.

    A ``Wishart(dk + 1, I)`` draw is inverted (giving ``IW(dk + 1, I)``) and
    rescaled to unit diagonal, which makes every off-diagonal entry
    Uniform(-1, 1).  ``inverse=False`` rescales the Wishart draw directly;
    its marginals are Beta(dk/2, dk/2) on (-1, 1), uniform only for dk = 2.
    """
    if dk < 1:
        raise InvalidArgumentError("block size must be positive")
    if dk == 1:
        return np.ones((1, 1))
    for attempt in range(max_retries):
        w = wishart_bartlett(dk + 1, dk, rng)
        try:
            m = np.linalg.inv(w) if inverse else w
            r = cov_to_corr(m)
            np.linalg.cholesky(r)
        except (np.linalg.LinAlgError, BahcError):
            log.debug("resampling singular Wishart draw (attempt %d)", attempt + 1)
            continue
        return r
    raise RuntimeError(f"no positive definite correlation after {max_retries} draws")


def homogeneous_matrix(d: int, rho: float) -> np.ndarray:
    """Unit diagonal, every off-diagonal entry equal to `rho`."""
    if not 0.0 <= rho < 1.0:
        raise InvalidArgumentError(f"rho must lie in [0, 1), got {rho}")
    a = np.full((d, d), float(rho))
    np.fill_diagonal(a, 1.0)
    return a


def analytic_homogeneous_mi(di: int, dj: int, rho: float) -> float:
    """Mutual information between blocks of sizes `di`, `dj` of ``A_{di+dj}(rho)``."""
    if not 0.0 <= rho < 1.0:
        raise InvalidArgumentError(f"rho must lie in [0, 1), got {rho}")
    num = (1 + (di - 1) * rho) * (1 + (dj - 1) * rho)
    den = (1 - rho) * (1 + (di + dj - 1) * rho)
    return 0.5 * math.log(num / den)


def mi_bias(di: int, dj: int, n: int) -> float:
    """Leading-order bias ``di * dj / (2 n)`` of the plug-in mutual information."""
    return di * dj / (2.0 * n)


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class Distribution:
    kind: str = "gaussian"
    df: Optional[int] = None

    def __post_init__(self):
        if self.kind == "gaussian" and self.df is not None:
            raise InvalidArgumentError("gaussian takes no degrees of freedom")
        if self.kind == "student" and not (isinstance(self.df, int) and self.df > 0):
            raise InvalidArgumentError(f"student needs a positive integer df, got {self.df!r}")
        if self.kind not in ("gaussian", "student"):
            raise InvalidArgumentError(f"unknown distribution {self.kind!r}")

    @classmethod
    def parse(cls, text) -> "Distribution":
        if isinstance(text, Distribution):
            return text
        s = str(text).strip().lower()
        if s in ("gaussian", "normal"):
            return cls("gaussian")
        m = re.fullmatch(r"student\s*[\(\-_]?\s*(\d+)\s*\)?", s)
        if m:
            return cls("student", int(m.group(1)))
        raise InvalidArgumentError(f"cannot parse distribution {text!r}; use 'gaussian' or 'student(df)'")

    def __str__(self) -> str:
        return "gaussian" if self.kind == "gaussian" else f"student({self.df})"


def sample_dataset(partition: Partition, n: int, dist, rng: np.random.Generator,
                   correlations: Optional[Sequence[np.ndarray]] = None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Draw `n` rows with independent zero-mean blocks.

    Returns the ``n x d`` data and the per-block correlation matrices.  For
    Student-t blocks every row of every block gets its own chi-square divisor.
    """
    dist = Distribution.parse(dist)
    if n < 2:
        raise InvalidArgumentError("need at least two rows")
    if correlations is None:
        correlations = [random_cluster_correlation(len(b), rng) for b in partition.blocks]
    x = np.empty((n, partition.d))
    for block, r in zip(partition.blocks, correlations):
        low = np.linalg.cholesky(r)
        z = rng.standard_normal((n, len(block))) @ low.T
        if dist.kind == "student":
            z /= np.sqrt(rng.chisquare(dist.df, size=(n, 1)) / dist.df)
        x[:, list(block)] = z
    return x, list(correlations)


# ------------------------------------------------------------------ seeding

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _coord_word(c) -> int:
    if isinstance(c, (int, np.integer)) and not isinstance(c, bool):
        return int(c) & MASK64
    return int.from_bytes(hashlib.blake2b(str(c).encode(), digest_size=8).digest(), "little")


def derive_seed(master_seed: int, *coords) -> int:
    """64-bit seed from `master_seed` and grid coordinates.

    ``h = splitmix64(master)``, then ``h = splitmix64(h ^ word(c))`` for each
    coordinate; strings map to words through an 8-byte BLAKE2b digest.
    """
    h = splitmix64(int(master_seed) & MASK64)
    for c in coords:
        h = splitmix64(h ^ _coord_word(c))
    return h


# --------------------------------------------------------------- benchmark

@dataclass(frozen=True)
class SimConfig:
    d: int = 6
    c_values: tuple[int, ...] = (2, 3, 4)
    n_values: tuple[int, ...] = (10, 90, 170)
    distributions: tuple[Distribution, ...] = (Distribution("gaussian"), Distribution("student", 3))
    replications: int = 100
    methods: tuple[str, ...] = ("BayesCov", "BayesCovAuto", "BayesCorr", "BayesCorrAuto", "Bic", "BicAuto",
                                "Infomut", "InfomutNorm", "AverageAbs")
    master_seed: int = 0

    FIELDS = ("d", "c_values", "n_values", "distributions", "replications", "methods", "master_seed")

    def __post_init__(self):
        errors = []
        if not (isinstance(self.d, int) and self.d >= 2):
            errors.append(f"d: must be an integer >= 2, got {self.d!r}")
        if not self.c_values or any(not isinstance(c, int) or not 1 <= c <= (self.d if isinstance(self.d, int) else 0)
                                    for c in self.c_values):
            errors.append(f"c_values: every entry must be an integer in [1, d], got {list(self.c_values)!r}")
        if not self.n_values or any(not isinstance(n, int) or n < 2 for n in self.n_values):
            errors.append(f"n_values: every entry must be an integer >= 2, got {list(self.n_values)!r}")
        if not (isinstance(self.replications, int) and self.replications >= 0):
            errors.append(f"replications: must be a non-negative integer, got {self.replications!r}")
        if not isinstance(self.master_seed, int):
            errors.append(f"master_seed: must be an integer, got {self.master_seed!r}")
        dists = []
        for x in self.distributions:
            try:
                dists.append(Distribution.parse(x))
            except InvalidArgumentError as exc:
                errors.append(f"distributions: {exc}")
        if not self.distributions:
            errors.append("distributions: must be non-empty")
        methods = []
        for mth in self.methods:
            try:
                methods.append(canonical_name(str(mth)))
            except InvalidArgumentError as exc:
                errors.append(f"methods: {exc}")
        if not self.methods:
            errors.append("methods: must be non-empty")
        if errors:
            raise ConfigurationError("; ".join(errors))
        object.__setattr__(self, "c_values", tuple(self.c_values))
        object.__setattr__(self, "n_values", tuple(self.n_values))
        object.__setattr__(self, "distributions", tuple(dists))
        object.__setattr__(self, "methods", tuple(methods))

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("config: expected a JSON object")
        unknown = sorted(set(doc) - set(cls.FIELDS) - {"full_grid"})
        if unknown:
            raise ConfigurationError(f"config: unknown field(s) {unknown}")
        kw = {}
        for key in cls.FIELDS:
            if key in doc:
                v = doc[key]
                if key in ("c_values", "n_values", "distributions", "methods"):
                    if not isinstance(v, list):
                        raise ConfigurationError(f"{key}: expected a list, got {type(v).__name__}")
                    v = tuple(v)
                kw[key] = v
        if doc.get("full_grid"):
            kw = {**asdict_grid(cls.full_grid(kw.get("d", 6))), **kw}
        return cls(**kw)

    @classmethod
    def full_grid(cls, d: int) -> "SimConfig":
        """Complete grid: every C in [1, D], N = 10..290 by 40, four distributions, 500 replications."""
        warnings.warn("full simulation grid requested; expect a very long run", RuntimeWarning, stacklevel=2)
        return cls(
            d=d,
            c_values=tuple(range(1, d + 1)),
            n_values=tuple(range(10, 300, 40)),
            distributions=(Distribution("gaussian"), Distribution("student", 1),
                           Distribution("student", 3), Distribution("student", 5)),
            replications=500,
            methods=tuple(sorted(METHODS)),
        )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "c_values": list(self.c_values),
            "n_values": list(self.n_values),
            "distributions": [str(x) for x in self.distributions],
            "replications": self.replications,
            "methods": list(self.methods),
            "master_seed": self.master_seed,
        }


def asdict_grid(cfg: SimConfig) -> dict:
    return {k: getattr(cfg, k) for k in SimConfig.FIELDS}


@dataclass(frozen=True)
class SimResult:
    d: int
    c: int
    n: int
    distribution: str
    method: str
    replication: int
    adjusted_rand: float = math.nan
    rand: float = math.nan
    exact: Optional[bool] = None
    auto_k: Optional[int] = None
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return not self.error


CSV_COLUMNS = ("d", "c", "n", "distribution", "method", "replication",
               "adjusted_rand", "rand", "exact", "auto_k", "error")


def _replication(args) -> list[SimResult]:
    d, c, n, dist, rep, methods, seed = args
    rng = np.random.default_rng(seed)
    truth = random_partition(d, c, rng)
    x, _ = sample_dataset(truth, n, dist, rng)
    scatter = scatter_from_data(x, mean_known=False)
    out = []
    for mth in methods:
        t0 = time.perf_counter()
        mseed = derive_seed(seed, mth)
        try:
            h = run_method(mth, scatter, seed=mseed)
            if METHODS[mth].auto:
                found = auto_partition(h)
                auto_k = len(found)
            else:
                found = cut(h, c)
                auto_k = None
            row = SimResult(d, c, n, str(dist), mth, rep, adjusted_rand(found, truth),
                            rand_index(found, truth), exact_recovery(found, truth), auto_k)
        except BahcError as exc:
            row = SimResult(d, c, n, str(dist), mth, rep, error=f"{type(exc).__name__}: {exc}")
        out.append(SimResult(**{**asdict(row), "wall_time": time.perf_counter() - t0}))
    return out


def thread_cap() -> int:
    env = os.environ.get("BAHC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"BAHC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_benchmark(cfg: SimConfig, workers: Optional[int] = None) -> list[SimResult]:
    """Run every grid cell and replication; rows come back in canonical order.

    Each replication's data seed is ``derive_seed(master_seed, d, c, n,
    distribution, replication)`` and each method's tie-breaking seed is
    derived from it and the method name, so results do not depend on
    scheduling.
    """
    tasks = []
    for c in cfg.c_values:
        for n in cfg.n_values:
            for dist in cfg.distributions:
                for rep in range(cfg.replications):
                    seed = derive_seed(cfg.master_seed, cfg.d, c, n, str(dist), rep)
                    tasks.append((cfg.d, c, n, dist, rep, cfg.methods, seed))
    seeds = [t[-1] for t in tasks]
    assert len(set(seeds)) == len(seeds), "derived seeds collided"
    if workers is None:
        workers = thread_cap()
    workers = max(1, min(workers, thread_cap(), len(tasks) or 1))
    if workers == 1 or len(tasks) < 2:
        chunks = [_replication(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replication, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    return [row for chunk in chunks for row in chunk]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_results_csv(rows: Sequence[SimResult], fh, timing: bool = False) -> None:
    cols = CSV_COLUMNS + (("wall_time",) if timing else ())
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in cols])


def read_results_csv(fh) -> list[SimResult]:
    out = []
    for rec in csv.DictReader(fh):
        out.append(SimResult(
            int(rec["d"]), int(rec["c"]), int(rec["n"]), rec["distribution"], rec["method"],
            int(rec["replication"]),
            float(rec["adjusted_rand"]) if rec["adjusted_rand"] else math.nan,
            float(rec["rand"]) if rec["rand"] else math.nan,
            None if rec["exact"] == "" else rec["exact"] == "1",
            int(rec["auto_k"]) if rec["auto_k"] else None,
            rec["error"],
            float(rec.get("wall_time") or 0.0),
        ))
    return out


SUMMARY_COLUMNS = ("rank", "method", "runs", "median_ari", "p25_ari", "p5_ari", "min_ari",
                   "exact_proportion", "mean_rand")


def summarize(rows: Sequence[SimResult], common_only: bool = True) -> list[dict]:
    """Per-method score ladder, best first.

    Methods are ordered by median, 25th percentile, 5th percentile and minimum
    adjusted Rand, then by the proportion of exact recoveries.  With
    `common_only`, only replications in which every method ran are pooled.
    """
    methods = list(dict.fromkeys(r.method for r in rows))
    if common_only:
        by_rep: dict = {}
        for r in rows:
            by_rep.setdefault((r.d, r.c, r.n, r.distribution, r.replication), []).append(r)
        keep = {k for k, rs in by_rep.items() if all(x.ok for x in rs)}
        pool = [r for r in rows if (r.d, r.c, r.n, r.distribution, r.replication) in keep]
    else:
        pool = [r for r in rows if r.ok]
    table = []
    for m in methods:
        ari = np.array([r.adjusted_rand for r in pool if r.method == m])
        if ari.size == 0:
            table.append({"method": m, "runs": 0, "median_ari": math.nan, "p25_ari": math.nan,
                          "p5_ari": math.nan, "min_ari": math.nan, "exact_proportion": math.nan,
                          "mean_rand": math.nan})
            continue
        exact = np.array([bool(r.exact) for r in pool if r.method == m])
        rnd = np.array([r.rand for r in pool if r.method == m])
        table.append({
            "method": m,
            "runs": int(ari.size),
            "median_ari": float(np.median(ari)),
            "p25_ari": float(np.percentile(ari, 25)),
            "p5_ari": float(np.percentile(ari, 5)),
            "min_ari": float(ari.min()),
            "exact_proportion": float(exact.mean()),
            "mean_rand": float(rnd.mean()),
        })

    def key(row):
        vals = [row[k] for k in ("median_ari", "p25_ari", "p5_ari", "min_ari", "exact_proportion")]
        return tuple(-v if not math.isnan(v) else math.inf for v in vals)

    table.sort(key=key)
    for k, row in enumerate(table, 1):
        row["rank"] = k
    return table


def write_summary_csv(table: Sequence[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in table:
        w.writerow([_fmt(row[k]) for k in SUMMARY_COLUMNS])
