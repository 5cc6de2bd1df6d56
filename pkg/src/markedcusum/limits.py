"""Monte Carlo critical values for the limiting Gaussian functionals.

The d = 1 normalized statistics converge to functionals of a centered
Gaussian sheet on [0,1]^2 with covariance

    Cov(K(s1,t1), K(s2,t2)) = (min(s1,s2) - s1*s2) * min(t1,t2),

a Brownian sheet tied down in the time coordinate s.  Paths are
simulated on a lattice by cumulative summation of i.i.d. normal
increments followed by the tie-down, and the six test functionals are
tabulated from repeated draws.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ContractError

__all__ = [
    "FUNCTIONAL_KINDS", "STAT_TO_FUNCTIONAL", "KieferGrid", "CriticalTable",
    "AsymptoticDecision", "simulate_kiefer_path", "functional_of_path",
    "build_critical_table", "build_critical_tables", "asymptotic_decision",
    "save_tables", "load_tables", "default_tables",
]

FUNCTIONAL_KINDS = ("sup_st", "sup_t_int_s", "sup_s_int_t", "int_int",
                    "sup_margin", "int_margin")

#: statistic kind -> limiting functional of the tied-down sheet
STAT_TO_FUNCTIONAL = {
    "tn1": "sup_st",
    "tn2": "sup_t_int_s",
    "tn3": "sup_s_int_t",
    "tn4": "int_int",
    "ks": "sup_margin",
    "cm": "int_margin",
}

DEFAULT_LEVELS = (0.80, 0.90, 0.95, 0.975, 0.99, 0.995, 0.999)

#: order statistics kept when a table is written to disk
FILE_ORDER_STATS = 4096

_BATCH = 32


@dataclass(frozen=True)
class KieferGrid:
    """One simulated path on the (G_s+1) x (G_t+1) lattice incl. zero edges."""

    G_s: int
    G_t: int
    values: np.ndarray


def _simulate_batch(rng: np.random.Generator | list, size: int, G_s: int, G_t: int) -> np.ndarray:
    """Simulate ``size`` tied-down sheets; rng may be one generator or one per path."""
    scale = 1.0 / np.sqrt(G_s * G_t)
    if isinstance(rng, list):
        inc = np.stack([g.standard_normal((G_s, G_t)) for g in rng]) * scale
    else:
        inc = rng.standard_normal((size, G_s, G_t)) * scale
    w = np.zeros((size, G_s + 1, G_t + 1))
    w[:, 1:, 1:] = np.cumsum(np.cumsum(inc, axis=1), axis=2)
    s = np.arange(G_s + 1)[None, :, None] / G_s
    return w - s * w[:, -1:, :]


def simulate_kiefer_path(G_s: int, G_t: int, seed) -> KieferGrid:
    """Simulate a single path; ``seed`` is an int or numpy SeedSequence/Generator."""
    if G_s < 2 or G_t < 2:
        raise ContractError("lattice resolutions must be >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return KieferGrid(G_s=G_s, G_t=G_t, values=_simulate_batch(rng, 1, G_s, G_t)[0])


def _batch_functionals(values: np.ndarray, kinds) -> dict[str, np.ndarray]:
    """Evaluate requested functionals on a batch of padded paths."""
    G_s = values.shape[1] - 1
    G_t = values.shape[2] - 1
    sq = values**2
    out = {}
    for kind in kinds:
        if kind == "sup_st":
            out[kind] = np.abs(values).max(axis=(1, 2))
        elif kind == "sup_t_int_s":
            out[kind] = (sq[:, 1:, :].sum(axis=1) / G_s).max(axis=1)
        elif kind == "sup_s_int_t":
            out[kind] = (sq[:, :, 1:].sum(axis=2) / G_t).max(axis=1)
        elif kind == "int_int":
            out[kind] = sq[:, 1:, 1:].sum(axis=(1, 2)) / (G_s * G_t)
        elif kind == "sup_margin":
            out[kind] = np.abs(values[:, :, -1]).max(axis=1)
        elif kind == "int_margin":
            out[kind] = sq[:, 1:, -1].sum(axis=1) / G_s
        else:
            raise ContractError(f"unknown functional kind {kind!r}")
    return out


def functional_of_path(path: KieferGrid, kind: str) -> float:
    """Lattice supremum / right-endpoint step integral of one path."""
    return float(_batch_functionals(path.values[None, :, :], [kind])[kind][0])


@dataclass(frozen=True)
class CriticalTable:
    """Empirical distribution of one limit functional.

    ``draws`` is sorted ascending: the full R draws for a fresh build,
    or the evenly spaced order statistics after a round trip to disk.
    """

    kind: str
    R: int
    G_s: int
    G_t: int
    seed: int
    draws: np.ndarray
    quantiles: dict[float, float]

    def quantile(self, level: float) -> float:
        for lvl, q in self.quantiles.items():
            if abs(lvl - level) < 1e-12:
                return q
        return float(np.quantile(self.draws, level, method="inverted_cdf"))

    def p_value(self, value: float) -> tuple[float, bool]:
        """Upper-tail p; the flag marks values beyond the stored maximum."""
        exceed = int(np.sum(self.draws > value))
        return exceed / self.draws.size, exceed == 0

    @property
    def resolution(self) -> float:
        return 1.0 / self.R


def _table_chunk(args):
    seeds, G_s, G_t, kinds = args
    rngs = [np.random.default_rng(s) for s in seeds]
    return _batch_functionals(_simulate_batch(rngs, len(rngs), G_s, G_t), kinds)


def build_critical_tables(kinds, R: int, G_s: int, G_t: int, seed: int,
                          levels=DEFAULT_LEVELS, workers: int = 1) -> dict[str, CriticalTable]:
    """Tabulate several functionals from one shared set of simulated paths.

    Each path draws from its own substream of the master seed, so the
    result is independent of batching and worker count.
    """
    if R < 1000:
        raise ContractError("need at least 1000 replications for a quantile table")
    kinds = list(kinds)
    for kind in kinds:
        if kind not in FUNCTIONAL_KINDS:
            raise ContractError(f"unknown functional kind {kind!r}")
    children = np.random.SeedSequence(seed).spawn(R)
    chunks = [(children[i:i + _BATCH], G_s, G_t, kinds) for i in range(0, R, _BATCH)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_table_chunk, chunks, chunksize=1))
    else:
        parts = [_table_chunk(c) for c in chunks]
    tables = {}
    for kind in kinds:
        draws = np.sort(np.concatenate([p[kind] for p in parts]))
        quantiles = {float(lvl): float(np.quantile(draws, lvl, method="inverted_cdf"))
                     for lvl in levels}
        tables[kind] = CriticalTable(kind=kind, R=R, G_s=G_s, G_t=G_t, seed=seed,
                                     draws=draws, quantiles=quantiles)
    return tables


def build_critical_table(kind: str, levels, R: int, G_s: int, G_t: int,
                         seed: int) -> CriticalTable:
    return build_critical_tables([kind], R, G_s, G_t, seed, levels=levels)[kind]


@dataclass(frozen=True)
class AsymptoticDecision:
    reject: bool
    p_value: float
    p_below_resolution: bool
    p_resolution: float
    critical_value: float
    level: float
    statistic_kind: str
    functional_kind: str

    def p_display(self) -> str:
        if self.p_below_resolution:
            return f"< {self.p_resolution:g}"
        return f"{self.p_value:.6g}"


def asymptotic_decision(stat, table: CriticalTable, level: float) -> AsymptoticDecision:
    """Compare a normalized statistic against the tabulated limit."""
    expected = STAT_TO_FUNCTIONAL.get(stat.kind)
    if expected != table.kind:
        raise ContractError(
            f"statistic {stat.kind!r} needs functional {expected!r}, table holds {table.kind!r}")
    if stat.normalized is None:
        raise ContractError("statistic must be normalized before an asymptotic decision")
    crit = table.quantile(1.0 - level)
    p, below = table.p_value(stat.normalized)
    return AsymptoticDecision(reject=bool(stat.normalized > crit), p_value=p,
                              p_below_resolution=below, p_resolution=table.resolution,
                              critical_value=crit, level=level, statistic_kind=stat.kind,
                              functional_kind=table.kind)


# ---------------------------------------------------------------------------
# persistence

def save_tables(tables: dict[str, CriticalTable], path) -> None:
    records = []
    for kind in sorted(tables):
        t = tables[kind]
        draws = t.draws
        if draws.size > FILE_ORDER_STATS:
            idx = np.round(np.linspace(0, draws.size - 1, FILE_ORDER_STATS)).astype(int)
            draws = draws[idx]
        records.append({
            "kind": t.kind, "R": t.R, "G_s": t.G_s, "G_t": t.G_t, "seed": t.seed,
            "quantiles": {repr(lvl): q for lvl, q in t.quantiles.items()},
            "order_stats": [float(v) for v in draws],
        })
    payload = {"schema_version": 1, "tables": records}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def _tables_from_payload(payload) -> dict[str, CriticalTable]:
    if payload.get("schema_version") != 1:
        raise ContractError("unsupported critical-table schema")
    tables = {}
    for rec in payload["tables"]:
        tables[rec["kind"]] = CriticalTable(
            kind=rec["kind"], R=rec["R"], G_s=rec["G_s"], G_t=rec["G_t"],
            seed=rec["seed"],
            draws=np.asarray(rec["order_stats"], dtype=float),
            quantiles={float(lvl): float(q) for lvl, q in rec["quantiles"].items()},
        )
    return tables


def load_tables(path) -> dict[str, CriticalTable]:
    with open(path) as fh:
        return _tables_from_payload(json.load(fh))


_default_cache: dict[str, CriticalTable] = {}


def default_tables() -> dict[str, CriticalTable]:
    """Packaged tables (R = 1e5 paths on a 512 x 512 lattice)."""
    if not _default_cache:
        ref = resources.files("markedcusum") / "_tables" / "kiefer_critical_tables.json"
        _default_cache.update(_tables_from_payload(json.loads(ref.read_text())))
    return _default_cache
