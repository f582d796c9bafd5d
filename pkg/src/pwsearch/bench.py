"""Experiment harness: configs, batch runs, histograms, sweeps and comparison tables."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import model, streams
from .filters import FilterConfig
from .graph import Network, degree_stats, generate_er, generate_regular, generate_scale_free
from .search import Mechanism, Outcomes, run_searches, search_cost
from .walker import FreshWalks, WalkTable, precompute_walk_tables

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "Histogram",
    "RunResult",
    "load_config",
    "build_network",
    "make_walks",
    "run",
    "sweep",
    "compare_mechanisms",
    "compare",
    "mean_relative_difference",
    "relative_difference_detail",
    "model_prediction",
    "model_rows",
]

MECHANISMS = ("rw", "cf-rw", "cf-saw", "kf-rw", "kf-saw")
FAMILIES = {"regular": "regular", "er": "er", "sf": "sf", "scale-free": "sf"}

_MODEL_VARIANT = {
    "cf-rw": ("rw", "choose"),
    "cf-saw": ("saw_choose", "choose"),
    "kf-rw": ("rw", "check"),
    "kf-saw": ("saw_check", "check"),
}


def fmt(x) -> str:
    """CSV/JSON number formatting: integers as is, floats with 6 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _num(x):
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.6g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


# -- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    family: str = "regular"
    n: int = 10_000
    kmean: float = 10.0
    net_seed: int = 1
    net: str | None = None
    mechanism: str = "cf-rw"
    s: list[int] = field(default_factory=lambda: [150])
    w: int = 2
    p: list[float] = field(default_factory=lambda: [0.0])
    trials: int = 10_000
    mode: str = "fresh"
    cutoff: int | None = None
    seed: int = 0
    filter: str = "ideal"
    memoize: bool = False
    bin_width: int = 1
    lbar: float | None = None
    b: float = 100.0
    out: str = "out"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if not self.s or not self.p:
            raise ValueError("s and p lists must be nonempty")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if self.mode not in ("fresh", "reuse"):
            raise ValueError("mode must be 'fresh' or 'reuse'")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {sorted(FAMILIES)}")
        if self.w < 1 or any(s < 1 for s in self.s):
            raise ValueError("w and s must be >= 1")
        if any(not 0.0 <= p <= 1.0 for p in self.p):
            raise ValueError("p must be in [0, 1]")
        if self.filter not in ("ideal", "bloom"):
            raise ValueError("filter must be 'ideal' or 'bloom'")
        if self.bin_width < 1:
            raise ValueError("bin_width must be >= 1")

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_LIST_INT = {"s"}
_LIST_FLOAT = {"p"}
_INT = {"n", "net_seed", "w", "trials", "cutoff", "seed", "bin_width"}
_FLOAT = {"kmean", "lbar", "b"}
_BOOL = {"memoize"}


def coerce(key: str, value):
    """Convert a text value (config file or CLI) to the field's type."""
    if value is None or not isinstance(value, str):
        return value
    v = value.strip()
    if key in _LIST_INT:
        return [int(x) for x in v.replace(",", " ").split()]
    if key in _LIST_FLOAT:
        return [float(x) for x in v.replace(",", " ").split()]
    if key in _INT:
        return None if v.lower() in ("", "none") else int(v)
    if key in _FLOAT:
        return None if v.lower() in ("", "none") else float(v)
    if key in _BOOL:
        return v.lower() in ("1", "true", "yes", "on")
    return v


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` comments), then apply ``overrides``."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (t.strip() for t in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in names:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = coerce(key, val)
    for key, val in overrides.items():
        if val is not None:
            values[key] = coerce(key, val)
    return ExperimentConfig(**values)


# -- histograms ----------------------------------------------------------------------


@dataclass
class Histogram:
    bin_width: int
    counts: np.ndarray
    trials: int
    unfinished: int
    mean: float
    std: float

    @classmethod
    def from_outcomes(cls, outcomes: Outcomes, bin_width: int = 1) -> Histogram:
        return cls.from_lengths(outcomes.found_lengths(), len(outcomes), bin_width)

    @classmethod
    def from_lengths(cls, lengths, trials: int | None = None, bin_width: int = 1) -> Histogram:
        x = np.asarray(lengths, dtype=np.int64)
        trials = len(x) if trials is None else int(trials)
        if trials < len(x):
            raise ValueError("trials < number of found lengths")
        counts = np.bincount(x // bin_width) if len(x) else np.zeros(0, dtype=np.int64)
        mean = float(x.mean()) if len(x) else float("nan")
        std = float(x.std()) if len(x) else float("nan")
        return cls(bin_width, counts.astype(np.int64), trials, trials - len(x), mean, std)

    @property
    def found(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.trials if self.trials else self.counts.astype(float)

    def percentile_bin(self, q: float) -> int:
        """Index of the first bin at which the cumulative found count reaches ``q``."""
        if self.found == 0:
            raise ValueError("empty histogram")
        c = np.cumsum(self.counts)
        return int(np.searchsorted(c, q * c[-1], side="left"))

    def percentile(self, q: float) -> int:
        """Lower edge (in hops) of :meth:`percentile_bin`."""
        return self.percentile_bin(q) * self.bin_width

    def rebin(self, bin_width: int) -> Histogram:
        if bin_width % self.bin_width:
            raise ValueError("new bin width must be a multiple of the current one")
        f = bin_width // self.bin_width
        pad = (-len(self.counts)) % f
        counts = np.concatenate([self.counts, np.zeros(pad, dtype=np.int64)]).reshape(-1, f).sum(1)
        return Histogram(bin_width, counts, self.trials, self.unfinished, self.mean, self.std)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["bin_start", "bin_end", "count", "frequency"])
        freq = self.frequencies()
        for i, c in enumerate(self.counts):
            wr.writerow([i * self.bin_width, (i + 1) * self.bin_width - 1, int(c), fmt(freq[i])])
        return buf.getvalue()


def relative_difference_detail(h_a: Histogram, h_ref: Histogram) -> tuple[float, list[int]]:
    """Mean relative difference and the skipped bins where the reference is empty.

    Frequencies (count / trials) are compared bin by bin from bin 0 up to
    the bin holding the reference's 90th percentile.
    """
    if h_a.bin_width != h_ref.bin_width:
        raise ValueError(f"incompatible binning: {h_a.bin_width} vs {h_ref.bin_width}")
    top = h_ref.percentile_bin(0.9)
    fa = np.zeros(top + 1)
    fr = np.zeros(top + 1)
    a, r = h_a.frequencies(), h_ref.frequencies()
    fa[: min(len(a), top + 1)] = a[: top + 1]
    fr[: min(len(r), top + 1)] = r[: top + 1]
    skipped = [int(i) for i in np.flatnonzero(fr == 0)]
    keep = fr > 0
    total = float((np.abs(fa[keep] - fr[keep]) / fr[keep]).sum())
    return total / (top + 1), skipped


def mean_relative_difference(h_a: Histogram, h_ref: Histogram) -> float:
    value, skipped = relative_difference_detail(h_a, h_ref)
    if skipped:
        log.info("mean_relative_difference: skipped %d empty reference bins", len(skipped))
    return value


# -- running ----------------------------------------------------------------------------


def build_network(cfg: ExperimentConfig) -> Network:
    if cfg.net:
        return Network.load(cfg.net)
    fam = FAMILIES[cfg.family]
    if fam == "regular":
        return generate_regular(cfg.n, int(round(cfg.kmean)), cfg.net_seed)
    if fam == "er":
        return generate_er(cfg.n, cfg.kmean, cfg.net_seed)
    return generate_scale_free(cfg.n, cfg.kmean, cfg.net_seed)


def filter_config(cfg: ExperimentConfig, p: float) -> FilterConfig:
    return FilterConfig(mode=cfg.filter, p=p, memoize=cfg.memoize,
                        seed=streams.derive_seed(cfg.seed, streams.FILTER))


def make_walks(net: Network, cfg: ExperimentConfig, mechanism: str, s: int, p: float):
    mech = Mechanism.from_name(mechanism)
    fcfg = filter_config(cfg, p)
    if cfg.mode == "fresh":
        return FreshWalks(s, cfg.w, mech.kind, mech.registration_range, fcfg)
    table_seed = streams.derive_seed(cfg.seed, streams.TABLE_SEED)
    return precompute_walk_tables(net, cfg.w, s, mech.kind, mech.registration_range, fcfg, table_seed)


def simulate(net: Network, cfg: ExperimentConfig, mechanism: str, s: int, p: float,
             walks: FreshWalks | WalkTable | None = None) -> Outcomes:
    if mechanism == "rw":
        return run_searches(net, "rw", cfg.trials, cfg.seed, hop_cutoff=cfg.cutoff)
    if walks is None:
        walks = make_walks(net, cfg, mechanism, s, p)
    return run_searches(net, mechanism, cfg.trials, cfg.seed, walks, hop_cutoff=cfg.cutoff)


@dataclass
class RunResult:
    config: ExperimentConfig
    outcomes: Outcomes
    histogram: Histogram
    summary: dict

    @property
    def mean(self) -> float:
        return self.outcomes.mean()


def trials_csv(outcomes: Outcomes, mechanism: str, s, w, p) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["trial", "mechanism", "s", "w", "p", "status", "L_s", "J", "U", "T", "P"])
    rw = mechanism == "rw"
    for i in range(len(outcomes)):
        wr.writerow([
            i, mechanism, "" if rw else s, "" if rw else w, "" if rw else fmt(p),
            "found" if outcomes.status[i] == 0 else "unfinished",
            int(outcomes.length[i]), int(outcomes.jumps[i]), int(outcomes.unnecessary[i]),
            int(outcomes.trailing[i]), int(outcomes.partial_walks[i]),
        ])
    return buf.getvalue()


def summarize(outcomes: Outcomes, hist: Histogram, cfg: ExperimentConfig, s: int, p: float) -> dict:
    f = outcomes.found
    mean = lambda a: float(a[f].mean()) if f.any() else float("nan")  # noqa: E731
    summary = {
        "mechanism": cfg.mechanism,
        "s": s,
        "w": cfg.w,
        "p": p,
        "trials": len(outcomes),
        "found": int(f.sum()),
        "unfinished_fraction": outcomes.unfinished_fraction,
        "mean": hist.mean,
        "std": hist.std,
        "mean_jumps": mean(outcomes.jumps),
        "mean_unnecessary": mean(outcomes.unnecessary),
        "mean_trailing": mean(outcomes.trailing),
        "mean_partial_walks": mean(outcomes.partial_walks),
    }
    if hist.found:
        summary["percentiles"] = {f"L{q}": hist.percentile(q / 100) for q in (10, 50, 90, 99)}
    if cfg.mechanism != "rw" and f.any():
        summary["C_t"] = search_cost(hist.mean, cfg.w, cfg.b, s)
    summary["config"] = cfg.as_dict()
    return {k: (_num(v) if not isinstance(v, dict) else {a: _num(b) for a, b in v.items()})
            for k, v in summary.items()}


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run(cfg: ExperimentConfig, net: Network | None = None, write: bool = True) -> RunResult:
    """One (mechanism, s, p) point: per-trial CSV, histogram CSV and summary JSON."""
    if len(cfg.s) != 1 or len(cfg.p) != 1:
        raise ValueError("run() takes a single s and p; use sweep() for lists")
    if cfg.trials < 1:
        raise ValueError("run() needs trials >= 1")
    s, p = cfg.s[0], cfg.p[0]
    net = build_network(cfg) if net is None else net
    outcomes = simulate(net, cfg, cfg.mechanism, s, p)
    hist = Histogram.from_outcomes(outcomes, cfg.bin_width)
    summary = summarize(outcomes, hist, cfg, s, p)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trials.csv").write_text(trials_csv(outcomes, cfg.mechanism, s, cfg.w, p), newline="\n")
        (out / "histogram.csv").write_text(hist.to_csv(), newline="\n")
        (out / "summary.json").write_text(_dump_json(summary), newline="\n")
    return RunResult(cfg, outcomes, hist, summary)


def model_prediction(mechanism: str, stats, s: int, w: int, p: float, lbar: float | None) -> tuple[float | None, float | None]:
    """(primary, alternative) model lengths; ``None`` where undefined or out of range."""
    if mechanism == "rw":
        return None, None
    variant, policy = _MODEL_VARIANT[mechanism]
    try:
        unified = model.unified_length(stats, s, w, p, variant, policy)
    except model.ModelRangeError:
        unified = None
    if mechanism == "cf-rw":
        primary = model.theorem1_length(s, lbar, p) if lbar else None
        return primary, unified
    return unified, None


def baseline_lbar(net: Network, cfg: ExperimentConfig) -> tuple[float, str]:
    """Expected RW search length: simulated if trials > 0, else configured or approximated."""
    if cfg.trials > 0:
        return run_searches(net, "rw", cfg.trials, cfg.seed, hop_cutoff=cfg.cutoff).mean(), "simulation"
    if cfg.lbar:
        return float(cfg.lbar), "config"
    _, mean = model.rw_length_pmf(net.n, 10 * net.n)
    return mean, "rw_length_pmf"


SWEEP_COLUMNS = ["mechanism", "s", "w", "p", "mode", "trials", "sim_mean", "sim_std",
                 "unfinished", "model_length", "model_alt"]


def sweep(cfg: ExperimentConfig, net: Network | None = None, write: bool = True) -> list[dict]:
    """Simulation mean and model prediction for every (s, p) grid point."""
    net = build_network(cfg) if net is None else net
    stats = degree_stats(net)
    lbar, source = (None, None)
    if cfg.mechanism == "cf-rw":
        lbar, source = (cfg.lbar, "config") if cfg.lbar else baseline_lbar(net, cfg)
    rows = []
    for s in cfg.s:
        for p in cfg.p:
            primary, alt = model_prediction(cfg.mechanism, stats, s, cfg.w, p, lbar)
            row = {"mechanism": cfg.mechanism, "s": s, "w": cfg.w, "p": p, "mode": cfg.mode,
                   "trials": cfg.trials, "sim_mean": None, "sim_std": None, "unfinished": None,
                   "model_length": primary, "model_alt": alt}
            if cfg.trials > 0:
                o = simulate(net, cfg, cfg.mechanism, s, p)
                x = o.found_lengths()
                row.update(sim_mean=o.mean(), sim_std=float(x.std()) if len(x) else None,
                           unfinished=o.unfinished_fraction)
            rows.append(row)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "curve.csv").write_text(rows_csv(rows, SWEEP_COLUMNS), newline="\n")
        meta = {"lbar": _num(lbar), "lbar_source": source, "config": cfg.as_dict()}
        (out / "sweep.json").write_text(_dump_json(meta), newline="\n")
    return rows


def rows_csv(rows: Iterable[Mapping], columns: list[str]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])
    return buf.getvalue()


# -- comparisons --------------------------------------------------------------------------

COMPARE_COLUMNS = ["mechanism", "reference", "p", "mechanism_mean", "reference_mean", "reduction_pct"]

_DEFAULT_PAIRS = (
    ("cf-rw", "rw"), ("cf-saw", "rw"), ("kf-rw", "rw"), ("kf-saw", "rw"),
    ("cf-saw", "cf-rw"), ("kf-saw", "kf-rw"), ("kf-rw", "cf-rw"),
)


def reduction_pct(mean: float, reference_mean: float) -> float:
    return 100.0 * (1.0 - mean / reference_mean)


def compare_mechanisms(
    means: Mapping[tuple[str, float | None], float],
    pairs: Iterable[tuple[str, str]] = _DEFAULT_PAIRS,
) -> list[dict]:
    """Percentage reduction of mean search length of each mechanism against a reference.

    ``means`` maps ``(mechanism, p)`` to a mean length; the baseline is
    stored as ``("rw", None)`` and serves every ``p``.
    """
    if not any(m == "rw" for m, _ in means):
        raise ValueError("compare_mechanisms needs a baseline ('rw', None) entry")
    rows = []
    ps = sorted({p for m, p in means if p is not None})
    for mech, ref in pairs:
        for p in ps:
            if (mech, p) not in means:
                continue
            ref_key = ("rw", None) if ref == "rw" else (ref, p)
            if ref_key not in means:
                continue
            a, b = means[(mech, p)], means[ref_key]
            rows.append({"mechanism": mech, "reference": ref, "p": p, "mechanism_mean": a,
                         "reference_mean": b, "reduction_pct": reduction_pct(a, b)})
    return rows


def compare(cfg: ExperimentConfig, mechanisms: Iterable[str] = ("cf-rw", "cf-saw"),
            net: Network | None = None, write: bool = True) -> list[dict]:
    """Baseline plus each mechanism at ``cfg.s[0]`` for every ``p``; reduction table."""
    if cfg.trials < 1:
        raise ValueError("compare needs trials >= 1")
    net = build_network(cfg) if net is None else net
    s = cfg.s[0]
    means: dict = {("rw", None): run_searches(net, "rw", cfg.trials, cfg.seed, hop_cutoff=cfg.cutoff).mean()}
    for mech in mechanisms:
        if mech == "rw":
            continue
        for p in cfg.p:
            means[(mech, p)] = simulate(net, cfg, mech, s, p).mean()
    rows = compare_mechanisms(means)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "reductions.csv").write_text(rows_csv(rows, COMPARE_COLUMNS), newline="\n")
    return rows


MODEL_COLUMNS = ["s", "w", "p", "variant", "policy", "model_length"]


def model_rows(stats, s_list, w: int, p_list, mechanisms, lbar: float | None) -> list[dict]:
    """Closed-form curve rows; ``cf-rw`` adds a ``theorem1`` row when ``lbar`` is known."""
    rows = []
    for mech in mechanisms:
        variant, policy = _MODEL_VARIANT[mech]
        for s in s_list:
            for p in p_list:
                if mech == "cf-rw" and lbar:
                    rows.append({"s": s, "w": w, "p": p, "variant": "theorem1", "policy": "choose",
                                 "model_length": model.theorem1_length(s, lbar, p)})
                try:
                    val = model.unified_length(stats, s, w, p, variant, policy)
                except model.ModelRangeError:
                    val = None
                rows.append({"s": s, "w": w, "p": p, "variant": variant, "policy": policy,
                             "model_length": val})
    return rows
