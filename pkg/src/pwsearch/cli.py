"""Command-line entry point: ``pwsearch <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, model, streams
from .graph import GraphGenerationError, degree_stats
from .search import Mechanism

log = logging.getLogger("pwsearch")


def _add_network(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--net", help="network file (overrides family/n/kmean)")
    g.add_argument("--family", choices=sorted(bench.FAMILIES))
    g.add_argument("--n", type=int)
    g.add_argument("--kmean", type=float)
    g.add_argument("--net-seed", type=int, dest="net_seed", help="graph generation seed")


def _add_experiment(p: argparse.ArgumentParser, lists: bool = False) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    _add_network(p)
    p.add_argument("--mechanism", choices=bench.MECHANISMS)
    p.add_argument("--s", help="partial-walk length" + (" (comma list)" if lists else ""))
    p.add_argument("--w", type=int, help="partial walks per node")
    p.add_argument("--p", help="filter false-positive probability" + (" (comma list)" if lists else ""))
    p.add_argument("--trials", type=int)
    p.add_argument("--mode", choices=("fresh", "reuse"))
    p.add_argument("--filter", choices=("ideal", "bloom"))
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--cutoff", type=int, help="hop cutoff (default 100*N)")
    p.add_argument("--bin-width", type=int, dest="bin_width")
    p.add_argument("--lbar", type=float, help="expected RW search length for the closed form")
    p.add_argument("--out", help="output directory")


_CFG_KEYS = ("family", "n", "kmean", "net_seed", "net", "mechanism", "s", "w", "p", "trials",
             "mode", "filter", "seed", "cutoff", "bin_width", "lbar", "out")


def _config(args: argparse.Namespace) -> bench.ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in _CFG_KEYS}
    return bench.load_config(args.config, **overrides)


def cmd_generate(args) -> int:
    cfg = _config(args)
    net = bench.build_network(cfg)
    net.validate()
    out = Path(args.out or "network.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    net.save(out)
    st = degree_stats(net)
    print(f"wrote {out}: N={net.n} edges={net.edge_count()} kbar={st.kbar:.6g} kbar_rw={st.kbar_rw:.6g}")
    return 0


def cmd_precompute(args) -> int:
    cfg = _config(args)
    if cfg.mechanism == "rw":
        raise ValueError("precompute needs a partial-walk mechanism")
    net = bench.build_network(cfg)
    mech = Mechanism.from_name(cfg.mechanism)
    table = bench.precompute_walk_tables(
        net, cfg.w, cfg.s[0], mech.kind, mech.registration_range, bench.filter_config(cfg, cfg.p[0]),
        streams.derive_seed(cfg.seed, streams.TABLE_SEED),
    )
    out = Path(args.out or "walks.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    table.save(out)
    print(f"wrote {out}: N={table.n} w={table.w} s={table.s} construction_cost={table.construction_cost}")
    return 0


def cmd_search(args) -> int:
    res = bench.run(_config(args))
    s = res.summary
    print(f"{s['mechanism']}: mean={s['mean']:.6g} std={s['std']:.6g} "
          f"unfinished={s['unfinished_fraction']:.6g} trials={s['trials']} -> {res.config.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows = bench.sweep(cfg)
    sys.stdout.write(bench.rows_csv(rows, bench.SWEEP_COLUMNS))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    mechs = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
    for m in mechs:
        if m not in bench.MECHANISMS:
            raise ValueError(f"unknown mechanism {m!r}")
    rows = bench.compare(cfg, mechs)
    sys.stdout.write(bench.rows_csv(rows, bench.COMPARE_COLUMNS))
    return 0


def cmd_model(args) -> int:
    cfg = _config(args)
    net = bench.build_network(cfg)
    stats = degree_stats(net)
    mechs = [m.strip() for m in args.mechanisms.split(",")] if args.mechanisms else [cfg.mechanism]
    if "rw" in mechs:
        raise ValueError("the model covers partial-walk mechanisms only")
    lbar = cfg.lbar
    if lbar is None:
        _, lbar = model.rw_length_pmf(net.n, 10 * net.n)
    rows = bench.model_rows(stats, cfg.s, cfg.w, cfg.p, mechs, lbar)
    text = bench.rows_csv(rows, bench.MODEL_COLUMNS)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "model.csv").write_text(text, newline="\n")
        (out / "model.json").write_text(json.dumps({"lbar": lbar, "config": cfg.as_dict()}, indent=2) + "\n")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwsearch", description="Partial-walk search experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a network file")
    p.add_argument("--config")
    _add_network(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("precompute", help="build and save partial-walk tables")
    _add_experiment(p)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("search", help="run one batch of searches")
    _add_experiment(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="simulation and model over an s or p grid")
    _add_experiment(p, lists=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="reduction table against the RW baseline")
    _add_experiment(p, lists=True)
    p.add_argument("--mechanisms", default="cf-rw,cf-saw", help="comma list of mechanisms")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("model", help="closed-form predictions only")
    _add_experiment(p, lists=True)
    p.add_argument("--mechanisms", help="comma list of mechanisms (default: --mechanism)")
    p.set_defaults(func=cmd_model)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, GraphGenerationError, OSError) as exc:
        print(f"pwsearch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
