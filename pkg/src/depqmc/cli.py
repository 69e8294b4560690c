"""Command-line interface.

Subcommands: ingest, synth, gof, price, forecast, sample, train-gmmn,
fit-copula, fit-garch.  Studies read a JSON config (--config) whose keys
match ExperimentConfig fields; command-line flags override config keys.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import copulas, datasets, experiments, garch, gmmn
from .experiments import ExperimentConfig


def _add_common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--model", dest="models",
                   help="comma-separated dependence models (overrides config)")
    p.add_argument("--sampling", choices=["pseudo", "quasi"],
                   help="sampling kind (overrides config)")
    p.add_argument("--data", help="price CSV path (overrides config)")


def _build_config(args, pipeline, **extra):
    overrides = {
        "pipeline": pipeline,
        "seed": args.seed,
        "out": args.out,
        "models": args.models,
        "sampling": args.sampling,
        "data": args.data,
    }
    overrides.update(extra)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return experiments.config_from_json(args.config, **overrides)
    return ExperimentConfig(**overrides)


def _margin_uniforms(args, pipeline="gof"):
    cfg = _build_config(args, pipeline, margins=getattr(args, "margins", None))
    table, train, _ = experiments._load_split(cfg)
    U, margin_model = experiments.training_uniforms(cfg, train)
    return cfg, train, U, margin_model


def cmd_ingest(args):
    table = datasets.ingest_csv(args.path)
    print(f"ok: {len(table.dates)} rows ({table.n_returns} return periods), "
          f"{table.dim} tickers: {', '.join(table.tickers)}")
    print(f"dates {table.dates[0]} .. {table.dates[-1]}")
    return 0


def cmd_synth(args):
    if args.kind == "gbm":
        table = datasets.synthetic_gbm_table(n=args.n, d=args.d,
                                             rate=args.rate, seed=args.seed)
    elif args.kind == "garch":
        table = datasets.synthetic_garch_table(n=args.n, d=args.d,
                                               seed=args.seed)
    else:
        table = datasets.synthetic_uniform_table(n=args.n, d=args.d,
                                                 seed=args.seed)
    datasets.write_csv(table, args.path)
    print(f"wrote {args.path}: {len(table.dates)} rows, d={table.dim}, "
          f"kind={args.kind}, seed={args.seed}")
    return 0


def cmd_gof(args):
    cfg = _build_config(args, "gof", n_rep=args.n_rep, n_gen=args.n_gen,
                        margins=args.margins)
    rows = experiments.run_gof(cfg)
    print(f"wrote {os.path.join(cfg.out, 'gof.csv')} ({len(rows)} rows)")
    return 0


def cmd_price(args):
    cfg = _build_config(args, "price", n_rep=args.n_rep, n_pth=args.n_pth,
                        maturities=args.maturities)
    rows = experiments.run_price(cfg)
    print(f"wrote {os.path.join(cfg.out, 'prices.csv')} ({len(rows)} rows) "
          f"and price_summary.csv")
    return 0


def cmd_forecast(args):
    cfg = _build_config(args, "forecast", n_rep=args.n_rep, n_pth=args.n_pth,
                        horizons=args.horizons, margins="garch")
    rows = experiments.run_forecast(cfg)
    print(f"wrote {os.path.join(cfg.out, 'forecast.csv')} ({len(rows)} rows)")
    return 0


def _load_dependence_file(path):
    with open(path) as f:
        obj = json.load(f)
    if "dims" in obj:
        return gmmn.from_json(obj)
    return copulas.from_json(obj)


def cmd_sample(args):
    fitted = _load_dependence_file(args.model_file)
    if isinstance(fitted, gmmn.GmmnModel):
        d = fitted.dim
    elif isinstance(fitted, (copulas.NormalCopula, copulas.StudentTCopula)):
        d = fitted.dim
    else:
        d = args.d
        if d is None:
            raise SystemExit("--d is required for this copula family")
    kind = args.sampling or "pseudo"
    cube = experiments.sample_uniform_cube(fitted, d, args.n, args.n_gen,
                                           kind, args.seed or 0)
    with open(args.path, "w") as f:
        f.write(",".join(["path", "step"] + [f"u{j+1}" for j in range(d)]) + "\n")
        for i in range(cube.shape[0]):
            for k in range(cube.shape[1]):
                vals = ",".join(repr(float(x)) for x in cube[i, k])
                f.write(f"{i},{k + 1},{vals}\n")
    print(f"wrote {args.path}: {args.n} paths x {args.n_gen} steps, "
          f"d={d}, {kind}")
    return 0


def cmd_train_gmmn(args):
    cfg, _, U, _ = _margin_uniforms(args)
    tcfg = gmmn.TrainConfig(**cfg.gmmn)
    model = gmmn.train(U, tcfg, seed=experiments.derive_seed(cfg.seed, "fit", "gmmn"))
    gmmn.save_model(model, args.path)
    print(f"trained on {U.shape[0]} x {U.shape[1]} uniforms; "
          f"final loss {model.loss_history[-1]:.6f}; wrote {args.path}")
    return 0


def cmd_fit_copula(args):
    _, _, U, _ = _margin_uniforms(args)
    spec = copulas.fit_mpl(args.family, U)
    with open(args.path, "w") as f:
        json.dump(copulas.to_json(spec), f, indent=2)
    print(f"fitted {args.family} copula on {U.shape[0]} x {U.shape[1]} "
          f"uniforms; wrote {args.path}")
    return 0


def cmd_fit_garch(args):
    cfg = _build_config(args, "forecast", margins="garch")
    _, train, _ = experiments._load_split(cfg)
    model, U = garch.fit(train.log_returns(), burn=cfg.burn,
                         uniforms=cfg.uniforms)
    with open(args.path, "w") as f:
        json.dump(garch.to_json(model), f, indent=2, default=float)
    print(f"fitted {model.dim} margins on {train.n_returns} returns; "
          f"wrote {args.path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="depqmc",
        description="dependence-aware Monte Carlo / quasi-Monte Carlo engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a price CSV")
    p.add_argument("path")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic price CSV")
    p.add_argument("kind", choices=["gbm", "garch", "uniform"])
    p.add_argument("path")
    p.add_argument("--n", type=int, default=1250)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--rate", type=float, default=0.0005)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("gof", help="goodness-of-fit study (CvM statistics)")
    _add_common(p)
    p.add_argument("--n-rep", type=int, dest="n_rep")
    p.add_argument("--n-gen", type=int, dest="n_gen")
    p.add_argument("--margins", choices=["gbm", "garch", "none"])
    p.set_defaults(fn=cmd_gof)

    p = sub.add_parser("price", help="American basket call pricing study")
    _add_common(p)
    p.add_argument("--n-rep", type=int, dest="n_rep")
    p.add_argument("--n-pth", type=int, dest="n_pth")
    p.add_argument("--maturities", type=lambda s: tuple(int(x) for x in s.split(",")))
    p.set_defaults(fn=cmd_price)

    p = sub.add_parser("forecast", help="probabilistic forecasting study (AVS)")
    _add_common(p)
    p.add_argument("--n-rep", type=int, dest="n_rep")
    p.add_argument("--n-pth", type=int, dest="n_pth")
    p.add_argument("--horizons", type=lambda s: tuple(int(x) for x in s.split(",")))
    p.set_defaults(fn=cmd_forecast)

    p = sub.add_parser("sample", help="dump dependence samples to CSV")
    p.add_argument("model_file", help="GMMN or copula JSON file")
    p.add_argument("path", help="output CSV")
    p.add_argument("--n", type=int, default=1000, help="number of paths")
    p.add_argument("--n-gen", type=int, dest="n_gen", default=1,
                   help="samples per path")
    p.add_argument("--d", type=int, help="dimension (Clayton/independence)")
    p.add_argument("--sampling", choices=["pseudo", "quasi"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("train-gmmn", help="train a GMMN and save it as JSON")
    _add_common(p)
    p.add_argument("path", help="output model JSON")
    p.add_argument("--margins", choices=["gbm", "garch", "none"])
    p.set_defaults(fn=cmd_train_gmmn)

    p = sub.add_parser("fit-copula", help="fit a parametric copula, save JSON")
    _add_common(p)
    p.add_argument("family", choices=["independence", "clayton", "normal", "t"])
    p.add_argument("path", help="output spec JSON")
    p.add_argument("--margins", choices=["gbm", "garch", "none"])
    p.set_defaults(fn=cmd_fit_copula)

    p = sub.add_parser("fit-garch", help="fit ARMA-GARCH margins, save JSON")
    _add_common(p)
    p.add_argument("path", help="output model JSON")
    p.set_defaults(fn=cmd_fit_garch)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
