"""Command-line front door: ingestion, backtests, statistics, long-term
profiles, forward curves and embedding exports."""

import argparse
import hashlib
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import __version__, backtest, hpfc, insight, models, nnkit, stats, svgplot
from .data import (SynthConfig, align, load_futures_csv, load_hourly_csv,
                   synth_generate, write_hourly_csv)
from .models import make_model


def _read_config_file(path):
    kv = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    return kv


def _config_hash(args):
    # jobs only controls parallelism and out only the destination; outputs are
    # independent of both, so they must not change the reproducibility hash
    skip = {"func", "config", "jobs", "out"}
    items = sorted(
        f"{k}={v}" for k, v in vars(args).items()
        if k not in skip and not callable(v)
    )
    return hashlib.sha256("\n".join(items).encode()).hexdigest()[:16]


def _header(args):
    return (
        f"epfkit {__version__}\n"
        f"seed={getattr(args, 'seed', None)}\n"
        f"config_hash={_config_hash(args)}"
    )


def _comment_svg(path, header):
    text = Path(path).read_text()
    comment = "<!--\n" + header + "\n-->\n"
    Path(path).write_text(comment + text)


def _write_text(path, content, header):
    with open(path, "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write(content)


def _parse_date(text):
    return date.fromisoformat(text)


def _load_dataset(args):
    price = load_hourly_csv(args.price, ["price_eur_mwh"])["price_eur_mwh"]
    if getattr(args, "renewables", None):
        renew = load_hourly_csv(args.renewables, ["wind_mw", "solar_mw"])
        return align(price, renew["wind_mw"], renew["solar_mw"])
    return align(price)


def _model_overrides(args):
    overrides = {}
    if getattr(args, "learning_rate", None):
        overrides["learning_rate"] = args.learning_rate
    if getattr(args, "batch_size", None):
        overrides["batch_size"] = args.batch_size
    return overrides or None


def _safe_name(model_id):
    return model_id.replace("+", "_")


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = SynthConfig()
    seed = args.seed
    if args.params:
        file_seed, params = SynthConfig.from_file(args.params)
        if args.seed is None:
            seed = file_seed
    if seed is None:
        raise SystemExit("synth requires --seed (or seed= in --params)")
    dataset = synth_generate(int(seed), args.from_date, args.to_date, params)
    header = _header(args)
    write_hourly_csv(out / "price.csv", dataset.price, "price_eur_mwh", header)
    with open(out / "renewables.csv", "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write("timestamp,wind_mw,solar_mw\n")
        for key, w, s in zip(dataset.price.keys, dataset.wind.values,
                             dataset.solar.values):
            d, h = date.fromordinal(int(key) // 24), int(key) % 24
            fh.write(f"{d.isoformat()}T{h:02d}:00,{float(w)!r},{float(s)!r}\n")
    print(f"wrote {out / 'price.csv'} and {out / 'renewables.csv'}")
    return 0


def cmd_backtest(args):
    if args.to_date < args.from_date:
        raise UsageError("--to before --from")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(args)
    header = _header(args)
    reports = []
    for model_id in args.models.split(","):
        model_id = model_id.strip()
        report = backtest.rolling_backtest(
            model_id, dataset, args.from_date, args.to_date,
            window_years=args.window_years, base_seed=args.seed,
            jobs=args.jobs, overrides=_model_overrides(args),
        )
        report.to_csv(out / f"ledger_{_safe_name(model_id)}.csv", header)
        reports.append(report)
        print(f"{model_id}: overall MAE {report.overall_mae():.4f}")
    _write_text(out / "yearly_table.txt", backtest.yearly_table(reports), header)
    if args.diagnostics:
        _emit_diagnostics(out, reports, header)
    return 0


def _emit_diagnostics(out, reports, header):
    for report in reports:
        name = _safe_name(report.model_id)
        _, errs = report.hourly_errors()
        abs_errs = np.abs(errs)
        max_lag = min(168, len(abs_errs) - 1)
        acf_vals = backtest.acf(abs_errs, max_lag)
        pacf_vals = backtest.pacf(abs_errs, max_lag)
        rows = "lag,acf_abs,pacf_abs\n" + "".join(
            f"{lag},{float(a)!r},{float(p)!r}\n"
            for lag, (a, p) in enumerate(zip(acf_vals, pacf_vals), start=1)
        )
        _write_text(out / f"autocorr_{name}.csv", rows, header)
        bound = 2.0 / np.sqrt(len(abs_errs))
        svgplot.stem_svg(pacf_vals, out / f"pacf_{name}.svg",
                         f"PACF of |errors| ({report.model_id})", threshold=bound)
        _comment_svg(out / f"pacf_{name}.svg", header)
        for group in ("hour", "weekday10", "month"):
            stats_by_cat = backtest.group_error_stats(report, group)
            groups = [(str(c), s) for c, s in sorted(stats_by_cat.items())]
            svgplot.boxplot_svg(groups, out / f"errors_{group}_{name}.svg",
                                f"errors by {group} ({report.model_id})")
            _comment_svg(out / f"errors_{group}_{name}.svg", header)


def cmd_stats(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ledgers = {}
    for path in args.ledgers:
        report = backtest.BacktestReport.from_csv(path)
        model_id = Path(path).stem.removeprefix("ledger_")
        dates, errs = report.daily_errors()
        ledgers[model_id] = dict(zip(dates, errs))
    common = sorted(set.intersection(*(set(v) for v in ledgers.values())))
    if len(common) < 2:
        raise SystemExit("need at least 2 common scored days across ledgers")
    methods = tuple(ledgers)
    samples = np.array([[ledgers[m][d] for m in methods] for d in common])
    ranking = stats.holm_vs_control(
        stats.ScoreMatrix(methods, samples), control=args.control
    )
    header = _header(args)
    rows = "method,avg_aligned_rank,holm_adjusted_p_vs_control\n"
    for m in ranking.rank_order:
        p = "" if m == ranking.control else repr(float(ranking.adjusted_p[m]))
        rows += f"{m},{float(ranking.avg_ranks[m])!r},{p}\n"
    rows += f"# omnibus_p={float(ranking.omnibus_p)!r} control={ranking.control}\n"
    _write_text(out / "ranking.csv", rows, header)
    matrix, order = ranking.pairwise, ranking.rank_order
    mrows = "method," + ",".join(order) + "\n"
    for i, m in enumerate(order):
        mrows += m + "," + ",".join(repr(float(v)) for v in matrix[i]) + "\n"
    _write_text(out / "matrix.csv", mrows, header)
    svgplot.heatmap_svg(matrix, order, out / "heatmap.svg",
                        "Holm-adjusted pairwise p-values")
    _comment_svg(out / "heatmap.svg", header)
    print(f"control: {ranking.control} (omnibus p {ranking.omnibus_p:.3g})")
    return 0


def cmd_ltf(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(args)
    years = [int(y) for y in args.years.split(",")]
    header = _header(args)
    rows = "model,year,hdev_mae,ddev_mae,n_days\n"
    for model_id in args.models.split(","):
        model_id = model_id.strip()
        result = backtest.ltf_eval(model_id, dataset, eval_years=years,
                                   overrides=_model_overrides(args),
                                   base_seed=args.seed)
        for year in years:
            r = result[year]
            rows += (f"{model_id},{year},{float(r['hdev_mae'])!r},"
                     f"{float(r['ddev_mae'])!r},{r['n_days']}\n")
        m = result["mean"]
        rows += (f"{model_id},mean,{float(m['hdev_mae'])!r},"
                 f"{float(m['ddev_mae'])!r},\n")
        print(f"{model_id}: mean hdev MAE {m['hdev_mae']:.4f}, "
              f"ddev MAE {m['ddev_mae']:.4f}")
    _write_text(out / "ltf_table.csv", rows, header)
    return 0


def cmd_hpfc(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(args)
    model = make_model(args.model, seed=args.seed or 0,
                       overrides=_model_overrides(args))
    model.fit(dataset.window(date(1, 1, 2), args.train_until), as_of=args.train_until)
    profile = hpfc.build_profile(model, args.from_date, args.to_date)
    quotes = load_futures_csv(args.quotes) if args.quotes else []
    curve = hpfc.shift_to_quotes(profile, quotes, profile_id=args.model)
    header = _header(args)
    write_hourly_csv(out / "curve.csv", curve.series, "price_eur_mwh", header)
    report = hpfc.verify_no_arbitrage(curve, quotes)
    rows = "delivery_start,delivery_end,load_shape,price,residual,pass\n"
    for entry in report:
        q = entry["quote"]
        rows += (f"{q.delivery_start},{q.delivery_end},{q.load_shape},"
                 f"{float(q.price)!r},{float(entry['residual'])!r},"
                 f"{entry['pass']}\n")
    _write_text(out / "residuals.csv", rows, header)
    ok = all(e["pass"] for e in report)
    print(f"curve written; arbitrage check {'passed' if ok else 'FAILED'}")
    return 0 if ok else 1


def cmd_embeddings(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = models.load_model(args.model)
    tables = model.embedding_tables()
    header = _header(args)
    for name, table in tables.items():
        labels = insight.default_labels(name, table.shape[0])
        lv = insight.LabeledVectors(labels, table)
        insight.export_tsv(lv, out / f"{name}_vectors.tsv",
                           out / f"{name}_metadata.tsv")
        if table.shape[0] >= 3 and table.shape[1] >= 2:
            proj = insight.pca2(lv)
            svgplot.scatter_svg(proj["coords"], labels, out / f"{name}_pca.svg",
                                f"{name} embedding (PCA)")
            _comment_svg(out / f"{name}_pca.svg", header)
    print(f"exported {len(tables)} embedding tables to {out}")
    return 0


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed or 0)
    worst = 0.0
    for i in range(args.networks):
        n_cont = int(rng.integers(0, 4))
        emb = []
        if rng.random() < 0.7 or n_cont == 0:
            emb = [("v", int(rng.integers(3, 8)), int(rng.integers(1, 4)))]
        config = nnkit.NetworkConfig(
            hidden_layers=2,
            neurons=(int(rng.integers(2, 8)), int(rng.integers(2, 8))),
            hidden_activation="relu" if rng.random() < 0.5 else "sigmoid",
        )
        net = nnkit.Network(n_cont, emb, config, seed=int(rng.integers(1 << 31)))
        # jitter all parameters (notably the zero-initialized biases) so no
        # relu pre-activation sits exactly on the kink, where central
        # differences straddle the non-differentiability
        for p in net.params:
            p.data = p.data + 0.05 * rng.standard_normal(p.data.shape)
        n = 8
        x_cont = rng.standard_normal((n, n_cont))
        x_idx = (rng.integers(0, emb[0][1], (n, 1)) if emb else None)
        y = rng.standard_normal(n)
        # a real gradient bug shows at every step size; a relu kink crossing
        # disappears once epsilon drops below the pre-activation margin
        err = min(nnkit.grad_check(net, (x_cont, x_idx, y), epsilon=e)
                  for e in (1e-5, 1e-6, 1e-7))
        worst = max(worst, err)
    print(f"max relative gradient error over {args.networks} networks: {worst:.3e}")
    return 0 if worst < 1e-4 else 1


class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(prog="epfkit")
    parser.add_argument("--config", help="flat key-value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, training=False):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=1)
        if training:
            p.add_argument("--learning-rate", type=float, default=None)
            p.add_argument("--batch-size", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--from", dest="from_date", type=_parse_date, required=True)
    p.add_argument("--to", dest="to_date", type=_parse_date, required=True)
    p.add_argument("--params", help="synthesis config file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("backtest", help="rolling daily-recalibration backtest")
    common(p, training=True)
    p.add_argument("--price", required=True)
    p.add_argument("--renewables")
    p.add_argument("--models", required=True)
    p.add_argument("--from", dest="from_date", type=_parse_date, required=True)
    p.add_argument("--to", dest="to_date", type=_parse_date, required=True)
    p.add_argument("--window-years", type=int, default=5)
    p.add_argument("--diagnostics", action="store_true")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("stats", help="Friedman aligned ranks + Holm post-hoc")
    common(p)
    p.add_argument("--ledgers", nargs="+", required=True)
    p.add_argument("--control")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ltf", help="long-term profile evaluation (hDev/dDev)")
    common(p, training=True)
    p.add_argument("--price", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--years", default="2015,2016,2017,2018,2019")
    p.set_defaults(func=cmd_ltf)

    p = sub.add_parser("hpfc", help="build an hourly price forward curve")
    common(p, training=True)
    p.add_argument("--price", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train-until", type=_parse_date, required=True)
    p.add_argument("--from", dest="from_date", type=_parse_date, required=True)
    p.add_argument("--to", dest="to_date", type=_parse_date, required=True)
    p.add_argument("--quotes")
    p.set_defaults(func=cmd_hpfc)

    p = sub.add_parser("embeddings", help="export trained embedding tables")
    common(p)
    p.add_argument("--model", required=True, help="saved DNN model file")
    p.set_defaults(func=cmd_embeddings)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    common(p)
    p.add_argument("--networks", type=int, default=50)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = _read_config_file(args.config)
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if getattr(args, attr, None) is None:
                current = getattr(args, attr, None)
                setattr(args, attr, type(current)(value) if current is not None else value)
    try:
        if getattr(args, "seed", None) is None and args.command in (
            "backtest", "ltf", "hpfc",
        ):
            raise UsageError(f"--seed is mandatory for {args.command}")
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"usage error: {exc}\n")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
