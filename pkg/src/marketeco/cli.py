"""Command-line entry point: ingest, analyze, simulate, fixture.

Commands emit plot-ready delimited tables plus key-value fit records; no
plotting here.  Every command is deterministic given (inputs, flags, seed);
a run manifest lists the artifacts (its wall-clock field is the one
non-reproducible output).  Exit codes: 0 success, 1 data/numeric error,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from . import codependence
from . import community
from . import distributions as dist
from . import neutralsim
from . import panel as panel_mod
from . import sad as sad_mod
from . import spr as spr_mod
from . import turnover as turnover_mod
from .errors import MarketEcoError
from .panel import Period

SIGMA_DECAY_THRESHOLD = math.sqrt(3.0)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return out.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


class OutputDir:
    def __init__(self, root: Path, force: bool):
        self.root = root
        self.force = force
        self.written: "list[str]" = []
        root.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        target = self.root / name
        if target.exists() and not self.force:
            raise UsageError(f"{target} exists; pass --force to overwrite")
        target.write_text(text, encoding="utf-8")
        self.written.append(name)

    def manifest(self, command: str, inputs, params, seed, t_start: float) -> None:
        body = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "inputs": [str(p) for p in inputs],
            "parameters": params,
            "outputs": list(self.written),
            "wall_clock_s": round(time.monotonic() - t_start, 3),
        }
        target = self.root / "manifest.json"
        if target.exists() and not self.force:
            raise UsageError(f"{target} exists; pass --force to overwrite")
        target.write_text(_json_text(body), encoding="utf-8")


def _read_panel(path: Path) -> panel_mod.MarketPanel:
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    rows = panel_mod.parse_snapshot_csv(path.read_text(encoding="utf-8").splitlines())
    return panel_mod.load_panel(rows)


def _parse_date(token: str) -> date:
    try:
        return date.fromisoformat(token)
    except ValueError as exc:
        raise UsageError(f"bad date {token!r} (expect YYYY-MM-DD)") from exc


def _period_from(args, pan: panel_mod.MarketPanel) -> Period:
    if args.period:
        return Period(_parse_date(args.period[0]), _parse_date(args.period[1]))
    regimes = panel_mod.segment_regimes()
    start, end = regimes.stationary_start, regimes.stationary_end
    # fall back to the full panel when the default regime misses it entirely
    if end < pan.weeks[0] or start > pan.weeks[-1]:
        return Period(pan.weeks[0], pan.weeks[-1])
    return Period(max(start, pan.weeks[0]), min(end, pan.weeks[-1]))


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    t0 = time.monotonic()
    out = OutputDir(Path(args.output), args.force)
    pan = _read_panel(Path(args.input))
    if not args.no_fill:
        pan = panel_mod.fill_gaps(pan, mode=args.fill_mode)
    rates = panel_mod.activity_and_rates(pan, smooth_weeks=args.smooth_weeks, denominator=args.denominator)
    out.write("panel.csv", panel_mod.panel_to_csv(pan))
    out.write("rates.csv", panel_mod.rates_to_csv(rates))
    out.manifest(
        "ingest", [args.input],
        {"no_fill": args.no_fill, "fill_mode": args.fill_mode,
         "smooth_weeks": args.smooth_weeks, "denominator": args.denominator},
        args.seed, t0,
    )
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _analyze_sad(pan, period, args, out: OutputDir):
    sample = sad_mod.build_sad(pan, period, aggregation=args.aggregation)
    report = sad_mod.fit_and_test(sample)
    hist = report.histogram
    out.write("sad_histogram.csv", _csv_text(
        ["log_share_bin_center", "density", "count"],
        zip(hist.centers.tolist(), hist.density.tolist(), hist.counts.tolist()),
    ))
    out.write("sad_report.json", _json_text({
        "period": [period.start.isoformat(), period.end.isoformat()],
        "n": report.n,
        "lognormal": {"params": report.lognormal.params, "loglik": report.lognormal.loglik,
                      "ks_d": report.lognormal.ks.statistic, "ks_p": report.lognormal.ks.p_value},
        "fisher": {"params": report.fisher.params, "loglik": report.fisher.loglik,
                   "ks_d": report.fisher.ks.statistic, "ks_p": report.fisher.ks.p_value},
        "verdict": report.verdict,
        "mode_diagnostic": {
            "verdict": report.mode.verdict,
            "peak_index": report.mode.peak_index,
            "n_bins": report.mode.n_bins,
            "z_score": report.mode.z_score,
            "prominence": report.mode.prominence,
        },
    }))


def _analyze_spr(pan, period, args, out: OutputDir):
    points = spr_mod.scan_windows(pan, period, widths=range(1, args.max_width + 1))
    fits = spr_mod.fit_spr(points)
    out.write("spr_points.csv", _csv_text(
        ["width_weeks", "total_cap", "n_species"],
        [(p.width_weeks, p.total_cap, p.n_species) for p in points],
    ))
    out.write("spr_fits.json", _json_text({
        "log_form": {"alpha": fits.alpha, "rmse": fits.log_rmse, "r_squared": fits.log_r_squared},
        "power_form": {"k": fits.power_k, "z": fits.power_z, "rmse": fits.power_rmse,
                       "r_squared": fits.power_fit.r_squared},
        "z_in_range": fits.z_in_range,
        "weak_dependence": fits.weak_dependence,
    }))


def _analyze_std(pan, period, args, out: OutputDir):
    lags = tuple(args.lags)
    samples = turnover_mod.collect_ratios(pan, period, lags=lags)
    reports = turnover_mod.std_report(samples)
    fit_summary = {}
    for lag, rep in sorted(reports.items()):
        out.write(f"std_lag_{lag}.csv", _csv_text(
            ["r_bin_center", "empirical_density", "fitted_density"],
            zip(rep.histogram.centers.tolist(), rep.histogram.density.tolist(),
                rep.fitted_density.tolist()),
        ))
        fit_summary[str(lag)] = {
            "n": rep.n,
            "shape": rep.fitted.shape,
            "timescale": rep.fitted.timescale,
            "loglik": rep.loglik,
            "asymmetry": rep.asymmetry,
        }
    out.write("std_fits.json", _json_text(fit_summary))


def _analyze_community(pan, period, args, out: OutputDir):
    horizon = args.horizon_months
    t0_date = _parse_date(args.t0) if args.t0 else pan.weeks[pan.period_slice(period)[0]]
    series = community.similarity_decay(pan, t0_date, horizon)
    fits = community.decay_model_selection(series)
    out.write("rs_series.csv", _csv_text(
        ["lag_months", "r_s"], zip(series.lags_months.tolist(), series.r_s.tolist()),
    ))
    out.write("rs_fits.json", _json_text({
        "origin": series.origin.isoformat(),
        "universe_size": series.universe_size,
        "linear": {"slope": fits.linear.slope, "intercept": fits.linear.intercept,
                   "r_squared": fits.linear.r_squared, "rmse": fits.linear_rmse},
        "exponential": {"amplitude": fits.exp_amplitude, "rate": fits.exp_rate, "rmse": fits.exp_rmse},
        "winner": fits.winner,
    }))
    # yearly diversity points over the panel span
    intervals = []
    lo, hi = 0, pan.n_weeks
    year = 52
    for start in range(lo, hi - year + 1, year):
        intervals.append(Period(pan.weeks[start], pan.weeks[start + year - 1]))
    if intervals:
        points = community.beta_vs_alpha(pan, intervals)
        out.write("beta_alpha.csv", _csv_text(
            ["interval_start", "interval_end", "richness", "beta_slope"],
            [(p.interval.start.isoformat(), p.interval.end.isoformat(), p.richness, p.beta_slope)
             for p in points],
        ))
    occ = community.occurrence_vs_abundance(pan, period)
    out.write("occurrence.csv", _csv_text(
        ["asset_id", "occurrence", "mean_cap"], occ,
    ))


def _analyze_correlations(pan, period, args, out: OutputDir):
    subset = codependence.select_persistent(pan, period)
    report = codependence.correlation_matrix(
        pan, subset, period, k_top=args.top_k, n_null=args.n_null, seed=args.seed,
    )
    header = ["asset_id"] + report.asset_order
    rows = [[a] + report.matrix[i].tolist() for i, a in enumerate(report.asset_order)]
    out.write("corr_matrix.csv", _csv_text(header, rows))
    top = report.top_block
    top_ids = report.asset_order[-report.k_top:]
    out.write("corr_top_block.csv", _csv_text(
        ["asset_id"] + top_ids, [[a] + top[i].tolist() for i, a in enumerate(top_ids)],
    ))
    auto = codependence.autocorrelation(
        pan, subset, period, tau=args.tau, n_realizations=args.n_realizations, seed=args.seed,
    )
    out.write("autocorr.csv", _csv_text(
        ["asset_id", "total_cap", "r_a"],
        zip(auto.asset_order, auto.total_cap.tolist(), auto.r_a.tolist()),
    ))
    out.write("corr_summary.json", _json_text({
        "n_assets": len(report.asset_order),
        "k_top": report.k_top,
        "pair_null": {"low": report.null_low, "high": report.null_high,
                      "mean": report.null_mean, "sem": report.null_sem},
        "autocorr_null": {"low": auto.null_low, "high": auto.null_high, "tau": auto.tau},
    }))


_ANALYZERS = {
    "sad": _analyze_sad,
    "spr": _analyze_spr,
    "std": _analyze_std,
    "community": _analyze_community,
    "correlations": _analyze_correlations,
}


def cmd_analyze(args) -> int:
    t0 = time.monotonic()
    out = OutputDir(Path(args.output), args.force)
    pan = _read_panel(Path(args.panel))
    period = _period_from(args, pan)
    _ANALYZERS[args.what](pan, period, args, out)
    params = {"what": args.what, "period": [period.start.isoformat(), period.end.isoformat()]}
    out.manifest("analyze", [args.panel], params, args.seed, t0)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    out = OutputDir(Path(args.output), args.force)
    if args.preset == "fig6":
        preset = neutralsim.FIG_PRESET
        n_total, rho, sigma, b, s = (preset["n_total"], preset["rho"], preset["sigma"],
                                     preset["b"], preset["s"])
    else:
        n_total, rho, sigma, b, s = args.n_total, args.rho, args.sigma, args.b, args.s
    if sigma <= SIGMA_DECAY_THRESHOLD:
        print(
            f"warning: sigma={sigma:g} <= sqrt(3); the exponential similarity decay "
            "of this model was established only for sigma > sqrt(3)",
            file=sys.stderr,
        )
    cfg = neutralsim.SimConfig(
        n_total=n_total, s=s, rho=rho, sigma=sigma, b=b,
        generations=args.generations, seed=args.seed, boundary_mode=args.boundary_mode,
    )
    result = neutralsim.run(cfg, record_stride=args.stride)
    pan = neutralsim.to_panel(result.snapshots)
    out.write("panel.csv", panel_mod.panel_to_csv(pan))
    out.write("events.csv", _csv_text(
        ["generation", "species", "kind"], result.events(),
    ))
    rs_payload = {"config": {"n_total": n_total, "s": s, "rho": rho, "sigma": sigma, "b": b,
                             "generations": args.generations, "stride": args.stride,
                             "boundary_mode": args.boundary_mode},
                  "conservation_max_rel_err": float(np.abs(result.gen_sums - n_total).max() / n_total)}
    try:
        series, fits = neutralsim.model_rs_decay(result, target=args.target)
        out.write("rs_series.csv", _csv_text(
            ["lag_months", "r_s"], zip(series.lags_months.tolist(), series.r_s.tolist()),
        ))
        rs_payload["decay"] = {
            "target_reached": True,
            "linear_rmse": fits.linear_rmse,
            "exponential_rmse": fits.exp_rmse,
            "winner": fits.winner,
            "linear_slope": fits.linear.slope,
            "exponential_rate": fits.exp_rate,
        }
    except MarketEcoError as exc:
        rs_payload["decay"] = {"target_reached": False, "note": str(exc)}
    out.write("rs_report.json", _json_text(rs_payload))
    out.manifest("simulate", [], rs_payload["config"], args.seed, t0)
    return 0


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def _fixture_single_week_panel(values: np.ndarray, prefix: str) -> str:
    width = max(4, len(str(values.size - 1)))
    rows = [
        panel_mod.SnapshotRow(date(2015, 1, 4), f"{prefix}{i:0{width}d}", f"{prefix}{i:0{width}d}", float(v))
        for i, v in enumerate(values)
    ]
    return panel_mod.panel_to_csv(panel_mod.load_panel(rows))


def _fixture_churn_panel(args, gen) -> str:
    weeks = args.weeks
    n0 = args.assets
    spec_rate = args.spec_rate
    ext_rate = args.ext_rate
    rows = []
    active = {f"a{i:05d}" for i in range(n0)}
    counter = n0
    day = date(2015, 1, 4)
    for w in range(weeks):
        if w > 0:
            n_active = len(active)
            n_new = int(round(spec_rate * n_active))
            n_dead = int(round(ext_rate * n_active))
            dead = sorted(active)[:0] if n_dead == 0 else [
                sorted(active)[i] for i in gen.choice(len(active), size=n_dead, replace=False)
            ]
            for a in dead:
                active.discard(a)
            for _ in range(n_new):
                active.add(f"a{counter:05d}")
                counter += 1
        for a in sorted(active):
            cap = 1000.0 + 10.0 * (hash(a) % 97)
            rows.append(panel_mod.SnapshotRow(day, a, a, cap))
        day = day + panel_mod.WEEK
    return panel_mod.panel_to_csv(panel_mod.load_panel(rows))


def cmd_fixture(args) -> int:
    t0 = time.monotonic()
    out = OutputDir(Path(args.output), args.force)
    gen = np.random.Generator(np.random.Philox(key=np.array([args.seed, 0], dtype=np.uint64)))
    if args.kind == "lognormal-sad":
        vals = np.exp(gen.normal(args.mu, args.sigma_log, args.n))
        out.write("panel.csv", _fixture_single_week_panel(vals, "ln"))
    elif args.kind == "fisher-sad":
        params = dist.FisherParams(c=args.c, x_min=args.x_min)
        vals = dist.fisher_sample(args.n, params, gen)
        out.write("panel.csv", _fixture_single_week_panel(vals, "fi"))
    elif args.kind == "neutral-panel":
        cfg = neutralsim.SimConfig(
            n_total=args.n_total, s=args.s, rho=args.rho, sigma=args.sigma, b=args.b,
            generations=args.generations, seed=args.seed,
        )
        result = neutralsim.run(cfg, record_stride=1)
        out.write("panel.csv", panel_mod.panel_to_csv(neutralsim.to_panel(result.snapshots)))
        out.write("events.csv", _csv_text(["generation", "species", "kind"], result.events()))
    elif args.kind == "churn-panel":
        out.write("panel.csv", _fixture_churn_panel(args, gen))
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown fixture kind {args.kind}")
    out.manifest("fixture", [], {"kind": args.kind}, args.seed, t0)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marketeco", description=__doc__)
    p.add_argument("--version", action="version", version=f"marketeco {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        sp.add_argument("--threads", type=int, default=1, help="reserved; analyses are deterministic and single-threaded")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
        sp.add_argument("-o", "--output", required=True, help="output directory")

    sp = sub.add_parser("ingest", help="parse snapshots, fill gaps, compute activity rates")
    sp.add_argument("input")
    common(sp)
    sp.add_argument("--no-fill", action="store_true", help="skip internal gap filling")
    sp.add_argument("--fill-mode", choices=["constant", "linear"], default="constant")
    sp.add_argument("--smooth-weeks", type=int, default=4)
    sp.add_argument("--denominator", choices=["current", "previous"], default="current")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("analyze", help="run one analysis on a panel file")
    sp.add_argument("panel")
    sp.add_argument("--what", choices=sorted(_ANALYZERS), required=True)
    common(sp)
    sp.add_argument("--period", nargs=2, metavar=("START", "END"),
                    help="analysis period (default: the stationary regime)")
    sp.add_argument("--aggregation", choices=["mean_share", "weekly_pool"], default="mean_share")
    sp.add_argument("--max-width", type=int, default=10, help="largest SPR window in weeks")
    sp.add_argument("--lags", type=int, nargs="+", default=list(turnover_mod.DEFAULT_LAGS))
    sp.add_argument("--horizon-months", type=int, default=12)
    sp.add_argument("--t0", help="origin date for the similarity decay")
    sp.add_argument("--top-k", type=int, default=25)
    sp.add_argument("--n-null", type=int, default=10)
    sp.add_argument("--n-realizations", type=int, default=10)
    sp.add_argument("--tau", type=int, default=1)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="run the neutral-community model")
    common(sp)
    sp.add_argument("--preset", choices=["fig6"], help="published demo configuration")
    sp.add_argument("--n-total", type=float, default=1e6)
    sp.add_argument("--s", type=int, default=200)
    sp.add_argument("--rho", type=float, default=3.5)
    sp.add_argument("--sigma", type=float, default=math.sqrt(20.0))
    sp.add_argument("--b", type=float, default=1.0)
    sp.add_argument("--generations", type=int, default=1000)
    sp.add_argument("--stride", type=int, default=1, help="snapshot stride in generations")
    sp.add_argument("--target", type=float, default=0.2, help="similarity level the decay report aims for")
    sp.add_argument("--boundary-mode", choices=["absorb", "resample"], default="absorb")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fixture", help="generate synthetic input files")
    sp.add_argument("--kind", choices=["lognormal-sad", "fisher-sad", "neutral-panel", "churn-panel"],
                    required=True)
    common(sp)
    sp.add_argument("--n", type=int, default=10000)
    sp.add_argument("--mu", type=float, default=-9.0)
    sp.add_argument("--sigma-log", type=float, default=2.3)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--x-min", type=float, default=1e-4)
    sp.add_argument("--n-total", type=float, default=1e6)
    sp.add_argument("--s", type=int, default=50)
    sp.add_argument("--rho", type=float, default=3.5)
    sp.add_argument("--sigma", type=float, default=math.sqrt(20.0))
    sp.add_argument("--b", type=float, default=1.0)
    sp.add_argument("--generations", type=int, default=200)
    sp.add_argument("--weeks", type=int, default=20)
    sp.add_argument("--assets", type=int, default=50)
    sp.add_argument("--spec-rate", type=float, default=0.1)
    sp.add_argument("--ext-rate", type=float, default=0.05)
    sp.set_defaults(func=cmd_fixture)
    return p


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except MarketEcoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
