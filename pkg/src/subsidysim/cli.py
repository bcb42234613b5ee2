"""Command-line front door: simulate | estimate | diagnose | replicate.

Exit codes: 0 success, 2 usage or validation failure, 3 numeric failure.
Set SUBSIDYSIM_THREADS to cap the compute thread pool.
"""

import argparse
import dataclasses
import json
import os
import sys
import time
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    FoldTooSmall,
    IoFailure,
    NoControlGroup,
    NoSwitchers,
    SchemaViolation,
    SubsidySimError,
    UnbalancedPanelForFD,
    UnknownScenario,
)
from .diagnostics import (
    common_support,
    cooks_trim,
    functional_form_comparison,
    manski_sensitivity,
    oster_bounds,
    oster_from_stats,
)
from .estimators import DmlSpec, TwfeSpec, dml_plr_fit, pols_fit, twfe_fit
from .panel_io import (
    RunManifest,
    dump_config,
    load_config,
    read_panel_csv,
    sha256_of_file,
    write_ground_truth,
    write_manifest,
    write_panel_csv,
    _atomic_write,
    _fmt,
)
from .scenarios import SCENARIOS, run_scenario
from .simulate import ScenarioConfig, simulate_panel

# precondition and input problems exit with 2; the rest of the library's
# errors are numeric failures and exit with 3
_VALIDATION = (
    ConfigError, SchemaViolation, IoFailure, UnknownScenario, FoldTooSmall,
    NoSwitchers, NoControlGroup, UnbalancedPanelForFD, ValueError,
)


def _apply_thread_env() -> None:
    raw = os.environ.get("SUBSIDYSIM_THREADS")
    if not raw:
        return
    try:
        n = max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"SUBSIDYSIM_THREADS={raw!r} is not an integer")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _manifest(command: str, seed, config_dict, out_dir, files, wall) -> None:
    man = RunManifest(
        command=command, seed=seed, config=config_dict,
        package_version=__version__, wall_time_s=wall,
        digests={f: sha256_of_file(os.path.join(out_dir, f)) for f in files},
    )
    write_manifest(man, os.path.join(out_dir, "manifest.json"))


def _write_json(obj, path: str) -> None:
    _atomic_write(path, json.dumps(obj, indent=1, sort_keys=True,
                                   default=float) + "\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.time()
    if args.config:
        config = load_config(args.config, seed_override=args.seed)
    elif args.seed is not None:
        config = ScenarioConfig(seed=args.seed)
    else:
        raise ConfigError("either --config or --seed is required")
    os.makedirs(args.out, exist_ok=True)
    rows, truth = simulate_panel(config)
    write_panel_csv(rows, os.path.join(args.out, "panel.csv"))
    write_ground_truth(truth, os.path.join(args.out, "ground_truth.json"))
    _atomic_write(os.path.join(args.out, "scenario.ini"), dump_config(config))
    _manifest("simulate", config.seed, dataclasses.asdict(config), args.out,
              ["panel.csv", "ground_truth.json", "scenario.ini"],
              time.time() - t0)
    print(f"wrote {len(rows)} panel rows to {args.out}/panel.csv")
    return 0


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _estimates_table(res) -> str:
    header = "name\tcoef\tse\tz\tp\tci_low\tci_high"
    lines = [header]
    for i, nm in enumerate(res.names):
        lines.append("\t".join([
            nm, _fmt(res.coef[i]), _fmt(res.se[i]), _fmt(res.z[i]),
            _fmt(res.p[i]), _fmt(res.ci_low[i]), _fmt(res.ci_high[i]),
        ]))
    return "\n".join(lines) + "\n"


def _estimates_record(res, method: str, outcome: str) -> dict:
    rec = {
        "method": method,
        "outcome": outcome,
        "n": res.n,
        "n_clusters": res.n_clusters,
        "cov_kind": res.cov_kind,
        "r_squared": res.r_squared,
        "r_squared_within": res.r_squared_within,
        "coefficients": {
            nm: {
                "coef": float(res.coef[i]), "se": float(res.se[i]),
                "z": float(res.z[i]), "p": float(res.p[i]),
                "ci_low": float(res.ci_low[i]), "ci_high": float(res.ci_high[i]),
            }
            for i, nm in enumerate(res.names)
        },
    }
    if "contrast" in res.extra:
        rec["contrast"] = {k: float(v) for k, v in res.extra["contrast"].items()}
    if "absent_margins" in res.extra:
        rec["absent_margins"] = list(res.extra["absent_margins"])
    return rec


def cmd_estimate(args) -> int:
    rows = read_panel_csv(args.panel)
    if args.method == "pols":
        res = pols_fit(rows, outcome=args.outcome)
    elif args.method == "twfe-cont":
        res = twfe_fit(rows, TwfeSpec(outcome=args.outcome))
    elif args.method == "twfe-bin":
        res = twfe_fit(rows, TwfeSpec(outcome=args.outcome,
                                      treatment_mode="binary"))
    else:  # dml
        res = dml_plr_fit(rows, DmlSpec(outcome=args.outcome,
                                        k_folds=args.k_folds,
                                        seed=args.seed or 0))
    table = _estimates_table(res)
    sys.stdout.write(table)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(os.path.join(args.out, "estimates.tsv"), table)
        _write_json(_estimates_record(res, args.method, args.outcome),
                    os.path.join(args.out, "estimates.json"))
        _manifest("estimate", args.seed, {"method": args.method,
                                          "outcome": args.outcome,
                                          "panel": os.path.abspath(args.panel)},
                  args.out, ["estimates.tsv", "estimates.json"], 0.0)
    return 0


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

BATTERIES = ("manski", "oster", "cooks", "support", "forms")


def _parse_g_grid(raw: str) -> np.ndarray:
    try:
        lo, hi, num = raw.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError as exc:
        raise ConfigError(f"--g-grid must be lo:hi:count, got {raw!r}") from exc


def cmd_diagnose(args) -> int:
    report = {}
    plot_files = {}
    if args.oster_stats:
        vals = [float(v) for v in args.oster_stats.split(",")]
        if len(vals) not in (4, 5):
            raise ConfigError(
                "--oster-stats needs beta_short,beta_long,r2_short,r2_long[,r2_max]"
            )
        rep = oster_from_stats(*vals)
        report["oster"] = dataclasses.asdict(rep)
        print(f"oster delta={rep.delta:.4f} beta_star={rep.beta_star:.4f} "
              f"verdict={rep.verdict}")

    batteries = ()
    if args.battery:
        batteries = (
            BATTERIES if args.battery == "all"
            else tuple(args.battery.split(","))
        )
        for b in batteries:
            if b not in BATTERIES:
                raise ConfigError(
                    f"unknown battery {b!r}; pick from {', '.join(BATTERIES)}"
                )
    if batteries and not args.panel:
        raise ConfigError("--panel is required for panel diagnostics")
    rows = read_panel_csv(args.panel) if args.panel and batteries else None

    if "manski" in batteries:
        curve = manski_sensitivity(rows, margin=args.margin,
                                   g_grid=_parse_g_grid(args.g_grid))
        report["manski"] = {
            "beta_did": curve.beta_did, "beta_did_se": curve.beta_did_se,
            "beta0": curve.beta0, "zero_crossing": curve.zero_crossing,
        }
        lines = ["g\tbeta\tci_low\tci_high"]
        for g, b, lo, hi in zip(curve.g_grid, curve.beta,
                                curve.ci_low, curve.ci_high):
            lines.append("\t".join([_fmt(g), _fmt(b), _fmt(lo), _fmt(hi)]))
        plot_files["manski_curve.tsv"] = "\n".join(lines) + "\n"
        print(f"manski beta_did={curve.beta_did:.4f} beta0={curve.beta0:.4f}")
    if "oster" in batteries and "oster" not in report:
        margin_coef = "tau_12" if args.margin == "P2" else "tau_12c"
        rep = oster_bounds(rows, margin=margin_coef)
        report["oster"] = dataclasses.asdict(rep)
        print(f"oster delta={rep.delta:.4f} beta_star={rep.beta_star:.4f}")
    if "cooks" in batteries:
        rep = cooks_trim(rows)
        report["cooks"] = {
            "n_flagged": len(rep.flagged_hcps), "threshold": rep.threshold,
            "delta_pct": rep.delta_pct,
        }
        print(f"cooks flagged {len(rep.flagged_hcps)} providers")
    if "support" in batteries:
        rep = common_support(rows)
        report["support"] = {
            "speed_range": list(rep.speed_range), "n_dropped": rep.n_dropped,
            "delta_pct": rep.delta_pct,
        }
        print(f"support range {rep.speed_range} dropped {rep.n_dropped}")
    if "forms" in batteries:
        pre = [r for r in rows if r.period == 0]
        fits = functional_form_comparison(
            np.exp(np.array([r.ln_price for r in pre])),
            np.array([r.speed_mbps for r in pre]),
        )
        report["forms"] = [
            {"rank": f.rank, "name": f.name, "formula": f.formula,
             "adj_r2": f.adj_r2, "rmse": f.rmse}
            for f in fits
        ]
        print(f"forms best={fits[0].name} adj_r2={fits[0].adj_r2:.4f}")

    if not report:
        raise ConfigError("nothing to do: pass --battery and/or --oster-stats")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(report, os.path.join(args.out, "diagnostics.json"))
        for fname, text in plot_files.items():
            _atomic_write(os.path.join(args.out, fname), text)
        _manifest("diagnose", None,
                  {"battery": ",".join(batteries),
                   "panel": os.path.abspath(args.panel) if args.panel else None},
                  args.out, ["diagnostics.json"] + sorted(plot_files), 0.0)
    return 0


# ---------------------------------------------------------------------------
# replicate
# ---------------------------------------------------------------------------

def cmd_replicate(args) -> int:
    t0 = time.time()
    summary = run_scenario(args.scenario, seed=args.seed or 0)
    checks = summary.get("checks", {})
    for name, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {args.scenario}: {name}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(summary, os.path.join(args.out, "summary.json"))
        _manifest("replicate", args.seed, {"scenario": args.scenario},
                  args.out, ["summary.json"], time.time() - t0)
    return 0 if all(checks.values()) else 3


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="subsidysim",
        description="Simulate subsidy-mechanism panels, estimate switching "
                    "effects, and run the robustness battery.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="write a synthetic panel CSV")
    ps.add_argument("--config", help="scenario INI file")
    ps.add_argument("--seed", type=int, help="scenario seed (overrides config)")
    ps.add_argument("--out", required=True, help="output directory")
    ps.set_defaults(func=cmd_simulate)

    pe = sub.add_parser("estimate", help="fit a switching-effect estimator")
    pe.add_argument("--panel", required=True, help="panel CSV path")
    pe.add_argument("--method", default="twfe-cont",
                    choices=("pols", "twfe-cont", "twfe-bin", "dml"))
    pe.add_argument("--outcome", default="ln_price",
                    choices=("ln_price", "ln_subsidy", "ln_netcost"))
    pe.add_argument("--k-folds", type=int, default=10)
    pe.add_argument("--seed", type=int)
    pe.add_argument("--out", help="output directory (optional)")
    pe.set_defaults(func=cmd_estimate)

    pd = sub.add_parser("diagnose", help="run the robustness battery")
    pd.add_argument("--panel", help="panel CSV path")
    pd.add_argument("--battery",
                    help="comma list of " + ",".join(BATTERIES) + " or 'all'")
    pd.add_argument("--margin", default="P2", choices=("P2", "P2c"),
                    help="margin for the trend-sensitivity curve")
    pd.add_argument("--g-grid", default="0:2:41", dest="g_grid",
                    help="trend-ratio grid as lo:hi:count")
    pd.add_argument("--oster-stats", dest="oster_stats",
                    help="direct inputs beta_short,beta_long,r2_short,r2_long[,r2_max]")
    pd.add_argument("--out", help="output directory (optional)")
    pd.set_defaults(func=cmd_diagnose)

    pr = sub.add_parser("replicate", help="run a registered end-to-end scenario")
    pr.add_argument("--scenario", required=True,
                    help="one of " + ", ".join(SCENARIOS))
    pr.add_argument("--seed", type=int)
    pr.add_argument("--out", help="output directory (optional)")
    pr.set_defaults(func=cmd_replicate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_env()
        return args.func(args)
    except (OSError,) + _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SubsidySimError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
