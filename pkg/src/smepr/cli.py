"""Command-line interface: simulate, fit, predict, elbow, metrics.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import DataError
from .draws import NumericError
from .io import (RunConfig, RunManifest, format_config, load_config, load_observations, read_table,
                 write_observations, write_table)
from .metrics import SCORE_NAMES, elbow_scan, score_fit
from .results import load_fit, write_fit, write_summary
from .sampler import FitConfig, predict, run_fit
from .simgen import STUDIES, StudySpec, generate
from .subset import MODES, ConfigError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_fit_args(p):
    p.add_argument("--data", required=True, help="observation CSV")
    p.add_argument("--covariates", help="covariate CSV (site_id, names...)")
    p.add_argument("--config", required=True, help="flat key=value model config")
    p.add_argument("--reps", type=int, default=1000, help="posterior replicates T")
    p.add_argument("--subset-size", type=int, default=None, help="subset size n (default: all training sites)")
    p.add_argument("--mode", choices=MODES, default="srs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smepr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"smepr {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic study")
    p.add_argument("--study", choices=STUDIES, required=True)
    p.add_argument("--m", type=int, required=True, help="number of sites M")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--basis-fit", type=_int_list, default=None,
                   help="individual,shared basis counts for the fitting config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="draw posterior replicates")
    _add_fit_args(p)
    p.add_argument("--store-replicates", action="store_true", help="also write xi/tau_y and subsets")
    p.add_argument("--predict-stride", type=int, default=1, help="summarise every k-th row")

    p = sub.add_parser("predict", help="summaries of the latent process or response mean")
    p.add_argument("--fit", required=True, help="fit output directory")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--which", choices=("latent", "response_mean"), default="latent")

    p = sub.add_parser("elbow", help="fit over a grid of subset sizes")
    p.add_argument("--grid", type=_int_list, required=True)
    p.add_argument("--truth", help="truth.csv from simulate; MSPE instead of HOVE")
    _add_fit_args(p)

    p = sub.add_parser("metrics", help="score a fit")
    p.add_argument("--fit", required=True)
    p.add_argument("--truth", help="truth.csv from simulate")
    p.add_argument("--truth-coefficients", help="truth_coefficients.csv (default: next to --truth)")
    p.add_argument("--out", help="output CSV (default: <fit>/scores.csv)")
    return parser


def _load_inputs(args):
    obs = load_observations(args.data, args.covariates)
    rc = load_config(args.config, obs.coords)
    return obs, rc


def _fit_config(args, rc: RunConfig, **extra) -> FitConfig:
    return FitConfig(rc.families, rc.design, T=args.reps, n=args.subset_size, mode=args.mode,
                     seed=args.seed, hyperpriors=rc.hyperpriors, quantiles=rc.quantiles,
                     threads=args.threads, **extra)


def _manifest(command, config, seed, args_inputs):
    man = RunManifest(command=command, config=config, seed=seed, version=__version__)
    for role, path in args_inputs.items():
        if path:
            man.add_input(role, path)
    return man


def load_truth(path, obs):
    """Canonical-order true latent values from a ``site_id,type,latent`` CSV."""
    header, body = read_table(path)
    for col in ("site_id", "type", "latent"):
        if col not in header:
            raise DataError(f"{path}: missing column {col!r}")
    ix = [header.index(c) for c in ("site_id", "type", "latent")]
    out = np.full(obs.K * obs.n_sites, np.nan)
    pos = obs.site_position
    for line, row in enumerate(body, start=2):
        site, k = int(row[ix[0]]), int(row[ix[1]])
        if site not in pos or not 1 <= k <= obs.K:
            raise DataError(f"{path}:{line}: unknown site/type ({site}, {k})")
        out[(k - 1) * obs.n_sites + pos[site]] = float(row[ix[2]])
    return out


def cmd_simulate(args):
    t0 = time.perf_counter()
    basis_fit = tuple(args.basis_fit) if args.basis_fit else None
    if basis_fit is not None and len(basis_fit) != 2:
        raise UsageError("--basis-fit takes two counts: individual,shared")
    study = generate(StudySpec(args.study, args.m, seed=args.seed, basis_fit=basis_fit))
    out = Path(args.out)
    paths = write_observations(study.obs, out / "observations.csv", out / "covariates.csv")
    rc = RunConfig(study.families, study.design)
    (out / "config.txt").write_text(format_config(rc), encoding="utf-8")
    paths.append(out / "config.txt")
    S = study.obs.n_sites
    paths.append(write_table(out / "truth.csv", ["site_id", "type", "latent", "signal"],
                             ([int(study.obs.site_ids[i % S]), i // S + 1, study.true_latent[i],
                               study.true_signal[i]] for i in range(len(study.true_latent)))))
    names = [f"beta:{n}" for n in study.design.beta_names()]
    true_design = [f"eta:{j}" for j in range(len(study.true_eta))]
    paths.append(write_table(out / "truth_coefficients.csv", ["name", "value"],
                             zip(names + true_design, np.concatenate([study.true_beta, study.true_eta]))))
    man = _manifest("simulate", {"study": args.study, "M": args.m, "basis_fit": basis_fit},
                    args.seed, {})
    man.timings["total"] = time.perf_counter() - t0
    man.add_outputs(paths, out)
    man.write(out)


def cmd_fit(args):
    t0 = time.perf_counter()
    obs, rc = _load_inputs(args)
    cfg = _fit_config(args, rc, store_replicates=args.store_replicates, predict_stride=args.predict_stride)
    fit = run_fit(obs, cfg)
    out = Path(args.out)
    paths = write_fit(fit, obs, out)
    if args.figures:
        from .plotting import plot_latent
        paths.append(plot_latent(obs, fit.latent, out / "latent_map.png"))
    man = _manifest("fit", {"T": cfg.T, "n": cfg.n, "mode": cfg.mode, "seed": cfg.seed,
                            "threads": cfg.threads, "predict_stride": cfg.predict_stride,
                            "store_replicates": cfg.store_replicates},
                    cfg.seed, {"data": args.data, "covariates": args.covariates, "config": args.config})
    man.timings.update(fit.timings)
    man.timings["total"] = time.perf_counter() - t0
    man.add_outputs(paths, out)
    man.write(out)


def cmd_predict(args):
    fit, obs, _ = load_fit(args.fit)
    summary = predict(fit, obs, args.which)
    path = write_summary(args.out, summary, obs)
    man = _manifest("predict", {"which": args.which, "fit": str(Path(args.fit).resolve())},
                    fit.config.seed, {"fit_manifest": Path(args.fit) / "manifest.json"})
    man.add_outputs([path], path.parent)
    man.write(path.parent, name=path.name + ".manifest.json")


def cmd_elbow(args):
    t0 = time.perf_counter()
    obs, rc = _load_inputs(args)
    cfg = _fit_config(args, rc)
    truth = load_truth(args.truth, obs) if args.truth else None
    table = elbow_scan(obs, cfg, args.grid, truth)
    out = Path(args.out)
    rows = table.rows()
    header = list(rows[0])
    paths = [write_table(out / "elbow.csv", header, ([r[h] for h in header] for r in rows))]
    if args.figures:
        from .plotting import plot_elbow
        paths.append(plot_elbow(table, out / "elbow.png"))
    man = _manifest("elbow", {"grid": args.grid, "T": cfg.T, "seed": cfg.seed, "metric": table.metric},
                    cfg.seed, {"data": args.data, "covariates": args.covariates, "config": args.config,
                               "truth": args.truth})
    man.timings["total"] = time.perf_counter() - t0
    man.add_outputs(paths, out)
    man.write(out)


def cmd_metrics(args):
    fit, obs, _ = load_fit(args.fit)
    truth = beta = eta = None
    if args.truth:
        truth = load_truth(args.truth, obs)
        coef_path = args.truth_coefficients or Path(args.truth).with_name("truth_coefficients.csv")
        if Path(coef_path).exists():
            header, body = read_table(coef_path)
            names = [r[0] for r in body]
            vals = np.array([float(r[1]) for r in body])
            is_beta = np.array([n.startswith("beta:") for n in names])
            beta, eta = vals[is_beta], vals[~is_beta]
            if len(vals) != fit.gamma.shape[1]:
                beta = eta = None  # fitted basis differs from the generating one
    report = score_fit(fit, obs, true_latent=truth, true_beta=beta, true_eta=eta)
    path = Path(args.out) if args.out else Path(args.fit) / "scores.csv"
    table = report.table()
    path = write_table(path, ["scope", *SCORE_NAMES],
                       ([r["scope"], *(r[n] for n in SCORE_NAMES)] for r in table))
    man = _manifest("metrics", {"fit": str(Path(args.fit).resolve())}, fit.config.seed,
                    {"fit_manifest": Path(args.fit) / "manifest.json", "truth": args.truth})
    man.timings.update(report.timings)
    man.add_outputs([path], path.parent)
    man.write(path.parent, name=path.name + ".manifest.json")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict, "elbow": cmd_elbow,
            "metrics": cmd_metrics}


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
