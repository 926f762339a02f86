"""Command-line interface.

Subcommands: ``estimate``, ``convergence``, ``reinforce``, ``portfolio`` and
``oracle``. Tables go to CSV (17 significant digits, ``.`` decimal point,
a ``# columns:`` comment line before the header). Study subcommands also
write ``resolved.ini`` and ``manifest.json`` next to their tables; feeding
``resolved.ini`` back through ``--config`` reproduces the CSV bytes.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    Config,
    ConfigError,
    convergence_from,
    model_from,
    quadrature_from,
    quadrature_section,
    ranking_from,
    reinforcement_from,
    render,
    simulation_from,
)
from .errors import DegenerateModelError, DomainError, InsufficientAcceptanceError, NumericalError
from .experiments import run_convergence, run_portfolio_study, run_reinforcement
from .recursive import conditional_moments

log = logging.getLogger("rankmoments")

CONVERGENCE_COLUMNS = ("n", "rho", "quantile", "index", "sd")
REINFORCE_COLUMNS = ("n", "rho", "r", "sd")
INSTANCE_COLUMNS = ("n", "rho", "instance", "seed", "ceq_prior", "ceq_clair", "ceq_rank")
AGGREGATE_COLUMNS = ("n", "rho", "mean_prior", "mean_clair", "mean_rank", "pct_diff_clair_rank")
ESTIMATE_COLUMNS = ("index", "mean", "sd")


def fmt(value) -> str:
    """Locale-independent, round-trippable text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(stream, columns, rows, comments=()) -> None:
    stream.write("# columns: " + ",".join(columns) + "\n")
    for line in comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def _write_table(path: Path, columns, rows, comments=()) -> Path:
    buf = io.StringIO()
    write_csv(buf, columns, rows, comments)
    path.write_bytes(buf.getvalue().encode("ascii"))
    return path


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _resolve_seed(cfg: Config, section: str, override: int | None) -> int:
    if override is not None:
        return override
    seed = cfg.get(section, "seed", int)
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        log.info("no seed given; generated %d", seed)
    return seed


def _load_config(path) -> Config:
    return Config.load(path) if path else Config()


def _quad_overrides(args) -> dict:
    return {
        "m_nodes": args.m_nodes,
        "x_nodes": args.x_nodes,
        "m_halfwidth": args.m_halfwidth,
        "x_padding": args.x_padding,
    }


def _finish(args, out_dir: Path, sections: dict, seed, started: str, outputs: list[Path], complete: bool):
    resolved = out_dir / "resolved.ini"
    resolved.write_text(render(sections), encoding="utf-8")
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "config": sections,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "workers": args.workers,
        "status": "complete" if complete else "incomplete",
        "outputs": [str(p) for p in outputs] + [str(resolved)],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


# -- subcommands ------------------------------------------------------------

def cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    model = model_from(cfg)
    ranking = ranking_from(cfg, model.n, args.ranking)
    spec = quadrature_from(cfg, _quad_overrides(args))
    cm = conditional_moments(model, ranking, spec, workers=args.workers)
    rows = [(i + 1, cm.mean[i], cm.sd[i]) for i in range(model.n)]
    buf = io.StringIO()
    write_csv(buf, ESTIMATE_COLUMNS, rows, [f"log_prob={fmt(cm.log_prob)}"])
    if args.output:
        Path(args.output).write_bytes(buf.getvalue().encode("ascii"))
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def _study_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_convergence(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    spec = quadrature_from(cfg, _quad_overrides(args))
    conf = convergence_from(cfg, spec)
    rows = run_convergence(conf, workers=args.workers)
    out = _study_dir(args)
    path = _write_table(out / "convergence.csv", CONVERGENCE_COLUMNS, rows)
    sections = {
        "convergence": {"n_values": conf.n_values, "rho_values": conf.rho_values, "quantiles": conf.quantiles},
        "quadrature": quadrature_section(spec),
    }
    _finish(args, out, sections, None, started, [path], True)
    return 0


def cmd_reinforce(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    spec = quadrature_from(cfg, _quad_overrides(args))
    conf = reinforcement_from(cfg, spec)
    rows = run_reinforcement(conf, workers=args.workers)
    out = _study_dir(args)
    path = _write_table(out / "reinforce.csv", REINFORCE_COLUMNS, rows)
    sections = {
        "reinforce": {
            "n_values": conf.n_values,
            "rho_values": conf.rho_values,
            "r_values": conf.r_values,
            "quantile": conf.quantile,
        },
        "quadrature": quadrature_section(spec),
    }
    _finish(args, out, sections, None, started, [path], True)
    return 0


def cmd_portfolio(args) -> int:
    started = _now()
    cfg = _load_config(args.config)
    spec = quadrature_from(cfg, _quad_overrides(args))
    seed = _resolve_seed(cfg, "portfolio", args.seed)
    conf = simulation_from(cfg, spec, seed)
    study = run_portfolio_study(conf, workers=args.workers)
    out = _study_dir(args)
    failures = study.failures
    incomplete = [f"INCOMPLETE: {len(failures)} of {len(study.instances)} instances failed; see failures.csv"] if failures else []
    inst_rows = [(r.n, r.rho, r.instance, r.seed, r.ceq_prior, r.ceq_clair, r.ceq_rank) for r in study.instances]
    agg_rows = [(a.n, a.rho, a.mean_prior, a.mean_clair, a.mean_rank, a.pct_diff_clair_rank) for a in study.aggregate]
    agg_notes = incomplete + [
        f"n={a.n} rho={fmt(a.rho)} completed={a.completed}/{conf.instances}"
        for a in study.aggregate
        if a.completed < conf.instances
    ]
    paths = [
        _write_table(out / "portfolio_instances.csv", INSTANCE_COLUMNS, inst_rows, incomplete),
        _write_table(
            out / "portfolio_aggregate.csv",
            AGGREGATE_COLUMNS,
            agg_rows,
            agg_notes + ["pct_diff_clair_rank = 100 * (mean_clair - mean_rank) / |mean_clair|"],
        ),
    ]
    if failures:
        paths.append(
            _write_table(
                out / "failures.csv",
                ("n", "rho", "instance", "seed", "error"),
                [(r.n, r.rho, r.instance, r.seed, r.error) for r in failures],
            )
        )
    sections = {
        "portfolio": {
            "n_values": conf.n_values,
            "rho_values": conf.rho_values,
            "instances": conf.instances,
            "sigma_mu": conf.sigma_mu,
            "sigma2_big_sigma": conf.sigma2_big_sigma,
            "tau": conf.tau,
            "gamma": conf.gamma,
            "seed": seed,
        },
        "quadrature": quadrature_section(spec),
    }
    _finish(args, out, sections, seed, started, paths, not failures)
    return 1 if failures else 0


def cmd_oracle(args) -> int:
    from .checks import CHECKS, parse_params

    if args.check not in CHECKS:
        sys.stderr.write(f"unknown check {args.check!r}; available: {', '.join(sorted(CHECKS))}\n")
        return 2
    params = parse_params(args.params)
    seed = args.seed
    if seed is None:
        seed = params.pop("seed", None)
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    verdict = CHECKS[args.check](params, int(seed))
    verdict = {"check": args.check, "seed": int(seed), **verdict}
    verdict["pass"] = bool(verdict["pass"])
    sys.stdout.write(json.dumps(verdict, default=float) + "\n")
    return 0 if verdict["pass"] else 1


# -- argument parsing -------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--config", "-c", required=config_required, help="config file (key = value, [sections])")
    p.add_argument("--workers", "-j", type=int, default=1, help="parallel workers; output does not depend on it")
    p.add_argument("--m-nodes", type=int)
    p.add_argument("--x-nodes", type=int)
    p.add_argument("--m-halfwidth", type=float)
    p.add_argument("--x-padding", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankmoments",
        description="Rank-conditioned moments of uniformly correlated normal vectors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="conditional means and SDs for one model and ranking")
    _add_common(p, config_required=True)
    p.add_argument("--ranking", help="'identity' or 1-based order, lowest first, e.g. 3,1,2")
    p.add_argument("--output", "-o", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_estimate)

    for name, func, helptext in (
        ("convergence", cmd_convergence, "conditional SD versus n, rho and quantile"),
        ("reinforce", cmd_reinforce, "conditional SD versus the reinforcement index"),
        ("portfolio", cmd_portfolio, "mean-variance simulation with three return estimates"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--output-dir", "-o", default=f"out/{name}")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.set_defaults(func=func)

    p = sub.add_parser("oracle", help="run a named cross-check and print a JSON verdict")
    p.add_argument("check", help="order-stat, shift-invariance, engine-vs-rejection, limit-mean, variance-identity")
    p.add_argument("params", nargs="*", help="key=value parameters, e.g. n=100 k=96")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
    except DegenerateModelError as exc:
        sys.stderr.write(f"degenerate model: {exc}\n")
    except (NumericalError, InsufficientAcceptanceError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
    except (DomainError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
