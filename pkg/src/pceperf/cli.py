"""Command-line front end: fit, analyze, mc, sweep-samples, sweep-noise, pdf.

Every command reads one JSON config and writes machine reports (JSON + CSV)
plus rendered figures into the output directory.  Exit codes: 0 success,
1 usage or configuration, 2 numerical or model-file failure, 3 evaluator
failure.  Errors print a single line "ERROR[<code>]: <message>" on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    AnalysisConfig,
    build_evaluator,
    config_to_dict,
    default_threads,
    load_config,
    physical_from_germ,
)
from .errors import (
    ConfigError,
    EvaluationError,
    ModelFileError,
    NumericalError,
    PcePerfError,
)
from .inputspace import sample_germ
from .montecarlo import run_mc
from .pce import (
    fit_projection,
    fit_regression,
    load_model,
    predict,
    save_model,
    select_degree,
)
from .plots import bar_figure, line_figure
from .quadrature import smolyak_grid
from .report import config_hash, human, write_csv, write_json, utc_timestamp
from .robustness import (
    COV_DEFINITION,
    kde_grid,
    kde_pdf,
    loo_error,
    noise_sweep,
    robustness_report,
)

__all__ = ["main"]

DEFAULT_SWEEP_COUNTS = (100, 300, 700, 1000)
REPORT_FORMAT = "pceperf-report"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pceperf",
        description="Polynomial-chaos surrogates for performance models.",
    )
    parser.add_argument("--version", action="version", version=f"pceperf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "fit": "sample the model and fit a surrogate per index",
        "analyze": "read fitted models and report mean / SD / CoV",
        "mc": "plain Monte Carlo with the sequential stopping rule",
        "sweep-samples": "refit at several sample counts, tabulate accuracy",
        "sweep-noise": "refit under added output noise, tabulate accuracy",
        "pdf": "density curves of measured vs surrogate outputs",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON analysis config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument(
            "--no-timestamp",
            action="store_true",
            help="omit timestamps so report bytes are reproducible",
        )
        if name == "sweep-samples":
            p.add_argument(
                "--counts",
                default=",".join(str(c) for c in DEFAULT_SWEEP_COUNTS),
                help="comma-separated sample counts",
            )
    return parser


def _prepare(args) -> tuple[AnalysisConfig, Path]:
    config = load_config(args.config, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return config, out


def _provenance(config: AnalysisConfig, args, command: str) -> dict:
    doc = {
        "format": REPORT_FORMAT,
        "command": command,
        "tool_version": __version__,
        "config_hash": config_hash(config_to_dict(config)),
        "seed": config.seed,
    }
    if not args.no_timestamp:
        doc["timestamp"] = utc_timestamp()
    return doc


def _require_samples(config: AnalysisConfig) -> int:
    if config.pce.samples is None:
        raise ConfigError("pce.samples: required for this command")
    return config.pce.samples


def _sampled_outputs(config: AnalysisConfig, n: int):
    """Common sampling path: germ matrix, physical matrix, model outputs."""
    germ = sample_germ(config.problem, n, config.seed)
    physical = physical_from_germ(config.problem, germ)
    outputs = build_evaluator(config).many(physical, threads=default_threads())
    return germ, outputs


def cmd_fit(args) -> int:
    config, out = _prepare(args)
    problem, pce = config.problem, config.pce
    report = _provenance(config, args, "fit")
    report["cov_definition"] = COV_DEFINITION
    per_index: dict[str, dict] = {}

    if pce.fit == "projection":
        rule = smolyak_grid(problem.germ_families(), pce.sparse_level)
        evaluator = build_evaluator(config)
        for j, name in enumerate(config.indices):
            def node_value(node, _j=j):
                return float(evaluator(physical_from_germ(problem, node)[0])[_j])

            model = fit_projection(problem, rule, node_value, pce.degree)
            per_index[name] = _finish_fit(config, out, name, model, None, None)
    else:
        n = _require_samples(config)
        germ, outputs = _sampled_outputs(config, n)
        for j, name in enumerate(config.indices):
            y = outputs[:, j]
            if pce.degree is None:
                selection = select_degree(problem, germ, y, pce.d_max)
                model = fit_regression(problem, germ, y, selection.best_degree)
                loo = selection.best_loo
            else:
                model = fit_regression(problem, germ, y, pce.degree)
                selection = None
                p = model.basis.size
                loo = (
                    loo_error(problem, germ, y, pce.degree).loo_error
                    if germ.shape[0] > p
                    else None
                )
            per_index[name] = _finish_fit(config, out, name, model, loo, selection)

    report["indices"] = per_index
    write_json(out / "report.json", report)
    for name, entry in per_index.items():
        line = (
            f"fit {name}: degree {entry['degree']}, mean {human(entry['mean'])}, "
            f"sd {human(entry['sd'])}, cov {human(entry['cov_percent'])}%"
        )
        if entry["loo_error"] is not None:
            line += f", loo {human(entry['loo_error'])}"
        print(line)
    return 0


def _finish_fit(config, out: Path, name: str, model, loo, selection) -> dict:
    model.meta.update(
        {
            "index": name,
            "seed": config.seed,
            "config_hash": config_hash(config_to_dict(config)),
        }
    )
    save_model(model, out / f"model_{name}.json")
    rob = robustness_report(model)
    if selection is not None:
        rows = [(e.degree, e.basis_terms, e.loo_error) for e in selection.table]
        write_csv(
            out / f"loo_by_degree_{name}.csv",
            ("degree", "basis_terms", "loo_error"),
            rows,
        )
        line_figure(
            out / f"loo_by_degree_{name}.png",
            [r[0] for r in rows],
            {name: [max(r[2], 1e-300) for r in rows]},
            xlabel="degree",
            ylabel="leave-one-out error",
            logy=True,
        )
    return {
        "degree": model.basis.degree,
        "basis_terms": model.basis.size,
        "method": model.meta["method"],
        "mean": rob.mean,
        "sd": rob.sd,
        "cov_percent": rob.cov_percent,
        "loo_error": loo,
        "model_file": f"model_{name}.json",
    }


def cmd_analyze(args) -> int:
    config, out = _prepare(args)
    report = _provenance(config, args, "analyze")
    report["cov_definition"] = COV_DEFINITION
    rows = []
    per_index: dict[str, dict] = {}
    for name in config.indices:
        model = load_model(out / f"model_{name}.json")
        rob = robustness_report(model)
        rows.append((name, rob.degree, rob.mean, rob.sd, rob.cov_percent))
        per_index[name] = {
            "degree": rob.degree,
            "mean": rob.mean,
            "sd": rob.sd,
            "cov_percent": rob.cov_percent,
        }
    report["indices"] = per_index
    write_csv(out / "robustness.csv", ("index", "degree", "mean", "sd", "cov"), rows)
    write_json(out / "robustness.json", report)
    bar_figure(
        out / "robustness.png",
        [r[0] for r in rows],
        [r[4] for r in rows],
        ylabel="coefficient of variation (%)",
    )
    for name, degree, mean, sd, cov_pct in rows:
        print(
            f"{name}: degree {degree}, mean {human(mean)}, sd {human(sd)}, "
            f"cov {human(cov_pct)}%"
        )
    return 0


def cmd_mc(args) -> int:
    config, out = _prepare(args)
    evaluator = build_evaluator(config)
    report = _provenance(config, args, "mc")
    per_index: dict[str, dict] = {}
    for name in config.indices:
        result = run_mc(evaluator.scalar(name), config.problem, config.mc)
        per_index[name] = {
            "mean": result.mean,
            "relative_error": result.relative_error,
            "samples_used": result.samples_used,
            "converged": result.converged,
        }
        trace_rows = [(int(i), float(e)) for i, e in result.trace]
        write_csv(
            out / f"mc_trace_{name}.csv", ("samples", "relative_error"), trace_rows
        )
        line_figure(
            out / f"mc_trace_{name}.png",
            [r[0] for r in trace_rows],
            {name: [max(r[1], 1e-300) for r in trace_rows]},
            xlabel="samples",
            ylabel="relative error",
            logy=True,
        )
        print(
            f"mc {name}: mean {human(result.mean)}, rel. error "
            f"{human(result.relative_error)}, samples {result.samples_used}, "
            f"converged {'true' if result.converged else 'false'}"
        )
    report["indices"] = per_index
    write_json(out / "mc.json", report)
    return 0


def cmd_sweep_samples(args) -> int:
    config, out = _prepare(args)
    try:
        counts = [int(c) for c in str(args.counts).split(",") if c.strip()]
    except ValueError as exc:
        raise ConfigError(f"--counts must be comma-separated integers: {exc}") from exc
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"--counts must be positive integers, got {args.counts!r}")
    problem, pce = config.problem, config.pce
    rows = []
    curves: dict[str, list[float]] = {name: [] for name in config.indices}
    for count in counts:
        germ, outputs = _sampled_outputs(config, count)
        for j, name in enumerate(config.indices):
            y = outputs[:, j]
            if pce.degree is None:
                sel = select_degree(problem, germ, y, pce.d_max)
                degree, loo = sel.best_degree, sel.best_loo
            else:
                degree = pce.degree
                loo = loo_error(problem, germ, y, degree).loo_error
            rows.append((name, count, degree, loo))
            curves[name].append(loo)
    write_csv(
        out / "samples_sweep.csv", ("index", "samples", "degree", "loo_error"), rows
    )
    report = _provenance(config, args, "sweep-samples")
    report["rows"] = [
        {"index": r[0], "samples": r[1], "degree": r[2], "loo_error": r[3]} for r in rows
    ]
    write_json(out / "samples_sweep.json", report)
    line_figure(
        out / "samples_sweep.png",
        counts,
        {name: [max(v, 1e-300) for v in vals] for name, vals in curves.items()},
        xlabel="samples",
        ylabel="leave-one-out error",
        logy=True,
    )
    for name, count, degree, loo in rows:
        print(f"sweep {name} n={count}: degree {degree}, loo {human(loo)}")
    return 0


def cmd_sweep_noise(args) -> int:
    config, out = _prepare(args)
    n = _require_samples(config)
    germ, outputs = _sampled_outputs(config, n)
    report = _provenance(config, args, "sweep-noise")
    per_index: dict[str, list] = {}
    for j, name in enumerate(config.indices):
        table = noise_sweep(
            config.problem,
            germ,
            outputs[:, j],
            ran_levels=config.noise.ran_levels,
            seed=config.noise.seed,
            d_max=config.pce.d_max,
        )
        write_csv(
            out / f"noise_sweep_{name}.csv",
            ("ran_level", "best_degree", "loo_error"),
            [(row.ran_level, row.best_degree, row.loo_error) for row in table],
        )
        per_index[name] = [
            {
                "ran_level": row.ran_level,
                "best_degree": row.best_degree,
                "loo_error": row.loo_error,
                "error": row.error,
            }
            for row in table
        ]
        clean = [row for row in table if row.loo_error is not None]
        if clean:
            line_figure(
                out / f"noise_sweep_{name}.png",
                [row.ran_level for row in clean],
                {name: [max(row.loo_error, 1e-300) for row in clean]},
                xlabel="signal-to-noise ratio",
                ylabel="leave-one-out error",
                logy=True,
            )
        for row in table:
            if row.error is None:
                print(
                    f"noise {name} ran={human(row.ran_level)}: degree "
                    f"{row.best_degree}, loo {human(row.loo_error)}"
                )
            else:
                print(f"noise {name} ran={human(row.ran_level)}: failed ({row.error})")
    report["indices"] = per_index
    write_json(out / "noise_sweep.json", report)
    return 0


def cmd_pdf(args) -> int:
    config, out = _prepare(args)
    n = _require_samples(config)
    if n < 2:
        raise ConfigError(f"pce.samples: density comparison needs >= 2 samples, got {n}")
    problem, pce = config.problem, config.pce
    germ, outputs = _sampled_outputs(config, n)
    report = _provenance(config, args, "pdf")
    per_index: dict[str, dict] = {}
    for j, name in enumerate(config.indices):
        measured = outputs[:, j]
        if pce.degree is None:
            degree = select_degree(problem, germ, measured, pce.d_max).best_degree
        else:
            degree = pce.degree
        model = fit_regression(problem, germ, measured, degree)
        predicted = predict(model, germ)
        grid = kde_grid([measured, predicted])
        density_measured = kde_pdf(measured, grid)
        density_pce = kde_pdf(predicted, grid)
        write_csv(
            out / f"pdf_{name}.csv",
            ("grid", "density_measured", "density_pce"),
            zip(grid, density_measured, density_pce),
        )
        line_figure(
            out / f"pdf_{name}.png",
            grid,
            {"measured": density_measured, "surrogate": density_pce},
            xlabel=name,
            ylabel="density",
        )
        per_index[name] = {
            "degree": degree,
            "grid_points": int(grid.shape[0]),
            "grid_lo": float(grid[0]),
            "grid_hi": float(grid[-1]),
            "mean_measured": float(np.mean(measured)),
            "mean_pce": float(np.mean(predicted)),
        }
        print(
            f"pdf {name}: degree {degree}, grid [{human(grid[0])}, {human(grid[-1])}]"
        )
    report["indices"] = per_index
    write_json(out / "pdf.json", report)
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "analyze": cmd_analyze,
    "mc": cmd_mc,
    "sweep-samples": cmd_sweep_samples,
    "sweep-noise": cmd_sweep_noise,
    "pdf": cmd_pdf,
}


def _fail(code: str, message: str) -> None:
    flat = " ".join(str(message).split()) or "unknown error"
    print(f"ERROR[{code}]: {flat}", file=sys.stderr)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        _fail("usage", "invalid command line arguments")
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        _fail("config", str(exc))
        return 1
    except ModelFileError as exc:
        _fail("model-file", str(exc))
        return 2
    except NumericalError as exc:
        _fail("numerical", str(exc))
        return 2
    except EvaluationError as exc:
        _fail("evaluator", str(exc))
        return 3
    except PcePerfError as exc:  # pragma: no cover - safety net
        _fail("error", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
