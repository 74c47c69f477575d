"""Command-line interface.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.  The
manifest records the fully resolved configuration, the package version and
SHA-256 digests of inputs and outputs; ``gbridge rerun MANIFEST`` repeats the
run and checks that every output is byte-identical.

Options may also come from a JSON file given with ``--config``; flags on the
command line override file values and unknown keys are rejected.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
The default worker count for ``benchmark`` comes from ``GBRIDGE_WORKERS``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .inference import credible_interval, effective_sample_size, mcse, predictive_draws, summarize
from .model import ChainOutput, Dataset, DimensionError, DomainError, Hyperparams
from .oracle import OneDimModel, OracleError, posterior_mean_1d, score
from .sampler import ChainError, SamplerConfig, run_chain
from .scenarios import (
    METHODS,
    SCENARIOS,
    ConsistencySpec,
    ScenarioSpec,
    aggregate,
    consistency_experiment,
    default_workers,
    generate,
    replicate_study,
)

__all__ = ["main", "build_parser", "ValidationError", "read_table", "write_table"]

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
MANIFEST = "manifest.json"


class ValidationError(ValueError):
    """Bad user input: exit code 1."""


# ----------------------------------------------------------------------
# File formats
# ----------------------------------------------------------------------
def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_table(path: Path, header: Sequence[str], rows) -> None:
    """CSV with full-precision numbers; ``rows`` may be any iterable of sequences."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_table(path: Path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header row; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or any(not h for h in header) or len(set(header)) != len(header):
            raise ValidationError(f"{path}:1: header must hold unique, non-empty column names")
        rows = []
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise ValidationError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ValidationError(f"{path}:{line}: non-numeric field in {row}") from None
            if not all(math.isfinite(v) for v in values):
                raise ValidationError(f"{path}:{line}: non-finite value")
            rows.append(values)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def read_dataset(path: Path, response: str) -> Dataset:
    header, data = read_table(path)
    if response not in header:
        raise ValidationError(f"{path}: response column {response!r} not in header {header}")
    k = header.index(response)
    names = [h for j, h in enumerate(header) if j != k]
    if not names:
        raise ValidationError(f"{path}: no predictor columns")
    if data.shape[0] == 0:
        raise ValidationError(f"{path}: no data rows")
    X = np.delete(data, k, axis=1)
    return Dataset.from_arrays(data[:, k], X, names=names)


def write_dataset(path: Path, d: Dataset, response: str = "y") -> None:
    write_table(path, [response, *d.names], np.column_stack([d.y, d.X]))


def chain_header(p: int) -> list[str]:
    return (
        [f"beta_{i}" for i in range(1, p + 1)] + ["gamma", "alpha"]
        + [f"lambda_{i}" for i in range(1, p + 1)] + [f"kappa_{i}" for i in range(1, p + 1)]
    )


def write_chain(path: Path, out: ChainOutput, chunk: int = 4096) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(chain_header(out.p)) + "\n")
        for start in range(0, len(out), chunk):
            sl = slice(start, start + chunk)
            block = np.column_stack([out.beta[sl], out.gamma[sl], out.alpha[sl], out.lam[sl]])
            kap = out.kappa[sl]
            for row, krow in zip(block, kap):
                fh.write(",".join(format(v, ".17g") for v in row))
                fh.write("," + ",".join(str(int(k)) for k in krow) + "\n")


def read_chain(path: Path) -> ChainOutput:
    header, data = read_table(path)
    p = sum(h.startswith("beta_") for h in header)
    if p == 0 or header != chain_header(p):
        raise ValidationError(f"{path}:1: not a chain file (expected columns beta_1..beta_p,gamma,alpha,lambda_*,kappa_*)")
    if data.shape[0] == 0:
        raise ValidationError(f"{path}: chain has no draws")
    kappa = data[:, 2 * p + 2:]
    if not np.all(np.isin(kappa, (0.0, 1.0))):
        raise ValidationError(f"{path}: kappa columns must be 0/1")
    return ChainOutput(
        beta=data[:, :p],
        gamma=data[:, p],
        alpha=data[:, p + 1],
        lam=data[:, p + 2: 2 * p + 2],
        kappa=kappa.astype(np.int8),
        accept_beta=np.zeros(p, dtype=np.int64),
        attempts_beta=np.zeros(p, dtype=np.int64),
        accept_alpha=0,
        attempts_alpha=0,
        step_sizes=np.full(p, np.nan),
    )


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------
def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _add_sampler_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampler")
    g.add_argument("--iterations", type=int, help="MCMC sweeps (default 100000)")
    g.add_argument("--burn-in", type=int, help="discarded sweeps (default iterations/10)")
    g.add_argument("--thin", type=int, help="keep every k-th post burn-in draw (default 1)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--alpha-fixed", type=float, help="hold the bridge exponent at this value")
    g.add_argument("--kappa-update", choices=("blocked", "conditional"), help="mixture-indicator update (default blocked)")
    g.add_argument("--penalize-intercept", type=_bool, help="shrink the intercept too (default true)")
    g.add_argument("--step", type=float, dest="v_b", help="initial random-walk step for beta")
    for name in ("e1", "f1", "e2", "f2", "e3", "f3", "k1", "k2"):
        g.add_argument(f"--{name}", type=float, help=f"prior hyperparameter {name}")


def _bool(text: str) -> bool:
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


HYPER_KEYS = ("e1", "f1", "e2", "f2", "e3", "f3", "k1", "k2", "v_b", "iterations", "burn_in", "thin", "seed", "penalize_intercept")


def _hyperparams(cfg: dict, **defaults) -> Hyperparams:
    kw = {**defaults, **{k: cfg[k] for k in HYPER_KEYS if cfg.get(k) is not None}}
    return Hyperparams(**kw)


def _sampler_config(cfg: dict) -> SamplerConfig:
    kw = {}
    if cfg.get("alpha_fixed") is not None:
        kw["alpha_fixed"] = cfg["alpha_fixed"]
    if cfg.get("kappa_update") is not None:
        kw["kappa_update"] = cfg["kappa_update"]
    return SamplerConfig(**kw)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gbridge", description="Bayesian bridge regression with a mixture of shrinkage regimes.")
    parser.add_argument("--version", action="version", version=f"gbridge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text, func):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        if name != "rerun":
            p.add_argument("--config", type=Path, help="JSON file of option values; flags override it")
            p.add_argument("--out", type=Path, help="output directory (created if missing)")
        return p

    p = command("simulate", "Generate one replication of a simulation scenario.", cmd_simulate)
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--rep", type=int, help="replication index (default 0)")
    p.add_argument("--seed", type=int, help="scenario seed (default 0)")
    p.add_argument("--noise-scale", type=float, help="noise standard deviation (default 2)")

    p = command("fit", "Run the sampler on a CSV data file.", cmd_fit)
    p.add_argument("--data", type=Path, help="CSV with a header row")
    p.add_argument("--response", help="response column name (default y)")
    p.add_argument("--level", type=float, help="credible level for selection (default 0.95)")
    _add_sampler_options(p)

    p = command("predict", "Posterior predictive means and intervals for new rows.", cmd_predict)
    p.add_argument("--chain", type=Path, help="chain CSV written by fit")
    p.add_argument("--data", type=Path, help="CSV of new predictor rows (response column optional)")
    p.add_argument("--response", help="response column name, dropped if present (default y)")
    p.add_argument("--level", type=float, help="predictive interval level (default 0.95)")
    p.add_argument("--seed", type=int, help="seed for predictive draws (default 0)")

    p = command("select", "Variable selection by credible intervals.", cmd_select)
    p.add_argument("--chain", type=Path)
    p.add_argument("--level", type=float, help="credible level (default 0.95)")

    p = command("diagnose", "Batch-means ESS and Monte Carlo standard errors.", cmd_diagnose)
    p.add_argument("--chain", type=Path)

    p = command("benchmark", "Replicated simulation study with per-method metrics.", cmd_benchmark)
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--reps", type=int, help="replications (default 50)")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)} (default full)")
    p.add_argument("--workers", type=int, help="worker processes (default $GBRIDGE_WORKERS or 1)")
    _add_sampler_options(p)

    p = command("tailcheck", "Tabulate the one-dimensional posterior mean and score by quadrature.", cmd_tailcheck)
    p.add_argument("--grid", help="comma-separated y values (default 0,1,2,5,10,20,50)")
    for name in ("e1", "f1", "e2", "f2", "k1", "k2"):
        p.add_argument(f"--{name}", type=float, help=f"hyperparameter {name} (default 1, or 0.5/4 for k1/k2)")

    p = command("consistency", "Posterior mass outside a ball around the truth as n grows.", cmd_consistency)
    p.add_argument("--n-grid", help="comma-separated sample sizes (default 100,200,400,800)")
    p.add_argument("--rho", type=float)
    p.add_argument("--C", type=float, dest="C")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p-exponent", type=float)
    p.add_argument("--n-nonzero", type=int)
    p.add_argument("--signal", type=float)
    p.add_argument("--noise-scale", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--seed", type=int)

    p = command("rerun", "Repeat a run from its manifest and verify outputs are byte-identical.", cmd_rerun)
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, help="write into this directory instead of the recorded one")
    return parser


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge config-file values under explicit flags; reject unknown keys."""
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "config", "command")}
    cfg = {}
    if getattr(args, "config", None) is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ValidationError(f"{args.config}: no such file") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(cfg, dict):
            raise ValidationError(f"{args.config}: top level must be an object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - set(flags))
        if unknown:
            raise ValidationError(f"{args.config}: unknown keys {unknown} for command {args.command!r}")
    merged = {**cfg, **{k: v for k, v in flags.items() if v is not None}}
    for k in ("data", "chain", "out"):
        if merged.get(k) is not None:
            merged[k] = str(merged[k])
    return merged


# ----------------------------------------------------------------------
# Commands: each takes the resolved config and output directory, and returns
# (input paths, output file names).
# ----------------------------------------------------------------------
def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def cmd_simulate(cfg: dict, out: Path):
    _require(cfg, "scenario")
    kw = {"noise_scale": cfg["noise_scale"]} if cfg.get("noise_scale") is not None else {}
    spec = ScenarioSpec.preset(cfg["scenario"], seed=cfg.get("seed", 0), **kw)
    train, test, beta = generate(spec, cfg.get("rep", 0))
    write_dataset(out / "train.csv", train)
    write_dataset(out / "test.csv", test)
    write_table(out / "beta_true.csv", ["coefficient", "value"], zip(train.names, beta))
    return [], ["train.csv", "test.csv", "beta_true.csv"]


def cmd_fit(cfg: dict, out: Path):
    _require(cfg, "data")
    d = read_dataset(Path(cfg["data"]), cfg.get("response", "y"))
    h = _hyperparams(cfg)
    c = _sampler_config(cfg)
    chain = run_chain(d, h, c)
    write_chain(out / "chain.csv", chain)
    level = cfg.get("level", 0.95)
    s = summarize(chain, selection_level=level)
    summary = {
        "coefficients": list(d.names),
        "intercept": d.intercept,
        **s.to_dict(),
        "acceptance": {
            "beta": chain.beta_acceptance_rate.tolist(),
            "alpha": chain.alpha_acceptance_rate,
        },
        "hyperparams": h.to_dict(),
        "sampler": c.to_dict(),
    }
    write_json(out / "summary.json", summary)
    return [cfg["data"]], ["chain.csv", "summary.json"]


def _design_rows(path: Path, response: str, p: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
    header, data = read_table(path)
    y = None
    if response in header:
        k = header.index(response)
        y = data[:, k]
        data = np.delete(data, k, axis=1)
    if data.shape[1] != p:
        raise ValidationError(f"{path}: {data.shape[1]} predictor columns, chain has p={p}")
    return data, y


def cmd_predict(cfg: dict, out: Path):
    _require(cfg, "chain", "data")
    chain = read_chain(Path(cfg["chain"]))
    X, y = _design_rows(Path(cfg["data"]), cfg.get("response", "y"), chain.p)
    level = cfg.get("level", 0.95)
    if not 0 < level < 1:
        raise ValidationError("--level must lie in (0, 1)")
    draws = predictive_draws(X, chain, np.random.default_rng(cfg.get("seed", 0)))
    lo, hi = credible_interval(draws, level)
    mean = X @ chain.beta.mean(axis=0)
    header = ["row", "mean", "lower", "upper"]
    cols = [np.arange(1, X.shape[0] + 1), mean, lo, hi]
    if y is not None:
        header += ["y", "covered"]
        cols += [y, (y >= lo) & (y <= hi)]
    write_table(out / "predictions.csv", header, zip(*cols))
    return [cfg["chain"], cfg["data"]], ["predictions.csv"]


def cmd_select(cfg: dict, out: Path):
    _require(cfg, "chain")
    chain = read_chain(Path(cfg["chain"]))
    level = cfg.get("level", 0.95)
    if not 0 < level < 1:
        raise ValidationError("--level must lie in (0, 1)")
    lo, hi = credible_interval(chain.beta, level)
    sel = (lo > 0) | (hi < 0)
    write_table(out / "selected.csv", ["coefficient", "lower", "upper", "selected"],
                zip(range(1, chain.p + 1), lo, hi, sel))
    return [cfg["chain"]], ["selected.csv"]


def cmd_diagnose(cfg: dict, out: Path):
    _require(cfg, "chain")
    chain = read_chain(Path(cfg["chain"]))
    try:
        ess, se = effective_sample_size(chain), mcse(chain)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    rows = [(f"beta_{i + 1}", chain.beta[:, i].mean(), ess["beta"][i], se["beta"][i]) for i in range(chain.p)]
    rows += [(k, getattr(chain, k).mean(), ess[k], se[k]) for k in ("gamma", "alpha")]
    write_table(out / "diagnostics.csv", ["parameter", "mean", "ess", "mcse"], rows)
    return [cfg["chain"]], ["diagnostics.csv"]


def cmd_benchmark(cfg: dict, out: Path):
    _require(cfg, "scenario")
    spec = ScenarioSpec.preset(cfg["scenario"], seed=cfg.get("seed", 0))
    methods = [m.strip() for m in cfg.get("methods", "full").split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise ValidationError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
    if cfg.get("alpha_fixed") is not None or cfg.get("kappa_update") not in (None, "blocked"):
        raise ValidationError("benchmark chooses the exponent per method; use --methods instead")
    h = _hyperparams(cfg, iterations=20_000)
    reps = cfg.get("reps", 50)
    workers = cfg.get("workers") or default_workers()
    rows = replicate_study(spec, reps, methods, h, workers)
    keys = ["rep", "method", "l2", "mse", "model_size", "exact", "coverage", "alpha_mean"]
    write_table(out / "replications.csv", keys, ([r[k] for k in keys] for r in rows))
    table = aggregate(rows)
    tkeys = ["method", "reps", "mean_l2", "se_l2", "median_mse", "se_mse", "avg_model_size", "exact_recovery_count", "coverage"]
    write_table(out / "benchmark.csv", tkeys, ([r[k] for k in tkeys] for r in table))
    return [], ["replications.csv", "benchmark.csv"]


def cmd_tailcheck(cfg: dict, out: Path):
    grid = _parse_floats(cfg.get("grid", "0,1,2,5,10,20,50"))
    kw = {k: cfg[k] for k in ("e1", "f1", "e2", "f2", "k1", "k2") if cfg.get(k) is not None}
    m = OneDimModel(**kw)
    rows = []
    for y in grid:
        mean = posterior_mean_1d(y, m)
        rows.append((y, mean, y - mean, score(y, m)))
    write_table(out / "tailcheck.csv", ["y", "posterior_mean", "y_minus_mean", "score"], rows)
    return [], ["tailcheck.csv"]


def cmd_consistency(cfg: dict, out: Path):
    kw = {k: cfg[k] for k in ("rho", "C", "epsilon", "alpha", "p_exponent", "n_nonzero", "signal",
                              "noise_scale", "iterations", "burn_in", "seed") if cfg.get(k) is not None}
    if cfg.get("n_grid") is not None:
        kw["n_grid"] = tuple(int(v) for v in _parse_floats(cfg["n_grid"]))
    rows = consistency_experiment(ConsistencySpec(**kw))
    write_table(out / "consistency.csv", ["n", "p_n", "lambda", "mass"], ([r[k] for k in ("n", "p_n", "lambda", "mass")] for r in rows))
    return [], ["consistency.csv"]


def _config_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def execute(command: str, cfg: dict, func: Callable) -> Path:
    out = Path(cfg.get("out") or f"gbridge-{command}")
    out.mkdir(parents=True, exist_ok=True)
    recorded = {k: v for k, v in cfg.items() if k != "out"}
    inputs, outputs = func(recorded, out)
    manifest = {
        "command": command,
        "config": recorded,
        "config_digest": _config_digest(recorded),
        "seed": recorded.get("seed", 0),
        "version": __version__,
        "inputs": {str(p): sha256(Path(p)) for p in inputs},
        "outputs": {name: sha256(out / name) for name in outputs},
    }
    write_json(out / MANIFEST, manifest)
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "select": cmd_select,
    "diagnose": cmd_diagnose,
    "benchmark": cmd_benchmark,
    "tailcheck": cmd_tailcheck,
    "consistency": cmd_consistency,
}


def cmd_rerun(args: argparse.Namespace) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
        command, cfg = manifest["command"], dict(manifest["config"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: unreadable manifest ({exc})") from None
    if command not in COMMANDS:
        raise ValidationError(f"{path}: unknown command {command!r}")
    for name, digest in manifest.get("inputs", {}).items():
        if not Path(name).is_file() or sha256(Path(name)) != digest:
            raise ValidationError(f"input {name} is missing or differs from the manifest")
    cfg["out"] = str(args.out if args.out is not None else path.parent)
    out = execute(command, cfg, COMMANDS[command])
    mismatched = [n for n, dg in manifest["outputs"].items() if sha256(out / n) != dg]
    if mismatched:
        print(f"gbridge: outputs differ from manifest: {', '.join(mismatched)}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"reproduced {len(manifest['outputs'])} output(s) in {out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "rerun":
            return cmd_rerun(args)
        cfg = resolve(args, parser)
        out = execute(args.command, cfg, COMMANDS[args.command])
        print(f"wrote {out}")
        return EXIT_OK
    except (ValidationError, DomainError, DimensionError, ValueError) as exc:
        print(f"gbridge: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ChainError, OracleError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"gbridge: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
