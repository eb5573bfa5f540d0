"""Command-line front end: fit, infer, simulate.

All inputs come from JSON config files validated against the schemas below
(unknown keys rejected; seeds mandatory).  Numbers in CSV outputs are
serialized with 17 significant digits so reruns are byte-identical.

Exit codes: 0 success, 2 config/input error, 3 numerical failure.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .debias import coefficient_ci, contrast_ci, debias
from .errors import (
    ConfigError,
    ContrastError,
    DegenerateColumnError,
    GlmOverflowError,
    SingularHessianError,
)
from .families import Dataset, GlmFamily, hessian_matrix
from .lasso import cross_validate, fit_lasso, lambda_grid
from .simulate import CovarianceSpec, SimulationCell, run_cell, summarize
from .theta import HESSIAN_INVERSE, ThetaMatrix, hessian_inverse_theta, nodewise_theta

RECORDS_HEADER = [
    "method", "beta1_true", "replication", "seed", "estimate", "se",
    "ci_lower", "ci_upper", "covered", "diverged",
    "audit_term_i", "audit_term_ii", "audit_term_iii",
]
SUMMARY_HEADER = [
    "method", "beta1_true", "n", "p", "bias", "coverage",
    "empirical_se", "model_se", "divergence_rate", "replications_used",
]
INFERENCE_HEADER = ["name", "estimate", "se", "ci_lower", "ci_upper", "method"]

# key -> (type, required, default)
FIT_SCHEMA = {
    "csv": (str, True, None),
    "response": (str, True, None),
    "family": (str, True, None),
    "method": (str, True, None),  # ref_ds | orig_ds
    "seed": (int, True, None),
    "out_dir": (str, False, "."),
    "level": (float, False, 0.95),
    "cv_folds": (int, False, 10),
    "nodewise_folds": (int, False, 5),
    "standardize": (bool, False, False),
    "n_lambda": (int, False, 100),
    "lambda_min_ratio": (float, False, None),
    "nodewise_n_lambda": (int, False, 40),
    "nodewise_ratio": (float, False, None),
}
SIMULATE_SCHEMA = {
    "family": (str, True, None),
    "n": (int, True, None),
    "p": (int, True, None),
    "covariance": (dict, True, None),
    "beta1_grid": (list, True, None),
    "extra_signals": (list, False, []),
    "replications": (int, True, None),
    "seed": (int, True, None),
    "methods": (list, False, ["ref_ds", "orig_ds", "mle", "oracle"]),
    "truncation": (float, False, 6.0),
    "audit": (bool, False, False),
    "threads": (int, False, 1),
    "cv_folds": (int, False, 10),
    "nodewise_folds": (int, False, 5),
    "n_lambda": (int, False, 100),
    "lambda_min_ratio": (float, False, None),
    "nodewise_n_lambda": (int, False, 40),
    "nodewise_ratio": (float, False, None),
}
COVARIANCE_SCHEMA = {
    "kind": (str, True, None),
    "rho": (float, False, 0.0),
}


def _fmt(value) -> str:
    """Fixed serialization for CSV cells."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def _validate(config: dict, schema: dict, where: str) -> dict:
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    out = {}
    for key, (typ, required, default) in schema.items():
        if key not in config:
            if required:
                raise ConfigError(f"missing required key {key!r} in {where}")
            out[key] = default
            continue
        val = config[key]
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if typ is int and isinstance(val, bool):
            raise ConfigError(f"key {key!r} in {where} must be {typ.__name__}")
        if val is not None and not isinstance(val, typ):
            raise ConfigError(f"key {key!r} in {where} must be {typ.__name__}")
        out[key] = val
    return out


def _load_config(path: str, schema: dict) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return _validate(raw, schema, Path(path).name)


def _read_csv_dataset(path: str, response: str):
    """Load a design from CSV; reject missing/non-numeric entries."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise ConfigError(f"input CSV not found: {path}") from exc
    if not rows:
        raise ConfigError(f"input CSV {path} is empty")
    header = rows[0]
    if response not in header:
        raise ConfigError(f"response column {response!r} not found in {path}")
    bad_rows = []
    parsed = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header) or any(cell.strip() == "" for cell in row):
            bad_rows.append(i)
            continue
        try:
            parsed.append([float(cell) for cell in row])
        except ValueError:
            bad_rows.append(i)
    if bad_rows:
        shown = ", ".join(str(r) for r in bad_rows[:20])
        more = "" if len(bad_rows) <= 20 else f" (+{len(bad_rows) - 20} more)"
        raise ConfigError(f"missing or non-numeric values in {path} at row(s): {shown}{more}")
    arr = np.asarray(parsed, dtype=np.float64)
    ridx = header.index(response)
    y = arr[:, ridx]
    covs = np.delete(arr, ridx, axis=1)
    names = [h for k, h in enumerate(header) if k != ridx]
    X = np.hstack([np.ones((arr.shape[0], 1)), covs])
    return X, y, ["intercept"] + names


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_fit(config_path: str) -> int:
    cfg = _load_config(config_path, FIT_SCHEMA)
    if cfg["method"] not in ("ref_ds", "orig_ds"):
        raise ConfigError("method must be 'ref_ds' or 'orig_ds'")
    family = GlmFamily(cfg["family"])
    X, y, names = _read_csv_dataset(cfg["csv"], cfg["response"])
    if cfg["standardize"]:
        covs = X[:, 1:]
        sd = covs.std(axis=0, ddof=0)
        if np.any(sd == 0):
            raise ConfigError("standardize requested but a covariate is constant")
        X = np.hstack([X[:, :1], (covs - covs.mean(axis=0)) / sd])
    data = Dataset(X, y)
    family.validate_response(data.y)
    if cfg["method"] == "ref_ds" and data.p + 1 > data.n:
        raise SingularHessianError(
            f"ref_ds needs p + 1 <= n: the {data.p + 1} x {data.p + 1} Hessian is singular "
            f"with n = {data.n}"
        )

    grid = lambda_grid(family, data, cfg["n_lambda"], cfg["lambda_min_ratio"])
    cv = cross_validate(family, data, cfg["cv_folds"], grid, cfg["seed"])
    fit = fit_lasso(family, data, cv.lambda_min)
    sigma = hessian_matrix(family, data, fit.xi_hat)
    if cfg["method"] == "ref_ds":
        theta = hessian_inverse_theta(sigma)
    else:
        theta = nodewise_theta(
            family, data, fit.xi_hat, cfg["nodewise_folds"], cfg["seed"],
            n_lambda=cfg["nodewise_n_lambda"], ratio=cfg["nodewise_ratio"],
        )
    est = debias(fit, theta, family, data)

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for j, name in enumerate(names):
        ci = coefficient_ci(est, j, cfg["level"])
        rows.append([name, ci.point, float(est.se[j]), ci.lower, ci.upper, cfg["method"]])
    _write_csv(out_dir / "inference.csv", INFERENCE_HEADER, rows)

    payload = {
        "family": cfg["family"],
        "method": cfg["method"],
        "level": cfg["level"],
        "seed": cfg["seed"],
        "n": data.n,
        "p": data.p,
        "names": names,
        "lambda": fit.lam,
        "xi_hat": fit.xi_hat.xi.tolist(),
        "b": est.b.tolist(),
        "se": est.se.tolist(),
        "cv": {
            "lambda_grid": cv.lambda_grid.tolist(),
            "cv_mean": cv.cv_mean.tolist(),
            "cv_se": cv.cv_se.tolist(),
            "lambda_min": cv.lambda_min,
            "fold_assignment_seed": cv.fold_assignment_seed,
        },
        "theta": theta.values.tolist(),
        "sigma": sigma.tolist() if cfg["method"] == "ref_ds" else None,
    }
    with open(out_dir / "fit.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    return 0


def cmd_infer(fit_path: str, contrast_path: str, level: float, out: str | None) -> int:
    try:
        with open(fit_path, "r", encoding="utf-8") as fh:
            saved = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"fit file not found: {fit_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"fit file {fit_path} is not valid JSON: {exc}") from exc
    if saved.get("method") != "ref_ds" or saved.get("sigma") is None:
        raise ContrastError(
            "contrast intervals need a ref_ds fit (the saved fit used the node-wise estimator)"
        )
    try:
        with open(contrast_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"contrast file not found: {contrast_path}") from exc
    try:
        alpha = np.asarray(
            [float(tok) for tok in text.replace(",", "\n").split() if tok.strip()],
            dtype=np.float64,
        )
    except ValueError as exc:
        raise ConfigError(f"contrast file {contrast_path} contains non-numeric entries") from exc
    b = np.asarray(saved["b"], dtype=np.float64)
    if alpha.shape != b.shape:
        raise ConfigError(
            f"contrast has {alpha.shape[0]} weights; the fit has {b.shape[0]} coefficients"
        )

    from .debias import DebiasedEstimate

    est = DebiasedEstimate(
        b=b,
        se=np.asarray(saved["se"], dtype=np.float64),
        method=HESSIAN_INVERSE,
        lambda_used=float(saved["lambda"]),
        n=int(saved["n"]),
    )
    theta = ThetaMatrix(np.asarray(saved["theta"], dtype=np.float64), HESSIAN_INVERSE)
    sigma = np.asarray(saved["sigma"], dtype=np.float64)
    ci = contrast_ci(est, theta, sigma, alpha, level)
    se = (ci.upper - ci.lower) / (2.0 * ci.z_value)
    row = ["contrast", ci.point, se, ci.lower, ci.upper, "ref_ds"]
    line = ",".join(INFERENCE_HEADER) + "\n" + ",".join(_fmt(v) for v in row) + "\n"
    sys.stdout.write(line)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(line)
    return 0


def _cell_from_config(cfg: dict) -> SimulationCell:
    cov_cfg = _validate(cfg["covariance"], COVARIANCE_SCHEMA, "covariance")
    extra = []
    for pair in cfg["extra_signals"]:
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError("extra_signals entries must be [index, value] pairs")
        extra.append((int(pair[0]), float(pair[1])))
    try:
        return SimulationCell(
            family=cfg["family"],
            n=cfg["n"],
            p=cfg["p"],
            cov=CovarianceSpec(cov_cfg["kind"], cov_cfg["rho"]),
            beta1_grid=tuple(float(b) for b in cfg["beta1_grid"]),
            extra_signals=tuple(extra),
            replications=cfg["replications"],
            seed=cfg["seed"],
            methods=tuple(cfg["methods"]),
            truncation=cfg["truncation"],
            audit=cfg["audit"],
            cv_folds=cfg["cv_folds"],
            nodewise_folds=cfg["nodewise_folds"],
            n_lambda=cfg["n_lambda"],
            lambda_ratio=cfg["lambda_min_ratio"],
            nodewise_n_lambda=cfg["nodewise_n_lambda"],
            nodewise_ratio=cfg["nodewise_ratio"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def records_rows(records):
    rows = []
    for r in records:
        rows.append([
            r.method, r.beta1_true, r.replication, r.seed, r.estimate, r.se,
            r.ci_lower, r.ci_upper, r.covered, r.diverged,
            r.audit_term_i, r.audit_term_ii, r.audit_term_iii,
        ])
    return rows


def summary_rows(summary, n, p):
    rows = []
    for s in summary.rows:
        rows.append([
            s.method, s.beta1_true, n, p, s.bias, s.coverage,
            s.empirical_se, s.model_se, s.divergence_rate, s.n_used,
        ])
    return rows


def cmd_simulate(config_path: str, out_dir: str) -> int:
    cfg = _load_config(config_path, SIMULATE_SCHEMA)
    cell = _cell_from_config(cfg)
    records = run_cell(cell, threads=cfg["threads"])
    summary = summarize(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "records.csv", RECORDS_HEADER, records_rows(records))
    _write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows(summary, cell.n, cell.p))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="glminfer",
        description="Penalized GLM fitting, de-biased inference, and replication studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="lasso fit plus de-biased inference on a CSV")
    p_fit.add_argument("--config", required=True, help="JSON fit configuration")

    p_inf = sub.add_parser("infer", help="contrast confidence interval from a saved fit")
    p_inf.add_argument("--fit", required=True, help="fit.json produced by the fit command")
    p_inf.add_argument("--contrast", required=True, help="CSV of p+1 unit-norm contrast weights")
    p_inf.add_argument("--level", type=float, default=0.95)
    p_inf.add_argument("--out", default=None, help="optional path for the contrast CSV row")

    p_sim = sub.add_parser("simulate", help="run a replication-study cell")
    p_sim.add_argument("--config", required=True, help="JSON simulation configuration")
    p_sim.add_argument("--out", required=True, help="output directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args.config)
        if args.command == "infer":
            return cmd_infer(args.fit, args.contrast, args.level, args.out)
        return cmd_simulate(args.config, args.out)
    except (ConfigError, ContrastError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularHessianError, DegenerateColumnError, GlmOverflowError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
