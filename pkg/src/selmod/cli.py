"""Command-line driver: fit, simulate, profile.

    selmod fit <data.csv> <spec> [--out report.json]
               [--profile-out curve.csv] [--lenient]
    selmod simulate <config> --out data.csv
    selmod profile <data.csv> <spec> [--alphas auto|a,b,c] --out curve.csv

Exit codes: 0 success, 2 schema error, 3 non-convergence.  Data files are
UTF-8 CSV with a header row; the response cell is empty exactly on censored
rows (selection column 0).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings

import numpy as np

from . import __version__
from . import families as fam
from . import mechanisms as mech_mod
from .errors import HessianNotPDError, NonConvergenceError, SchemaError, SelmodError
from .estimator import INTERIOR, FitReport, profile_maximize, ProfileEvaluator, inner_maximize
from .glm import fit_glm, fit_selection_glm
from .likelihood import Dataset, ParamVector
from .modelspec import ModelSpec, load_model_spec, parse_key_values
from .simulate import STANDARD_NORMAL_COLUMNS, SimConfig, simulate

#: float formatting that survives a CSV round trip bit-exactly
FLOAT_FMT = "%.17g"


def load_dataset(path, spec: ModelSpec, lenient: bool = False) -> Dataset:
    """Read and validate a CSV data file against a model spec.

    Strict mode rejects a present response on a censored row; lenient mode
    downgrades that to a warning and ignores the value.
    """
    required = [spec.response_col, spec.selection_col, *spec.x_cols, *spec.w_cols]
    if any(c is None for c in required[:2]):
        raise SchemaError("model spec must name response_col and selection_col")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file (missing header)")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = list(reader)

    n = len(rows)
    d = np.empty(n, dtype=np.int64)
    y = np.full(n, np.nan)
    X = np.empty((n, len(spec.x_cols)))
    W = np.empty((n, len(spec.w_cols)))

    def cell_float(row_idx, row, col):
        text = (row[col] or "").strip()
        try:
            return float(text)
        except ValueError:
            raise SchemaError(
                f"{path}: row {row_idx + 2}, column {col!r}: not a number ({text!r})"
            ) from None

    for i, row in enumerate(rows):
        sel_text = (row[spec.selection_col] or "").strip()
        if sel_text not in ("0", "1"):
            raise SchemaError(
                f"{path}: row {i + 2}: selection column must be 0/1, got {sel_text!r}"
            )
        d[i] = int(sel_text)
        resp_text = (row[spec.response_col] or "").strip()
        if d[i] == 1:
            if not resp_text:
                raise SchemaError(f"{path}: row {i + 2}: selected row has empty response")
            y[i] = cell_float(i, row, spec.response_col)
        elif resp_text:
            if not lenient:
                raise SchemaError(
                    f"{path}: row {i + 2}: censored row carries a response value "
                    f"(use --lenient to ignore)"
                )
            warnings.warn(f"row {i + 2}: ignoring response on censored row", stacklevel=2)
        for j, col in enumerate(spec.x_cols):
            X[i, j] = cell_float(i, row, col)
        for j, col in enumerate(spec.w_cols):
            W[i, j] = cell_float(i, row, col)

    if spec.x_intercept:
        X = np.column_stack([np.ones(n), X])
    if spec.w_intercept:
        W = np.column_stack([np.ones(n), W])
    try:
        return Dataset(d, y, X, W)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_dataset_csv(path, data: Dataset, x_names=None, w_names=None,
                      response_col="y", selection_col="d"):
    """Write a dataset in the canonical CSV schema (intercepts omitted)."""
    x_names = x_names or [f"x{j}" for j in range(1, data.p)]
    w_names = w_names or [f"w{j}" for j in range(1, data.q)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([selection_col, response_col, *x_names, *w_names])
        for i in range(data.n):
            resp = "" if data.d[i] == 0 else FLOAT_FMT % data.y[i]
            row = [str(int(data.d[i])), resp]
            row += [FLOAT_FMT % v for v in data.X[i, 1:]]
            row += [FLOAT_FMT % v for v in data.W[i, 1:]]
            writer.writerow(row)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _coef_names(prefix_cols, intercept):
    names = list(prefix_cols)
    return (["one"] + names) if intercept else names


def report_to_dict(report: FitReport, spec: ModelSpec, data_path=None,
                   spec_path=None) -> dict:
    p = report.theta_hat.beta.size
    q = report.theta_hat.gamma.size
    se = report.std_err
    ratio = report.ratio

    def block(names, est, sl):
        return {
            "names": names,
            "estimate": [float(v) for v in est],
            "std_err": None if se is None else [float(v) for v in se[sl]],
            "ratio": None if ratio is None else [float(v) for v in ratio[sl]],
        }

    x_cols = list(spec.x_cols) or [f"x{j}" for j in range(1, p + 1 - int(spec.x_intercept))]
    w_cols = list(spec.w_cols) or [f"w{j}" for j in range(1, q + 1 - int(spec.w_intercept))]
    out = {
        "version": __version__,
        "data_sha256": _sha256(data_path) if data_path else None,
        "spec_sha256": _sha256(spec_path) if spec_path else None,
        "seed": None,
        "model": spec.to_dict(),
        "alpha_hat": report.alpha_hat,
        "loglik_max": report.loglik_max,
        "boundary_diagnostic": report.boundary_diagnostic,
        "dropped_points": report.dropped_points,
        "response_model": block(
            _coef_names(x_cols, spec.x_intercept), report.theta_hat.beta, slice(0, p)),
        "selection_model": block(
            _coef_names(w_cols, spec.w_intercept), report.theta_hat.gamma, slice(p, p + q)),
        "profile": {
            "alpha": [float(a) for a in report.profile.alphas],
            "rel_loglik": [float(v) for v in report.profile.rel_loglik],
        },
    }
    if report.theta_hat.psi is not None:
        out["dispersion"] = {
            "estimate": float(report.theta_hat.psi),
            "std_err": None if se is None else float(se[-1]),
            "ratio": None if ratio is None else float(ratio[-1]),
        }
    if report.alpha_ci is not None:
        out["alpha_ci"] = {
            "lower": report.alpha_ci.lower,
            "upper": report.alpha_ci.upper,
            "level": report.alpha_ci.level,
            "lower_flag": report.alpha_ci.lower_flag,
            "upper_flag": report.alpha_ci.upper_flag,
        }
    else:
        out["alpha_ci"] = None
    if report.se_message:
        out["std_err_message"] = report.se_message
    return out


def write_profile_csv(path, alphas, rel_loglik, status=None):
    """Emit (alpha, rel_loglik, status) rows; failures keep an empty value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "rel_loglik", "status"])
        for i, a in enumerate(alphas):
            ok = status[i] if status is not None else "ok"
            val = "" if ok != "ok" else FLOAT_FMT % rel_loglik[i]
            writer.writerow([FLOAT_FMT % a, val, ok])


def cmd_fit(data_path, spec_path, out_path=None, profile_out=None,
            lenient=False) -> dict:
    spec = load_model_spec(spec_path)
    data = load_dataset(data_path, spec, lenient=lenient)
    report = profile_maximize(data, spec)
    doc = report_to_dict(report, spec, data_path=data_path, spec_path=spec_path)
    text = json.dumps(doc, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if profile_out:
        write_profile_csv(profile_out, report.profile.alphas, report.profile.rel_loglik)
    return doc


_SIM_FAMILIES = {"bernoulli", "poisson", "negbin", "normal"}


def load_sim_config(path) -> SimConfig:
    raw = parse_key_values(open(path, "r", encoding="utf-8").read())
    known = {"n", "family", "link", "mechanism", "alpha", "beta", "gamma",
             "psi", "kappa", "seed", "covariate_law"}
    unknown = set(raw) - known
    if unknown:
        raise SchemaError(f"unknown simulate-config fields: {sorted(unknown)}")
    try:
        family_key = raw["family"]
        if family_key not in _SIM_FAMILIES:
            raise SchemaError(f"unknown family {family_key!r}")
        if family_key == "bernoulli":
            family = fam.bernoulli(raw.get("link", fam.LOGIT))
        elif family_key == "poisson":
            family = fam.poisson()
        elif family_key == "negbin":
            family = fam.negbin(float(raw["kappa"]))
        else:
            family = fam.normal()
        mech = mech_mod.mechanism(raw["mechanism"])
        beta = [float(s) for s in raw["beta"].split(",")]
        gamma = [float(s) for s in raw["gamma"].split(",")]
        return SimConfig(
            n=int(raw["n"]),
            family=family,
            mechanism=mech,
            beta_true=beta,
            gamma_true=gamma,
            alpha_true=float(raw.get("alpha", "0")),
            psi_true=float(raw.get("psi", "1")),
            covariate_law=raw.get("covariate_law", STANDARD_NORMAL_COLUMNS),
            seed=int(raw.get("seed", "0")),
        )
    except KeyError as exc:
        raise SchemaError(f"simulate config is missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise SchemaError(f"simulate config: {exc}") from None


def cmd_simulate(config_path, out_path) -> None:
    config = load_sim_config(config_path)
    if config.n == 0:
        # header-only output; Dataset itself requires full-rank designs
        x_names = [f"x{j}" for j in range(1, config.beta_true.size)]
        w_names = [f"w{j}" for j in range(1, config.gamma_true.size)]
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow(["d", "y", *x_names, *w_names])
        return
    data = simulate(config)
    write_dataset_csv(out_path, data)


def cmd_profile(data_path, spec_path, alphas, out_path) -> None:
    spec = load_model_spec(spec_path)
    data = load_dataset(data_path, spec)
    if alphas == "auto":
        report = profile_maximize(data, spec, compute_ci=False)
        write_profile_csv(out_path, report.profile.alphas, report.profile.rel_loglik)
        return
    values = [float(s) for s in alphas.split(",") if s.strip()]
    if not values:
        raise SchemaError("--alphas must be 'auto' or a comma-separated list")
    family = spec.response_family()
    sel = data.d == 1
    glm_y = fit_glm(data.y[sel], data.X[sel], family)
    glm_d = fit_selection_glm(data.d, data.W, spec.mechanism_at(0.0).g0_kind)
    theta0 = ParamVector(0.0, glm_y.coef, glm_d.coef, psi=glm_y.dispersion)
    prof = ProfileEvaluator(data, spec, theta0)
    lls, status = [], []
    for a in sorted(values, key=abs):
        prof(a)
    for a in values:
        res = prof.cache.get(float(a))
        if res is None:
            lls.append(np.nan)
            status.append("failed")
        else:
            lls.append(res.loglik)
            status.append("ok")
    finite = [v for v in lls if np.isfinite(v)]
    if not finite:
        raise NonConvergenceError("no profile point converged")
    top = max(finite)
    rel = [v - top for v in lls]
    write_profile_csv(out_path, values, rel, status)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selmod",
        description="Sample-selection models for exponential-family responses",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model and write a report")
    p_fit.add_argument("data")
    p_fit.add_argument("spec")
    p_fit.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p_fit.add_argument("--profile-out", default=None, help="profile curve CSV path")
    p_fit.add_argument("--lenient", action="store_true",
                       help="warn instead of fail on response values in censored rows")

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("config")
    p_sim.add_argument("--out", required=True)

    p_prof = sub.add_parser("profile", help="evaluate the relative profile curve")
    p_prof.add_argument("data")
    p_prof.add_argument("spec")
    p_prof.add_argument("--alphas", default="auto",
                        help="'auto' or comma-separated alpha values "
                             "(use --alphas=-1,0,1 when values start with '-')")
    p_prof.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            cmd_fit(args.data, args.spec, args.out, args.profile_out, args.lenient)
        elif args.command == "simulate":
            cmd_simulate(args.config, args.out)
        else:
            cmd_profile(args.data, args.spec, args.alphas, args.out)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, HessianNotPDError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
