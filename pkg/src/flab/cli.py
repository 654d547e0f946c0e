"""Command-line entry point.

    flab <experiment> --config settings.json [--seed N] [--out report.json]
                      [--format json|csv]

Experiments: spectrum, fock, compare, bound-check, lattice, clt.  Configs
are flat JSON objects (scalars and arrays of scalars only); unknown or
ill-typed keys are rejected before any computation starts.  Runs with the
same config and seed produce byte-identical reports apart from the
timestamp.  Exit codes: 0 all assertions passed, 1 an assertion failed,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .errors import ConfigError, DimensionBudgetError, FlabError, NumericalError
from .focklimit import (
    beta_bound_decreasing,
    beta_bound_test,
    clt_convergence,
    depolarizing_fock_setup,
    finite_limit_comparison,
    fock_block_spectrum,
    SingleParticleSpace,
)
from .geometry import symmetric_sector_dense_spectrum
from .lattice import (
    RingLattice,
    continuum_mode_multiplier,
    lattice_mode_multiplier,
    mode_contraction_k1,
    high_momentum_suppression_probe,
    swap_factorization_probe,
)
from .operators import QuditSystem, basis_pure_density, product_density
from .reporting import Report

_SCALAR = (bool, int, float, str)


def _check_flat(config: dict):
    for key, value in config.items():
        if isinstance(value, _SCALAR) or value is None:
            continue
        if isinstance(value, list) and all(isinstance(v, _SCALAR) for v in value):
            continue
        raise ConfigError(
            f"config key {key!r} must be a scalar or an array of scalars"
        )


def _require(params: dict, key: str, kind, predicate=None, describe: str = ""):
    if key not in params:
        raise ConfigError(f"missing required config key {key!r}")
    value = params[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is list:
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"config key {key!r} must be of type {kind.__name__}")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"config key {key!r} invalid: {describe}")
    return value


def _optional(params: dict, key: str, kind, default, predicate=None, describe: str = ""):
    if key not in params or params[key] is None:
        return default
    return _require(params, key, kind, predicate, describe)


def _int_list(params: dict, key: str, minimum: int):
    raw = _require(params, key, list)
    out = []
    for v in raw:
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(f"config key {key!r} must list integers >= {minimum}")
        out.append(v)
    if out != sorted(out) or len(set(out)) != len(out):
        raise ConfigError(f"config key {key!r} must be strictly increasing")
    return out


def _float_list(params: dict, key: str, positive: bool = True):
    raw = _require(params, key, list)
    out = []
    for v in raw:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or (positive and v <= 0):
            raise ConfigError(f"config key {key!r} must list positive numbers")
        out.append(float(v))
    return out


def _reject_unknown(params: dict, allowed: set[str]):
    unknown = sorted(set(params) - allowed - {"seed"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _seed(params: dict) -> int:
    return _optional(params, "seed", int, 0)


def run_spectrum(params: dict) -> Report:
    _reject_unknown(params, {"d", "n", "y", "k"})
    d = _require(params, "d", int, lambda v: v >= 2, "need d >= 2")
    n = _require(params, "n", int, lambda v: v >= 2, "need n >= 2")
    y = _require(params, "y", float, lambda v: v >= 1.0, "need y >= 1")
    k = _require(params, "k", int, lambda v: v >= 1, "need k >= 1")
    report = Report("spectrum", params, _seed(params))
    system = QuditSystem(d, n)
    state = product_density(basis_pure_density(d), n)
    spectrum = symmetric_sector_dense_spectrum(system, state, y, k)
    rows = [
        {"index": i, "eigenvalue": float(v), "contraction_factor": math.sqrt(max(v, 0.0))}
        for i, v in enumerate(spectrum.eigenvalues)
    ]
    report.add_table("eigenvalues", rows)
    in_range = bool(np.all(spectrum.eigenvalues <= 1.0 + 1e-10))
    report.add_assertion(
        "spectrum-in-unit-interval",
        in_range,
        f"max eigenvalue {float(spectrum.eigenvalues.max(initial=0.0)):.6g}",
    )
    if y == 1.0:
        flat = bool(np.all(np.abs(spectrum.eigenvalues - 1.0) < 1e-8))
        report.add_assertion(
            "identity-channel-fixes-sector",
            flat,
            "permutation averaging alone must leave symmetric words untouched",
        )
    return report


def run_fock(params: dict) -> Report:
    _reject_unknown(params, {"d", "y", "k_max"})
    d = _require(params, "d", int, lambda v: v >= 2, "need d >= 2")
    y = _require(params, "y", float, lambda v: v >= 1.0, "need y >= 1")
    k_max = _require(params, "k_max", int, lambda v: 1 <= v <= 4, "need 1 <= k_max <= 4")
    report = Report("fock", params, _seed(params))
    sp_fine, sp_coarse, m = depolarizing_fock_setup(d, y)
    rows = []
    worst = 0.0
    for k in range(1, k_max + 1):
        block = fock_block_spectrum(sp_fine, sp_coarse, m, k)
        for i, v in enumerate(block.eigenvalues):
            rows.append(
                {"k": k, "index": i, "eigenvalue": float(v), "eigenvector": block.eigen_labels[i]}
            )
            worst = max(worst, float(v))
    report.add_table("blocks", rows)
    report.add_assertion(
        "block-spectrum-in-unit-interval", worst <= 1.0 + 1e-10, f"max eigenvalue {worst:.6g}"
    )
    return report


def run_compare(params: dict) -> Report:
    _reject_unknown(params, {"d", "y", "k", "n_list"})
    d = _require(params, "d", int, lambda v: v >= 2, "need d >= 2")
    y = _require(params, "y", float, lambda v: v > 1.0, "need y > 1")
    k = _require(params, "k", int, lambda v: v >= 1, "need k >= 1")
    n_list = _int_list(params, "n_list", minimum=max(2, k))
    report = Report("compare", params, _seed(params))
    data = finite_limit_comparison(n_list, d, y, k)
    report.add_table(
        "deviations",
        [{"n": n, "deviation": dev} for n, dev in zip(data["n_list"], data["deviations"])],
    )
    spectra_rows = [
        {"n": "limit", "index": i, "eigenvalue": float(v)}
        for i, v in enumerate(data["limit"])
    ]
    for n in n_list:
        spectra_rows.extend(
            {"n": n, "index": i, "eigenvalue": float(v)}
            for i, v in enumerate(data["spectra"][n])
        )
    report.add_table("spectra", spectra_rows)
    devs = data["deviations"]
    report.add_assertion(
        "final-deviation-small",
        devs[-1] <= 0.05,
        f"deviation {devs[-1]:.3e} at n={n_list[-1]}",
    )
    strict = all(b < a for a, b in zip(devs, devs[1:]))
    report.add_assertion(
        "deviations-strictly-decreasing",
        strict,
        "sequence " + ", ".join(f"{v:.3e}" for v in devs),
    )
    if all(v > 1e-14 for v in devs):
        rate = float(np.polyfit(np.log(n_list), np.log(devs), 1)[0])
        report.add_assertion(
            "deviation-rate-near-minus-one",
            abs(rate + 1.0) <= 0.3,
            f"fitted rate {rate:.3f}",
        )
    else:
        report.add_assertion(
            "deviation-rate-near-minus-one",
            False,
            "deviations sit at roundoff level; no 1/n scaling is measurable",
        )
    return report


def run_bound_check(params: dict) -> Report:
    _reject_unknown(params, {"d", "y", "n", "k", "samples"})
    d = _require(params, "d", int, lambda v: v >= 2, "need d >= 2")
    y = _require(params, "y", float, lambda v: v > 1.0, "need y > 1")
    n = _require(params, "n", int, lambda v: v >= 2, "need n >= 2")
    k = _require(params, "k", int, lambda v: v >= 1, "need k >= 1")
    samples = _require(params, "samples", int, lambda v: 1 <= v <= 100000, "1..100000")
    if k > n:
        raise ConfigError("config key 'k' must not exceed 'n'")
    report = Report("bound-check", params, _seed(params))
    data = beta_bound_test(n, d, y, k, samples, seed=_seed(params))
    report.add_table(
        "bound",
        [
            {
                "n": n,
                "d": d,
                "y": y,
                "k": k,
                "samples": samples,
                "bound": data["bound"],
                "max_ratio_sq": data["max_ratio_sq"],
                "violations": data["violations"],
                "bound_decreasing_in_k": beta_bound_decreasing(d, y),
            }
        ],
    )
    report.add_assertion(
        "no-bound-violations",
        data["violations"] == 0,
        f"max ratio {data['max_ratio_sq']:.6g} against bound {data['bound']:.6g}",
    )
    return report


def run_lattice(params: dict) -> Report:
    _reject_unknown(params, {"L", "spacing", "y", "sigma_list", "cutoff", "pair_probe", "probe_samples"})
    L = _require(params, "L", int, lambda v: v >= 8 and v % 2 == 0, "need even L >= 8")
    spacing = _require(params, "spacing", float, lambda v: v > 0, "need spacing > 0")
    y = _require(params, "y", float, lambda v: v >= 1.0, "need y >= 1")
    sigma_list = _float_list(params, "sigma_list")
    lattice = RingLattice(L, spacing)
    cutoff = _optional(
        params,
        "cutoff",
        float,
        0.5 * lattice.nyquist,
        lambda v: 0 < v <= lattice.nyquist,
        "cutoff must lie in (0, pi/spacing]",
    )
    pair_default = L <= 24
    pair_probe = _optional(params, "pair_probe", bool, pair_default)
    probe_samples = _optional(params, "probe_samples", int, 32, lambda v: v >= 1, "need >= 1")
    seed = _seed(params)
    report = Report("lattice", params, seed)

    mode_rows = []
    formula_gap = 0.0
    exponent_gap = 0.0
    for sigma in sigma_list:
        for m in lattice.mode_indices():
            if abs(m) == L // 2:
                continue
            contraction = mode_contraction_k1(lattice, sigma, y, m)
            formula = lattice_mode_multiplier(lattice, sigma, m) / y
            cont = continuum_mode_multiplier(sigma, lattice.momentum(m)) / y
            mode_rows.append(
                {
                    "sigma": sigma,
                    "mode": m,
                    "momentum": lattice.momentum(m),
                    "contraction": contraction,
                    "closed_form": formula,
                    "continuum": cont,
                }
            )
            formula_gap = max(formula_gap, abs(contraction - formula))
            u = abs(lattice.momentum(m)) * spacing
            if 0 < u <= 0.5:
                a = (sigma / spacing) ** 2 * (1.0 - math.cos(u))
                b = 0.5 * (sigma * lattice.momentum(m)) ** 2
                exponent_gap = max(exponent_gap, abs(a - b) / b)
    report.add_table("modes", mode_rows)
    report.add_assertion(
        "mode-contraction-matches-closed-form",
        formula_gap <= 1e-10,
        f"max gap {formula_gap:.3e}",
    )
    report.add_assertion(
        "low-momentum-exponent-near-continuum",
        exponent_gap <= 0.10,
        f"max relative exponent gap {exponent_gap:.3%} below p*eps = 0.5",
    )

    probe_rows = []
    bound_ok, bound_detail = True, ""
    for sigma in sigma_list:
        try:
            out = high_momentum_suppression_probe(lattice, sigma, y, cutoff, 1, samples=probe_samples, seed=seed)
            probe_rows.append(
                {
                    "sigma": sigma,
                    "k": 1,
                    "max_contraction": out["max_contraction"],
                    "mode_bound": out["mode_bound"],
                    "gaussian_claim": out["gaussian_claim"],
                }
            )
        except NumericalError as exc:
            bound_ok, bound_detail = False, str(exc)
        if pair_probe:
            out2 = high_momentum_suppression_probe(lattice, sigma, y, cutoff, 2, samples=max(4, probe_samples // 4), seed=seed)
            probe_rows.append(
                {
                    "sigma": sigma,
                    "k": 2,
                    "max_contraction": out2["max_contraction"],
                    "mode_bound": None,
                    "gaussian_claim": out2["gaussian_claim"],
                }
            )
    report.add_table("high_momentum", probe_rows)
    report.add_assertion("high-momentum-mode-bound", bound_ok, bound_detail)

    disp_ok, disp_detail = True, ""
    disp_rows = []
    for sigma in sigma_list:
        try:
            out = swap_factorization_probe(lattice, sigma, 1)
            disp_rows.append(
                {"sigma": sigma, "max_gap": out["max_gap"], "bound_at_max": out["bound_at_max"]}
            )
        except NumericalError as exc:
            disp_ok, disp_detail = False, str(exc)
    report.add_table("dispersion", disp_rows)
    report.add_assertion("multiplier-gap-within-dispersion-bound", disp_ok, disp_detail)

    if pair_probe:
        pair_rows = []
        sups = []
        for sigma in sigma_list:
            out = swap_factorization_probe(lattice, sigma, 2)
            sups.append(out["sup_deviation"])
            pair_rows.append(
                {
                    "sigma": sigma,
                    "sigma_over_eps": sigma / spacing,
                    "sup_deviation": out["sup_deviation"],
                    "word_count": out["word_count"],
                }
            )
        report.add_table("pair_independence", pair_rows)
        if len(sups) >= 2:
            mono = all(b < a for a, b in zip(sups, sups[1:]))
            report.add_assertion(
                "pair-deviation-decreasing-in-smoothing",
                mono,
                "sup deviations " + ", ".join(f"{v:.3e}" for v in sups),
            )
    return report


def run_clt(params: dict) -> Report:
    _reject_unknown(params, {"d", "n_list", "letter"})
    d = _optional(params, "d", int, 2, lambda v: v >= 2, "need d >= 2")
    n_list = _int_list(params, "n_list", minimum=2)
    letter = _optional(params, "letter", int, 0, lambda v: v >= 0, "need letter >= 0")
    if letter >= d * d - 1:
        raise ConfigError(f"letter index {letter} out of range for d={d}")
    report = Report("clt", params, _seed(params))
    sp = SingleParticleSpace.from_state(basis_pure_density(d))
    rows = []
    all_ok = True
    details = []
    for degree, word in ((1, (letter,)), (2, (letter, letter))):
        try:
            data = clt_convergence(sp, word, word, n_list)
            for n, dev in zip(data["n_list"], data["deviations"]):
                rows.append({"degree": degree, "n": n, "deviation": dev})
            if data["rate"] is not None:
                details.append(f"degree {degree} rate {data['rate']:.3f}")
        except NumericalError as exc:
            all_ok = False
            details.append(f"degree {degree}: {exc}")
    report.add_table("convergence", rows)
    report.add_assertion(
        "word-metric-converges-at-one-over-n", all_ok, "; ".join(details)
    )
    return report


EXPERIMENTS = {
    "spectrum": run_spectrum,
    "fock": run_fock,
    "compare": run_compare,
    "bound-check": run_bound_check,
    "lattice": run_lattice,
    "clt": run_clt,
}


def run_experiment(name: str, params: dict) -> Report:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    _check_flat(params)
    return EXPERIMENTS[name](params)


def run_config(config: dict) -> Report:
    """Run from a single dict holding 'experiment' plus its parameters."""
    params = dict(config)
    name = params.pop("experiment", None)
    if not isinstance(name, str):
        raise ConfigError("config must carry an 'experiment' name")
    return run_experiment(name, params)


def _load_config(path: str) -> dict:
    try:
        with open(path) as handle:
            config = json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flab",
        description="Contraction spectra of coarse-graining channels on spin systems.",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", required=True, help="path to a flat JSON config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="write the report to this path")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    args = parser.parse_args(argv)

    try:
        params = _load_config(args.config)
        if args.seed is not None:
            params["seed"] = args.seed
        report = run_experiment(args.experiment, params)
    except (ConfigError, DimensionBudgetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    for line in report.summary_lines():
        print(line)
    if args.out:
        if args.format == "json":
            report.write_json(args.out)
        else:
            report.write_csv(args.out)
        print(f"report written to {args.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
