"""Command-line interface: ``speclab {spectrum, verify, limit-sample, oracle}``.

Exit codes: 0 success / gates passed, 1 gates failed or compute error,
2 usage or configuration error, 3 resource limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tokenize
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np
import sympy
from sympy.parsing import sympy_parser

from . import limits, presets
from .cycles import mixed_trace_decomposition, tuple_sums, tuple_sums_recursive
from .ensembles import perturbation_from_dict
from .entry_laws import law_from_dict, parse_law
from .errors import ResourceLimitError, SpeclabError, ValidationError
from .harness import build_model, derive_seed, predictions_for, run_campaign
from .series import TruncatedPowerSeries
from .spectral import detect_outliers, eigenvalues, write_eigenvalue_csv
from .svg import polar_modulus_svg, spectrum_svg

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
SEED_ENV = "SPECLAB_SEED"
DEFAULT_OUT = "speclab_out"
DEFAULT_K = 60
CAMPAIGNS = ("theorem1", "sparse", "semisparse", "moments", "sparse-traces")

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}, {"type": "string"}]}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["acceptance", "smoke"]},
        "n": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "law": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "d": {"type": "number", "exclusiveMinimum": 1},
        "theta": _complex,
        "spikes": {"type": "array", "items": _complex},
        "perturbation": {"type": "object"},
        "K": {"type": "integer", "minimum": 1},
        "rho": _complex,
        "c": {"oneOf": [{"type": "string"}, {"type": "array", "items": _complex}]},
        "regime": {"type": "string"},
    },
}


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def parse_complex(text):
    if isinstance(text, (int, float, complex)):
        return text
    if isinstance(text, list):
        return complex(text[0], text[1])
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        value = complex(s)
    except ValueError as exc:
        raise ValidationError(f"cannot parse complex number {text!r}") from exc
    return value.real if value.imag == 0 else value


def parse_c(text):
    """A polynomial c(z) with c(0) = 1, given as an expression in z ("1-2z") or a coefficient list."""
    if isinstance(text, list):
        coeffs = [complex(parse_complex(t)) for t in text]
    elif re.fullmatch(r"[-+0-9.eji,\s]+", text) and "," in text:
        coeffs = [complex(parse_complex(t)) for t in text.split(",")]
    else:
        z = sympy.Symbol("z")
        transforms = sympy_parser.standard_transformations + (
            sympy_parser.implicit_multiplication_application,
        )
        try:
            expr = sympy_parser.parse_expr(
                text.replace("^", "**"), local_dict={"z": z, "i": sympy.I}, transformations=transforms
            )
            poly = sympy.Poly(sympy.expand(expr), z)
        except (sympy.SympifyError, sympy.PolynomialError, SyntaxError, TypeError, tokenize.TokenError) as exc:
            raise ValidationError(f"cannot parse polynomial c(z) = {text!r}") from exc
        coeffs = [complex(a) for a in reversed(poly.all_coeffs())]
    if not coeffs or abs(coeffs[0] - 1) > 1e-12:
        raise ValidationError("c must satisfy c(0) = 1")
    return TruncatedPowerSeries(coeffs, provenance="deterministic")


def max_poisson_depth(d, cap=DEFAULT_K):
    """Largest K <= cap whose Poisson means d^k/k stay below the sampler's cap."""
    K = 1
    while K < cap and d ** (K + 1) / (K + 1) <= limits.POISSON_MEAN_CAP:
        K += 1
    return K


def load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"config {path}: {exc.message}") from exc
    return data


def resolve_seed(flag, config, default=presets.DEFAULT_SEED):
    """--seed flag > SPECLAB_SEED > config file > default."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ValidationError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return config.get("seed", default)


def _pick(flag, config, key, default=None):
    return flag if flag is not None else config.get(key, default)


def _law(value):
    if value is None:
        return None
    return law_from_dict(value) if isinstance(value, dict) else parse_law(value)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _threads(args, config):
    return _pick(args.threads, config, "threads", os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_spectrum(args):
    config = load_config(args.config)
    seed = resolve_seed(args.seed, config)
    n = _pick(args.n, config, "n")
    if n is None:
        raise ValidationError("--n is required")
    regime = args.regime
    spikes = args.spike if args.spike else config.get("spikes")
    theta = _pick(args.theta, config, "theta")
    if regime == "theorem1":
        law = _law(_pick(args.law, config, "law", "gaussian"))
        cfg = presets.theorem1_config(
            spikes=[parse_complex(s) for s in spikes] if spikes else (), law=law, n=n, trials=1, seed=seed
        )
    elif regime == "sparse":
        cfg = presets.sparse_config(d=_pick(args.d, config, "d"), theta=parse_complex(theta or 0), n=n, trials=1, seed=seed)
    else:
        d = _pick(args.d, config, "d")
        cfg = presets.semisparse_config(theta=parse_complex(theta or 0), n=n, trials=1, seed=seed, d=d)
    if "perturbation" in config:
        cfg = replace(cfg, perturbation=perturbation_from_dict(config["perturbation"]))
    trial_seed = derive_seed(cfg.master_seed, 0)
    M = build_model(cfg, np.random.default_rng(trial_seed), seed=trial_seed)
    eigs = eigenvalues(M)
    _, outliers, _ = detect_outliers(eigs, cfg.rule)
    preds = [p.value for p in predictions_for(cfg)]
    out = _out_dir(args)
    stem = f"spectrum_{regime}_n{n}_seed{seed}"
    write_eigenvalue_csv(out / f"{stem}.csv", eigs, outliers, trial_seed)
    (out / f"{stem}.svg").write_text(
        spectrum_svg(eigs, cfg.bulk_radius_theoretical, preds, title=f"{regime} n={n} seed={seed}")
    )
    print(f"wrote {out / stem}.csv ({eigs.size} eigenvalues, {len(outliers)} outliers) and .svg")
    return EXIT_OK


def cmd_verify(args):
    config = load_config(args.config)  # validated before any sampling
    preset = _pick(args.preset, config, "preset", "acceptance")
    seed = resolve_seed(args.seed, config)
    campaign = args.campaign
    overrides = {"n": _pick(args.n, config, "n"), "trials": _pick(args.trials, config, "trials"), "seed": seed}
    if campaign in ("theorem1", "moments"):
        overrides["law"] = _law(_pick(args.law, config, "law"))
    if campaign == "theorem1":
        spikes = args.spike if args.spike else config.get("spikes")
        overrides["spikes"] = [parse_complex(s) for s in spikes] if spikes else None
    if campaign in ("sparse", "sparse-traces"):
        overrides["d"] = _pick(args.d, config, "d")
    if campaign in ("sparse", "semisparse"):
        theta = _pick(args.theta, config, "theta")
        overrides["theta"] = parse_complex(theta) if theta is not None else None
    cfg = presets.preset_config(campaign, preset, **overrides)
    if "perturbation" in config:
        cfg = replace(cfg, perturbation=perturbation_from_dict(config["perturbation"]))
    outcome = run_campaign(cfg, threads=_threads(args, config))
    report = outcome.report
    gates, passed = presets.evaluate_gates(campaign, report, preset)
    report["gates"] = [g.to_json() for g in gates]
    report["passed"] = passed
    report["preset"] = preset
    out = _out_dir(args)
    path = out / f"verify_{campaign}_{preset}_seed{seed}.json"
    _write_json(path, report)
    for g in gates:
        print(f"[{'PASS' if g.passed else 'FAIL'}] {g.name}: {g.value:.6g} {g.comparison} {g.threshold:g}")
    print(f"report: {path}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_limit_sample(args):
    config = load_config(args.config)
    seed = resolve_seed(args.seed, config)
    regime = _pick(args.regime, config, "regime", "iid")
    K = _pick(args.K, config, "K")
    c = parse_c(_pick(args.c, config, "c", "1"))
    rng = np.random.default_rng(derive_seed(seed, 0))
    if regime == "iid":
        rho = parse_complex(_pick(args.rho, config, "rho", 1.0))
        if abs(rho) > 1:
            raise ValidationError(f"|rho| = {abs(rho)} > 1")
        sample = limits.sample_gaussian_log_series(rho, K or DEFAULT_K, rng)
    elif regime == "sparse":
        d = _pick(args.d, config, "d")
        if d is None:
            raise ValidationError("--d is required for the sparse regime")
        if K is None:
            K = max_poisson_depth(float(d))
        sample = limits.sample_poisson_cycle_limit(float(d), K, rng)
    elif regime == "semisparse":
        sample = limits.sample_semisparse_limit(K or DEFAULT_K, rng)
    else:
        raise ValidationError(f"unknown regime {regime!r}")
    K = sample.series.degree
    degree = max(4 * K, 240)
    q = limits.limit_function_series(c, sample, degree)
    radius = limits.EVAL_FRACTION * q.validity_radius
    zeros = limits.zeros_in_disk(q, radius)
    out = _out_dir(args)
    stem = f"limit_{regime}_K{K}_seed{seed}"
    body = {
        "regime": regime,
        "K": K,
        "seed": seed,
        "c": [[complex(v).real, complex(v).imag] for v in c.coefficients],
        "sample": sample.to_json(),
        "q_series": q.to_json(),
        "zero_search_radius": radius,
        "zeros": [[z.real, z.imag] for z in zeros],
    }
    _write_json(out / f"{stem}.json", body)
    (out / f"{stem}.svg").write_text(polar_modulus_svg(q, radius, zeros, title=f"|q(z)| {regime}"))
    for z in zeros:
        print(f"zero: {z.real:.12g}{z.imag:+.12g}i  |z|={abs(z):.6g}")
    print(f"wrote {out / stem}.json and .svg")
    return EXIT_OK


def cmd_oracle(args):
    config = load_config(args.config)
    seed = resolve_seed(args.seed, config)
    rng = np.random.default_rng(derive_seed(seed, 0))
    failures = []
    checked = 0
    for s in range(args.samples):
        n = int(rng.integers(1, args.max_n + 1))
        k = int(rng.integers(1, args.max_k + 1))
        A = rng.integers(-2, 3, size=(n, n))
        C = np.zeros((n, n), dtype=np.int64)
        C[0, 0] = 1
        trace = int(np.trace(np.linalg.matrix_power(A.astype(object), k)))
        d, r = tuple_sums(A, k)
        dec = mixed_trace_decomposition(A, C, 2, k)
        full = int(np.trace(np.linalg.matrix_power((A + 2 * C).astype(object), k)))
        ok = d + r == trace and (d, r) == tuple_sums_recursive(A, k) and dec.total == full
        checked += 1
        if not ok:
            failures.append({"sample": s, "n": n, "k": k, "A": A.tolist()})
    report = {"seed": seed, "checked": checked, "failures": failures, "passed": not failures}
    _write_json(_out_dir(args) / f"oracle_seed{seed}.json", report)
    print(f"cycle oracle: {checked - len(failures)}/{checked} identities exact")
    return EXIT_OK if not failures else EXIT_FAIL


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (overrides SPECLAB_SEED and config)")
    p.add_argument("--out", default=DEFAULT_OUT, help="output directory")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--threads", type=int, help="worker threads (default: available cores)")


def build_parser():
    parser = argparse.ArgumentParser(prog="speclab", description="Outlier eigenvalues of perturbed random matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="sample one model matrix; write eigenvalue CSV and SVG scatter")
    _common(p)
    p.add_argument("--regime", choices=("theorem1", "sparse", "semisparse"), default="theorem1")
    p.add_argument("--n", type=int)
    p.add_argument("--law", help="entry law, e.g. pareto:2.5, rademacher, gaussian, complex-gaussian:0.5")
    p.add_argument("--spike", action="append", help="diagonal spike (repeatable), e.g. 2 or 1.6i")
    p.add_argument("--d", type=float, help="mean degree (sparse) or d_n override (semi-sparse)")
    p.add_argument("--theta", help="value of the single perturbation entry C_11 (sparse regimes)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="run a verification campaign and check its gates")
    _common(p)
    p.add_argument("campaign", choices=CAMPAIGNS)
    p.add_argument("--preset", choices=("acceptance", "smoke"))
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--law")
    p.add_argument("--spike", action="append")
    p.add_argument("--d", type=float)
    p.add_argument("--theta")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("limit-sample", help="sample a limiting random function and locate its zeros")
    _common(p)
    p.add_argument("--regime", choices=("iid", "sparse", "semisparse"))
    p.add_argument("--rho")
    p.add_argument("--c", help='polynomial c(z) with c(0)=1, e.g. "1-2z" or "1,-2"')
    p.add_argument("--K", type=int, help="number of sampled series coefficients")
    p.add_argument("--d", type=float)
    p.set_defaults(func=cmd_limit_sample)

    p = sub.add_parser("oracle", help="check the exact cycle-sum identities on random integer matrices")
    _common(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--max-n", type=int, default=5)
    p.add_argument("--max-k", type=int, default=4)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SpeclabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
