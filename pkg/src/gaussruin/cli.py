"""Batch front end: ``gaussruin <cmd> --config <path> [--seed N] [--dump-samples] [--out <path>]``.

Configs are INI files with ``[model]``, ``[run]``, ``[constants]`` and
``[output]`` sections, e.g.::

    [model]
    kernel = ou
    lambda = 1.0
    discount = linear
    delta = 0.5
    c = 1.0
    T = 1.0

    [run]
    u = 1.3
    m = 1024
    n = 100000
    seed = 1
    method = importance

Exit codes: 0 on success, 1 on configuration or numerical errors, 2 when a
hypothesis of the ruin asymptotics fails for the model.
"""

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import asymptotics, simulation, tail_regimes
from .errors import ConfigError, GaussRuinError, HypothesisError
from .models import CovarianceKernel, DiscountModel, RiskModel
from .quadrature import integrate_1d

COMMANDS = ("analyze", "simulate", "ruintime", "constants", "validate")
KERNELS = ("ou", "slepian", "brownian", "custom_grid")
DISCOUNTS = ("zero", "linear", "quadratic")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2

FORMULA = "formula"
CRUDE_MC = "crude-mc"
IMPORTANCE_MC = "importance-mc"
ORACLE = "oracle"
INPUT = "input"


@dataclass
class RunSettings:
    u: Optional[float] = None
    u_grid: Optional[list] = None
    m: int = 1024
    n: int = 100_000
    seed: int = 0
    method: str = simulation.IMPORTANCE
    tol: float = 1e-10
    n_grid: int = 64
    batch_size: int = simulation.DEFAULT_BATCH
    workers: int = 1
    min_ess: int = simulation.MIN_CONDITIONAL_ESS

    @property
    def levels(self):
        if self.u is not None:
            return [self.u]
        return list(self.u_grid or [])


@dataclass
class ConstantSettings:
    alpha: float = 1.0
    b: Optional[float] = None
    horizon: float = 40.0
    piterbarg_horizon: float = 20.0
    grid_step: float = 0.01
    replications: int = 4000


@dataclass
class OutputSettings:
    report: Optional[str] = None
    samples: Optional[str] = None
    plot_script: bool = False


@dataclass
class ExperimentConfig:
    model: Optional[RiskModel]
    model_params: dict
    run: RunSettings = field(default_factory=RunSettings)
    constants: ConstantSettings = field(default_factory=ConstantSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    base_dir: Path = Path(".")


def _strip(value):
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1]
    return value


class _Reader:
    """Typed access to one config section that accumulates errors instead of raising."""

    def __init__(self, parser, section, errors):
        self.items = dict(parser.items(section)) if parser.has_section(section) else {}
        self.section = section
        self.errors = errors

    def has(self, key):
        return key in self.items

    def get(self, key, kind=str, default=None):
        if key not in self.items:
            return default
        raw = _strip(self.items[key])
        try:
            if kind is bool:
                low = raw.lower()
                if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                    raise ValueError(raw)
                return low in ("true", "yes", "1", "on")
            if kind is int:
                val = float(raw)
                if not val.is_integer():
                    raise ValueError(raw)
                return int(val)
            if kind is float:
                val = float(raw)
                if not math.isfinite(val):
                    raise ValueError(raw)
                return val
            if kind is list:
                return [float(_strip(x)) for x in raw.replace(";", ",").split(",") if x.strip()]
            return raw
        except ValueError:
            self.errors.append(f"[{self.section}] {key}: cannot parse {raw!r} as {kind.__name__}")
            return default


def _build_model(r, errors, base_dir):
    params = {}
    kernel_kind = (r.get("kernel") or "").lower()
    discount_kind = (r.get("discount") or "zero").lower()
    c = r.get("c", float)
    T = r.get("T", float)
    params.update(kernel=kernel_kind, discount=discount_kind, c=c, T=T)

    if kernel_kind not in KERNELS:
        errors.append(f"[model] kernel: unknown kind {kernel_kind!r}; expected one of {KERNELS}")
    if discount_kind not in DISCOUNTS:
        errors.append(f"[model] discount: unknown kind {discount_kind!r}; expected one of {DISCOUNTS}")
    if c is None:
        errors.append("[model] c: premium rate is required")
    elif not c > 0:
        errors.append(f"[model] c: premium rate must be positive, got {c}")
    if T is None:
        errors.append("[model] T: horizon is required")
    elif not T > 0:
        errors.append(f"[model] T: horizon must be positive, got {T}")

    lam = r.get("lambda", float)
    delta = r.get("delta", float)
    kernel = discount = None
    if kernel_kind == "ou":
        params["lambda"] = lam
        if lam is None:
            errors.append("[model] lambda: required for the OU kernel")
        elif not lam > 0:
            errors.append(f"[model] lambda: must be positive, got {lam}")
        else:
            kernel = CovarianceKernel.ou(lam)
    elif kernel_kind == "slepian":
        kernel = CovarianceKernel.slepian()
        if T is not None and T > 1:
            errors.append(f"[model] T: Slepian models are restricted to T <= 1, got {T}")
    elif kernel_kind == "brownian":
        kernel = CovarianceKernel.brownian()
    elif kernel_kind == "custom_grid":
        path = r.get("grid_file")
        params["grid_file"] = path
        if path is None:
            errors.append("[model] grid_file: required for the custom_grid kernel (.npz with times, matrix)")
        else:
            try:
                with np.load(base_dir / path) as data:
                    kernel = CovarianceKernel.custom_grid(data["times"], data["matrix"])
            except (OSError, KeyError, ValueError) as exc:
                errors.append(f"[model] grid_file: {exc}")

    if discount_kind == "linear":
        params["delta"] = delta
        if delta is None:
            errors.append("[model] delta: required for the linear discount")
        else:
            discount = DiscountModel.linear(delta)
            if kernel_kind == "ou" and lam is not None and not (0 < delta < lam):
                errors.append(
                    f"[model] delta: the OU model with linear discount needs delta in (0, lambda); "
                    f"got delta={delta}, lambda={lam}"
                )
    elif discount_kind == "zero":
        discount = DiscountModel.zero()
    elif discount_kind == "quadratic":
        discount = DiscountModel.quadratic()

    if errors or kernel is None or discount is None:
        return None, params
    try:
        return RiskModel(kernel, discount, c=c, T=T), params
    except GaussRuinError as exc:
        errors.append(f"[model] {exc}")
        return None, params


def parse_config(path, require_model=True):
    """Read and validate an experiment config, reporting every problem at once.

    Raises
    ------
    ConfigError
        With ``errors`` listing all validation failures.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    errors = []
    base_dir = path.parent
    model, params = None, {}
    if parser.has_section("model"):
        model, params = _build_model(_Reader(parser, "model", errors), errors, base_dir)
    elif require_model:
        errors.append("missing [model] section")

    r = _Reader(parser, "run", errors)
    run = RunSettings()
    if r.has("u") and r.has("u_grid"):
        errors.append("[run] both u and u_grid given; use exactly one")
    run.u = r.get("u", float)
    run.u_grid = r.get("u_grid", list)
    for u in run.levels:
        if u < 0:
            errors.append(f"[run] initial reserve must be nonnegative, got {u}")
    if run.u_grid is not None and any(b <= a for a, b in zip(run.u_grid, run.u_grid[1:])):
        errors.append("[run] u_grid must be strictly ascending")
    for key, kind in (("m", int), ("n", int), ("seed", int), ("tol", float), ("n_grid", int),
                      ("batch_size", int), ("workers", int), ("min_ess", int)):
        setattr(run, key, r.get(key, kind, getattr(run, key)))
    run.method = (r.get("method") or run.method).lower()
    if run.method not in (simulation.CRUDE, simulation.IMPORTANCE):
        errors.append(f"[run] method: expected crude or importance, got {run.method!r}")
    if run.m < 8:
        errors.append(f"[run] m: need at least 8 grid intervals, got {run.m}")
    if run.n < 2:
        errors.append(f"[run] n: need at least 2 replications, got {run.n}")
    if not run.tol > 0:
        errors.append("[run] tol: must be positive")
    if run.n_grid < 16:
        errors.append("[run] n_grid: must be at least 16")
    if run.batch_size < 1 or run.workers < 1:
        errors.append("[run] batch_size and workers must be positive")

    r = _Reader(parser, "constants", errors)
    const = ConstantSettings()
    for key, kind in (("alpha", float), ("b", float), ("horizon", float), ("piterbarg_horizon", float),
                      ("grid_step", float), ("replications", int)):
        setattr(const, key, r.get(key, kind, getattr(const, key)))
    if not 0 < const.alpha <= 2:
        errors.append(f"[constants] alpha: must lie in (0, 2], got {const.alpha}")
    if const.b is not None and not const.b > 0:
        errors.append(f"[constants] b: must be positive, got {const.b}")
    if const.horizon <= 0 or const.piterbarg_horizon <= 0 or const.grid_step <= 0:
        errors.append("[constants] horizon and grid_step must be positive")
    if const.replications < 2:
        errors.append("[constants] replications: need at least 2")

    r = _Reader(parser, "output", errors)
    out = OutputSettings(
        report=r.get("report"),
        samples=r.get("samples"),
        plot_script=r.get("plot_script", bool, False),
    )

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(model, params, run, const, out, base_dir)


# --- report assembly ---------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def _provenance(section, value, tag, out, prefix=None):
    prefix = prefix or section
    if isinstance(value, dict):
        for k, v in value.items():
            _provenance(section, v, tag, out, f"{prefix}.{k}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _provenance(section, v, tag, out, f"{prefix}[{i}]")
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        out[prefix] = tag


class _Report:
    def __init__(self, command, config):
        self.command = command
        self.sections = {"model": None, "hypotheses": None, "asymptotics": None, "simulation": None}
        self.tags = {}
        if config is not None and config.model is not None:
            self.add("model", config.model_params, INPUT)

    def add(self, section, value, tag, key=None):
        value = _clean(value)
        if key is None:
            self.sections[section] = value
            _provenance(section, value, tag, self.tags)
        else:
            if self.sections[section] is None:
                self.sections[section] = {}
            self.sections[section][key] = value
            _provenance(section, value, tag, self.tags, f"{section}.{key}")

    def as_dict(self):
        return {"command": self.command, **self.sections, "provenance": dict(sorted(self.tags.items()))}


def _hypotheses(report, config):
    profile = asymptotics.check_hypotheses(config.model, config.run.n_grid, config.run.tol)
    report.add("hypotheses", profile.as_dict(), FORMULA)
    return profile


def _require_levels(config):
    if not config.run.levels:
        raise ConfigError("[run] one of u or u_grid is required for this command")
    return config.run.levels


def _asymptotic_rows(config, profile, levels):
    return [asymptotics.ruin_prob_asymptotic(config.model, u, config.run.tol, profile=profile)
            for u in levels]


def _sample_paths(config, base, count):
    if count == 1:
        return [base]
    stem, suffix = base.stem, base.suffix or ".csv"
    return [base.with_name(f"{stem}_u{i}{suffix}") for i in range(count)]


def _cmd_analyze(report, config, **_):
    levels = _require_levels(config)
    profile = _hypotheses(report, config)
    rows = _asymptotic_rows(config, profile, levels)
    report.add("asymptotics", {"levels": [r.as_dict() for r in rows]}, FORMULA)


def _cmd_simulate(report, config, dump_samples=False, **_):
    levels = _require_levels(config)
    profile = _hypotheses(report, config)
    if config.run.method == simulation.IMPORTANCE and not profile.hypotheses_hold:
        raise HypothesisError(profile.failed_conditions()[0], "importance sampling localizes at T")
    rows = _asymptotic_rows(config, profile, levels) if profile.hypotheses_hold else []
    if rows:
        report.add("asymptotics", {"levels": [r.as_dict() for r in rows]}, FORMULA)
    run = config.run
    runs = simulation.simulate_ruin(
        config.model, levels, m=run.m, n=run.n, seed=run.seed, method=run.method,
        batch_size=run.batch_size, workers=run.workers, profile=profile,
    )
    tag = IMPORTANCE_MC if config.run.method == simulation.IMPORTANCE else CRUDE_MC
    estimates = []
    for i, samples in enumerate(runs):
        est = simulation.summarize(samples, config.run.seed, config.run.method, config.run.m).as_dict()
        if rows:
            est["ratio_to_asymptotic"] = est["estimate"] / rows[i].psi_approx if rows[i].psi_approx > 0 else None
        estimates.append(est)
    report.add("simulation", {"estimates": estimates}, tag)
    if dump_samples:
        base = _output_path(config, config.output.samples, "samples.csv")
        for path, samples in zip(_sample_paths(config, base, len(runs)), runs):
            simulation.write_samples_csv(path, samples)
    if config.output.plot_script:
        _write_ratio_plot(config, estimates, rows)


def _cmd_ruintime(report, config, dump_samples=False, **_):
    levels = _require_levels(config)
    profile = _hypotheses(report, config)
    if not profile.hypotheses_hold:
        raise HypothesisError(profile.failed_conditions()[0], "ruin-time limit needs the ruin asymptotics")
    rows = _asymptotic_rows(config, profile, levels)
    report.add("asymptotics", {"levels": [r.as_dict() for r in rows]}, FORMULA)
    run = config.run
    runs = simulation.simulate_ruin(
        config.model, levels, m=run.m, n=run.n, seed=run.seed, method=simulation.IMPORTANCE,
        batch_size=run.batch_size, workers=run.workers, profile=profile,
    )
    laws = []
    for row, samples in zip(rows, runs):
        law = simulation.conditional_law(samples, row.ruin_time_mean, run.min_ess)
        entry = law.as_dict()
        entry["psi"] = simulation.summarize(samples, run.seed, simulation.IMPORTANCE, run.m).as_dict()
        laws.append((law, entry))
    report.add("simulation", {"ruin_time": [e for _, e in laws]}, IMPORTANCE_MC)
    if dump_samples:
        base = _output_path(config, config.output.samples, "samples.csv")
        for path, samples in zip(_sample_paths(config, base, len(runs)), runs):
            simulation.write_samples_csv(path, samples)
    if config.output.plot_script:
        _write_ruintime_plot(config, laws[-1][0])


def _cmd_constants(report, config, **_):
    const, run = config.constants, config.run
    result = {}
    pick = tail_regimes.pickands_estimate(
        const.alpha, const.horizon, const.grid_step, const.replications, run.seed, workers=run.workers,
    )
    result["pickands"] = pick.as_dict()
    if const.b is not None:
        pit = tail_regimes.piterbarg_estimate(
            const.alpha, const.b, const.piterbarg_horizon, const.grid_step, const.replications,
            run.seed, workers=run.workers,
        )
        result["piterbarg"] = pit.as_dict()
    report.add("simulation", result, IMPORTANCE_MC)


def validate_examples(n_points=50, rtol=1e-6, e_rtol=1e-5, tol=1e-10):
    """Compare quadrature against every closed-form example; one row per check."""
    cases = [
        ("ou", {"lam": 1.0, "delta": 0.5}, 1.0),
        ("slepian", {"delta": 1.0}, 1.0),
        ("bm_quadratic", {}, 1.0),
    ]
    rows = []
    for name, params, T in cases:
        model = asymptotics.example_model(name, T=T, **params)
        grid = np.linspace(T / n_points, T, n_points)
        worst_var = worst_dt = 0.0
        for t in grid:
            oracle = asymptotics.closed_form_oracle(name, t, T=T, **params)
            var = asymptotics.variance_at(model, t, tol)
            dt = _quadrature_discounted_time(model, t, tol)
            worst_var = max(worst_var, abs(var - oracle.sigma2) / abs(oracle.sigma2))
            worst_dt = max(worst_dt, abs(dt - oracle.discounted_time) / abs(oracle.discounted_time))
        oracle_T = asymptotics.closed_form_oracle(name, T, T=T, **params)
        sigma = math.sqrt(asymptotics.variance_at(model, T, tol))
        e_T = sigma**3 / asymptotics.sigma_prime_at(model, T, tol, sigma=sigma)
        e_err = abs(e_T - oracle_T.e_T) / oracle_T.e_T
        rows.append({"example": name, "quantity": "sigma2", "max_rel_error": worst_var,
                     "tolerance": rtol, "passed": worst_var <= rtol})
        rows.append({"example": name, "quantity": "discounted_time", "max_rel_error": worst_dt,
                     "tolerance": rtol, "passed": worst_dt <= rtol})
        rows.append({"example": name, "quantity": "e_T", "value": e_T, "oracle": oracle_T.e_T,
                     "max_rel_error": e_err, "tolerance": e_rtol, "passed": e_err <= e_rtol})
    return rows


def _quadrature_discounted_time(model, t, tol):
    # bypass the closed form so the check compares two independent routes
    return integrate_1d(model.discount.weight, 0.0, float(t), tol).value


def _cmd_validate(report, config, **_):
    tol = config.run.tol if config is not None else 1e-10
    rows = validate_examples(tol=tol)
    report.add("asymptotics", {"oracle_suite": rows}, ORACLE)
    return all(r["passed"] for r in rows)


_DISPATCH = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "ruintime": _cmd_ruintime,
    "constants": _cmd_constants,
    "validate": _cmd_validate,
}


def run_command(cmd, config, dump_samples=False):
    """Execute ``cmd`` and return the report as a plain dict.

    Raises
    ------
    HypothesisError
        When the asymptotics or the importance sampler do not apply.
    ConfigError
        When the config lacks settings the command needs.
    """
    if cmd not in _DISPATCH:
        raise ConfigError(f"unknown command {cmd!r}; expected one of {COMMANDS}")
    if cmd not in ("validate", "constants") and (config is None or config.model is None):
        raise ConfigError(f"command {cmd!r} needs a [model] section")
    report = _Report(cmd, config)
    _DISPATCH[cmd](report, config, dump_samples=dump_samples)
    return report.as_dict()


def dumps_report(report):
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


# --- plot scripts --------------------------------------------------------------

_RATIO_SCRIPT = '''"""Plot simulated ruin probabilities against the asymptotic formula."""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = [{{k: float(v) for k, v in r.items()}} for r in csv.DictReader(fh)]
u = [r["u"] for r in rows]
fig, ax = plt.subplots()
ax.errorbar(u, [r["estimate"] for r in rows], yerr=[3 * r["stderr"] for r in rows], fmt="o", label="simulation")
ax.plot(u, [r["psi_approx"] for r in rows], "-", label="Psi(g_u(T))")
ax.set_yscale("log")
ax.set_xlabel("initial reserve u")
ax.set_ylabel("ruin probability")
ax.legend()
fig.savefig({png!r}, dpi=120)
'''

_RUINTIME_SCRIPT = '''"""Histogram of u^2 (T - tau) given ruin against the exponential limit."""
import csv
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = [(float(r["rescaled"]), float(r["weight"])) for r in csv.DictReader(fh)]
x = np.array([r[0] for r in rows])
w = np.array([r[1] for r in rows])
fig, ax = plt.subplots()
ax.hist(x, bins=60, weights=w, density=True, alpha=0.6, label="weighted sample")
grid = np.linspace(0, x.max(), 200)
ax.plot(grid, np.exp(-grid / {e_T!r}) / {e_T!r}, label="Exp(mean e_T)")
ax.set_xlabel("u^2 (T - tau)")
ax.legend()
fig.savefig({png!r}, dpi=120)
'''


def _output_path(config, name, default):
    return config.base_dir / (name or default)


def _plot_stem(config):
    return _output_path(config, config.output.report, "report.json").with_suffix("")


def _write_ratio_plot(config, estimates, rows):
    stem = _plot_stem(config)
    csv_path = stem.with_name(stem.name + "_curve.csv")
    with open(csv_path, "w") as fh:
        fh.write("u,estimate,stderr,psi_approx\n")
        for i, est in enumerate(estimates):
            psi = rows[i].psi_approx if rows else float("nan")
            fh.write(f"{est['u']!r},{est['estimate']!r},{est['stderr']!r},{psi!r}\n")
    script = _RATIO_SCRIPT.format(csv=csv_path.name, png=stem.name + "_curve.png")
    stem.with_name(stem.name + "_plot.py").write_text(script)


def _write_ruintime_plot(config, law):
    stem = _plot_stem(config)
    csv_path = stem.with_name(stem.name + "_ruintime.csv")
    with open(csv_path, "w") as fh:
        fh.write("rescaled,weight\n")
        for x, w in zip(law.rescaled, law.weights):
            fh.write(f"{float(x)!r},{float(w)!r}\n")
    script = _RUINTIME_SCRIPT.format(csv=csv_path.name, png=stem.name + "_ruintime.png", e_T=law.e_T)
    stem.with_name(stem.name + "_plot.py").write_text(script)


# --- entry point -------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(prog="gaussruin", description=__doc__.splitlines()[0])
    parser.add_argument("cmd", choices=COMMANDS)
    parser.add_argument("--config", help="experiment config (INI)")
    parser.add_argument("--seed", type=int, help="override [run] seed")
    parser.add_argument("--dump-samples", action="store_true", help="write per-path ruin samples as CSV")
    parser.add_argument("--out", help="report path (default: [output] report, else stdout)")
    args = parser.parse_args(argv)

    try:
        config = None
        if args.config:
            config = parse_config(args.config, require_model=args.cmd not in ("validate", "constants"))
        elif args.cmd != "validate":
            raise ConfigError(f"command {args.cmd!r} needs --config")
        if config is not None and args.seed is not None:
            config.run.seed = args.seed
        report = run_command(args.cmd, config, dump_samples=args.dump_samples)
    except HypothesisError as exc:
        print(f"gaussruin: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConfigError as exc:
        for err in exc.errors:
            print(f"gaussruin: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GaussRuinError as exc:
        print(f"gaussruin: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = dumps_report(report)
    out = args.out
    if out is None and config is not None and config.output.report:
        out = config.base_dir / config.output.report
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.cmd == "validate":
        rows = report["asymptotics"]["oracle_suite"]
        for r in rows:
            status = "PASS" if r["passed"] else "FAIL"
            print(f"{status}  {r['example']:<13} {r['quantity']:<16} max rel err {r['max_rel_error']:.2e}"
                  f" (tol {r['tolerance']:.0e})", file=sys.stderr)
        if not all(r["passed"] for r in rows):
            return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
