"""Command-line front end.

Usage::

    randres COMMAND [--config PATH] [--set KEY=VALUE ...] [--seed U64] [--out DIR] [--plot] [--dry-run]

Commands: represent-check, static-conv, esn-equiv, esn-conv, feedback-conv, constants.

Config files are flat ``key = value`` lines; ``#`` starts a comment. Lists are
comma separated. ``--set`` entries override the file and ``--seed`` overrides both.
Every run writes ``<command>.csv`` and ``<command>_report.json`` to the output
directory. With ``--plot`` it also writes a log-log SVG.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, NonConvergenceError, SingularSystemError

COMMANDS = ("represent-check", "static-conv", "esn-equiv", "esn-conv", "feedback-conv", "constants")

CSV_COLUMNS = {
    "represent-check": ["point", "estimate", "stderr", "f_value", "abs_error"],
    "static-conv": ["N", "readout_kind", "mse_mean", "mse_lo", "mse_hi", "cstar_over_N", "truncation_bound",
                    "seed_count"],
    "esn-equiv": ["trial", "T", "N", "max_state_dev", "max_output_dev", "flush_exact"],
    "esn-conv": ["N", "T", "R", "rmse_mean", "rmse_lo", "rmse_hi", "bound_pN_over_Ngamma", "gamma",
                 "rmse_median", "rmse_median_lo", "rmse_median_hi"],
    "feedback-conv": ["N", "gap_median", "gap_lo", "gap_hi", "bound_delta_half", "esp_prob", "s_n"],
    "constants": ["name", "value"],
}

# ---------------------------------------------------------------- schema


def _int(s):
    return int(str(s).strip())


def _float(s):
    v = float(str(s).strip())
    if not np.isfinite(v):
        raise ValueError("not finite")
    return v


def _ints(s):
    return [int(x) for x in str(s).split(",") if x.strip()]


def _str(s):
    return str(s).strip().strip('"').strip("'")


def _pos(x):
    return x > 0


def _all_pos(xs):
    return len(xs) > 0 and all(v > 0 for v in xs)


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] | None = None
    why: str = ""


_TARGET = {
    "target": Field(_str, "gaussian_bump", lambda s: s in ("gaussian_bump", "scaled_gaussian_bump", "zero"),
                    "one of gaussian_bump, scaled_gaussian_bump, zero"),
    "q": Field(_int, 1, _pos, "must be a positive integer"),
    "M": Field(_float, 1.0, _pos, "must be positive"),
    "amplitude": Field(_float, 1.0),
    "variance": Field(_float, 1.0, _pos, "must be positive"),
}

SCHEMA: dict[str, dict[str, Field]] = {
    "represent-check": {**_TARGET,
                        "R": Field(_float, 5.0, _pos, "must be positive"),
                        "n_points": Field(_int, 5, _pos, "must be positive"),
                        "n_samples": Field(_int, 10**6, lambda n: n >= 1000, "must be at least 1000")},
    "static-conv": {**_TARGET,
                    "R": Field(_float, 5.0, _pos, "must be positive"),
                    "R_mode": Field(_str, "fixed", lambda s: s in ("fixed", "poly", "exp"), "one of fixed, poly, exp"),
                    "k": Field(_float, 1.0, lambda k: k >= 1, "must be at least 1"),
                    "C": Field(_float, 1.0, _pos, "must be positive"),
                    "N_grid": Field(_ints, [32, 64, 128, 256, 512, 1024, 2048, 4096], _all_pos,
                                    "entries must be positive"),
                    "n_test": Field(_int, 1000, lambda n: n >= 2, "must be at least 2"),
                    "n_seeds": Field(_int, 40, lambda n: n >= 2, "must be at least 2"),
                    "readouts": Field(lambda s: [x.strip() for x in str(s).split(",") if x.strip()], ["oracle"],
                                      lambda xs: len(xs) > 0 and set(xs) <= {"oracle", "ridge"},
                                      "subset of oracle, ridge"),
                    "ridge_lambda": Field(_float, 1e-6, lambda x: x >= 0, "must be nonnegative"),
                    "n_train": Field(_int, 4096, _pos, "must be positive")},
    "esn-equiv": {"d": Field(_int, 1, _pos, "must be positive"),
                  "T_list": Field(_ints, [2], lambda xs: len(xs) > 0 and all(v >= 0 for v in xs),
                                  "entries must be nonnegative"),
                  "N_list": Field(_ints, [4], _all_pos, "entries must be positive"),
                  "trials": Field(_int, 20, _pos, "must be positive"),
                  "R": Field(_float, 2.0, _pos, "must be positive"),
                  "M": Field(_float, 1.0, _pos, "must be positive"),
                  "seq_len": Field(_int, 24, _pos, "must be positive")},
    "esn-conv": {"lam": Field(_float, 0.5, lambda x: 0 < x < 1, "must lie in (0, 1)"),
                 "alpha": Field(_float, 0.5, _pos, "must be positive"),
                 "beta": Field(_float, 2.0, _pos, "must be positive"),
                 "M": Field(_float, 1.0, _pos, "must be positive"),
                 "N_grid": Field(_ints, [64, 128, 256, 512, 1024, 2048, 4096, 8192],
                                 lambda xs: len(xs) > 0 and all(v >= 2 for v in xs), "entries must be at least 2"),
                 "n_test": Field(_int, 500, lambda n: n >= 2, "must be at least 2"),
                 "n_seeds": Field(_int, 30, lambda n: n >= 3, "must be at least 3"),
                 "n_lags": Field(_int, 64, _pos, "must be positive")},
    "feedback-conv": {"N_star": Field(_int, 2, _pos, "must be positive"),
                      "d": Field(_int, 1, _pos, "must be positive"),
                      "M": Field(_float, 1.0, _pos, "must be positive"),
                      "amplitude_norm": Field(_float, 0.5, lambda x: x >= 0, "must be nonnegative"),
                      "N_grid": Field(_ints, [64, 256, 1024], _all_pos, "entries must be positive"),
                      "n_mc": Field(_int, 2000, lambda n: n >= 2, "must be at least 2"),
                      "n_seeds": Field(_int, 40, lambda n: n >= 3, "must be at least 3"),
                      "delta": Field(_float, 0.5, lambda x: 0 < x < 1, "must lie in (0, 1)"),
                      "loss": Field(_str, "absolute", lambda s: s in ("absolute", "squared_clipped"),
                                    "one of absolute, squared_clipped"),
                      "noise": Field(_float, 0.01, lambda x: x >= 0, "must be nonnegative"),
                      "esp_trials": Field(_int, 50, lambda n: n >= 30, "must be at least 30"),
                      "grid_size": Field(_int, 400, _pos, "must be positive")},
    "constants": {**_TARGET,
                  "R": Field(_float, 5.0, _pos, "must be positive"),
                  "N": Field(_int, 1024, _pos, "must be positive")},
}

for _s in SCHEMA.values():
    _s["seed"] = Field(_int, 0, lambda s: 0 <= s < 2**64, "must be an unsigned 64-bit integer")


@dataclass
class ExperimentConfig:
    command: str
    values: dict[str, Any]
    out_dir: Path = Path(".")
    plot: bool = False
    dry_run: bool = False

    def __getitem__(self, k):
        return self.values[k]


@dataclass
class RunReport:
    config: dict
    rows: list[dict]
    wall_clock_s: float
    versions: dict = field(default_factory=dict)
    seed_provenance: dict = field(default_factory=dict)


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_config(command: str, raw: dict[str, str] | None = None, path: str | None = None,
                 seed: int | None = None) -> dict[str, Any]:
    """Merge file and override entries, validate every field, fill defaults."""
    if command not in SCHEMA:
        raise ConfigError(f"unknown command {command!r}")
    merged: dict[str, str] = {}
    if path is not None:
        merged.update(read_config_file(path))
    merged.update(raw or {})
    if seed is not None:
        merged["seed"] = str(seed)
    schema = SCHEMA[command]
    unknown = sorted(set(merged) - set(schema) - {"command"})
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    if "command" in merged and _str(merged["command"]) != command:
        raise ConfigError(f"config file is for command {merged['command']!r}, not {command!r}")
    vals: dict[str, Any] = {}
    for k, f in schema.items():
        if k in merged:
            try:
                v = f.parse(merged[k])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"field {k!r}: cannot parse {merged[k]!r} ({exc})") from exc
        else:
            v = f.default
        if f.check is not None and not f.check(v):
            raise ConfigError(f"field {k!r} = {v!r}: {f.why}")
        vals[k] = v
    _cross_validate(command, vals)
    return vals


def _cross_validate(command, v):
    if command == "esn-conv":
        from .reservoir import check_rate_hypothesis
        check_rate_hypothesis(v["lam"], v["alpha"], v["beta"])
    if command == "feedback-conv":
        if v["amplitude_norm"] > v["M"]:
            raise ConfigError("field 'amplitude_norm': must not exceed M (range inside B_M)")
        if v["amplitude_norm"] * np.exp(-0.5) >= 1:
            raise ConfigError("field 'amplitude_norm': target must be a contraction")


# ---------------------------------------------------------------- command bodies


def _make_target(v):
    from .targets import make_gaussian_bump, make_scaled_gaussian_bump, make_zero_target
    if v["target"] == "gaussian_bump":
        return make_gaussian_bump(v["q"], v["M"])
    if v["target"] == "zero":
        return make_zero_target(v["q"], v["M"])
    return make_scaled_gaussian_bump(v["q"], v["M"], v["amplitude"], v["variance"])


def _threads() -> int:
    raw = os.environ.get("RANDRES_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"RANDRES_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("RANDRES_THREADS must be a positive integer")
    return n


def _ordered_map(fn, items):
    """Map preserving order; parallel across items when RANDRES_THREADS > 1."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _run_represent_check(v):
    from .representation import build_repr, check_representation
    t = _make_target(v)
    rep = build_repr(t, v["R"])
    direction = np.ones(t.dim_q) / np.sqrt(t.dim_q)
    ts = np.linspace(-1.0, 1.0, v["n_points"]) if v["n_points"] > 1 else np.zeros(1)

    def one(k):
        p = ts[k] * v["M"] * direction
        est = check_representation(rep, p, v["n_samples"], v["seed"] + k)
        fv = t.eval_f(p)
        return dict(point=" ".join(repr(float(x)) for x in p), estimate=est.mean, stderr=est.stderr,
                    f_value=fv, abs_error=abs(est.mean - fv))

    return _ordered_map(one, list(range(len(ts)))), True


def _run_static_conv(v):
    from .ranfeat import mse_vs_N, schedule_R
    t = _make_target(v)

    def one(N):
        R = v["R"] if v["R_mode"] == "fixed" else schedule_R(N, v["R_mode"], t.dim_q, v["k"], v["C"])
        return mse_vs_N(t, R, [N], v["n_test"], v["n_seeds"], v["seed"], readouts=v["readouts"],
                        n_train=v["n_train"], ridge_lambda=v["ridge_lambda"])

    rows = [r for chunk in _ordered_map(one, v["N_grid"]) for r in chunk]
    return rows, True


def _run_esn_equiv(v):
    from . import stats
    from .reservoir import build_esn, linres_functional, run_esn, stacked_linear_states
    rows, ok, trial = [], True, 0
    for T in v["T_list"]:
        for N in v["N_list"]:
            for _ in range(v["trials"]):
                e = build_esn(v["d"], T, N, v["R"], M=v["M"], seed=v["seed"], stream=stats.stream_id(8, trial))
                rng = stats.make_rng(v["seed"], stats.stream_id(9, trial))
                L = max(v["seq_len"], T + 2)
                z = rng.uniform(-v["M"], v["M"], (L, v["d"]))
                X0 = rng.normal(size=e.state_dim)
                X1 = rng.normal(size=e.state_dim)
                s0, o0 = run_esn(e, z, X0)
                s1, _ = run_esn(e, z, X1)
                stacked = stacked_linear_states(e, z, e.linear_init(X0))
                y_lin = np.array([linres_functional(e.shift, e.readout_net, z[: t + 1], e.linear_init(X0))
                                  for t in range(T, L)])
                dev = float(np.abs(s0 - stacked).max())
                odev = float(np.abs(o0[T:] - y_lin).max())
                flush = bool(np.array_equal(s0[T + 1:], s1[T + 1:]))
                ok &= dev <= 1e-12 and odev <= 1e-12 and flush
                rows.append(dict(trial=trial, T=T, N=N, max_state_dev=dev, max_output_dev=odev,
                                 flush_exact=int(flush)))
                trial += 1
    return rows, ok


def _run_esn_conv(v):
    from .reservoir import gaussian_esn_experiment

    def one(N):
        return gaussian_esn_experiment(v["lam"], v["alpha"], v["beta"], [N], v["n_test"], v["n_seeds"], v["seed"],
                                       v["M"], v["n_lags"])

    return [r for chunk in _ordered_map(one, v["N_grid"]) for r in chunk], True


def _run_feedback_conv(v):
    from .feedback import RiskSpec, risk_gap
    from .targets import make_contraction_target
    Ns = v["N_star"]
    t = make_contraction_target(Ns, v["d"], v["M"], np.full(Ns, v["amplitude_norm"] / np.sqrt(Ns)))
    spec = RiskSpec(v["loss"], noise_scale=v["noise"])
    rows = risk_gap(t, spec, v["N_grid"], v["n_mc"], v["n_seeds"], v["seed"], v["delta"], v["esp_trials"],
                    v["grid_size"])
    for r in rows:
        r.pop("gaps")
    return rows, True


def _run_constants(v):
    from .ranfeat import cstar_R, cstar_uniform
    t = _make_target(v)
    R, M, N = v["R"], v["M"], v["N"]
    tail = 0.0 if t.is_zero else t.moments.tail_mass(R)
    cr = cstar_R(t, M, R)
    rows = [dict(name="cstar_uniform", value=cstar_uniform(t, M, R)),
            dict(name="cstar_R", value=cr),
            dict(name="tail_mass", value=tail),
            dict(name=f"sqrt_cstar_R_over_N_{N}", value=float(np.sqrt(cr / N)))]
    return rows, True


RUNNERS = {
    "represent-check": _run_represent_check,
    "static-conv": _run_static_conv,
    "esn-equiv": _run_esn_equiv,
    "esn-conv": _run_esn_conv,
    "feedback-conv": _run_feedback_conv,
    "constants": _run_constants,
}

PLOTS = {
    "static-conv": ("N", "mse_mean", "MSE"),
    "esn-conv": ("N", "rmse_median", "RMSE"),
    "feedback-conv": ("N", "gap_median", "risk gap"),
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def rows_to_csv(command: str, rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS[command]
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def run(cfg: ExperimentConfig) -> tuple[RunReport | None, bool]:
    """Execute a validated config, writing CSV, JSON report and optional SVG."""
    echo = dict(command=cfg.command, **{k: (list(v) if isinstance(v, list) else v) for k, v in cfg.values.items()})
    if cfg.dry_run:
        print(json.dumps(echo, indent=2, sort_keys=True))
        return None, True
    t0 = time.perf_counter()
    rows, ok = RUNNERS[cfg.command](cfg.values)
    wall = time.perf_counter() - t0
    report = RunReport(
        config=echo, rows=rows, wall_clock_s=wall,
        versions=dict(randres=__version__, numpy=np.__version__, scipy=scipy.__version__,
                      python=platform.python_version()),
        seed_provenance=dict(seed=cfg.values["seed"], generator="numpy Philox",
                             streams="SeedSequence(seed, spawn_key=(stream,)) per (experiment, N, seed index)"),
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.command
    targets = {out / f"{base}.csv": rows_to_csv(base, rows),
               out / f"{base}_report.json": json.dumps(dict(config=echo, wall_clock_s=wall, versions=report.versions,
                                                            seed_provenance=report.seed_provenance,
                                                            rows=[{k: _fmt(v) for k, v in r.items()} for r in rows]),
                                                       indent=2, sort_keys=True) + "\n"}
    if cfg.plot and base in PLOTS:
        from .plotting import loglog_svg
        xk, yk, lab = PLOTS[base]
        sel = [r for r in rows if r.get("readout_kind", "oracle") == "oracle"]
        targets[out / f"{base}.svg"] = loglog_svg([r[xk] for r in sel], {lab: [r[yk] for r in sel]},
                                                  title=base, ylabel=lab)
    written, placed = [], []
    try:
        for path, text in targets.items():
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_text(text, encoding="utf-8", newline="\n")
            written.append(tmp)
        for tmp in written:
            os.replace(tmp, tmp.with_suffix(""))
            placed.append(tmp.with_suffix(""))
    except BaseException:
        for p in written + placed:
            p.unlink(missing_ok=True)
        raise
    for r in rows:
        print(",".join(f"{k}={_fmt(v)}" for k, v in r.items()))
    return report, ok


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randres", description="Random feature and reservoir approximation experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override one config entry")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--plot", action="store_true", help="write a log-log SVG where applicable")
    p.add_argument("--dry-run", action="store_true", help="echo the validated config and exit")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, val = item.split("=", 1)
            raw[k.strip()] = val.strip()
        vals = parse_config(args.command, raw, args.config, args.seed)
        cfg = ExperimentConfig(args.command, vals, Path(args.out), args.plot, args.dry_run)
        _, ok = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, SingularSystemError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    if not ok:
        print("verification failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
