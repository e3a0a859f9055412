"""Experiment runner and command-line interface.

Every experiment produces a table of rows (dicts) that is written as CSV, the
primary format, or JSON. The seed goes into every file header; a timestamp
comment is added unless ``--deterministic`` is given, so deterministic runs
are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import closedform, outage, scheme
from .errors import ConfigError, NumericalError
from .fading import SystemConfig, TrialStream
from .orderstats import VarpiTable, estimate_varpi, joint_order_pdf

KINDS = ("rate-vs-K", "rate-vs-SNR", "rate-vs-M", "outage", "counts", "validate")
SWEEP_KINDS = ("rate-vs-K", "rate-vs-SNR", "rate-vs-M", "outage")

RATE_TRIALS = 100_000
OUTAGE_TRIALS = 1_000_000

# sub-streams of one seed; varpi uses scheme.VARPI_SUBSTREAM
_SUB_NB, _SUB_WB, _SUB_NOMA, _SUB_PIPE, _SUB_OUTAGE = 2, 3, 4, 5, 6


# -- parameters -------------------------------------------------------------


def parse_power(text: str) -> float:
    """Linear power from ``"10dB"`` or a plain linear value such as ``"10"``."""
    s = str(text).strip()
    try:
        if s.lower().endswith("db"):
            value = 10 ** (float(s[:-2]) / 10)
        else:
            value = float(s)
    except ValueError:
        raise ConfigError(f"cannot read power {text!r}; use e.g. 10dB or 10") from None
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"power must be positive, got {text!r}")
    return value


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:step"`` (stop included)."""
    s = str(text).strip()
    try:
        if ":" in s:
            start, stop, step = (float(v) for v in s.split(":"))
            if step <= 0:
                raise ConfigError("grid step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot read grid {text!r}") from None
    check_grid(values)
    return values


def check_grid(values: Sequence[float]):
    if not values:
        raise ConfigError("sweep grid is empty")
    diffs = np.diff(values)
    if len(values) > 1 and not ((diffs > 0).all() or (diffs < 0).all()):
        raise ConfigError("sweep grid must be strictly monotone")


def read_config_file(path: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# -- output -----------------------------------------------------------------


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **row):
        self.rows.append(row)


def _fmt(value: Any, column: str) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if column == "outage" or column.endswith("std_error") or column.endswith("_se"):
            return f"{float(value):.10e}"
        return repr(float(value))
    return str(value)


def render(table: Table, fmt: str, seed: int | None, deterministic: bool) -> str:
    meta = dict(table.meta)
    if seed is not None:
        meta = {"seed": seed, **meta}
    if fmt == "json":
        doc = {"meta": meta, "columns": table.columns,
               "rows": [{c: row.get(c) for c in table.columns} for row in table.rows]}
        if not deterministic:
            doc["generated"] = datetime.now(timezone.utc).isoformat()
        return json.dumps(doc, indent=2, default=float) + "\n"
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    if not deterministic:
        buf.write(f"# generated={datetime.now(timezone.utc).isoformat()}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(row.get(c), c) for c in table.columns])
    return buf.getvalue()


def emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# -- varpi cache ------------------------------------------------------------


def cache_dir() -> Path:
    root = os.environ.get("NOMACOMAC_CACHE")
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "nomacomac"


def cached_varpi(K: int, M: int, trials: int, seed: int, workers: int = 1, use_cache: bool = True) -> VarpiTable:
    """Expectation constants, stored on disk keyed by (K, M, trials, seed)."""
    path = cache_dir() / f"varpi_K{K}_M{M}_T{trials}_S{seed}.json"
    if use_cache and path.exists():
        try:
            return VarpiTable.from_json(path.read_text())
        except (ValueError, KeyError):
            pass  # corrupt entry: recompute
    table = estimate_varpi(K, M, trials, TrialStream(seed).child(scheme.VARPI_SUBSTREAM), workers)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(table.to_json())
            tmp.replace(path)
        except OSError:
            pass
    return table


# -- experiments ------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    kind: str
    base: Any
    variable: str | None = None
    grid: tuple = ()
    out: str | None = None
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind in SWEEP_KINDS:
            check_grid(self.grid)


def _rate_row(cfg: SystemConfig, varpi: VarpiTable, workers: int, pipeline: bool = False) -> dict:
    K, M, N, P, T = cfg.K, cfg.M, cfg.N, cfg.P, cfg.trials
    root = TrialStream(cfg.seed)
    nb = closedform.nb_rate(K, M, P, varpi, T, root.child(_SUB_NB), workers)
    wb = closedform.wb_rate(K, M, N, P, varpi, T, root.child(_SUB_WB), workers)
    row = dict(K=K, M=M, L=cfg.L, N=N, P_linear=P, P_dB=cfg.snr_db, trials=T,
               nb=nb.value, nb_se=nb.std_error, wb=wb.value, wb_se=wb.std_error)
    if K % (2 * M) == 0:
        noma = closedform.noma_pair_rate(K, M, N, P, varpi, T, root.child(_SUB_NOMA), workers)
        row.update(noma=noma.value, noma_se=noma.std_error)
        r = M / K
        if r < 0.5:
            row.update(limit_noma=closedform.limit_rate_noma(r, K, N, P, varpi[1], varpi[2]),
                       asymptote=closedform.high_snr_asymptote(r, P))
    if M / K < 1:
        row["limit_wb"] = closedform.limit_rate_wb(M / K, K, N, P, varpi[1])
    if pipeline:
        rule = "pair-optimal" if cfg.L == 2 and K % (2 * M) == 0 else "equal-beta"
        est = scheme.ergodic_rate_mc(cfg, rule, root.child(_SUB_PIPE), varpi, workers)
        row.update(pipeline=est.value, pipeline_se=est.std_error, power_rule=rule)
    return row


RATE_COLUMNS = ["K", "M", "L", "N", "P_linear", "P_dB", "trials", "nb", "nb_se", "wb", "wb_se",
                "noma", "noma_se", "limit_noma", "limit_wb", "asymptote"]
OUTAGE_COLUMNS = ["K", "M", "N", "target_rate", "beta1", "beta2", "l1", "l2",
                  "P_linear", "P_dB", "outage", "std_error", "method", "trials"]


def run_rate_sweep(kind: str, cfg: SystemConfig, grid: Sequence[float], ratio: float | None = None,
                   workers: int = 1, use_cache: bool = True) -> Table:
    table = Table(list(RATE_COLUMNS), meta={"kind": kind})
    for value in grid:
        if kind == "rate-vs-K":
            K = int(value)
            M = cfg.M if ratio is None else K * ratio
            if abs(M - round(M)) > 1e-9:
                raise ConfigError(f"K={K} and ratio {ratio} give a non-integer M")
            point = SystemConfig(K, int(round(M)), cfg.L, cfg.N, cfg.P, cfg.trials, cfg.seed)
        elif kind == "rate-vs-M":
            point = SystemConfig(cfg.K, int(value), cfg.L, cfg.N, cfg.P, cfg.trials, cfg.seed)
        elif kind == "rate-vs-SNR":
            point = SystemConfig(cfg.K, cfg.M, cfg.L, cfg.N, 10 ** (value / 10), cfg.trials, cfg.seed)
        else:
            raise ConfigError(f"not a rate sweep: {kind}")
        varpi = cached_varpi(point.K, point.M, point.trials, point.seed, workers, use_cache)
        table.add(**_rate_row(point, varpi, workers))
    return table


def run_outage(ocfg: outage.OutageConfig, methods: Sequence[str], trials: int, seed: int,
               pair=(1, 2), workers: int = 1, fit_window=None) -> Table:
    table = Table(list(OUTAGE_COLUMNS), meta={"kind": "outage"})
    stream = TrialStream(seed).child(_SUB_OUTAGE)
    for method in methods:
        if method == "high-snr-asymptote" and tuple(pair) != (1, 2) and len(methods) > 1:
            table.meta["note"] = "high-SNR overlay covers the strongest pair only"
            continue
        curve = outage.outage_curve(ocfg, method, trials, stream, pair, workers)
        ses = curve.std_errors or (None,) * len(curve.points)
        for (P, q), se in zip(curve.points, ses):
            table.add(K=ocfg.K, M=ocfg.M, N=ocfg.N, target_rate=ocfg.target_rate, beta1=ocfg.beta1,
                      beta2=ocfg.beta2, l1=pair[0], l2=pair[1], P_linear=P, P_dB=10 * math.log10(P),
                      outage=q, std_error=se, method=method,
                      trials=trials if method == "monte-carlo" else None)
        if fit_window is not None:
            try:
                table.meta[f"slope_{method}"] = f"{diversity_fit(curve, fit_window):.6g}"
            except ValueError as exc:
                table.meta[f"slope_{method}"] = f"unavailable ({exc})"
    return table


def diversity_fit(curve, window):
    return outage.diversity_fit(curve, window)


def run_counts(K: int, M: int, L: int) -> Table:
    S, H, X = scheme.enumeration_counts(K, M, L)
    table = Table(["K", "M", "L", "S", "H", "X"], meta={"kind": "counts"})
    table.add(K=K, M=M, L=L, S=S, H=H, X=X)
    return table


def run_experiment(exp: Experiment, fmt: str = "csv", deterministic: bool = False,
                   workers: int = 1) -> Table:
    """Run ``exp`` and write its table to ``exp.out`` (stdout when unset)."""
    opts = exp.options
    if exp.kind in ("rate-vs-K", "rate-vs-SNR", "rate-vs-M"):
        table = run_rate_sweep(exp.kind, exp.base, exp.grid, opts.get("ratio"), workers,
                               opts.get("use_cache", True))
    elif exp.kind == "outage":
        base = exp.base
        ocfg = outage.OutageConfig(base.K, base.M, base.N, base.target_rate, base.beta1, base.beta2,
                                   tuple(10 ** (v / 10) for v in exp.grid))
        table = run_outage(ocfg, opts.get("methods", ("analytic-quadrature",)),
                           opts.get("trials", OUTAGE_TRIALS), exp.seed, opts.get("pair", (1, 2)),
                           workers, opts.get("fit_window"))
    elif exp.kind == "counts":
        table = run_counts(exp.base.K, exp.base.M, exp.base.L)
    else:
        table = run_validate()
    emit(render(table, fmt, exp.seed, deterministic), exp.out)
    return table


# -- validation -------------------------------------------------------------


def run_validate() -> Table:
    """Fast self-checks of the core identities; raises NumericalError on a failure."""
    from scipy import integrate

    table = Table(["check", "value", "tolerance", "passed"], meta={"kind": "validate"})

    def check(name, value, tol):
        table.add(check=name, value=float(value), tolerance=tol, passed=bool(value <= tol))

    # L = 1 pipeline against the wide-band closed form, trial by trial
    cfg = SystemConfig(16, 4, 1, 4, 10.0, 4096, 7)
    varpi = estimate_varpi(16, 4, 4096, TrialStream(7).child(scheme.VARPI_SUBSTREAM))
    pipe = scheme.symbol_rate_samples(cfg, "equal-beta", TrialStream(7), varpi)
    wb = closedform.wb_rate_samples(16, 4, 4, 10.0, varpi, 4096, TrialStream(7))
    check("L=1 pipeline vs wide-band closed form", np.abs(pipe - wb).max(), 1e-12)

    # pair pipeline against the pair closed form
    cfg2 = SystemConfig(16, 4, 2, 4, 10.0, 4096, 7)
    pipe2 = scheme.symbol_rate_samples(cfg2, "pair-optimal", TrialStream(7), varpi)
    noma = closedform.noma_pair_samples(16, 4, 4, 10.0, varpi, 4096, TrialStream(7))
    check("pair pipeline vs pair closed form", np.abs(pipe2 - noma).max(), 1e-12)

    # joint density of the M-th and 2M-th gains integrates to one
    mass, _ = integrate.dblquad(lambda x, y: joint_order_pdf(6, 2, x, y), 0, 40, lambda y: y, lambda y: 60)
    check("joint order density mass", abs(mass - 1), 1e-6)

    # outage: direct failure quadrature against the success regions
    ocfg = outage.OutageConfig(3, 1, 1, 0.5)
    direct = outage.outage_subcarrier_analytic(ocfg, 10.0)
    a1, a2 = outage.success_regions(ocfg, 10.0)
    check("outage quadrature vs success regions", abs(direct - (1 - a1 - a2)), 1e-8)

    failed = [r["check"] for r in table.rows if not r["passed"]]
    if failed:
        raise NumericalError("validation failed: " + "; ".join(failed), len(failed))
    return table


# -- summarize --------------------------------------------------------------


def _sig4(value: str) -> str:
    try:
        return f"{float(value):.4g}"
    except ValueError:
        return value


def summarize(path: str) -> str:
    """Aligned text table of a CSV written by this tool."""
    lines = Path(path).read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if l and not l.startswith("#")]
    if not body:
        raise ValueError(f"{path}: missing header row")
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    if any(len(r) != len(header) for r in data):
        raise ValueError(f"{path}: rows do not match the header")
    out = [m for m in meta if not m.startswith("# generated=")]
    if not data:
        out.append("0 rows")
        return "\n".join(out) + "\n"
    cells = [header] + [[_sig4(v) for v in r] for r in data]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        out.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    out.append(f"{len(data)} rows")
    if "outage" in header and "P_linear" in header:
        iq, ip = header.index("outage"), header.index("P_linear")
        im = header.index("method") if "method" in header else None
        by_method: dict[str, list] = {}
        for r in data:
            by_method.setdefault(r[im] if im is not None else "", []).append((float(r[ip]), float(r[iq])))
        for method, pts in by_method.items():
            pts = [p for p in pts if p[1] > 0]
            top = pts[-min(len(pts), 5):]
            try:
                slope = outage.diversity_fit(top, (top[0][0], top[-1][0])) if top else None
            except ValueError:
                slope = None
            label = f" ({method})" if method else ""
            out.append(f"fitted slope{label}: " + ("n/a" if slope is None else f"{slope:.4g}"))
    return "\n".join(out) + "\n"


# -- CLI --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


# defaults applied after the config file, so explicit flags > file > defaults
_DEFAULTS = dict(seed=0, K=None, M=None, L=2, N=1, format="csv", workers=1, ratio=None,
                 target_rate=0.5, beta1=1.0, beta2=1.0, method="analytic", pair="1,2",
                 fit_window=None, grid=None, snr_db=None, power=None, trials=None, out=None)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="omit the timestamp so reruns are byte-identical")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-cache", dest="no_cache", action="store_true", default=None)
    p.add_argument("-K", type=int, dest="K")
    p.add_argument("-M", type=int, dest="M")
    p.add_argument("-L", type=int, dest="L")
    p.add_argument("-N", type=int, dest="N")
    power = p.add_mutually_exclusive_group()
    power.add_argument("--snr-db", type=float, dest="snr_db")
    power.add_argument("--power", help="linear value, or dB with a suffix (e.g. 10dB)")


def _outage_flags(p: argparse.ArgumentParser):
    p.add_argument("--target-rate", type=float, dest="target_rate")
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--pair", help="groups sharing each sub-carrier, e.g. 1,2")
    p.add_argument("--method", choices=("analytic", "mc", "asymptote", "all"))
    p.add_argument("--fit-window", dest="fit_window", help="dB range for the slope fit, e.g. 30:40")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nomacomac", description="NOMA computation-rate and outage experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="ergodic rates of one configuration")
    _common(p)
    p.add_argument("--pipeline", action="store_true", default=None,
                   help="also run the full power-allocation pipeline")

    p = sub.add_parser("limit", help="large-K limiting rates")
    _common(p)

    p = sub.add_parser("outage", help="outage probability over an SNR grid")
    _common(p)
    _outage_flags(p)
    p.add_argument("--grid", help="SNR grid in dB: a,b,c or start:stop:step")

    p = sub.add_parser("sweep", help="figure-style sweeps")
    _common(p)
    _outage_flags(p)
    p.add_argument("--kind", choices=SWEEP_KINDS, required=True)
    p.add_argument("--grid", required=True, help="values of the swept variable (K, dB, or M)")
    p.add_argument("--ratio", type=float, help="fixed M/K for rate-vs-K")

    p = sub.add_parser("counts", help="superposition and combination counts")
    _common(p)

    p = sub.add_parser("validate", help="run the built-in invariant checks")
    _common(p)

    p = sub.add_parser("summarize", help="print a CSV as an aligned table")
    p.add_argument("path")
    return parser


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    values = vars(args)
    if values.get("config"):
        for key, value in read_config_file(values["config"]).items():
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            if values[key] is None:
                values[key] = value
    for key, default in _DEFAULTS.items():
        if key in values and values[key] is None:
            values[key] = default
    casts = dict(seed=int, K=int, M=int, L=int, N=int, trials=int, workers=int, ratio=float,
                 target_rate=float, beta1=float, beta2=float, snr_db=float)
    for key, cast in casts.items():
        if values.get(key) is not None:
            try:
                values[key] = cast(values[key])
            except ValueError:
                raise ConfigError(f"bad value for {key}: {values[key]!r}") from None
    for flag in ("deterministic", "no_cache", "pipeline"):
        if flag in values:
            v = values[flag]
            values[flag] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
    return argparse.Namespace(**values)


def _power(args) -> float:
    if args.snr_db is not None:
        return 10 ** (args.snr_db / 10)
    if args.power is not None:
        return parse_power(args.power)
    return 10.0


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError("missing parameter(s): " + ", ".join("-" + n for n in missing))


_METHODS = {"analytic": ("analytic-quadrature",), "mc": ("monte-carlo",),
            "asymptote": ("high-snr-asymptote",),
            "all": ("analytic-quadrature", "monte-carlo", "high-snr-asymptote")}


def _pair(text: str) -> tuple[int, int]:
    try:
        l1, l2 = (int(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"pair must look like 1,2; got {text!r}") from None
    return l1, l2


def _window(text):
    if text is None:
        return None
    lo, hi = (float(v) for v in str(text).split(":"))
    return 10 ** (lo / 10), 10 ** (hi / 10)


def _dispatch(args) -> int:
    if args.command == "summarize":
        sys.stdout.write(summarize(args.path))
        return 0
    args = _resolve(args)
    fmt, det, seed = args.format, args.deterministic, args.seed
    if args.command == "validate":
        table = run_validate()
        emit(render(table, fmt, seed, det), args.out)
        return 0
    if args.command == "counts":
        _need(args, "K", "M")
        emit(render(run_counts(args.K, args.M, args.L), fmt, seed, det), args.out)
        return 0
    P = _power(args)
    if args.command in ("rate", "limit"):
        _need(args, "K", "M")
        cfg = SystemConfig(args.K, args.M, args.L, args.N, P, args.trials or RATE_TRIALS, seed)
        varpi = cached_varpi(cfg.K, cfg.M, cfg.trials, seed, args.workers, not args.no_cache)
        if args.command == "rate":
            row = _rate_row(cfg, varpi, args.workers, pipeline=args.pipeline)
            cols = RATE_COLUMNS + (["pipeline", "pipeline_se", "power_rule"] if args.pipeline else [])
        else:
            r = cfg.M / cfg.K
            row = dict(K=cfg.K, M=cfg.M, N=cfg.N, P_linear=P, P_dB=cfg.snr_db, ratio=r,
                       varpi_trials=cfg.trials, limit_wb=closedform.limit_rate_wb(r, cfg.K, cfg.N, P, varpi[1]),
                       limit_nb=closedform.limit_rate_nb(r, cfg.K, P, varpi[1]))
            if r < 0.5:
                row.update(limit_noma=closedform.limit_rate_noma(r, cfg.K, cfg.N, P, varpi[1], varpi[2]),
                           asymptote=closedform.high_snr_asymptote(r, P))
            cols = ["K", "M", "N", "P_linear", "P_dB", "ratio", "varpi_trials",
                    "limit_noma", "limit_wb", "limit_nb", "asymptote"]
        table = Table(cols, [row], {"kind": args.command})
        emit(render(table, fmt, seed, det), args.out)
        return 0
    if args.command == "outage" or args.kind == "outage":
        _need(args, "K", "M")
        grid = parse_grid(args.grid) if args.grid else [10 * math.log10(P)]
        check_grid(grid)
        if len(grid) > 1 and grid[0] > grid[-1]:
            grid = grid[::-1]
        ocfg = outage.OutageConfig(args.K, args.M, args.N, args.target_rate, args.beta1, args.beta2,
                                   tuple(10 ** (v / 10) for v in grid))
        table = run_outage(ocfg, _METHODS[args.method], args.trials or OUTAGE_TRIALS, seed,
                           _pair(args.pair), args.workers, _window(args.fit_window))
        emit(render(table, fmt, seed, det), args.out)
        return 0
    # rate sweeps
    grid = parse_grid(args.grid)
    if args.kind == "rate-vs-K" and args.ratio is None:
        _need(args, "M")
    if args.kind == "rate-vs-K":
        K0 = int(grid[0])
        M0 = args.M if args.ratio is None else max(1, int(round(K0 * args.ratio)))
        base = SystemConfig(K0, M0, args.L, args.N, P, args.trials or RATE_TRIALS, seed)
    else:
        _need(args, "K") if args.kind == "rate-vs-M" else _need(args, "K", "M")
        M0 = int(grid[0]) if args.kind == "rate-vs-M" else args.M
        base = SystemConfig(args.K, M0, args.L, args.N, P, args.trials or RATE_TRIALS, seed)
    table = run_rate_sweep(args.kind, base, grid, args.ratio, args.workers, not args.no_cache)
    emit(render(table, fmt, seed, det), args.out)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        sys.stderr.write(f"invalid configuration: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        if exc.achieved is not None:
            sys.stderr.write(f"  achieved: {exc.achieved}\n")
        return 2
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
