"""Command-line front end.

Usage:
    artifact weights --family sw --ell 1 --p 2 --n-max 3
    artifact verify --ell 2 --p 3 --family sw_tilde --trials 1000 --seed 7
    artifact audit --ell 3 --p 2.5 --family sw
    artifact probe --kind optimality --ell 1 --p 2 --N-list 32,64,128
    artifact scan --ell 1-4 --p 1.5,2,3 --K 4
    artifact lemma --p 1.1,1.5,2,2.5,4

Exit codes: 0 success, 1 mathematical violation, 2 usage or configuration
error, 3 numerical or resource failure. Every output starts with comment
lines holding the library version and the resolved configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field, fields

import click

from . import __version__
from .precision import ExtReal

__all__ = ["main", "RunConfig", "load_config"]

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    ell: object = 1
    p: object = 2.0
    family: str = "sw"
    lam: float | None = None
    n_max: int = 1000
    window: list | None = None
    precision: str = "standard"
    seed: int = 0
    trials: int = 1000
    N_list: list = field(default_factory=lambda: [32, 64, 128, 256, 512])
    epsilon: float = 0.25
    K: int = 4
    out_format: str = "csv"
    threads: int = 0
    kind: str = "criticality"
    m: int | None = None
    weight_scale: float = 1.0

    def resolved(self) -> dict:
        return asdict(self)


_KEYS = {f.name for f in fields(RunConfig)}
_ALIASES = {"lambda": "lam", "format": "out_format", "N-list": "N_list", "n-max": "n_max"}


def _int_list(v) -> list:
    if isinstance(v, int):
        return [v]
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    out = []
    for part in str(v).split(","):
        part = part.strip()
        if re.fullmatch(r"\d+-\d+", part):
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(v) -> list:
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """File keys first, then flags; unknown keys are an error."""
    raw = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat JSON object")
    merged = {}
    for k, v in list(raw.items()) + [(k, v) for k, v in overrides.items() if v is not None]:
        key = _ALIASES.get(k, k)
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(v, dict):
            raise ConfigError(f"config key {k!r} must not be nested")
        merged[key] = v
    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    try:
        ells = _int_list(cfg.ell)
        ps = _float_list(cfg.p)
        cfg.N_list = _int_list(cfg.N_list)
        cfg.n_max = int(cfg.n_max)
        cfg.seed = int(cfg.seed)
        cfg.trials = int(cfg.trials)
        cfg.K = int(cfg.K)
        cfg.threads = int(cfg.threads)
        cfg.epsilon = float(cfg.epsilon)
        cfg.weight_scale = float(cfg.weight_scale)
        if cfg.lam is not None:
            cfg.lam = float(cfg.lam)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in config: {exc}") from exc
    if not ells or min(ells) < 1:
        raise ConfigError("ell must be a positive integer")
    if not ps or min(ps) <= 1 or not all(math.isfinite(x) for x in ps):
        raise ConfigError("p must exceed 1")
    if cfg.precision not in ("standard", "extended"):
        raise ConfigError("precision must be standard or extended")
    if cfg.out_format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if not 0 < cfg.epsilon < 0.5:
        raise ConfigError("epsilon must lie in (0, 1/2)")
    if cfg.trials < 0:
        raise ConfigError("trials must be >= 0")
    if not -(2**63) <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    if cfg.K < 1:
        raise ConfigError("K must be >= 1")
    if cfg.N_list and any(b <= a for a, b in zip(cfg.N_list, cfg.N_list[1:])):
        raise ConfigError("N_list must be increasing")
    if cfg.weight_scale <= 0:
        raise ConfigError("weight scale must be positive")
    if cfg.window is not None:
        if not (isinstance(cfg.window, (list, tuple)) and len(cfg.window) == 2):
            raise ConfigError("window must be a pair [lo, hi]")
        cfg.window = [int(cfg.window[0]), int(cfg.window[1])]
    cfg.ell = ells if len(ells) > 1 else ells[0]
    cfg.p = ps if len(ps) > 1 else ps[0]


def _single(cfg: RunConfig, name: str):
    v = getattr(cfg, name)
    if isinstance(v, list):
        raise ConfigError(f"{name} must be a single value for this command")
    return v


def _workers(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


# -- output ----------------------------------------------------------------------


def _fmt(x, digits: int) -> str:
    if isinstance(x, ExtReal):
        return x.format(digits)
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, f".{min(digits, 17)}g")
    if isinstance(x, complex):
        return f"{format(x.real, '.17g')}{format(x.imag, '+.17g')}j"
    if hasattr(x, "item"):
        return _fmt(x.item(), digits)
    return str(x)


def _jsonable(x):
    if isinstance(x, ExtReal):
        return x.format(32)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "item"):
        return _jsonable(x.item())
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


class _Emitter:
    def __init__(self, cfg: RunConfig, command: str, out: str | None):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.digits = 32 if cfg.precision == "extended" else 17

    def header(self) -> list:
        conf = json.dumps(self.cfg.resolved(), sort_keys=True)
        return [f"# artifact {__version__} {self.command}", f"# config: {conf}"]

    def write(self, columns, rows, extra: dict | None = None):
        if self.cfg.out_format == "json":
            doc = {
                "version": __version__,
                "command": self.command,
                "config": self.cfg.resolved(),
                "columns": list(columns),
                "rows": [[_jsonable(v) for v in r] for r in rows],
            }
            if extra:
                doc["summary"] = {k: _jsonable(v) for k, v in extra.items()}
            text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        else:
            buf = io.StringIO()
            for line in self.header():
                buf.write(line + "\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v, self.digits) for v in r])
            text = buf.getvalue()
        if self.out:
            with open(self.out, "w", newline="") as fh:
                fh.write(text)
        else:
            click.echo(text, nl=False)

    def summary(self, lines):
        # keep stdout clean for the table when no output file is given
        for line in lines:
            click.echo(line, err=not self.out)


# -- command bodies ------------------------------------------------------------------


def _weights(cfg: RunConfig, emit: _Emitter) -> int:
    from .precision import EXTENDED, STANDARD
    from .weights import WeightSpec, rho_sw_gamma, rho_sw_product

    ell, p = _single(cfg, "ell"), _single(cfg, "p")
    spec = WeightSpec(cfg.family, ell, p, cfg.lam, cfg.weight_scale)
    ctx = EXTENDED if cfg.precision == "extended" else STANDARD
    lo, hi = cfg.window or (ell, cfg.n_max)
    if lo < ell:
        raise ConfigError("window starts below ell")
    rows = []
    if cfg.family == "sw":
        cols = ("n", "value", "gamma_form", "rel_diff")
        for n in range(lo, hi + 1):
            v = rho_sw_product(ell, p, n, ctx) * cfg.weight_scale
            g = rho_sw_gamma(ell, p, n, ctx) * cfg.weight_scale
            rows.append((n, v, g, abs(float(v) - float(g)) / abs(float(v))))
    else:
        cols = ("n", "value")
        rows = [(n, spec(n, ctx)) for n in range(lo, hi + 1)]
    emit.write(cols, rows)
    return EXIT_OK


def _replay(kind: str, **info) -> str:
    return "# replay: " + json.dumps({"kind": kind, **info}, sort_keys=True)


def _verify(cfg: RunConfig, emit: _Emitter) -> int:
    from .inequality_lab import CORPUS_COLUMNS, criticality_search, functional_gap, random_sequence, run_corpus
    from .precision import EXTENDED
    from .seq_core import LatticeSeq, lp_energy
    from .weights import WeightSpec

    ell, p = _single(cfg, "ell"), _single(cfg, "p")
    if cfg.trials < 1:
        raise click.UsageError("trials must be >= 1")
    spec = WeightSpec(cfg.family, ell, p, cfg.lam, cfg.weight_scale)
    rows = run_corpus(ell, p, cfg.family, cfg.trials, cfg.seed, cfg.lam, cfg.weight_scale,
                      workers=min(_workers(cfg), max(1, cfg.trials // 50)))
    if cfg.precision == "extended":
        for r in rows:
            u = random_sequence(ell, cfg.seed, r.trial)
            r.gap = functional_gap(u, ell, p, spec, EXTENDED)
    bad = [r for r in rows if r.violation]
    replays = [_replay("corpus", seed=cfg.seed, trial=r.trial, ell=ell, p=p, family=cfg.family,
                       lo=random_sequence(ell, cfg.seed, r.trial).lo,
                       values=[[v.real, v.imag] for v in random_sequence(ell, cfg.seed, r.trial).values])
               for r in bad[:5]]
    # unit sequences and log-scale profiles probe the weight's criticality
    extra_bad = 0
    for n in range(ell, ell + 51):
        u = LatticeSeq.delta(n, level=ell)
        g = float(functional_gap(u, ell, p, spec))
        if g < -1e-10 * lp_energy(u, ell, p):
            extra_bad += 1
            replays.append(_replay("delta", n=n, gap=g))
    profiles = []
    try:
        profiles = criticality_search(ell, p, cfg.family, cfg.lam, cfg.weight_scale)
    except ValueError:
        pass
    for rec in profiles:
        if rec.violated:
            extra_bad += 1
            replays.append(_replay("log_profile", L=rec.L, gap=rec.gap, lhs=rec.lhs, err=rec.err))
    identity_bad = 0
    if cfg.family == "sw" and p == 2 and cfg.weight_scale == 1.0:
        for r in rows:
            if abs(float(r.gap) - r.sum_Rp) > 1e-11 * abs(float(r.gap)):
                identity_bad += 1
    emit.write(CORPUS_COLUMNS, [r.row() for r in rows])
    gaps = [float(r.gap) for r in rows]
    rem = [min(r.sum_Rq, r.sum_Rp) for r in rows]
    lines = [
        f"# trials={len(rows)} corpus_violations={len(bad)} probe_violations={extra_bad}"
        f" identity_failures={identity_bad}",
        f"# min_gap={_fmt(min(gaps), 17)} min_remainder={_fmt(min(rem), 17)}",
    ]
    if cfg.family == "sw":
        lo_r = [r.gap / r.sum_Rq for r in rows if r.sum_Rq > 0]
        hi_r = [r.gap / r.sum_Rp for r in rows if r.sum_Rp > 0]
        if lo_r and hi_r:
            lines.append(f"# gap/sum_Rq in [{_fmt(min(lo_r), 17)}, {_fmt(max(lo_r), 17)}]"
                         f" gap/sum_Rp in [{_fmt(min(hi_r), 17)}, {_fmt(max(hi_r), 17)}]")
    if profiles:
        lines.append("# log_profiles " + " ".join(
            f"L={rec.L:g}:quotient={_fmt(rec.lhs / rec.rhs, 17)}" for rec in profiles))
    emit.summary(lines + replays)
    return EXIT_VIOLATION if bad or extra_bad or identity_bad else EXIT_OK


def _audit(cfg: RunConfig, emit: _Emitter) -> int:
    from .assumption_audit import AUDIT_COLUMNS, check_A1_A2_A3, check_A4

    ell, p = _single(cfg, "ell"), _single(cfg, "p")
    if cfg.family not in ("sw", "sw_tilde"):
        raise ConfigError("audit needs a parameter-sequence family: sw or sw_tilde")
    window = tuple(cfg.window) if cfg.window else (ell, cfg.n_max)
    reports = check_A1_A2_A3(cfg.family, ell, p, window, strict_A3=(cfg.family == "sw"))
    reports.append(check_A4(cfg.family, ell, p).report(ell, p))
    emit.write(AUDIT_COLUMNS, [r.row(ell, p) for r in reports])
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION


def _probe(cfg: RunConfig, emit: _Emitter) -> int:
    from .inequality_lab import nonattain_probe
    from .optimality_probe import (SWEEP_COLUMNS, criticality_sweep, optimality_sweep,
                                   p2_quotient_oracle, sweep_verdict)
    from .weights import WeightSpec

    ell, p = _single(cfg, "ell"), _single(cfg, "p")
    workers = _workers(cfg)
    if cfg.kind in ("criticality", "optimality"):
        if cfg.kind == "criticality":
            recs = criticality_sweep(ell, p, cfg.N_list, cfg.epsilon, workers)
        else:
            recs = optimality_sweep(ell, p, cfg.m or ell, cfg.N_list, cfg.epsilon, workers)
        emit.write(SWEEP_COLUMNS, [r.row() for r in recs])
        verdict = sweep_verdict(recs, p, cfg.kind)
        emit.summary([f"# verdict={verdict}"])
        return EXIT_VIOLATION if verdict == "fail" else EXIT_OK
    if cfg.kind == "oracle":
        if p != 2:
            raise ConfigError("the exact oracle needs p = 2")
        w = WeightSpec(cfg.family, ell, 2.0, cfg.lam, cfg.weight_scale)
        m = cfg.m or ell
        vals = [(M, p2_quotient_oracle(ell, w, m, M)) for M in cfg.N_list]
        emit.write(("M", "infimum"), vals)
        ok = all(v >= 1 - 1e-8 for _, v in vals) and all(
            b <= a for (_, a), (_, b) in zip(vals, vals[1:]))
        return EXIT_OK if ok or cfg.weight_scale != 1.0 else EXIT_VIOLATION
    if cfg.kind == "nonattain":
        recs = [nonattain_probe(ell, p, M) for M in cfg.N_list]
        emit.write(("M_cut", "gap", "lhs", "label"), [(r.M_cut, r.gap, r.lhs, r.label) for r in recs])
        return EXIT_OK if all(r.gap > 0 for r in recs) else EXIT_VIOLATION
    raise ConfigError(f"unknown probe kind {cfg.kind!r}")


def _scan(cfg: RunConfig, emit: _Emitter) -> int:
    from .assumption_audit import AUDIT_COLUMNS, conjecture_scan

    ells = cfg.ell if isinstance(cfg.ell, list) else [cfg.ell]
    ps = cfg.p if isinstance(cfg.p, list) else [cfg.p]
    rows = conjecture_scan(ells, ps, cfg.n_max, cfg.K, _workers(cfg))
    emit.write(AUDIT_COLUMNS + ("precision",), [r.row() for r in rows])
    fails = sum(1 for r in rows if not r.passed)
    emit.summary([f"# cells={len(rows)} failing_proxies={fails}"])
    return EXIT_OK if fails == 0 else EXIT_VIOLATION


def _lemma(cfg: RunConfig, emit: _Emitter) -> int:
    from .inequality_lab import scalar_lemma_probe

    ps = cfg.p if isinstance(cfg.p, list) else [cfg.p]
    recs = [scalar_lemma_probe(p) for p in ps]
    cols = ("p", "points", "min_M", "violations", "lower_ratio", "lower_inf", "upper_ratio",
            "upper_sup", "identity_residual")
    rows = [(r.p, r.points, r.min_M, r.violations, r.lower_name, r.lower_ratio_inf,
             r.upper_name, r.upper_ratio_sup, r.identity_residual) for r in recs]
    emit.write(cols, rows)
    bad = any(r.violations for r in recs) or any(
        r.identity_residual is not None and r.identity_residual > 1e-12 for r in recs)
    return EXIT_VIOLATION if bad else EXIT_OK


# -- click wiring ---------------------------------------------------------------------


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Flat JSON config file."),
        click.option("--ell", type=str, help="Order; lists like 1,2 or 1-4 for scan."),
        click.option("--p", "p", type=str, help="Exponent p > 1; comma list for scan and lemma."),
        click.option("--family", type=str),
        click.option("--lambda", "lam", type=float, help="Parameter of lambda_family."),
        click.option("--n-max", "n_max", type=int),
        click.option("--window", type=(int, int), default=None),
        click.option("--trials", type=int),
        click.option("--seed", type=int),
        click.option("--N-list", "N_list", type=str, help="Comma list of N (or M for the oracle)."),
        click.option("--epsilon", type=float),
        click.option("--K", "K", type=int),
        click.option("--kind", type=click.Choice(["criticality", "optimality", "oracle", "nonattain"])),
        click.option("--m", "m", type=int),
        click.option("--precision", type=click.Choice(["standard", "extended"])),
        click.option("--out", type=click.Path(dir_okay=False), help="Output file (default stdout)."),
        click.option("--format", "out_format", type=click.Choice(["csv", "json"])),
        click.option("--threads", type=int),
        click.option("--debug-weight-scale", "weight_scale", type=float,
                     help="Multiply the weight, to watch a critical weight fail."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _run(command: str, body, kwargs) -> None:
    from .weights import ExtractionError

    config_path = kwargs.pop("config_path", None)
    out = kwargs.pop("out", None)
    if kwargs.get("window") is not None:
        kwargs["window"] = list(kwargs["window"])
    try:
        cfg = load_config(config_path, kwargs)
        code = body(cfg, _Emitter(cfg, command, out))
    except click.UsageError:
        raise
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except (ExtractionError, ArithmeticError, MemoryError, OverflowError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(EXIT_NUMERIC)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    sys.exit(code)


@click.group()
@click.version_option(__version__, prog_name="artifact")
def main():
    """Weights for discrete higher-order Hardy-type inequalities: tables, checks and probes."""


@main.command()
@_common
def weights(**kw):
    """Weight table for n in [ell, n-max]."""
    _run("weights", _weights, kw)


@main.command()
@_common
def verify(**kw):
    """Random inequality corpus plus criticality probes."""
    _run("verify", _verify, kw)


@main.command()
@_common
def audit(**kw):
    """Assumption audit of a parameter sequence."""
    _run("audit", _audit, kw)


@main.command()
@_common
def probe(**kw):
    """Cutoff sweeps, the p=2 oracle, or the non-attainability probe."""
    _run("probe", _probe, kw)


@main.command()
@_common
def scan(**kw):
    """Evidence table for the stencil-built weight over an (ell, p) grid."""
    _run("scan", _scan, kw)


@main.command()
@_common
def lemma(**kw):
    """Scalar inequality probe on a (t, z) grid."""
    _run("lemma", _lemma, kw)


if __name__ == "__main__":
    main()
