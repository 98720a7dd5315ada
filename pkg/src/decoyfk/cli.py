"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
failure.  Failures print one JSON error record on stderr and leave no
output files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from . import experiments as ex
from .channel_model import expected_tallies
from .config import FORMATS, MODES, RunConfig, load_config
from .decoy_estimator import BASES, STATES, STEPS_PER_KEY, ObservedTallies, estimate
from .errors import DecoyFKError, ValidationError
from .key_rate import key_rate
from .optimizer import optimize_protocol

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="decoyfk", description="Finite-key decoy-state BB84 estimates and simulations.")
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--mode", choices=MODES, help="what to compute (default: from config)")
    p.add_argument("--method", help="fluctuation engine: exact, simplified, asymptotic, gaussian, "
                                    "chernoff-hoeffding, infinite")
    p.add_argument("--out", metavar="PATH", help="output file (a directory for --mode figures)")
    p.add_argument("--seed", metavar="U64", help="seed for sampling modes")
    p.add_argument("--workers", metavar="N", help="worker processes, 0 for all cores")
    p.add_argument("--format", choices=FORMATS, help="csv (default) or json")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override a configuration key; repeatable")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = []
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        overrides.append((k, v))
    for name in ("mode", "method", "out", "seed", "workers", "format"):
        value = getattr(args, name)
        if value is not None:
            overrides.append((name, value))
    return cfg.updated(overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# tally input


def read_tallies(path: str, cfg: RunConfig) -> ObservedTallies:
    """Read ``basis,state,detections,errors[,pulses]`` rows.

    Without a ``pulses`` column the sifted pulses per state come from the
    configured ensemble, ``n * q_state * q_basis ** 2``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if row.strip() and not row.lstrip().startswith("#"))
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty tally file", field="tallies")
        fields = [f.strip().lower() for f in reader.fieldnames]
        need = {"basis", "state", "detections", "errors"}
        if not need <= set(fields):
            raise ValidationError(f"{path}: tally columns must include {sorted(need)}", field="tallies")
        has_pulses = "pulses" in fields
        ens = cfg.ensemble
        if not has_pulses and ens is None:
            raise ValidationError("tallies without a pulses column need mu, nu, q_signal, q_weak",
                                  field="tallies")
        sift = {"Z": cfg.basis_prob ** 2, "X": (1.0 - cfg.basis_prob) ** 2}
        records = []
        for lineno, raw in enumerate(reader, start=2):
            row = {k.strip().lower(): (v or "").strip() for k, v in raw.items() if k is not None}
            basis, state = row["basis"].upper(), row["state"].lower()
            if basis not in BASES or state not in STATES:
                raise ValidationError(f"{path} row {lineno}: unknown basis/state {basis}/{state}",
                                      field="basis/state")
            try:
                det = _count(row["detections"])
                err = _count(row["errors"])
                pulses = _count(row["pulses"]) if has_pulses else ens.total_pulses * ens.share(state) * sift[basis]
            except ValueError as exc:
                raise ValidationError(f"{path} row {lineno}: {exc}", field="tallies") from None
            records.append((basis, state, pulses, det, err))
    tallies = ObservedTallies.from_records(records)
    missing = [(b, s) for b in BASES for s in STATES if (b, s) not in tallies.counts]
    if missing:
        raise ValidationError(f"{path}: missing tallies for {missing}", field="tallies")
    return tallies


def _count(text: str) -> int:
    v = float(text)
    if not (math.isfinite(v) and v >= 0 and v == int(v)):
        raise ValueError(f"counts must be non-negative integers, got {text!r}")
    return int(v)


# ---------------------------------------------------------------------------
# modes


def _budget_meta(cfg: RunConfig, spent: float) -> List:
    return [("epsilon_step", repr(cfg.epsilon)), ("steps_per_key_basis", str(STEPS_PER_KEY)),
            ("budget_total", repr(spent))]


def _tallies_for(cfg: RunConfig):
    if cfg.tallies is not None:
        return read_tallies(cfg.tallies, cfg), cfg.ensemble
    return None, cfg.ensemble


def _need_ensemble(cfg: RunConfig):
    if cfg.ensemble is None:
        raise ValidationError("this mode needs mu, nu, q_signal and q_weak", field="mu")
    return cfg.ensemble


def mode_bounds(cfg):
    # the configured engine first, then the other comparison engines
    methods = [cfg.method] + [m for m in ex.TABLE2_METHODS if m is not cfg.method]
    return [ex.bounds_table(cfg.chi, cfg.epsilon, methods, trials=cfg.n)]


def mode_estimate(cfg):
    ens = _need_ensemble(cfg)
    tallies, _ = _tallies_for(cfg)
    if tallies is None:
        tallies = expected_tallies(ens, cfg.channel, cfg.basis_prob)
    est = estimate(tallies, ens, cfg.epsilon, cfg.method)
    rows = []
    for b in BASES:
        e = est[b]
        rows.append((b, e.m1_lower, e.e1_bit_upper, e.m1_signal_lower, e.phase_error_upper, e.theta,
                     e.budget_spent, ";".join(sorted(e.flags))))
    spent = sum(e.budget_spent for e in est.values())
    return [ex.Table("estimate", ("key_basis", "m1_lower", "e1_bit_upper_other_basis", "m1_signal_lower",
                                  "phase_error_upper", "theta", "epsilon_spent", "flags"),
                     tuple(rows), tuple(_budget_meta(cfg, spent)))]


def _keyrate_table(name, cfg, ens, res, extra_cols=(), extra=()):
    row = (res.rate, res.key_bits_z, res.key_bits_x, res.ec_cost_z, res.ec_cost_x,
           res.raw_key_z, res.raw_key_x, res.budget, ";".join(sorted(res.flags))) + tuple(extra)
    cols = ("rate", "key_bits_z", "key_bits_x", "ec_cost_z", "ec_cost_x", "raw_key_z", "raw_key_x",
            "epsilon_spent", "flags") + tuple(extra_cols)
    meta = _budget_meta(cfg, res.budget) + [("distance", repr(cfg.distance)), ("n", repr(cfg.n))]
    return ex.Table(name, cols, (row,), tuple(meta))


def mode_keyrate(cfg):
    tallies, ens = _tallies_for(cfg)
    if ens is None and tallies is None:
        opt = optimize_protocol(cfg.channel, cfg.n, cfg.epsilon, cfg.method, f=cfg.f, basis_prob=cfg.basis_prob)
        ens, res = opt.ensemble, opt.result
    else:
        ens = _need_ensemble(cfg)
        if tallies is None:
            tallies = expected_tallies(ens, cfg.channel, cfg.basis_prob)
        res = key_rate(tallies, ens, cfg.epsilon, cfg.method, cfg.f)
    pt = (ens.signal_intensity, ens.weak_intensity, ens.signal_share, ens.weak_share, ens.vacuum_share)
    return [_keyrate_table("keyrate", cfg, ens, res, ("mu", "nu", "q_signal", "q_weak", "q_vacuum"), pt)]


def mode_optimize(cfg):
    opt = optimize_protocol(cfg.channel, cfg.n, cfg.epsilon, cfg.method, f=cfg.f, basis_prob=cfg.basis_prob)
    ens = opt.ensemble
    t = _keyrate_table("optimize", cfg, ens, opt.result,
                       ("mu", "nu", "q_signal", "q_weak", "q_vacuum", "evaluations", "diagnostic"),
                       (ens.signal_intensity, ens.weak_intensity, ens.signal_share, ens.weak_share,
                        ens.vacuum_share, opt.evaluations, opt.diagnostic))
    return [t]


def mode_sweep(cfg):
    t = ex.sweep(cfg.channel, cfg.n, cfg.epsilon, cfg.distances, f=cfg.f, basis_prob=cfg.basis_prob,
                 workers=cfg.workers)
    return [t]


def mode_maxdist(cfg):
    return [ex.maxdist(cfg.channel, cfg.epsilon, cfg.n_values, f=cfg.f, basis_prob=cfg.basis_prob,
                       workers=cfg.workers)]


def mode_table2(cfg):
    return [ex.table2(cfg.n_sigma)]


def mode_figures(cfg):
    out = []
    for k in cfg.figures:
        if k == 1:
            out.append(ex.figure1())
        elif k == 2:
            out.append(ex.figure2(epsilon=cfg.epsilon))
        elif k == 3:
            out.append(ex.figure3(n_sigmas=cfg.n_sigma))
        elif k == 4:
            out.append(_renamed(mode_sweep(cfg)[0], "fig4"))
        else:
            out.append(_renamed(mode_maxdist(cfg)[0], "fig5"))
    return out


def _renamed(table, name):
    return ex.Table(name, table.columns, table.rows, table.metadata)


def mode_coverage(cfg):
    cover = ex.interval_coverage(cfg.coverage_means, cfg.coverage_eps, cfg.trials, cfg.seed,
                                 workers=cfg.workers)
    sound = ex.soundness_table(cfg.channel, cfg.n, cfg.coverage_eps, cfg.soundness_trials, cfg.seed,
                               cfg.method, cfg.basis_prob, cfg.workers, cfg.ensemble)
    return [cover, sound]


MODE_FUNCS = {
    "bounds": mode_bounds, "estimate": mode_estimate, "keyrate": mode_keyrate, "optimize": mode_optimize,
    "sweep": mode_sweep, "maxdist": mode_maxdist, "table2": mode_table2, "figures": mode_figures,
    "coverage": mode_coverage,
}


# ---------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def render(table: ex.Table, cfg: RunConfig, fmt: str) -> str:
    meta = [("table", table.name), ("mode", cfg.mode), ("method", cfg.method.value),
            ("config_sha256", cfg.digest())] + list(table.metadata)
    if fmt == "json":
        doc = {"metadata": dict(meta), "columns": list(table.columns),
               "rows": [[_json_value(v) for v in r] for r in table.rows]}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    for k, v in meta:
        buf.write(f"# {k} = {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _targets(tables, cfg: RunConfig) -> List:
    """``(path or None, table)`` pairs; ``None`` means stdout."""
    ext = "json" if cfg.format == "json" else "csv"
    if cfg.out is None:
        return [(None, t) for t in tables]
    if len(tables) == 1 and cfg.mode != "figures":
        return [(cfg.out, tables[0])]
    return [(os.path.join(cfg.out, f"{t.name}.{ext}"), t) for t in tables]


def write_outputs(tables, cfg: RunConfig, stdout) -> List[str]:
    """Write every table, then publish atomically; nothing stays behind on failure."""
    pending = []
    made_dir = None
    try:
        for path, t in _targets(tables, cfg):
            text = render(t, cfg, cfg.format)
            if path is None:
                pending.append((None, text))
                continue
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent):
                os.makedirs(parent)
                made_dir = made_dir or parent
            tmp = path + ".partial"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            pending.append((path, tmp))
        published = []
        for path, tmp in pending:
            if path is None:
                stdout.write(tmp)
            else:
                os.replace(tmp, path)
                published.append(path)
        return published
    except BaseException:
        for path, tmp in pending:
            if path is not None and os.path.exists(tmp):
                os.remove(tmp)
        if made_dir is not None and os.path.isdir(made_dir) and not os.listdir(made_dir):
            os.rmdir(made_dir)
        raise


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one mode and write its tables; returns the exit status."""
    stdout = stdout or sys.stdout
    tables = MODE_FUNCS[cfg.mode](cfg)
    write_outputs(tables, cfg, stdout)
    return EXIT_OK


def _error_record(kind: str, exc: BaseException, code: int) -> str:
    rec = {"error": kind, "message": str(exc), "exit_code": code}
    for attr in ("field", "line"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = v
    return json.dumps(rec, sort_keys=True)


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        return run(cfg, stdout)
    except UsageError as exc:
        stderr.write(_error_record("usage", exc, EXIT_USAGE) + "\n")
        return EXIT_USAGE
    except ValidationError as exc:
        stderr.write(_error_record(type(exc).__name__, exc, EXIT_VALIDATION) + "\n")
        return EXIT_VALIDATION
    except (DecoyFKError, ArithmeticError) as exc:
        # a method that cannot produce a number on valid input
        stderr.write(_error_record(type(exc).__name__, exc, EXIT_NUMERIC) + "\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        stderr.write(_error_record(type(exc).__name__, exc, EXIT_VALIDATION) + "\n")
        return EXIT_VALIDATION
    except OSError as exc:
        stderr.write(_error_record("io", exc, EXIT_VALIDATION) + "\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
