"""Command-line front end: ``homoclinic <task> --config FILE --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
budget was exhausted; partial outputs are written and flagged).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

from .census import CensusTable, fmt_real, growth_rate
from .config import TASKS, ConfigError, TaskConfig, parse_config
from .entropy import bernoulli_sample, katok_entropy, lebesgue_sample
from .manifolds import BudgetExceeded, census_smooth, dump_geometry, fundamental_domain, grow, local_manifold
from .report import (
    VerificationReport, compare_to_theory, dumps, katok_claim, prime_orbit_claim, write_atomic,
)
from .shift import (
    GraphError, SymbolicPoint, homoclinic_census_table, periodic_census_table, prime_orbit_census,
    spectral_entropy,
)
from .systems import AffineHorseshoe, EscapeError, TorusAutomorphism, system_metadata

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class TaskError(RuntimeError):
    pass


def _slope(table, window):
    try:
        s, d = growth_rate(table, window)
        return s, d
    except ValueError as e:
        return None, {"error": str(e)}


def _write(cfg: TaskConfig, suffix: str, text: str) -> str:
    path = os.path.join(cfg.out_dir, cfg.name + suffix)
    write_atomic(path, text)
    return path


def _header(cfg: TaskConfig) -> dict:
    return {"schema": 1, "task": cfg.kind, "config": cfg.echo()}


def _system_entropy(system) -> float:
    if isinstance(system, TorusAutomorphism):
        return math.log(system.expansion)
    if isinstance(system, AffineHorseshoe):
        return math.log(2)
    raise TaskError("no reference entropy for this system")


def _symbolic_table(cfg: TaskConfig, n_min: int, n_max: int):
    g = cfg.graph
    h = spectral_entropy(g)
    word = tuple(cfg.params.get("pbar") or [0])
    tab = homoclinic_census_table(g, SymbolicPoint.periodic(word), n_max, n_min=n_min)
    tab.metadata.update({"graph": cfg.graph_spec, "pbar": list(word), "localization": "exp(-1)"})
    return tab, h


def run_census_sft(cfg: TaskConfig, threads=1):
    p = cfg.params
    tab, h = _symbolic_table(cfg, p["n_min"], p["n_max"])
    slope, diag = _slope(tab, tuple(p["window"]))
    csv = _write(cfg, ".csv", tab.to_csv(h=h))
    summary = dict(_header(cfg), entropy=h, slope=slope, growth=diag, rows=len(tab), truncated=False,
                   csv=os.path.basename(csv))
    _write(cfg, ".json", dumps(summary))
    return EXIT_OK


def run_census_smooth(cfg: TaskConfig, threads=1):
    p = cfg.params
    system = cfg.system
    pt = tuple(Fraction(v) for v in p["p"])
    tab = census_smooth(system, pt, p["eps"], p["n_max"], p["budget"], p["max_gap"], p["angle_min"],
                        p["dedup_tol"], p["n_min"])
    h = _system_entropy(system)
    window = tuple(p["window"]) if p["window"] else None
    slope, diag = _slope(tab, window) if len(tab) else (None, {"error": "empty table"})
    csv = _write(cfg, ".csv", tab.to_csv(h=h, extra_columns=("angle_min_observed", "dedup_merges")))
    summary = dict(_header(cfg), entropy=h, slope=slope, growth=diag, rows=len(tab), truncated=tab.truncated,
                   truncated_reason=tab.metadata.get("truncated_reason"),
                   complete_through=max(tab.ns) if tab.ns else None, system=system_metadata(system),
                   csv=os.path.basename(csv))
    if p["geometry"]:
        wu = local_manifold(system, pt, p["eps"], "unstable", p["max_gap"])
        ws = fundamental_domain(system, pt, p["eps"], "stable", p["max_gap"])
        try:
            ws = grow(system, ws, -(max(tab.ns) if tab.ns else 0), p["budget"])
        except BudgetExceeded as e:
            ws = e.partial
        _write(cfg, "_geometry.txt", dump_geometry(wu) + dump_geometry(ws))
        summary["geometry"] = cfg.name + "_geometry.txt"
    _write(cfg, ".json", dumps(summary))
    return EXIT_NUMERIC if tab.truncated else EXIT_OK


def _toral_periodic_count(system: TorusAutomorphism, n: int) -> int:
    (a, b), (c, d) = system.power(n)
    return abs((a - 1) * (d - 1) - b * c)


def run_periodic(cfg: TaskConfig, threads=1):
    p = cfg.params
    if cfg.graph is not None:
        tab = periodic_census_table(cfg.graph, p["w0"], p["n_max"], n_min=p["n_min"])
        h = spectral_entropy(cfg.graph)
    else:
        system = cfg.system
        tab = CensusTable(metadata={"system": system_metadata(system)})
        for n in range(p["n_min"], p["n_max"] + 1):
            tab.add(n, _toral_periodic_count(system, n))
        h = _system_entropy(system)
    csv = _write(cfg, ".csv", tab.to_csv(h=h))
    slope, diag = _slope(tab, None) if len(tab) >= 3 else (None, {})
    _write(cfg, ".json", dumps(dict(_header(cfg), entropy=h, slope=slope, rows=len(tab), truncated=False,
                                    csv=os.path.basename(csv))))
    return EXIT_OK


def run_prime_orbits(cfg: TaskConfig, threads=1):
    n_max = cfg.params["n_max"]
    g = cfg.graph
    h = spectral_entropy(g)
    per, _ = prime_orbit_census(g, n_max)
    lines = ["n,per_period,cumulative,least_period_ratio,cumulative_ratio"]
    cum = 0
    for n in range(1, n_max + 1):
        cum += per[n]
        lp = math.exp(math.log(per[n] * n) - n * h) if per[n] else 0.0
        cr = math.exp(math.log(cum) + math.log(n * h) - n * h) if cum and h > 0 else None
        lines.append(f"{n},{per[n]},{cum},{fmt_real(lp)},{fmt_real(cr)}")
    csv = _write(cfg, ".csv", "\n".join(lines) + "\n")
    _write(cfg, ".json", dumps(dict(_header(cfg), entropy=h, cumulative=cum, truncated=False,
                                    csv=os.path.basename(csv))))
    return EXIT_OK


def _sample(cfg: TaskConfig):
    p = cfg.params
    system = cfg.system
    horizon = p["n_range"][1]
    if p["sampler"] == "lebesgue":
        return lebesgue_sample(system, p["points"], horizon, p["seed"])
    return bernoulli_sample(system, p["points"], horizon, p["seed"],
                            stratified=p["sampler"] == "bernoulli",
                            two_sided=p["sampler"] == "bernoulli-two-sided")


def run_entropy(cfg: TaskConfig, threads=1):
    p = cfg.params
    sample = _sample(cfg)
    rep = katok_entropy(cfg.system, sample, tuple(p["n_range"]), p["eps"], p["delta"], threads)
    csv = _write(cfg, ".csv", rep.to_csv())
    target = None
    try:
        target = _system_entropy(cfg.system)
    except TaskError:
        pass
    summary = dict(_header(cfg), **rep.summary(), target_entropy=target, truncated=False,
                   system=system_metadata(cfg.system), csv=os.path.basename(csv))
    _write(cfg, ".json", dumps(summary))
    return EXIT_OK


def run_verify(cfg: TaskConfig, threads=1):
    p = cfg.params
    claims = p["claims"]
    report = VerificationReport(header=_header(cfg))
    if cfg.graph is not None and any(c in claims for c in ("log-type", "exp-type", "mendoza-eq")):
        if cfg.params.get("pbar") is None:
            from .shift import connect
            cyc = connect(cfg.graph, 0, 0)
            cfg.params["pbar"] = [0] if len(cyc) == 1 else list(cyc[:-1])
        tab, h = _symbolic_table(cfg, 2, p["n_max"])
        sub = compare_to_theory(tab, {"entropy": h, "graph": cfg.graph_spec}, tuple(p["window"]),
                                p["tol_log"], p["tol_mendoza"], p["exp_spread"])
        report.claims.extend(c for c in sub.claims if c.id in claims)
    if "prime-orbit" in claims and cfg.graph is not None:
        h = spectral_entropy(cfg.graph)
        per, _ = prime_orbit_census(cfg.graph, p["prime_n"])
        report.add(prime_orbit_claim(per, p["prime_n"], h))
    if "katok" in claims:
        sample = _sample(cfg)
        rep = katok_entropy(cfg.system, sample, tuple(p["n_range"]), p["eps"], p["delta"], threads)
        h = _system_entropy(cfg.system)
        report.add(katok_claim(rep.estimate, h, p["katok_tol"], rep.summary()))
    _write(cfg, ".json", report.to_json())
    return EXIT_OK


RUNNERS = {
    "census-sft": run_census_sft,
    "census-smooth": run_census_smooth,
    "periodic": run_periodic,
    "prime-orbits": run_prime_orbits,
    "entropy": run_entropy,
    "verify": run_verify,
}


def run(task: TaskConfig, threads: int = 1) -> int:
    """Execute a validated task, write its artifacts, and return the exit code."""
    try:
        return RUNNERS[task.kind](task, threads)
    except EscapeError as e:
        print(f"error: orbit left the domain: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homoclinic", description="Homoclinic censuses and entropy checks.")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        sp = sub.add_parser(t)
        sp.add_argument("--config", help="TOML task document")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="sampler seed (unsigned 64-bit)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for independent sub-tasks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = args.config if args.config else {}
        cfg = parse_config(doc, kind=args.task)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("must be an unsigned 64-bit integer", field="--seed")
            if "seed" in cfg.params:
                cfg.params["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("must be >= 1", field="--threads")
        if args.out:
            cfg.out_dir = args.out
        elif args.config and not os.path.isabs(cfg.out_dir):
            cfg.out_dir = os.path.join(cfg.base_dir, cfg.out_dir)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg, args.threads)
    if code == EXIT_NUMERIC:
        print("warning: budget exhausted; partial results written and flagged", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
