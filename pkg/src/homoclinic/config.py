"""Task configuration documents (TOML).

A document names one task and its inputs::

    task = "census-smooth"
    system = "cat_map"            # or "toral([[2,1],[1,1]])", "horseshoe(1/5, 5)", "henon(1.4, 0.3)"
    [params]
    eps = 0.05
    n_max = 16

Graphs are a preset name ("full2", "golden"), a path to a graph document, or
a table with ``matrix = [[...]]``.  Every table rejects unknown keys and all
defaults are filled in so they can be echoed into reports.
"""

from __future__ import annotations

import difflib
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .shift import GraphError, GraphFormatError, ShiftGraph, graph_from_spec, parse_graph, PRESETS
from .systems import AffineHorseshoe, HenonMap, NonHyperbolicError, TorusAutomorphism, cat_map, make_toral

TASKS = ("census-sft", "census-smooth", "periodic", "prime-orbits", "entropy", "verify")
TOP_KEYS = ("task", "name", "graph", "system", "params", "output")
OUTPUT_KEYS = ("dir",)
CLAIMS = ("log-type", "exp-type", "mendoza-eq", "prime-orbit", "katok")

# None marks a default that depends on the system and is resolved later
PARAMS = {
    "census-sft": {"n_max": 40, "n_min": 2, "pbar": None, "window": None},
    "census-smooth": {"p": [0, 0], "eps": None, "n_max": 12, "n_min": 0, "budget": 10 ** 7,
                      "max_gap": 0.1, "dedup_tol": 1e-9, "angle_min": 1e-3, "window": None,
                      "geometry": False},
    "periodic": {"n_max": 20, "n_min": 1, "w0": 0},
    "prime-orbits": {"n_max": 20},
    "entropy": {"sampler": None, "points": 10000, "n_range": None, "eps": None, "delta": 0.1, "seed": 0},
    "verify": {"claims": list(CLAIMS), "n_max": 60, "window": [20, 60], "prime_n": 20,
               "tol_log": 0.15, "tol_mendoza": None, "exp_spread": 1.0, "katok_tol": 0.10,
               "points": 10000, "n_range": None, "eps": None, "delta": 0.1, "seed": 0, "sampler": None},
}
NEEDS = {"census-sft": "graph", "census-smooth": "system", "prime-orbits": "graph", "entropy": "system"}


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = ""
        if field:
            where += f"field '{field}'"
        if line:
            where += (", " if where else "") + f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class TaskConfig:
    kind: str
    params: dict
    graph_spec: object = None
    system_spec: object = None
    name: str = ""
    out_dir: str = "."
    base_dir: str = "."
    graph: ShiftGraph | None = field(default=None, repr=False)
    system: object = field(default=None, repr=False)

    def echo(self) -> dict:
        """Fully resolved configuration for report headers."""
        return {"task": self.kind, "name": self.name, "graph": self.graph_spec, "system": self.system_spec,
                "params": self.params}


def _line_of(text: str, key: str):
    if not text:
        return None
    pat = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _suggest(key, allowed):
    close = difflib.get_close_matches(key, allowed, n=1, cutoff=0.5)
    if close:
        return close[0]
    pref = [a for a in allowed if key.startswith(a) or a.startswith(key)]
    return pref[0] if pref else None


def _check_keys(table: dict, allowed, text, prefix=""):
    for k in table:
        if k not in allowed:
            s = _suggest(k, list(allowed))
            hint = f"; did you mean '{s}'?" if s else ""
            raise ConfigError(f"unknown key '{k}'{hint}", _line_of(text, k), prefix + k)


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.S)


def parse_system(spec):
    """System from a string like ``horseshoe(1/5, 5)`` or a table with ``kind``."""
    if isinstance(spec, dict):
        spec = dict(spec)
        kind = spec.pop("kind", None)
        allowed = {"cat_map": (), "toral": ("matrix",), "horseshoe": ("kappa", "mu"), "henon": ("a", "b")}
        if kind not in allowed:
            raise ConfigError(f"unknown system kind {kind!r}; expected one of {sorted(allowed)}", field="system.kind")
        _check_keys(spec, allowed[kind], "", "system.")
        if kind == "cat_map":
            return cat_map()
        if kind == "toral":
            if "matrix" not in spec:
                raise ConfigError("toral system needs 'matrix'", field="system.matrix")
            return _toral(spec["matrix"])
        if kind == "horseshoe":
            return _horseshoe(spec.get("kappa", "1/5"), spec.get("mu", 5))
        return HenonMap(float(spec.get("a", 1.4)), float(spec.get("b", 0.3)))
    if not isinstance(spec, str):
        raise ConfigError("system must be a string or a table", field="system")
    m = _CALL.match(spec)
    if not m:
        raise ConfigError(f"cannot parse system {spec!r}", field="system")
    kind, args = m.group(1), m.group(2)
    if kind == "cat_map" and not args:
        return cat_map()
    if kind == "toral":
        import json
        try:
            return _toral(json.loads(args))
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"toral matrix must look like [[2,1],[1,1]]: {e}", field="system") from None
    parts = [a.strip() for a in args.split(",")] if args else []
    if kind == "horseshoe":
        if len(parts) not in (0, 2):
            raise ConfigError("horseshoe takes (kappa, mu)", field="system")
        return _horseshoe(*(parts or ("1/5", "5")))
    if kind == "henon":
        if len(parts) not in (0, 2):
            raise ConfigError("henon takes (a, b)", field="system")
        try:
            return HenonMap(*(float(p) for p in parts)) if parts else HenonMap()
        except ValueError as e:
            raise ConfigError(str(e), field="system") from None
    raise ConfigError(f"unknown system {kind!r}; expected cat_map, toral(matrix), horseshoe(kappa, mu) or henon(a, b)",
                      field="system")


def _toral(matrix):
    try:
        return make_toral(matrix)
    except NonHyperbolicError as e:
        raise ConfigError(str(e), field="system") from None
    except ValueError as e:
        raise ConfigError(str(e), field="system") from None


def _horseshoe(kappa, mu):
    try:
        return AffineHorseshoe(Fraction(str(kappa)), Fraction(str(mu)))
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(str(e), field="system") from None


def parse_graph_spec(spec, base_dir="."):
    if isinstance(spec, dict):
        _check_keys(spec, ("preset", "matrix", "file", "edges", "vertices"), "", "graph.")
        try:
            if "preset" in spec:
                return graph_from_spec(spec["preset"], base_dir)
            if "file" in spec:
                return graph_from_spec(spec["file"], base_dir)
            if "matrix" in spec:
                return ShiftGraph(spec["matrix"])
            if "edges" in spec:
                return ShiftGraph.from_edges(int(spec["vertices"]), [tuple(e) for e in spec["edges"]])
        except (GraphError, GraphFormatError, OSError, KeyError, ValueError, TypeError) as e:
            raise ConfigError(str(e), field="graph") from None
        raise ConfigError("graph table needs one of preset, file, matrix, edges", field="graph")
    if isinstance(spec, list):
        try:
            return ShiftGraph(spec)
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e), field="graph") from None
    if isinstance(spec, str):
        try:
            return graph_from_spec(spec, base_dir)
        except (GraphError, GraphFormatError, OSError, ValueError) as e:
            raise ConfigError(str(e), field="graph") from None
    raise ConfigError("graph must be a preset name, a path or a table", field="graph")


def _need_int(params, key, lo=None, hi=None, text=""):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"must be an integer, got {v!r}", _line_of(text, key), key)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}, got {v}", _line_of(text, key), key)
    if hi is not None and v > hi:
        raise ConfigError(f"must be <= {hi}, got {v}", _line_of(text, key), key)


def _need_real(params, key, lo=None, hi=None, text="", lo_open=True, hint=""):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"must be a number, got {v!r}", _line_of(text, key), key)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"must be {'>' if lo_open else '>='} {lo}, got {v}", _line_of(text, key), key)
    if hi is not None and v > hi:
        raise ConfigError(f"{v} is out of range: must be <= {hi:g}{hint}", _line_of(text, key), key)


def _eps_bound(system):
    if isinstance(system, (TorusAutomorphism, AffineHorseshoe)):
        return system.eps_bound()
    return None


def parse_config(document, kind: str | None = None, base_dir: str = ".", text: str | None = None) -> TaskConfig:
    """Validate a configuration.

    ``document`` is TOML text, a path to a TOML file, or an already parsed
    dict.  ``kind`` (from the CLI subcommand) must agree with the document's
    ``task`` when both are present.
    """
    if isinstance(document, dict):
        data = document
        text = text or ""
    else:
        if isinstance(document, os.PathLike) or (isinstance(document, str) and "\n" not in document
                                                 and os.path.isfile(document)):
            base_dir = os.path.dirname(os.path.abspath(str(document)))
            with open(document, "rb") as fh:
                raw = fh.read()
            text = raw.decode("utf-8")
        else:
            text = str(document)
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            m = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"malformed document: {e}", int(m.group(1)) if m else None) from None
    _check_keys(data, TOP_KEYS, text)
    task = data.get("task", kind)
    if task is None:
        raise ConfigError("missing required field", field="task")
    if task not in TASKS:
        s = _suggest(task, list(TASKS))
        raise ConfigError(f"unknown task {task!r}" + (f"; did you mean '{s}'?" if s else ""),
                          _line_of(text, "task"), "task")
    if kind is not None and task != kind:
        raise ConfigError(f"document is for task {task!r} but {kind!r} was requested", _line_of(text, "task"), "task")
    out = data.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("must be a table", _line_of(text, "output"), "output")
    _check_keys(out, OUTPUT_KEYS, text, "output.")
    raw = data.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("must be a table", _line_of(text, "params"), "params")
    defaults = PARAMS[task]
    _check_keys(raw, defaults, text, "")
    params = {**defaults, **raw}

    cfg = TaskConfig(task, params, data.get("graph"), data.get("system"),
                     str(data.get("name") or task.replace("-", "_")), out.get("dir", "."), base_dir)

    need = NEEDS.get(task)
    if need == "graph" and cfg.graph_spec is None:
        raise ConfigError("missing required field", field="graph")
    if need == "system" and cfg.system_spec is None:
        raise ConfigError("missing required field", field="system")
    if task == "periodic" and cfg.graph_spec is None and cfg.system_spec is None:
        raise ConfigError("periodic needs a graph or a toral system", field="graph")
    if task == "verify" and cfg.graph_spec is None:
        cfg.graph_spec = "full2"
    if cfg.graph_spec is not None:
        cfg.graph = parse_graph_spec(cfg.graph_spec, base_dir)
    if cfg.system_spec is not None:
        cfg.system = parse_system(cfg.system_spec)
    _validate_params(cfg, text)
    return cfg


def _validate_params(cfg: TaskConfig, text: str):
    p, kind = cfg.params, cfg.kind
    if kind == "verify":
        bad = [c for c in p["claims"] if c not in CLAIMS]
        if bad:
            s = _suggest(bad[0], list(CLAIMS))
            raise ConfigError(f"unknown claim {bad[0]!r}" + (f"; did you mean '{s}'?" if s else ""),
                              _line_of(text, "claims"), "claims")
        if "katok" in p["claims"] and cfg.system is None:
            cfg.system_spec = "horseshoe(1/5, 5)"
            cfg.system = parse_system(cfg.system_spec)
    system = cfg.system
    if "n_max" in p:
        _need_int(p, "n_max", 0, 100000, text)
    if "n_min" in p:
        _need_int(p, "n_min", 0, p["n_max"], text)
    for key in ("budget", "points"):
        if key in p:
            _need_int(p, key, 1, None, text)
    if "seed" in p:
        _need_int(p, "seed", 0, 2 ** 64 - 1, text)
    if "delta" in p:
        _need_real(p, "delta", 0, None, text)
        if not p["delta"] < 1:
            raise ConfigError(f"must be < 1, got {p['delta']}", _line_of(text, "delta"), "delta")
    for key in ("max_gap", "dedup_tol", "angle_min"):
        if key in p:
            _need_real(p, key, 0, None, text)
    for key in ("window", "n_range"):
        if key in p and p[key] is not None:
            w = p[key]
            if not (isinstance(w, list) and len(w) == 2 and all(isinstance(v, int) for v in w) and w[0] <= w[1]):
                raise ConfigError("must be a pair [lo, hi] of integers with lo <= hi", _line_of(text, key), key)
    if kind == "census-sft":
        g = cfg.graph
        if p["pbar"] is None:
            from .shift import connect
            cyc = connect(g, 0, 0)
            p["pbar"] = [0] if len(cyc) == 1 else list(cyc[:-1])
        word = p["pbar"]
        if not (isinstance(word, list) and word and all(isinstance(v, int) and 0 <= v < g.vertex_count for v in word)):
            raise ConfigError("must be a nonempty list of vertex indices", _line_of(text, "pbar"), "pbar")
        if not g.is_admissible(word + word[:1]):
            raise ConfigError(f"{word} is not a cycle of the graph", _line_of(text, "pbar"), "pbar")
        if p["window"] is None:
            # skip the short-word transient at the bottom of the table
            p["window"] = [max(p["n_min"], p["n_max"] // 4), p["n_max"]]
    if kind in ("census-smooth", "entropy", "verify") and system is not None:
        if kind == "census-smooth" and not isinstance(system, (TorusAutomorphism, AffineHorseshoe)):
            raise ConfigError("census-smooth needs a toral or horseshoe system (the Henon map has no certificate)",
                              field="system")
        if p.get("eps") is None:
            if isinstance(system, TorusAutomorphism):
                p["eps"] = 0.05 if kind == "census-smooth" else 0.1
            elif isinstance(system, AffineHorseshoe):
                p["eps"] = 0.5 if kind == "census-smooth" else 0.4
            else:
                p["eps"] = 0.1
        bound = _eps_bound(system)
        _need_real(p, "eps", 0, bound, text,
                   hint=f" (safe radius {bound:g} for {getattr(system, 'name', 'this system')})" if bound else "")
    if kind in ("entropy", "verify"):
        if p.get("sampler") is None:
            p["sampler"] = "bernoulli" if isinstance(system, AffineHorseshoe) else "lebesgue"
        allowed = ("lebesgue", "bernoulli", "bernoulli-iid", "bernoulli-two-sided")
        if p["sampler"] not in allowed:
            raise ConfigError(f"unknown sampler {p['sampler']!r}; expected one of {allowed}",
                              _line_of(text, "sampler"), "sampler")
        if p["sampler"].startswith("bernoulli") and system is not None and not isinstance(system, AffineHorseshoe):
            raise ConfigError("Bernoulli sampling needs the horseshoe", _line_of(text, "sampler"), "sampler")
        if p["sampler"] == "lebesgue" and isinstance(system, AffineHorseshoe):
            raise ConfigError("Lebesgue samples escape the horseshoe; use a bernoulli sampler",
                              _line_of(text, "sampler"), "sampler")
        if isinstance(system, HenonMap):
            raise ConfigError("entropy sampling needs a toral or horseshoe system", field="system")
        if p.get("n_range") is None:
            p["n_range"] = [6, 14] if isinstance(system, AffineHorseshoe) else [4, 12]
        if p["n_range"][1] - p["n_range"][0] < 3:
            raise ConfigError("needs at least 4 values of n", _line_of(text, "n_range"), "n_range")
        if p["n_range"][0] < 1:
            raise ConfigError("n must start at 1 or later", _line_of(text, "n_range"), "n_range")
    if kind == "census-smooth":
        pt = p["p"]
        if not (isinstance(pt, list) and len(pt) == 2):
            raise ConfigError("must be a point [x, y]", _line_of(text, "p"), "p")
        p["p"] = [str(Fraction(str(v))) for v in pt]
    if kind == "periodic":
        if cfg.graph is not None:
            _need_int(p, "w0", 0, cfg.graph.vertex_count - 1, text)
        elif not isinstance(system, TorusAutomorphism):
            raise ConfigError("periodic counts need a graph or a toral system", field="system")
        if p["n_min"] < 1:
            raise ConfigError("must be >= 1", _line_of(text, "n_min"), "n_min")
    if kind == "prime-orbits" and p["n_max"] < 1:
        raise ConfigError("must be >= 1", _line_of(text, "n_max"), "n_max")
