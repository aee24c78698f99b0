"""Run-file driven command line front end for the solvers.

A run is described by a plain UTF-8 text file of ``key = value`` lines
(``#`` starts a comment, blank lines are ignored).  The ``task`` key picks
the computation; the remaining keys supply potentials, grids, quadrature
orders, energies, and tolerances.  Unknown keys are rejected with the
offending line, so a typo never silently falls back to a default.

Keys and value syntax:

    task         pair | bound3 | scatter3 | bound4 | chains | sweep
    system       boson | fermion32 | fermion12        (default boson)
    potential    comma-separated terms "shape strength range", shape one
                 of gaussian, yukawa, exponential
    grid_x       "n q_max mapping [parameter]"; mapping uniform,
    grid_y       geometric (parameter = ratio), or tangent (parameter =
    grid_z       stretch scale); n is the interval count, >= 2
    quad         angular quadrature order for the three-body kernel (10)
    quad_u       first and second rotation-stage orders for the
    quad_v       four-body kernel (10 each)
    energy_guess eigenvalue search start for the bound tasks
    pair_guess   pair eigenvalue guess for scatter3
    momentum     relative 1+2 momentum for scatter3 (> 0)
    momenta      space-separated momentum list for a scatter3 sweep
    grid_sizes   space-separated interval counts for a convergence sweep
    sweep_task   which task a sweep repeats (pair, bound3, bound4,
                 scatter3)
    threshold    breakup threshold passed to the four-body solver (0)
    tol_e        eigenvalue tolerance (1e-9)
    inner_tol    linear-solver residual tolerance (1e-10)
    unit_scale   optional energy unit (the hbar^2/m value); when present,
                 energies are also reported multiplied by it
    out          output directory (the --out flag takes precedence)

Each run writes one JSON record ``{"config": ..., "result": ...,
"meta": ...}``.  The config echo and the result block are byte-for-byte
reproducible for a fixed config and worker count; the trailing meta block
carries the timestamp, versions, and wall times, which is everything that
may legitimately differ between reruns.  Numeric fields are serialized
with 17 significant digits.  Sweeps additionally write a CSV (header row,
comma separators, LF line endings); the chains task writes DOT trees when
--dot is given.

Exit codes: 0 success, 2 config or usage error, 3 solver failure (the
failure is still recorded in the JSON).

The --workers flag (or the FYSOLVE_WORKERS variable) pins the thread
count of the numerical backend.  It takes effect because the package
imports its numerical modules lazily: the pin happens before numpy first
loads, which is the only moment the backend reads it.  Calling run()
from a process that already imported numpy leaves the thread count
whatever it already was; the value is still recorded in the meta block.
"""

import argparse
import difflib
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from . import __version__

__all__ = [
    "ConfigError",
    "RunConfig",
    "ResultRecord",
    "load_config",
    "emit_config",
    "run",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_TASKS = ("pair", "bound3", "scatter3", "bound4", "chains", "sweep")
_SYSTEMS = {"boson": "boson_L0", "fermion32": "fermion_J3/2",
            "fermion12": "fermion_J1/2"}
_SHAPES = ("gaussian", "yukawa", "exponential")
_MAPPINGS = ("uniform", "geometric", "tangent")


class ConfigError(ValueError):
    """Config parse or schema failure; the message names file and line."""


@dataclass(frozen=True)
class RunConfig:
    """One validated run: every key of the file, defaults filled.

    Fields that the task does not use stay at their defaults and are
    excluded from the echo, so two files describing the same run produce
    identical records.
    """

    task: str
    system: str = "boson"
    potential: tuple = ()
    grid_x: tuple = None
    grid_y: tuple = None
    grid_z: tuple = None
    quad: int = 10
    quad_u: int = 10
    quad_v: int = 10
    energy_guess: float = None
    pair_guess: float = None
    momentum: float = None
    momenta: tuple = None
    grid_sizes: tuple = None
    sweep_task: str = None
    n_bodies: int = None
    threshold: float = 0.0
    tol_e: float = 1e-9
    inner_tol: float = 1e-10
    unit_scale: float = None
    out: str = None


@dataclass(frozen=True)
class ResultRecord:
    """One completed (or failed) run: config echo, outputs, provenance."""

    config: dict
    result: dict
    meta: dict
    paths: tuple = ()

    @property
    def ok(self):
        return self.result.get("status") == "ok"

    def json_text(self):
        # meta deliberately last: everything before it is reproducible,
        # so rerun comparison is a byte prefix check
        return _json_text({"config": self.config, "result": self.result,
                           "meta": self.meta}) + "\n"


# ------------------------------------------------------------ value parsers


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError("expected a number, got %r" % text)


def _parse_positive(text):
    v = _parse_float(text)
    if not v > 0.0:
        raise ValueError("must be > 0, got %g" % v)
    return v


def _parse_int(text, minimum):
    try:
        v = int(text)
    except ValueError:
        raise ValueError("expected an integer, got %r" % text)
    if v < minimum:
        raise ValueError("must be >= %d, got %d" % (minimum, v))
    return v


def _parse_choice(choices):
    def parse(text):
        if text not in choices:
            raise ValueError("expected one of %s, got %r"
                             % ("|".join(choices), text))
        return text
    return parse


def _parse_potential(text):
    terms = []
    for part in text.split(","):
        tokens = part.split()
        if len(tokens) != 3:
            raise ValueError("each term needs 'shape strength range', "
                             "got %r" % part.strip())
        shape, strength, rng = tokens
        if shape not in _SHAPES:
            raise ValueError("unknown shape %r (expected %s)"
                             % (shape, "|".join(_SHAPES)))
        terms.append((shape, _parse_float(strength), _parse_positive(rng)))
    return tuple(terms)


def _parse_grid(text):
    tokens = text.split()
    if len(tokens) not in (3, 4):
        raise ValueError("expected 'n q_max mapping [parameter]', got %r"
                         % text)
    n = _parse_int(tokens[0], 2)
    q_max = _parse_positive(tokens[1])
    mapping = tokens[2]
    if mapping not in _MAPPINGS:
        raise ValueError("unknown mapping %r (expected %s)"
                         % (mapping, "|".join(_MAPPINGS)))
    param = None
    if len(tokens) == 4:
        if mapping == "uniform":
            raise ValueError("uniform mapping takes no parameter")
        param = _parse_positive(tokens[3])
    return (n, q_max, mapping, param)


def _parse_floats(text):
    values = tuple(_parse_positive(t) for t in text.split())
    if not values:
        raise ValueError("expected at least one value")
    return values


def _parse_ints(text):
    values = tuple(_parse_int(t, 2) for t in text.split())
    if not values:
        raise ValueError("expected at least one value")
    return values


_SCHEMA = {
    "task": _parse_choice(_TASKS),
    "system": _parse_choice(tuple(_SYSTEMS)),
    "potential": _parse_potential,
    "grid_x": _parse_grid,
    "grid_y": _parse_grid,
    "grid_z": _parse_grid,
    "quad": lambda t: _parse_int(t, 1),
    "quad_u": lambda t: _parse_int(t, 1),
    "quad_v": lambda t: _parse_int(t, 1),
    "energy_guess": _parse_float,
    "pair_guess": _parse_float,
    "momentum": _parse_positive,
    "momenta": _parse_floats,
    "grid_sizes": _parse_ints,
    "sweep_task": _parse_choice(("pair", "bound3", "bound4", "scatter3")),
    "n_bodies": lambda t: _parse_int(t, 2),
    "threshold": _parse_float,
    "tol_e": _parse_positive,
    "inner_tol": _parse_positive,
    "unit_scale": _parse_positive,
    "out": lambda t: t,
}

# canonical key order for echo and emission
_KEY_ORDER = ("task", "system", "sweep_task", "n_bodies", "potential",
              "grid_x", "grid_y", "grid_z", "grid_sizes", "quad", "quad_u",
              "quad_v", "energy_guess", "pair_guess", "momentum", "momenta",
              "threshold", "tol_e", "inner_tol", "unit_scale", "out")


def _task_keys(task, sweep_task):
    """(required, optional) key sets for a task; sweeps inherit from the
    repeated task with the swept quantity replacing its scalar."""
    table = {
        "pair": ({"potential", "grid_x", "energy_guess"},
                 {"tol_e"}),
        "bound3": ({"potential", "grid_x", "grid_y", "energy_guess"},
                   {"system", "quad", "tol_e", "inner_tol"}),
        "scatter3": ({"potential", "grid_x", "grid_y", "pair_guess",
                      "momentum"},
                     {"system", "quad", "inner_tol"}),
        "bound4": ({"potential", "grid_x", "grid_y", "grid_z",
                    "energy_guess"},
                   {"quad_u", "quad_v", "threshold", "tol_e", "inner_tol"}),
        "chains": ({"n_bodies"}, set()),
    }
    if task == "chains":
        req, opt = table["chains"]
        return set(req), set(opt) | {"out"}
    if task == "sweep":
        req, opt = table[sweep_task]
        req = set(req) | {"sweep_task"}
        if sweep_task == "scatter3":
            req = (req - {"momentum"}) | {"momenta"}
        else:
            req = req | {"grid_sizes"}
        return req, set(opt) | {"out", "unit_scale"}
    req, opt = table[task]
    return set(req), set(opt) | {"out", "unit_scale"}


def load_config(path):
    """Parse and validate a run file; defaults filled.

    Raises ConfigError with file, line, and (for malformed lines) column
    on any parse or schema violation, naming the offending key.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError("cannot read config %s: %s" % (path, err))
    except UnicodeDecodeError as err:
        raise ConfigError("%s is not UTF-8: %s" % (path, err))

    entries = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError("%s:%d:%d: expected 'key = value'"
                             % (path, ln, col))
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("%s:%d:1: missing key before '='" % (path, ln))
        if key not in _SCHEMA:
            hint = difflib.get_close_matches(key, _SCHEMA, n=1)
            extra = "; did you mean %r" % hint[0] if hint else ""
            raise ConfigError("%s:%d: unknown key %r%s"
                             % (path, ln, key, extra))
        if key in entries:
            raise ConfigError("%s:%d: duplicate key %r (first at line %d)"
                             % (path, ln, key, entries[key][1]))
        if not value:
            raise ConfigError("%s:%d: key %r has no value" % (path, ln, key))
        entries[key] = (value, ln)

    if "task" not in entries:
        raise ConfigError("%s: missing required key 'task'" % path)

    values = {}
    for key, (value, ln) in entries.items():
        try:
            values[key] = _SCHEMA[key](value)
        except ValueError as err:
            raise ConfigError("%s:%d: key %r: %s" % (path, ln, key, err))

    task = values["task"]
    sweep_task = values.get("sweep_task")
    if task == "sweep" and sweep_task is None:
        raise ConfigError("%s: task 'sweep' needs the 'sweep_task' key"
                         % path)
    required, optional = _task_keys(task, sweep_task)
    allowed = required | optional | {"task"}
    for key, (_, ln) in entries.items():
        if key not in allowed:
            raise ConfigError("%s:%d: key %r is not used by task %r"
                             % (path, ln, key, task))
    missing = sorted(required - set(entries))
    if missing:
        raise ConfigError("%s: task %r is missing required key(s): %s"
                         % (path, task, ", ".join(missing)))

    if task == "scatter3" or (task == "sweep" and sweep_task == "scatter3"):
        if values.get("system", "boson") == "fermion12":
            ln = entries["system"][1]
            raise ConfigError("%s:%d: scatter3 supports single-amplitude "
                             "systems only (boson, fermion32)" % (path, ln))
    return RunConfig(**values)


def _format_value(key, value):
    if key == "potential":
        return ", ".join("%s %r %r" % t for t in value)
    if key in ("grid_x", "grid_y", "grid_z"):
        n, q_max, mapping, param = value
        text = "%d %r %s" % (n, q_max, mapping)
        if param is not None:
            text += " %r" % param
        return text
    if key in ("momenta", "grid_sizes"):
        return " ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _applicable(config):
    required, optional = _task_keys(config.task, config.sweep_task)
    keys = {"task"} | required | optional
    out = []
    for key in _KEY_ORDER:
        if key not in keys:
            continue
        value = getattr(config, key)
        if value is None and key in optional:
            continue
        out.append((key, value))
    return out


def emit_config(config):
    """Canonical run-file text; load_config(emit_config(c)) == c."""
    return "".join("%s = %s\n" % (key, _format_value(key, value))
                   for key, value in _applicable(config))


def _config_echo(config):
    echo = {}
    for key, value in _applicable(config):
        if key == "potential":
            value = [list(t) for t in value]
        elif key in ("grid_x", "grid_y", "grid_z"):
            value = list(value)
        elif isinstance(value, tuple):
            value = list(value)
        echo[key] = value
    return echo


# -------------------------------------------------------- deterministic JSON


def _json_scalar(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return json.dumps(str(value))
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError("cannot serialize %r" % type(value))


def _json_text(obj, indent=0):
    """JSON with dict order preserved and floats at 17 significant digits.

    The stdlib encoder prints floats with shortest-roundtrip repr, which
    is value-deterministic but not the documented digit contract; this
    writer is both, and byte-stable by construction.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = ["%s%s: %s" % (inner, _json_scalar(str(k)),
                               _json_text(v, indent + 1))
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [inner + _json_text(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    return _json_scalar(obj)


# --------------------------------------------------------------- task runners


def _build_potential(config):
    from .twobody import PotentialSpec
    return PotentialSpec.uniform(config.potential)


def _build_grid(spec):
    from .basis import make_grid
    n, q_max, mapping, param = spec
    kwargs = {}
    if param is not None:
        kwargs["ratio" if mapping == "geometric" else "scale"] = param
    return make_grid(n, q_max, mapping=mapping, **kwargs)


def _with_intervals(spec, n):
    return (n,) + tuple(spec[1:])


def _scaled(config, result):
    if config.unit_scale is not None and "energy" in result:
        result["energy_scaled"] = config.unit_scale * result["energy"]
    return result


def _stat_fields(stats):
    return {"iterations": int(stats.iterations),
            "residual": float(stats.residual),
            "restarts": int(stats.restarts),
            "converged": bool(stats.converged)}


def _run_pair(config):
    from .twobody import solve_pair
    sol = solve_pair(_build_potential(config), _build_grid(config.grid_x),
                     config.energy_guess, tol_E=config.tol_e)
    return _scaled(config, {"status": "ok", "energy": sol.energy})


def _bound3_problem(config, n_override=None):
    from .basis import gauss_legendre
    from .fy3 import Problem3, system3
    gx = config.grid_x if n_override is None else _with_intervals(
        config.grid_x, n_override)
    gy = config.grid_y if n_override is None else _with_intervals(
        config.grid_y, n_override)
    return Problem3(system=system3(_SYSTEMS[config.system],
                                   _build_potential(config)),
                    grid_x=_build_grid(gx), grid_y=_build_grid(gy),
                    quad=gauss_legendre(config.quad),
                    energy=config.energy_guess)


def _run_bound3(config, n_override=None):
    from .fy3 import solve_bound3
    res = solve_bound3(_bound3_problem(config, n_override),
                       config.energy_guess, tol_E=config.tol_e,
                       inner_tol=config.inner_tol)
    out = {"status": "ok", "energy": res.energy}
    out.update(_stat_fields(res.stats))
    return _scaled(config, out)


def _scatter3_parts(config):
    from .twobody import solve_pair
    spec = _build_potential(config)
    grid_x = _build_grid(config.grid_x)
    pair = solve_pair(spec, grid_x, config.pair_guess, tol_E=config.tol_e)
    return spec, grid_x, pair


def _run_scatter3_point(config, spec, grid_x, pair, p):
    from .basis import gauss_legendre
    from .fy3 import Problem3, solve_elastic3, system3
    energy = pair.energy + p * p
    if not energy < 0.0:
        raise ValueError("momentum %g puts the working energy %g at or "
                         "above breakup (pair energy %g)"
                         % (p, energy, pair.energy))
    problem = Problem3(system=system3(_SYSTEMS[config.system], spec),
                       grid_x=grid_x, grid_y=_build_grid(config.grid_y),
                       quad=gauss_legendre(config.quad), energy=energy,
                       mode="elastic", pair=pair)
    return solve_elastic3(problem, inner_tol=config.inner_tol)


def _run_scatter3(config):
    spec, grid_x, pair = _scatter3_parts(config)
    res = _run_scatter3_point(config, spec, grid_x, pair, config.momentum)
    out = {"status": "ok", "pair_energy": pair.energy, "energy": res.energy,
           "momentum": config.momentum, "tan_delta": res.tan_delta}
    out.update(_stat_fields(res.stats))
    if config.unit_scale is not None:
        out["energy_scaled"] = config.unit_scale * res.energy
    return out


def _bound4_problem(config, n_override=None):
    from .basis import gauss_legendre
    from .fy4 import Problem4
    specs = (config.grid_x, config.grid_y, config.grid_z)
    if n_override is not None:
        specs = tuple(_with_intervals(s, n_override) for s in specs)
    gx, gy, gz = (_build_grid(s) for s in specs)
    return Problem4(potential=_build_potential(config), grid_x=gx,
                    grid_y=gy, grid_z=gz,
                    quad_u=gauss_legendre(config.quad_u),
                    quad_v=gauss_legendre(config.quad_v),
                    energy_guess=config.energy_guess)


def _run_bound4(config, n_override=None):
    from .fy4 import solve_bound4
    res = solve_bound4(_bound4_problem(config, n_override),
                       threshold=config.threshold, tol_E=config.tol_e,
                       inner_tol=config.inner_tol)
    out = {"status": "ok", "energy": res.energy}
    out.update(_stat_fields(res.stats))
    return _scaled(config, out)


def _run_chains(config, dot_path):
    from .chains import (chain_count, class_count_estimate, classify_chains,
                         emit_tree, enumerate_chains)
    n = config.n_bodies
    chains = enumerate_chains(n)
    classes = classify_chains(chains)
    assert len(chains) == chain_count(n)
    result = {"status": "ok", "n_bodies": n, "chains": len(chains),
              "classes": len(classes),
              "class_sizes": [c.members for c in classes],
              "class_count_estimate": class_count_estimate(n)}
    paths = []
    if dot_path:
        text = "\n".join(emit_tree(c.canonical_form) for c in classes)
        with open(dot_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(dot_path)
        result["dot"] = os.path.basename(dot_path)
    return result, paths


def _csv_text(header, rows):
    def cell(v):
        if isinstance(v, float):
            return format(v, ".17g")
        return str(v)
    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _run_sweep(config, out_dir):
    sub = config.sweep_task
    if sub == "scatter3":
        spec, grid_x, pair = _scatter3_parts(config)
        header = ("E", "p", "tan_delta", "iterations")
        rows = []
        for p in config.momenta:
            res = _run_scatter3_point(config, spec, grid_x, pair, p)
            rows.append((res.energy, p, res.tan_delta,
                         int(res.stats.iterations)))
    else:
        header = ("n", "energy", "iterations")
        rows = []
        for n in config.grid_sizes:
            if sub == "pair":
                point = _run_pair(replace(
                    config, grid_x=_with_intervals(config.grid_x, n)))
            elif sub == "bound3":
                point = _run_bound3(config, n_override=n)
            else:
                point = _run_bound4(config, n_override=n)
            rows.append((n, point["energy"], point.get("iterations", 0)))
    csv_name = "sweep.csv"
    csv_path = os.path.join(out_dir, csv_name)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(header, rows))
    return {"status": "ok", "sweep_task": sub, "rows": len(rows),
            "columns": list(header), "csv": csv_name}, [csv_path]


def run(config, out_dir=None, dot_path=None, workers=None):
    """Dispatch a validated config and persist its JSON record.

    Solver failures are caught, recorded in the result block with a
    failed status, and reported through ResultRecord.ok; config-level
    problems raise ConfigError instead and leave no record.
    """
    if dot_path and config.task != "chains":
        raise ConfigError("--dot is only meaningful for the chains task")
    out_dir = out_dir or config.out or "."
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    paths = []
    try:
        if config.task == "pair":
            result = _run_pair(config)
        elif config.task == "bound3":
            result = _run_bound3(config)
        elif config.task == "scatter3":
            result = _run_scatter3(config)
        elif config.task == "bound4":
            result = _run_bound4(config)
        elif config.task == "chains":
            result, paths = _run_chains(config, dot_path)
        else:
            result, paths = _run_sweep(config, out_dir)
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as err:
        result = {"status": "failed", "error_type": type(err).__name__,
                  "error": str(err)}
    meta = {"artifact": "fysolve " + __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "workers": workers,
            "wall_time": time.perf_counter() - started}
    record = ResultRecord(config=_config_echo(config), result=result,
                          meta=meta)
    json_path = os.path.join(out_dir, config.task + ".json")
    with open(json_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(record.json_text())
    return replace(record, paths=tuple(paths) + (json_path,))


def _pin_workers(workers):
    # effective only while numpy is not yet imported; the lazy package
    # import keeps it that way until the first runner call
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(workers)


def _summary_line(record):
    task = record.config["task"]
    result = record.result
    if result["status"] != "ok":
        return "%s failed: %s: %s" % (task, result["error_type"],
                                      result["error"])
    if task == "chains":
        return "chains: N=%d, %d chains in %d classes" % (
            result["n_bodies"], result["chains"], result["classes"])
    if task == "sweep":
        return "sweep(%s): %d rows -> %s" % (result["sweep_task"],
                                             result["rows"], result["csv"])
    if task == "scatter3":
        return "scatter3: p=%.6g tan_delta=%.10g" % (result["momentum"],
                                                     result["tan_delta"])
    return "%s: energy=%.12g" % (task, result["energy"])


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fysolve",
        description="Few-body bound states, phase shifts, and partition "
                    "chains from a run file.")
    parser.add_argument("task", choices=_TASKS)
    parser.add_argument("--config", required=True, metavar="FILE",
                        help="UTF-8 key = value run file")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (default: config 'out' "
                             "key, else current directory)")
    parser.add_argument("--workers", type=int, metavar="K",
                        help="numerical backend thread count "
                             "(FYSOLVE_WORKERS as fallback)")
    parser.add_argument("--dot", metavar="FILE",
                        help="write class-representative trees as DOT "
                             "(chains task only)")
    args = parser.parse_args(argv)

    workers = args.workers
    if workers is None and os.environ.get("FYSOLVE_WORKERS"):
        try:
            workers = int(os.environ["FYSOLVE_WORKERS"])
        except ValueError:
            print("fysolve: config error: FYSOLVE_WORKERS=%r is not an "
                  "integer" % os.environ["FYSOLVE_WORKERS"],
                  file=sys.stderr)
            return EXIT_CONFIG
    if workers is not None:
        if workers < 1:
            print("fysolve: config error: worker count must be >= 1",
                  file=sys.stderr)
            return EXIT_CONFIG
        _pin_workers(workers)

    try:
        config = load_config(args.config)
        if config.task != args.task:
            raise ConfigError("task mismatch: command line says %r, %s "
                              "says %r" % (args.task, args.config,
                                           config.task))
        record = run(config, out_dir=args.out, dot_path=args.dot,
                     workers=workers)
    except ConfigError as err:
        print("fysolve: config error: %s" % err, file=sys.stderr)
        return EXIT_CONFIG

    print(_summary_line(record))
    print("record: %s" % record.paths[-1])
    return EXIT_OK if record.ok else EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
