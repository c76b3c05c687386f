"""Scenario configuration files.

One ``key = value`` pair per line, nested by dotted keys::

    kind = solve-linear
    seed = 3
    surface_tension = 1.0
    eos.p_inf = 1.0
    grid.n1 = 16
    linear.eps = [1e-2, 1e-3, 0.0]

Values are Python literals (numbers, booleans, strings, lists); bare words
are strings.  ``#`` starts a comment.  Unknown keys, duplicates and values
out of range are errors that name the key and the line.
"""
from __future__ import annotations

import ast
import os
from dataclasses import dataclass, field

KINDS = ("check-operators", "compat-check", "solve-linear", "adjoint-check", "run-nashmoser")
OUT_ENV = "FBMHD_OUT"


class ConfigError(ValueError):
    def __init__(self, msg, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)
        self.key = key
        self.line = line


def _num(lo=None, hi=None, integer=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "expected a number"
        if integer and int(v) != v:
            return "expected an integer"
        if lo is not None and v < lo:
            return f"must be >= {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
        return None
    return check


def _choice(*opts):
    return lambda v: None if v in opts else f"expected one of {', '.join(map(str, opts))}"


def _num_list(lo=None, hi=None, integer=False, length=None):
    item = _num(lo, hi, integer)

    def check(v):
        if not isinstance(v, (list, tuple)) or not v:
            return "expected a non-empty list"
        if length is not None and len(v) != length:
            return f"expected {length} entries"
        for x in v:
            err = item(x)
            if err:
                return f"entry {x!r}: {err}"
        return None
    return check


# key -> (default, validator); defaults double as documentation of ranges
SCHEMA = {
    "kind": (None, _choice(*KINDS)),
    "seed": (None, _num(0, 2**32 - 1, integer=True)),
    "out": (None, lambda v: None if isinstance(v, str) else "expected a path"),
    "surface_tension": (1.0, _num(1e-12, 1e6)),
    "eos.gamma": (5.0 / 3.0, _num(1.0 + 1e-9, 10.0)),
    "eos.rho_floor": (0.1, _num(0.0, 1e6)),
    "eos.rho_ceil": (10.0, _num(1e-6, 1e9)),
    "eos.entropy_scale": (1.0, _num(1e-9, 1e9)),
    "eos.p_inf": (1.0, _num(0.0, 1e9)),
    "grid.n1": (16, _num(8, 256, integer=True)),
    "grid.n2": (16, _num(4, 256, integer=True)),
    "grid.n3": (16, _num(4, 256, integer=True)),
    "grid.nt": (16, _num(3, 4096, integer=True)),
    "grid.x1_extent": (4.0, _num(2.0, 100.0)),
    "grid.tangential_extent": (6.283185307179586, _num(1e-6, 1e6)),
    "grid.t_final": (0.25, _num(1e-9, 1e6)),
    "grid.n_past": (2, _num(1, 16, integer=True)),
    "state.q": (0.0, _num(-1e6, 1e6)),
    "state.v": ([0.0, 0.0, 0.0], _num_list(length=3)),
    "state.H": ([0.0, 0.5, 0.0], _num_list(length=3)),
    "state.S": (0.0, _num(-50.0, 50.0)),
    "state.amplitude": (1e-3, _num(0.0, 0.25)),
    "data.U0": ("", lambda v: None if isinstance(v, str) else "expected a path"),
    "data.phi0": ("", lambda v: None if isinstance(v, str) else "expected a path"),
    "operators.samples": (2000, _num(1, 10**6, integer=True)),
    "operators.cases": (4, _num(1, 1000, integer=True)),
    "compat.order": (4, _num(0, 4, integer=True)),
    "compat.tol": (1e-11, _num(0.0, 1.0)),
    "linear.eps": ([1e-2, 1e-3, 1e-4, 0.0], _num_list(0.0, 1e3)),
    "linear.forcing_amplitude": (1e-3, _num(0.0, 1e3)),
    "linear.mode": ([1, 0], _num_list(-64, 64, integer=True, length=2)),
    "linear.forcing": ("mode", _choice("mode", "random", "none")),
    "linear.cfl": (0.9, _num(1e-6, 1.0)),
    "linear.bilaplacian": ("explicit", _choice("explicit", "implicit")),
    "linear.energy_bound": (1e3, _num(0.0, None)),
    "adjoint.pairs": (3, _num(1, 1000, integer=True)),
    "adjoint.eps": (1e-2, _num(0.0, 1e3)),
    "adjoint.min_ratio": (3.0, _num(0.0, None)),
    "nashmoser.theta0": (4.0, _num(1.0, 1e6)),
    "nashmoser.alpha": (12.0, _num(0.0, 1e3)),
    "nashmoser.alpha_tilde": (15.0, _num(0.0, 1e3)),
    "nashmoser.epsilon": (0.1, _num(0.0, 1e3)),
    "nashmoser.max_steps": (6, _num(0, 1000, integer=True)),
    "nashmoser.tol_interior": (1e-14, _num(0.0, None)),
    "nashmoser.tol_boundary": (1e-14, _num(0.0, None)),
    "nashmoser.hyp_orders": ([1, 2], _num_list(0, 4, integer=True)),
    "nashmoser.checkpoint_every": (0, _num(0, 1000, integer=True)),
    "nashmoser.min_reduction": (10.0, _num(1.0, None)),
    "nashmoser.cfl": (0.9, _num(1e-6, 1.0)),
}


def _literal(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text):
    """Flat ``{dotted_key: (value, line)}`` mapping; syntax checks only."""
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=no)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or any(not part.isidentifier() for part in key.split(".")):
            raise ConfigError("malformed key", key or None, no)
        if not val:
            raise ConfigError("missing value", key, no)
        if key in out:
            raise ConfigError(f"duplicate (first set on line {out[key][1]})", key, no)
        out[key] = (_literal(val), no)
    return out


@dataclass
class ScenarioConfig:
    kind: str
    seed: int | None
    out: str | None
    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name):
        p = name + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    @property
    def surface_tension(self):
        return float(self.values["surface_tension"])

    def eos(self):
        from .thermo import ThermoModel

        s = self.section("eos")
        return ThermoModel(gamma=float(s["gamma"]), rho_floor=float(s["rho_floor"]),
                           rho_ceil=float(s["rho_ceil"]),
                           entropy_scale=float(s["entropy_scale"]), p_inf=float(s["p_inf"]))

    def grid(self):
        from .grid import SlabGrid

        s = self.section("grid")
        return SlabGrid(int(s["n1"]), int(s["n2"]), int(s["n3"]), int(s["nt"]),
                        x1_extent=float(s["x1_extent"]),
                        tangential_extent=float(s["tangential_extent"]),
                        t_final=float(s["t_final"]), n_past=int(s["n_past"]))

    def state_vector(self):
        import numpy as np

        s = self.section("state")
        return np.array([s["q"], *s["v"], *s["H"], s["S"]], dtype=float)

    def resolved(self):
        """Plain dict of every setting, for manifests."""
        d = {"kind": self.kind, "seed": self.seed}
        d.update({k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in sorted(self.values.items())})
        return d


def build(flat, kind=None, seed=None, source="<text>"):
    """Validate a parsed mapping into a :class:`ScenarioConfig`.

    ``kind`` and ``seed`` given here (command line) take precedence over the
    file; a file ``kind`` contradicting the command is an error.
    """
    values = {k: v for k, (v, _) in SCHEMA.items()}
    for key, (val, line) in flat.items():
        if key not in SCHEMA:
            raise ConfigError("unknown setting", key, line)
        err = SCHEMA[key][1](val)
        if err:
            raise ConfigError(err, key, line)
        values[key] = val
    file_kind = values.pop("kind")
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ConfigError(f"file requests '{file_kind}' but the command is '{kind}'", "kind",
                          flat["kind"][1])
    kind = kind or file_kind
    if kind not in KINDS:
        raise ConfigError("scenario kind missing", "kind")
    file_seed = values.pop("seed")
    seed = int(seed) if seed is not None else (None if file_seed is None else int(file_seed))
    if seed is None:
        raise ConfigError("a seed is required (set 'seed' or pass --seed)", "seed")
    out = values.pop("out")
    if values["eos.rho_floor"] >= values["eos.rho_ceil"]:
        line = flat.get("eos.rho_floor", (None, None))[1]
        raise ConfigError("must be below eos.rho_ceil", "eos.rho_floor", line)
    return ScenarioConfig(kind, seed, out, values, source)


def load(path=None, kind=None, seed=None):
    """Read and validate a config file (``None`` gives the defaults)."""
    if path is None:
        return build({}, kind, seed)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from exc
    return build(parse_text(text), kind, seed, source=str(path))


def output_dir(cfg: ScenarioConfig, cli_out=None):
    """``--out`` first, then the environment override, then the file, then a default."""
    for cand in (cli_out, os.environ.get(OUT_ENV), cfg.out):
        if cand:
            return cand
    return os.path.join("runs", cfg.kind)
