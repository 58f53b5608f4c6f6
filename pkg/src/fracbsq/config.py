"""Run configuration: ``section.key = value`` files with ``#`` comments (UTF-8)."""

import math
import re
from dataclasses import dataclass, field

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*$")


class ConfigError(ValueError):
    """Raised for syntax errors (with line number) or aggregated range errors."""


def _int(v):
    return int(v, 10)


def _float(v):
    return float(v)


def _optional_float(v):
    return None if v.lower() in ("none", "auto", "") else float(v)


def _kind(v):
    if v not in ("random_divfree", "single_mode", "checkpoint"):
        raise ValueError("expected random_divfree, single_mode or checkpoint")
    return v


def _vec3(v):
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(float(p) for p in parts)


def _ivec3(v):
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated integers")
    return tuple(int(p) for p in parts)


# key -> (parser, default); None default means required.
SCHEMA = {
    "grid.n": (_int, None),
    "gevrey.a": (_float, 1.0),
    "gevrey.sigma": (_float, 2.0),
    "gevrey.s": (_float, 0.5),
    "dissipation.alpha": (_float, 1.0),
    "dissipation.beta": (_float, 1.0),
    "time.dt": (_optional_float, None),
    "time.t_end": (_float, 1.0),
    "time.dt_max": (_optional_float, None),
    "init.kind": (_kind, None),
    "init.seed": (_int, 0),
    "init.amplitude": (_float, 1e-2),
    "init.decay": (_float, 2.0),
    "init.mode": (_ivec3, (1, 0, 0)),
    "init.direction": (_vec3, (0.0, 1.0, 0.0)),
    "init.theta_amplitude": (_float, 0.0),
    "init.path": (str, ""),
    "ladder.n_max": (_int, 4),
    "constants.seed": (_int, 12345),
    "constants.samples": (_int, 128),
    "constants.safety": (_float, 2.0),
    "constants.value": (_optional_float, None),
    "tolerances.picard_tol": (_float, 1e-10),
    "tolerances.max_iter": (_int, 64),
    "picard.time_nodes": (_int, 64),
    "output.checkpoint_every": (_int, 0),
    "monitor.tstar": (_optional_float, None),
    "monitor.C": (_optional_float, None),
    "monitor.mu": (_float, 1.6),
    "monitor.C2": (_float, 1.0),
    "lemmas.samples": (_int, 1000),
    "lemmas.delta": (_float, 2.0),
}
# Keys whose default is "absent" rather than "required".
OPTIONAL_NONE = {"time.dt", "time.dt_max", "constants.value", "monitor.tstar", "monitor.C"}


@dataclass
class RunConfig:
    values: dict
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def gevrey(self):
        from .norms import GevreyParams

        return GevreyParams(self["gevrey.a"], self["gevrey.sigma"], self["gevrey.s"])

    def dissipation(self):
        from .norms import DissipationParams

        return DissipationParams(self["dissipation.alpha"], self["dissipation.beta"])

    def grid(self):
        from .spectral import make_grid

        return make_grid(self["grid.n"])

    def echo_items(self):
        out = []
        for key in SCHEMA:
            v = self.values[key]
            if v is None:
                text = "none"
            elif isinstance(v, tuple):
                text = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            out.append((key, text))
        return out

    def echo(self):
        return "".join(f"{k} = {v}\n" for k, v in self.echo_items())


def _validate(values):
    errs = []

    def bad(key, msg):
        errs.append(f"{key}: {msg} (got {values[key]!r})")

    n = values["grid.n"]
    if n % 2 or not 8 <= n <= 256:
        bad("grid.n", "must be even and in [8, 256]")
    for key in ("gevrey.a", "gevrey.sigma", "gevrey.s", "dissipation.alpha", "dissipation.beta", "time.t_end"):
        if not math.isfinite(values[key]):
            bad(key, "must be finite")
    if not values["gevrey.a"] > 0:
        bad("gevrey.a", "must be > 0")
    if not values["gevrey.sigma"] > 1:
        bad("gevrey.sigma", "must be > 1")
    if not 0 <= values["gevrey.s"] < 1.5:
        bad("gevrey.s", "must lie in [0, 3/2)")
    for key in ("dissipation.alpha", "dissipation.beta"):
        if not values[key] > 0.5:
            bad(key, "must be > 1/2")
    if values["time.dt"] is not None and not values["time.dt"] > 0:
        bad("time.dt", "must be > 0")
    if values["time.dt_max"] is not None and not values["time.dt_max"] > 0:
        bad("time.dt_max", "must be > 0")
    if values["time.dt"] is not None and values["time.dt_max"] is not None and values["time.dt"] > values["time.dt_max"]:
        bad("time.dt", "exceeds time.dt_max")
    if not values["time.t_end"] >= 0:
        bad("time.t_end", "must be >= 0")
    if not values["init.amplitude"] >= 0:
        bad("init.amplitude", "must be >= 0")
    if values["init.kind"] == "checkpoint" and not values["init.path"]:
        bad("init.path", "required when init.kind = checkpoint")
    if not values["ladder.n_max"] >= 1:
        bad("ladder.n_max", "must be >= 1")
    if not values["constants.samples"] >= 100:
        bad("constants.samples", "must be >= 100")
    if not values["constants.safety"] >= 1:
        bad("constants.safety", "must be >= 1")
    if values["constants.value"] is not None and not values["constants.value"] > 0:
        bad("constants.value", "must be > 0")
    if not values["tolerances.picard_tol"] > 0:
        bad("tolerances.picard_tol", "must be > 0")
    if not values["tolerances.max_iter"] >= 1:
        bad("tolerances.max_iter", "must be >= 1")
    if not values["picard.time_nodes"] >= 2:
        bad("picard.time_nodes", "must be >= 2")
    if not values["output.checkpoint_every"] >= 0:
        bad("output.checkpoint_every", "must be >= 0")
    if not values["monitor.mu"] > 1.5:
        bad("monitor.mu", "must be > 3/2")
    if values["monitor.C"] is not None and not values["monitor.C"] > 0:
        bad("monitor.C", "must be > 0")
    if not values["lemmas.samples"] >= 1:
        bad("lemmas.samples", "must be >= 1")
    if not values["lemmas.delta"] > 1.5:
        bad("lemmas.delta", "must be > 3/2")
    return errs


def parse_config_text(text, source="<config>"):
    raw = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not _KEY.match(key):
            raise ConfigError(f"{source}:{lineno}: malformed key {key!r}")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {where[key]})")
        raw[key] = value
        where[key] = lineno

    values, errs = {}, []
    for key, (parse, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except ValueError as exc:
                errs.append(f"{key}: cannot parse {raw[key]!r} ({exc})")
                values[key] = default
        elif default is None and key not in OPTIONAL_NONE:
            errs.append(f"{key}: required key missing")
            values[key] = None
        else:
            values[key] = default
    if errs:
        raise ConfigError(f"{source}: invalid configuration:\n  " + "\n  ".join(errs))
    errs = _validate(values)
    if errs:
        raise ConfigError(f"{source}: invalid configuration:\n  " + "\n  ".join(errs))
    return RunConfig(values, set(raw))


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, str(path))
