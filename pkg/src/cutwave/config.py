"""Run configuration: defaults, TOML loading, and key=value overrides."""

import os

try:
    import tomllib as tomli
except ImportError:  # 3.10
    import tomli

__all__ = ["RunConfig", "load_config", "apply_overrides", "to_toml",
           "OUT_DIR_ENV"]

OUT_DIR_ENV = "CUTWAVE_OUT"

SCENARIOS = ("convergence", "channel", "verify-forms", "custom")

_DEFAULTS = {
    "scenario": "convergence",   # "custom" = uncut periodic baseline
    "n": 20,                       # int, or list of ints for refinement runs
    "r": 2,
    "scheme": "",                  # empty -> order-matched default
    "c": 1.0,
    "alpha": 0.1,                  # small-cell threshold
    "cfl_factor": 0.25,
    "dissipation": "lax-friedrichs",
    "rho_filter": [1e-12, 1e-7, 1e-5, 1e-4, 1e-2, 1e-1],
    "t_end": 1.0,
    "out_dir": "out",
    "seed": 0,
    "angle_degrees": 35.0,         # rotated-square scenarios
    "min_alpha": 1e-5,             # channel scenarios: target cut fraction
    "snapshots": 21,               # energy-series sample count
    "threads": 1,
}


class RunConfig:
    """Flat configuration record with validation.

    Unknown keys are rejected up front so typos in --set or TOML files
    fail loudly instead of silently running defaults.
    """

    def __init__(self, **kwargs):
        values = dict(_DEFAULTS)
        for key, val in kwargs.items():
            if key not in _DEFAULTS:
                raise ValueError("unknown config key %r" % key)
            values[key] = val
        for key, val in values.items():
            setattr(self, key, val)
        self.validate()

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError("scenario must be one of %s" % (SCENARIOS,))
        if self.r not in (0, 1, 2, 3):
            raise ValueError("degree r must be in {0,1,2,3}")
        ns = self.n if isinstance(self.n, list) else [self.n]
        if not all(isinstance(n, int) and n > 0 for n in ns):
            raise ValueError("n must be a positive int or list of them")
        for key in ("c", "cfl_factor", "t_end", "min_alpha"):
            if not getattr(self, key) > 0:
                raise ValueError("%s must be positive" % key)
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha threshold must be in (0, 1]")
        if self.dissipation not in ("zero", "lax-friedrichs"):
            raise ValueError("dissipation must be zero or lax-friedrichs")
        if self.scheme not in ("", "ssprk22", "ssprk33", "ssprk104"):
            raise ValueError("unknown scheme %r" % self.scheme)
        if self.snapshots < 2:
            raise ValueError("need at least two snapshots")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def n_list(self):
        return list(self.n) if isinstance(self.n, list) else [self.n]

    def resolved_out_dir(self):
        return os.environ.get(OUT_DIR_ENV, self.out_dir)

    def to_dict(self):
        return {key: getattr(self, key) for key in _DEFAULTS}

    def replace(self, **kwargs):
        values = self.to_dict()
        values.update(kwargs)
        return RunConfig(**values)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        return "RunConfig(%s)" % ", ".join(
            "%s=%r" % kv for kv in sorted(self.to_dict().items()))


def load_config(path):
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    return RunConfig(**data)


def apply_overrides(config, pairs):
    """Apply --set key=value overrides; values are parsed as TOML."""
    values = config.to_dict()
    for pair in pairs:
        key, sep, text = pair.partition("=")
        if not sep:
            raise ValueError("--set expects key=value, got %r" % pair)
        key = key.strip()
        try:
            parsed = tomli.loads("x = %s" % text.strip())["x"]
        except tomli.TOMLDecodeError:
            parsed = text.strip()      # bare words are strings
        values[key] = parsed
    return RunConfig(**values)


def _toml_value(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, str):
        return '"%s"' % val.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(val, (int, float)):
        return repr(val)
    if isinstance(val, list):
        return "[%s]" % ", ".join(_toml_value(v) for v in val)
    raise TypeError("cannot serialize %r" % (val,))


def to_toml(config):
    """Emit a flat TOML document; load_config round-trips it."""
    lines = ["%s = %s" % (key, _toml_value(getattr(config, key)))
             for key in _DEFAULTS]
    return "\n".join(lines) + "\n"
