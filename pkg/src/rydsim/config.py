"""INI run configuration.

Frequencies in the file are ordinary frequencies with unit-suffixed keys
(``omega_max_MHz``, ``dDelta_kHz``); they are multiplied by 2*pi exactly once,
here, when drive objects are built.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from importlib import resources

from rydsim.errors import ConfigurationError
from rydsim.gates import (
    DRIVE_TYPES,
    PROTOCOLS,
    ARPDrive,
    AnalyticStirapDrive,
    GateConfig,
    SegmentedDrive,
    VasilevDrive,
    default_config,
)
from rydsim.lindblad import METHODS, IntegratorConfig
from rydsim.optimize import SLEW_METRICS, DEConfig, OptimizationProblem
from rydsim.pulses import TWO_PI
from rydsim.quantum import arp_scheme, stirap_scheme

MHZ = TWO_PI
KHZ = TWO_PI * 1e-3

# key -> kind; kinds: float, int, str, bool, floats (comma list), ints (comma list)
SCHEMA = {
    "protocol": {"name": "str", "T_us": "float", "B_MHz": "float", "target": "str"},
    "scheme": {"decay": "bool", "tau_r_us": "float", "tau_p_us": "float"},
    "drive": {
        "omega_max_MHz": "float", "delta_max_MHz": "float", "tau_frac": "float",
        "variant": "str", "sweep_signs": "ints",
        "omega1_max_MHz": "float", "omega2_max_MHz": "float",
        "tau1_frac": "float", "tau2_frac": "float",
        "omega0_MHz": "float", "t1_us": "float", "t2_us": "float", "tau_us": "float",
        "switch_delta1": "bool",
        "omega1_MHz": "floats", "omega2_MHz": "floats", "delta1_MHz": "floats", "delta_MHz": "float",
    },
    "sweep": {"B_MHz": "floats", "fit_weighting": "str"},
    "robustness": {"dDelta_kHz": "floats", "dI_frac": "floats"},
    "optimize": {
        "n_half_segments": "int", "omega_min_MHz": "float", "omega_max_MHz": "float",
        "delta1_min_MHz": "float", "delta1_max_MHz": "float", "slew_MHz_per_us": "float",
        "slew_metric": "str", "penalty": "float", "search_rel_tol": "float",
        "population": "int", "weight": "float", "crossover": "float",
        "generations": "int", "seed": "int", "checkpoint": "str",
    },
    "analytic": {"omega0_MHz": "float"},
    "integrator": {"rel_tol": "float", "abs_tol": "float", "max_step_us": "float", "method": "str"},
    "output": {"n_samples": "int", "traces": "bool"},
}

# drive keys accepted per protocol
DRIVE_KEYS = {
    "ARP": {"omega_max_MHz", "delta_max_MHz", "tau_frac", "variant", "sweep_signs"},
    "STIRAP-analytic": {"omega1_max_MHz", "omega2_max_MHz", "delta1_MHz", "delta_MHz", "tau1_frac", "tau2_frac"},
    "STIRAP-vasilev": {"omega0_MHz", "t1_us", "t2_us", "tau_us", "delta1_MHz", "delta_MHz", "switch_delta1"},
    "STIRAP-segmented": {"omega1_MHz", "omega2_MHz", "delta1_MHz", "delta_MHz"},
}

NONNEGATIVE = {
    "omega_max_MHz", "delta_max_MHz", "omega1_max_MHz", "omega2_max_MHz", "omega0_MHz",
    "omega1_MHz", "omega2_MHz", "B_MHz", "omega_min_MHz",
}
POSITIVE = {"T_us", "tau_r_us", "tau_p_us", "tau_us", "tau_frac", "tau1_frac", "tau2_frac", "max_step_us",
            "rel_tol", "abs_tol", "slew_MHz_per_us", "search_rel_tol"}


def _convert(section: str, key: str, raw: str, kind: str):
    where = f"[{section}] {key}"
    try:
        if kind == "float":
            value = float(raw)
        elif kind == "int":
            value = int(raw)
        elif kind == "str":
            value = raw.strip()
        elif kind == "bool":
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            value = low in ("1", "true", "yes", "on")
        elif kind == "floats":
            value = tuple(float(v) for v in raw.split(",") if v.strip())
        elif kind == "ints":
            value = tuple(int(v) for v in raw.split(",") if v.strip())
        else:  # pragma: no cover
            raise AssertionError(kind)
    except ValueError:
        raise ConfigurationError(f"{where}: cannot parse {raw.strip()!r} as {kind}") from None
    values = value if isinstance(value, tuple) else (value,)
    if key in NONNEGATIVE and any(v < 0 for v in values):
        raise ConfigurationError(f"{where} must be >= 0, got {raw.strip()}")
    if key in POSITIVE and any(v <= 0 for v in values):
        raise ConfigurationError(f"{where} must be > 0, got {raw.strip()}")
    return value


@dataclass
class RunConfig:
    """Parsed configuration: typed values keyed by section and key name."""

    values: dict[str, dict] = field(default_factory=dict)
    source: str = "<string>"

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.values[section][key]
        except KeyError:
            raise ConfigurationError(f"missing required key [{section}] {key} in {self.source}") from None

    def has(self, section: str, key: str) -> bool:
        return key in self.values.get(section, {})

    def set(self, section: str, key: str, value) -> None:
        self.values.setdefault(section, {})[key] = value

    @property
    def protocol(self) -> str:
        return self.require("protocol", "name")

    # -- builders ---------------------------------------------------------------

    def scheme(self):
        proto = self.protocol
        tau_r = self.get("scheme", "tau_r_us", 540.0)
        if proto == "ARP":
            if self.has("scheme", "tau_p_us"):
                raise ConfigurationError("[scheme] tau_p_us does not apply to the ARP protocol")
            scheme = arp_scheme(tau_r)
        else:
            scheme = stirap_scheme(self.get("scheme", "tau_p_us", 0.155), tau_r)
        if not self.get("scheme", "decay", True):
            scheme = scheme.without_decay()
        return scheme

    def drive(self):
        proto = self.protocol
        given = set(self.values.get("drive", {}))
        extra = given - DRIVE_KEYS[proto]
        if extra:
            key = sorted(extra)[0]
            raise ConfigurationError(f"[drive] {key} does not apply to protocol {proto}")
        g = lambda key, default: self.get("drive", key, default)  # noqa: E731
        base = DRIVE_TYPES[proto]()

        def freq(key, default):
            # default is already in rad/us
            value = self.get("drive", key, None)
            if isinstance(value, tuple):
                if len(value) != 1:
                    raise ConfigurationError(f"[drive] {key} takes a single value for protocol {proto}")
                value = value[0]
            return default if value is None else value * MHZ

        if proto == "ARP":
            signs = g("sweep_signs", None)
            if signs is not None and (len(signs) != 2 or any(s not in (1, -1) for s in signs)):
                raise ConfigurationError("[drive] sweep_signs must be two values from {1, -1}")
            return ARPDrive(
                freq("omega_max_MHz", base.omega_max),
                freq("delta_max_MHz", base.delta_max),
                g("tau_frac", base.tau_frac),
                g("variant", base.variant),
                tuple(signs) if signs else None,
            )
        if proto == "STIRAP-analytic":
            return AnalyticStirapDrive(
                freq("omega1_max_MHz", base.omega1_max),
                freq("omega2_max_MHz", base.omega2_max),
                freq("delta1_MHz", base.delta1),
                freq("delta_MHz", base.delta),
                g("tau1_frac", base.tau1_frac),
                g("tau2_frac", base.tau2_frac),
            )
        if proto == "STIRAP-vasilev":
            return VasilevDrive(
                freq("omega0_MHz", base.omega0),
                g("t1_us", base.t1),
                g("t2_us", base.t2),
                g("tau_us", base.tau),
                freq("delta1_MHz", base.delta1),
                freq("delta_MHz", base.delta),
                g("switch_delta1", base.switch_delta1),
            )
        halves = {}
        for name in ("omega1", "omega2", "delta1"):
            vals = g(f"{name}_MHz", None)
            halves[name] = tuple(v * MHZ for v in vals) if vals is not None else getattr(base, name)
        return SegmentedDrive(halves["omega1"], halves["omega2"], halves["delta1"], freq("delta_MHz", base.delta))

    def integrator(self) -> IntegratorConfig:
        base = IntegratorConfig()
        rel = self.get("integrator", "rel_tol", base.rel_tol)
        abs_default = base.abs_tol if not self.has("integrator", "rel_tol") else rel * 1e-2
        method = self.get("integrator", "method", base.method)
        if method not in METHODS:
            raise ConfigurationError(f"[integrator] method must be one of {METHODS}, got {method!r}")
        return IntegratorConfig(
            rel, self.get("integrator", "abs_tol", abs_default), self.get("integrator", "max_step_us", None), method
        )

    def gate(self) -> GateConfig:
        proto = self.protocol
        if proto not in PROTOCOLS:
            raise ConfigurationError(f"[protocol] name must be one of {PROTOCOLS}, got {proto!r}")
        kwargs = {"drive": self.drive(), "scheme": self.scheme(), "integrator": self.integrator()}
        if self.has("protocol", "T_us"):
            kwargs["T"] = self.get("protocol", "T_us")
        if self.has("protocol", "B_MHz"):
            kwargs["B"] = self.get("protocol", "B_MHz") * MHZ
        if self.has("protocol", "target"):
            pair = tuple(s.strip() for s in self.get("protocol", "target").split(","))
            if len(pair) != 2:
                raise ConfigurationError("[protocol] target must name two states, e.g. 01,10")
            kwargs["target"] = pair
        if self.has("output", "n_samples"):
            kwargs["n_samples"] = self.get("output", "n_samples")
        return default_config(proto, **kwargs)

    def sweep(self) -> tuple[list[float], str]:
        B = self.require("sweep", "B_MHz")
        if not B:
            raise ConfigurationError("[sweep] B_MHz must list at least one value")
        if min(B) <= 0:
            raise ConfigurationError("[sweep] B_MHz values must be > 0")
        weighting = self.get("sweep", "fit_weighting", "relative")
        if weighting not in ("relative", "none"):
            raise ConfigurationError("[sweep] fit_weighting must be 'relative' or 'none'")
        return [b * MHZ for b in B], weighting

    def robustness(self) -> tuple[list[float], list[float]]:
        dd = self.require("robustness", "dDelta_kHz")
        di = self.require("robustness", "dI_frac")
        if not dd or not di:
            raise ConfigurationError("[robustness] grids must be nonempty")
        if min(di) <= -1:
            raise ConfigurationError("[robustness] dI_frac values must be > -1")
        return [v * KHZ for v in dd], list(di)

    def optimization(self) -> tuple[OptimizationProblem, DEConfig]:
        g = lambda key, default: self.get("optimize", key, default)  # noqa: E731
        metric = g("slew_metric", "segment")
        if metric not in SLEW_METRICS:
            raise ConfigurationError(f"[optimize] slew_metric must be one of {sorted(SLEW_METRICS)}")
        problem = OptimizationProblem(
            self.gate(),
            g("n_half_segments", 6),
            (g("omega_min_MHz", 0.0) * MHZ, g("omega_max_MHz", 200.0) * MHZ),
            (g("delta1_min_MHz", 200.0) * MHZ, g("delta1_max_MHz", 800.0) * MHZ),
            g("slew_MHz_per_us", 1000.0),
            metric,
            g("penalty", 1.0),
            g("search_rel_tol", 1e-7),
        )
        de = DEConfig(g("population", None), g("weight", 0.7), g("crossover", 0.9), g("generations", 100), g("seed", 0))
        return problem, de

    def analytic_omega0(self) -> float:
        return self.require("analytic", "omega0_MHz") * MHZ


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str  # keep unit-suffix capitalization
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {source}: {exc}") from None
    cfg = RunConfig(source=source)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}] in {source}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key [{section}] {key} in {source}")
            cfg.set(section, key, _convert(section, key, raw, SCHEMA[section][key]))
    return cfg


def bundled_configs() -> list[str]:
    root = resources.files("rydsim") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def read_bundled(name: str) -> str:
    return (resources.files("rydsim") / "configs" / name).read_text(encoding="utf-8")


def load_config(path: str) -> RunConfig:
    """Read ``path``; a bare name of a bundled config (e.g. ``arp_paper.cfg``) also works."""
    if os.path.exists(path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return parse_config(text, path)
    if os.path.basename(path) == path and path in bundled_configs():
        return parse_config(read_bundled(path), path)
    raise ConfigurationError(f"config file {path} not found")
