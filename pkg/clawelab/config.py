import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigError

load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent
OUTPUT_DIR = Path(os.getenv("CLAWE_LAB_OUTPUT_DIR", PROJECT_ROOT / "outputs"))

DEFAULT_SEED = int(os.getenv("CLAWE_LAB_SEED", "1234"))
DEFAULT_SHOTS = int(os.getenv("CLAWE_LAB_SHOTS", "8192"))
DEFAULT_RESAMPLES = int(os.getenv("CLAWE_LAB_RESAMPLES", "1000"))
MAX_WORKERS = int(os.getenv("CLAWE_LAB_MAX_WORKERS", "4"))

JOB_CAPACITY = 75
MAX_SIM_QUBITS = 8
VALIDITY_TOL = 1e-9
CALIBRATION_DELTA = 1e-6

EXPERIMENTS = ("overlap", "renyi", "calibrate-v1", "calibrate-v2", "zne")
NOISE_KINDS = ("ideal", "global-constant", "global-vector", "local")

_KNOWN_KEYS = {
    "experiment": {"kind", "first_step"},
    "noise": {"kind", "epsilon", "step_epsilons", "local_p", "coherent_angle"},
    "schedule": {"constant", "breakpoints", "t_final"},
    "pfa": {"n_steps", "n_t", "ordering", "perm_samples"},
    "mitigation": {
        "calibrations", "window", "fragment_boundaries", "qcna_rounds",
        "poly_order", "richardson_order", "rco_instances",
    },
    "bootstrap": {"shots", "shot_free", "resamples", "seed"},
    "output": {"path"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "overlap"
    first_step: int = 1

    noise_kind: str = "global-constant"
    epsilon: float = 0.02
    step_epsilons: Tuple[float, ...] = ()
    local_p: float = 0.01
    coherent_angle: float = 0.1

    u_tilde: Optional[float] = 2.0
    breakpoints: Tuple[Tuple[float, float], ...] = ()
    t_final: float = 2.0

    n_steps: int = 10
    n_t: int = 1
    ordering: str = "x-zz"
    n_perm_samples: int = 16

    n_calibrations: int = 3
    window_w: Optional[int] = 1  # None means every predecessor
    fragment_boundaries: Optional[Tuple[int, ...]] = None  # None means one fragment per step
    qcna_rounds: Tuple[int, ...] = (0, 1, 2, 3)
    poly_order: int = 3
    richardson_order: int = 2
    rco_instances: int = 0

    n_shots: int = DEFAULT_SHOTS
    shot_free: bool = False
    n_resamples: int = DEFAULT_RESAMPLES
    seed: int = DEFAULT_SEED

    output: Path = field(default_factory=lambda: OUTPUT_DIR / "results.csv")

    def validate(self) -> "ExperimentConfig":
        """Check every field against the preconditions of the module that consumes it."""
        from .pipeline.fermi_hubbard import DISTINCT_ORDERINGS

        def fail(key: str, message: str):
            raise ConfigError(f"{key}: {message}")

        if self.experiment not in EXPERIMENTS:
            fail("experiment.kind", f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.first_step not in (0, 1):
            fail("experiment.first_step", "must be 0 or 1")
        if self.noise_kind not in NOISE_KINDS:
            fail("noise.kind", f"unknown noise model {self.noise_kind!r}; choose from {NOISE_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            fail("noise.epsilon", "must lie in [0, 1]")
        if self.noise_kind == "global-vector":
            if len(self.step_epsilons) != self.n_steps:
                fail("noise.step_epsilons", f"needs one value per step ({self.n_steps})")
            if any(not 0.0 <= eps <= 1.0 for eps in self.step_epsilons):
                fail("noise.step_epsilons", "every value must lie in [0, 1]")
        if not 0.0 <= self.local_p <= 1.0:
            fail("noise.local_p", "must lie in [0, 1]")
        if self.u_tilde is None and len(self.breakpoints) < 2:
            fail("schedule.breakpoints", "need a constant value or at least two breakpoints")
        if self.t_final <= 0:
            fail("schedule.t_final", "must be positive")
        if self.n_steps < 1:
            fail("pfa.n_steps", "must be >= 1")
        if self.n_t < 1:
            fail("pfa.n_t", "must be >= 1")
        if self.ordering not in DISTINCT_ORDERINGS:
            fail("pfa.ordering", f"unknown ordering {self.ordering!r}; choose from {DISTINCT_ORDERINGS}")
        if self.n_perm_samples < 2:
            fail("pfa.perm_samples", "must be >= 2")
        if self.n_calibrations < 1:
            fail("mitigation.calibrations", "must be >= 1")
        if self.window_w is not None and self.window_w < 0:
            fail("mitigation.window", "must be >= 0 or 'all'")
        if self.fragment_boundaries is not None:
            bounds = list(self.fragment_boundaries)
            if any(b <= a for a, b in zip(bounds, bounds[1:])):
                fail("mitigation.fragment_boundaries", "must be strictly increasing")
            if bounds and bounds[0] < 1:
                fail("mitigation.fragment_boundaries", "must be positive gate indices")
        if not self.qcna_rounds or any(r not in (0, 1, 2, 3) for r in self.qcna_rounds):
            fail("mitigation.qcna_rounds", "rounds must be drawn from 0..3")
        if len(set(self.qcna_rounds)) != len(self.qcna_rounds):
            fail("mitigation.qcna_rounds", "rounds must be distinct")
        if self.poly_order < 0 or self.poly_order + 1 > len(self.qcna_rounds):
            fail("mitigation.poly_order", "needs at least order+1 QCNA rounds")
        if self.richardson_order < 0 or self.richardson_order + 1 > len(self.qcna_rounds):
            fail("mitigation.richardson_order", "needs at least order+1 QCNA rounds")
        if self.rco_instances < 0:
            fail("mitigation.rco_instances", "must be >= 0")
        if self.n_shots < 1:
            fail("bootstrap.shots", "must be >= 1")
        if self.n_resamples < 2:
            fail("bootstrap.resamples", "must be >= 2")
        return self

    def with_overrides(
        self,
        seed: Optional[int] = None,
        shot_free: Optional[bool] = None,
        output: Optional[Path] = None,
    ) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if shot_free:
            changes["shot_free"] = True
        if output is not None:
            changes["output"] = Path(output)
        return replace(self, **changes).validate()


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.replace(";", ",").split(",") if item.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in text.split(",") if item.strip())


def _breakpoints(text: str) -> Tuple[Tuple[float, float], ...]:
    points = []
    for item in text.split(","):
        if not item.strip():
            continue
        t, value = item.split(":")
        points.append((float(t), float(value)))
    return tuple(points)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_experiment_config(path: Path) -> ExperimentConfig:
    """
    Load an ExperimentConfig from an INI-style file of `key = value` lines in sections.

    Example:
        [experiment]
        kind = overlap
        [noise]
        kind = global-constant
        epsilon = 0.02
        [schedule]
        constant = 2.0
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read(path)

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"{section}: unknown section")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    values = {}
    readers = [
        ("experiment", "kind", "experiment", str),
        ("experiment", "first_step", "first_step", int),
        ("noise", "kind", "noise_kind", str),
        ("noise", "epsilon", "epsilon", float),
        ("noise", "step_epsilons", "step_epsilons", _floats),
        ("noise", "local_p", "local_p", float),
        ("noise", "coherent_angle", "coherent_angle", float),
        ("schedule", "t_final", "t_final", float),
        ("pfa", "n_steps", "n_steps", int),
        ("pfa", "n_t", "n_t", int),
        ("pfa", "ordering", "ordering", str),
        ("pfa", "perm_samples", "n_perm_samples", int),
        ("mitigation", "calibrations", "n_calibrations", int),
        ("mitigation", "qcna_rounds", "qcna_rounds", _ints),
        ("mitigation", "poly_order", "poly_order", int),
        ("mitigation", "richardson_order", "richardson_order", int),
        ("mitigation", "rco_instances", "rco_instances", int),
        ("bootstrap", "shots", "n_shots", int),
        ("bootstrap", "shot_free", "shot_free", _bool),
        ("bootstrap", "resamples", "n_resamples", int),
        ("bootstrap", "seed", "seed", int),
        ("output", "path", "output", Path),
    ]
    for section, key, attr, convert in readers:
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                values[attr] = convert(raw.strip())
            except ValueError as e:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({e})")

    if parser.has_option("schedule", "breakpoints"):
        raw = parser.get("schedule", "breakpoints")
        try:
            values["breakpoints"] = _breakpoints(raw)
        except ValueError as e:
            raise ConfigError(f"schedule.breakpoints: cannot parse {raw!r} ({e})")
        values["u_tilde"] = None
    if parser.has_option("schedule", "constant"):
        if "breakpoints" in values:
            raise ConfigError("schedule.constant: give either constant or breakpoints, not both")
        raw = parser.get("schedule", "constant")
        try:
            values["u_tilde"] = float(raw)
        except ValueError as e:
            raise ConfigError(f"schedule.constant: cannot parse {raw!r} ({e})")

    if parser.has_option("mitigation", "window"):
        raw = parser.get("mitigation", "window").strip().lower()
        try:
            values["window_w"] = None if raw == "all" else int(raw)
        except ValueError as e:
            raise ConfigError(f"mitigation.window: cannot parse {raw!r} ({e})")
    if parser.has_option("mitigation", "fragment_boundaries"):
        raw = parser.get("mitigation", "fragment_boundaries").strip()
        try:
            values["fragment_boundaries"] = _ints(raw) if raw and raw != "steps" else None
        except ValueError as e:
            raise ConfigError(f"mitigation.fragment_boundaries: cannot parse {raw!r} ({e})")

    if "output" in values and not values["output"].is_absolute():
        values["output"] = path.parent / values["output"]

    return ExperimentConfig(**values).validate()
