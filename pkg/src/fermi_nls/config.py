"""Run configuration: a flat key = value text format with full validation.

Reference defaults
------------------
=============== ============ ==========================================
key             default      meaning
=============== ============ ==========================================
d               2            spatial dimension (1, 2, 3)
M               16           Fourier modes per dimension (even)
L               2 pi         box length
mu              1.05         chemical potential (off every lattice shell)
T               1.0          final time
dt              0.001        RK4 / split-step time step
record_every    10           store every k-th solver state
time_samples    128          Picard time intervals on [0, T]
max_iters       30           Picard iteration cap
tol             1e-10        Picard stopping increment
ensemble_size   4            number of seeded samples
seed            42           master seed (SeedSequence)
kind            mixed        generator kind or 'mixed'
amplitude       -1           generator size; negative means per-kind default
alpha           1.0          Sobolev exponent
alphas          (empty)      alpha list for exponent-table (falls back to alpha)
window          1.0          time window for Strichartz scans
pair_count      4            admissible pairs in the S^alpha proxy
n_values        8,16,...     list of n (optimality or truncation)
lemma           h2_sea       lemma id for lemma-ratios
particles       2            extra orbitals for the orbital solver
output          runs/out     artifact directory
=============== ============ ==========================================
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .energy import LEMMA_IDS
from .kernel import GENERATOR_KINDS

SUBCOMMANDS = ("evolve", "picard", "orbitals", "energy-conservation", "strichartz-homogeneous",
               "strichartz-inhomogeneous", "strichartz-kernel", "dual-integral", "optimality",
               "lieb-thirring", "sobolev", "approx-lemma", "lemma-ratios", "exponent-table")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass
class RunConfig:
    scenario: str = "evolve"
    d: int = 2
    M: int = 16
    L: float = 2 * math.pi
    mu: float = 1.05
    T: float = 1.0
    dt: float = 1e-3
    record_every: int = 10
    time_samples: int = 128
    max_iters: int = 30
    tol: float = 1e-10
    ensemble_size: int = 4
    seed: int = 42
    kind: str = "mixed"
    amplitude: float = -1.0
    alpha: float = 1.0
    alphas: list[float] = field(default_factory=list)
    window: float = 1.0
    pair_count: int = 4
    n_values: list[float] = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0, 128.0])
    lemma: str = "h2_sea"
    particles: int = 2
    output: str = "runs/out"

    # ---- parsing -------------------------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: dict[str, str], base: "RunConfig | None" = None) -> "RunConfig":
        """Build from string values; unknown keys and unparsable values are all reported."""
        cfg = dataclasses.replace(base) if base is not None else cls()
        types = {f.name: f.type for f in fields(cls)}
        errors = []
        for key, raw in pairs.items():
            if key not in types:
                errors.append(f"unknown key {key!r}")
                continue
            try:
                setattr(cfg, key, _coerce(types[key], raw))
            except ValueError as exc:
                errors.append(f"{key}: cannot parse {raw!r} ({exc})")
        if errors:
            raise ConfigError(errors)
        return cfg

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        pairs, errors = {}, []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                errors.append(f"line {lineno}: expected 'key = value'")
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            pairs[k] = v
        if errors:
            raise ConfigError(errors)
        return cls.from_pairs(pairs, base)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in unknown])
        return cls(**{k: (list(v) if isinstance(v, list) else v) for k, v in data.items()})

    # ---- validation ----------------------------------------------------------------

    def validate(self) -> "RunConfig":
        e = []
        if self.scenario not in SUBCOMMANDS:
            e.append(f"scenario {self.scenario!r} is not one of {', '.join(SUBCOMMANDS)}")
        if self.d not in (1, 2, 3):
            e.append(f"d must be 1, 2 or 3, got {self.d}")
        if self.M < 4 or self.M % 2:
            e.append(f"M must be even and >= 4, got {self.M}")
        if not self.L > 0:
            e.append(f"L must be positive, got {self.L}")
        if not self.mu > 0:
            e.append(f"mu must be positive, got {self.mu}")
        if not self.dt > 0:
            e.append(f"dt must be positive, got {self.dt}")
        if not self.T > 0:
            e.append(f"T must be positive, got {self.T}")
        elif self.dt > 0 and abs(round(self.T / self.dt) * self.dt - self.T) > 1e-9 * self.T:
            e.append(f"T={self.T} is not an integer multiple of dt={self.dt}")
        for name in ("record_every", "time_samples", "max_iters", "pair_count"):
            if getattr(self, name) < 1:
                e.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.ensemble_size < 0:
            e.append(f"ensemble_size must be >= 0, got {self.ensemble_size}")
        if self.particles < 0:
            e.append(f"particles must be >= 0, got {self.particles}")
        if not self.tol > 0:
            e.append(f"tol must be positive, got {self.tol}")
        if self.seed < 0:
            e.append(f"seed must be >= 0, got {self.seed}")
        if self.kind != "mixed" and self.kind not in GENERATOR_KINDS:
            e.append(f"kind must be 'mixed' or one of {GENERATOR_KINDS}, got {self.kind!r}")
        if not self.window > 0:
            e.append(f"window must be positive, got {self.window}")
        if self.lemma not in LEMMA_IDS:
            e.append(f"lemma must be one of {LEMMA_IDS}, got {self.lemma!r}")
        if any(not n > 0 for n in self.n_values):
            e.append("n_values must be positive")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            e.append("n_values must be strictly increasing")
        if self.scenario == "optimality" and len(self.n_values) < 3:
            e.append("optimality needs at least three n_values")
        if self.scenario == "optimality" and self.d < 2:
            e.append("optimality needs d >= 2")
        if self.scenario == "approx-lemma" and self.n_values and min(self.n_values) < 1:
            e.append("approx-lemma needs n_values >= 1")
        if self.scenario in ("energy-conservation", "lieb-thirring") and self.d not in (2, 3):
            e.append(f"{self.scenario} is defined for d = 2, 3 only")
        if self.scenario in ("strichartz-homogeneous", "strichartz-inhomogeneous", "dual-integral",
                             "lemma-ratios", "picard"):
            e.extend(_alpha_errors(self.d, self.alpha, self.scenario))
        if e:
            raise ConfigError(e)
        return self

    # ---- serialisation -------------------------------------------------------------

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        """Sorted JSON of every key except the output location."""
        d = self.as_dict()
        d.pop("output")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {','.join(repr(x) for x in v) if isinstance(v, list) else _text(v)}")
        return "\n".join(out) + "\n"


def _text(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _alpha_errors(d: int, alpha: float, scenario: str) -> list[str]:
    from .exponents import check_alpha
    try:
        check_alpha(d, alpha)
    except ValueError as exc:
        return [f"alpha: {exc}"]
    if scenario == "picard" and alpha < 1:
        return ["alpha: the solution norm needs alpha >= 1"]
    return []


def _coerce(tp, raw: str):
    tp = str(tp)
    raw = raw.strip()
    if tp == "int":
        return int(raw)
    if tp == "float":
        if raw.lower() in ("pi", "2pi", "2*pi"):
            return {"pi": math.pi}.get(raw.lower(), 2 * math.pi)
        return float(raw)
    if tp.startswith("list"):
        return [float(x) for x in raw.replace(" ", "").split(",") if x]
    return raw
