"""Run configuration: command-line flags, key=value config files and validation."""
from __future__ import annotations

import argparse
import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from ..errors import ConfigError
from ..expfam import FAMILY_NAMES, ExpFamily, get_family

COMMANDS = ("families", "simulate", "distance-sweep", "vst-clt", "coupling", "estimate", "transfer")
FAMILY_FREE = {"families"}

DEFAULT_N = {
    "simulate": (256,),
    "distance-sweep": tuple(2**k for k in range(8, 14)),
    "vst-clt": (10_000,),
    "coupling": (4096,),
    "estimate": (1024, 4096, 16384),
    "transfer": (4096,),
    "families": (),
}
DEFAULT_REPS = {
    "simulate": 1,
    "distance-sweep": 20_000,
    "vst-clt": 2000,
    "coupling": 500,
    "estimate": 100,
    "transfer": 100,
    "families": 0,
}
KINDS = ("glm", "gauss-hetero", "gauss-vst")

# keys accepted in config files (flag names with dashes turned into underscores)
FILE_KEYS = {
    "family", "beta", "L", "kappa0", "kappa0_star", "n", "n_list", "reps", "seed",
    "out", "format", "kind", "dict_size",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: str | None = None
    beta: float = 0.75
    L: float = 1.0
    kappa0: float = 1.0
    kappa0_star: float | None = None
    n_list: tuple[int, ...] = ()
    reps: int = 0
    seed: int = 0
    out_dir: str = "results"
    format: str = "csv"
    kind: str = "glm"
    dict_size: int = 32

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: expected one of {COMMANDS}, got {self.command!r}")
        if self.command not in FAMILY_FREE and self.family is None:
            raise ConfigError(f"family: required for '{self.command}' (one of {', '.join(FAMILY_NAMES)})")
        if self.family is not None:
            get_family(self.family)
        if not self.beta > 0.5:
            raise ConfigError(f"beta: must satisfy beta > 1/2, got {self.beta}")
        if self.L < 0:
            raise ConfigError(f"L: must be nonnegative, got {self.L}")
        if self.kappa0 <= 0:
            raise ConfigError(f"kappa0: must be positive, got {self.kappa0}")
        if self.kappa0_star is not None and self.kappa0_star <= 0:
            raise ConfigError(f"kappa0_star: must be positive, got {self.kappa0_star}")
        if list(self.n_list) != sorted(self.n_list) or any(n < 1 for n in self.n_list):
            raise ConfigError(f"n: must be positive and sorted ascending, got {self.n_list}")
        if self.reps < 0:
            raise ConfigError("reps: must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: expected csv or json, got {self.format!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind: expected one of {KINDS}, got {self.kind!r}")

    @property
    def kappa0_star_value(self) -> float:
        return 4.0 * self.kappa0 if self.kappa0_star is None else self.kappa0_star

    def family_model(self) -> ExpFamily:
        return get_family(self.family)

    def identity(self) -> dict:
        """The fields that determine the numerical output (paths and format excluded)."""
        d = asdict(self)
        d.pop("out_dir")
        d.pop("format")
        d["n_list"] = list(self.n_list)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def parse_n(text: str) -> tuple[int, ...]:
    """Parse ``"256..8192"`` (powers of two), ``"256,512"`` or a single count."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(float(p)) for p in text.split(".."))
            if lo < 1 or lo & (lo - 1) or hi & (hi - 1):
                raise ConfigError(f"n: range endpoints must be powers of two, got {text!r}")
            return tuple(2**k for k in range(int(math.log2(lo)), int(math.log2(hi)) + 1))
        return tuple(int(float(p)) for p in text.replace(" ", "").split(",") if p)
    except ValueError as exc:
        raise ConfigError(f"n: cannot parse {text!r}") from exc


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; unknown keys are rejected."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FILE_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}; allowed: {sorted(FILE_KEYS)}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="glmequiv",
        description="Monte-Carlo workbench for exponential-family regression and its Gaussian approximations.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, argument_default=None)
        sp.add_argument("--family", help=f"one of {', '.join(FAMILY_NAMES)} (case-insensitive)")
        sp.add_argument("--beta", type=float, help="Hölder exponent, > 1/2 (default 0.75)")
        sp.add_argument("--L", type=float, help="Hölder constant (default 1)")
        sp.add_argument("--kappa0", type=float, help="neighborhood rate constant (default 1)")
        sp.add_argument("--kappa0-star", type=float, help="local rate constant (default 4*kappa0)")
        sp.add_argument("--n", help="sample size(s): 4096, 256,512 or a power-of-two range 256..8192")
        sp.add_argument("--n-list", help="alias of --n")
        sp.add_argument("--reps", type=int, help=f"replications (default per command: {DEFAULT_REPS.get(cmd)})")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--out", help="output directory (default ./results)")
        sp.add_argument("--format", choices=("csv", "json"), help="row output format (default csv)")
        sp.add_argument("--kind", choices=KINDS, help="experiment to simulate (simulate only, default glm)")
        sp.add_argument("--dict-size", type=int, help="test-function dictionary size (coupling only, default 32)")
        sp.add_argument("--config", help="key = value file mirroring these flags")
    return p


_CASTS = {
    "beta": float, "L": float, "kappa0": float, "kappa0_star": float, "reps": int, "seed": int,
    "dict_size": int,
}


def parse_config(argv=None) -> RunConfig:
    """Build a validated :class:`RunConfig` from command-line arguments.

    Explicit flags win over values from ``--config``; anything unset falls back
    to the command's defaults.
    """
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("invalid command line (see --help)") from None
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for key in FILE_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    try:
        kw = {k: _CASTS[k](values[k]) for k in _CASTS if k in values}
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from None
    n_text = values.get("n") or values.get("n_list")
    kw["n_list"] = parse_n(n_text) if n_text is not None else DEFAULT_N[ns.command]
    kw.setdefault("reps", DEFAULT_REPS[ns.command])
    for key, target in (("family", "family"), ("out", "out_dir"), ("format", "format"), ("kind", "kind")):
        if key in values:
            kw[target] = values[key]
    return RunConfig(command=ns.command, **kw)


__all__ = ["RunConfig", "COMMANDS", "parse_config", "parse_n", "read_config_file", "build_parser"]
