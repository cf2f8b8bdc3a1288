"""Named corruption sets: test grids, the imperceptible set, and training mixes.

Built-in sets come in two dataset profiles (CIFAR, 3x32x32; TIN, 3x64x64):

* ``mCE_Lp`` — the 9-norm test grid, 10 severities per norm.
* ``iCE``    — 6 quasi-imperceptible sphere corruptions.
* ``C1``     — training mix over all 9 norms with the full severity grids.
* ``C2``     — training mix over p in {0, 2, inf} with the full grids.
* ``C3``     — training mix over all 9 norms restricted to the lowest 5
  severities of each grid.

Only the (min, max) endpoints of each severity range and the 5th value (the
top of the lowest-5 training restriction) are fixed reference values; the
remaining severities are filled in geometrically. Each 10-value grid is
therefore built from two geometric segments that share the 5th value as a
knot, which keeps all published endpoints exact while the C3 sets remain a
strict prefix of the full grids.

Built-ins are immutable and versioned: the expanded values for a given
registry version never change, so metric values stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .norms import PNorm
from .rng import RngStream
from .sampler import BALL, SPHERE, CorruptionSpec, RadialMode

__all__ = [
    "REGISTRY_VERSION",
    "BUILTIN_NAMES",
    "PROFILES",
    "LP_TEST_NORMS",
    "EpsilonGrid",
    "SpecGroup",
    "CorruptionSet",
    "SetFileError",
    "expand_grid",
    "builtin_set",
    "draw_training_spec",
    "parse_set_file",
    "parse_sets_file",
    "serialize_set",
    "resolve_set",
]

REGISTRY_VERSION = 1

PROFILES = ("CIFAR", "TIN")
BUILTIN_NAMES = ("mCE_Lp", "iCE", "C1", "C2", "C3")
INTENTS = ("test_grid", "imperceptible", "training")

IMPERCEPTIBLE_LABEL = "imperceptible"

_INF = math.inf

# The nine test-grid norms, in severity-table order.
LP_TEST_NORMS = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0, _INF)

# (epsilon_min, epsilon_max) of the 10-value severity range per norm.
_LP_RANGES = {
    "CIFAR": {
        0.0: (0.005, 0.12),
        0.5: (2.5e4, 4e5),
        1.0: (12.5, 200.0),
        2.0: (0.25, 5.0),
        5.0: (0.03, 0.6),
        10.0: (0.02, 0.3),
        50.0: (0.01, 0.18),
        200.0: (0.01, 0.15),
        _INF: (0.005, 0.15),
    },
    "TIN": {
        0.0: (0.01, 0.3),
        0.5: (2e5, 1.2e7),
        1.0: (37.5, 1500.0),
        2.0: (0.5, 20.0),
        5.0: (0.05, 1.5),
        10.0: (0.02, 0.7),
        50.0: (0.02, 0.35),
        200.0: (0.02, 0.3),
        _INF: (0.01, 0.3),
    },
}

# 5th severity of each 10-value grid == top of the lowest-5 training subset.
_GRID_KNOTS = {
    "CIFAR": {
        0.0: 0.03,
        0.5: 1.5e5,
        1.0: 75.0,
        2.0: 1.5,
        5.0: 0.2,
        10.0: 0.1,
        50.0: 0.06,
        200.0: 0.05,
        _INF: 0.04,
    },
    "TIN": {
        0.0: 0.075,
        0.5: 1.8e6,
        1.0: 300.0,
        2.0: 4.0,
        5.0: 0.3,
        10.0: 0.14,
        50.0: 0.1,
        200.0: 0.08,
        _INF: 0.06,
    },
}

# Quasi-imperceptible sphere corruptions: (p, epsilon), 6 per profile.
_ICE_SPECS = {
    "CIFAR": ((0.5, 2.5e4), (1.0, 25.0), (2.0, 0.5), (10.0, 0.03), (50.0, 0.02), (_INF, 0.01)),
    "TIN": ((0.5, 7e5), (1.0, 125.0), (2.0, 2.0), (10.0, 0.06), (50.0, 0.04), (_INF, 0.01)),
}

_C2_NORMS = (0.0, 2.0, _INF)


class SetFileError(ValueError):
    """Corruption-set config rejected: syntax or invariant violation."""


@dataclass(frozen=True)
class EpsilonGrid:
    """An evenly spaced severity range (log- or linear-spaced, endpoints exact)."""

    eps_min: float
    eps_max: float
    count: int
    spacing: str = "log"

    def __post_init__(self) -> None:
        if not (0.0 < float(self.eps_min)):
            raise ValueError(f"eps_min must be positive, got {self.eps_min!r}")
        if not (float(self.eps_min) < float(self.eps_max)):
            raise ValueError(f"eps_min must be below eps_max, got [{self.eps_min!r}, {self.eps_max!r}]")
        if int(self.count) < 2:
            raise ValueError(f"count must be >= 2, got {self.count!r}")
        if self.spacing not in ("log", "linear"):
            raise ValueError(f"spacing must be 'log' or 'linear', got {self.spacing!r}")


def expand_grid(grid: EpsilonGrid) -> list[float]:
    """Expand a grid to `count` values with exact endpoints."""
    lo, hi, n = float(grid.eps_min), float(grid.eps_max), int(grid.count)
    if grid.spacing == "log":
        ratio = hi / lo
        vals = [lo * ratio ** (i / (n - 1)) for i in range(n)]
    else:
        step = (hi - lo) / (n - 1)
        vals = [lo + i * step for i in range(n)]
    vals[0] = lo
    vals[-1] = hi
    return vals


def _geometric(lo: float, hi: float, n: int) -> list[float]:
    return expand_grid(EpsilonGrid(lo, hi, n, "log"))


def _anchored_grid(lo: float, knot: float, hi: float) -> tuple[float, ...]:
    """10 severities: 5 geometric on [lo, knot], then 5 continuing to hi."""
    lower = _geometric(lo, knot, 5)
    step = (hi / knot) ** (1.0 / 5.0)
    upper = [knot * step**i for i in range(1, 6)]
    upper[-1] = hi
    return tuple(lower + upper)


@dataclass(frozen=True)
class SpecGroup:
    """All severities of one norm within a set (identity groups have no epsilons)."""

    p: PNorm | None
    epsilons: tuple[float, ...]
    mode: RadialMode = BALL
    clamp: bool = True

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if self.p is None:
            if eps:
                raise SetFileError("identity group carries no epsilon values")
            return
        if not eps:
            raise SetFileError("group must carry at least one epsilon value")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise SetFileError(f"epsilon values must be strictly increasing, got {eps}")

    def specs(self) -> tuple[CorruptionSpec, ...]:
        if self.p is None:
            return (CorruptionSpec(None, 0.0, BALL, self.clamp),)
        return tuple(CorruptionSpec(self.p, e, self.mode, self.clamp) for e in self.epsilons)

    @property
    def label(self) -> str:
        return "identity" if self.p is None else self.p.label


@dataclass(frozen=True)
class CorruptionSet:
    name: str
    profile: str
    intent: str
    groups: tuple[SpecGroup, ...]
    version: int = REGISTRY_VERSION

    def __post_init__(self) -> None:
        if not self.name:
            raise SetFileError("set name must be nonempty")
        if self.profile not in PROFILES and self.profile != "custom":
            raise SetFileError(f"profile must be one of {PROFILES + ('custom',)}, got {self.profile!r}")
        if self.intent not in INTENTS:
            raise SetFileError(f"intent must be one of {INTENTS}, got {self.intent!r}")
        if not self.groups:
            raise SetFileError("set must contain at least one group")
        if self.intent == "test_grid":
            labels = [g.label for g in self.groups]
            if len(set(labels)) != len(labels):
                raise SetFileError(f"test_grid groups must have distinct norms, got {labels}")
            if self.profile in PROFILES:
                for g in self.groups:
                    if len(g.epsilons) != 10:
                        raise SetFileError(
                            f"built-in-profile test grids carry 10 severities per norm; "
                            f"group {g.label} has {len(g.epsilons)}"
                        )
        if self.intent == "imperceptible" and self.profile in PROFILES:
            if len(self.specs) != 6:
                raise SetFileError(
                    f"built-in-profile imperceptible sets carry 6 specs, got {len(self.specs)}"
                )

    @property
    def specs(self) -> tuple[CorruptionSpec, ...]:
        out: list[CorruptionSpec] = []
        for g in self.groups:
            out.extend(g.specs())
        return tuple(out)

    def layout(self):
        """(label, severity, spec) triples addressing every cell of a non-training set."""
        if self.intent == "training":
            raise ValueError("training sets have no severity layout; specs are drawn at random")
        triples = []
        if self.intent == "imperceptible":
            for j, spec in enumerate(self.specs, start=1):
                triples.append((IMPERCEPTIBLE_LABEL, j, spec))
        else:
            for g in self.groups:
                for j, spec in enumerate(g.specs(), start=1):
                    triples.append((g.label, j, spec))
        return triples

    def key(self):
        """Content identity: expanded specs plus naming. Used for round-trip equality."""
        return (
            self.name,
            self.profile,
            self.intent,
            tuple((s.p_text, s.epsilon, str(s.radial_mode), s.clamp) for s in self.specs),
        )


def _lp_grid(profile: str, p: float) -> tuple[float, ...]:
    lo, hi = _LP_RANGES[profile][p]
    return _anchored_grid(lo, _GRID_KNOTS[profile][p], hi)


def _normalize_profile(profile: str) -> str:
    key = profile.strip().upper()
    if key == "CIFAR":
        return "CIFAR"
    if key in ("TIN", "TINYIMAGENET"):
        return "TIN"
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


_CANONICAL_NAMES = {n.lower(): n for n in BUILTIN_NAMES}


def builtin_set(name: str, profile: str) -> CorruptionSet:
    """Return one of the built-in corruption sets for a dataset profile."""
    canonical = _CANONICAL_NAMES.get(name.strip().lower())
    if canonical is None:
        raise ValueError(f"unknown built-in set {name!r}; expected one of {BUILTIN_NAMES}")
    prof = _normalize_profile(profile)

    if canonical == "mCE_Lp":
        groups = tuple(SpecGroup(PNorm(p), _lp_grid(prof, p), BALL) for p in LP_TEST_NORMS)
        return CorruptionSet(canonical, prof, "test_grid", groups)
    if canonical == "iCE":
        groups = tuple(SpecGroup(PNorm(p), (eps,), SPHERE) for p, eps in _ICE_SPECS[prof])
        return CorruptionSet(canonical, prof, "imperceptible", groups)
    if canonical == "C1":
        groups = tuple(SpecGroup(PNorm(p), _lp_grid(prof, p), BALL) for p in LP_TEST_NORMS)
        return CorruptionSet(canonical, prof, "training", groups)
    if canonical == "C2":
        groups = tuple(SpecGroup(PNorm(p), _lp_grid(prof, p), BALL) for p in _C2_NORMS)
        return CorruptionSet(canonical, prof, "training", groups)
    # C3: lowest 5 severities of each full grid
    groups = tuple(SpecGroup(PNorm(p), _lp_grid(prof, p)[:5], BALL) for p in LP_TEST_NORMS)
    return CorruptionSet(canonical, prof, "training", groups)


def draw_training_spec(cset: CorruptionSet, rng) -> CorruptionSpec:
    """Pick one spec uniformly over all (p, epsilon) entries of a training set."""
    if cset.intent != "training":
        raise ValueError(f"set {cset.name!r} has intent {cset.intent!r}, not training")
    specs = cset.specs
    if not specs:
        raise ValueError("cannot draw from an empty set")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return specs[int(gen.integers(0, len(specs)))]


# --- config file grammar ---------------------------------------------------
#
#   set <name> profile=<CIFAR|TIN|custom> intent=<test_grid|imperceptible|training>
#   p=<value|inf|0|identity> eps_min=<r> eps_max=<r> n=<int> spacing=<log|linear> \
#       mode=<ball|sphere|exponent:k> [clamp=<on|off>]
#
# '#' starts a comment. n=1 requires eps_min == eps_max. Consecutive lines
# with the same (p, mode, clamp) merge into one group, so a grid may be
# written as several segments. Serialization emits one n=1 line per value
# with shortest round-trip float representations, which re-parses to the
# bit-identical set.


def _parse_float(token: str, lineno: int, fieldname: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SetFileError(f"line {lineno}: field {fieldname}: not a number: {token!r}") from None
    if math.isnan(value):
        raise SetFileError(f"line {lineno}: field {fieldname}: NaN is not allowed")
    return value


def _parse_fields(parts: list[str], lineno: int) -> dict[str, str]:
    fields: dict[str, str] = {}
    for part in parts:
        if "=" not in part:
            raise SetFileError(f"line {lineno}: expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        if key in fields:
            raise SetFileError(f"line {lineno}: duplicate field {key!r}")
        fields[key] = value
    return fields


def _parse_group_line(parts: list[str], lineno: int) -> SpecGroup:
    fields = _parse_fields(parts, lineno)
    p_text = fields.pop("p", None)
    if p_text is None:
        raise SetFileError(f"line {lineno}: group line is missing field p")
    if p_text.strip().lower() == "identity":
        clamp = _parse_clamp(fields.pop("clamp", "on"), lineno)
        if fields:
            raise SetFileError(f"line {lineno}: identity group takes no fields {sorted(fields)!r}")
        return SpecGroup(None, (), BALL, clamp)
    try:
        p = PNorm.parse(p_text)
    except ValueError as exc:
        raise SetFileError(f"line {lineno}: field p: {exc}") from None

    required = ("eps_min", "eps_max", "n", "spacing", "mode")
    missing = [k for k in required if k not in fields]
    if missing:
        raise SetFileError(f"line {lineno}: missing fields {missing}")
    eps_min = _parse_float(fields.pop("eps_min"), lineno, "eps_min")
    eps_max = _parse_float(fields.pop("eps_max"), lineno, "eps_max")
    try:
        n = int(fields.pop("n"))
    except ValueError:
        raise SetFileError(f"line {lineno}: field n: not an integer") from None
    spacing = fields.pop("spacing")
    try:
        mode = RadialMode.parse(fields.pop("mode"))
    except ValueError as exc:
        raise SetFileError(f"line {lineno}: field mode: {exc}") from None
    clamp = _parse_clamp(fields.pop("clamp", "on"), lineno)
    if fields:
        raise SetFileError(f"line {lineno}: unknown fields {sorted(fields)!r}")

    if n == 1:
        if eps_min != eps_max:
            raise SetFileError(f"line {lineno}: field n: n=1 requires eps_min == eps_max")
        values: tuple[float, ...] = (eps_min,)
    else:
        try:
            values = tuple(expand_grid(EpsilonGrid(eps_min, eps_max, n, spacing)))
        except ValueError as exc:
            raise SetFileError(f"line {lineno}: {exc}") from None
    try:
        return SpecGroup(p, values, mode, clamp)
    except (SetFileError, ValueError) as exc:
        raise SetFileError(f"line {lineno}: {exc}") from None


def _parse_clamp(token: str, lineno: int) -> bool:
    t = token.strip().lower()
    if t in ("on", "true", "1"):
        return True
    if t in ("off", "false", "0"):
        return False
    raise SetFileError(f"line {lineno}: field clamp: expected on/off, got {token!r}")


def _merge_groups(groups: list[SpecGroup]) -> tuple[SpecGroup, ...]:
    merged: list[SpecGroup] = []
    for g in groups:
        if (
            merged
            and g.p is not None
            and merged[-1].p == g.p
            and merged[-1].mode == g.mode
            and merged[-1].clamp == g.clamp
            and merged[-1].epsilons[-1] < g.epsilons[0]
        ):
            prev = merged.pop()
            merged.append(SpecGroup(g.p, prev.epsilons + g.epsilons, g.mode, g.clamp))
        else:
            merged.append(g)
    return tuple(merged)


def parse_sets_file(text: str) -> list[CorruptionSet]:
    """Parse a config that may define several sets; duplicate names are rejected."""
    sets: list[CorruptionSet] = []
    names: set[str] = set()
    header: tuple[str, str, str, int] | None = None  # name, profile, intent, lineno
    groups: list[SpecGroup] = []

    def flush() -> None:
        nonlocal header, groups
        if header is None:
            return
        name, profile, intent, lineno = header
        if not groups:
            raise SetFileError(f"line {lineno}: set {name!r} declares no corruption groups")
        try:
            sets.append(CorruptionSet(name, profile, intent, _merge_groups(groups)))
        except SetFileError as exc:
            raise SetFileError(f"line {lineno}: set {name!r}: {exc}") from None
        header, groups = None, []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "set":
            flush()
            if len(parts) < 2:
                raise SetFileError(f"line {lineno}: set header needs a name")
            name = parts[1]
            fields = _parse_fields(parts[2:], lineno)
            profile = fields.pop("profile", "custom")
            intent = fields.pop("intent", None)
            if intent is None:
                raise SetFileError(f"line {lineno}: set header is missing field intent")
            if fields:
                raise SetFileError(f"line {lineno}: unknown fields {sorted(fields)!r}")
            if profile.upper() in PROFILES:
                profile = profile.upper()
            elif profile.lower() == "custom":
                profile = "custom"
            if name in names:
                raise SetFileError(f"line {lineno}: duplicate set name {name!r}")
            names.add(name)
            header = (name, profile, intent, lineno)
        else:
            if header is None:
                raise SetFileError(f"line {lineno}: corruption group before any 'set' header")
            groups.append(_parse_group_line(parts, lineno))
    flush()
    if not sets:
        raise SetFileError("config defines no corruption sets")
    return sets


def parse_set_file(text: str) -> CorruptionSet:
    """Parse a config defining exactly one corruption set."""
    sets = parse_sets_file(text)
    if len(sets) != 1:
        raise SetFileError(f"expected exactly one set in config, found {len(sets)}")
    return sets[0]


def serialize_set(cset: CorruptionSet) -> str:
    """Canonical text form: one n=1 line per (p, epsilon) with exact float reprs.

    ``parse_set_file(serialize_set(s)).key() == s.key()`` for every valid set.
    """
    lines = [
        f"# lpcorrupt corruption-set registry v{REGISTRY_VERSION}",
        f"set {cset.name} profile={cset.profile} intent={cset.intent}",
    ]
    for g in cset.groups:
        clamp_suffix = "" if g.clamp else " clamp=off"
        if g.p is None:
            lines.append(f"p=identity{clamp_suffix}")
            continue
        for eps in g.epsilons:
            r = repr(eps)
            lines.append(
                f"p={g.p} eps_min={r} eps_max={r} n=1 spacing=log mode={g.mode}{clamp_suffix}"
            )
    return "\n".join(lines) + "\n"


def resolve_set(name_or_path: str, profile: str | None = None) -> CorruptionSet:
    """Resolve a built-in set name, or load a config file path."""
    if name_or_path.strip().lower() in _CANONICAL_NAMES:
        if profile is None:
            raise ValueError(f"built-in set {name_or_path!r} requires a profile (CIFAR or TIN)")
        return builtin_set(name_or_path, profile)
    from pathlib import Path

    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(
            f"{name_or_path!r} is neither a built-in set name {BUILTIN_NAMES} nor an existing file"
        )
    return parse_set_file(path.read_text())
