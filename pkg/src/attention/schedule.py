"""
Overlap schedules for MOHSA encoders.
Builds the per-layer overlap dimension from a named policy and parses the
policy names used in the ablation tables ("fixed 1", "fixed half",
"inc-0 (3)", "dec-1 (1)").
"""

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

from config.settings import ConfigurationError

HALF = "half"
POLICY_GRAMMAR = '"fixed <k>" | "fixed half" | "<inc|dec>-<0|1> (<x>)"   (case-insensitive, x >= 1)'

_FIXED_RE = re.compile(r'^\s*fixed\s+(\d+|half)\s*$', re.IGNORECASE)
_STEP_RE = re.compile(r'^\s*(inc|dec)\s*-\s*([01])\s*\(\s*(\d+)\s*\)\s*$', re.IGNORECASE)


class ScheduleOverflowError(ConfigurationError):
    """An overlap dimension exceeds the head dimension."""
    pass


class PolicyParseError(ConfigurationError):
    """A policy string does not match the grammar."""
    pass


@dataclass(frozen=True)
class SchedulePolicy:
    """fixed k / fixed half, or inc/dec with a period and a 0/1 index base."""
    kind: str
    fixed_value: Optional[Union[int, str]] = None
    period_x: Optional[int] = None
    index_base: Optional[int] = None

    def __post_init__(self):
        if self.kind == "fixed":
            if not (self.fixed_value == HALF or (isinstance(self.fixed_value, int) and self.fixed_value >= 0)):
                raise ConfigurationError(f"fixed policy needs a non-negative integer or 'half', got {self.fixed_value!r}")
        elif self.kind in ("inc", "dec"):
            if not isinstance(self.period_x, int) or self.period_x < 1:
                raise ConfigurationError(f"{self.kind} policy needs period >= 1, got {self.period_x!r}")
            if self.index_base not in (0, 1):
                raise ConfigurationError(f"{self.kind} policy needs index base 0 or 1, got {self.index_base!r}")
        else:
            raise ConfigurationError(f"Unknown schedule kind: {self.kind!r}")


@dataclass(frozen=True)
class OverlapSchedule:
    """Overlap dimension o_l for each encoder layer, layer 1 first."""
    dims: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self) -> Iterator[int]:
        return iter(self.dims)

    def __getitem__(self, index: int) -> int:
        return self.dims[index]

    def format(self) -> str:
        return "(" + ",".join(str(o) for o in self.dims) + ")"


def _inc_dims(base: int, period: int, depth: int) -> Tuple[int, ...]:
    return tuple((layer - 1) // period + base for layer in range(1, depth + 1))


def build_schedule(policy: SchedulePolicy, depth: int, head_dim: int) -> OverlapSchedule:
    """Expand a policy into one overlap dimension per layer."""
    if depth < 1 or head_dim < 1:
        raise ConfigurationError(f"depth and head_dim must be >= 1, got depth={depth}, head_dim={head_dim}")

    if policy.kind == "fixed":
        value = head_dim // 2 if policy.fixed_value == HALF else policy.fixed_value
        dims = (value,) * depth
    elif policy.kind == "inc":
        dims = _inc_dims(policy.index_base, policy.period_x, depth)
    else:
        dims = tuple(reversed(_inc_dims(policy.index_base, policy.period_x, depth)))

    for layer, o in enumerate(dims, start=1):
        if o > head_dim:
            raise ScheduleOverflowError(
                f"{render_policy(policy)} gives overlap {o} at layer {layer}, "
                f"above head_dim {head_dim}; overlap only reaches the adjacent heads")
    return OverlapSchedule(dims)


def parse_policy(name: str) -> SchedulePolicy:
    """Parse a policy name; "original" is accepted for fixed 0."""
    text = (name or "").strip()
    if text.lower() == "original":
        return SchedulePolicy("fixed", fixed_value=0)

    match = _FIXED_RE.match(text)
    if match:
        token = match.group(1).lower()
        return SchedulePolicy("fixed", fixed_value=HALF if token == HALF else int(token))

    match = _STEP_RE.match(text)
    if match and int(match.group(3)) >= 1:
        return SchedulePolicy(match.group(1).lower(), period_x=int(match.group(3)), index_base=int(match.group(2)))

    raise PolicyParseError(f"Cannot parse schedule policy {name!r}; expected {POLICY_GRAMMAR}")


def render_policy(policy: SchedulePolicy) -> str:
    if policy.kind == "fixed":
        return f"fixed {policy.fixed_value}"
    return f"{policy.kind}-{policy.index_base} ({policy.period_x})"
