"""Distance-to-reward transforms and the streaming scoring protocol.

The reverse sigmoid maps a distance ``d`` with configured range ``[low,
high]`` and sharpness ``k`` to a reward in (0, 1):

    R(d) = 1 / (1 + 10 ** (10*k * (d - mid) / (high - low)))

where ``mid = (low + high) / 2``, so R(mid) is exactly 0.5 and smaller
distances earn higher rewards. Composite scores are weighted means of named
components in [0, 1]; generation loops drive scoring through a line protocol
(``serve_stream``) over plain pipes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Optional, Sequence

import numpy as np

from .dataset import EmbeddingMatrix
from .distance import DistanceKind, best_pool
from .errors import ComputeError, PedScreenError

#: Exponent above which 10**e is short-circuited (it would overflow near 308
#: and collapse the reward to exact 0); the matching guard on the other side
#: catches saturation to exact 1. Both keep rewards inside the open (0, 1).
_EXPONENT_CLAMP = 300.0
_FLOOR = 5e-324  # smallest positive subnormal
_CEIL = 1.0 - 2.0 ** -53  # largest double below 1; above any unsaturated value


@dataclass(frozen=True)
class SigmoidParams:
    low: float
    high: float
    k: float

    def __post_init__(self):
        if not (self.high > self.low):
            raise ComputeError("BAD_PARAMS", f"need high > low, got [{self.low}, {self.high}]")
        if not (self.k > 0.0):
            raise ComputeError("BAD_PARAMS", f"need k > 0, got {self.k}")

    @property
    def mid(self) -> float:
        return (self.low + self.high) / 2.0


#: Published distance ranges per embedding flavor (Euclidean rewards).
PRESETS: dict[str, SigmoidParams] = {
    "geodiff2d": SigmoidParams(0.1, 1.2, 0.25),
    "geodiff3d": SigmoidParams(1.0, 10.0, 0.25),
    "geodiffconcat": SigmoidParams(1.0, 10.0, 0.25),
    "molformer": SigmoidParams(5.0, 17.0, 0.25),
}


def reverse_sigmoid(d: float, p: SigmoidParams) -> float:
    """Bounded decreasing reward for a distance; R(mid) == 0.5 exactly."""
    d = float(d)
    if not math.isfinite(d):
        raise ComputeError("NON_FINITE_INPUT", f"distance must be finite, got {d}")
    exponent = 10.0 * p.k * (d - p.mid) / (p.high - p.low)
    if exponent > _EXPONENT_CLAMP:
        return _FLOOR
    value = 1.0 / (1.0 + 10.0 ** exponent)
    return _CEIL if value == 1.0 else value


@dataclass(frozen=True)
class CompositeSpec:
    """Named components and positive weights; defaults to equal weights."""

    components: tuple[tuple[str, float], ...] = (("ped", 1.0), ("alert", 1.0))

    def __post_init__(self):
        for name, weight in self.components:
            if not (weight > 0.0):
                raise ComputeError("BAD_PARAMS", f"component {name!r} weight must be > 0")


def composite_score(parts: Mapping[str, float], spec: CompositeSpec) -> float:
    """Weighted mean of the spec's components; all values must be in [0, 1]."""
    total = 0.0
    weight_sum = 0.0
    for name, weight in spec.components:
        if name not in parts:
            raise ComputeError("MISSING_COMPONENT", f"no value for component {name!r}")
        value = float(parts[name])
        if not (0.0 <= value <= 1.0):
            raise ComputeError("OUT_OF_RANGE", f"component {name!r}={value} outside [0, 1]")
        total += weight * value
        weight_sum += weight
    return total / weight_sum


def score_batch(cands: EmbeddingMatrix, refs: EmbeddingMatrix, kind: DistanceKind,
                p: SigmoidParams, alerts: Optional[Sequence[int]] = None,
                threads: int = 1) -> np.ndarray:
    """Reward per candidate from its best-pooled distance to the references.

    With ``alerts`` (one 0/1 flag per candidate) the reward is the
    equal-weight mean of the sigmoid score and the flag; without, it is the
    sigmoid score alone. Batch output equals element-wise application.
    """
    pooled = best_pool(cands, refs, kind, threads=threads, keep_per_reference=False).pooled
    if alerts is not None:
        flags = [float(a) for a in alerts]
        if len(flags) != pooled.size:
            raise ComputeError(
                "BAD_ALERTS", f"{len(flags)} alert flags for {pooled.size} candidates"
            )
        if any(f not in (0.0, 1.0) for f in flags):
            raise ComputeError("BAD_ALERTS", "alert flags must be 0 or 1")
        spec = CompositeSpec()
        rewards = [
            composite_score({"ped": reverse_sigmoid(d, p), "alert": a}, spec)
            for d, a in zip(pooled, flags)
        ]
    else:
        rewards = [reverse_sigmoid(d, p) for d in pooled]
    return np.asarray(rewards, dtype=np.float64)


# --- streaming protocol -------------------------------------------------------


@dataclass(frozen=True)
class StreamConfig:
    """Fixed scoring context for one serve_stream session."""

    kind: DistanceKind
    params: SigmoidParams
    refs: Optional[EmbeddingMatrix] = None
    cands: Optional[EmbeddingMatrix] = None
    alerts: Optional[tuple[int, ...]] = None  # aligned with cands rows


def _score_row(row: int, config: StreamConfig) -> float:
    if config.cands is None:
        raise ComputeError("BAD_ROW", "no candidate matrix configured for @row requests")
    if config.refs is None or config.refs.rows == 0:
        raise ComputeError("BAD_ROW", "no references configured for @row requests")
    if not (0 <= row < config.cands.rows):
        raise ComputeError(
            "BAD_ROW", f"row {row} outside candidate matrix of {config.cands.rows} rows"
        )
    if config.alerts is not None and row >= len(config.alerts):
        raise ComputeError("BAD_ROW", f"row {row} outside alert vector of {len(config.alerts)}")
    pooled = best_pool(
        config.cands.data[row][None, :], config.refs, config.kind, keep_per_reference=False
    ).pooled[0]
    reward = reverse_sigmoid(float(pooled), config.params)
    if config.alerts is not None:
        reward = composite_score(
            {"ped": reward, "alert": float(config.alerts[row])}, CompositeSpec()
        )
    return reward


def serve_stream(lines_in: Iterable[str], out: IO[str], config: StreamConfig) -> None:
    """Answer scoring requests line by line until EOF.

    Requests are ``id\\t<distance>`` (precomputed distance) or ``id\\t@<row>``
    (row index into the configured candidate matrix). Each request yields one
    response line, in order: ``id\\t<reward>`` with the reward printed as the
    shortest round-trip decimal, or ``id\\tERR\\t<code>`` for malformed input.
    Errors never stop the stream.
    """
    for raw in lines_in:
        line = raw.rstrip("\r\n")
        fields = line.split("\t")
        ident = fields[0]
        if len(fields) != 2:
            out.write(f"{ident}\tERR\tMALFORMED_LINE\n")
            out.flush()
            continue
        payload = fields[1]
        try:
            if payload.startswith("@"):
                try:
                    row = int(payload[1:])
                except ValueError:
                    raise ComputeError("BAD_ROW", f"bad row index {payload!r}")
                reward = _score_row(row, config)
            else:
                try:
                    d = float(payload)
                except ValueError:
                    raise ComputeError("BAD_NUMBER", f"bad distance {payload!r}")
                reward = reverse_sigmoid(d, config.params)
            out.write(f"{ident}\t{reward!r}\n")
        except PedScreenError as exc:
            out.write(f"{ident}\tERR\t{exc.code}\n")
        out.flush()
