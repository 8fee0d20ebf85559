"""Per-epoch learning-rate schedules.

``ScheduleSpec`` is the malleable piecewise schedule: each piece ramps a
log-rate exponent linearly from ``exp_start`` to ``exp_end``, and the
rate is ``base_rate * exp(exponent)``.  Consecutive pieces chain
(``exp_start`` of a piece equals ``exp_end`` of the previous one).

Two abscissas are supported:

``"piece"`` (default)
    piece ``i`` ramps over its own epoch span, from the previous end
    epoch (epoch 1 for the first piece) to its end epoch, so the curve is
    continuous at every boundary.
``"global"``
    every piece uses the shared ramp ``(epoch - 1) / (M - 1)``.  The
    pieces then generally do not meet at boundaries.

A single piece is identical under both and equals a logspace schedule
with ``exp_start = log(a)``, ``exp_end = log(b)``.
"""

from dataclasses import dataclass, field
import math

from .errors import DomainError

__all__ = [
    "Piece",
    "ScheduleSpec",
    "StaircaseSpec",
    "rate_at",
    "linspace_rate",
    "logspace_rate",
    "staircase_rate",
    "schedule_from_dict",
]

ABSCISSAS = ("piece", "global")


@dataclass(frozen=True)
class Piece:
    end_epoch: int
    exp_start: float
    exp_end: float


@dataclass(frozen=True)
class ScheduleSpec:
    base_rate: float
    max_epoch: int
    pieces: tuple = field(default_factory=tuple)
    abscissa: str = "piece"

    def __post_init__(self):
        pieces = tuple(p if isinstance(p, Piece) else Piece(int(p[0]), float(p[1]), float(p[2]))
                       for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not (self.base_rate > 0 and math.isfinite(self.base_rate)):
            raise DomainError(f"base_rate must be positive, got {self.base_rate}")
        if self.max_epoch < 1:
            raise DomainError("max_epoch must be >= 1")
        if self.abscissa not in ABSCISSAS:
            raise DomainError(f"abscissa must be one of {ABSCISSAS}")
        if not pieces:
            raise DomainError("schedule needs at least one piece")
        prev_end = 0
        for i, p in enumerate(pieces):
            if not (math.isfinite(p.exp_start) and math.isfinite(p.exp_end)):
                raise DomainError(f"piece {i}: exponents must be finite")
            if p.end_epoch <= prev_end:
                raise DomainError("piece end epochs must be strictly increasing")
            if i and p.exp_start != pieces[i - 1].exp_end:
                raise DomainError(f"piece {i}: exp_start must equal the previous exp_end")
            prev_end = p.end_epoch
        if pieces[0].end_epoch == 1 and pieces[0].exp_start != pieces[0].exp_end:
            # a one-epoch first piece has no room to ramp; it would jump at the boundary
            raise DomainError("a first piece ending at epoch 1 must be constant")
        if prev_end != self.max_epoch:
            raise DomainError("last piece must end at max_epoch")

    @classmethod
    def constant(cls, rate, max_epoch):
        return cls(rate, max_epoch, ((max_epoch, 0.0, 0.0),))

    def piece_index(self, epoch):
        self._check_epoch(epoch)
        for i, p in enumerate(self.pieces):
            if epoch <= p.end_epoch:
                return i
        raise AssertionError("unreachable: last piece ends at max_epoch")

    def _check_epoch(self, epoch):
        if not 1 <= epoch <= self.max_epoch:
            raise DomainError(f"epoch {epoch} outside [1, {self.max_epoch}]")

    def exponent(self, epoch, piece=None):
        """Exponent at ``epoch``; ``piece`` forces a particular piece's formula."""
        self._check_epoch(epoch)
        i = self.piece_index(epoch) if piece is None else piece
        p = self.pieces[i]
        if self.abscissa == "global":
            start, span = 1, self.max_epoch - 1
        else:
            start = 1 if i == 0 else self.pieces[i - 1].end_epoch
            span = p.end_epoch - start
        t = (epoch - start) / span if span else 0.0
        return p.exp_start + (p.exp_end - p.exp_start) * t

    def rate(self, epoch, piece=None):
        return math.exp(self.exponent(epoch, piece)) * self.base_rate

    def to_dict(self):
        return {
            "kind": "malleable",
            "base_rate": self.base_rate,
            "max_epoch": self.max_epoch,
            "pieces": [[p.end_epoch, p.exp_start, p.exp_end] for p in self.pieces],
            "abscissa": self.abscissa,
        }


def rate_at(spec, epoch):
    return spec.rate(epoch)


def linspace_rate(a, b, base, M, epoch):
    if M < 2:
        raise DomainError("linspace needs M >= 2")
    if not 1 <= epoch <= M:
        raise DomainError(f"epoch {epoch} outside [1, {M}]")
    return (a + (b - a) / (M - 1) * (epoch - 1)) * base


def logspace_rate(a, b, base, M, epoch):
    if a <= 0 or b <= 0:
        raise DomainError("logspace endpoints must be positive")
    if M < 2:
        raise DomainError("logspace needs M >= 2")
    if not 1 <= epoch <= M:
        raise DomainError(f"epoch {epoch} outside [1, {M}]")
    la, lb = math.log(a), math.log(b)
    # same operation order as ScheduleSpec.exponent, so one piece matches bit for bit
    t = (epoch - 1) / (M - 1)
    return math.exp(la + (lb - la) * t) * base


def staircase_rate(steps, epoch):
    """Rate of the first ``(end_epoch, rate)`` step with ``end_epoch >= epoch``."""
    if epoch < 1:
        raise DomainError(f"epoch {epoch} must be >= 1")
    for end, rate in steps:
        if end >= epoch:
            return rate
    raise DomainError(f"epoch {epoch} not covered by staircase")


@dataclass(frozen=True)
class StaircaseSpec:
    steps: tuple

    def __post_init__(self):
        steps = tuple((int(e), float(r)) for e, r in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise DomainError("staircase needs at least one step")
        ends = [e for e, _ in steps]
        if any(b <= a for a, b in zip(ends, ends[1:])):
            raise DomainError("staircase end epochs must be strictly increasing")
        if any(r <= 0 for _, r in steps):
            raise DomainError("staircase rates must be positive")

    @property
    def max_epoch(self):
        return self.steps[-1][0]

    def rate(self, epoch):
        return staircase_rate(self.steps, epoch)

    def to_dict(self):
        return {"kind": "staircase", "steps": [list(s) for s in self.steps]}


def schedule_from_dict(doc):
    kind = doc.get("kind", "malleable")
    if kind == "staircase":
        return StaircaseSpec(doc["steps"])
    if kind == "constant":
        return ScheduleSpec.constant(doc["base_rate"], doc["max_epoch"])
    if kind == "malleable":
        return ScheduleSpec(doc["base_rate"], doc["max_epoch"], doc["pieces"],
                            doc.get("abscissa", "piece"))
    raise DomainError(f"unknown schedule kind {kind!r}")
