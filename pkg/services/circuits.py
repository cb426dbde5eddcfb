"""
Gate and circuit containers shared by the simulator, the transpiler and the
encoding builder.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, Tuple

from services.errors import GateIndexError, ConfigError


class GateKind(str, Enum):
    X = "X"
    SQRT_X = "SqrtX"
    RZ = "Rz"
    RY = "Ry"
    RX = "Rx"
    ECR = "ECR"

    @property
    def arity(self) -> int:
        return 2 if self is GateKind.ECR else 1

    @property
    def is_parametric(self) -> bool:
        return self in (GateKind.RZ, GateKind.RY, GateKind.RX)


NATIVE_KINDS = frozenset({GateKind.X, GateKind.SQRT_X, GateKind.RZ, GateKind.ECR})


@dataclass(frozen=True)
class GateOp:
    """One gate acting on `targets`; `angle` is in radians and only used by rotations"""

    kind: GateKind
    targets: Tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        targets = tuple(int(q) for q in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != self.kind.arity:
            raise GateIndexError(
                f"{self.kind.value} takes {self.kind.arity} target(s), got {len(targets)}"
            )
        if len(set(targets)) != len(targets):
            raise GateIndexError(f"{self.kind.value} targets must be distinct, got {targets}")
        if any(q < 0 for q in targets):
            raise GateIndexError(f"negative qubit index in {targets}")

    @classmethod
    def x(cls, qubit: int) -> "GateOp":
        return cls(GateKind.X, (qubit,))

    @classmethod
    def sqrt_x(cls, qubit: int) -> "GateOp":
        return cls(GateKind.SQRT_X, (qubit,))

    @classmethod
    def rz(cls, qubit: int, angle: float) -> "GateOp":
        return cls(GateKind.RZ, (qubit,), float(angle))

    @classmethod
    def ry(cls, qubit: int, angle: float) -> "GateOp":
        return cls(GateKind.RY, (qubit,), float(angle))

    @classmethod
    def rx(cls, qubit: int, angle: float) -> "GateOp":
        return cls(GateKind.RX, (qubit,), float(angle))

    @classmethod
    def ecr(cls, first: int, second: int) -> "GateOp":
        return cls(GateKind.ECR, (first, second))

    def with_angle(self, angle: float) -> "GateOp":
        return GateOp(self.kind, self.targets, float(angle))

    def check_width(self, n_qubits: int) -> None:
        for q in self.targets:
            if q >= n_qubits:
                raise GateIndexError(
                    f"{self.kind.value} target {q} out of range for {n_qubits} qubit(s)"
                )


@dataclass
class Circuit:
    """Ordered gate list over `n_qubits`; ops apply first to last"""

    n_qubits: int
    ops: List[GateOp] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigError(f"circuit needs at least one qubit, got {self.n_qubits}")
        self.ops = list(self.ops)
        for op in self.ops:
            self._check(op)

    def _check(self, op: GateOp) -> None:
        op.check_width(self.n_qubits)

    def append(self, op: GateOp) -> "Circuit":
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[GateOp]:
        return iter(self.ops)

    def kinds(self) -> set:
        return {op.kind for op in self.ops}


@dataclass
class NativeCircuit(Circuit):
    """Circuit restricted to X, SqrtX, Rz and ECR"""

    def _check(self, op: GateOp) -> None:
        super()._check(op)
        if op.kind not in NATIVE_KINDS:
            raise ConfigError(f"{op.kind.value} is not a native gate")
