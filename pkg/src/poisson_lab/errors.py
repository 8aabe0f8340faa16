"""Exception types shared across the toolkit."""

from __future__ import annotations


class PoissonLabError(Exception):
    """Base class for every error raised by poisson_lab."""


class ExprSyntaxError(PoissonLabError, ValueError):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at position {position}: {message}")


class UnknownSymbol(ExprSyntaxError):
    def __init__(self, name: str, position: int = -1):
        self.name = name
        super().__init__(position, f"unknown symbol {name!r}")


class DomainError(PoissonLabError, ArithmeticError):
    """Evaluation left the domain of a function (log of a negative, 1/0, abs at 0, ...)."""


class ParseError(PoissonLabError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ValidationError(PoissonLabError):
    def __init__(self, check: str, point, defect: float, message: str = ""):
        self.check = check
        self.point = tuple(float(c) for c in point) if point is not None else None
        self.defect = float(defect)
        text = f"validation failed: {check} defect {defect:.3e} at {self.point}"
        if message:
            text += f" ({message})"
        super().__init__(text)


class SingularG(PoissonLabError, ArithmeticError):
    """The cometric is not invertible at the evaluation point."""


class MissingJ(PoissonLabError):
    """An operation needs a partially complex structure J that was not supplied."""


class NotFStructure(PoissonLabError):
    def __init__(self, defect: float):
        self.defect = float(defect)
        super().__init__(f"J is not an f-structure here: |J^3 + J| = {defect:.3e}")


class IndefiniteRestriction(PoissonLabError):
    """The metric restricted to the leaf directions is indefinite or degenerate."""


class DimensionMismatch(PoissonLabError, ValueError):
    pass


class DegeneratePi(PoissonLabError, ArithmeticError):
    """The bivector is not invertible where an invertible one is required."""


class RankDrop(PoissonLabError):
    def __init__(self, point, message: str = "rank of pi is not locally constant"):
        self.point = tuple(float(c) for c in point)
        super().__init__(f"{message} at {self.point}")


class RankDeficient(PoissonLabError):
    """The differential of a submersion does not have full rank."""


class NotLeafTangent(PoissonLabError):
    def __init__(self, residual: float):
        self.residual = float(residual)
        super().__init__(f"vector is not tangent to the leaf (residual {residual:.3e})")


class LeftValidityBox(PoissonLabError):
    def __init__(self, time: float, trace=None):
        self.time = float(time)
        self.trace = trace
        super().__init__(f"trajectory left the validity region at t = {time:.6g}")


class DegenerateCosymplectic(PoissonLabError):
    """omega^n wedge eta vanishes: the pair does not define a cosymplectic structure."""


class NotClosed(PoissonLabError):
    def __init__(self, form: str, defect: float):
        self.form = form
        self.defect = float(defect)
        super().__init__(f"{form} is not closed: |d{form}| = {defect:.3e}")


class UnknownEntry(PoissonLabError, KeyError):
    def __str__(self) -> str:
        return f"unknown gallery entry {self.args[0]!r}"
