"""JSON report documents written by the command-line front end."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .classify import CONVENTIONS, DefectReport

SCHEMA_VERSION = 1


def tool_version() -> str:
    from . import __version__

    return __version__


@dataclass
class ReportDocument:
    command: list
    structure: str
    source: str
    seed: int
    samples: int
    tolerance: float
    reports: list  # DefectReport
    expected: dict = field(default_factory=dict)
    decisive: list = field(default_factory=list)
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))
    version: str = field(default_factory=tool_version)
    wall_time: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "schema": SCHEMA_VERSION,
            "tool": "poisson-lab",
            "version": self.version,
            "command": list(self.command),
            "structure": self.structure,
            "source": self.source,
            "seed": self.seed,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "conventions": dict(self.conventions),
            "expected": dict(sorted(self.expected.items())),
            "decisive": list(self.decisive),
            "reports": [r.to_dict() for r in self.reports],
        }
        if self.wall_time is not None:
            d["timing"] = {"wall_time_s": self.wall_time}
        return d

    def to_json(self) -> str:
        # json writes floats with repr, the shortest round-trip form
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        return cls(
            command=list(d["command"]),
            structure=d["structure"],
            source=d["source"],
            seed=d["seed"],
            samples=d["samples"],
            tolerance=d["tolerance"],
            reports=[DefectReport.from_dict(r) for r in d["reports"]],
            expected=dict(d.get("expected", {})),
            decisive=list(d.get("decisive", [])),
            conventions=dict(d.get("conventions", {})),
            version=d.get("version", ""),
            wall_time=(d.get("timing") or {}).get("wall_time_s"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))

    def records(self):
        for rep in self.reports:
            yield from rep.records

    def failures(self) -> list:
        """Decisive checks whose outcome contradicts what is required of them."""
        bad = []
        for rec in self.records():
            if rec.check not in self.decisive or rec.passed is None:
                continue
            want = self.expected.get(rec.check, "pass")
            if (want == "pass") != bool(rec.passed):
                bad.append(rec.check)
        return bad


def recomputed_pass_flags_agree(doc: ReportDocument) -> bool:
    """Every stored pass flag equals max_defect < tolerance."""
    for rec in doc.records():
        if rec.max_defect is None:
            if rec.passed is not None:
                return False
        elif bool(rec.max_defect < rec.tolerance) != rec.passed:
            return False
    return True
