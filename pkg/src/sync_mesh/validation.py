"""Validation reports shared by the coupling, vco and cli modules.

A report is a flat list of named checks.  Checks with severity "error"
make the report fail hard (the CLI refuses to run); "warning" checks are
reported but do not block a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    severity: str = "error"  # "error" | "warning"


@dataclass
class ValidationReport:
    subject: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "", severity: str = "error") -> None:
        self.checks.append(Check(name, bool(passed), detail, severity))

    @property
    def passed(self) -> bool:
        """True when every check passed, warnings included."""
        return all(c.passed for c in self.checks)

    @property
    def hard_passed(self) -> bool:
        """True when no error-severity check failed."""
        return all(c.passed for c in self.checks if c.severity == "error")

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [f"validation of {self.subject}:"]
        for c in self.checks:
            mark = "PASS" if c.passed else ("WARN" if c.severity == "warning" else "FAIL")
            lines.append(f"  [{mark}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "hard_passed": self.hard_passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail, "severity": c.severity}
                for c in self.checks
            ],
        }
