"""Result containers shared by the checking operations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .symexpr import Expr


@dataclass
class CheckReport:
    """Named residues of a symbolic check; it passes iff all residues vanish."""

    name: str
    residues: dict[str, Expr] = field(default_factory=dict)
    notes: dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.is_zero() for r in self.residues.values())

    def failures(self) -> dict[str, Expr]:
        return {k: v for k, v in self.residues.items() if not v.is_zero()}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": "pass" if self.passed else "fail",
            "residues": {k: str(v) for k, v in sorted(self.residues.items())},
            "notes": {k: self.notes[k] for k in sorted(self.notes)},
        }
