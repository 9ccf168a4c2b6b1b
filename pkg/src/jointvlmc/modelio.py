"""Model JSON files.

Single-source files::

    {"alphabet": ["1", "2"], "contexts": [{"context": "22", "theta": [0.6667, 0.3333]}]}

Joint files add ``"group"`` (0 shared, 1 X-specific, 2 Y-specific) to every
entry.  Context strings are written oldest symbol first.  ``theta`` may be
``null`` for a context with no observations, and on input may also hold
fraction strings such as ``"1/3"``.

Output is canonical (sorted keys, entries in (group, length, symbols) order,
floats rounded to 10 significant digits) so that re-exporting a loaded file
reproduces it byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .seqio import Alphabet
from .vlmc import ModelError, ProbabilisticContextTree

Context = tuple[int, ...]


def fmt_float(x: float) -> float:
    return float(f"{float(x):.10g}")


def _parse_prob(v) -> float:
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ModelError(f"bad probability {v!r}") from None
    return float(v)


@dataclass
class ModelEntry:
    context: Context
    theta: np.ndarray | None
    group: int | None = None


@dataclass
class ModelFile:
    alphabet: Alphabet
    entries: list[ModelEntry]

    @property
    def is_joint(self) -> bool:
        return any(e.group is not None for e in self.entries)

    def source(self, which: str | None = None) -> ProbabilisticContextTree:
        """The source described by the file; joint files need ``which`` in {"x", "y"}."""
        if self.is_joint:
            if which not in ("x", "y"):
                raise ModelError("joint model file: choose source x or y")
            keep = {0, 1} if which == "x" else {0, 2}
            entries = [e for e in self.entries if e.group in keep]
        else:
            entries = self.entries
        theta = {}
        for e in entries:
            if e.theta is None:
                raise ModelError(
                    f"context {self.alphabet.format_context(e.context)!r} has no distribution")
            p = e.theta
            if abs(p.sum() - 1.0) <= 1e-9:
                # undo 10-digit rounding
                p = p / p.sum()
            theta[e.context] = p
        return ProbabilisticContextTree(len(self.alphabet), theta)

    def to_dict(self) -> dict:
        def key(e):
            return (-1 if e.group is None else e.group, len(e.context), e.context)
        rows = []
        for e in sorted(self.entries, key=key):
            row = {"context": self.alphabet.format_context(e.context),
                   "theta": None if e.theta is None else [fmt_float(p) for p in e.theta]}
            if e.group is not None:
                row["group"] = int(e.group)
            rows.append(row)
        return {"alphabet": list(self.alphabet.symbols), "contexts": rows}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def model_from_dict(obj: dict) -> ModelFile:
    try:
        alphabet = Alphabet(tuple(str(s) for s in obj["alphabet"]))
        entries = []
        for row in obj["contexts"]:
            ctx = alphabet.parse_context(row["context"])
            theta = row.get("theta")
            if theta is not None:
                theta = np.array([_parse_prob(v) for v in theta])
                if theta.size != len(alphabet):
                    raise ModelError(f"theta of {row['context']!r} has wrong length")
            group = row.get("group")
            if group is not None and group not in (0, 1, 2):
                raise ModelError(f"invalid group {group!r}")
            entries.append(ModelEntry(ctx, theta, group))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model: {exc}") from None
    return ModelFile(alphabet, entries)


def load_model(path) -> ModelFile:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(obj)


def single_model_file(alphabet: Alphabet, theta: dict) -> ModelFile:
    return ModelFile(alphabet, [ModelEntry(s, p) for s, p in theta.items()])


def joint_model_file(alphabet: Alphabet, result) -> ModelFile:
    """Joint file for an :class:`~jointvlmc.estimators.EstimationResult`."""
    entries = []
    for group, theta in ((0, result.theta0), (1, result.theta1), (2, result.theta2)):
        entries.extend(ModelEntry(s, p, group) for s, p in theta.items())
    return ModelFile(alphabet, entries)


def source_model_file(alphabet: Alphabet, model: ProbabilisticContextTree) -> ModelFile:
    return single_model_file(alphabet, model.theta)
