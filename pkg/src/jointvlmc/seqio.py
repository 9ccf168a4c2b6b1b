"""Alphabets, encoded sequences and plain-text sequence files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence as _Seq

import numpy as np


class SequenceError(ValueError):
    """Raised for malformed sequence files or alphabet mismatches."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if len(set(symbols)) != len(symbols):
            raise SequenceError(f"duplicate symbols in alphabet {symbols!r}")
        if len(symbols) < 2:
            raise SequenceError("alphabet needs at least 2 symbols")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "index", {s: i for i, s in enumerate(symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def single_char(self) -> bool:
        return all(len(s) == 1 for s in self.symbols)

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        try:
            return np.fromiter((self.index[t] for t in tokens), dtype=np.int64)
        except KeyError as exc:
            raise SequenceError(f"unknown token {exc.args[0]!r}") from None

    def decode(self, data: Iterable[int]) -> list[str]:
        return [self.symbols[int(i)] for i in data]

    def format_context(self, context: _Seq[int]) -> str:
        """Render a context, oldest symbol first."""
        sep = "" if self.single_char else " "
        return sep.join(self.symbols[a] for a in context)

    def parse_context(self, text: str) -> tuple[int, ...]:
        tokens = list(text) if self.single_char else text.split()
        try:
            return tuple(self.index[t] for t in tokens)
        except KeyError as exc:
            raise SequenceError(f"unknown symbol {exc.args[0]!r} in context {text!r}") from None


@dataclass(frozen=True)
class Sequence:
    """An encoded sample: symbol indices into an alphabet."""

    data: np.ndarray
    alphabet: Alphabet

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int64)
        if data.ndim != 1:
            raise SequenceError("sequence data must be one-dimensional")
        if data.size and (data.min() < 0 or data.max() >= len(self.alphabet)):
            raise SequenceError("symbol index out of alphabet range")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return int(self.data.size)


def tokenize(text: str, mode: str = "tokenized") -> list[str]:
    if mode == "tokenized":
        return text.split()
    if mode == "char":
        return [c for line in text.splitlines() for c in line]
    raise SequenceError(f"unknown mode {mode!r}")


def infer_alphabet(tokens: Iterable[str]) -> Alphabet:
    # first-seen order
    return Alphabet(tuple(dict.fromkeys(tokens)))


def load_sequence(path, alphabet: Alphabet | None = None,
                  mode: str = "tokenized") -> tuple[Sequence, Alphabet]:
    text = Path(path).read_text(encoding="utf-8")
    tokens = tokenize(text, mode)
    if not tokens:
        raise SequenceError(f"{path}: empty sequence file")
    if alphabet is None:
        alphabet = infer_alphabet(tokens)
    return Sequence(alphabet.encode(tokens), alphabet), alphabet


def write_sequence(path, seq: Sequence, mode: str = "tokenized", width: int = 80) -> None:
    tokens = seq.alphabet.decode(seq.data)
    if mode == "char":
        if not seq.alphabet.single_char:
            raise SequenceError("char mode needs single-character symbols")
        text = "".join(tokens)
        lines = [text[i:i + width] for i in range(0, len(text), width)]
    else:
        per_line = max(1, width // (max(len(t) for t in seq.alphabet.symbols) + 1))
        lines = [" ".join(tokens[i:i + per_line]) for i in range(0, len(tokens), per_line)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
