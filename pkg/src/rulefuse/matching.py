"""Run sentences through compiled automata and record state traces.

A trace walks the automaton word by word from the start state and, by
default, stops immediately after first entering a final state (so a
pattern acts as a prefix acceptor; anything after the matched prefix is
ignored).  Passing full_match=True disables the early stop and gives
classical whole-sentence membership instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automata import Mdfa

__all__ = ["Sentence", "Trace", "run_trace", "accepts"]


@dataclass(frozen=True)
class Sentence:
    """An ordered sequence of lowercased words."""

    words: tuple[str, ...]

    def __post_init__(self):
        if any(not w for w in self.words):
            raise ValueError("sentences cannot contain empty words")

    @classmethod
    def from_text(cls, text: str) -> "Sentence":
        return cls(tuple(text.lower().split()))

    @property
    def n(self) -> int:
        return len(self.words)

    def text(self) -> str:
        return " ".join(self.words)


@dataclass(frozen=True)
class Trace:
    """States visited while feeding a sentence through one automaton.

    `visited` holds the target state after each consumed word (the start
    state appears only if some transition re-enters it); `consumed` is the
    number of words fed before stopping.
    """

    rule_id: int
    visited: tuple[int, ...]
    consumed: int
    accepted: bool


def run_trace(
    mdfa: Mdfa, sentence: Sentence, rule_id: int = 0, full_match: bool = False
) -> Trace:
    """Feed the sentence through the automaton and record the state trace.

    Early-stop mode halts right after the first final state is entered; an
    empty sentence is accepted iff the start state is final.  On rejection
    the full trace, dead-state visits included, is retained.
    """
    if sentence.n == 0:
        return Trace(rule_id, (), 0, mdfa.is_final(mdfa.start))
    state = mdfa.start
    visited = []
    accepted = False
    for word in sentence.words:
        state = mdfa.step(state, word)
        visited.append(state)
        if not full_match and mdfa.is_final(state):
            accepted = True
            break
    if full_match:
        accepted = mdfa.is_final(state)
    return Trace(rule_id, tuple(visited), len(visited), accepted)


def accepts(mdfa: Mdfa, sentence: Sentence, full_match: bool = False) -> bool:
    """Whether the automaton accepts the sentence (see run_trace)."""
    return run_trace(mdfa, sentence, full_match=full_match).accepted
