"""Turn state traces into numeric rule features.

Two encodings per (sentence, rule) pair:

* instance-level: a 0/1 vector over the rule's automaton states, the
  element-wise max of the one-hot vectors of the visited states (so it is
  the indicator of visited states).  Computed for rejecting traces too,
  unless gating is requested.
* word-level: one 0/1 tag per word.  Tags are all zero unless the rule
  accepts the sentence; on acceptance the consumed prefix is tagged 1 and
  any words after the early stop stay 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automata import Mdfa
from .matching import Sentence, Trace, run_trace
from .rules import RuleSet

__all__ = [
    "InstanceFeature",
    "WordTagSeq",
    "encode_instance",
    "encode_word_tags",
    "encode_all",
    "feature_record",
]


@dataclass(frozen=True)
class InstanceFeature:
    rule_id: int
    values: np.ndarray  # float64, shape (m_k,), entries 0.0 or 1.0


@dataclass(frozen=True)
class WordTagSeq:
    rule_id: int
    tags: np.ndarray  # float64, shape (n,), entries 0.0 or 1.0


def encode_instance(trace: Trace, m_k: int, gate: bool = False) -> InstanceFeature:
    """Indicator vector of the states visited by the trace.

    Equivalent to max-pooling the one-hot encodings of the visited states.
    With gate=True a rejecting trace encodes to the zero vector.
    """
    values = np.zeros(m_k, dtype=np.float64)
    if not gate or trace.accepted:
        for state in trace.visited:
            if not 0 <= state < m_k:
                raise IndexError(
                    f"visited state {state} outside automaton with {m_k} states"
                )
            values[state] = 1.0
    return InstanceFeature(trace.rule_id, values)


def encode_word_tags(trace: Trace, n: int) -> WordTagSeq:
    """Accept-gated binary tags: ones on the consumed prefix, zero otherwise."""
    if trace.consumed > n:
        raise ValueError(
            f"trace consumed {trace.consumed} words but the sentence has {n}"
        )
    tags = np.zeros(n, dtype=np.float64)
    if trace.accepted:
        tags[: trace.consumed] = 1.0
    return WordTagSeq(trace.rule_id, tags)


def encode_all(
    ruleset: RuleSet,
    mdfas: list[Mdfa],
    sentence: Sentence,
    gate_instance: bool = False,
    full_match: bool = False,
) -> tuple[list[InstanceFeature], list[WordTagSeq]]:
    """Both feature kinds for every rule, in rule order."""
    if len(mdfas) != ruleset.p:
        raise ValueError(f"expected {ruleset.p} automata, got {len(mdfas)}")
    instances = []
    tag_seqs = []
    for rule, mdfa in zip(ruleset.rules, mdfas):
        trace = run_trace(mdfa, sentence, rule_id=rule.rule_id, full_match=full_match)
        instances.append(encode_instance(trace, mdfa.state_count, gate=gate_instance))
        tag_seqs.append(encode_word_tags(trace, sentence.n))
    return instances, tag_seqs


def feature_record(
    ruleset: RuleSet,
    mdfas: list[Mdfa],
    sentence: Sentence,
    label: str,
    gate_instance: bool = False,
    full_match: bool = False,
) -> dict:
    """JSON-serializable record of a sentence's features (0/1 as ints)."""
    instances, tag_seqs = encode_all(
        ruleset, mdfas, sentence, gate_instance=gate_instance, full_match=full_match
    )
    return {
        "text": sentence.text(),
        "label": label,
        "instance": [[int(v) for v in feat.values] for feat in instances],
        "tags": [[int(t) for t in seq.tags] for seq in tag_seqs],
    }
