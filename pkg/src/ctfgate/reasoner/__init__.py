"""Pluggable reasoning backends.

A reasoner proposes weighted candidate actions; it never executes
anything. Implementations: a deterministic scripted replayer (tests,
benchmarks) and a remote HTTP client (hosted models). Doc packs supply
the guidance text that conditions what the reasoner sees.
"""

from ctfgate.reasoner.base import CandidateSet, Reasoner, ReasonerRequest
from ctfgate.reasoner.docpack import DocPack, load_doc_pack
from ctfgate.reasoner.scripted import ScriptedReasoner, load_scenario

__all__ = [
    "CandidateSet",
    "Reasoner",
    "ReasonerRequest",
    "DocPack",
    "load_doc_pack",
    "ScriptedReasoner",
    "load_scenario",
]
