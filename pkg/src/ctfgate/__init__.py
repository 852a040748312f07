"""ctfgate: a protocol-gated autonomous CTF agent at desk scale.

The package splits the agent into three isolated layers. A reasoner
(scripted replay or a remote model endpoint) emits weighted candidate
tool calls but can execute nothing. A gateway validates every call
against strict tool schemas and an engagement-scope policy, rejecting
bad calls before any tool process is contacted, and appends every
decision to a replayable trace. Allow-listed tool servers run as
separate processes and do the actual work: command execution, debugger
wrapping, recon parsing, and triage.

Subpackages:
    protocol  wire format, tool schemas, call validation, policy projection
    gateway   registry, scope policy, trace log, validation-gated dispatch
    toolsrv   native tool servers (commands, debug, recon, triage, analysis)
    reasoner  candidate-emission interface, scripted + remote backends, doc packs
    agent     plan/execute/parse/iterate loop with checkpoint/resume
    harness   challenge manifests, trial runner, ablation matrix, statistics
"""

__version__ = "0.1.0"
