"""Native tool servers: command execution, debugger wrapping, recon, triage.

Each server runs as its own OS process (python -m ctfgate.toolsrv.server)
and speaks the wire protocol on stdio. The modules here are also usable
as plain libraries, which is how the tests exercise them.
"""
