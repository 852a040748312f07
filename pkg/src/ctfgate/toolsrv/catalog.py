"""The native tool catalog: five servers and their schemas.

    commands   allow-listed command execution
    debug      debugger wrapper (launch/break/run/heap)
    recon      port scan, scan-report parsing, HTTP fetch
    triage     artifact classification
    analysis   cross-reference lookup (structured stub)

build_manifest renders the catalog into the tools-manifest document the
gateway loads; argv entries use {python}, {policy} and {cwd}
placeholders resolved at load time.
"""

from __future__ import annotations

from typing import Any

from ctfgate.protocol.schema import ParamSpec, ToolSchema

MAX_PORT = 65535


def _commands_schemas() -> list[ToolSchema]:
    return [
        ToolSchema(
            tool_name="run_command",
            description="Run one allow-listed binary with arguments and optional stdin; "
                        "returns exit code and captured streams.",
            params=(
                ParamSpec(name="binary", kind="string", scope_role="binary",
                          description="absolute path of an allow-listed executable"),
                ParamSpec(name="args", kind="list-of", required=False,
                          item=ParamSpec(name="arg", kind="string")),
                ParamSpec(name="stdin", kind="string", required=False,
                          description="text fed to the child's stdin"),
                ParamSpec(name="timeout_s", kind="integer", lo=1, hi=600, required=False),
            ),
        ),
    ]


def _debug_schemas() -> list[ToolSchema]:
    return [
        ToolSchema(
            tool_name="debug_launch",
            description="Start a debugger session on a binary.",
            params=(ParamSpec(name="binary", kind="string", scope_role="binary"),),
        ),
        ToolSchema(
            tool_name="debug_break",
            description="Insert a breakpoint at a function name or *address.",
            params=(ParamSpec(name="location", kind="string", pattern=r"[A-Za-z_*][A-Za-z0-9_:+\-]*|\*0x[0-9a-fA-F]+"),),
        ),
        ToolSchema(
            tool_name="debug_run",
            description="Run the debuggee until it stops.",
            params=(),
        ),
        ToolSchema(
            tool_name="debug_continue",
            description="Continue the stopped debuggee until the next stop.",
            params=(),
        ),
        ToolSchema(
            tool_name="debug_evaluate",
            description="Evaluate one expression in the stopped debuggee.",
            params=(ParamSpec(name="expression", kind="string"),),
        ),
        ToolSchema(
            tool_name="read_memory",
            description="Read bytes from the stopped debuggee's memory.",
            params=(
                ParamSpec(name="addr", kind="hex-address-string"),
                ParamSpec(name="count", kind="integer", lo=1, hi=4096),
            ),
        ),
        ToolSchema(
            tool_name="inspect_heap",
            description="Walk the main allocation arena and return structured chunks.",
            params=(ParamSpec(name="count", kind="integer", lo=0, hi=4096),),
        ),
        ToolSchema(
            tool_name="debug_quit",
            description="End the debugger session.",
            params=(),
        ),
    ]


def _recon_schemas() -> list[ToolSchema]:
    return [
        ToolSchema(
            tool_name="port_scan",
            description="TCP connect scan of selected ports on one in-scope host.",
            params=(
                ParamSpec(name="host", kind="ipv4-target"),
                ParamSpec(name="ports", kind="list-of",
                          item=ParamSpec(name="port", kind="integer", lo=1, hi=MAX_PORT)),
            ),
        ),
        ToolSchema(
            tool_name="parse_scan_xml",
            description="Parse a scanner XML document into a structured port report.",
            params=(ParamSpec(name="xml", kind="string"),),
        ),
        ToolSchema(
            tool_name="http_fetch",
            description="GET one path from an in-scope HTTP service.",
            params=(
                ParamSpec(name="host", kind="ipv4-target"),
                ParamSpec(name="port", kind="integer", lo=1, hi=MAX_PORT),
                ParamSpec(name="path", kind="string", pattern=r"/[ -~]*"),
            ),
        ),
    ]


def _triage_schemas() -> list[ToolSchema]:
    return [
        ToolSchema(
            tool_name="triage_classify",
            description="Predict the vulnerability category of an artifact before exploitation.",
            params=(
                ParamSpec(name="artifact", kind="string"),
                ParamSpec(name="dynamic", kind="boolean", required=False,
                          description="also run the single sandboxed crash probe"),
            ),
        ),
    ]


def _analysis_schemas() -> list[ToolSchema]:
    return [
        ToolSchema(
            tool_name="get_xrefs",
            description="Cross-references to a function (requires a decompiler backend).",
            params=(ParamSpec(name="func_name", kind="string", pattern=r"[A-Za-z_][A-Za-z0-9_]*"),),
        ),
    ]


SERVER_SCHEMAS: dict[str, Any] = {
    "commands": _commands_schemas,
    "debug": _debug_schemas,
    "recon": _recon_schemas,
    "triage": _triage_schemas,
    "analysis": _analysis_schemas,
}


def server_names() -> list[str]:
    return list(SERVER_SCHEMAS)


def schemas_for(server: str) -> list[ToolSchema]:
    return SERVER_SCHEMAS[server]()


def all_schemas() -> dict[str, ToolSchema]:
    out: dict[str, ToolSchema] = {}
    for name in SERVER_SCHEMAS:
        for schema in schemas_for(name):
            out[schema.tool_name] = schema
    return out


def build_manifest(servers: list[str] | None = None, extra_servers: list[dict] | None = None) -> dict:
    """The tools-manifest document for the gateway.

    argv placeholders: {python} the interpreter, {policy} the policy
    file path, {cwd} the sandbox working directory.
    """
    doc: dict[str, Any] = {"servers": []}
    for name in servers or server_names():
        doc["servers"].append({
            "name": name,
            "endpoint": {
                "transport": "subprocess-stdio",
                "argv": ["{python}", "-m", "ctfgate.toolsrv.server",
                         "--server", name, "--policy", "{policy}", "--cwd", "{cwd}"],
            },
            "tools": [s.to_dict() for s in schemas_for(name)],
        })
    for server in extra_servers or []:
        doc["servers"].append(server)
    return doc
