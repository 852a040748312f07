"""Registry: registration rules, manifest loading, endpoint probing."""

import sys

import pytest

from ctfgate.errors import DuplicateTool
from ctfgate.gateway.registry import (
    EndpointDescriptor,
    ToolRegistry,
    load_manifest,
    register_tool,
)
from ctfgate.protocol.schema import ParamSpec, ToolSchema
from ctfgate.toolsrv import catalog


def schema(name):
    return ToolSchema(tool_name=name, description="", params=(ParamSpec(name="x", kind="string", required=False),))


def subprocess_ep(argv=("/bin/true",)):
    return EndpointDescriptor(transport="subprocess-stdio", argv=tuple(argv))


def test_register_adds_entry():
    registry = ToolRegistry()
    register_tool(schema("alpha"), subprocess_ep(), registry, server="s1")
    assert set(registry.entries) == {"alpha"}
    assert not registry.entries["alpha"].degraded


def test_duplicate_name_raises():
    registry = ToolRegistry()
    register_tool(schema("alpha"), subprocess_ep(), registry)
    with pytest.raises(DuplicateTool):
        register_tool(schema("alpha"), subprocess_ep(), registry)


def test_unreachable_endpoint_registers_degraded():
    registry = ToolRegistry()
    register_tool(schema("ghost"), subprocess_ep(argv=("/no/such/binary",)), registry)
    entry = registry.entries["ghost"]
    assert entry.degraded
    assert "not found" in entry.degraded_reason


def test_probe_resolves_path_via_which():
    ep = EndpointDescriptor(transport="subprocess-stdio", argv=("sh", "-c", "true"))
    assert ep.probe() is None


def test_tcp_endpoint_probe_failure_degrades():
    registry = ToolRegistry()
    ep = EndpointDescriptor(transport="tcp", host="127.0.0.1", port=1)  # nothing listens
    register_tool(schema("tcp_tool"), ep, registry)
    assert registry.entries["tcp_tool"].degraded


def test_manifest_loads_native_catalog_with_substitution(tmp_path):
    manifest = catalog.build_manifest()
    registry = load_manifest(manifest, {"python": sys.executable, "policy": str(tmp_path / "p.json"), "cwd": ""})
    # all five servers contribute their tools
    servers = {entry.server for entry in registry.entries.values()}
    assert servers == {"commands", "debug", "recon", "triage", "analysis"}
    argv = registry.entries["run_command"].endpoint.argv
    assert argv[0] == sys.executable
    assert "--server" in argv and "commands" in argv
    # the interpreter exists, so nothing is degraded
    assert not any(e.degraded for e in registry.entries.values())


def test_tools_list_names_all_five_servers_tools(tmp_path):
    manifest = catalog.build_manifest()
    registry = load_manifest(manifest, {"python": sys.executable, "policy": "p", "cwd": ""})
    names = {t["tool_name"] for t in registry.list_schemas()}
    assert {"run_command", "inspect_heap", "port_scan", "triage_classify", "get_xrefs"} <= names


def test_schema_lookup_maps_names():
    registry = ToolRegistry()
    register_tool(schema("alpha"), subprocess_ep(), registry)
    lookup = registry.schema_lookup()
    assert lookup["alpha"].tool_name == "alpha"


def test_bad_descriptor_rejected():
    with pytest.raises(ValueError):
        EndpointDescriptor(transport="subprocess-stdio", argv=())
    with pytest.raises(ValueError):
        EndpointDescriptor(transport="tcp", host="", port=0)
    with pytest.raises(ValueError):
        EndpointDescriptor(transport="carrier-pigeon", argv=("x",))
