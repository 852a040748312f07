"""Reconnaissance: scan-report parsing, a TCP connect scan, HTTP fetch.

parse_scan_report consumes the XML dialect of the standard network
scanner (nmaprun documents). Parsing is strict about the dialect: a
well-formed XML document with the wrong root or unrecognized port
states is a SchemaMismatch, not a guess.

port_scan is a pure connect() scan so tests and fixtures need no
privileged sockets; http_fetch is a single bounded GET. Both operate
only on targets the gateway already scope-checked, and both cap what
they return.
"""

from __future__ import annotations

import http.client
import socket
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from ctfgate.errors import ParseError, SchemaMismatch

PORT_STATES = ("open", "closed", "filtered")

HTTP_BODY_CAP = 64 * 1024


@dataclass(frozen=True)
class PortEntry:
    port: int
    protocol: str
    state: str
    service: str | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")
        if self.state not in PORT_STATES:
            raise ValueError(f"unknown state {self.state!r}")

    def to_dict(self) -> dict:
        out = {"port": self.port, "protocol": self.protocol, "state": self.state}
        if self.service is not None:
            out["service"] = self.service
        return out


@dataclass(frozen=True)
class PortScanReport:
    host: str
    ports: tuple[PortEntry, ...]

    def __post_init__(self) -> None:
        keys = [(p.port, p.protocol) for p in self.ports]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate (port, protocol) pairs in report")

    def open_ports(self) -> list[int]:
        return [p.port for p in self.ports if p.state == "open"]

    def to_dict(self) -> dict:
        return {"host": self.host, "ports": [p.to_dict() for p in self.ports]}


def parse_scan_report(doc: str) -> PortScanReport:
    """Parse one scanner XML document into a PortScanReport.

    Raises:
        ParseError: not well-formed XML.
        SchemaMismatch: well-formed but not this scanner's dialect
            (wrong root, no host, bad address type, unknown state,
            duplicate ports).
    """
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise ParseError(f"scan document is not well-formed XML: {exc}",
                         getattr(exc, "position", (0, 0))[1]) from exc
    if root.tag != "nmaprun":
        raise SchemaMismatch(f"expected an nmaprun document, found <{root.tag}>")
    host = root.find("host")
    if host is None:
        raise SchemaMismatch("document has no <host> block")
    address = None
    for addr in host.findall("address"):
        if addr.get("addrtype", "ipv4") == "ipv4":
            address = addr.get("addr")
            break
    if not address:
        raise SchemaMismatch("host block has no IPv4 <address>")

    entries: list[PortEntry] = []
    seen: set[tuple[int, str]] = set()
    ports_block = host.find("ports")
    for port_el in (ports_block.findall("port") if ports_block is not None else []):
        try:
            port_no = int(port_el.get("portid", ""))
        except ValueError:
            raise SchemaMismatch(f"bad portid {port_el.get('portid')!r}") from None
        protocol = port_el.get("protocol", "tcp")
        state_el = port_el.find("state")
        if state_el is None or state_el.get("state") not in PORT_STATES:
            state = state_el.get("state") if state_el is not None else None
            raise SchemaMismatch(f"port {port_no}: unknown state {state!r}")
        service_el = port_el.find("service")
        service = None
        if service_el is not None:
            name = service_el.get("name")
            product = service_el.get("product")
            version = service_el.get("version")
            service = " ".join(x for x in (name, product, version) if x) or None
        key = (port_no, protocol)
        if key in seen:
            raise SchemaMismatch(f"duplicate port entry {port_no}/{protocol}")
        seen.add(key)
        if not 1 <= port_no <= 65535:
            raise SchemaMismatch(f"port {port_no} out of range")
        entries.append(PortEntry(port=port_no, protocol=protocol,
                                 state=state_el.get("state"), service=service))
    return PortScanReport(host=address, ports=tuple(entries))


def port_scan(host: str, ports: list[int], timeout_s: float = 0.5) -> PortScanReport:
    """TCP connect scan. Connection refused means closed; timeout means
    filtered; anything that completes the handshake is open."""
    entries = []
    for port in ports:
        state = "filtered"
        try:
            with socket.create_connection((host, port), timeout=timeout_s):
                state = "open"
        except ConnectionRefusedError:
            state = "closed"
        except OSError:
            state = "filtered"
        entries.append(PortEntry(port=port, protocol="tcp", state=state))
    return PortScanReport(host=host, ports=tuple(entries))


def http_fetch(host: str, port: int, path: str, timeout_s: float = 10.0) -> dict:
    """One GET request; status, selected headers, capped body text."""
    if not path.startswith("/"):
        path = "/" + path
    conn = http.client.HTTPConnection(host, port, timeout=timeout_s)
    try:
        conn.request("GET", path)
        resp = conn.getresponse()
        body = resp.read(HTTP_BODY_CAP + 1)
        truncated = len(body) > HTTP_BODY_CAP
        return {
            "status": resp.status,
            "reason": resp.reason,
            "content_type": resp.getheader("Content-Type", ""),
            "body": body[:HTTP_BODY_CAP].decode("utf-8", errors="replace"),
            "truncated": truncated,
        }
    finally:
        conn.close()
