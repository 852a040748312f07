"""Symbolic-execution tool server.

Solves for program inputs (reach an address, produce an output) over a
self-contained engine: an ELF64 loader, an x86-64 decoder for the
instruction subset the pinned fixture toolchain emits, a bitvector
expression language, and a finite-domain solver over stdin bytes.
Results are concretely re-verified before being reported.

The server process speaks the same stdio wire protocol as the native
tool servers, so a gateway can mount it like any other endpoint.
"""

ENGINE_NAME = "symexec-internal"
ENGINE_VERSION = "0.1.0"

__version__ = ENGINE_VERSION
