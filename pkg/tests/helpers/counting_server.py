#!/usr/bin/env python3
"""Instrumented tool endpoint for gate-soundness tests.

Hosts any tool name thrown at it; every executed call appends its
call_id to --log (one per line, the execution counter) and returns a
trivial ok result. The gateway is supposed to shield this process from
every invalid call, so the log must end up containing exactly the valid
ones.
"""

import argparse
import sys

from ctfgate.protocol import wire


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--log", required=True)
    args = parser.parse_args()
    fin, fout = sys.stdin.buffer, sys.stdout.buffer
    with open(args.log, "a", encoding="utf-8") as log:
        while True:
            msg = wire.read_frame_stdio(fin)
            if msg is None:
                return 0
            if msg.kind != wire.KIND_REQUEST or msg.method != wire.METHOD_TOOLS_CALL:
                continue
            call_id = msg.payload.get("call_id", "?")
            log.write(call_id + "\n")
            log.flush()
            wire.write_frame_stdio(
                fout,
                wire.response(msg.id, {"call_id": call_id, "result": {"ok": True}},
                              method=wire.METHOD_TOOLS_RESULT),
            )


if __name__ == "__main__":
    sys.exit(main())
