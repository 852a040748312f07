"""Tools-manifest document for mounting this server into a gateway.

The gateway loads a JSON manifest naming each server's endpoint and
the schemas of the tools it hosts; this module renders ours. The argv
uses the installed console-script name, so any environment that can
import this package can also spawn the endpoint, and the {policy}
placeholder is substituted by the gateway at load time.

    python -m symexec.manifest > tools.json
"""

from __future__ import annotations

import json
import sys
from typing import Any

from symexec.schemas import SERVER_NAME, tool_schemas


def build_manifest() -> dict[str, Any]:
    return {
        "servers": [
            {
                "name": SERVER_NAME,
                "endpoint": {
                    "transport": "subprocess-stdio",
                    "argv": ["symexec-server", "--stdio", "--policy", "{policy}"],
                },
                "tools": tool_schemas(),
            },
        ],
    }


def main() -> int:
    print(json.dumps(build_manifest(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
