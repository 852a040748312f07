"""Wire protocol, tool schemas, call validation, and policy projection.

Everything in this package is a pure function over immutable values.
"""

from ctfgate.protocol.wire import (
    WireMessage,
    encode_message,
    decode_message,
    request,
    response,
    error_response,
    notification,
    METHOD_TOOLS_LIST,
    METHOD_TOOLS_CALL,
    METHOD_TOOLS_RESULT,
    METHOD_TOOLS_REJECT,
)
from ctfgate.protocol.schema import (
    ParamSpec,
    ToolSchema,
    ToolCall,
    Violation,
    ValidationVerdict,
    Rejection,
    validate_call,
    HEX_ADDRESS_PATTERN,
)
from ctfgate.protocol.projection import (
    ActionDistribution,
    project_distribution,
    argmax_candidate,
)

__all__ = [
    "WireMessage",
    "encode_message",
    "decode_message",
    "request",
    "response",
    "error_response",
    "notification",
    "METHOD_TOOLS_LIST",
    "METHOD_TOOLS_CALL",
    "METHOD_TOOLS_RESULT",
    "METHOD_TOOLS_REJECT",
    "ParamSpec",
    "ToolSchema",
    "ToolCall",
    "Violation",
    "ValidationVerdict",
    "Rejection",
    "validate_call",
    "HEX_ADDRESS_PATTERN",
    "ActionDistribution",
    "project_distribution",
    "argmax_candidate",
]
