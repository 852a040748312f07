"""The sequential episode controller.

Owns the plan/execute/parse/iterate loop: task queue, compacted
history, rejection-driven retries, checkpointing, and termination on
flag capture, timeout, step budget, or search exhaustion.
"""

from ctfgate.agent.state import AgentState, History, Observation, StopReason, Task, TaskQueue

__all__ = ["AgentState", "History", "Observation", "StopReason", "Task", "TaskQueue"]
