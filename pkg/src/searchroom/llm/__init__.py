"""Language-model gateway: templates, providers, and the three task calls."""

from .gateway import compose_answer, extract_reference, plan_query
from .providers import (
    CompletionRequest,
    HttpLlmProvider,
    LlmProvider,
    MalformedOutput,
    ProviderError,
    RecordingProvider,
    ScriptMiss,
    ScriptRule,
    ScriptedProvider,
    input_hash,
    variables_blob,
)
from .templates import PromptTemplate, Task, load_template, render_context

__all__ = [
    "CompletionRequest",
    "HttpLlmProvider",
    "LlmProvider",
    "MalformedOutput",
    "PromptTemplate",
    "ProviderError",
    "RecordingProvider",
    "ScriptMiss",
    "ScriptRule",
    "ScriptedProvider",
    "Task",
    "compose_answer",
    "extract_reference",
    "input_hash",
    "load_template",
    "plan_query",
    "render_context",
    "variables_blob",
]
