from .backends import (
    Completion, LmBackend, TruthEntry, TruthBook, OracleBackend, FaultyBackend, ScriptedBackend, HttpChatBackend
)
from .gateway import LmGateway
from .parsing import ParsedUpdate, parse_update, render_update, parse_goal_block, extract_goal_block, extract_json
from .prompts import (
    PromptBundle, Template, build_prompt, TEMPLATE_UPDATE, TEMPLATE_GOAL, TEMPLATE_QUERY_GRAPH,
    TEMPLATE_ENTITY_SELECTION,
)
from .transcript import LmTranscript, TranscriptEntry, count_tokens
