"""Personalized agent-tuning dataset generation.

Merges user topics with curated domain datasets, generates multi-turn
role-play dialogues and tool-use trajectories through a pluggable
completion provider, verifies outputs for hallucination, and emits
one-click fine-tuning scripts for an external trainer.
"""

from .core import (
    DataPoolEntry,
    DatasetDescriptor,
    GenerationConfig,
    Role,
    Topic,
    normalize_seed,
    validate_topic,
)
from .ingest import DataPool, DatasetRecord, DatasetRegistry, build_data_pool, parse_topics
from .provider import (
    CompletionRequest,
    CompletionResult,
    EchoProvider,
    HttpProvider,
    Provider,
    ScriptedProvider,
    script_mock,
)
from .roleplay import (
    DialogueTurn,
    InstructionSample,
    MemoryItem,
    PromptLibrary,
    extract_rating,
    filter_memories,
    generate_dialogue,
    load_roles,
    rate_memories,
    seed_ideas,
)
from .trajectory import (
    MockSearchTool,
    ReasoningStep,
    SearchResult,
    ToolRegistry,
    Trajectory,
    default_tool_registry,
    execute_search,
    render_cot_prompt,
    run_cot,
    run_react,
    run_reflexion,
    synthesize_seed_instruction,
)
from .tuning import (
    ExportSummary,
    FineTuneConfig,
    emit_finetune_script,
    export_dataset,
    launch_finetune,
    load_dialogue_samples,
    load_trajectories,
)
from .verify import (
    HallucinationReport,
    QAPair,
    VerificationVerdict,
    aggregate_hallucination,
    extract_qa_pairs,
    verify_pair,
    write_report,
)

__version__ = "0.1.0"
