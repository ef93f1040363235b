"""chainforge: pointerchain directive rewriting plus a desk-scale simulator
for deep-copy transfer schemes over nested data structures."""

from .frontend import (
    ChainDeclaration,
    ChainSegment,
    Diagnostic,
    MalformedDeclare,
    NestedRegion,
    ParsedUnit,
    RegionSpan,
    UnbalancedRegion,
    parse_unit,
    validate_unit,
)
from .harness import (
    ChainShape,
    CostModel,
    RunMetrics,
    VerificationFailed,
    adaptive_repeat,
    estimate_instructions,
    execute_case,
    kernel_scale,
    run_case,
    simulate_times,
    sweep,
)
from .memory import (
    Arena,
    AttachOutsideArena,
    Machine,
    MemorySpace,
    OutOfSimMemory,
    TransferLog,
    UvmState,
    WildAccess,
)
from .report import (
    MissingBaseline,
    ResultRow,
    normalize,
    render_instruction_table,
    render_size_table,
    rows_from_csv,
    rows_to_csv,
)
from .rewrite import (
    NameCollision,
    RewritePlan,
    plan_rewrites,
    transform_files,
    transform_unit,
)
from .scenarios import (
    DenseSpec,
    LinearSpec,
    TreeHandle,
    build_dense_tree,
    build_linear_tree,
    dense_data_size,
    linear_data_size,
    marshal_tree,
)
from .codegen import emit_benchmark_sources

__version__ = "0.1.0"
