"""simcompose: compose simulation objects, plan model sub-graphs, compile
workflows and execute them against a deterministic package registry."""

from .canon import FORMAT_VERSION, canonical_json
from .compose import (
    CompositeObject,
    QualityMergeResult,
    TransitionModel,
    as_composite,
    compose,
    composite_document,
    infer_transition_models,
    make_transition_edges,
    merge_quality,
    parse_composite_document,
    serialize_composite,
)
from .errors import SimComposeError, Violation
from .kb import (
    class_document,
    instantiate,
    load_class,
    parse_class,
    parse_class_dict,
    serialize_class,
    validate_class,
)
from .planner import (
    DatasetState,
    FilteredGraph,
    Plan,
    PlanSearchResult,
    ProvidedData,
    TaskRequest,
    apply_mode,
    enumerate_plans,
    mark_dataset_states,
    parse_request,
    plans_document,
    rank_plans,
    request_document,
    select_structure,
)
from .stubs import fixture_registry
from .types import (
    Basis,
    DataRef,
    Edge,
    Model,
    QualityAxis,
    QualitySpace,
    Scenario,
    SimObjectClass,
    SimObjectInstance,
    Value,
)
from .workflow import (
    AWF,
    AWFBlock,
    CWF,
    PackageRegistry,
    PackageStub,
    RunResult,
    bind_packages,
    compile_awf,
    execute,
    parse_awf_document,
    register_stub,
    serialize_awf,
    topo_order,
)

__version__ = "0.1.0"
