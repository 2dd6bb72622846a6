from __future__ import annotations

import random

import pytest

from randgen import (
    SPACE,
    payload_for,
    random_composite,
    recompute_run_quality,
    registry_for,
)
from simcompose import (
    DataRef,
    PackageRegistry,
    PackageStub,
    ProvidedData,
    TaskRequest,
    bind_packages,
    compile_awf,
    compose,
    enumerate_plans,
    execute,
    fixture_registry,
    parse_awf_document,
    register_stub,
    select_structure,
    serialize_awf,
    topo_order,
)
from simcompose.compose import as_composite
from simcompose.errors import (
    CycleDetectedError,
    DuplicatePackageError,
    MissingInputError,
    MissingPackageError,
    NoPlanError,
    SignatureMismatchError,
    UnresolvedParamError,
)
from simcompose.pipeline import default_enabled
from simcompose.planner import Plan
from simcompose.types import Basis, Model, Scenario, SimObjectClass, Value
from simcompose.workflow import (
    AWF,
    parse_run_result_document,
    run_selection,
    serialize_run_result,
)
from test_planner import ref_in


@pytest.fixture()
def golden_plan(sea_ship):
    graph = select_structure(
        sea_ship, [m for m in default_enabled(sea_ship) if m != "spectrum_parameterization"]
    )
    request = TaskRequest(
        provided=(
            ProvidedData(ref=ref_in(sea_ship, "near_water_wind", "grid2d"), payload=10.0),
            ProvidedData(ref=ref_in(sea_ship, "bathymetry", "grid2d"), payload={"mean_depth": 50.0}),
        ),
        requested=(ref_in(sea_ship, "recommendation", None),),
    )
    return enumerate_plans(graph, request).plans[0]


HULL = {"ship_params": {"length": 120.0, "beam": 20.0}}


def test_compile_golden_awf(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    assert [b.id for b in awf.blocks] == [
        "sea_waves",
        "t_wave_spectrum__grid2d__location",
        "ship_behavior",
        "recommendation",
    ]
    assert len(awf.links) == 3
    inline = awf.block("t_wave_spectrum__grid2d__location")
    assert inline.kind == "inline_script"
    assert inline.package is None
    assert inline.script != ()
    assert awf.block("sea_waves").params_map == {"spectrum_bins": 25}
    assert awf.block("recommendation").params_map == {"safety_margin": 0.2}
    assert awf.block("ship_behavior").params_map == {"hull": HULL["ship_params"]}
    assert topo_order(awf) == tuple(b.id for b in awf.blocks)


def test_compile_empty_plan(sea_ship):
    empty = Plan(models=(), edges=(), provided=(), produced=(), score=0.0)
    awf = compile_awf(empty, sea_ship)
    assert awf.blocks == ()
    assert awf.links == ()


def test_compile_unresolved_vso_value(sea_ship, golden_plan):
    with pytest.raises(UnresolvedParamError) as exc:
        compile_awf(golden_plan, sea_ship, instance_params={})
    assert "ship_params" in exc.value.message


def test_awf_document_round_trip(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    text = serialize_awf(awf)
    parsed = parse_awf_document(awf.as_document())
    assert parsed == awf
    assert serialize_awf(parsed) == text


def test_bind_golden(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    cwf = bind_packages(awf, fixture_registry())
    bindings = cwf.bindings_map()
    assert sum(1 for v in bindings.values() if v != "inline") == 3
    assert sum(1 for v in bindings.values() if v == "inline") == 1


def test_bind_missing_package(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    registry = PackageRegistry(
        stubs=tuple(s for s in fixture_registry().stubs if s.id != "swan_stub")
    )
    with pytest.raises(MissingPackageError) as exc:
        bind_packages(awf, registry)
    assert exc.value.missing == ("swan_stub",)


def test_bind_no_package_blocks_needs_no_registry(sea_ship):
    empty = Plan(models=(), edges=(), provided=(), produced=(), score=0.0)
    awf = compile_awf(empty, sea_ship)
    cwf = bind_packages(awf, PackageRegistry())
    assert cwf.bindings == ()


def test_bind_signature_mismatch(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    bad = PackageStub(
        id="swan_stub", inputs=frozenset({"near_water_wind"}), outputs=frozenset({"wave_spectrum"}),
        fn=lambda i, p: {},
    )
    registry = PackageRegistry(
        stubs=tuple(s for s in fixture_registry().stubs if s.id != "swan_stub") + (bad,)
    )
    with pytest.raises(SignatureMismatchError):
        bind_packages(awf, registry)


def test_topo_order_edge_cases():
    assert topo_order(AWF()) == ()
    from simcompose.workflow import AWFBlock

    a = AWFBlock(id="a", kind="package_call", model="a", scenario="s", package="p")
    b = AWFBlock(id="b", kind="package_call", model="b", scenario="s", package="p")
    ref = DataRef.make("x", None, None, SPACE)
    cyclic = AWF(blocks=(a, b), links=(("a", "b", ref), ("b", "a", ref)), space=SPACE)
    with pytest.raises(CycleDetectedError):
        topo_order(cyclic)


def test_register_stub_flow(sea_ship, golden_plan):
    registry = PackageRegistry()
    for stub in fixture_registry().stubs:
        registry = register_stub(registry, stub)
    assert len(registry.stubs) == 5
    with pytest.raises(DuplicatePackageError):
        register_stub(registry, fixture_registry().stubs[0])
    awf = compile_awf(golden_plan, sea_ship, HULL)
    assert bind_packages(awf, registry)


def _golden_run(sea_ship, golden_plan, wind=10.0):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    cwf = bind_packages(awf, fixture_registry())
    inputs = {
        ref_in(sea_ship, "near_water_wind", "grid2d"): wind,
        ref_in(sea_ship, "bathymetry", "grid2d"): {"mean_depth": 50.0},
    }
    quality = {
        ref_in(sea_ship, "near_water_wind", "grid2d"): {"measured": 1, "expert": 0.9},
        ref_in(sea_ship, "bathymetry", "grid2d"): {"measured": 1, "expert": 0.8},
    }
    return execute(cwf, inputs, quality)


def test_execute_golden_values(sea_ship, golden_plan):
    result = _golden_run(sea_ship, golden_plan)
    assert result.status == "succeeded"
    values = result.values_map()
    assert values[ref_in(sea_ship, "wave_spectrum", "grid2d")] == 3.0
    assert values[ref_in(sea_ship, "wave_spectrum", "location")] == 3.0
    assert values[ref_in(sea_ship, "rocking", "sim_time")] == 0.625
    assert values[ref_in(sea_ship, "danger_level", "sim_time")] == 0.6
    assert values[ref_in(sea_ship, "recommendation", None)] == "hold_course"


def test_execute_quality_propagation_golden(sea_ship, golden_plan):
    result = _golden_run(sea_ship, golden_plan)
    quality = result.quality_map()
    for value, basis in (
        ("wave_spectrum", "grid2d"),
        ("wave_spectrum", "location"),
        ("rocking", "sim_time"),
        ("danger_level", "sim_time"),
        ("recommendation", None),
    ):
        point = quality[ref_in(sea_ship, value, basis)]
        assert point["measured"] == 0
        assert point["expert"] == 0.8  # min(0.9 wind, 0.8 bathymetry)


def test_execute_failing_stub(sea_ship, golden_plan):
    result = _golden_run(sea_ship, golden_plan, wind=-5.0)
    assert result.status == "failed"
    assert result.failure[0] == "sea_waves"
    assert "non-negative" in result.failure[1]
    assert [t.block for t in result.trace] == ["sea_waves"]
    assert result.trace[0].status == "failed"


def test_execute_missing_external_input(sea_ship, golden_plan):
    awf = compile_awf(golden_plan, sea_ship, HULL)
    cwf = bind_packages(awf, fixture_registry())
    with pytest.raises(MissingInputError):
        execute(cwf, {})


def test_execute_is_byte_deterministic(sea_ship, golden_plan):
    first = serialize_run_result(_golden_run(sea_ship, golden_plan))
    second = serialize_run_result(_golden_run(sea_ship, golden_plan))
    assert first == second


def test_run_result_document_round_trip(sea_ship, golden_plan):
    result = _golden_run(sea_ship, golden_plan)
    parsed = parse_run_result_document(result.as_document(), sea_ship.quality)
    assert parsed == result
    assert serialize_run_result(parsed) == serialize_run_result(result)


def test_run_selection_methods():
    points = {"points": [
        {"x": 0.0, "y": 0.0, "value": 1.0},
        {"x": 30.0, "y": 40.0, "value": 2.5},
        {"x": 90.0, "y": 90.0, "value": 9.0},
    ]}
    script = {"method": "nearest_point", "from_basis": "grid", "to_basis": "spot"}
    basis_params = {"spot": {"x": 29.0, "y": 41.0}}
    assert run_selection(script, basis_params, points) == 2.5
    assert run_selection(script, basis_params, 7.0) == 7.0  # scalar passes through

    series = {"series": [{"t": 0.0, "value": "a"}, {"t": 5.0, "value": "b"}, {"t": 9.0, "value": "c"}]}
    script_t = {"method": "at_or_before", "to_basis": "when"}
    assert run_selection(script_t, {"when": {"t": 6.0}}, series) == "b"
    with pytest.raises(ValueError):
        run_selection(script_t, {"when": {"t": -1.0}}, series)

    groups = {"groups": {"a": 1, "b": 2}}
    script_g = {"method": "subset", "to_basis": "crew"}
    assert run_selection(script_g, {"crew": {"members": ["a"]}}, groups) == {"groups": {"a": 1}}

    assert run_selection({"method": "identity"}, {}, {"any": 1}) == {"any": 1}


def test_inline_selection_keeps_measured_flag():
    big = Basis(id="big", kind="space", params={"x_min": 0.0, "x_max": 10.0, "y_min": 0.0, "y_max": 10.0})
    spot = Basis(id="spot", kind="space", params={"x": 1.0, "y": 1.0})
    src = DataRef.make("s", "big", {"measured": 1, "expert": 0.9}, SPACE)
    dst = DataRef.make("s", "spot", {"measured": 0, "expert": 0.5}, SPACE)
    out = DataRef.make("o", None, None, SPACE)
    left = SimObjectClass(
        name="l", version=1, bases=(big,), values=(Value(id="s", variability="var", unit="m"),),
        quality=SPACE,
        models=(Model(id="lm", outputs=(src,), scenarios=(Scenario(id="d", package_seq=("lp",)),),
                      packages=("lp",), selected_scenario="d"),),
    )
    right = SimObjectClass(
        name="r", version=1, bases=(spot,),
        values=(Value(id="s", variability="var", unit="m"), Value(id="o", variability="var", unit="")),
        quality=SPACE,
        models=(Model(id="rm", inputs=(dst,), outputs=(out,),
                      scenarios=(Scenario(id="d", package_seq=("rp",)),), packages=("rp",),
                      selected_scenario="d"),),
    )
    comp = compose(left, right)
    transition = next(m.id for m in comp.models if m.id.startswith("t_"))
    # Disable the producer and provide the transition input as measured data.
    graph = select_structure(comp, [transition, "rm"])
    request = TaskRequest(provided=(ProvidedData(ref=src, payload=4.0),), requested=(out,))
    plan = enumerate_plans(graph, request).plans[0]
    awf = compile_awf(plan, comp)
    registry = PackageRegistry(
        stubs=(
            PackageStub(id="rp", inputs=frozenset({"s"}), outputs=frozenset({"o"}),
                        fn=lambda i, p: {"o": i["s"] * 2}),
        )
    )
    result = execute(bind_packages(awf, registry), {src: 4.0}, {src: {"measured": 1, "expert": 0.9}})
    assert result.status == "succeeded"
    quality = result.quality_map()
    assert quality[dst]["measured"] == 1  # selection keeps measured status
    assert quality[dst]["expert"] == 0.9
    assert quality[out]["measured"] == 0  # stub output is simulated-grade
    assert result.values_map()[out] == 8.0


def test_chained_package_sequence():
    raw = DataRef.make("raw", None, None, SPACE)
    refined = DataRef.make("refined", None, None, SPACE)
    cls = SimObjectClass(
        name="chain", version=1,
        values=(Value(id="raw", variability="var", unit=""), Value(id="refined", variability="var", unit="")),
        quality=SPACE,
        models=(Model(id="pipe", inputs=(raw,), outputs=(refined,),
                      scenarios=(Scenario(id="two", package_seq=("first", "second")),),
                      packages=("first", "second"), selected_scenario="two"),),
    )
    comp = as_composite(cls)
    graph = select_structure(comp, ["pipe"])
    request = TaskRequest(provided=(ProvidedData(ref=raw, payload=3.0),), requested=(refined,))
    plan = enumerate_plans(graph, request).plans[0]
    awf = compile_awf(plan, comp)
    assert [b.id for b in awf.blocks] == ["pipe.1", "pipe.2"]
    assert len(awf.links) == 1 and awf.links[0][2].value == "pipe.stage1"
    registry = PackageRegistry(
        stubs=(
            PackageStub(id="first", inputs=frozenset({"raw"}), outputs=frozenset({"pipe.stage1"}),
                        fn=lambda i, p: {"pipe.stage1": i["raw"] + 1}),
            PackageStub(id="second", inputs=frozenset({"pipe.stage1"}), outputs=frozenset({"refined"}),
                        fn=lambda i, p: {"refined": i["pipe.stage1"] * 10}),
        )
    )
    result = execute(bind_packages(awf, registry), {raw: 3.0})
    assert result.status == "succeeded"
    assert result.values_map()[refined] == 40.0


def test_replay_soundness_and_dependency_preservation():
    # Every planner-emitted plan compiles, binds and executes without
    # unresolved params or missing inputs, and every link's producer
    # precedes its consumer in the topological order.
    rng = random.Random(90210)
    checked = 0
    while checked < 25:
        composite = random_composite(rng)
        graph = select_structure(composite, default_enabled(composite))
        inputs_refs = {r for m in composite.models for r in m.inputs}
        outputs = {r for m in composite.models for r in m.outputs}
        leaves = sorted(inputs_refs - outputs, key=DataRef.key)
        if not leaves or not outputs:
            continue
        provided = tuple(ProvidedData(ref=r, payload=payload_for(r)) for r in leaves)
        requested = tuple(sorted(outputs, key=DataRef.key))[:2]
        try:
            result = enumerate_plans(
                graph, TaskRequest(provided=provided, requested=requested), cap=16
            )
        except NoPlanError:
            continue
        checked += 1
        registry = registry_for(composite)
        for plan in result.plans:
            awf = compile_awf(plan, composite)  # must not raise UnresolvedParam
            order = topo_order(awf)
            position = {bid: i for i, bid in enumerate(order)}
            for producer, consumer, _ in awf.links:
                assert position[producer] < position[consumer]
            run = execute(
                bind_packages(awf, registry),
                {p.ref: p.payload for p in provided},
                {p.ref: p.ref.quality_map for p in provided},
            )
            assert run.status == "succeeded"


def test_random_runs_quality_against_recomputation():
    rng = random.Random(555)
    runs = 0
    while runs < 30:
        composite = random_composite(rng)
        graph = select_structure(composite, default_enabled(composite))
        inputs_refs = {r for m in composite.models for r in m.inputs}
        outputs = {r for m in composite.models for r in m.outputs}
        leaves = sorted(inputs_refs - outputs, key=DataRef.key)
        if not leaves or not outputs:
            continue
        provided = tuple(ProvidedData(ref=r, payload=payload_for(r)) for r in leaves)
        requested = tuple(sorted(outputs, key=DataRef.key))[:2]
        request = TaskRequest(provided=provided, requested=requested)
        try:
            plan = enumerate_plans(graph, request, cap=64).plans[0]
        except NoPlanError:
            continue
        runs += 1
        awf = compile_awf(plan, composite)
        cwf = bind_packages(awf, registry_for(composite))
        inputs = {p.ref: p.payload for p in provided}
        in_quality = {p.ref: p.ref.quality_map for p in provided}
        result = execute(cwf, inputs, in_quality)
        assert result.status == "succeeded"
        expected = recompute_run_quality(
            awf.as_document(),
            {f"{r.value}@{r.basis}": dict(q) for r, q in in_quality.items()},
        )
        produced_refs = {r for b in awf.blocks for r in b.produces}
        for ref, point in result.quality_map().items():
            if ref not in produced_refs:
                continue
            key = f"{ref.value}@{ref.basis}"
            assert point == expected[key], f"{key}: {point} != {expected[key]}"
