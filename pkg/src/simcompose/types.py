"""Domain types for simulation-object classes.

A class describes one simulatable object: the bases its data lives on,
the values that characterize it, a quality space for those values, a set
of models that turn input data into output data, and the edges that wire
models together. All types are immutable after construction; collections
are canonicalized (sorted) on construction so structural equality and
serialization are order-insensitive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

BASIS_KINDS = ("space", "time", "group")
BASIS_REFERENCES = ("absolute", "relative")
VARIABILITIES = ("const", "var")
AXIS_DOMAINS = ("binary", "real")
MODES = ("analysis", "forecast", "optimization")
PARAM_SOURCES = ("literal", "model_option", "vso_value")
PROVIDED_SOURCES = ("user", "storage", "simulation")

KVPairs = tuple[tuple[str, Any], ...]


def freeze_map(mapping: dict | KVPairs | None) -> KVPairs:
    if not mapping:
        return ()
    items = mapping.items() if isinstance(mapping, dict) else mapping
    return tuple(sorted((str(k), v) for k, v in items))


def thaw_map(pairs: KVPairs) -> dict:
    return dict(pairs)


@dataclass(frozen=True, order=True)
class QualityAxis:
    """One quality dimension, either a binary flag or a real score."""

    id: str
    domain: str  # binary | real


@dataclass(frozen=True)
class QualitySpace:
    """Ordered set of quality axes; order is canonical (by axis id)."""

    axes: tuple[QualityAxis, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(sorted(self.axes, key=lambda a: a.id)))

    def axis_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.axes)

    def axis(self, axis_id: str) -> QualityAxis | None:
        for a in self.axes:
            if a.id == axis_id:
                return a
        return None

    def default_point(self) -> dict[str, float | int]:
        """Unobserved data is presumed simulated-grade: binary axes 0, real axes 0.0."""
        return {a.id: 0 if a.domain == "binary" else 0.0 for a in self.axes}

    def normalize_point(self, point: dict[str, Any] | None) -> tuple[tuple[str, float | int], ...]:
        """Fill missing axes with defaults and coerce each value to the axis domain."""
        merged = self.default_point()
        for key, val in (point or {}).items():
            merged[key] = val
        out = []
        for axis_id in sorted(merged):
            axis = self.axis(axis_id)
            val = merged[axis_id]
            if axis is not None and axis.domain == "binary":
                val = int(val)
            elif axis is not None:
                val = float(val)
            out.append((axis_id, val))
        return tuple(out)


DEFAULT_QUALITY_SPACE = QualitySpace(
    (QualityAxis("measured", "binary"), QualityAxis("expert", "real"))
)


@dataclass(frozen=True)
class DataRef:
    """A value bound to an optional basis and a quality point.

    This is the currency of all dataflow: model signatures, edges, plans
    and run inputs are all stated in terms of DataRefs. Identity is the
    full triple, so two refs with the same value and basis but different
    quality points are distinct.
    """

    value: str
    basis: str | None = None
    quality: tuple[tuple[str, float | int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "quality", tuple(sorted(self.quality)))

    @classmethod
    def make(
        cls,
        value: str,
        basis: str | None = None,
        quality: dict[str, Any] | None = None,
        space: QualitySpace = DEFAULT_QUALITY_SPACE,
    ) -> "DataRef":
        return cls(value=value, basis=basis, quality=space.normalize_point(quality))

    @property
    def quality_map(self) -> dict[str, float | int]:
        return dict(self.quality)

    def key(self) -> tuple:
        return (self.value, self.basis or "", self.quality)

    def as_document(self) -> dict:
        return {"value": self.value, "basis": self.basis, "quality": self.quality_map}

    def with_space(self, space: QualitySpace) -> "DataRef":
        """Re-normalize the quality point against a (possibly wider) space."""
        return DataRef(self.value, self.basis, space.normalize_point(self.quality_map))

    def label(self) -> str:
        return f"{self.value}@{self.basis}" if self.basis else self.value


@dataclass(frozen=True)
class Basis:
    """A parameter domain for values: a spatial grid, a time horizon, a group.

    ``params`` are opaque key/value pairs; only ``kind`` and ``reference``
    are interpreted by the engine (plus the containment conventions used by
    the transition comparators, see compose.basis_contains).
    """

    id: str
    kind: str  # space | time | group
    reference: str = "absolute"
    params: KVPairs = ()

    def __post_init__(self):
        object.__setattr__(self, "params", freeze_map(self.params))

    @property
    def params_map(self) -> dict:
        return thaw_map(self.params)

    def as_document(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "reference": self.reference,
            "params": self.params_map,
        }


@dataclass(frozen=True)
class Value:
    """A quantified characteristic of the object; const values describe the
    object itself, var values change during simulation."""

    id: str
    variability: str  # const | var
    unit: str = ""
    ontology_tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ontology_tags", tuple(sorted(self.ontology_tags)))

    def as_document(self) -> dict:
        return {
            "id": self.id,
            "variability": self.variability,
            "unit": self.unit,
            "ontology_tags": list(self.ontology_tags),
        }


@dataclass(frozen=True)
class ExtraParam:
    """One extra parameter a scenario feeds to its packages.

    ``binding`` depends on ``source``: a literal payload, the name of a
    model-level option, or a DataRef whose instance payload is used.
    """

    name: str
    source: str  # literal | model_option | vso_value
    binding: Any = None

    def as_document(self) -> dict:
        binding = self.binding.as_document() if isinstance(self.binding, DataRef) else self.binding
        return {"name": self.name, "source": self.source, "binding": binding}


@dataclass(frozen=True)
class Scenario:
    """One way of using a model: an ordered package sequence plus extra
    parameters and free-form options."""

    id: str
    package_seq: tuple[str, ...] = ()
    extra_params: tuple[ExtraParam, ...] = ()
    options: KVPairs = ()

    def __post_init__(self):
        object.__setattr__(self, "package_seq", tuple(self.package_seq))
        object.__setattr__(
            self, "extra_params", tuple(sorted(self.extra_params, key=lambda p: p.name))
        )
        object.__setattr__(self, "options", freeze_map(self.options))

    @property
    def options_map(self) -> dict:
        return thaw_map(self.options)

    def as_document(self) -> dict:
        return {
            "id": self.id,
            "package_seq": list(self.package_seq),
            "extra_params": [p.as_document() for p in self.extra_params],
            "options": self.options_map,
        }


@dataclass(frozen=True)
class Model:
    """A simulation capability: declared input and output DataRefs, the
    scenarios that realize it and the packages those scenarios call."""

    id: str
    inputs: tuple[DataRef, ...] = ()
    outputs: tuple[DataRef, ...] = ()
    scenarios: tuple[Scenario, ...] = ()
    packages: tuple[str, ...] = ()
    enabled: bool = True
    selected_scenario: str = ""
    options: KVPairs = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(sorted(self.inputs, key=DataRef.key)))
        object.__setattr__(self, "outputs", tuple(sorted(self.outputs, key=DataRef.key)))
        object.__setattr__(self, "scenarios", tuple(sorted(self.scenarios, key=lambda s: s.id)))
        object.__setattr__(self, "packages", tuple(sorted(set(self.packages))))
        object.__setattr__(self, "options", freeze_map(self.options))

    @property
    def options_map(self) -> dict:
        return thaw_map(self.options)

    def scenario(self, scenario_id: str) -> Scenario | None:
        for s in self.scenarios:
            if s.id == scenario_id:
                return s
        return None

    def as_document(self) -> dict:
        return {
            "id": self.id,
            "enabled": self.enabled,
            "selected_scenario": self.selected_scenario,
            "options": self.options_map,
            "packages": list(self.packages),
            "inputs": [r.as_document() for r in self.inputs],
            "outputs": [r.as_document() for r in self.outputs],
            "scenarios": [s.as_document() for s in self.scenarios],
        }


@dataclass(frozen=True)
class Edge:
    """Directed dataflow edge: ``data`` is produced by ``from_model`` and
    consumed by ``to_model`` (membership checked at load)."""

    from_model: str
    to_model: str
    data: DataRef

    def key(self) -> tuple:
        return (self.from_model, self.to_model, self.data.key())

    def as_document(self) -> dict:
        return {
            "from_model": self.from_model,
            "to_model": self.to_model,
            "data": self.data.as_document(),
        }


@dataclass(frozen=True)
class SimObjectClass:
    """A full object description: bases, values, quality space, models, edges."""

    name: str
    version: int = 1
    mode: str = "analysis"
    bases: tuple[Basis, ...] = ()
    values: tuple[Value, ...] = ()
    quality: QualitySpace = DEFAULT_QUALITY_SPACE
    models: tuple[Model, ...] = ()
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(sorted(self.bases, key=lambda b: b.id)))
        object.__setattr__(self, "values", tuple(sorted(self.values, key=lambda v: v.id)))
        object.__setattr__(self, "models", tuple(sorted(self.models, key=lambda m: m.id)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=Edge.key)))

    def bases_by_id(self) -> dict[str, Basis]:
        return {b.id: b for b in self.bases}

    def values_by_id(self) -> dict[str, Value]:
        return {v.id: v for v in self.values}

    def models_by_id(self) -> dict[str, Model]:
        return {m.id: m for m in self.models}

    def const_values(self) -> tuple[Value, ...]:
        return tuple(v for v in self.values if v.variability == "const")

    def var_values(self) -> tuple[Value, ...]:
        return tuple(v for v in self.values if v.variability == "var")

    def all_refs(self) -> tuple[DataRef, ...]:
        """Every DataRef mentioned by a model signature or a value binding."""
        seen: dict[tuple, DataRef] = {}
        for m in self.models:
            for r in m.inputs + m.outputs:
                seen[r.key()] = r
            for s in m.scenarios:
                for p in s.extra_params:
                    if p.source == "vso_value" and isinstance(p.binding, DataRef):
                        seen[p.binding.key()] = p.binding
        return tuple(seen[k] for k in sorted(seen))


@dataclass(frozen=True)
class SimObjectInstance:
    """A class plus concrete payloads for its const values.

    ``param_values`` is keyed by canonical DataRef (value id, no basis,
    default quality); lookups during workflow compilation match by value id.
    """

    cls: SimObjectClass
    param_values: tuple[tuple[DataRef, Any], ...] = ()
    provided_data: tuple[tuple[DataRef, str], ...] = ()

    @property
    def params_by_value(self) -> dict[str, Any]:
        return {ref.value: payload for ref, payload in self.param_values}

    def missing_params(self) -> tuple[str, ...]:
        """Const value ids that still need a payload (flagged for marking)."""
        have = self.params_by_value
        return tuple(v.id for v in self.cls.const_values() if v.id not in have)


def replace_selected_scenario(model: Model, scenario_id: str) -> Model:
    return replace(model, selected_scenario=scenario_id)
