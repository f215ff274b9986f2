"""Closed per-kind attribute schemas for world entities.

The schema ships as versioned package data (``data/entity_schema.json``) and
is the single source of truth for which attributes each of the 14 entity
kinds may carry, which are required, and which fields are typed references
to other kinds. Everything that validates or walks entities goes through
this module.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

LINE_ITEM_FIELDS = {"product": "ref:product", "quantity": "int", "unit_price": "number"}


@dataclass(frozen=True)
class FieldSpec:
    name: str
    type: str
    required: bool
    enum: tuple[str, ...] | None = None

    @property
    def ref_kind(self) -> str | None:
        if self.type.startswith("ref:"):
            return self.type.split(":", 1)[1]
        if self.type.startswith("list[ref:"):
            return self.type[len("list[ref:"):-1]
        return None


@dataclass(frozen=True)
class KindSchema:
    kind: str
    id_prefix: str
    droppable: str
    fields: dict[str, FieldSpec]


def _load_raw() -> dict[str, Any]:
    text = resources.files("partsdesk.data").joinpath("entity_schema.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def schema_version() -> str:
    return _load_raw()["version"]


@lru_cache(maxsize=1)
def kind_schemas() -> dict[str, KindSchema]:
    raw = _load_raw()
    out: dict[str, KindSchema] = {}
    for kind, spec in raw["kinds"].items():
        fields = {
            name: FieldSpec(
                name=name,
                type=f["type"],
                required=f["required"],
                enum=tuple(f["enum"]) if "enum" in f else None,
            )
            for name, f in spec["fields"].items()
        }
        out[kind] = KindSchema(kind=kind, id_prefix=spec["id_prefix"], droppable=spec["droppable"], fields=fields)
    return out


def kind_names() -> tuple[str, ...]:
    return tuple(kind_schemas().keys())


def is_kind(kind: str) -> bool:
    return kind in kind_schemas()


def _scalar_ok(type_name: str, value: Any) -> bool:
    if type_name == "str" or type_name.startswith("ref:"):
        return isinstance(value, str)
    if type_name == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_name == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_name == "bool":
        return isinstance(value, bool)
    if type_name == "date":
        return isinstance(value, str) and bool(_DATE_RE.match(value))
    return False


def _value_ok(type_name: str, value: Any) -> bool:
    if type_name.startswith("list[") and type_name.endswith("]"):
        if not isinstance(value, list):
            return False
        inner = type_name[len("list["):-1]
        if inner == "line_item":
            return all(_line_item_ok(item) for item in value)
        return all(_scalar_ok(inner, item) for item in value)
    return _scalar_ok(type_name, value)


def _line_item_ok(item: Any) -> bool:
    if not isinstance(item, dict) or set(item) != set(LINE_ITEM_FIELDS):
        return False
    return all(_scalar_ok(t, item[f]) for f, t in LINE_ITEM_FIELDS.items())


def validate_attributes(kind: str, attributes: dict[str, Any]) -> list[str]:
    """Return one human-readable problem string per schema violation."""
    ks = kind_schemas().get(kind)
    if ks is None:
        return [f"unknown entity kind {kind!r}"]
    problems: list[str] = []
    for name, spec in ks.fields.items():
        if name not in attributes:
            if spec.required:
                problems.append(f"missing required attribute {name!r}")
            continue
        value = attributes[name]
        if not _value_ok(spec.type, value):
            problems.append(f"attribute {name!r} is not a valid {spec.type}")
        elif spec.enum is not None and value not in spec.enum:
            problems.append(f"attribute {name!r} value {value!r} not in {list(spec.enum)}")
    for name in attributes:
        if name not in ks.fields:
            problems.append(f"attribute {name!r} not in schema for kind {kind!r}")
    return problems


def reference_fields(kind: str) -> list[FieldSpec]:
    ks = kind_schemas()[kind]
    return [f for f in ks.fields.values() if f.ref_kind is not None or f.type == "list[line_item]"]


def extract_references(kind: str, attributes: dict[str, Any]) -> list[tuple[str, str, str]]:
    """Yield (field, target_kind, target_local) for every reference an entity carries."""
    refs: list[tuple[str, str, str]] = []
    ks = kind_schemas().get(kind)
    if ks is None:
        return refs
    for name, spec in ks.fields.items():
        if name not in attributes:
            continue
        value = attributes[name]
        if spec.type.startswith("ref:") and isinstance(value, str):
            refs.append((name, spec.ref_kind or "", value))
        elif spec.type.startswith("list[ref:") and isinstance(value, list):
            refs.extend((name, spec.ref_kind or "", item) for item in value if isinstance(item, str))
        elif spec.type == "list[line_item]" and isinstance(value, list):
            for item in value:
                if isinstance(item, dict) and isinstance(item.get("product"), str):
                    refs.append((name, "product", item["product"]))
    return refs
