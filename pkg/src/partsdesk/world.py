"""Immutable world store and forked per-episode sessions.

A ``WorldState`` holds every entity of the simulated retailer and never
changes after construction; its digest is a pure function of contents.
Each episode gets an ``EpisodeSession``: a copy-on-write overlay over the
base world that sees its own mutations (read-your-writes) and nothing from
any sibling session. Mutations are validated against the hypothetical
post-state and applied atomically or not at all.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import schema


class WorldError(Exception):
    """Base class for world-store faults."""


class MutationError(WorldError):
    """A mutation was rejected; the session is unchanged."""

    code = "mutation-rejected"


class IntegrityViolationError(MutationError):
    code = "integrity-violation"


class UnknownTargetError(MutationError):
    code = "unknown-target"


class SchemaViolationError(MutationError):
    code = "schema-violation"


@dataclass(frozen=True, order=True)
class EntityId:
    kind: str
    local: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.local}"

    @classmethod
    def parse(cls, text: str) -> "EntityId":
        kind, _, local = text.partition(":")
        if not kind or not local:
            raise ValueError(f"malformed entity id {text!r}")
        return cls(kind, local)


@dataclass(frozen=True)
class Entity:
    id: EntityId
    attributes: dict[str, Any]

    @property
    def references(self) -> list[EntityId]:
        return [
            EntityId(target_kind, target_local)
            for _, target_kind, target_local in schema.extract_references(self.id.kind, self.attributes)
        ]

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id.local,
            "kind": self.id.kind,
            "attributes": self.attributes,
            "references": [str(r) for r in self.references],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Entity":
        return cls(id=EntityId(doc["kind"], doc["id"]), attributes=doc["attributes"])


@dataclass(frozen=True)
class Violation:
    entity: str
    field: str | None
    code: str
    message: str


@dataclass(frozen=True)
class Mutation:
    """One atomic change: set-attribute (multi-field delta), create-entity, or delete-entity."""

    target: EntityId
    op: str  # set-attribute | create-entity | delete-entity
    payload: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def set_attributes(cls, target: EntityId, delta: dict[str, Any]) -> "Mutation":
        return cls(target=target, op="set-attribute", payload={"attributes": delta})

    @classmethod
    def create(cls, entity: Entity) -> "Mutation":
        return cls(target=entity.id, op="create-entity", payload={"attributes": entity.attributes})

    @classmethod
    def delete(cls, target: EntityId) -> "Mutation":
        return cls(target=target, op="delete-entity")


def canonical_bytes(view: "WorldState | EpisodeSession") -> bytes:
    """Canonical serialization: entities sorted by (kind, local), keys sorted, compact UTF-8."""
    docs = [e.to_json() for e in sorted(view.iter_entities(), key=lambda e: e.id)]
    return json.dumps(docs, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def content_digest(view: "WorldState | EpisodeSession") -> str:
    return hashlib.sha256(canonical_bytes(view)).hexdigest()


class WorldState:
    """Immutable entity store. Safe to share across threads and sessions."""

    def __init__(self, seed: int, entities: Iterable[Entity], profile: str = "custom"):
        self.seed = seed
        self.profile = profile
        self._by_kind: dict[str, dict[str, Entity]] = {k: {} for k in schema.kind_names()}
        for entity in entities:
            bucket = self._by_kind.setdefault(entity.id.kind, {})
            if entity.id.local in bucket:
                raise WorldError(f"duplicate entity id {entity.id}")
            bucket[entity.id.local] = entity
        self._digest: str | None = None
        self._referrers: dict[EntityId, set[EntityId]] | None = None

    def get(self, entity_id: EntityId) -> Entity | None:
        return self._by_kind.get(entity_id.kind, {}).get(entity_id.local)

    def iter_entities(self) -> Iterator[Entity]:
        for kind in sorted(self._by_kind):
            for local in sorted(self._by_kind[kind]):
                yield self._by_kind[kind][local]

    def kind_locals(self, kind: str) -> list[str]:
        return sorted(self._by_kind.get(kind, {}))

    def counts(self) -> dict[str, int]:
        return {kind: len(bucket) for kind, bucket in self._by_kind.items()}

    def total_entities(self) -> int:
        return sum(len(b) for b in self._by_kind.values())

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = content_digest(self)
        return self._digest

    def referrers(self, target: EntityId) -> set[EntityId]:
        if self._referrers is None:
            index: dict[EntityId, set[EntityId]] = {}
            for entity in self.iter_entities():
                for ref in entity.references:
                    index.setdefault(ref, set()).add(entity.id)
            self._referrers = index
        return self._referrers.get(target, set())


class EpisodeSession:
    """Copy-on-write fork of a WorldState.

    Single-writer: calls on one session must be externally serialized.
    Deletions are tombstones in the overlay; the base world is never touched.
    """

    def __init__(self, base: WorldState):
        self.session_id = uuid.uuid4().hex
        self.base = base
        self.version = 0
        self._overlay: dict[EntityId, Entity | None] = {}  # None = tombstone
        self._created_per_kind: dict[str, int] = {}

    # -- reads ---------------------------------------------------------------

    def get(self, entity_id: EntityId) -> Entity | None:
        if entity_id in self._overlay:
            return self._overlay[entity_id]
        return self.base.get(entity_id)

    def iter_entities(self) -> Iterator[Entity]:
        seen = set(self._overlay)
        for entity in self.base.iter_entities():
            if entity.id in seen:
                override = self._overlay[entity.id]
                if override is not None:
                    yield override
            else:
                yield entity
        for entity_id in sorted(k for k, v in self._overlay.items() if v is not None):
            if self.base.get(entity_id) is None:
                yield self._overlay[entity_id]  # type: ignore[misc]

    def iter_kind(self, kind: str) -> Iterator[Entity]:
        for entity in self.iter_entities():
            if entity.id.kind == kind:
                yield entity

    def digest(self) -> str:
        return content_digest(self)

    def referrers(self, target: EntityId) -> set[EntityId]:
        live = {
            r for r in self.base.referrers(target)
            if r not in self._overlay  # overridden/tombstoned base referrers drop out
        }
        for entity in self._overlay.values():
            if entity is not None and target in entity.references:
                live.add(entity.id)
        return live

    def next_local(self, kind: str) -> str:
        """Deterministic id for session-created entities: <prefix>-x0001, -x0002, ..."""
        n = self._created_per_kind.get(kind, 0) + 1
        prefix = schema.kind_schemas()[kind].id_prefix
        return f"{prefix}-x{n:04d}"

    # -- writes --------------------------------------------------------------

    def apply(self, mutation: Mutation) -> int:
        """Validate against the hypothetical post-state, then commit. Returns the new version."""
        if mutation.op == "set-attribute":
            self._check_set(mutation)
            current = self.get(mutation.target)
            assert current is not None
            merged = dict(current.attributes)
            for name, value in mutation.payload["attributes"].items():
                if value is None:
                    merged.pop(name, None)
                else:
                    merged[name] = value
            self._overlay[mutation.target] = Entity(mutation.target, merged)
        elif mutation.op == "create-entity":
            entity = Entity(mutation.target, dict(mutation.payload["attributes"]))
            self._check_create(entity)
            self._overlay[entity.id] = entity
            kind = entity.id.kind
            self._created_per_kind[kind] = self._created_per_kind.get(kind, 0) + 1
        elif mutation.op == "delete-entity":
            self._check_delete(mutation.target)
            self._overlay[mutation.target] = None
        else:
            raise SchemaViolationError(f"unknown mutation op {mutation.op!r}")
        self.version += 1
        return self.version

    def _check_set(self, mutation: Mutation) -> None:
        current = self.get(mutation.target)
        if current is None:
            raise UnknownTargetError(f"no entity {mutation.target} in session view")
        delta = mutation.payload.get("attributes")
        if not isinstance(delta, dict) or not delta:
            raise SchemaViolationError("set-attribute requires a non-empty attribute delta")
        merged = dict(current.attributes)
        for name, value in delta.items():
            if value is None:
                merged.pop(name, None)
            else:
                merged[name] = value
        self._validate_entity(Entity(mutation.target, merged))

    def _check_create(self, entity: Entity) -> None:
        if not schema.is_kind(entity.id.kind):
            raise SchemaViolationError(f"unknown entity kind {entity.id.kind!r}")
        if self.get(entity.id) is not None:
            raise IntegrityViolationError(f"entity {entity.id} already exists")
        self._validate_entity(entity)

    def _check_delete(self, target: EntityId) -> None:
        if self.get(target) is None:
            raise UnknownTargetError(f"no entity {target} in session view")
        holders = self.referrers(target)
        if holders:
            names = ", ".join(str(h) for h in sorted(holders)[:3])
            raise IntegrityViolationError(f"{target} is still referenced by {names}")

    def _validate_entity(self, entity: Entity) -> None:
        problems = schema.validate_attributes(entity.id.kind, entity.attributes)
        if problems:
            raise SchemaViolationError(f"{entity.id}: " + "; ".join(problems))
        for field_name, target_kind, target_local in schema.extract_references(entity.id.kind, entity.attributes):
            target = EntityId(target_kind, target_local)
            if self.get(target) is None:
                raise IntegrityViolationError(
                    f"{entity.id}.{field_name} references missing {target}"
                )


def fork_session(world: WorldState) -> EpisodeSession:
    """Fresh isolated session over ``world``; initial reads equal the base world."""
    return EpisodeSession(world)


def check_integrity(view: WorldState | EpisodeSession) -> list[Violation]:
    """Every schema violation and dangling reference in the view; empty means valid."""
    violations: list[Violation] = []
    for entity in view.iter_entities():
        for problem in schema.validate_attributes(entity.id.kind, entity.attributes):
            violations.append(Violation(str(entity.id), None, "schema", problem))
        for field_name, target_kind, target_local in schema.extract_references(
            entity.id.kind, entity.attributes
        ):
            target = EntityId(target_kind, target_local)
            if view.get(target) is None:
                violations.append(
                    Violation(
                        str(entity.id),
                        field_name,
                        "dangling-reference",
                        f"{entity.id}.{field_name} references missing {target}",
                    )
                )
    return violations


# -- entity file export/import ------------------------------------------------

def write_entity_files(view: WorldState | EpisodeSession, entities_dir: Path) -> dict[str, int]:
    """One canonical JSON array per kind under ``entities_dir``. Returns per-kind counts."""
    entities_dir.mkdir(parents=True, exist_ok=True)
    buckets: dict[str, list[Entity]] = {kind: [] for kind in schema.kind_names()}
    for entity in view.iter_entities():
        buckets.setdefault(entity.id.kind, []).append(entity)
    counts = {}
    for kind, bucket in buckets.items():
        docs = [e.to_json() for e in sorted(bucket, key=lambda e: e.id)]
        text = json.dumps(docs, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        (entities_dir / f"{kind}.json").write_text(text, "utf-8")
        counts[kind] = len(bucket)
    return counts


def read_entity_files(entities_dir: Path) -> list[Entity]:
    entities: list[Entity] = []
    for kind in schema.kind_names():
        path = entities_dir / f"{kind}.json"
        if not path.exists():
            continue
        for doc in json.loads(path.read_text("utf-8")):
            entities.append(Entity.from_json(doc))
    return entities
