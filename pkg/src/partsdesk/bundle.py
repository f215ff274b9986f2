"""Self-contained bundle directories: world data, tasks, prompts, tool schemas.

Layout:

    manifest.json     name, version, world {seed, profile, digest}, paths, task_count
    entities/         one canonical JSON array per entity kind
    tasks/            one JSON file per task
    system-prompts/   agent context markdown
    tools.json        the 23 tool definitions

``validate_bundle`` re-checks everything (digest, referential integrity,
task schemas, prompt references, tool roster) and returns findings as
values; an empty list means the bundle is sound.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from . import __version__, schema
from .rubric import Task, TaskParseError, TaskSchemaError, load_task
from .toolkit import catalog_version, tool_catalog
from .world import WorldState, check_integrity, read_entity_files, write_entity_files


class BundleValidationError(ValueError):
    """pack_bundle refused its inputs; message carries the first findings."""


@dataclass(frozen=True)
class BundleManifest:
    name: str
    version: str
    world: dict[str, Any]   # {seed, profile, digest}
    paths: dict[str, str]   # {tasks_dir, entities_dir, system_prompts_dir, tools_file}
    task_count: int

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "version": self.version,
            "world": self.world,
            "paths": self.paths,
            "task_count": self.task_count,
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "BundleManifest":
        return cls(
            name=doc["name"],
            version=doc["version"],
            world=doc["world"],
            paths=doc["paths"],
            task_count=doc["task_count"],
        )


_DEFAULT_PATHS = {
    "tasks_dir": "tasks",
    "entities_dir": "entities",
    "system_prompts_dir": "system-prompts",
    "tools_file": "tools.json",
}


def _package_prompt_files() -> dict[str, str]:
    root = resources.files("partsdesk.data").joinpath("system_prompts")
    return {f"system-prompts/{p.name}": p.read_text("utf-8") for p in root.iterdir() if p.name.endswith(".md")}


def write_tasks(tasks: list[Task], tasks_dir: Path) -> None:
    tasks_dir.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        (tasks_dir / f"{task.id}.json").write_text(
            json.dumps(task.to_json(), indent=2, sort_keys=True, ensure_ascii=False), "utf-8"
        )


def pack_bundle(world: WorldState, tasks_dir: Path | str, out_dir: Path | str,
                name: str = "partsdesk-bundle") -> BundleManifest:
    """Assemble a bundle directory from a validated world and a task directory."""
    out_dir = Path(out_dir)
    tasks_dir = Path(tasks_dir)

    violations = check_integrity(world)
    if violations:
        raise BundleValidationError(f"world failed integrity check: {violations[:3]}")
    task_files = sorted(tasks_dir.glob("*.json"))
    if not task_files:
        raise BundleValidationError(f"no task files in {tasks_dir}")
    prompts = _package_prompt_files()
    tasks = []
    for path in task_files:
        task = load_task(path)  # raises on schema problems
        if task.system_prompt_ref not in prompts:
            raise BundleValidationError(f"{path.name}: unknown system_prompt_ref {task.system_prompt_ref!r}")
        tasks.append(task)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_entity_files(world, out_dir / _DEFAULT_PATHS["entities_dir"])
    bundle_tasks = out_dir / _DEFAULT_PATHS["tasks_dir"]
    if bundle_tasks.exists():
        shutil.rmtree(bundle_tasks)
    bundle_tasks.mkdir(parents=True)
    for path in task_files:
        shutil.copy(path, bundle_tasks / path.name)
    prompts_dir = out_dir / _DEFAULT_PATHS["system_prompts_dir"]
    prompts_dir.mkdir(parents=True, exist_ok=True)
    for ref, text in prompts.items():
        (out_dir / ref).write_text(text, "utf-8")
    tools_text = resources.files("partsdesk.data").joinpath("tools.json").read_text("utf-8")
    (out_dir / _DEFAULT_PATHS["tools_file"]).write_text(tools_text, "utf-8")

    manifest = BundleManifest(
        name=name,
        version=__version__,
        world={"seed": world.seed, "profile": world.profile, "digest": world.digest},
        paths=dict(_DEFAULT_PATHS),
        task_count=len(tasks),
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True), "utf-8"
    )
    return manifest


@dataclass
class Bundle:
    root: Path
    manifest: BundleManifest
    world: WorldState
    tasks: list[Task]
    system_prompts: dict[str, str]

    @property
    def tasks_by_id(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    def system_prompt_for(self, task: Task) -> str:
        return self.system_prompts.get(task.system_prompt_ref, "")


def load_bundle(bundle_dir: Path | str) -> Bundle:
    root = Path(bundle_dir)
    manifest = BundleManifest.from_json(json.loads((root / "manifest.json").read_text("utf-8")))
    entities = read_entity_files(root / manifest.paths["entities_dir"])
    world = WorldState(
        seed=manifest.world["seed"], entities=entities, profile=manifest.world.get("profile", "custom")
    )
    if world.digest != manifest.world["digest"]:
        raise BundleValidationError(
            f"bundle world digest mismatch: manifest {manifest.world['digest'][:12]}, "
            f"recomputed {world.digest[:12]}"
        )
    tasks = [load_task(p) for p in sorted((root / manifest.paths["tasks_dir"]).glob("*.json"))]
    prompts = {}
    prompts_dir = root / manifest.paths["system_prompts_dir"]
    if prompts_dir.is_dir():
        for path in sorted(prompts_dir.iterdir()):
            prompts[f"{manifest.paths['system_prompts_dir']}/{path.name}"] = path.read_text("utf-8")
    return Bundle(root=root, manifest=manifest, world=world, tasks=tasks, system_prompts=prompts)


def validate_bundle(bundle_dir: Path | str) -> list[dict[str, str]]:
    """Check a bundle directory end to end; findings are values, empty means valid."""
    root = Path(bundle_dir)
    findings: list[dict[str, str]] = []

    def finding(code: str, path: str, message: str) -> None:
        findings.append({"code": code, "path": path, "message": message})

    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        finding("missing-file", "manifest.json", "bundle has no manifest")
        return findings
    try:
        manifest = BundleManifest.from_json(json.loads(manifest_path.read_text("utf-8")))
    except (json.JSONDecodeError, KeyError) as err:
        finding("bad-manifest", "manifest.json", f"cannot parse manifest: {err}")
        return findings

    for key in ("tasks_dir", "entities_dir", "system_prompts_dir"):
        if not (root / manifest.paths[key]).is_dir():
            finding("missing-dir", manifest.paths[key], f"manifest names missing directory {manifest.paths[key]!r}")
    tools_file = root / manifest.paths["tools_file"]
    if not tools_file.exists():
        finding("missing-file", manifest.paths["tools_file"], "tool definitions file absent")
    else:
        try:
            doc = json.loads(tools_file.read_text("utf-8"))
            names = [t["name"] for t in doc.get("tools", [])]
            expected = [d.name for d in tool_catalog()]
            if names != expected:
                finding("tool-roster", manifest.paths["tools_file"],
                        f"tool roster differs from catalog ({len(names)} vs {len(expected)} names)")
            if doc.get("catalog_version") != catalog_version():
                finding("tool-version", manifest.paths["tools_file"],
                        f"catalog_version {doc.get('catalog_version')!r} != {catalog_version()!r}")
        except (json.JSONDecodeError, TypeError, KeyError) as err:
            finding("bad-tools", manifest.paths["tools_file"], f"cannot parse tools file: {err}")

    entities_dir = root / manifest.paths["entities_dir"]
    world = None
    if entities_dir.is_dir():
        for kind in schema.kind_names():
            if not (entities_dir / f"{kind}.json").exists():
                finding("missing-file", f"{manifest.paths['entities_dir']}/{kind}.json", f"no entity file for kind {kind!r}")
        try:
            world = WorldState(
                seed=manifest.world["seed"],
                entities=read_entity_files(entities_dir),
                profile=manifest.world.get("profile", "custom"),
            )
        except Exception as err:  # duplicate ids, malformed docs
            finding("bad-entities", manifest.paths["entities_dir"], str(err))
    if world is not None:
        if world.digest != manifest.world["digest"]:
            finding("digest-mismatch", manifest.paths["entities_dir"],
                    f"entities hash to {world.digest[:12]}..., manifest says {manifest.world['digest'][:12]}...")
        for violation in check_integrity(world):
            finding("integrity", violation.entity, violation.message)

    tasks_dir = root / manifest.paths["tasks_dir"]
    task_count = 0
    if tasks_dir.is_dir():
        for path in sorted(tasks_dir.glob("*.json")):
            try:
                task = load_task(path)
            except (TaskParseError, TaskSchemaError) as err:
                finding("bad-task", path.name, str(err))
                continue
            task_count += 1
            prompt_path = root / task.system_prompt_ref
            if not prompt_path.exists():
                finding("missing-prompt", path.name,
                        f"task references missing system prompt {task.system_prompt_ref!r}")
        if task_count != manifest.task_count:
            finding("task-count", manifest.paths["tasks_dir"],
                    f"manifest says {manifest.task_count} tasks, found {task_count}")
    return findings
