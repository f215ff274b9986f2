"""The 23-tool session runtime.

Definitions live in versioned package data (``data/tools.json``); this
module binds a handler to each definition and fails at import time on any
drift between the two. Query tools read the session, mutating tools apply
exactly one transactional mutation batch, and search tools return at most
``result_cap`` items in a documented stable order with no truncation
indicator.

Tool-level failures are values, not exceptions: ``invoke`` always returns a
``ToolResult`` whose status is ``ok``, ``unknown-tool``,
``schema-violation``, or ``domain-error``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from functools import lru_cache
from importlib import resources
from typing import Any, Callable

from .world import Entity, EntityId, EpisodeSession, Mutation, MutationError
from .worldgen import FORM_FACTORS, SIM_TODAY

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class DomainError(Exception):
    """Structured refusal from a tool handler (not a protocol fault)."""

    def __init__(self, reason: str, message: str, detail: dict[str, Any] | None = None):
        super().__init__(message)
        self.reason = reason
        self.detail = detail or {}


@dataclass(frozen=True)
class ToolDefinition:
    name: str
    category: str
    description: str
    mutates: bool
    params: dict[str, dict[str, Any]]
    search: dict[str, Any] | None = None

    @property
    def result_cap(self) -> int:
        return int(self.search["result_cap"]) if self.search else 0

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "category": self.category,
            "description": self.description,
            "mutates": self.mutates,
            "params": self.params,
        }
        if self.search:
            doc["search"] = self.search
        return doc


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: dict[str, Any]
    call_id: str

    def to_json(self) -> dict[str, Any]:
        return {"tool": self.tool, "arguments": self.arguments, "call_id": self.call_id}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "ToolCall":
        return cls(tool=doc["tool"], arguments=doc["arguments"], call_id=doc["call_id"])


@dataclass(frozen=True)
class ToolResult:
    call_id: str
    status: str  # ok | unknown-tool | schema-violation | domain-error
    payload: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict[str, Any]:
        return {"call_id": self.call_id, "status": self.status, "payload": self.payload}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "ToolResult":
        return cls(call_id=doc["call_id"], status=doc["status"], payload=doc["payload"])


@lru_cache(maxsize=1)
def _catalog_doc() -> dict[str, Any]:
    text = resources.files("partsdesk.data").joinpath("tools.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def tool_catalog() -> tuple[ToolDefinition, ...]:
    doc = _catalog_doc()
    defs = tuple(
        ToolDefinition(
            name=t["name"],
            category=t["category"],
            description=t["description"],
            mutates=t["mutates"],
            params=t["params"],
            search=t.get("search"),
        )
        for t in doc["tools"]
    )
    names = [d.name for d in defs]
    if len(set(names)) != len(names):
        raise RuntimeError("tools.json contains duplicate tool names")
    return defs


def catalog_version() -> str:
    return _catalog_doc()["catalog_version"]


def tool_by_name(name: str) -> ToolDefinition | None:
    return {d.name: d for d in tool_catalog()}.get(name)


def validate_args(defn: ToolDefinition, arguments: dict[str, Any]) -> list[dict[str, str]]:
    """Pure validation; reports every violation, not just the first."""
    violations: list[dict[str, str]] = []

    def bad(param: str, code: str, message: str) -> None:
        violations.append({"param": param, "code": code, "message": message})

    for name in arguments:
        if name not in defn.params:
            bad(name, "unknown-param", f"{defn.name} does not accept {name!r}")
    for name, spec in defn.params.items():
        if name not in arguments:
            if spec.get("required"):
                bad(name, "missing", f"{defn.name} requires {name!r}")
            continue
        value = arguments[name]
        expected = spec["type"]
        type_ok = {
            "string": lambda v: isinstance(v, str),
            "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
            "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
            "boolean": lambda v: isinstance(v, bool),
        }[expected](value)
        if not type_ok:
            bad(name, "type", f"{name!r} must be a {expected}")
            continue
        if spec.get("format") == "date" and not _DATE_RE.match(value):
            bad(name, "format", f"{name!r} must be a YYYY-MM-DD date")
        if "enum" in spec and value not in spec["enum"]:
            bad(name, "enum", f"{name!r} must be one of {spec['enum']}")
        if "min" in spec and isinstance(value, (int, float)) and value < spec["min"]:
            bad(name, "range", f"{name!r} must be >= {spec['min']}")
        if "max" in spec and isinstance(value, (int, float)) and value > spec["max"]:
            bad(name, "range", f"{name!r} must be <= {spec['max']}")
    return violations


# -- shared domain helpers ------------------------------------------------------

def order_total(order: Entity) -> dict[str, float]:
    items = order.attributes["line_items"]
    subtotal = round(sum(i["quantity"] * i["unit_price"] for i in items), 2)
    shipping = float(order.attributes["shipping_fee"])
    discount = float(order.attributes["discount"])
    return {
        "items_subtotal": subtotal,
        "shipping_fee": shipping,
        "discount": discount,
        "total": round(subtotal + shipping - discount, 2),
    }


def returns_policy(session: EpisodeSession) -> Entity | None:
    candidates = [
        e for e in session.iter_kind("company_policy")
        if e.attributes.get("policy_type") == "returns" and "return_window_days" in e.attributes
    ]
    return min(candidates, key=lambda e: e.id) if candidates else None


def return_eligibility(session: EpisodeSession, order: Entity, today: date = SIM_TODAY) -> dict[str, Any]:
    policy = returns_policy(session)
    window = int(policy.attributes["return_window_days"]) if policy else 30
    placed = date.fromisoformat(order.attributes["placed_at"])
    days = (today - placed).days
    status = order.attributes["status"]
    if status != "delivered":
        eligible, reason = False, f"order status is {status!r}; only delivered orders can be returned"
    elif days > window:
        eligible, reason = False, f"{days} days since purchase exceeds the {window}-day window"
    else:
        eligible, reason = True, f"{days} days since purchase is within the {window}-day window"
    return {"eligible": eligible, "reason": reason, "days_since_order": days, "window_days": window}


def build_issues(session: EpisodeSession, build: Entity) -> list[dict[str, str]]:
    """Evaluate every applicable compatibility rule against a build's components."""
    components = [session.get(EntityId("product", local)) for local in build.attributes["components"]]
    components = [c for c in components if c is not None]
    by_cat: dict[str, list[Entity]] = {}
    for product in components:
        by_cat.setdefault(product.attributes["category"], []).append(product)
    issues: list[dict[str, str]] = []
    for rule in session.iter_kind("compatibility_rule"):
        rtype = rule.attributes["rule_type"]
        if rtype == "socket_match":
            cpus, mobos = by_cat.get("cpu", []), by_cat.get("motherboard", [])
            for cpu in cpus:
                for mobo in mobos:
                    if cpu.attributes.get("socket") != mobo.attributes.get("socket"):
                        issues.append({
                            "rule": rtype,
                            "description": rule.attributes["description"],
                            "detail": f"{cpu.attributes['name']} ({cpu.attributes.get('socket')}) does not fit "
                                      f"{mobo.attributes['name']} ({mobo.attributes.get('socket')}) socket",
                        })
        elif rtype == "form_factor_fit":
            cases, mobos = by_cat.get("case", []), by_cat.get("motherboard", [])
            for case in cases:
                for mobo in mobos:
                    case_ff = case.attributes.get("form_factor", "ITX")
                    mobo_ff = mobo.attributes.get("form_factor", "ATX")
                    if FORM_FACTORS.index(case_ff) < FORM_FACTORS.index(mobo_ff):
                        issues.append({
                            "rule": rtype,
                            "description": rule.attributes["description"],
                            "detail": f"{case.attributes['name']} ({case_ff}) cannot hold a {mobo_ff} motherboard",
                        })
        elif rtype == "psu_headroom":
            psus = by_cat.get("psu", [])
            margin = int(rule.attributes.get("margin_watts", 0))
            draw = sum(
                int(p.attributes.get("wattage", 0))
                for p in components if p.attributes["category"] != "psu"
            )
            for psu in psus:
                supply = int(psu.attributes.get("wattage", 0))
                if supply < draw + margin:
                    issues.append({
                        "rule": rtype,
                        "description": rule.attributes["description"],
                        "detail": f"{psu.attributes['name']} supplies {supply}W but the build draws "
                                  f"{draw}W (needs {draw + margin}W with margin)",
                    })
    return issues


# -- search machinery -----------------------------------------------------------

def _contains(haystack: str | None, needle: str) -> bool:
    return needle.lower() in (haystack or "").lower()


def _search_predicate(tool: str, args: dict[str, Any]) -> Callable[[Entity], bool]:
    def pred(e: Entity) -> bool:
        a = e.attributes
        if tool == "searchCustomers":
            if "query" in args and not (_contains(a.get("name"), args["query"]) or _contains(a.get("email"), args["query"])):
                return False
            if "email" in args and a.get("email") != args["email"]:
                return False
            if "loyalty_tier" in args and a.get("loyalty_tier") != args["loyalty_tier"]:
                return False
        elif tool == "searchOrders":
            if "customer_id" in args and a.get("customer") != args["customer_id"]:
                return False
            if "status" in args and a.get("status") != args["status"]:
                return False
            if "product_id" in args and args["product_id"] not in [i["product"] for i in a.get("line_items", [])]:
                return False
            if "placed_after" in args and a.get("placed_at", "") < args["placed_after"]:
                return False
            if "placed_before" in args and a.get("placed_at", "") > args["placed_before"]:
                return False
        elif tool == "searchProducts":
            if "query" in args and not (_contains(a.get("name"), args["query"]) or _contains(a.get("sku"), args["query"])):
                return False
            if "category" in args and a.get("category") != args["category"]:
                return False
            if "min_price" in args and a.get("price", 0) < args["min_price"]:
                return False
            if "max_price" in args and a.get("price", 0) > args["max_price"]:
                return False
        elif tool == "searchBuilds":
            if "query" in args and not _contains(a.get("name"), args["query"]):
                return False
            if "customer_id" in args and a.get("customer") != args["customer_id"]:
                return False
        elif tool == "searchTickets":
            if "customer_id" in args and a.get("customer") != args["customer_id"]:
                return False
            if "order_id" in args and a.get("order") != args["order_id"]:
                return False
            if "status" in args and a.get("status") != args["status"]:
                return False
            if "priority" in args and a.get("priority") != args["priority"]:
                return False
        elif tool == "searchShipments":
            if "order_id" in args and a.get("order") != args["order_id"]:
                return False
            if "carrier" in args and (a.get("carrier") or "").lower() != args["carrier"].lower():
                return False
            if "status" in args and a.get("status") != args["status"]:
                return False
        elif tool == "searchKnowledgebase":
            if "query" in args:
                hit = (
                    _contains(a.get("title"), args["query"])
                    or _contains(a.get("body"), args["query"])
                    or any(_contains(t, args["query"]) for t in a.get("tags", []))
                )
                if not hit:
                    return False
            if "category" in args and a.get("category") != args["category"]:
                return False
            if "product_id" in args and a.get("product") != args["product_id"]:
                return False
        elif tool == "searchPromotions":
            if "code" in args and a.get("code") != args["code"]:
                return False
            if "active_on" in args and not (a.get("valid_from", "") <= args["active_on"] <= a.get("valid_to", "")):
                return False
            if "category" in args and a.get("category") != args["category"]:
                return False
        return True

    return pred


SEARCH_KIND = {
    "searchCustomers": "customer",
    "searchOrders": "order",
    "searchProducts": "product",
    "searchBuilds": "build",
    "searchTickets": "ticket",
    "searchShipments": "shipment",
    "searchKnowledgebase": "kb_article",
    "searchPromotions": "promotion",
}

SEARCH_SORT = {
    "searchCustomers": [("name", False)],
    "searchOrders": [("placed_at", True)],
    "searchProducts": [("name", False)],
    "searchBuilds": [("name", False)],
    "searchTickets": [("created_at", True)],
    "searchShipments": [("shipped_at", True)],
    "searchKnowledgebase": [("title", False)],
    "searchPromotions": [("code", False)],
}


def sort_entities(entities: list[Entity], spec: list[tuple[str, bool]]) -> list[Entity]:
    """Stable multi-key sort; the local id is always the final ascending tiebreak."""
    ordered = sorted(entities, key=lambda e: e.id.local)
    for attr, desc in reversed(spec):
        ordered.sort(key=lambda e: str(e.attributes.get(attr, "")), reverse=desc)
    return ordered


def run_search(session: EpisodeSession, defn: ToolDefinition, args: dict[str, Any]) -> dict[str, Any]:
    kind = SEARCH_KIND[defn.name]
    cap = defn.result_cap
    limit = min(int(args.get("limit", cap)), cap)
    offset = int(args.get("offset", 0))
    matches = [e for e in session.iter_kind(kind) if _search_predicate(defn.name, args)(e)]
    ordered = sort_entities(matches, SEARCH_SORT[defn.name])
    page = ordered[offset:offset + limit]
    # Deliberately no total count and no has-more flag.
    return {"items": [e.to_json() for e in page]}


# -- handlers --------------------------------------------------------------------

def _need(session: EpisodeSession, kind: str, local: str) -> Entity:
    entity = session.get(EntityId(kind, local))
    if entity is None:
        raise DomainError("unknown-target", f"no {kind} with id {local!r}")
    return entity


def _h_get(kind: str, param: str) -> Callable:
    def handler(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
        entity = session.get(EntityId(kind, args[param]))
        if entity is None:
            return {"found": False, "entity": None}
        return {"found": True, "entity": entity.to_json()}
    return handler


def _h_get_inventory(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    product = session.get(EntityId("product", args["product_id"]))
    rows = [
        e.to_json() for e in sort_entities(
            [e for e in session.iter_kind("inventory_level") if e.attributes.get("product") == args["product_id"]],
            [("warehouse", False)],
        )
    ]
    return {"found": product is not None, "items": rows}


def _h_update_ticket_status(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    ticket = _need(session, "ticket", args["ticket_id"])
    old = ticket.attributes["status"]
    version = session.apply(Mutation.set_attributes(
        ticket.id, {"status": args["status"], "updated_at": SIM_TODAY.isoformat()}
    ))
    return {"ticket_id": ticket.id.local, "old_status": old, "new_status": args["status"], "version": version}


def _h_process_return(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    order = _need(session, "order", args["order_id"])
    verdict = return_eligibility(session, order)
    if not verdict["eligible"]:
        raise DomainError("not-returnable", verdict["reason"], verdict)
    refund = order_total(order)["total"]
    version = session.apply(Mutation.set_attributes(
        order.id, {"status": "returned", "refund_amount": refund}
    ))
    return {"order_id": order.id.local, "refund_amount": refund, "version": version}


def _h_create_ticket(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    customer = _need(session, "customer", args["customer_id"])
    attrs: dict[str, Any] = {
        "customer": customer.id.local,
        "subject": args["subject"],
        "status": "open",
        "priority": args.get("priority", "normal"),
        "created_at": SIM_TODAY.isoformat(),
        "updated_at": SIM_TODAY.isoformat(),
        "notes": [],
    }
    if "order_id" in args:
        order = _need(session, "order", args["order_id"])
        if order.attributes["customer"] != customer.id.local:
            raise DomainError(
                "order-customer-mismatch",
                f"order {order.id.local} belongs to a different customer",
            )
        attrs["order"] = order.id.local
    local = session.next_local("ticket")
    version = session.apply(Mutation.create(Entity(EntityId("ticket", local), attrs)))
    return {"ticket_id": local, "version": version}


def _h_update_order_status(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    order = _need(session, "order", args["order_id"])
    old = order.attributes["status"]
    version = session.apply(Mutation.set_attributes(order.id, {"status": args["status"]}))
    return {"order_id": order.id.local, "old_status": old, "new_status": args["status"], "version": version}


def _h_add_ticket_note(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    ticket = _need(session, "ticket", args["ticket_id"])
    notes = list(ticket.attributes.get("notes", [])) + [args["note"]]
    version = session.apply(Mutation.set_attributes(
        ticket.id, {"notes": notes, "updated_at": SIM_TODAY.isoformat()}
    ))
    return {"ticket_id": ticket.id.local, "note_count": len(notes), "version": version}


def _h_send_customer_email(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    customer = _need(session, "customer", args["customer_id"])
    return {
        "delivered": True,
        "recipient": customer.attributes["email"],
        "subject": args["subject"],
        "body_chars": len(args["body"]),
    }


def _h_validate_build(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    build = _need(session, "build", args["build_id"])
    issues = build_issues(session, build)
    return {"build_id": build.id.local, "compatible": not issues, "issues": issues}


def _h_compute_order_total(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    order = _need(session, "order", args["order_id"])
    out = order_total(order)
    out["order_id"] = order.id.local
    return out


def _h_check_return_eligibility(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    order = _need(session, "order", args["order_id"])
    verdict = return_eligibility(session, order)
    verdict["order_id"] = order.id.local
    return verdict


def _h_get_current_date(session: EpisodeSession, args: dict[str, Any]) -> dict[str, Any]:
    return {"date": SIM_TODAY.isoformat()}


_HANDLERS: dict[str, Callable[[EpisodeSession, dict[str, Any]], dict[str, Any]]] = {
    **{name: (lambda s, a, _n=name: run_search(s, tool_by_name(_n), a)) for name in SEARCH_KIND},
    "getCustomer": _h_get("customer", "customer_id"),
    "getOrder": _h_get("order", "order_id"),
    "getProduct": _h_get("product", "product_id"),
    "getTicket": _h_get("ticket", "ticket_id"),
    "getInventory": _h_get_inventory,
    "updateTicketStatus": _h_update_ticket_status,
    "processReturn": _h_process_return,
    "createTicket": _h_create_ticket,
    "updateOrderStatus": _h_update_order_status,
    "addTicketNote": _h_add_ticket_note,
    "sendCustomerEmail": _h_send_customer_email,
    "validateBuildCompatibility": _h_validate_build,
    "computeOrderTotal": _h_compute_order_total,
    "checkReturnEligibility": _h_check_return_eligibility,
    "getCurrentDate": _h_get_current_date,
}

_missing = {d.name for d in tool_catalog()} ^ set(_HANDLERS)
if _missing:
    raise RuntimeError(f"tools.json and handlers disagree on: {sorted(_missing)}")


class ToolRuntime:
    """Executes tool calls against one session. Single-writer, like the session."""

    def __init__(self, session: EpisodeSession):
        self.session = session

    def invoke(self, call: ToolCall) -> ToolResult:
        defn = tool_by_name(call.tool)
        if defn is None:
            return ToolResult(call.call_id, "unknown-tool", {"tool": call.tool})
        violations = validate_args(defn, call.arguments)
        if violations:
            return ToolResult(call.call_id, "schema-violation", {"violations": violations})
        try:
            payload = _HANDLERS[call.tool](self.session, call.arguments)
        except DomainError as err:
            return ToolResult(call.call_id, "domain-error", {
                "reason": err.reason, "message": str(err), **({"detail": err.detail} if err.detail else {}),
            })
        except MutationError as err:
            return ToolResult(call.call_id, "domain-error", {"reason": err.code, "message": str(err)})
        return ToolResult(call.call_id, "ok", payload)
