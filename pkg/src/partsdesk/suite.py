"""Shipped task suite: 40+ solvable tasks derived deterministically from a world.

Each template scans the world for entities meeting its preconditions (a
shipment with tracking, an order inside the returns window, an incompatible
build, ...) and emits tasks whose rubric criteria and oracle plan are baked
from actual world values, so the oracle plan provably earns reward 1.0.
"""

from __future__ import annotations

from typing import Any

from . import toolkit
from .rubric import CheckSpec, OraclePlan, Rubric, RubricCriterion, Task
from .world import EntityId, WorldState, fork_session
from .worldgen import SIM_TODAY

SYSTEM_PROMPT_REF = "system-prompts/support_agent.md"
SUITE_MAX_TURNS = 12

RETURN_REASONS = [
    "arrived with a damaged corner",
    "turned out to be the wrong size for their case",
    "no longer matches their build plan",
]
ISSUE_PHRASES = [
    "arrived with a loud rattle inside the box",
    "will not power on at all",
    "is missing the mounting screws",
]


def _crit(cid: str, kind: str, ctype: str, **params: Any) -> RubricCriterion:
    return RubricCriterion(id=cid, kind=kind, check=CheckSpec(ctype, params))


def _task(tid: str, category: str, prompt: str, criteria: list[RubricCriterion],
          calls: list[dict[str, Any]], final: str) -> Task:
    return Task(
        id=tid,
        category=category,
        prompt=prompt,
        system_prompt_ref=SYSTEM_PROMPT_REF,
        rubric=Rubric(tuple(criteria)),
        max_turns=SUITE_MAX_TURNS,
        oracle_plan=OraclePlan(calls=tuple(calls), final_response=final),
    )


def build_task_suite(world: WorldState) -> list[Task]:
    session = fork_session(world)  # read-only ground-truth view
    attrs = lambda kind, local: session.get(EntityId(kind, local)).attributes  # noqa: E731

    orders = world.kind_locals("order")
    shipments = world.kind_locals("shipment")
    tickets = world.kind_locals("ticket")
    customers = world.kind_locals("customer")
    products = world.kind_locals("product")
    builds = world.kind_locals("build")

    def customer_name(local: str) -> str:
        return attrs("customer", local)["name"]

    def order_customer(order_local: str) -> str:
        return attrs("order", order_local)["customer"]

    shipped = [s for s in shipments if attrs("shipment", s)["status"] in ("in_transit", "delayed", "delivered")]
    moving = [s for s in shipments if attrs("shipment", s)["status"] in ("in_transit", "delayed")]
    returnable, expired = [], []
    for o in orders:
        verdict = toolkit.return_eligibility(session, session.get(EntityId("order", o)))
        if verdict["eligible"]:
            returnable.append((o, verdict))
        elif attrs("order", o)["status"] == "delivered":
            expired.append((o, verdict))
    open_tickets = [t for t in tickets if attrs("ticket", t)["status"] in ("open", "pending")]
    active_promos = [
        p for p in world.kind_locals("promotion")
        if attrs("promotion", p)["valid_from"] <= SIM_TODAY.isoformat() <= attrs("promotion", p)["valid_to"]
    ]
    build_verdicts = {
        b: toolkit.build_issues(session, session.get(EntityId("build", b))) for b in builds
    }
    good_builds = [b for b in builds if not build_verdicts[b]]
    bad_builds = [b for b in builds if build_verdicts[b]]

    tasks: list[Task] = []

    # -- information retrieval --------------------------------------------------

    for o in orders[:4]:
        a = attrs("order", o)
        tasks.append(_task(
            f"ir-status-{o}", "information-retrieval",
            f"Customer {customer_name(a['customer'])} is asking for an update on order {o}. "
            f"Look it up and tell me its current status.",
            [
                _crit("looked-up-order", "completeness", "tool-was-called", tool="getOrder", where={"order_id": o}),
                _crit("states-status", "correctness", "response-contains-fact", fact=a["status"]),
            ],
            [{"tool": "getOrder", "arguments": {"order_id": o}}],
            f"Order {o} is currently {a['status']}.",
        ))

    for s in shipped[:3]:
        a = attrs("shipment", s)
        o = a["order"]
        tasks.append(_task(
            f"ir-tracking-{s}", "information-retrieval",
            f"Customer {customer_name(order_customer(o))} wants the tracking details for order {o}. "
            f"Which carrier has it, and what is the tracking number?",
            [
                _crit("looked-up-shipment", "completeness", "tool-was-called", tool="searchShipments", where={"order_id": o}),
                _crit("states-carrier", "correctness", "response-contains-fact", fact=a["carrier"]),
                _crit("states-tracking", "correctness", "response-contains-fact", fact=a["tracking_number"]),
            ],
            [{"tool": "searchShipments", "arguments": {"order_id": o}}],
            f"Order {o} shipped via {a['carrier']}; the tracking number is {a['tracking_number']}.",
        ))

    for p in products[12:15]:
        a = attrs("product", p)
        tasks.append(_task(
            f"ir-price-{p}", "information-retrieval",
            f"A customer wants to know the current price of the {a['name']} (SKU {a['sku']}). "
            f"What does it sell for?",
            [
                _crit("searched-catalog", "completeness", "tool-was-called", tool="searchProducts"),
                _crit("states-price", "correctness", "numeric-equals", expected=a["price"], tolerance=0.01),
                _crit("currency-format", "format-compliance", "pattern-match", pattern=r"\$\d"),
            ],
            [{"tool": "searchProducts", "arguments": {"query": a["name"]}}],
            f"The {a['name']} is priced at ${a['price']:.2f}.",
        ))

    for inv in world.kind_locals("inventory_level")[:2]:
        a = attrs("inventory_level", inv)
        product_name = attrs("product", a["product"])["name"]
        tasks.append(_task(
            f"ir-stock-{inv}", "information-retrieval",
            f"How many units of the {product_name} do we currently have at the {a['warehouse']} warehouse?",
            [
                _crit("checked-inventory", "completeness", "tool-was-called", tool="getInventory", where={"product_id": a["product"]}),
                _crit("states-quantity", "correctness", "numeric-equals", expected=a["quantity"], tolerance=0.01),
            ],
            [{"tool": "getInventory", "arguments": {"product_id": a["product"]}}],
            f"We have {a['quantity']} units of the {product_name} at {a['warehouse']}.",
        ))

    # -- communication ------------------------------------------------------------

    for s in shipped[3:6]:
        a = attrs("shipment", s)
        o = a["order"]
        cust = order_customer(o)
        name = customer_name(cust)
        tasks.append(_task(
            f"comm-ship-email-{s}", "communication",
            f"Email {name} an update about the shipment for order {o} — include the carrier and "
            f"tracking number — then summarize to me what you sent, with those same details.",
            [
                _crit("sent-email", "completeness", "tool-was-called", tool="sendCustomerEmail", where={"customer_id": cust}),
                _crit("states-carrier", "correctness", "response-contains-fact", fact=a["carrier"]),
                _crit("states-tracking", "correctness", "response-contains-fact", fact=a["tracking_number"]),
                _crit("courteous-close", "format-compliance", "pattern-match", pattern=r"(?i)(thank you|regards|sincerely)"),
            ],
            [
                {"tool": "searchShipments", "arguments": {"order_id": o}},
                {"tool": "sendCustomerEmail", "arguments": {
                    "customer_id": cust,
                    "subject": f"Update on order {o}",
                    "body": f"Hello {name}, order {o} is with {a['carrier']}, tracking {a['tracking_number']}. Thank you!",
                }},
            ],
            f"I let {name} know order {o} is with {a['carrier']}, tracking number {a['tracking_number']}. "
            f"Thank you for flagging it.",
        ))

    for t in tickets[:3]:
        a = attrs("ticket", t)
        cust = a["customer"]
        name = customer_name(cust)
        tasks.append(_task(
            f"comm-ticket-ack-{t}", "communication",
            f"Customer {name} opened ticket {t} ('{a['subject']}'). Send them a brief acknowledgement "
            f"email and tell me what you sent, referencing the ticket id.",
            [
                _crit("sent-email", "completeness", "tool-was-called", tool="sendCustomerEmail", where={"customer_id": cust}),
                _crit("references-ticket", "correctness", "response-contains-fact", fact=t),
                _crit("courteous-close", "format-compliance", "pattern-match", pattern=r"(?i)(thank|patience|apolog)"),
            ],
            [
                {"tool": "getTicket", "arguments": {"ticket_id": t}},
                {"tool": "sendCustomerEmail", "arguments": {
                    "customer_id": cust,
                    "subject": f"We received your ticket {t}",
                    "body": f"Hello {name}, we have ticket {t} ('{a['subject']}') in our queue and will follow up shortly.",
                }},
            ],
            f"I acknowledged ticket {t} to {name} and thanked them for their patience.",
        ))

    for i, p in enumerate(active_promos[:2]):
        a = attrs("promotion", p)
        cust = customers[i]
        name = customer_name(cust)
        tasks.append(_task(
            f"comm-promo-{p}", "communication",
            f"Let customer {name} ({cust}) know about promotion {a['code']}. Email them the discount "
            f"percentage and confirm to me what you sent.",
            [
                _crit("sent-email", "completeness", "tool-was-called", tool="sendCustomerEmail", where={"customer_id": cust}),
                _crit("states-code", "correctness", "response-contains-fact", fact=a["code"]),
                _crit("states-discount", "correctness", "numeric-equals", expected=a["discount_pct"], tolerance=0.01),
            ],
            [
                {"tool": "searchPromotions", "arguments": {"code": a["code"]}},
                {"tool": "sendCustomerEmail", "arguments": {
                    "customer_id": cust,
                    "subject": f"{a['code']}: {a['discount_pct']:.0f}% off",
                    "body": f"Hello {name}, use code {a['code']} for {a['discount_pct']:.0f}% off. {a['description']}.",
                }},
            ],
            f"I told {name} about {a['code']} — {a['discount_pct']:.0f}% off. Email sent.",
        ))

    for s in moving[:2]:
        a = attrs("shipment", s)
        o = a["order"]
        cust = order_customer(o)
        name = customer_name(cust)
        tasks.append(_task(
            f"comm-delay-{s}", "communication",
            f"Customer {name} is worried that order {o} hasn't arrived. Check the shipment, send them a "
            f"reassuring email with the current carrier status, and summarize it back to me.",
            [
                _crit("sent-email", "completeness", "tool-was-called", tool="sendCustomerEmail", where={"customer_id": cust}),
                _crit("references-order", "correctness", "response-contains-fact", fact=o),
                _crit("states-carrier", "correctness", "response-contains-fact", fact=a["carrier"]),
                _crit("courteous-close", "format-compliance", "pattern-match", pattern=r"(?i)(thank|apolog|appreciate)"),
            ],
            [
                {"tool": "searchShipments", "arguments": {"order_id": o}},
                {"tool": "sendCustomerEmail", "arguments": {
                    "customer_id": cust,
                    "subject": f"Your order {o} is on its way",
                    "body": f"Hello {name}, order {o} is currently {a['status']} with {a['carrier']}. We appreciate your patience.",
                }},
            ],
            f"I reassured {name}: order {o} is moving with {a['carrier']} and I apologized for the wait.",
        ))

    # -- reasoning -------------------------------------------------------------------

    for o, verdict in returnable[:2]:
        name = customer_name(order_customer(o))
        tasks.append(_task(
            f"reason-return-ok-{o}", "reasoning",
            f"Customer {name} wants to return order {o}. As of today, are they eligible under the "
            f"returns policy? Check, and explain using the number of days since purchase.",
            [
                _crit("checked-eligibility", "completeness", "tool-was-called", tool="checkReturnEligibility", where={"order_id": o}),
                _crit("states-verdict", "constraint-satisfaction", "response-contains-fact", fact="is eligible for return"),
                _crit("states-days", "correctness", "numeric-equals", expected=verdict["days_since_order"], tolerance=0.01),
            ],
            [{"tool": "checkReturnEligibility", "arguments": {"order_id": o}}],
            f"Order {o} is eligible for return: {verdict['days_since_order']} days since purchase, "
            f"within the {verdict['window_days']}-day window.",
        ))

    for o, verdict in expired[:2]:
        name = customer_name(order_customer(o))
        tasks.append(_task(
            f"reason-return-expired-{o}", "reasoning",
            f"Customer {name} wants to return order {o}. As of today, are they eligible under the "
            f"returns policy? Check, and explain using the number of days since purchase.",
            [
                _crit("checked-eligibility", "completeness", "tool-was-called", tool="checkReturnEligibility", where={"order_id": o}),
                _crit("states-verdict", "constraint-satisfaction", "response-contains-fact", fact="not eligible"),
                _crit("states-days", "correctness", "numeric-equals", expected=verdict["days_since_order"], tolerance=0.01),
            ],
            [{"tool": "checkReturnEligibility", "arguments": {"order_id": o}}],
            f"Order {o} is not eligible for return: {verdict['days_since_order']} days since purchase "
            f"exceeds the {verdict['window_days']}-day window.",
        ))

    rich_orders = [o for o in orders if len(attrs("order", o)["line_items"]) >= 2][:3]
    for o in rich_orders:
        totals = toolkit.order_total(session.get(EntityId("order", o)))
        tasks.append(_task(
            f"reason-total-{o}", "reasoning",
            f"What is the grand total for order {o}, including shipping and any discount? Break it down.",
            [
                _crit("computed-total", "completeness", "tool-was-called", tool="computeOrderTotal", where={"order_id": o}),
                _crit("states-total", "correctness", "numeric-equals", expected=totals["total"], tolerance=0.01),
                _crit("currency-format", "format-compliance", "pattern-match", pattern=r"\$\d"),
            ],
            [{"tool": "computeOrderTotal", "arguments": {"order_id": o}}],
            f"Order {o} totals ${totals['total']:.2f}: ${totals['items_subtotal']:.2f} in items plus "
            f"${totals['shipping_fee']:.2f} shipping minus ${totals['discount']:.2f} discount.",
        ))

    for b in (good_builds[:2] + bad_builds[:1]):
        a = attrs("build", b)
        issues = build_verdicts[b]
        if not issues:
            criteria = [
                _crit("validated-build", "completeness", "tool-was-called", tool="validateBuildCompatibility", where={"build_id": b}),
                _crit("states-verdict", "constraint-satisfaction", "response-contains-fact", fact="no compatibility issues"),
            ]
            final = f"Build {b} ('{a['name']}') checks out — no compatibility issues found."
        else:
            summary = "; ".join(f"{i['description']} {i['detail']}" for i in issues)
            criteria = [
                _crit("validated-build", "completeness", "tool-was-called", tool="validateBuildCompatibility", where={"build_id": b}),
                _crit("states-verdict", "constraint-satisfaction", "pattern-match", pattern=r"(?i)(incompatible|not compatible|issue)"),
                _crit("names-problem", "correctness", "response-contains-fact",
                      fact={"socket_match": "socket", "psu_headroom": "wattage", "form_factor_fit": "form factor"}[issues[0]["rule"]]),
            ]
            final = f"Build {b} ('{a['name']}') is not compatible as configured: {summary}"
        tasks.append(_task(
            f"reason-build-{b}", "reasoning",
            f"A customer asked whether the saved build '{a['name']}' ({b}) is a valid configuration. "
            f"Validate it and report any issues you find.",
            criteria,
            [{"tool": "validateBuildCompatibility", "arguments": {"build_id": b}}],
            final,
        ))

    # -- multi-step workflows -----------------------------------------------------------

    for t in open_tickets[:4]:
        tasks.append(_task(
            f"flow-resolve-{t}", "multi-step-workflow",
            f"Resolve ticket {t}: review it, add a note summarizing the resolution, set its status to "
            f"resolved, and confirm back to me with the ticket id.",
            [
                _crit("status-resolved", "constraint-satisfaction", "entity-state-assert",
                      entity=f"ticket:{t}", attribute="status", expected="resolved"),
                _crit("note-added", "completeness", "tool-was-called", tool="addTicketNote", where={"ticket_id": t}),
                _crit("references-ticket", "correctness", "response-contains-fact", fact=t),
            ],
            [
                {"tool": "getTicket", "arguments": {"ticket_id": t}},
                {"tool": "addTicketNote", "arguments": {"ticket_id": t, "note": "Resolution: issue verified and addressed per support policy."}},
                {"tool": "updateTicketStatus", "arguments": {"ticket_id": t, "status": "resolved"}},
            ],
            f"Ticket {t} is resolved; I added a closing note to the log.",
        ))

    flow_returnable = returnable[2:5] if len(returnable) > 4 else returnable[-3:]
    for i, (o, _verdict) in enumerate(flow_returnable):
        name = customer_name(order_customer(o))
        reason = RETURN_REASONS[i % len(RETURN_REASONS)]
        refund = toolkit.order_total(session.get(EntityId("order", o)))["total"]
        tasks.append(_task(
            f"flow-return-{o}", "multi-step-workflow",
            f"Customer {name} wants to return order {o} because it {reason}. Verify eligibility, process "
            f"the return end to end, and confirm the refund amount to me.",
            [
                _crit("order-returned", "constraint-satisfaction", "entity-state-assert",
                      entity=f"order:{o}", attribute="status", expected="returned"),
                _crit("processed-return", "completeness", "tool-was-called", tool="processReturn", where={"order_id": o}),
                _crit("states-refund", "correctness", "numeric-equals", expected=refund, tolerance=0.01),
            ],
            [
                {"tool": "checkReturnEligibility", "arguments": {"order_id": o}},
                {"tool": "processReturn", "arguments": {"order_id": o, "reason": reason}},
                {"tool": "getOrder", "arguments": {"order_id": o}},
            ],
            f"Done — order {o} is returned and a refund of ${refund:.2f} is on its way to {name}.",
        ))

    linked = [(c, os[0]) for c in customers for os in [[
        o for o in orders if order_customer(o) == c
    ]] if os][:3]
    for i, (cust, o) in enumerate(linked):
        name = customer_name(cust)
        issue = ISSUE_PHRASES[i % len(ISSUE_PHRASES)]
        tasks.append(_task(
            f"flow-new-ticket-{cust}", "multi-step-workflow",
            f"Customer {name} ({cust}) reports that order {o} {issue}. Open a high priority ticket "
            f"linked to that order and give me the new ticket reference.",
            [
                _crit("ticket-created", "completeness", "tool-was-called", tool="createTicket",
                      where={"customer_id": cust, "order_id": o, "priority": "high"}),
                _crit("priority-set", "constraint-satisfaction", "entity-state-assert",
                      entity="ticket:tick-x0001", attribute="priority", expected="high"),
                _crit("references-ticket", "correctness", "response-contains-fact", fact="tick-x0001"),
            ],
            [
                {"tool": "createTicket", "arguments": {
                    "customer_id": cust, "subject": f"Issue with order {o}", "priority": "high", "order_id": o,
                }},
                {"tool": "getTicket", "arguments": {"ticket_id": "tick-x0001"}},
            ],
            f"I opened ticket tick-x0001 (high priority) for {name}, linked to order {o}.",
        ))

    return tasks
