"""Forked sessions and the 23-tool runtime.

Two sessions over the same world never see each other's writes; search
results are hard-capped at 10 with no has-more flag, so completeness is
the caller's problem (deliberately).
"""

from partsdesk import worldgen
from partsdesk.toolkit import ToolCall, ToolRuntime, tool_catalog
from partsdesk.world import EntityId, fork_session

world = worldgen.generate_world(seed=42, profile="mini")
print("catalog:", len(tool_catalog()), "tools")
for defn in tool_catalog()[:6]:
    print(f"  {defn.name:<22} mutates={defn.mutates}")

a, b = fork_session(world), fork_session(world)
rt_a, rt_b = ToolRuntime(a), ToolRuntime(b)

page1 = rt_a.invoke(ToolCall("searchOrders", {"limit": 10}, "c1")).payload["items"]
page3 = rt_a.invoke(ToolCall("searchOrders", {"offset": 20}, "c2")).payload["items"]
print(f"\nsearchOrders: page 1 has {len(page1)} items, offset 20 has {len(page3)}")
print("payload keys (no truncation hint):", sorted(rt_a.invoke(ToolCall('searchOrders', {}, 'c3')).payload))

ticket = next(
    t for t in world.kind_locals("ticket")
    if world.get(EntityId("ticket", t)).attributes["status"] == "open"
)
rt_a.invoke(ToolCall("updateTicketStatus", {"ticket_id": ticket, "status": "resolved"}, "c4"))
in_a = rt_a.invoke(ToolCall("getTicket", {"ticket_id": ticket}, "c5")).payload["entity"]["attributes"]["status"]
in_b = rt_b.invoke(ToolCall("getTicket", {"ticket_id": ticket}, "c1")).payload["entity"]["attributes"]["status"]
print(f"\n{ticket}: session A sees {in_a!r}, session B sees {in_b!r}")

refused = rt_b.invoke(ToolCall("processReturn", {"order_id": world.kind_locals("order")[1], "reason": "demo"}, "c2"))
print(f"processReturn refusal: status={refused.status}, reason={refused.payload.get('reason')}")
