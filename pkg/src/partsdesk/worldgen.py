"""Seeded procedural generation of coherent retailer worlds.

Every entity is derived from its own RNG stream keyed on
``(seed, kind, index)`` (plus dedicated substreams for cross-kind choices
and noise), so generation is a pure function of ``(seed, profile)`` no
matter how the work is ordered or parallelized.

Injected noise (conflicting timestamps, dropped optional fields) makes the
data messy but never dangles a reference.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any

from . import schema
from .world import Entity, EntityId, WorldState, write_entity_files, read_entity_files

COMPANY_NAME = "Argon Components"

# Fixed simulated clock: temporal reasoning tasks need a stable "today".
SIM_TODAY = date(2025, 6, 15)


class UnsatisfiableProfileError(Exception):
    """The requested counts cannot produce a referentially coherent world."""


@dataclass(frozen=True)
class NoiseConfig:
    conflicting_timestamp_rate: float = 0.05
    incomplete_record_rate: float = 0.10


@dataclass(frozen=True)
class GenProfile:
    name: str
    counts: dict[str, int]
    noise: NoiseConfig = field(default_factory=NoiseConfig)


def _preset(name: str, counts: dict[str, int]) -> GenProfile:
    return GenProfile(name=name, counts=counts)


PROFILES: dict[str, GenProfile] = {
    "mini": _preset("mini", {
        "customer": 10, "order": 30, "product": 20, "build": 5, "ticket": 10,
        "sla": 4, "shipment": 20, "compatibility_rule": 3, "warranty_policy": 4,
        "loyalty_tier": 4, "kb_article": 8, "promotion": 5, "inventory_level": 20,
        "company_policy": 4,
    }),
    "standard": _preset("standard", {
        "customer": 60, "order": 150, "product": 60, "build": 20, "ticket": 50,
        "sla": 4, "shipment": 90, "compatibility_rule": 3, "warranty_policy": 8,
        "loyalty_tier": 4, "kb_article": 30, "promotion": 10, "inventory_level": 60,
        "company_policy": 4,
    }),
    "full": _preset("full", {
        "customer": 400, "order": 820, "product": 280, "build": 80, "ticket": 300,
        "sla": 4, "shipment": 460, "compatibility_rule": 3, "warranty_policy": 10,
        "loyalty_tier": 4, "kb_article": 60, "promotion": 15, "inventory_level": 280,
        "company_policy": 4,
    }),
}

FIRST_NAMES = [
    "Avery", "Bianca", "Caleb", "Dara", "Elliot", "Farah", "Gideon", "Hana",
    "Iris", "Jonah", "Kira", "Lucas", "Mina", "Noel", "Opal", "Priya",
    "Quentin", "Rosa", "Silas", "Tessa", "Uma", "Victor", "Wren", "Yusuf",
]
LAST_NAMES = [
    "Alvarez", "Brandt", "Chen", "Dawson", "Egan", "Fontaine", "Garza",
    "Holloway", "Ibarra", "Jensen", "Kovacs", "Liang", "Moreau", "Nakamura",
    "Okafor", "Petrov", "Quinn", "Reyes", "Sato", "Tran", "Ueda", "Vance",
    "Whitfield", "Zamora",
]
STREETS = ["Juniper Ave", "Marlow St", "Cinder Ln", "Harbor Rd", "Foxglove Dr", "Quarry Way"]
CITIES = ["Reno, NV", "Columbus, OH", "Allentown, PA", "Mesa, AZ", "Duluth, MN", "Salem, OR"]
CARRIERS = ["NorthStar Parcel", "Velocity Freight", "BlueLine Express", "Meridian Post"]
WAREHOUSES = ["Reno NV", "Columbus OH", "Allentown PA"]
BRANDS = ["Voltix", "Arcane", "Nimbus", "Quantar", "Helios", "Ferrite"]
EMAIL_DOMAINS = ["example.com", "mailbox.test", "postbin.test"]

CATEGORIES = ["cpu", "gpu", "motherboard", "psu", "ram", "storage", "case", "cooler", "monitor", "peripheral"]
CATEGORY_SERIES = {
    "cpu": "Core", "gpu": "Vista", "motherboard": "Forge", "psu": "Stator",
    "ram": "Pulse", "storage": "Vault", "case": "Shell", "cooler": "Breeze",
    "monitor": "View", "peripheral": "Touch",
}
CATEGORY_PRICE = {
    "cpu": (89, 549), "gpu": (149, 1499), "motherboard": (79, 399), "psu": (49, 249),
    "ram": (29, 199), "storage": (39, 299), "case": (49, 199), "cooler": (19, 129),
    "monitor": (99, 699), "peripheral": (9, 149),
}
SOCKETS = ["AM5", "LGA1700", "AM4"]
FORM_FACTORS = ["ITX", "mATX", "ATX"]  # ordered small -> large; a case fits boards at or below its size
PSU_MARGIN_WATTS = 100

TICKET_SUBJECTS = [
    "Order arrived damaged", "PSU not powering on", "Wrong item in box",
    "Monitor has dead pixels", "Request to change shipping address",
    "GPU fans rattling under load", "Missing screws in case kit",
    "RAM not recognized at full speed", "Refund status question",
    "Build advice before purchase",
]
TICKET_NOTES = [
    "Asked customer for photos.", "Verified serial number against order.",
    "Escalated to tier 2 queue.", "Customer confirmed packaging was intact.",
    "Replacement unit reserved in warehouse.",
]
KB_TOPICS = [
    ("Troubleshooting {name} power issues", "diagnostics"),
    ("Getting started with the {name}", "setup"),
    ("Firmware update guide for {name}", "maintenance"),
    ("Compatibility notes for {name}", "compatibility"),
]
KB_GENERIC = [
    ("How to read our order status codes", "orders"),
    ("Packing a component for warranty return", "returns"),
    ("Choosing a power supply with enough headroom", "compatibility"),
    ("What our loyalty tiers include", "account"),
]
PROMO_WORDS = ["SPRING", "SUMMER", "BUNDLE", "LOYAL", "RESTOCK", "LAUNCH", "WEEKEND", "OUTLET"]
LOYALTY_TIERS = [
    ("Bronze", 0, 0.0, 4, ["standard support"]),
    ("Silver", 500, 2.0, 3, ["priority email support"]),
    ("Gold", 2000, 5.0, 2, ["priority support", "free expedited shipping"]),
    ("Platinum", 6000, 8.0, 1, ["dedicated support line", "early access to launches"]),
]
SLA_TABLE = [
    ("Urgent response", "urgent", 1, 8),
    ("High response", "high", 4, 24),
    ("Normal response", "normal", 12, 72),
    ("Low response", "low", 24, 120),
]
POLICY_TABLE = [
    ("Returns policy", "returns", "Unopened or defective items may be returned within the return window for a full refund.", {"return_window_days": 30}),
    ("Shipping policy", "shipping", "Orders over the free-shipping threshold ship free via ground service.", {"free_shipping_threshold": 99.0}),
    ("Support policy", "support", "Support responds within the SLA matching the ticket priority.", {}),
    ("Privacy policy", "privacy", "Customer data is used only to fulfill orders and support requests.", {}),
]


def _rng(seed: int, *parts: Any) -> random.Random:
    key = "|".join(str(p) for p in (seed, *parts))
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _iso(d: date) -> str:
    return d.isoformat()


def _money(rng: random.Random, lo: float, hi: float) -> float:
    return round(lo + rng.random() * (hi - lo), 2)


def _local(kind: str, index: int) -> str:
    prefix = schema.kind_schemas()[kind].id_prefix
    width = 5 if kind in ("order", "shipment") else 4 if kind in ("customer", "product", "build", "ticket", "kb_article", "inventory_level") else 2
    return f"{prefix}-{index + 1:0{width}d}"


# -- pure cross-kind derivations ----------------------------------------------
# Anything another kind needs to know about entity i must come from these
# helpers, never from a previously materialized entity.

# The first 12 products are fixed "house catalog" anchors (one per category,
# plus a second motherboard and PSU) so that every world, at any seed, can
# host both a fully compatible and a provably incompatible build.
_ANCHOR_SPECS: list[dict[str, Any]] = [
    {"category": "cpu", "socket": "AM5", "wattage": 105},
    {"category": "gpu", "wattage": 260},
    {"category": "motherboard", "socket": "AM5", "form_factor": "mATX", "wattage": 40},
    {"category": "psu", "wattage": 1200},
    {"category": "ram", "wattage": 6},
    {"category": "storage", "wattage": 8},
    {"category": "case", "form_factor": "ATX"},
    {"category": "cooler", "wattage": 5},
    {"category": "monitor", "wattage": 40},
    {"category": "peripheral"},
    {"category": "motherboard", "socket": "LGA1700", "form_factor": "ATX", "wattage": 40},
    {"category": "psu", "wattage": 450},
]
ANCHOR_CPU, ANCHOR_GPU, ANCHOR_MOBO, ANCHOR_BIG_PSU = 0, 1, 2, 3
ANCHOR_CASE, ANCHOR_ALT_MOBO, ANCHOR_SMALL_PSU = 6, 10, 11
MIN_PRODUCTS_FOR_BUILDS = len(_ANCHOR_SPECS)


def _product_profile(seed: int, idx: int) -> dict[str, Any]:
    rng = _rng(seed, "product", idx)
    anchored = idx < len(_ANCHOR_SPECS)
    category = _ANCHOR_SPECS[idx]["category"] if anchored else CATEGORIES[rng.randrange(len(CATEGORIES))]
    lo, hi = CATEGORY_PRICE[category]
    profile: dict[str, Any] = {
        "category": category,
        "brand": BRANDS[rng.randrange(len(BRANDS))],
        "price": _money(rng, lo, hi),
        "model": 100 + idx,
    }
    if anchored:
        profile.update({k: v for k, v in _ANCHOR_SPECS[idx].items() if k != "category"})
        return profile
    if category == "cpu":
        profile["socket"] = SOCKETS[rng.randrange(len(SOCKETS))]
        profile["wattage"] = 65 + 5 * rng.randrange(22)
    elif category == "gpu":
        profile["wattage"] = 120 + 10 * rng.randrange(31)
    elif category == "motherboard":
        profile["socket"] = SOCKETS[rng.randrange(len(SOCKETS))]
        profile["form_factor"] = FORM_FACTORS[rng.randrange(len(FORM_FACTORS))]
        profile["wattage"] = 40
    elif category == "psu":
        profile["wattage"] = 450 + 50 * rng.randrange(16)
    elif category == "case":
        profile["form_factor"] = FORM_FACTORS[rng.randrange(len(FORM_FACTORS))]
    elif category in ("ram", "storage", "cooler"):
        profile["wattage"] = {"ram": 6, "storage": 8, "cooler": 5}[category]
    elif category == "monitor":
        profile["wattage"] = 25 + 5 * rng.randrange(8)
    return profile


def _order_customer(seed: int, idx: int, n_customers: int) -> int:
    return _rng(seed, "order-customer", idx).randrange(n_customers)


def _order_dates(seed: int, idx: int) -> date:
    rng = _rng(seed, "order-date", idx)
    if rng.random() < 0.6:
        days_ago = 3 + rng.randrange(23)       # recent: inside a 30-day window
    else:
        days_ago = 40 + rng.randrange(131)     # older: outside it
    return SIM_TODAY - timedelta(days=days_ago)


def _order_status(seed: int, idx: int) -> str:
    roll = _rng(seed, "order-status", idx).random()
    for status, threshold in (
        ("pending", 0.08), ("paid", 0.20), ("shipped", 0.40),
        ("delivered", 0.85), ("returned", 0.92),
    ):
        if roll < threshold:
            return status
    return "cancelled"


# -- per-kind builders ---------------------------------------------------------

def _build_customer(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "customer", idx)
    first = FIRST_NAMES[rng.randrange(len(FIRST_NAMES))]
    last = LAST_NAMES[rng.randrange(len(LAST_NAMES))]
    tier_idx = min(rng.randrange(8), counts["loyalty_tier"] - 1, 3)  # skew toward low tiers
    attrs = {
        "name": f"{first} {last}",
        "email": f"{first.lower()}.{last.lower()}{idx}@{EMAIL_DOMAINS[rng.randrange(len(EMAIL_DOMAINS))]}",
        "phone": f"555-{rng.randrange(100, 999)}-{rng.randrange(1000, 9999)}",
        "address": f"{rng.randrange(10, 9900)} {STREETS[rng.randrange(len(STREETS))]}, {CITIES[rng.randrange(len(CITIES))]}",
        "created_at": _iso(SIM_TODAY - timedelta(days=180 + rng.randrange(900))),
        "loyalty_tier": _local("loyalty_tier", tier_idx),
    }
    return Entity(EntityId("customer", _local("customer", idx)), attrs)


def _build_order(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "order", idx)
    n_products = counts["product"]
    items = []
    for _ in range(1 + rng.randrange(3)):
        p_idx = rng.randrange(n_products)
        items.append({
            "product": _local("product", p_idx),
            "quantity": 1 + rng.randrange(3),
            "unit_price": _product_profile(seed, p_idx)["price"],
        })
    subtotal = round(sum(i["quantity"] * i["unit_price"] for i in items), 2)
    status = _order_status(seed, idx)
    shipping_fee = [0.0, 9.99, 19.99][rng.randrange(3)]
    discount = 0.0
    promo_idx = None
    if counts["promotion"] and rng.random() < 0.3:
        promo_idx = rng.randrange(counts["promotion"])
        discount = round(subtotal * _promo_profile(seed, promo_idx)["discount_pct"] / 100.0, 2)
    attrs: dict[str, Any] = {
        "customer": _local("customer", _order_customer(seed, idx, counts["customer"])),
        "status": status,
        "placed_at": _iso(_order_dates(seed, idx)),
        "line_items": items,
        "shipping_fee": shipping_fee,
        "discount": discount,
        "gift_message": rng.choice(["Happy building!", "Enjoy the upgrade.", "From your friends at " + COMPANY_NAME]),
    }
    if promo_idx is not None:
        attrs["promotion"] = _local("promotion", promo_idx)
    if status == "returned":
        attrs["refund_amount"] = round(subtotal + shipping_fee - discount, 2)
    return Entity(EntityId("order", _local("order", idx)), attrs)


def _build_product(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "product-extra", idx)
    profile = _product_profile(seed, idx)
    category = profile["category"]
    cat_index = CATEGORIES.index(category)
    attrs: dict[str, Any] = {
        "name": f"{profile['brand']} {CATEGORY_SERIES[category]} {profile['model']}",
        "sku": f"{category[:3].upper()}-{idx + 1:04d}",
        "category": category,
        "price": profile["price"],
        "warranty_policy": _local("warranty_policy", cat_index % counts["warranty_policy"]),
        "release_date": _iso(SIM_TODAY - timedelta(days=30 + rng.randrange(700))),
    }
    for key in ("wattage", "socket", "form_factor"):
        if key in profile:
            attrs[key] = profile[key]
    return Entity(EntityId("product", _local("product", idx)), attrs)


def _category_index(seed: int, n_products: int) -> dict[str, list[int]]:
    index: dict[str, list[int]] = {c: [] for c in CATEGORIES}
    for idx in range(n_products):
        index[_product_profile(seed, idx)["category"]].append(idx)
    return index


def _build_build(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "build", idx)
    by_cat = _category_index(seed, counts["product"])
    want_compatible = idx % 2 == 0

    def pick(cat: str, pred, fallback: int) -> int:
        candidates = [i for i in by_cat[cat] if pred(_product_profile(seed, i))]
        return candidates[rng.randrange(len(candidates))] if candidates else fallback

    if want_compatible:
        cpu = pick("cpu", lambda p: True, ANCHOR_CPU)
        cpu_socket = _product_profile(seed, cpu)["socket"]
        mobo = pick("motherboard", lambda p: p.get("socket") == cpu_socket, -1)
        if mobo < 0:
            cpu, mobo = ANCHOR_CPU, ANCHOR_MOBO
        parts = [cpu, mobo]
        for extra_cat in ("gpu", "ram", "storage"):
            if rng.random() < 0.7:
                parts.append(pick(extra_cat, lambda p: True, ANCHOR_GPU))
        mobo_ff = _product_profile(seed, mobo).get("form_factor", "ATX")
        parts.append(pick(
            "case",
            lambda p: FORM_FACTORS.index(p.get("form_factor", "ITX")) >= FORM_FACTORS.index(mobo_ff),
            ANCHOR_CASE,
        ))
        draw = sum(_product_profile(seed, i).get("wattage", 0) for i in parts)
        parts.append(pick("psu", lambda p: p.get("wattage", 0) >= draw + PSU_MARGIN_WATTS + 50, ANCHOR_BIG_PSU))
    elif rng.random() < 0.5:
        # Guaranteed socket mismatch; everything else roomy.
        parts = [ANCHOR_CPU, ANCHOR_ALT_MOBO, ANCHOR_CASE, ANCHOR_BIG_PSU]
        if rng.random() < 0.6:
            parts.insert(2, pick("gpu", lambda p: True, ANCHOR_GPU))
    else:
        # Guaranteed undersized PSU: anchor core draws 405W+, small PSU is 450W < draw + margin.
        parts = [ANCHOR_CPU, ANCHOR_GPU, ANCHOR_MOBO, ANCHOR_CASE]
        draw = sum(_product_profile(seed, i).get("wattage", 0) for i in parts)
        parts.append(pick("psu", lambda p: p.get("wattage", 0) < draw + PSU_MARGIN_WATTS, ANCHOR_SMALL_PSU))
    attrs: dict[str, Any] = {
        "name": f"{rng.choice(['Starter', 'Creator', 'Quiet', 'Arena', 'Compact'])} Build {idx + 1}",
        "components": [_local("product", i) for i in parts],
        "description": "Customer-requested configuration quote.",
    }
    if rng.random() < 0.6:
        attrs["customer"] = _local("customer", rng.randrange(counts["customer"]))
    return Entity(EntityId("build", _local("build", idx)), attrs)


def _build_ticket(seed: int, idx: int, counts: dict[str, int], orders_by_customer: dict[int, list[int]]) -> Entity:
    rng = _rng(seed, "ticket", idx)
    cust_idx = rng.randrange(counts["customer"])
    attrs: dict[str, Any] = {
        "customer": _local("customer", cust_idx),
        "subject": TICKET_SUBJECTS[rng.randrange(len(TICKET_SUBJECTS))],
        "priority": ["low", "normal", "normal", "normal", "high", "high", "urgent", "low", "normal", "high"][rng.randrange(10)],
        "status": ["open", "open", "open", "pending", "pending", "resolved", "resolved", "resolved", "closed", "open"][rng.randrange(10)],
        "notes": [TICKET_NOTES[rng.randrange(len(TICKET_NOTES))] for _ in range(rng.randrange(3))],
        "source": ["email", "phone", "chat"][rng.randrange(3)],
    }
    owned = orders_by_customer.get(cust_idx, [])
    if owned and rng.random() < 0.7:
        order_idx = owned[rng.randrange(len(owned))]
        attrs["order"] = _local("order", order_idx)
        created = _order_dates(seed, order_idx) + timedelta(days=rng.randrange(20))
    else:
        created = SIM_TODAY - timedelta(days=5 + rng.randrange(115))
    created = min(created, SIM_TODAY)
    attrs["created_at"] = _iso(created)
    attrs["updated_at"] = _iso(min(created + timedelta(days=rng.randrange(10)), SIM_TODAY))
    return Entity(EntityId("ticket", _local("ticket", idx)), attrs)


def _build_sla(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    name, priority, first_response, resolution = SLA_TABLE[idx % len(SLA_TABLE)]
    suffix = "" if idx < len(SLA_TABLE) else f" {idx // len(SLA_TABLE) + 1}"
    attrs = {
        "name": name + suffix,
        "priority": priority,
        "first_response_hours": first_response,
        "resolution_hours": resolution,
        "description": f"Applies to {priority}-priority tickets.",
    }
    return Entity(EntityId("sla", _local("sla", idx)), attrs)


def _build_shipment(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "shipment", idx)
    order_idx = idx % counts["order"]
    order_status = _order_status(seed, order_idx)
    placed = _order_dates(seed, order_idx)
    shipped = placed + timedelta(days=1 + rng.randrange(3))
    if order_status in ("delivered", "returned"):
        status = "delivered"
    elif order_status == "shipped":
        status = "in_transit" if rng.random() < 0.7 else "delayed"
    else:
        status = "label_created"
    attrs: dict[str, Any] = {
        "order": _local("order", order_idx),
        "carrier": CARRIERS[rng.randrange(len(CARRIERS))],
        "tracking_number": "TRK" + "".join(str(rng.randrange(10)) for _ in range(9)),
        "status": status,
        "shipped_at": _iso(shipped),
        "service_level": ["ground", "ground", "expedited", "overnight"][rng.randrange(4)],
    }
    if status == "delivered":
        attrs["delivered_at"] = _iso(min(shipped + timedelta(days=2 + rng.randrange(6)), SIM_TODAY))
    return Entity(EntityId("shipment", _local("shipment", idx)), attrs)


def _build_compatibility_rule(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    table = [
        {"rule_type": "socket_match", "category_a": "cpu", "category_b": "motherboard",
         "description": "CPU socket must match the motherboard socket."},
        {"rule_type": "form_factor_fit", "category_a": "case", "category_b": "motherboard",
         "description": "Case must support the motherboard form factor."},
        {"rule_type": "psu_headroom", "margin_watts": PSU_MARGIN_WATTS,
         "description": f"PSU wattage must exceed total component draw by at least {PSU_MARGIN_WATTS}W."},
    ]
    attrs = dict(table[idx % len(table)])
    attrs["notes"] = "Checked automatically during build validation."
    return Entity(EntityId("compatibility_rule", _local("compatibility_rule", idx)), attrs)


def _build_warranty_policy(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "warranty_policy", idx)
    category = CATEGORIES[idx % len(CATEGORIES)]
    attrs = {
        "name": f"{category.upper()} limited warranty",
        "product_category": category,
        "duration_months": [12, 24, 36][rng.randrange(3)],
        "covers": ["manufacturing defects", "dead on arrival"],
        "exclusions": ["physical damage", "overclocking beyond rated spec"],
    }
    return Entity(EntityId("warranty_policy", _local("warranty_policy", idx)), attrs)


def _build_loyalty_tier(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    name, spend, pct, prio, perks = LOYALTY_TIERS[idx % len(LOYALTY_TIERS)]
    suffix = "" if idx < len(LOYALTY_TIERS) else f" {idx // len(LOYALTY_TIERS) + 1}"
    attrs = {
        "name": name + suffix,
        "min_lifetime_spend": float(spend),
        "discount_pct": pct,
        "support_priority": prio,
        "perks": list(perks),
    }
    return Entity(EntityId("loyalty_tier", _local("loyalty_tier", idx)), attrs)


def _build_kb_article(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "kb_article", idx)
    attrs: dict[str, Any]
    if counts["product"] and rng.random() < 0.5:
        p_idx = rng.randrange(counts["product"])
        profile = _product_profile(seed, p_idx)
        product_name = f"{profile['brand']} {CATEGORY_SERIES[profile['category']]} {profile['model']}"
        template, category = KB_TOPICS[rng.randrange(len(KB_TOPICS))]
        attrs = {
            "title": template.format(name=product_name),
            "body": (
                f"This article covers the {product_name}. Start by confirming the unit is on the "
                f"latest firmware, then work through the checklist below. Contact support if the "
                f"issue persists after all steps."
            ),
            "category": category,
            "product": _local("product", p_idx),
            "tags": [profile["category"], category],
        }
    else:
        title, category = KB_GENERIC[rng.randrange(len(KB_GENERIC))]
        attrs = {
            "title": title,
            "body": f"{title}. This guide walks through the standard {COMPANY_NAME} procedure step by step.",
            "category": category,
            "tags": [category, "guide"],
        }
    attrs["author"] = f"{FIRST_NAMES[rng.randrange(len(FIRST_NAMES))]} {LAST_NAMES[rng.randrange(len(LAST_NAMES))]}"
    return Entity(EntityId("kb_article", _local("kb_article", idx)), attrs)


def _promo_profile(seed: int, idx: int) -> dict[str, Any]:
    rng = _rng(seed, "promotion", idx)
    pct = [5, 10, 15, 20, 25][rng.randrange(5)]
    active = rng.random() < 0.5
    if active:
        valid_from = SIM_TODAY - timedelta(days=5 + rng.randrange(16))
        valid_to = SIM_TODAY + timedelta(days=10 + rng.randrange(31))
    else:
        valid_to = SIM_TODAY - timedelta(days=10 + rng.randrange(60))
        valid_from = valid_to - timedelta(days=30)
    return {
        "code": f"{PROMO_WORDS[rng.randrange(len(PROMO_WORDS))]}{pct}{idx}",
        "discount_pct": float(pct),
        "valid_from": valid_from,
        "valid_to": valid_to,
        "category": CATEGORIES[rng.randrange(len(CATEGORIES))] if rng.random() < 0.5 else None,
    }


def _build_promotion(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    profile = _promo_profile(seed, idx)
    attrs: dict[str, Any] = {
        "code": profile["code"],
        "description": f"{profile['discount_pct']:.0f}% off" + (f" {profile['category']} items" if profile["category"] else " sitewide"),
        "discount_pct": profile["discount_pct"],
        "valid_from": _iso(profile["valid_from"]),
        "valid_to": _iso(profile["valid_to"]),
        "terms": "One promotion per order. Cannot be combined.",
    }
    if profile["category"]:
        attrs["category"] = profile["category"]
    return Entity(EntityId("promotion", _local("promotion", idx)), attrs)


def _build_inventory_level(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    rng = _rng(seed, "inventory_level", idx)
    attrs = {
        "product": _local("product", idx % counts["product"]),
        "warehouse": WAREHOUSES[rng.randrange(len(WAREHOUSES))],
        "quantity": rng.randrange(241),
        "restock_date": _iso(SIM_TODAY + timedelta(days=3 + rng.randrange(28))),
    }
    return Entity(EntityId("inventory_level", _local("inventory_level", idx)), attrs)


def _build_company_policy(seed: int, idx: int, counts: dict[str, int]) -> Entity:
    name, policy_type, body, extras = POLICY_TABLE[idx % len(POLICY_TABLE)]
    suffix = "" if idx < len(POLICY_TABLE) else f" {idx // len(POLICY_TABLE) + 1}"
    attrs: dict[str, Any] = {"name": name + suffix, "policy_type": policy_type, "body": body}
    attrs.update(extras)
    attrs["updated_at"] = _iso(SIM_TODAY - timedelta(days=90))
    return Entity(EntityId("company_policy", _local("company_policy", idx)), attrs)


_BUILDERS = {
    "customer": _build_customer,
    "order": _build_order,
    "product": _build_product,
    "build": _build_build,
    "sla": _build_sla,
    "shipment": _build_shipment,
    "compatibility_rule": _build_compatibility_rule,
    "warranty_policy": _build_warranty_policy,
    "loyalty_tier": _build_loyalty_tier,
    "kb_article": _build_kb_article,
    "promotion": _build_promotion,
    "inventory_level": _build_inventory_level,
    "company_policy": _build_company_policy,
}


def _apply_noise(seed: int, entity: Entity, noise: NoiseConfig) -> Entity:
    kind = entity.id.kind
    rng = _rng(seed, "noise", kind, entity.id.local)
    attrs = dict(entity.attributes)
    droppable = schema.kind_schemas()[kind].droppable
    if droppable in attrs and rng.random() < noise.incomplete_record_rate:
        attrs.pop(droppable)
    if rng.random() < noise.conflicting_timestamp_rate:
        if kind == "ticket":
            created = date.fromisoformat(attrs["created_at"])
            attrs["updated_at"] = _iso(created - timedelta(days=1 + rng.randrange(7)))
        elif kind == "shipment":
            shipped = date.fromisoformat(attrs["shipped_at"])
            attrs["shipped_at"] = _iso(shipped - timedelta(days=6 + rng.randrange(10)))
    return Entity(entity.id, attrs)


def _validate_profile(profile: GenProfile) -> None:
    missing = [k for k in schema.kind_names() if k not in profile.counts]
    if missing:
        raise UnsatisfiableProfileError(f"profile {profile.name!r} missing counts for: {missing}")
    c = profile.counts
    needs = [
        (c["order"] > 0 and c["customer"] == 0, "orders need customers"),
        (c["order"] > 0 and c["product"] == 0, "orders need products"),
        (c["ticket"] > 0 and c["customer"] == 0, "tickets need customers"),
        (c["shipment"] > 0 and c["order"] == 0, "shipments need orders"),
        (c["inventory_level"] > 0 and c["product"] == 0, "inventory needs products"),
        (c["build"] > 0 and c["product"] < MIN_PRODUCTS_FOR_BUILDS, "builds need the anchor product set"),
        (c["build"] > 0 and c["customer"] == 0, "builds need customers"),
        (c["product"] > 0 and c["warranty_policy"] == 0, "products need warranty policies"),
        (c["customer"] > 0 and c["loyalty_tier"] == 0, "customers need loyalty tiers"),
    ]
    problems = [msg for bad, msg in needs if bad]
    if problems:
        raise UnsatisfiableProfileError(f"profile {profile.name!r} unsatisfiable: " + "; ".join(problems))


def generate_world(seed: int, profile: GenProfile | str, workers: int | None = None) -> WorldState:
    """Deterministically generate a world. Pure function of (seed, profile)."""
    if isinstance(profile, str):
        profile = PROFILES[profile]
    _validate_profile(profile)
    counts = profile.counts

    orders_by_customer: dict[int, list[int]] = {}
    for order_idx in range(counts["order"]):
        orders_by_customer.setdefault(_order_customer(seed, order_idx, counts["customer"]), []).append(order_idx)

    def build_kind(kind: str) -> list[Entity]:
        out = []
        for idx in range(counts[kind]):
            if kind == "ticket":
                entity = _build_ticket(seed, idx, counts, orders_by_customer)
            else:
                entity = _BUILDERS[kind](seed, idx, counts)
            out.append(_apply_noise(seed, entity, profile.noise))
        return out

    kinds = list(schema.kind_names())
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_kind = list(pool.map(build_kind, kinds))
    else:
        per_kind = [build_kind(k) for k in kinds]

    entities = [e for bucket in per_kind for e in bucket]
    return WorldState(seed=seed, entities=entities, profile=profile.name)


def incomplete_fraction(world: WorldState) -> float:
    """Fraction of entities missing their kind's droppable field."""
    total = 0
    missing = 0
    for entity in world.iter_entities():
        droppable = schema.kind_schemas()[entity.id.kind].droppable
        total += 1
        if droppable not in entity.attributes:
            missing += 1
    return missing / total if total else 0.0


# -- export / import -----------------------------------------------------------

def export_world(world: WorldState, out_dir: Path | str) -> dict[str, Any]:
    """Write entities/<kind>.json plus a manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = write_entity_files(world, out_dir / "entities")
    manifest = {
        "name": "partsdesk-world",
        "version": schema.schema_version(),
        "seed": world.seed,
        "profile": world.profile,
        "counts": counts,
        "digest": world.digest,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), "utf-8")
    return manifest


def load_world(world_dir: Path | str) -> WorldState:
    world_dir = Path(world_dir)
    manifest = json.loads((world_dir / "manifest.json").read_text("utf-8"))
    entities = read_entity_files(world_dir / "entities")
    world = WorldState(seed=manifest["seed"], entities=entities, profile=manifest.get("profile", "custom"))
    if world.digest != manifest["digest"]:
        raise ValueError(
            f"digest mismatch loading {world_dir}: manifest {manifest['digest'][:12]}..., "
            f"recomputed {world.digest[:12]}..."
        )
    return world
