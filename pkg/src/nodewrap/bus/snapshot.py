"""GraphSnapshot helpers: canonical JSON, integrity validation, comparison."""

from __future__ import annotations

import json


def snapshot_to_json(snapshot: dict) -> str:
    return json.dumps(snapshot, sort_keys=True, separators=(",", ":"))


def snapshot_from_json(text: str) -> dict:
    return json.loads(text)


def validate_snapshot(snapshot: dict) -> None:
    """Check the snapshot's own referential invariants; raises AssertionError."""
    node_names = {n["name"] for n in snapshot["nodes"]}
    topic_names = {t["name"] for t in snapshot["topics"]}
    assert len(node_names) == len(snapshot["nodes"]), "duplicate node names"
    assert len(topic_names) == len(snapshot["topics"]), "duplicate topic names"

    pub_map: dict[str, set] = {}
    sub_map: dict[str, set] = {}
    for node in snapshot["nodes"]:
        for pub in node["publications"]:
            assert pub["topic"] in topic_names, f"publication on unknown topic {pub['topic']}"
            pub_map.setdefault(pub["topic"], set()).add(node["name"])
        for sub in node["subscriptions"]:
            assert sub["topic"] in topic_names, f"subscription on unknown topic {sub['topic']}"
            sub_map.setdefault(sub["topic"], set()).add(node["name"])

    for topic in snapshot["topics"]:
        assert set(topic["publishers"]) == pub_map.get(topic["name"], set()), (
            f"publisher list mismatch on {topic['name']}"
        )
        assert set(topic["subscribers"]) == sub_map.get(topic["name"], set()), (
            f"subscriber list mismatch on {topic['name']}"
        )
        assert set(topic["publishers"]) <= node_names
        assert set(topic["subscribers"]) <= node_names
        assert topic["publishers"] or topic["subscribers"], f"orphan topic {topic['name']}"

    for alias in snapshot["aliases"]:
        assert alias["node"] in node_names, f"alias on unknown node {alias['node']}"
        assert alias["internal"].startswith("/__wrap/")


def normalize_snapshot(snapshot: dict, *, ignore_nodes=()) -> dict:
    """Strip volatile fields (version, pids, drop counters) for equality checks."""
    out = {"nodes": [], "topics": [], "aliases": []}
    skip = set(ignore_nodes)
    for node in snapshot["nodes"]:
        if node["name"] in skip:
            continue
        out["nodes"].append({
            "name": node["name"],
            "publications": [dict(p) for p in node["publications"]],
            "subscriptions": [{"topic": s["topic"], "schema": s["schema"]} for s in node["subscriptions"]],
        })
    for topic in snapshot["topics"]:
        pubs = [n for n in topic["publishers"] if n not in skip]
        subs = [n for n in topic["subscribers"] if n not in skip]
        if not pubs and not subs:
            continue
        out["topics"].append({
            "name": topic["name"],
            "schema": topic["schema"],
            "publishers": pubs,
            "subscribers": subs,
        })
    out["aliases"] = [dict(a) for a in snapshot["aliases"] if a["node"] not in skip]
    return out
