#!/usr/bin/env python3
"""Generate the shipped suite scenarios (scenarios/suite_{a,b,c}.json).

All three suites share one 30 x 20 m floor: four room bands split into
eight rooms, a middle corridor, a central corridor and two end hallways.
Each session lists the objects present while it runs, so targets from
other sessions never show up in the camera.

    python3 scripts/gen_scenarios.py [--out scenarios] [--seed 11]
"""

import argparse
import json
import math
import random
from pathlib import Path

RES = 0.1
W, H = 30.0, 20.0
WALL = 0.2
PX_PER_M = 20.0

# (xmin, ymin, xmax, ymax) of free space
ROOMS = {
    "12C1": (0.2, 11.7, 6.8, 16.8),
    "12C2": (7.0, 11.7, 13.3, 16.8),
    "12C3": (16.7, 11.7, 23.0, 16.8),
    "12C4": (23.2, 11.7, 29.8, 16.8),
    "12C5": (0.2, 3.2, 6.8, 8.3),
    "12C6": (7.0, 3.2, 13.3, 8.3),
    "1220": (16.7, 3.2, 23.0, 8.3),
    "1221": (23.2, 3.2, 29.8, 8.3),
}
NORTH_ROOMS = {"12C1", "12C2", "12C3", "12C4"}
DOOR_W = 1.2

# hallway labels: name -> (kind, position, region targets may occupy)
HALLS = {
    "C101": ("hallway", (15.0, 1.6), (9.0, 0.2, 21.0, 3.0)),
    "C102": ("hallway", (15.0, 18.4), (9.0, 17.0, 21.0, 19.8)),
    "C103": ("hallway intersection", (15.0, 10.0), (11.0, 8.5, 19.0, 11.5)),
    "C104": ("hallway", (4.0, 10.0), (0.5, 8.5, 9.0, 11.5)),
    "C105": ("hallway", (26.0, 10.0), (21.5, 8.5, 29.5, 11.5)),
}

# zone expressions that are not label names
EXPR = {
    "south hallway": "C101",
    "north hallway": "C102",
    "hallway intersection": "C103",
    "west hallway": "C104",
    "east hallway": "C105",
}
DERIVED = {
    "center between C103 and C105": ((20.5, 10.0), (17.0, 8.5, 24.5, 11.5)),
    "2 m north of C101": ((15.0, 3.6), (13.5, 3.2, 16.5, 8.3)),
}


def room_center(name):
    x0, y0, x1, y1 = ROOMS[name]
    return ((x0 + x1) / 2, (y0 + y1) / 2)


def door_of(name):
    """Doorway center of a room (rooms open onto the middle corridor)."""
    x0, y0, x1, y1 = ROOMS[name]
    cx = (x0 + x1) / 2
    return (cx, 11.6) if name in NORTH_ROOMS else (cx, 8.4)


def walls():
    rects = [
        (0.0, 0.0, W, WALL),
        (0.0, H - WALL, W, H),
        (0.0, 0.0, WALL, H),
        (W - WALL, 0.0, W, H),
    ]
    for xa, xb in ((WALL, 13.5), (16.5, W - WALL)):
        rects += [(xa, 3.0, xb, 3.2), (xa, 8.3, xb, 8.5), (xa, 11.5, xb, 11.7), (xa, 16.8, xb, 17.0)]
    for ya, yb in ((3.0, 8.5), (11.5, 17.0)):
        rects += [(13.3, ya, 13.5, yb), (16.5, ya, 16.7, yb), (6.8, ya, 7.0, yb), (23.0, ya, 23.2, yb)]
    return rects


def doorways():
    out = []
    for name in ROOMS:
        cx, cy = door_of(name)
        out.append((cx - DOOR_W / 2, cy - 0.15, cx + DOOR_W / 2, cy + 0.15))
    return out


def grid_rows():
    nx, ny = int(round(W / RES)), int(round(H / RES))
    ws, ds = walls(), doorways()

    def inside(r, x, y):
        return r[0] <= x < r[2] and r[1] <= y < r[3]

    rows = []
    for cy in reversed(range(ny)):
        y = (cy + 0.5) * RES
        row = []
        for cx in range(nx):
            x = (cx + 0.5) * RES
            occ = any(inside(r, x, y) for r in ws) and not any(inside(d, x, y) for d in ds)
            row.append("#" if occ else ".")
        rows.append("".join(row))
    return rows


def to_px(p):
    return (round(p[0] * PX_PER_M, 6), round((H - p[1]) * PX_PER_M, 6))


def labels():
    out = []
    for name in ROOMS:
        px, py = to_px(room_center(name))
        out.append({"name": name, "px": px, "py": py, "kind": "room"})
    for name, (kind, pos, _) in HALLS.items():
        px, py = to_px(pos)
        out.append({"name": name, "px": px, "py": py, "kind": kind})
    return out


def zone_geometry(zone):
    """(label point, free region) for a zone expression."""
    if zone in ROOMS:
        return room_center(zone), ROOMS[zone]
    if zone in HALLS:
        return HALLS[zone][1], HALLS[zone][2]
    if zone in EXPR:
        return zone_geometry(EXPR[zone])
    return DERIVED[zone]


# ---- target kinds ------------------------------------------------------------
#
# text: target phrase in the command
# cls, attrs: the target object
# distractors: attribute sets of same-class objects that fail the phrase
# special: relation set-up handled in place_task

PLAIN = {
    "fe": dict(cls="fire_extinguisher", text="the fire extinguisher", attrs=[]),
    "vest": dict(cls="safety_vest", text="the safety vest", attrs=["orange"]),
    "toolbox": dict(cls="toolbox", text="the toolbox", attrs=["closed"]),
    "open_toolbox": dict(cls="toolbox", text="the open toolbox", attrs=["open"]),
    "cart": dict(cls="hand_pulled_cart", text="the hand-pulled cart", attrs=[]),
    "tripod": dict(cls="tripod", text="the tripod", attrs=[]),
    "hat": dict(cls="hard_hat", text="the hard hat", attrs=["white"]),
    "box": dict(cls="box", text="the brown box", attrs=["brown"]),
    "ladder": dict(cls="ladder", text="the ladder", attrs=[]),
    "cone": dict(cls="traffic_cone", text="the traffic cone", attrs=["orange"]),
}

COND = {
    "fe_no_tag": dict(cls="fire_extinguisher", text="the fire extinguisher without a yellow tag", attrs=[],
                      distractors=[["yellow_tag"]]),
    "fe_tag": dict(cls="fire_extinguisher", text="the fire extinguisher with a yellow tag", attrs=["yellow_tag"],
                   distractors=[[]]),
    "open_toolbox": dict(cls="toolbox", text="the open toolbox", attrs=["open"], distractors=[["closed"]]),
    "closed_toolbox": dict(cls="toolbox", text="the closed toolbox", attrs=["closed"], distractors=[["open"]]),
    "vest": dict(cls="safety_vest", text="the orange safety vest", attrs=["orange"], distractors=[["yellow"]]),
    "hat": dict(cls="hard_hat", text="the white hard hat", attrs=["white"], distractors=[["yellow"]]),
    "cone": dict(cls="traffic_cone", text="the orange traffic cone", attrs=["orange"], distractors=[["green"]]),
    "box_door": dict(cls="box", text="the brown box blocking the door", attrs=["brown"], distractors=[["brown"]],
                     special="blocking"),
    "cart_fe": dict(cls="hand_pulled_cart", text="the hand-pulled cart carrying fire extinguishers", attrs=[],
                    distractors=[[]], special="carry_fe"),
    "cart_boxes": dict(cls="hand_pulled_cart", text="the hand-pulled cart carrying the brown boxes", attrs=[],
                       distractors=[[]], special="carry_boxes"),
    "tripod_ladder": dict(cls="tripod", text="the tripod next to the ladder", attrs=[], distractors=[[]],
                          special="next_to_ladder"),
}

COND_CATALOG = {**PLAIN, **COND}

MIN_FROM_LABEL, MAX_FROM_LABEL = 1.8, 3.2
MARGIN = 1.2
SEPARATION = 1.8
HELPER_GAP = 1.3
DISTRACTOR_RING = (1.4, 2.4)


class Placer:
    def __init__(self, rng, session, catalog):
        self.rng = rng
        self.catalog = catalog
        self.session = session
        self.objects = []
        self.n = 0

    def new_id(self, cls):
        self.n += 1
        return f"{self.session.lower()}_{cls}_{self.n}"

    def clear_of(self, p, gap=SEPARATION):
        return all(math.dist(p, o["pose"]) >= gap for o in self.objects)

    def sample(self, zone, near=None, gap=SEPARATION, ring=(MIN_FROM_LABEL, MAX_FROM_LABEL)):
        center, (x0, y0, x1, y1) = zone_geometry(zone)
        lo, hi = ring
        anchor = near or center
        for _ in range(20000):
            a = self.rng.uniform(0, 2 * math.pi)
            r = self.rng.uniform(lo, hi)
            p = (anchor[0] + r * math.cos(a), anchor[1] + r * math.sin(a))
            m = 0.9 if zone not in ROOMS else MARGIN
            if not (x0 + m <= p[0] <= x1 - m and y0 + m <= p[1] <= y1 - m):
                continue
            if near is not None and math.dist(p, center) < 1.0:
                continue
            if not self.clear_of(p, gap):
                continue
            return (round(p[0], 3), round(p[1], 3))
        raise RuntimeError(f"cannot place an object in {zone} for {self.session}")

    def near(self, zone, p):
        """A distractor spot close to the target."""
        return self.sample(zone, near=p, ring=DISTRACTOR_RING, gap=DISTRACTOR_RING[0])

    def add(self, cls, attrs, pose, relations=None, anchored=False):
        o = {"id": self.new_id(cls), "class": cls, "attributes": sorted(attrs), "pose": pose}
        if relations:
            o["relations"] = relations
        if anchored:
            o["anchored"] = True
        self.objects.append(o)
        return o["id"]

    def place(self, zone, kind):
        """Places a target (and its distractors and helpers); returns the target id."""
        spec = self.catalog[kind]
        special = spec.get("special")
        if special == "blocking":
            door = door_of(zone)
            inward = 1.0 if zone in NORTH_ROOMS else -1.0
            door_id = self.add("door", [], (round(door[0], 3), round(door[1], 3)), anchored=True)
            box = (round(door[0] + 0.9, 3), round(door[1] + inward * 1.3, 3))
            target = self.add(spec["cls"], spec["attrs"], box, relations={"blocking": [door_id]})
            for attrs in spec["distractors"]:
                self.add(spec["cls"], attrs, self.near(zone, box if special == "blocking" else p))
            return target
        if special in ("carry_fe", "carry_boxes"):
            cargo_t = ("fire_extinguisher", []) if special == "carry_fe" else ("box", ["brown"])
            cargo_d = ("box", ["brown"]) if special == "carry_fe" else ("fire_extinguisher", [])
            p = self.sample(zone)
            target = self.add(spec["cls"], spec["attrs"], p, anchored=True)
            for _ in range(2):
                self.add(cargo_t[0], cargo_t[1], p, relations={"carried_by": target}, anchored=True)
            q = self.near(zone, p)
            d = self.add(spec["cls"], [], q, anchored=True)
            for _ in range(2):
                self.add(cargo_d[0], cargo_d[1], q, relations={"carried_by": d}, anchored=True)
            return target
        if special == "next_to_ladder":
            p = self.sample(zone)
            # the helper sits closer to the target than the usual separation
            lad = self.sample(zone, near=p, ring=(HELPER_GAP, HELPER_GAP + 0.2), gap=HELPER_GAP)
            ladder = self.add("ladder", [], lad, anchored=True)
            target = self.add(spec["cls"], spec["attrs"], p, relations={"adjacent_to": [ladder]})
            for attrs in spec["distractors"]:
                self.add(spec["cls"], attrs, self.near(zone, box if special == "blocking" else p))
            return target
        p = self.sample(zone)
        target = self.add(spec["cls"], spec["attrs"], p)
        for attrs in spec.get("distractors", []):
            self.add(spec["cls"], attrs, self.near(zone, p))
        return target


def sentence(zone, kind, then=False, first=False, catalog=None):
    joiner = "Then move to" if then else "Move to"
    zone_text = f"the {zone}" if zone in EXPR or zone.startswith("center") else zone
    tail = " first" if first else ""
    return f"{joiner} {zone_text} and inspect {(catalog or COND_CATALOG)[kind]['text']}{tail}."


def command(tasks, catalog=None):
    return " ".join(sentence(z, k, then=i > 0, catalog=catalog) for i, (z, k) in enumerate(tasks))


# ---- suites ------------------------------------------------------------------

SUITE_A = [
    ("A01", [("south hallway", "fe"), ("hallway intersection", "vest"), ("1220", "box")], ["semantic"]),
    ("A02", [("12C5", "open_toolbox"), ("12C3", "tripod")], []),
    ("A03", [("12C1", "hat"), ("east hallway", "cone")], ["semantic"]),
    ("A04", [("1221", "ladder"), ("12C2", "cart")], []),
    ("A05", [("12C6", "vest"), ("north hallway", "fe"), ("12C4", "toolbox")], ["semantic"]),
    ("A06", [("12C4", "tripod"), ("1220", "hat")], []),
    ("A07", [("west hallway", "box"), ("12C3", "ladder")], ["semantic"]),
    ("A08", [("center between C103 and C105", "cone"), ("12C1", "fe")], ["derived"]),
    ("A09", [("12C2", "toolbox"), ("1221", "vest"), ("12C5", "tripod")], []),
    ("A10", [("12C6", "cart"), ("12C4", "hat")], []),
    ("A11", [("hallway intersection", "ladder"), ("12C5", "fe")], ["semantic"]),
    ("A12", [("1220", "tripod"), ("12C1", "box"), ("C102", "vest")], []),
    ("A13", [("12C3", "cone"), ("12C6", "fe")], []),
    ("A14", [("south hallway", "toolbox"), ("12C2", "tripod"), ("1221", "hat")], ["semantic"]),
    ("A15", [("12C4", "vest"), ("2 m north of C101", "ladder")], ["derived"]),
]

SUITE_B = [
    ("B01", [("12C5", "open_toolbox"), ("12C3", "fe_no_tag")]),
    ("B02", [("1220", "box_door"), ("hallway intersection", "vest"), ("12C2", "tripod_ladder")]),
    ("B03", [("12C4", "cart_fe"), ("12C1", "hat")]),
    ("B04", [("south hallway", "fe_tag"), ("12C6", "closed_toolbox")]),
    ("B05", [("1221", "cart_boxes"), ("12C3", "vest"), ("12C5", "tripod_ladder")]),
    ("B06", [("12C2", "cone"), ("12C4", "fe_no_tag")]),
    ("B07", [("12C6", "box_door"), ("east hallway", "hat")]),
    ("B08", [("12C1", "open_toolbox"), ("1220", "tripod_ladder")]),
    ("B09", [("12C3", "fe_tag"), ("12C5", "vest"), ("1221", "hat")]),
    ("B10", [("north hallway", "closed_toolbox"), ("12C6", "cone")]),
    ("B11", [("12C4", "box_door"), ("12C2", "fe_no_tag")]),
    ("B12", [("1220", "cart_fe"), ("12C1", "vest"), ("12C3", "tripod_ladder")]),
    ("B13", [("west hallway", "hat"), ("12C5", "open_toolbox")]),
    ("B14", [("1221", "fe_no_tag"), ("12C6", "tripod_ladder"), ("12C2", "cone")]),
    ("B15", [("12C3", "closed_toolbox"), ("12C4", "vest")]),
]

FE_SWAP = "Actually, inspect the fire extinguisher without a yellow tag instead of the one with a yellow tag."
CART_SWAP = ("Actually, inspect the hand-pulled cart carrying fire extinguishers instead of the one carrying "
             "the brown boxes.")


def during(task, delay=2.0, phase=None):
    t = {"task": task, "delay_s": delay}
    if phase:
        t["phase"] = phase
    return {"during_task": t}


def after(task):
    return {"after_task": task}


def suite_c(placer_for):
    """Each entry: (id, tag, initial tasks, mid commands, extra placements, expected order)."""
    sessions = []

    def add(sid, tag, initial, mids, order, extra=()):
        pl = placer_for(sid)
        ids = {}
        for i, (zone, kind) in enumerate(initial):
            ids[f"T{i + 1}"] = pl.place(zone, kind)
        for key, zone, kind in extra:
            ids[key] = pl.place(zone, kind)
        sessions.append(
            {
                "id": sid,
                "command": command(initial),
                "mid_commands": [{"trigger": t, "text": text} for t, text in mids],
                "expected_order": [{"task_index": i, "target": ids[k]} for i, k in enumerate(order)],
                "tags": [tag],
                "objects": [o["id"] for o in pl.objects],
            }
        )
        return pl

    add("C01", "add", [("12C5", "open_toolbox")],
        [(after("T1"), "Add: " + sentence("12C3", "fe_no_tag"))], ["T1", "N"], extra=[("N", "12C3", "fe_no_tag")])
    add("C02", "add", [("12C1", "hat")],
        [({"at_sim_time": 5.0}, "Also move to 1221 and inspect the tripod.")], ["T1", "N"],
        extra=[("N", "1221", "tripod")])
    add("C03", "add", [("12C4", "vest")],
        [(during("T1"), sentence("12C6", "tripod", first=True))], ["N", "T1"], extra=[("N", "12C6", "tripod")])
    add("C04", "cancel", [("12C2", "open_toolbox"), ("1220", "fe_tag"), ("12C5", "hat")],
        [(after("T1"), "Cancel the last task.")], ["T1", "T2"])
    add("C05", "cancel", [("12C3", "cone"), ("12C6", "fe_no_tag"), ("1221", "closed_toolbox")],
        [(during("T2"), "Cancel the current task.")], ["T1", "T3"])
    add("C06", "cancel", [("12C1", "tripod_ladder"), ("12C4", "hat"), ("1220", "vest")],
        [(during("T1"), "Cancel the task at 12C4.")], ["T1", "T3"])
    add("C07", "reorder", [("12C5", "fe_tag"), ("12C2", "cone"), ("1221", "hat")],
        [(during("T1"), "Do the task at 1221 first.")], ["T1", "T3", "T2"])
    add("C08", "reorder", [("1220", "open_toolbox"), ("12C3", "vest"), ("12C6", "tripod")],
        [(during("T1"), "Inspect the tripod first.")], ["T1", "T3", "T2"])
    add("C09", "reorder", [("12C4", "box_door"), ("12C1", "hat"), ("12C5", "cone")],
        [(after("T1"), "Do the last task first.")], ["T1", "T3", "T2"])
    add("C10", "modify", [("1221", "cart_boxes")],
        [(during("T1", 0.0, "positioning"), CART_SWAP)], ["T1"])
    # the swapped-in cart is the cart_boxes distractor: find it after placement
    fix_cart_swap(sessions[-1], placer_for("C10"))
    add("C11", "modify", [("12C3", "vest")],
        [(during("T1"), "Actually, move to 12C3 instead of 12C2.")], ["T1"])
    sessions[-1]["command"] = sentence("12C2", "vest")
    add("C12", "modify", [("12C6", "open_toolbox"), ("12C4", "fe_tag")],
        [(during("T1"), FE_SWAP)], ["T1", "T2"])
    fix_fe_swap(sessions[-1], placer_for("C12"), 1)
    add("C13", "combined", [("12C5", "box_door"), ("1220", "fe_tag")],
        [(during("T2"), sentence("12C1", "tripod", first=True)), (during("T4", 0.0, "positioning"), FE_SWAP)],
        ["T1", "N", "T2"], extra=[("N", "12C1", "tripod")])
    fix_fe_swap(sessions[-1], placer_for("C13"), 2)
    add("C14", "combined", [("12C3", "hat"), ("1221", "cone")],
        [(after("T1"), "Add: " + sentence("12C6", "closed_toolbox")), (during("T2"), "Cancel the current task.")],
        ["T1", "N"], extra=[("N", "12C6", "closed_toolbox")])
    add("C15", "combined", [("12C2", "vest"), ("12C4", "fe_tag"), ("1220", "tripod_ladder")],
        [(during("T1"), "Do the task at 1220 first."), (after("T3"), FE_SWAP)], ["T1", "T3", "T2"])
    fix_fe_swap(sessions[-1], placer_for("C15"), 2)
    return sessions


def fix_fe_swap(session, pl, index):
    """After the swap the untagged extinguisher (the distractor) is the target."""
    old = session["expected_order"][index]["target"]
    tagged = next(o for o in pl.objects if o["id"] == old)
    untagged = next(o for o in pl.objects
                    if o["class"] == "fire_extinguisher" and o["id"] != old and "yellow_tag" not in o["attributes"]
                    and math.dist(o["pose"], tagged["pose"]) < 8 and "relations" not in o)
    session["expected_order"][index]["target"] = untagged["id"]


def fix_cart_swap(session, pl):
    carts = [o for o in pl.objects if o["class"] == "hand_pulled_cart"]
    loaded = {o["relations"]["carried_by"]: o["class"] for o in pl.objects if "carried_by" in o.get("relations", {})}
    fe_cart = next(c for c in carts if loaded.get(c["id"]) == "fire_extinguisher")
    session["expected_order"] = [{"task_index": 0, "target": fe_cart["id"]}]


def build(suite, seed):
    rng = random.Random(f"{suite}:{seed}")
    placers = {}

    catalog = PLAIN if suite == "A" else COND_CATALOG

    def placer_for(sid):
        if sid not in placers:
            placers[sid] = Placer(rng, sid, catalog)
        return placers[sid]

    sessions = []
    if suite == "A":
        for sid, tasks, tags in SUITE_A:
            pl = placer_for(sid)
            targets = [pl.place(z, k) for z, k in tasks]
            sessions.append(
                {
                    "id": sid,
                    "command": command(tasks, PLAIN),
                    "expected_order": [{"task_index": i, "target": t} for i, t in enumerate(targets)],
                    "tags": tags,
                    "objects": [o["id"] for o in pl.objects],
                }
            )
    elif suite == "B":
        for sid, tasks in SUITE_B:
            pl = placer_for(sid)
            targets = [pl.place(z, k) for z, k in tasks]
            sessions.append(
                {
                    "id": sid,
                    "command": command(tasks),
                    "expected_order": [{"task_index": i, "target": t} for i, t in enumerate(targets)],
                    "tags": ["distractors"],
                    "objects": [o["id"] for o in pl.objects],
                }
            )
    else:
        sessions = suite_c(placer_for)

    objects = [o for sid in sorted(placers) for o in placers[sid].objects]
    return {
        "name": f"suite-{suite.lower()}",
        "suite": suite,
        "grid": {"resolution": RES, "origin": [0.0, 0.0], "rows": grid_rows()},
        "transform": {"affine": {"linear": [[1 / PX_PER_M, 0.0], [0.0, -1 / PX_PER_M]], "translation": [0.0, H]}},
        "labels": labels(),
        "objects": objects,
        "robot_start": {"x": 15.0, "y": 5.0, "heading": 90.0},
        "placement_jitter_m": 0.25,
        "sessions": sessions,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="scenarios")
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for suite in "ABC":
        doc = build(suite, args.seed)
        path = out / f"suite_{suite.lower()}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        tasks = sum(len(s["expected_order"]) for s in doc["sessions"])
        print(f"{path}: {len(doc['sessions'])} sessions, {tasks} tasks, {len(doc['objects'])} objects")


if __name__ == "__main__":
    main()
