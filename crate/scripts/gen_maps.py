#!/usr/bin/env python3
"""Regenerates the bundled map files in crates/core/maps/."""
import json
import math
import os
import re

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "maps")
HALF_WIDTH = 6.0
ARM = 40.0


def rect(cx, cy, hx, hy):
    return [[cx - hx, cy - hy], [cx + hx, cy - hy], [cx + hx, cy + hy], [cx - hx, cy + hy]]


def r2(v):
    return [round(v[0], 6) + 0.0, round(v[1], 6) + 0.0]


def intersection():
    hw = HALF_WIDTH
    dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    roads, signals, spawns, goals = [], [], [], []
    for rid, (ux, uy) in enumerate(dirs):
        roads.append({"id": rid, "axis": [r2((ux * ARM, uy * ARM)), [0.0, 0.0]],
                      "width": 2 * hw, "lane_offset": hw / 2, "signal_group": rid % 2})
        # inbound traffic travels along -u; its right-hand side is (-uy, ux) rotated
        dx, dy = -ux, -uy
        rx, ry = dy, -dx
        heading = math.atan2(dy, dx)
        signals.append({"position": r2((ux * hw + rx * hw, uy * hw + ry * hw)),
                        "heading": math.atan2(uy, ux), "road": rid})
        for tier, d in enumerate((22.0, 32.0)):
            ax, ay = ux * d + rx * hw / 2, uy * d + ry * hw / 2
            # 8 m along the lane, 6 m across it
            hx, hy = (4.0, hw / 2) if ux != 0 else (hw / 2, 4.0)
            spawns.append({"region": [r2(p) for p in rect(ax, ay, hx, hy)],
                           "anchor": r2((ax, ay)), "heading": heading, "road": rid,
                           "tier": tier, "jitter": 2.0})
        gx, gy = ux * 35.0, uy * 35.0
        hx, hy = (5.0, hw) if ux != 0 else (hw, 5.0)
        goals.append({"region": [r2(p) for p in rect(gx, gy, hx, hy)],
                      "anchor": r2((gx, gy)), "road": rid})
    cross = [[ARM, -hw], [ARM, hw], [hw, hw], [hw, ARM], [-hw, ARM], [-hw, hw], [-ARM, hw],
             [-ARM, -hw], [-hw, -hw], [-hw, -ARM], [hw, -ARM], [hw, -hw]]
    return {
        "version": 1,
        "name": "intersection4",
        "drivable_polygons": [cross],
        "roads": roads,
        "intersection_region": rect(0.0, 0.0, hw, hw),
        "crosswalk": None,
        "signals": signals,
        "spawn_pockets": spawns,
        "goal_pockets": goals,
    }


def highway(name="highway", crosswalk=None):
    hw = HALF_WIDTH
    spawns = []
    for k in range(10):
        x = -37.5 + 5.5 * k
        spawns.append({"region": rect(x, 0.0, 2.5, hw), "anchor": [x, 0.0], "heading": 0.0,
                       "road": 0, "tier": 0, "jitter": 0.0})
    return {
        "version": 1,
        "name": name,
        "drivable_polygons": [rect(0.0, 0.0, ARM, hw)],
        "roads": [{"id": 0, "axis": [[-ARM, 0.0], [ARM, 0.0]], "width": 2 * hw, "lane_offset": 0.0, "signal_group": 0}],
        "intersection_region": None,
        "crosswalk": crosswalk,
        "signals": [],
        "spawn_pockets": spawns,
        "goal_pockets": [{"region": rect(35.0, 0.0, 5.0, hw), "anchor": [35.0, 0.0], "road": 0}],
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    maps = {
        "intersection4.json": intersection(),
        "highway.json": highway(),
        "crosswalk.json": highway("crosswalk", {"segment": [[20.0, -HALF_WIDTH], [20.0, HALF_WIDTH]],
                                                "width": 3.0}),
    }
    for fname, m in maps.items():
        text = json.dumps(m, indent=1)
        # keep coordinate pairs on one line
        text = re.sub(r"\[\s*(-?[\d.e+-]+),\s*(-?[\d.e+-]+)\s*\]", r"[\1, \2]", text)
        with open(os.path.join(OUT, fname), "w") as f:
            f.write(text + "\n")


if __name__ == "__main__":
    main()
