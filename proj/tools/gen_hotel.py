#!/usr/bin/env python3
"""Writes data/hotel.json: a single-floor hotel wing with a main corridor,
rooms on both sides, a main staircase exit at the west end and a fire exit at
the end of a short side corridor."""
import json
import sys

W, H = 40.0, 14.0
CORR_S, CORR_N = 6.0, 8.0          # main corridor band
SIDE_W, SIDE_E = 24.0, 26.0        # side corridor band (to the fire exit)
EXIT_A = (6.4, 7.6)                # west wall, y range
EXIT_B = (24.4, 25.6)              # south wall, x range
DOOR = 1.0

north_parts = [0, 6, 12, 18, 24, 30, 36, 40]
south_parts = [0, 6, 12, 18, 24]   # west of the side corridor
south_parts_e = [26, 32, 40]       # east of the side corridor
# Door left edge per room (x), keyed by room's west partition.
north_doors = {0: 4.4, 6: 10.4, 12: 16.4, 18: 19.7, 24: 24.6, 30: 30.6, 36: 36.6}
south_doors = {0: 4.4, 6: 10.4, 12: 16.4, 18: 22.4, 26: 26.6, 32: 32.6}

walls = []


def wall(x1, y1, x2, y2):
    walls.append([x1, y1, x2, y2])


def wall_with_gaps(y, x0, x1, gaps):
    x = x0
    for g0, g1 in sorted(gaps):
        if g0 > x:
            wall(x, y, g0, y)
        x = g1
    if x < x1:
        wall(x, y, x1, y)


# Outer shell.
wall(0, 0, EXIT_B[0], 0)
wall(EXIT_B[1], 0, W, 0)
wall(0, H, W, H)
wall(0, 0, 0, EXIT_A[0])
wall(0, EXIT_A[1], 0, H)
wall(W, 0, W, H)

# Corridor walls with room doors.
wall_with_gaps(CORR_N, 0, W, [(d, d + DOOR) for d in north_doors.values()])
wall_with_gaps(CORR_S, 0, SIDE_W, [(d, d + DOOR) for k, d in south_doors.items() if k < SIDE_W])
wall_with_gaps(CORR_S, SIDE_E, W, [(d, d + DOOR) for k, d in south_doors.items() if k > SIDE_W])
wall(SIDE_W, 0, SIDE_W, CORR_S)
wall(SIDE_E, 0, SIDE_E, CORR_S)

# Room partitions.
for x in north_parts[1:-1]:
    wall(x, CORR_N, x, H)
for x in south_parts[1:-1]:
    wall(x, 0, x, CORR_S)
for x in south_parts_e[1:-1]:
    wall(x, 0, x, CORR_S)

mid_n = (CORR_N + H) / 2
mid_s = CORR_S / 2
starts = [
    [21.0, mid_n],   # primary start: north room 4, fire exit nearest
    [3.0, mid_n],
    [9.0, mid_s],
    [27.0, mid_n],
    [9.0, mid_n],
    [21.0, mid_s],
    [3.0, mid_s],
    [29.0, mid_s],
]

corr_y = (CORR_S + CORR_N) / 2
side_x = (SIDE_W + SIDE_E) / 2
guiding_lines = {
    "A": [[W - 1.0, corr_y], [0.3, corr_y]],
    "B": [[W - 1.0, corr_y], [side_x, corr_y], [side_x, 0.3]],
}

# Standard signage leads to the main staircase (A); the fire exit only carries
# a short-range sign above its own door.
signs = []
for x in [4.0, 10.0, 16.0, 22.0, 28.0, 34.0, 39.0]:
    signs.append({"pos": [x, corr_y], "facing": [1.0, 0.0], "arrow": [-1.0, 0.0], "range": 12.0})
signs.append({"pos": [side_x, 1.0], "facing": [0.0, 1.0], "arrow": [0.0, -1.0], "range": 4.0})

posts = [[s[0] + 2.0, s[1]] for s in starts]

doc = {
    "id": "hotel",
    "bounds": {"min": [0.0, 0.0], "max": [W, H]},
    "walls": walls,
    "exits": [
        {"id": "A", "portal": [0.0, EXIT_A[0], 0.0, EXIT_A[1]], "label": "main staircase"},
        {"id": "B", "portal": [EXIT_B[0], 0.0, EXIT_B[1], 0.0], "label": "fire exit"},
    ],
    "starts": starts,
    "guiding_lines": guiding_lines,
    "exit_signs": signs,
    "floor_plan_posts": posts,
}

out = sys.argv[1] if len(sys.argv) > 1 else "data/hotel.json"
with open(out, "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
