"""Regenerates wkb_vectors.json with shapely/GEOS as the reference encoder.

Run: python3 gen_wkb_vectors.py > wkb_vectors.json
"""

import json
import random

import shapely
from shapely.geometry import LineString, Point, Polygon


def coords_of(g):
    if g.geom_type == "Polygon":
        return [[list(c) for c in g.exterior.coords]] + [[list(c) for c in r.coords] for r in g.interiors]
    if g.geom_type == "Point":
        return list(g.coords[0])
    return [list(c) for c in g.coords]


def vector(name, g):
    return {
        "name": name,
        "type": g.geom_type,
        "has_z": bool(g.has_z),
        "coordinates": coords_of(g),
        "wkb_le": shapely.to_wkb(g, hex=True, byte_order=1, flavor="iso", output_dimension=3 if g.has_z else 2),
        "wkb_be": shapely.to_wkb(g, hex=True, byte_order=0, flavor="iso", output_dimension=3 if g.has_z else 2),
    }


def main():
    rnd = random.Random(123)
    r = lambda: round(rnd.uniform(-500.0, 500.0), 6)
    out = [
        vector("point_z_origin", Point(0.0, 0.0, 0.0)),
        vector("point_xy", Point(1.5, -2.25)),
        vector("point_z", Point(651234.125, 4512345.5, 12.75)),
        vector("linestring_xy", LineString([(0, 0), (10, 0), (10, 5.5)])),
        vector("linestring_z", LineString([(0, 0, 1), (3.25, -1, 1.5)])),
        vector("polygon_square", Polygon([(0, 0), (4, 0), (4, 4), (0, 4), (0, 0)])),
        vector(
            "polygon_hole_z",
            Polygon(
                [(0, 0, 1), (10, 0, 1), (10, 10, 2), (0, 10, 2), (0, 0, 1)],
                [[(4, 4, 1.5), (6, 4, 1.5), (6, 6, 1.5), (4, 6, 1.5), (4, 4, 1.5)]],
            ),
        ),
    ]
    for i in range(8):
        out.append(vector(f"random_linestring_{i}", LineString([(r(), r()) for _ in range(rnd.randint(2, 9))])))
        out.append(vector(f"random_linestring_z_{i}", LineString([(r(), r(), r()) for _ in range(rnd.randint(2, 9))])))
    for i in range(4):
        n = rnd.randint(3, 12)
        pts = [(r(), r(), r()) for _ in range(n)]
        out.append(vector(f"random_polygon_z_{i}", Polygon(pts + [pts[0]])))
    print(json.dumps(out, indent=1))


main()
