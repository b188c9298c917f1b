"""Regenerate the built-in geometry catalog (src/isomass/geometries/*.json).

Every entry is an explicit spline (non-rational) parametrization.  Curved
boundaries use quadratic B-spline approximations of circular arcs.  Run from
the repository root::

    python3 tools/build_catalog.py
"""

import math
from pathlib import Path

import numpy as np

from isomass.geometry import MultipatchGeometry, Patch, identity_patch
from isomass.io import save_geometry
from isomass.multipatch import build_multipatch_space
from isomass.splines import KnotVector, TensorBasis

OUT = Path(__file__).resolve().parents[1] / "src" / "isomass" / "geometries"

LIN = KnotVector([0, 0, 1, 1], 1)
QUAD = KnotVector([0, 0, 0, 1, 1, 1], 2)


def grid_points(rows):
    """Flatten ``rows[j][i]`` (i fastest) into the co-lexicographic control list."""
    return [pt for row in rows for pt in row]


def bilinear(corners, label):
    """Bilinear patch through (c00, c10, c01, c11)."""
    return Patch(TensorBasis([LIN, LIN]), np.array(corners, dtype=float), label)


def unit_square():
    p = identity_patch(2, "unit_square")
    p.description = "identity map of [0,1]^2"
    return p


def unit_cube():
    p = identity_patch(3, "unit_cube")
    p.description = "identity map of [0,1]^3"
    return p


def quarter_annulus():
    # xi radial (degree 1), eta angular (degree 2 Bezier arc approximation)
    rows = [[(r, 0.0) for r in (1.0, 2.0)], [(r, r) for r in (1.0, 2.0)], [(0.0, r) for r in (1.0, 2.0)]]
    p = Patch(TensorBasis([LIN, QUAD]), grid_points(rows), "quarter_annulus")
    p.description = "quarter annulus, radii 1 and 2, polynomial quadratic arcs"
    return p


def kite_like():
    rows = [
        [(0.0, 0.0), (0.5, -0.15), (1.0, 0.1)],
        [(-0.1, 0.5), (0.5, 0.45), (1.15, 0.55)],
        [(0.15, 1.0), (0.6, 1.15), (1.25, 1.3)],
    ]
    p = Patch(TensorBasis([QUAD, QUAD]), grid_points(rows), "kite_like")
    p.description = "smooth perturbed square, biquadratic Bezier"
    return p


def _circle_curve(radius, n_spans=8):
    """Quadratic B-spline closing on (radius, 0); knots at angles 360k/n_spans lie on the circle."""
    half = math.pi / n_spans
    outer = radius / math.cos(half)
    pts = [(radius, 0.0)]
    pts += [(outer * math.cos((2 * k + 1) * half), outer * math.sin((2 * k + 1) * half)) for k in range(n_spans)]
    pts.append((radius, 0.0))
    knots = [0, 0, 0] + [k / n_spans for k in range(1, n_spans)] + [1, 1, 1]
    return KnotVector(knots, 2), pts


def disc_one_singularity():
    # xi radial from the centre, eta runs once around the circle: the edge xi = 0 collapses
    kv, curve = _circle_curve(1.0)
    rows = [[(0.0, 0.0), c] for c in curve]
    p = Patch(TensorBasis([LIN, kv]), grid_points(rows), "disc_one_singularity",
              singular=True, singular_set="edge xi_1 = 0")
    p.description = "unit disc, polar-style map collapsing the edge xi_1 = 0 to the centre"
    return p


def disc_four_singularities():
    a = 1.0 / math.sqrt(2.0)
    s = math.sqrt(2.0)
    rows = [
        [(-a, -a), (0.0, -s), (a, -a)],
        [(-s, 0.0), (0.0, 0.0), (s, 0.0)],
        [(-a, a), (0.0, s), (a, a)],
    ]
    p = Patch(TensorBasis([QUAD, QUAD]), grid_points(rows), "disc_four_singularities",
              singular=True, singular_set="all four vertices")
    p.description = "disc-like biquadratic Bezier with vanishing Jacobian at the four corners"
    return p


def holed_plate_singular():
    # xi along the hole (degree 2, two spans), eta radial; the outer curve has a
    # repeated control point so its tangent vanishes at the plate corner (-4, 4)
    t = math.tan(math.pi / 8)
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    inner = [(-1.0, 0.0), (-1.0, t), (-t, 1.0), (0.0, 1.0)]
    outer = [(-4.0, 0.0), (-4.0, 4.0), (-4.0, 4.0), (0.0, 4.0)]
    p = Patch(TensorBasis([kv, LIN]), inner + outer, "holed_plate_singular",
              singular=True, singular_set="point (0.5, 1)")
    p.description = "quarter of a square plate with a circular hole; Jacobian vanishes at the plate corner"
    return p


def multipatch_strip_2():
    a = bilinear([(0, 0), (1, 0), (0, 1), (1, 1)], "left")
    b = bilinear([(1, 0), (2, 0), (1, 1), (2, 1)], "right")
    return MultipatchGeometry([a, b], "multipatch_strip_2", description="two unit squares sharing an edge")


def multipatch_square_2x2():
    patches = []
    for j in range(2):
        for i in range(2):
            patches.append(bilinear([(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)], f"q{i}{j}"))
    return MultipatchGeometry(patches, "multipatch_square_2x2", description="[0,2]^2 split into four unit squares")


def multipatch_star_5():
    def polar(r, deg):
        return (r * math.cos(math.radians(deg)), r * math.sin(math.radians(deg)))

    patches = []
    for k in range(5):
        tip = 90 + 72 * k
        patches.append(bilinear([(0.0, 0.0), polar(0.4, tip - 36), polar(0.4, tip + 36), polar(1.0, tip)], f"arm{k}"))
    return MultipatchGeometry(patches, "multipatch_star_5", description="five-pointed star, one bilinear patch per arm")


def multipatch_disc_5():
    c = 0.4
    R = 1.0
    d = R / math.sqrt(2.0)
    centre = bilinear([(-c, -c), (c, -c), (-c, c), (c, c)], "centre")
    patches = [centre]
    # each outer patch: xi from the square side to the arc, eta counter-clockwise
    for k, name in enumerate(["east", "north", "west", "south"]):
        rot = np.array([[0, -1], [1, 0]]) if k % 2 else np.eye(2)
        if k >= 2:
            rot = -rot
        inner = [(c, -c), (c, 0.0), (c, c)]
        outer = [(d, -d), (R * math.sqrt(2.0), 0.0), (d, d)]
        rows = [[rot @ np.array(i), rot @ np.array(o)] for i, o in zip(inner, outer)]
        patches.append(Patch(TensorBasis([LIN, QUAD]), grid_points(rows), name))
    return MultipatchGeometry(patches, "multipatch_disc_5", description="disc from a central square and four curved patches")


BUILDERS = [
    unit_square, unit_cube, quarter_annulus, kite_like, disc_one_singularity,
    disc_four_singularities, holed_plate_singular, multipatch_strip_2,
    multipatch_square_2x2, multipatch_star_5, multipatch_disc_5,
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for build in BUILDERS:
        geom = build()
        if isinstance(geom, MultipatchGeometry):
            space = build_multipatch_space(geom, 1, 1)
            geom.interfaces = [i.as_tuple() for i in space.interfaces]
        save_geometry(geom, OUT / f"{build.__name__}.json")
        print(f"wrote {build.__name__}.json")


if __name__ == "__main__":
    main()
