"""Legacy-format VTK output of nodal fields on the structured grid."""

from __future__ import annotations

import numpy as np


def _fmt(x):
    return "%.17g" % x


def write_vtk(mesh, u, w, path, title="okflow state"):
    """Write ``u`` and ``w`` as STRUCTURED_POINTS point data (ASCII).

    Vertices are already numbered x-fastest, which is the point order of
    the format, so no connectivity is written.
    """
    n1 = mesh.n + 1
    dims = [n1] * mesh.dim + [1] * (3 - mesh.dim)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN 0 0 0",
        "SPACING " + " ".join(_fmt(mesh.h) for _ in range(3)),
        f"POINT_DATA {mesh.num_vertices}",
    ]
    for name, values in (("u", u), ("w", w)):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.num_vertices,):
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({mesh.num_vertices},)")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in values)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path):
    """Parse a file written by :func:`write_vtk` into ``(dims, spacing, fields)``."""
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    dims = spacing = None
    fields = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("DIMENSIONS"):
            dims = tuple(int(t) for t in line.split()[1:])
        elif line.startswith("SPACING"):
            spacing = tuple(float(t) for t in line.split()[1:])
        elif line.startswith("POINT_DATA"):
            npts = int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            start = i + 2  # skip LOOKUP_TABLE
            fields[name] = np.array([float(t) for t in tokens[start:start + npts]])
            i = start + npts
            continue
        i += 1
    return dims, spacing, fields
