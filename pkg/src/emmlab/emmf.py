"""Reading and writing lattice fields in the EMMF v1 text format.

Layout (all text, one record per line):

    EMMF 1
    <n> <p>
    <shape_1> ... <shape_n>
    <origin_1> ... <origin_n>
    <spacing>
    one node per line, row-major: p reals, or the single token X for a
    masked node

Reals are written with 17 significant digits so float64 round-trips
exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import FieldFormatError
from .fields import (
    ExclusionMask,
    GridDomain,
    GridField,
    SPHERE_TOL,
    UNCONSTRAINED,
    UNIT_SPHERE,
)

MAGIC = "EMMF"
VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(field: GridField, path) -> None:
    dom = field.domain
    excl = field.excluded.reshape(-1)
    vals = field.values.reshape(-1, field.dim_p)
    lines = [
        f"{MAGIC} {VERSION}",
        f"{dom.dim_n} {field.dim_p}",
        " ".join(str(s) for s in dom.shape),
        " ".join(_fmt(x) for x in dom.origin),
        _fmt(dom.spacing),
    ]
    for i in range(vals.shape[0]):
        lines.append("X" if excl[i] else " ".join(_fmt(v) for v in vals[i]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_field(path) -> GridField:
    """Parse an EMMF v1 file.

    The sphere constraint is not stored in the format; it is re-detected:
    a field whose unmasked values all have unit norm within 1e-12 comes
    back tagged ``unit_sphere``.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 5:
        raise FieldFormatError("truncated EMMF file: header incomplete")
    head = lines[0].split()
    if head != [MAGIC, str(VERSION)]:
        raise FieldFormatError(f"bad magic line {lines[0]!r}, expected 'EMMF 1'")
    try:
        n, p = (int(t) for t in lines[1].split())
        shape = tuple(int(t) for t in lines[2].split())
        origin = np.array([float(t) for t in lines[3].split()])
        spacing = float(lines[4])
    except ValueError as exc:
        raise FieldFormatError(f"malformed EMMF header: {exc}") from exc
    if len(shape) != n or origin.shape != (n,):
        raise FieldFormatError("EMMF header dimensions are inconsistent")

    domain = GridDomain(dim_n=n, origin=origin, spacing=spacing, shape=shape)
    count = domain.node_count
    body = lines[5:]
    if len(body) < count:
        raise FieldFormatError(f"expected {count} node lines, found {len(body)}")
    if any(line.strip() for line in body[count:]):
        raise FieldFormatError("trailing non-empty lines after node records")

    vals = np.zeros((count, p))
    excl = np.zeros(count, dtype=bool)
    for i in range(count):
        line = body[i].strip()
        if line == "X":
            excl[i] = True
            continue
        parts = line.split()
        if len(parts) != p:
            raise FieldFormatError(f"node line {i} has {len(parts)} entries, expected {p}")
        try:
            vals[i] = [float(t) for t in parts]
        except ValueError as exc:
            raise FieldFormatError(f"node line {i}: {exc}") from exc

    mask = ExclusionMask(excl.reshape(shape)) if excl.any() else None
    unmasked = vals[~excl]
    on_sphere = unmasked.size > 0 and bool(
        np.all(np.abs(np.linalg.norm(unmasked, axis=1) - 1.0) <= SPHERE_TOL)
    )
    return GridField(
        domain=domain,
        dim_p=p,
        values=vals.reshape(shape + (p,)),
        constraint=UNIT_SPHERE if on_sphere else UNCONSTRAINED,
        mask=mask,
    )
