"""AXIFIELD binary dumps and CSV export of fields.

Binary layout::

    16 bytes   magic  b"AXIFIELD" + 7 zero bytes + b"\\x01"
     4 bytes   header length N, unsigned little-endian
     N bytes   UTF-8 JSON {"n_r", "n_z", "r_max", "z_max"}
    8*n_r*n_z  float64 little-endian values, r outer, x3 inner
"""

import csv
import json
import struct

import numpy as np

from .errors import InvalidArgument
from .grid import Field, build_grid

MAGIC = b"AXIFIELD" + b"\x00" * 7 + b"\x01"


def dumps_field(u):
    g = u.grid
    header = json.dumps(
        {"n_r": g.n_r, "n_z": g.n_z, "r_max": g.r_max, "z_max": g.z_max}, sort_keys=True
    ).encode("utf-8")
    body = np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C")
    return MAGIC + struct.pack("<I", len(header)) + header + body


def loads_field(blob):
    if len(blob) < 20 or blob[:16] != MAGIC:
        raise InvalidArgument("not an AXIFIELD file (bad magic)")
    (n,) = struct.unpack("<I", blob[16:20])
    try:
        header = json.loads(blob[20 : 20 + n].decode("utf-8"))
        grid = build_grid(header["r_max"], header["z_max"], header["n_r"], header["n_z"])
    except (KeyError, ValueError) as exc:
        raise InvalidArgument(f"bad AXIFIELD header: {exc}") from exc
    body = blob[20 + n :]
    expected = 8 * grid.n_r * grid.n_z
    if len(body) != expected:
        raise InvalidArgument(f"AXIFIELD body has {len(body)} bytes, expected {expected}")
    values = np.frombuffer(body, dtype="<f8").reshape(grid.shape)
    return Field(grid, values)


def write_field(u, path):
    with open(path, "wb") as fh:
        fh.write(dumps_field(u))


def read_field(path):
    with open(path, "rb") as fh:
        return loads_field(fh.read())


def export_csv(u, path):
    """One row per node: r, x3, value."""
    R, Z = u.grid.mesh()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "x3", "value"])
        for r, z, v in zip(R.ravel(), Z.ravel(), u.values.ravel()):
            writer.writerow([repr(float(r)), repr(float(z)), repr(float(v))])
