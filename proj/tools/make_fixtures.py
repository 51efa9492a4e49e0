#!/usr/bin/env python3
"""Writes the small test fixtures under tests/fixtures.

Every fixture is produced here from first principles with the struct module,
independently of the C++ writer, so the reader is checked against bytes it did
not produce. Rerun after editing; the outputs are deterministic.

    python3 tools/make_fixtures.py [output_dir]
"""

import json
import pathlib
import struct
import sys


def nifti_header(dims, datatype, bitpix, pixdim, endian="<", slope=0.0, inter=0.0, vox_offset=352.0):
    h = bytearray(348)
    struct.pack_into(endian + "i", h, 0, 348)
    dim = [len(dims)] + list(dims) + [1] * (7 - len(dims))
    struct.pack_into(endian + "8h", h, 40, *dim)
    struct.pack_into(endian + "h", h, 70, datatype)
    struct.pack_into(endian + "h", h, 72, bitpix)
    pd = [1.0] + list(pixdim) + [0.0] * (7 - len(pixdim))
    struct.pack_into(endian + "8f", h, 76, *pd)
    struct.pack_into(endian + "f", h, 108, vox_offset)
    struct.pack_into(endian + "f", h, 112, slope)
    struct.pack_into(endian + "f", h, 116, inter)
    h[344:348] = b"n+1\x00"
    return bytes(h) + b"\x00" * 4


def ramp(n, step):
    return [i * step for i in range(n)]


def write_niftis(out):
    n = 4 * 4 * 4
    # float32, little endian, values 0, 0.5, 1.0, ... in x-fastest order.
    vals = ramp(n, 0.5)
    (out / "float32_4x4x4_le.nii").write_bytes(
        nifti_header((4, 4, 4), 16, 32, (1.0, 1.0, 3.0)) + struct.pack("<%df" % n, *vals))
    # Same content, big endian.
    (out / "float32_4x4x4_be.nii").write_bytes(
        nifti_header((4, 4, 4), 16, 32, (1.0, 1.0, 3.0), endian=">") + struct.pack(">%df" % n, *vals))
    # int16 with scaling: stored i, read back 2 * i + 1.
    (out / "int16_scaled_4x4x4.nii").write_bytes(
        nifti_header((4, 4, 4), 4, 16, (0.5, 0.5, 2.0), slope=2.0, inter=1.0) +
        struct.pack("<%dh" % n, *range(n)))
    # uint8 mask: voxel (x, y, z) set when x == y.
    mask = [1 if (i % 4) == ((i // 4) % 4) else 0 for i in range(n)]
    (out / "uint8_mask_4x4x4.nii").write_bytes(
        nifti_header((4, 4, 4), 2, 8, (1.0, 1.0, 1.0)) + bytes(mask))
    # 2-D image: dim[0] = 2, third axis defaults to 1.
    (out / "float32_3x2_2d.nii").write_bytes(
        nifti_header((3, 2), 16, 32, (2.0, 2.0)) + struct.pack("<6f", *ramp(6, 1.0)))


def metric_cases():
    """Hand-computed cases on a 6x6x6 grid; voxels listed as [x, y, z]."""
    return [
        {"name": "identical", "spacing": [1, 1, 1],
         "pred": [[1, 1, 1], [2, 1, 1]], "gt": [[1, 1, 1], [2, 1, 1]],
         "dice": 1.0, "h95": 0.0, "avd": 0.0, "recall": 1.0, "f1": 1.0},
        {"name": "disjoint_far", "spacing": [1, 1, 1],
         "pred": [[0, 0, 0]], "gt": [[5, 5, 5]],
         "dice": 0.0, "h95": 8.660254037844387, "avd": 0.0, "recall": 0.0, "f1": 0.0},
        {"name": "half_overlap", "spacing": [1, 1, 1],
         "pred": [[1, 1, 1], [2, 1, 1]], "gt": [[2, 1, 1], [3, 1, 1]],
         "dice": 0.5, "h95": 1.0, "avd": 0.0, "recall": 1.0, "f1": 1.0},
        {"name": "z_gap_isotropic", "spacing": [1, 1, 1],
         "pred": [[2, 2, 0]], "gt": [[2, 2, 3]],
         "dice": 0.0, "h95": 3.0, "avd": 0.0, "recall": 0.0, "f1": 0.0},
        {"name": "z_gap_anisotropic", "spacing": [1, 1, 3],
         "pred": [[2, 2, 0]], "gt": [[2, 2, 1]],
         "dice": 0.0, "h95": 3.0, "avd": 0.0, "recall": 0.0, "f1": 0.0},
        {"name": "one_of_two_lesions", "spacing": [1, 1, 1],
         "pred": [[0, 0, 0], [4, 4, 4]], "gt": [[0, 0, 0], [2, 2, 2]],
         "dice": 0.5, "h95": 3.4641016151377544, "avd": 0.0, "recall": 0.5, "f1": 0.5},
        {"name": "over_segmented", "spacing": [1, 1, 1],
         "pred": [[1, 1, 1], [2, 1, 1], [3, 1, 1], [4, 1, 1]], "gt": [[1, 1, 1], [2, 1, 1]],
         "dice": 2 * 2 / 6, "h95": 2.0, "avd": 100.0, "recall": 1.0, "f1": 1.0},
        {"name": "empty_prediction", "spacing": [1, 1, 1],
         "pred": [], "gt": [[1, 1, 1]],
         "dice": 0.0, "h95": None, "avd": 100.0, "recall": 0.0, "f1": 0.0},
        {"name": "both_empty", "spacing": [1, 1, 1],
         "pred": [], "gt": [],
         "dice": 1.0, "h95": None, "avd": None, "recall": 1.0, "f1": 1.0},
    ]


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else root / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    write_niftis(out)
    (out / "metric_cases.json").write_text(
        json.dumps({"grid": [6, 6, 6], "cases": metric_cases()}, indent=2) + "\n")


if __name__ == "__main__":
    main()
