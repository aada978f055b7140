"""Writes golden_2x2x2.nii from the NIfTI-1 field layout, independently of the
C++ writer. Volume: int16 values 0..7 (x fastest), affine diag(-0.7, 0.7, 2.5)
with origin (10, -20, 30)."""
import struct
import sys

hdr = bytearray(348)
struct.pack_into("<i", hdr, 0, 348)                  # sizeof_hdr
hdr[38] = ord("r")                                   # regular
struct.pack_into("<8h", hdr, 40, 3, 2, 2, 2, 1, 1, 1, 1)  # dim
struct.pack_into("<h", hdr, 70, 4)                   # datatype int16
struct.pack_into("<h", hdr, 72, 16)                  # bitpix
struct.pack_into("<8f", hdr, 76, 1.0, 0.7, 0.7, 2.5, 1, 1, 1, 1)  # pixdim
struct.pack_into("<f", hdr, 108, 352.0)              # vox_offset
struct.pack_into("<f", hdr, 112, 1.0)                # scl_slope
struct.pack_into("<f", hdr, 116, 0.0)                # scl_inter
hdr[123] = 2                                         # xyzt_units: mm
hdr[148:152] = b"ctqa"                               # descrip
struct.pack_into("<h", hdr, 252, 0)                  # qform_code
struct.pack_into("<h", hdr, 254, 1)                  # sform_code
struct.pack_into("<4f", hdr, 280, -0.7, 0.0, 0.0, 10.0)
struct.pack_into("<4f", hdr, 296, 0.0, 0.7, 0.0, -20.0)
struct.pack_into("<4f", hdr, 312, 0.0, 0.0, 2.5, 30.0)
hdr[344:348] = b"n+1\0"

data = bytes(hdr) + bytes(4) + struct.pack("<8h", *range(8))
with open(sys.argv[1] if len(sys.argv) > 1 else "golden_2x2x2.nii", "wb") as f:
    f.write(data)
