"""Size-budgeted lossy compression of scalar fields.

Two codecs honor a shared parameter budget: a block uniform quantizer
(fixed-rate, ZFP-style sizing) and a tensor-product cubic B-spline fit.
A third sizing helper computes the layer width of a fully connected
neural field for a given budget; only the sizing is implemented.

Budget accounting is codec-specific and documented per codec:

* quantizer: parameters are counted in 32-bit words of payload.  Stored
  size is ``n_codes * bits + n_blocks * 128`` bits, where ``bits`` is the
  rate rounded up to an integer and each block carries a f64 min and a
  f64 scale.  Slack over the budget is therefore the rate ceiling
  (``(ceil(r) - r) * n / 32`` words), the two f64 headers per block
  (4 words each), and edge padding to full 4^d blocks.
* bspline: parameters are control points.  Slack is the half-up rounding
  of the per-axis sizing formulas plus the clamp to the spline order.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import ContractError, InputError
from .fields import ScalarGrid

BLOCK = 4
SPLINE_DEGREE = 3
SPLINE_ORDER = SPLINE_DEGREE + 1

CODECS = ("quantizer", "bspline")
_CODEC_CODE = {"quantizer": 0, "bspline": 1}
_CODEC_NAME = {v: k for k, v in _CODEC_CODE.items()}

RWC_MAGIC = b"RWC1"


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class CompressionBudget:
    """Parameter budget for one field: p = floor(tau * n)."""

    tau: float
    n: int
    p: int


def budget(tau, n):
    """Size a parameter budget from a compression ratio.

    tau = 0 allows no parameters at all; tau = 1 keeps one parameter
    per source value.
    """
    tau = float(tau)
    n = int(n)
    if not 0.0 <= tau <= 1.0:
        raise ContractError(f"tau must be in [0, 1], got {tau}")
    if n < 0:
        raise ContractError(f"value count must be >= 0, got {n}")
    p = int(math.floor(tau * n))
    return CompressionBudget(tau=tau, n=n, p=p)


def zfp_rate(p, n):
    """Average bits per value for p parameters over n values (32-bit units)."""
    if n <= 0:
        raise ContractError("rate needs a positive value count")
    return 32.0 * p / n


@dataclass
class CompressedField:
    """One compressed scalar field plus its region side-channel.

    payload holds the codec parameters; membership stores the region id
    of every original vertex so decompressed fields keep the exact same
    segmentation.
    """

    codec: str
    dims: tuple
    tau: float
    p: int
    payload: dict
    membership: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.codec not in CODECS:
            raise ContractError(f"unknown codec {self.codec!r}")
        self.dims = tuple(int(e) for e in self.dims)
        if self.membership is None:
            self.membership = np.zeros(0, dtype=np.uint32)
        else:
            self.membership = np.asarray(self.membership, dtype=np.uint32)


def _block_view(shaped, dims):
    # pad each axis up to a multiple of BLOCK with edge values, then
    # split into BLOCK^d cells; edge padding never widens a block's range
    ndim = len(dims)
    padded = tuple(-(-e // BLOCK) * BLOCK for e in dims)
    arr = np.pad(shaped, [(0, pe - e) for e, pe in zip(dims, padded)], mode="edge")
    nb = [pe // BLOCK for pe in padded]
    split = []
    for n_ax in nb:
        split.extend((n_ax, BLOCK))
    arr = arr.reshape(split)
    order = list(range(0, 2 * ndim, 2)) + list(range(1, 2 * ndim, 2))
    blocks = arr.transpose(order).reshape(-1, BLOCK**ndim)
    return blocks, padded, nb


def _block_unview(blocks, dims, padded, nb):
    ndim = len(dims)
    arr = blocks.reshape([n_ax for n_ax in nb] + [BLOCK] * ndim)
    inv = []
    for a in range(ndim):
        inv.extend((a, ndim + a))
    arr = arr.transpose(inv).reshape(padded)
    return arr[tuple(slice(0, e) for e in dims)]


def _pack_codes(codes, bits):
    shifts = np.arange(bits, dtype=np.uint64)
    bitmat = ((codes[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitmat.ravel())


def _unpack_codes(packed, count, bits):
    flat = np.unpackbits(packed, count=count * bits).astype(np.uint64)
    bitmat = flat.reshape(count, bits)
    shifts = np.arange(bits, dtype=np.uint64)
    return (bitmat << shifts).sum(axis=1)


def quantize(grid, rate, tau=None, p=None, membership=None):
    """Block uniform quantizer at ceil(rate) bits per value.

    Every 4^d block stores a f64 minimum and scale; codes are bit-packed.
    The reconstruction error within a block is at most the block's value
    range divided by 2^ceil(rate).
    """
    rate = float(rate)
    if not 0.0 <= rate <= 32.0:
        raise ContractError(f"rate must be in [0, 32], got {rate}")
    bits = int(math.ceil(rate))
    blocks, padded, nb = _block_view(grid.shaped(), grid.dims)
    mins = blocks.min(axis=1)
    scales = blocks.max(axis=1) - mins
    payload = {
        "bits": bits,
        "rate": rate,
        "mins": mins.astype(np.float64),
        "scales": scales.astype(np.float64),
    }
    if bits > 0:
        levels = float(2**bits)
        safe = np.where(scales > 0.0, scales, 1.0)
        q = np.floor((blocks - mins[:, None]) / safe[:, None] * levels)
        q = np.clip(q, 0.0, levels - 1.0).astype(np.uint64)
        q[scales == 0.0] = 0
        payload["codes"] = _pack_codes(q.ravel(), bits)
        payload["n_codes"] = q.size
    else:
        payload["codes"] = np.zeros(0, dtype=np.uint8)
        payload["n_codes"] = 0
    n = grid.size
    if tau is None:
        tau = rate / 32.0
    if p is None:
        p = int(math.floor(rate * n / 32.0))
    return CompressedField(
        codec="quantizer",
        dims=grid.dims,
        tau=float(tau),
        p=int(p),
        payload=payload,
        membership=membership,
    )


def dequantize(cf):
    """Invert quantize; always returns a grid of the original dims."""
    if cf.codec != "quantizer":
        raise ContractError(f"dequantize expects a quantizer field, got {cf.codec!r}")
    dims = cf.dims
    ndim = len(dims)
    padded = tuple(-(-e // BLOCK) * BLOCK for e in dims)
    nb = [pe // BLOCK for pe in padded]
    n_blocks = int(np.prod(nb))
    bsz = BLOCK**ndim
    mins = cf.payload["mins"]
    scales = cf.payload["scales"]
    bits = cf.payload["bits"]
    if bits > 0:
        levels = float(2**bits)
        codes = _unpack_codes(cf.payload["codes"], cf.payload["n_codes"], bits)
        codes = codes.reshape(n_blocks, bsz).astype(np.float64)
        rec = mins[:, None] + (codes + 0.5) * (scales[:, None] / levels)
        # constant blocks reconstruct exactly
        rec[scales == 0.0] = mins[scales == 0.0, None]
    else:
        rec = np.repeat(mins[:, None], bsz, axis=1)
    full = _block_unview(rec, dims, padded, nb)
    return ScalarGrid(dims=dims, values=full.reshape(-1), name="")


def bspline_dims(extents, p, d=None):
    """Control-grid dims for a budget of about p points, preserving aspect.

    Half-up rounding on each axis; every dim is clamped to the spline
    order so the fit below is never degenerate.
    """
    extents = tuple(int(e) for e in extents)
    if d is None:
        d = len(extents)
    if d != len(extents) or d not in (2, 3):
        raise ContractError(f"control grids are 2D or 3D, got {len(extents)} axes")
    if any(e <= 0 for e in extents):
        raise ContractError(f"extents must be positive, got {extents}")
    if p < 1:
        raise ContractError(f"budget must be >= 1 control point, got {p}")
    if d == 2:
        e0, e1 = (float(e) for e in extents)
        g1 = _round_half_up(math.sqrt(p * e1 / e0))
        g0 = _round_half_up((e0 / e1) * g1)
        dims = (g0, g1)
    else:
        e0, e1, e2 = (float(e) for e in extents)
        g2 = _round_half_up((p * e2 * e2 / (e0 * e1)) ** (1.0 / 3.0))
        g1 = _round_half_up((e1 / e2) * g2)
        g0 = _round_half_up((e0 / e2) * g2)
        dims = (g0, g1, g2)
    return tuple(max(g, SPLINE_ORDER) for g in dims)


def _spline_basis(extent, n_ctrl):
    # clamped uniform cubic knots on [0, 1]
    interior = np.linspace(0.0, 1.0, n_ctrl - SPLINE_DEGREE + 1)[1:-1]
    knots = np.concatenate(
        [
            np.zeros(SPLINE_ORDER),
            interior,
            np.ones(SPLINE_ORDER),
        ]
    )
    t = np.linspace(0.0, 1.0, extent) if extent > 1 else np.zeros(1)
    # clip the right endpoint inside the last span so the basis sums to 1
    t = np.minimum(t, 1.0 - 1e-12)
    return BSpline.design_matrix(t, knots, SPLINE_DEGREE).toarray()


def bspline_fit(grid, g, tau=None, p=None, membership=None):
    """Least-squares tensor-product cubic spline fit with g control points.

    Solved axis by axis; with full-column-rank bases the sequential
    solve is the exact minimizer of the separable normal equations.
    """
    g = tuple(int(x) for x in g)
    dims = grid.dims
    if len(g) != len(dims):
        raise ContractError(f"control dims {g} do not match grid axes {dims}")
    for ext, nc in zip(dims, g):
        if nc < SPLINE_ORDER:
            raise ContractError(f"need >= {SPLINE_ORDER} control points per axis, got {nc}")
        if nc > ext:
            raise ContractError(f"{nc} control points on an axis of extent {ext} is underdetermined")
    arr = grid.shaped().astype(np.float64)
    for ax in range(len(dims)):
        basis = _spline_basis(dims[ax], g[ax])
        arr = np.moveaxis(arr, ax, 0)
        lead = arr.shape[0]
        sol, *_ = np.linalg.lstsq(basis, arr.reshape(lead, -1), rcond=None)
        arr = np.moveaxis(sol.reshape((g[ax],) + arr.shape[1:]), 0, ax)
    n = grid.size
    if tau is None:
        tau = min(1.0, int(np.prod(g)) / n)
    if p is None:
        p = int(np.prod(g))
    payload = {"g": g, "coeffs": np.ascontiguousarray(arr, dtype=np.float64)}
    return CompressedField(
        codec="bspline",
        dims=dims,
        tau=float(tau),
        p=int(p),
        payload=payload,
        membership=membership,
    )


def bspline_eval(cf):
    """Reconstruct the original grid from a spline control lattice."""
    if cf.codec != "bspline":
        raise ContractError(f"bspline_eval expects a bspline field, got {cf.codec!r}")
    dims = cf.dims
    g = cf.payload["g"]
    arr = np.asarray(cf.payload["coeffs"], dtype=np.float64).reshape(g)
    for ax in range(len(dims)):
        basis = _spline_basis(dims[ax], g[ax])
        arr = np.moveaxis(arr, ax, 0)
        lead = arr.shape[0]
        out = basis @ arr.reshape(lead, -1)
        arr = np.moveaxis(out.reshape((dims[ax],) + arr.shape[1:]), 0, ax)
    return ScalarGrid(dims=dims, values=arr.reshape(-1), name="")


def decompress(cf):
    if cf.codec == "quantizer":
        return dequantize(cf)
    return bspline_eval(cf)


def stored_parameters(cf):
    """Stored parameter count in the codec's own unit (see module docstring)."""
    if cf.codec == "quantizer":
        bits = cf.payload["bits"]
        n_blocks = cf.payload["mins"].size
        total_bits = cf.payload["n_codes"] * bits + n_blocks * 2 * 64
        return total_bits / 32.0
    return float(int(np.prod(cf.payload["g"])))


def neural_width(l, d, p):
    """Hidden width k of an l-layer MLP with d inputs and about p weights.

    Solves (l-2)k^2 + (d+l)k + 1 - p = 0 for k with the quadratic formula
    and rounds half up; the realized count is within one width step of p.
    """
    l = int(l)
    d = int(d)
    p = int(p)
    if l < 3:
        raise ContractError(f"need at least 3 layers, got {l}")
    if p <= d + l:
        raise ContractError(f"budget {p} too small for d={d}, l={l}")
    a = l - 2
    b = d + l
    c = 1 - p
    disc = b * b - 4 * a * c
    if disc < 0:
        raise ContractError("negative discriminant in width sizing")
    k = _round_half_up((-b + math.sqrt(disc)) / (2 * a))
    return max(k, 1)


def neural_param_count(l, d, k):
    """Weights and biases of the sized MLP: input, l-2 hidden, scalar output."""
    return d * k + k + (l - 2) * (k * k + k) + k + 1


def compress_field(grid, tau, codec="quantizer", membership=None):
    """Compress one field under a ratio budget with the chosen codec."""
    b = budget(tau, grid.size)
    if codec == "quantizer":
        return quantize(
            grid, zfp_rate(b.p, b.n), tau=b.tau, p=b.p, membership=membership
        )
    if codec == "bspline":
        g = bspline_dims(grid.dims, max(b.p, 1))
        return bspline_fit(grid, g, tau=b.tau, p=b.p, membership=membership)
    raise ContractError(f"unknown codec {codec!r}")


def replace_region_values(pair, grid):
    """Rebind a region-aware pair to another grid of the same dims.

    Interior region values come from the new grid; the extremum value and
    the saddle value are kept exactly so the pair itself is unchanged.
    Used to measure how lossy compression degrades distances.
    """
    from .regions import RegionAwarePair

    if grid.dims != pair.grid.dims:
        raise ContractError("replacement grid dims differ from the region's grid")
    lo, hi = pair.bbox
    shaped = grid.shaped()
    box = shaped[tuple(slice(a, b + 1) for a, b in zip(lo, hi))]
    values = box.reshape(-1)[pair.mask.reshape(-1)].astype(np.float64)
    ext_off = tuple(c - a for c, a in zip(pair.extremum_coord, lo))
    flat_off = 0
    for off, (a, b) in zip(ext_off, zip(lo, hi)):
        flat_off = flat_off * (b - a + 1) + off
    pos = int(np.count_nonzero(pair.mask.reshape(-1)[:flat_off]))
    values[pos] = pair.pair.extremum_value
    return RegionAwarePair(
        pair=pair.pair,
        extremum_coord=pair.extremum_coord,
        bbox=pair.bbox,
        mask=pair.mask,
        values=values,
        saddle_value=pair.saddle_value,
        stride=pair.stride,
        grid=grid,
        full_size=pair.full_size,
    )


def save_rwc(cf, path):
    """Write the container: magic, codec tag, budget header, payload, membership."""
    head = struct.pack(
        "<4sBdQB",
        RWC_MAGIC,
        _CODEC_CODE[cf.codec],
        float(cf.tau),
        int(cf.p),
        len(cf.dims),
    )
    ext = np.asarray(cf.dims, dtype="<u4").tobytes()
    if cf.codec == "quantizer":
        pl = cf.payload
        body = struct.pack("<BdQ", pl["bits"], pl["rate"], pl["mins"].size)
        body += pl["mins"].astype("<f8").tobytes()
        body += pl["scales"].astype("<f8").tobytes()
        body += struct.pack("<QQ", pl["n_codes"], pl["codes"].size)
        body += pl["codes"].tobytes()
    else:
        pl = cf.payload
        body = np.asarray(pl["g"], dtype="<u4").tobytes()
        body += pl["coeffs"].astype("<f8").tobytes()
    memb = cf.membership.astype("<u4")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(ext)
        fh.write(struct.pack("<Q", len(body)))
        fh.write(body)
        fh.write(struct.pack("<Q", memb.size))
        fh.write(memb.tobytes())


def load_rwc(path):
    with open(path, "rb") as fh:
        raw = fh.read()

    def need(n, offset, what):
        if len(raw) < offset + n:
            raise InputError(f"truncated container: {what} at byte {offset}")

    need(22, 0, "header")
    magic, codec_code, tau, p, ndim = struct.unpack_from("<4sBdQB", raw, 0)
    if magic != RWC_MAGIC:
        raise InputError(f"bad magic at byte 0: {magic!r}")
    if codec_code not in _CODEC_NAME:
        raise InputError(f"unknown codec tag {codec_code} at byte 4")
    if ndim not in (1, 2, 3):
        raise InputError(f"bad axis count {ndim} at byte 21")
    off = 22
    need(4 * ndim, off, "extents")
    dims = tuple(int(x) for x in np.frombuffer(raw, dtype="<u4", count=ndim, offset=off))
    off += 4 * ndim
    need(8, off, "payload length")
    (body_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    need(body_len, off, "payload")
    body = raw[off : off + body_len]
    off += body_len
    codec = _CODEC_NAME[codec_code]
    if codec == "quantizer":
        bits, rate, n_blocks = struct.unpack_from("<BdQ", body, 0)
        pos = 17
        mins = np.frombuffer(body, dtype="<f8", count=n_blocks, offset=pos).astype(np.float64)
        pos += 8 * n_blocks
        scales = np.frombuffer(body, dtype="<f8", count=n_blocks, offset=pos).astype(np.float64)
        pos += 8 * n_blocks
        n_codes, packed_len = struct.unpack_from("<QQ", body, pos)
        pos += 16
        codes = np.frombuffer(body, dtype=np.uint8, count=packed_len, offset=pos).copy()
        payload = {
            "bits": bits,
            "rate": rate,
            "mins": mins,
            "scales": scales,
            "codes": codes,
            "n_codes": n_codes,
        }
    else:
        g = tuple(int(x) for x in np.frombuffer(body, dtype="<u4", count=ndim))
        coeffs = np.frombuffer(body, dtype="<f8", offset=4 * ndim).astype(np.float64)
        payload = {"g": g, "coeffs": coeffs}
    need(8, off, "membership length")
    (m_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    need(4 * m_len, off, "membership")
    memb = np.frombuffer(raw, dtype="<u4", count=m_len, offset=off).astype(np.uint32)
    return CompressedField(
        codec=codec, dims=dims, tau=tau, p=p, payload=payload, membership=memb
    )
