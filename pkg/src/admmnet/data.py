"""Synthetic phantoms, pseudo-radial masks, k-space simulation and the
on-disk container format.

The container is a little-endian binary file: magic bytes ``ADMMNET1``,
a record count, then typed-length-value records. Each record is

    u16 key length | key (utf-8) | u8 dtype code | u8 rank | rank * u64 dims | payload

with dtype codes 1=float64, 2=complex128, 3=bool (stored as u8), 4=int64,
5=raw bytes. Payloads are row-major little-endian. The format exists so
grids, masks, parameter bundles and datasets round-trip bit-exactly.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .signal import apply_mask, fft2_unitary, sampling_rate
from .validation import as_grid, as_mask

__all__ = [
    "pseudo_radial_mask",
    "make_phantom",
    "simulate_kspace",
    "Dataset",
    "make_dataset",
    "write_container",
    "read_container",
    "ContainerError",
    "write_pgm",
]

MAGIC = b"ADMMNET1"

_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<c16"), 3: np.dtype("u1"), 4: np.dtype("<i8")}
_CODES = {np.dtype("float64"): 1, np.dtype("complex128"): 2, np.dtype("bool"): 3, np.dtype("int64"): 4}


class ContainerError(IOError):
    """Raised on malformed, truncated or wrong-version container files."""


def _rasterize_lines(n, n_lines):
    """Boolean mask (centered layout) of ``n_lines`` diametral lines."""
    mask = np.zeros((n, n), dtype=bool)
    center = n // 2
    half_span = n / np.sqrt(2.0)
    ts_pos = np.arange(0.0, half_span + 0.25, 0.25)
    ts = np.concatenate([-ts_pos[:0:-1], ts_pos])  # symmetric about 0
    for j in range(n_lines):
        angle = j * np.pi / n_lines
        rows = np.rint(center + ts * np.sin(angle)).astype(int)
        cols = np.rint(center + ts * np.cos(angle)).astype(int)
        keep = (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
        mask[rows[keep], cols[keep]] = True
    return mask


def pseudo_radial_mask(n, target_rate):
    """Pseudo-radial sampling mask: rasterized diametral lines through the
    spectrum center at uniformly spaced angles.

    The line count is chosen by binary search so the achieved rate lands
    within one line's worth of ``target_rate``. The DC frequency (index
    (0, 0) of the returned, unshifted mask) is always kept. Deterministic
    for fixed inputs.
    """
    if n < 8:
        raise ValueError(f"grid size must be at least 8, got {n}")
    if not 0.01 < target_rate <= 1.0:
        raise ValueError(f"target rate must be in (0.01, 1], got {target_rate}")
    if target_rate == 1.0:
        return np.ones((n, n), dtype=bool)

    def rate(lines):
        return _rasterize_lines(n, lines).sum() / (n * n)

    # worst case for a single diametral line (diagonal): ~2n-1 pixels
    line_worth = (2.0 * n - 1.0) / (n * n)
    lo, hi = 1, 4 * n
    if rate(hi) < target_rate - line_worth:
        raise ValueError(f"rate {target_rate} unreachable with diametral lines")
    while lo < hi:
        mid = (lo + hi) // 2
        if rate(mid) >= target_rate:
            hi = mid
        else:
            lo = mid + 1
    # pick the neighbor count closest to the target
    best = min(
        range(max(1, lo - 2), lo + 2),
        key=lambda c: abs(rate(c) - target_rate),
    )
    achieved = rate(best)
    if abs(achieved - target_rate) > max(line_worth, 1e-9):
        raise ValueError(
            f"achieved rate {achieved:.4f} misses target {target_rate:.4f} "
            f"by more than one line's worth ({line_worth:.4f})"
        )
    return np.fft.ifftshift(_rasterize_lines(n, best))


def make_phantom(n, seed, with_phase=False):
    """Piecewise-smooth ellipse phantom with seed-controlled geometry.

    Magnitude is normalized to [0, 1]. With ``with_phase`` a smooth
    low-order phase field is attached, producing a genuinely complex
    image; otherwise the imaginary part is exactly zero.
    """
    rng = np.random.default_rng(seed)
    u, v = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    img = np.zeros((n, n))
    # enclosing "skull" ellipse plus a handful of interior structures
    img += 0.8 * (((u / 0.9) ** 2 + (v / 0.85) ** 2) <= 1.0)
    for _ in range(int(rng.integers(4, 9))):
        cu, cv = rng.uniform(-0.45, 0.45, size=2)
        au, av = rng.uniform(0.08, 0.4, size=2)
        ang = rng.uniform(0, np.pi)
        amp = rng.uniform(-0.6, 0.9)
        ru = (u - cu) * np.cos(ang) + (v - cv) * np.sin(ang)
        rv = -(u - cu) * np.sin(ang) + (v - cv) * np.cos(ang)
        img += amp * (((ru / au) ** 2 + (rv / av) ** 2) <= 1.0)
    img = np.clip(img, 0.0, None)
    peak = img.max()
    if peak > 0:
        img /= peak
    if not with_phase:
        return img.astype(np.complex128)
    coeff = rng.uniform(-1.0, 1.0, size=4)
    phase = (np.pi / 4.0) * (
        coeff[0] * u + coeff[1] * v + coeff[2] * u * v + coeff[3] * (u**2 - v**2)
    )
    return img * np.exp(1j * phase)


def simulate_kspace(xgt, mask, noise_sigma=0.0, seed=0):
    """Masked k-space of a ground-truth image with optional Gaussian noise.

    Noise with standard deviation ``noise_sigma`` is added independently
    to the real and imaginary parts of the full spectrum before masking.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise sigma must be nonnegative, got {noise_sigma}")
    xgt = as_grid(xgt, "ground truth")
    ksp = fft2_unitary(xgt)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        ksp = ksp + noise_sigma * (
            rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape)
        )
    return apply_mask(ksp, mask)


@dataclass
class Dataset:
    """Paired masked k-space / ground-truth samples sharing one mask."""

    y: np.ndarray      # (S, H, W) complex, zero off-mask
    xgt: np.ndarray    # (S, H, W) complex
    mask: np.ndarray   # (H, W) bool
    sampling_rate: float
    noise_sigma: float = 0.0

    def __len__(self):
        return self.y.shape[0]

    def sample(self, i):
        return self.y[i], self.xgt[i]


def make_dataset(
    n,
    n_samples,
    target_rate,
    seed,
    noise_sigma=0.0,
    noise_sigma_max=None,
    with_phase=False,
    mask=None,
):
    """Build a reproducible synthetic dataset.

    ``(seed, n, target_rate, noise settings)`` fully determine the result.
    With ``noise_sigma_max`` set, per-sample noise levels are drawn
    uniformly from ``[noise_sigma, noise_sigma_max]`` (the noisy-training
    regime); otherwise every sample uses ``noise_sigma``.
    """
    if mask is None:
        mask = pseudo_radial_mask(n, target_rate)
    mask = as_mask(mask)
    rng = np.random.default_rng(seed)
    ys, xs = [], []
    for i in range(n_samples):
        phantom_seed = int(rng.integers(0, 2**31 - 1))
        noise_seed = int(rng.integers(0, 2**31 - 1))
        sigma = noise_sigma
        if noise_sigma_max is not None:
            sigma = rng.uniform(noise_sigma, noise_sigma_max)
        xgt = make_phantom(n, phantom_seed, with_phase=with_phase)
        ys.append(simulate_kspace(xgt, mask, sigma, noise_seed))
        xs.append(xgt)
    return Dataset(
        y=np.stack(ys),
        xgt=np.stack(xs),
        mask=mask,
        sampling_rate=sampling_rate(mask),
        noise_sigma=noise_sigma if noise_sigma_max is None else noise_sigma_max,
    )


# ---------------------------------------------------------------------------
# container I/O


def _encode_record(key, value):
    if isinstance(value, bytes):
        payload = value
        code, dims = 5, (len(value),)
    else:
        arr = np.asarray(value)
        if arr.dtype == np.bool_:
            code = 3
            payload = arr.astype("u1").tobytes()
        elif arr.dtype.kind == "f":
            code = 1
            payload = arr.astype("<f8").tobytes()
        elif arr.dtype.kind == "c":
            code = 2
            payload = arr.astype("<c16").tobytes()
        elif arr.dtype.kind in "iu":
            code = 4
            payload = arr.astype("<i8").tobytes()
        else:
            raise ValueError(f"unsupported dtype {arr.dtype} for record '{key}'")
        dims = arr.shape
    key_b = key.encode("utf-8")
    head = struct.pack("<H", len(key_b)) + key_b + struct.pack("<BB", code, len(dims))
    head += struct.pack(f"<{len(dims)}Q", *dims)
    return head + payload


def write_container(path, records):
    """Write a mapping of names to arrays/bytes as a container file."""
    blob = MAGIC + struct.pack("<Q", len(records))
    for key, value in records.items():
        blob += _encode_record(key, value)
    with open(path, "wb") as fh:
        fh.write(blob)


def _take(buf, offset, size, what):
    if offset + size > len(buf):
        raise ContainerError(f"truncated container file while reading {what}")
    return buf[offset : offset + size], offset + size


def read_container(path):
    """Read a container file back into a dict of arrays/bytes."""
    with open(path, "rb") as fh:
        buf = fh.read()
    head, offset = _take(buf, 0, len(MAGIC), "magic bytes")
    if head != MAGIC:
        if head[: len(MAGIC) - 1] == MAGIC[:-1]:
            raise ContainerError(
                f"container version mismatch: got {head!r}, expected {MAGIC!r}"
            )
        raise ContainerError(f"not a container file (magic {head!r})")
    raw, offset = _take(buf, offset, 8, "record count")
    (count,) = struct.unpack("<Q", raw)
    records = {}
    for _ in range(count):
        raw, offset = _take(buf, offset, 2, "key length")
        (klen,) = struct.unpack("<H", raw)
        raw, offset = _take(buf, offset, klen, "key")
        key = raw.decode("utf-8")
        raw, offset = _take(buf, offset, 2, f"record header of '{key}'")
        code, rank = struct.unpack("<BB", raw)
        raw, offset = _take(buf, offset, 8 * rank, f"dims of '{key}'")
        dims = struct.unpack(f"<{rank}Q", raw)
        if code == 5:
            payload, offset = _take(buf, offset, dims[0], f"payload of '{key}'")
            records[key] = payload
            continue
        if code not in _DTYPES:
            raise ContainerError(f"unknown dtype code {code} for record '{key}'")
        dtype = _DTYPES[code]
        size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        payload, offset = _take(buf, offset, size, f"payload of '{key}'")
        arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
        if code == 3:
            arr = arr.astype(bool)
        records[key] = arr.copy()
    if offset != len(buf):
        raise ContainerError(f"{len(buf) - offset} trailing bytes after last record")
    return records


def dataset_to_records(ds):
    return {
        "y": ds.y,
        "xgt": ds.xgt,
        "mask": ds.mask,
        "sampling_rate": np.float64(ds.sampling_rate),
        "noise_sigma": np.float64(ds.noise_sigma),
    }


def dataset_from_records(records):
    return Dataset(
        y=records["y"],
        xgt=records["xgt"],
        mask=records["mask"],
        sampling_rate=float(records["sampling_rate"]),
        noise_sigma=float(records["noise_sigma"]),
    )


def write_pgm(path, image):
    """8-bit binary PGM of a magnitude image, scaled linearly from [0, max]."""
    mag = np.abs(np.asarray(image))
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    pixels = np.rint(mag * 255).astype("u1")
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + pixels.tobytes())
