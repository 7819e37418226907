"""Model configuration, seeded weight initialization, and the archive format.

The update block (motion encoder, ConvGRU, flow head, mask head) exists
exactly once in an archive: both pyramid stages consume the same entries,
which is what makes the recurrent unit weight-shared by construction.

Archive layout (all little-endian):

    magic    4 bytes  b"PRFW"
    version  u16      currently 1
    config   5 x u32  feature_dim, hidden_dim, context_dim, levels, radius
    count    u32      number of manifest records
    records  per entry, sorted by name:
                 name_len u16, name utf-8,
                 ndim u8, dims ndim x u32,
                 offset u64 (bytes into the blob section)
    blob     raw float32 data, concatenated in record order
    crc      u32      zlib.crc32 of the blob section

Round-trips are bit-exact; the CRC is verified on load.
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ArchiveError, ConfigError

MAGIC = b"PRFW"
VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the network; everything else is derived from these."""

    feature_dim: int = 64
    hidden_dim: int = 48
    context_dim: int = 16
    levels: int = 4
    radius: int = 4

    def __post_init__(self):
        if min(self.feature_dim, self.hidden_dim, self.context_dim) < 2:
            raise ConfigError(f"channel dims too small: {self}")
        if self.feature_dim % 2:
            raise ConfigError("feature_dim must be even")
        if (self.hidden_dim + self.context_dim) % 2:
            raise ConfigError("hidden_dim + context_dim must be even")
        if self.levels < 1 or self.radius < 0:
            raise ConfigError(f"bad pyramid levels/radius: {self}")

    # Derived widths. fused/branch sizes scale with context_dim so the five
    # stored ints fully determine every tensor shape.
    @property
    def context_out(self):
        return self.hidden_dim + self.context_dim

    @property
    def lookup_channels(self):
        return self.levels * (2 * self.radius + 1) ** 2

    @property
    def fused_dim(self):
        return 2 * self.context_dim

    @property
    def motion_dim(self):
        return self.fused_dim + 2

    @property
    def corr_branch(self):
        return 4 * self.context_dim

    @property
    def flow_branch(self):
        return self.context_dim

    @property
    def gru_input(self):
        return self.context_dim + self.motion_dim

    @property
    def head_dim(self):
        return 2 * self.hidden_dim

    @property
    def upsample_factor(self):
        return 4

    @property
    def mask_channels(self):
        return 9 * self.upsample_factor**2


def _trunk_entries(prefix, out_dim):
    stem = out_dim // 2
    plan = {}
    widths = [(3, stem), (stem, stem), (stem, out_dim), (out_dim, out_dim),
              (out_dim, out_dim), (out_dim, out_dim)]
    names = ["stage1.conv1", "stage1.conv2", "stage2.conv1", "stage2.conv2",
             "stage3.conv1", "stage3.conv2"]
    for name, (cin, cout) in zip(names, widths):
        plan[f"{prefix}.{name}.weight"] = (cout, cin, 3, 3)
        plan[f"{prefix}.{name}.bias"] = (cout,)
    return plan


def expected_entries(config):
    """Map of every required entry name to its exact shape."""
    c = config
    plan = {}
    plan.update(_trunk_entries("fnet", c.feature_dim))
    plan.update(_trunk_entries("cnet", c.context_out))
    convs = {
        "update.motion.corr": (c.corr_branch, c.lookup_channels, 1, 1),
        "update.motion.flow": (c.flow_branch, 2, 3, 3),
        "update.motion.fuse": (c.fused_dim, c.corr_branch + c.flow_branch, 3, 3),
        "update.gru.convz": (c.hidden_dim, c.hidden_dim + c.gru_input, 3, 3),
        "update.gru.convr": (c.hidden_dim, c.hidden_dim + c.gru_input, 3, 3),
        "update.gru.convq": (c.hidden_dim, c.hidden_dim + c.gru_input, 3, 3),
        "update.flow.conv1": (c.head_dim, c.hidden_dim, 3, 3),
        "update.flow.conv2": (2, c.head_dim, 3, 3),
        "update.mask.conv1": (c.head_dim, c.hidden_dim, 3, 3),
        "update.mask.conv2": (c.mask_channels, c.head_dim, 1, 1),
    }
    for name, shape in convs.items():
        plan[f"{name}.weight"] = shape
        plan[f"{name}.bias"] = (shape[0],)
    return plan


class ModelWeights:
    """Named float32 tensors plus the config they were built for."""

    def __init__(self, config, entries):
        self.config = config
        self.entries = dict(entries)
        self._validate()

    def _validate(self):
        plan = expected_entries(self.config)
        missing = sorted(set(plan) - set(self.entries))
        extra = sorted(set(self.entries) - set(plan))
        if missing or extra:
            raise ArchiveError(
                f"archive entries do not match config: missing={missing[:4]} "
                f"extra={extra[:4]}"
            )
        for name, shape in plan.items():
            arr = self.entries[name]
            if tuple(arr.shape) != shape:
                raise ArchiveError(
                    f"entry {name} has shape {tuple(arr.shape)}, expected {shape}"
                )
            if arr.dtype != np.float32:
                raise ArchiveError(f"entry {name} is {arr.dtype}, expected float32")
            if not np.isfinite(arr).all():
                raise ArchiveError(f"entry {name} contains NaN or Inf")

    def get(self, name):
        try:
            return self.entries[name]
        except KeyError:
            raise ArchiveError(f"missing weight entry {name!r}") from None

    def checksum(self):
        """CRC32 over the blob exactly as the archive stores it."""
        crc = 0
        for name in sorted(self.entries):
            crc = zlib.crc32(
                np.ascontiguousarray(self.entries[name], dtype="<f4").tobytes(), crc
            )
        return crc


def init_weights(config, seed):
    """Fan-in-scaled uniform init, bitwise deterministic per (config, seed).

    Conv weights draw from U(-sqrt(6/fan_in), +sqrt(6/fan_in)); biases are
    zero.
    """
    rng = np.random.default_rng(seed)
    entries = {}
    for name, shape in sorted(expected_entries(config).items()):
        if name.endswith(".bias"):
            entries[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            entries[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return ModelWeights(config, entries)


def write_archive(weights):
    """Serialize to the PRFW byte layout."""
    c = weights.config
    header = bytearray()
    header += MAGIC
    header += struct.pack("<H", VERSION)
    header += struct.pack(
        "<5I", c.feature_dim, c.hidden_dim, c.context_dim, c.levels, c.radius
    )
    names = sorted(weights.entries)
    header += struct.pack("<I", len(names))

    blob = bytearray()
    for name in names:
        arr = np.ascontiguousarray(weights.entries[name], dtype="<f4")
        raw = name.encode("utf-8")
        header += struct.pack("<H", len(raw)) + raw
        header += struct.pack("<B", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        header += struct.pack("<Q", len(blob))
        blob += arr.tobytes()
    return bytes(header) + bytes(blob) + struct.pack("<I", zlib.crc32(bytes(blob)))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise ArchiveError(f"archive truncated while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_archive(data):
    """Parse PRFW bytes back into ModelWeights, verifying the CRC."""
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise ArchiveError("bad archive magic")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise ArchiveError(f"unsupported archive version {version}")
    d, dh, dc, levels, radius = r.unpack("<5I", "config")
    try:
        config = ModelConfig(
            feature_dim=d, hidden_dim=dh, context_dim=dc, levels=levels, radius=radius
        )
    except ConfigError as exc:
        raise ArchiveError(f"archive config invalid: {exc}") from exc

    (count,) = r.unpack("<I", "manifest count")
    records = []
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        (ndim,) = r.unpack("<B", "ndim")
        dims = r.unpack(f"<{ndim}I", "dims")
        (offset,) = r.unpack("<Q", "offset")
        records.append((name, dims, offset))

    blob_len = max(
        (offset + int(np.prod(dims)) * 4 for _, dims, offset in records), default=0
    )
    blob = r.take(blob_len, "blob")
    (stored_crc,) = r.unpack("<I", "crc")
    if r.pos != len(data):
        raise ArchiveError(f"{len(data) - r.pos} trailing bytes after archive")
    if zlib.crc32(blob) != stored_crc:
        raise ArchiveError("archive checksum mismatch")

    entries = {}
    for name, dims, offset in records:
        nbytes = int(np.prod(dims)) * 4
        if offset + nbytes > len(blob):
            raise ArchiveError(f"entry {name!r} overruns the blob")
        arr = np.frombuffer(blob, dtype="<f4", count=int(np.prod(dims)), offset=offset)
        entries[name] = arr.reshape(dims).astype(np.float32)
    return ModelWeights(config, entries)


def save(weights, path):
    with open(path, "wb") as fh:
        fh.write(write_archive(weights))


def load(path):
    with open(path, "rb") as fh:
        return read_archive(fh.read())
