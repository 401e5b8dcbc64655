"""QUSD sample container, dataset manifest, and reproducible generation.

Container layout (all integers little-endian):

    magic "QUSD" | u32 version=1 | u32 metadata bytes | UTF-8 JSON metadata
    | u32 tensor count | per tensor: u16 name bytes, name, u8 dtype code
    (0 = float32, 1 = uint8), u8 ndim, ndim * u32 dims, row-major payload

The manifest is JSON with SHA-256 digests of every sample file, the master
seed, and the parameter ranges used, so datasets are verifiable and the
train/test split hygiene is checkable offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import phantom, simulator
from .errors import (
    BadMagicError,
    ConfigurationError,
    DataFormatError,
    DigestMismatchError,
    QusError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .grid import GridSpec
from .phantom import (
    FDS_DENSITY_RANGE,
    MU_S_RANGE,
    SIGMA_S_FIXED,
    UDS_DENSITY_RANGE,
    RegionAssignment,
    ShapeConfig,
    generate_region_masks,
    sample_scatterer_map,
)
from .simulator import (
    build_psf,
    detect_envelope,
    grid_for_params,
    log_compress,
    sample_imaging_params,
    simulate_rf,
)
from .stats import WindowSpec, parametric_image

MAGIC = b"QUSD"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

_DTYPE_F32 = 0
_DTYPE_U8 = 1

_SPLIT_CODES = {"train": 0, "test": 1}
_MASK_SEED_TAG = 11
_SIM_SEED_TAG = 12
_ASSIGN_STREAM = 5

MASK_TENSORS = ("sc_mask", "ms_mask")


class GenerationError(QusError):
    """A sample failed during dataset generation; carries the failing index."""

    def __init__(self, split: str, index: int, cause: Exception):
        super().__init__(f"sample {split}/{index} failed: {cause}")
        self.split = split
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class SampleRecord:
    """Named tensors plus a JSON-able metadata document."""

    tensors: dict
    meta: dict

    def __post_init__(self):
        for name in MASK_TENSORS:
            if name in self.tensors and not np.isin(self.tensors[name], (0, 1)).all():
                raise ConfigurationError(f"{name} must contain only 0 and 1")


@dataclass(frozen=True)
class GenerateConfig:
    """Knobs for dataset generation (desk-scale defaults)."""

    n_axial: int = 256
    n_lateral: int = 256
    d_lateral: float = 0.15
    test_fraction: float = 1.0 / 6.0
    shapes: ShapeConfig = field(default_factory=ShapeConfig)
    with_nakagami: bool = True
    nakagami_window: WindowSpec = field(
        default_factory=lambda: WindowSpec(32, 32, 8, 8, min_cell_multiple=0.0)
    )
    dynamic_range_db: float = simulator.DEFAULT_DYNAMIC_RANGE_DB

    def __post_init__(self):
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigurationError("test_fraction must be in [0, 1)")


# ---------------------------------------------------------------------------
# container serialization


def _serialize(record: SampleRecord) -> bytes:
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    meta_blob = json.dumps(record.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(struct.pack("<I", len(meta_blob)))
    parts.append(meta_blob)
    parts.append(struct.pack("<I", len(record.tensors)))
    for name, arr in record.tensors.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.dtype("<f4"):
            code = _DTYPE_F32
        elif arr.dtype == np.uint8:
            code = _DTYPE_U8
        else:
            raise ConfigurationError(
                f"tensor {name!r} has dtype {arr.dtype}; only float32 and uint8 are stored"
            )
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ConfigurationError("tensor name too long")
        if arr.ndim > 0xFF:
            raise ConfigurationError("tensor rank too large")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Cursor:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"file ends at byte {len(self.blob)} but {self.pos + n} are needed"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]


def _deserialize(blob: bytes) -> SampleRecord:
    cur = _Cursor(blob)
    if cur.take(4) != MAGIC:
        raise BadMagicError("not a QUSD file (bad magic)")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported QUSD version {version}")
    meta_len = cur.u32()
    try:
        meta = json.loads(cur.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"corrupt metadata block: {e}") from e
    n_tensors = cur.u32()
    tensors = {}
    for _ in range(n_tensors):
        name = cur.take(cur.u16()).decode("utf-8")
        code = cur.u8()
        ndim = cur.u8()
        dims = struct.unpack(f"<{ndim}I", cur.take(4 * ndim))
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        if code == _DTYPE_F32:
            dtype, itemsize = np.dtype("<f4"), 4
        elif code == _DTYPE_U8:
            dtype, itemsize = np.dtype(np.uint8), 1
        else:
            raise DataFormatError(f"unknown dtype code {code} for tensor {name!r}")
        payload = cur.take(count * itemsize)
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if cur.pos != len(blob):
        raise DataFormatError(f"{len(blob) - cur.pos} trailing bytes after last tensor")
    return SampleRecord(tensors=tensors, meta=meta)


def _atomic_write(path: Path, blob: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)


def write_sample(record: SampleRecord, path) -> None:
    """Serialize a record to a QUSD file (atomic: temp name then rename)."""
    _atomic_write(Path(path), _serialize(record))


def read_sample(path) -> SampleRecord:
    """Read a QUSD file back; raises DataFormatError subclasses on damage."""
    with open(path, "rb") as f:
        return _deserialize(f.read())


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class Manifest:
    format_version: int
    n_samples: int
    master_seed: int
    parameter_ranges: dict
    samples: list

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "n_samples": self.n_samples,
            "master_seed": self.master_seed,
            "parameter_ranges": self.parameter_ranges,
            "samples": self.samples,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            doc = json.loads(text)
            return cls(
                format_version=int(doc["format_version"]),
                n_samples=int(doc["n_samples"]),
                master_seed=int(doc["master_seed"]),
                parameter_ranges=doc["parameter_ranges"],
                samples=list(doc["samples"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise DataFormatError(f"corrupt manifest: {e}") from e

    def entries(self, split: str | None = None) -> list:
        if split is None:
            return list(self.samples)
        return [s for s in self.samples if s["split"] == split]

    def verify(self, base_dir) -> None:
        base = Path(base_dir)
        if len(self.samples) != self.n_samples:
            raise DataFormatError("manifest sample count does not match n_samples")
        for entry in self.samples:
            digest = hashlib.sha256((base / entry["file"]).read_bytes()).hexdigest()
            if digest != entry["sha256"]:
                raise DigestMismatchError(f"digest mismatch for {entry['file']}")


def load_manifest(path) -> Manifest:
    return Manifest.from_json(Path(path).read_text(encoding="utf-8"))


def iter_split(manifest: Manifest, base_dir, split: str, verify: bool = True):
    """Yield SampleRecords of one split in index order."""
    base = Path(base_dir)
    for entry in sorted(manifest.entries(split), key=lambda e: e["index"]):
        path = base / entry["file"]
        blob = path.read_bytes()
        if verify:
            digest = hashlib.sha256(blob).hexdigest()
            if digest != entry["sha256"]:
                raise DigestMismatchError(f"digest mismatch for {entry['file']}")
        yield _deserialize(blob)


# ---------------------------------------------------------------------------
# generation


def _derived_seed(master_seed: int, split_code: int, index: int, tag: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), split_code, index, tag])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def sample_region_assignment(rng: np.random.Generator) -> tuple[RegionAssignment, int]:
    """Draw one UDS and one FDS density, randomly assigned to mask labels.

    Returns the assignment and the sc-mask value that carries the FDS
    density (the segmentation ground truth).
    """
    uds = rng.uniform(*UDS_DENSITY_RANGE)
    fds = rng.uniform(*FDS_DENSITY_RANGE)
    mu = (rng.uniform(*MU_S_RANGE), rng.uniform(*MU_S_RANGE))
    fds_label = int(rng.integers(0, 2))
    dens = (uds, fds) if fds_label == 1 else (fds, uds)
    return RegionAssignment(density_per_cell=dens, mu_s=mu, sigma_s=SIGMA_S_FIXED), fds_label


def synthesize_record(
    seed: int,
    cfg: GenerateConfig,
    *,
    split: str = "train",
    index: int = 0,
    params=None,
    density: float | None = None,
    mu_s: float = 1.0,
) -> SampleRecord:
    """Run the per-sample pipeline, deterministic in (seed, split, index).

    With ``density`` set, the phantom is homogeneous at that density
    (masks all zero); otherwise random region masks and a random UDS/FDS
    assignment are drawn. ``params`` overrides the sampled acquisition.
    """
    split_code = _SPLIT_CODES[split]
    mask_seed = _derived_seed(seed, split_code, index, _MASK_SEED_TAG)
    sim_seed = _derived_seed(seed, split_code, index, _SIM_SEED_TAG)

    if params is None:
        params = sample_imaging_params(sim_seed)
    grid = grid_for_params(params, cfg.n_axial, cfg.n_lateral, cfg.d_lateral)
    if density is None:
        masks = generate_region_masks(mask_seed, grid, cfg.shapes)
        assign, fds_label = sample_region_assignment(
            np.random.default_rng(np.random.SeedSequence([sim_seed, _ASSIGN_STREAM]))
        )
    else:
        zeros = np.zeros(grid.shape, dtype=np.uint8)
        masks = phantom.RegionMasks(sc=zeros, ms=zeros)
        assign = RegionAssignment(
            density_per_cell=(density, density), mu_s=(mu_s, mu_s), sigma_s=SIGMA_S_FIXED
        )
        # homogeneous phantom: the all-zero mask is the FDS class iff the
        # density is above the fully-developed threshold
        fds_label = 0 if density >= 10.0 else 1
    smap = sample_scatterer_map(masks, assign, params.sigma_a, params.sigma_l, grid, sim_seed)
    psf = build_psf(params, grid)
    rf = simulate_rf(smap, psf, params, sim_seed)
    env = detect_envelope(rf)
    bmode = log_compress(env, cfg.dynamic_range_db)

    tensors = {
        "rf": rf.data.astype("<f4"),
        "env": env.data.astype("<f4"),
        "bmode": bmode.data.astype("<f4"),
        "sc_mask": masks.sc.astype(np.uint8),
        "ms_mask": masks.ms.astype(np.uint8),
    }
    meta = {
        "kind": "sample",
        "grid": grid.to_dict(),
        "imaging_params": params.to_dict(),
        "assignment": assign.to_dict(),
        "fds_label": fds_label,
        "seeds": {"mask_seed": mask_seed, "sim_seed": sim_seed},
        "split": split,
        "index": index,
    }
    if cfg.with_nakagami:
        nak = parametric_image(env, cfg.nakagami_window, "nakagami_m")
        tensors["nakagami_m"] = nak.values.astype("<f4")
        meta["nakagami_window"] = cfg.nakagami_window.to_dict()
    return SampleRecord(tensors=tensors, meta=meta)


def synthesize_sample(
    master_seed: int, split: str, index: int, cfg: GenerateConfig
) -> SampleRecord:
    """Dataset-generation entry: fully random sample for (seed, split, index)."""
    return synthesize_record(master_seed, cfg, split=split, index=index)


def _parameter_ranges() -> dict:
    return {
        "f_c_mhz": list(simulator.FC_RANGE),
        "f_s_mhz": list(simulator.FS_RANGE),
        "v_m_s": list(simulator.V_RANGE),
        "sigma_a_mm": list(simulator.SIGMA_A_RANGE),
        "sigma_l_mm": list(simulator.SIGMA_L_RANGE),
        "f_number": list(simulator.F_NUMBER_RANGE),
        "n_pulses": list(simulator.N_PULSES_CHOICES),
        "noise_std": list(simulator.NOISE_STD_RANGE),
        "uds_density": list(UDS_DENSITY_RANGE),
        "fds_density": list(FDS_DENSITY_RANGE),
        "mu_s": list(MU_S_RANGE),
        "sigma_s": SIGMA_S_FIXED,
    }


def generate_dataset(
    cfg: GenerateConfig, n: int, master_seed: int, out_dir, threads: int = 1
) -> Manifest:
    """Generate n samples plus a manifest; bytes are independent of threads.

    The train/test split uses disjoint mask-seed streams. Sample files are
    written under temporary names and renamed; the manifest is written only
    after every sample succeeded. On failure all files produced by this
    call are removed.
    """
    if n < 1:
        raise ConfigurationError("need at least one sample")
    if threads < 1:
        raise ConfigurationError("threads must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    n_test = int(round(n * cfg.test_fraction))
    n_train = n - n_test
    jobs = [("train", i) for i in range(n_train)] + [("test", i) for i in range(n_test)]

    produced: list[Path] = []

    def run_job(job):
        split, index = job
        try:
            record = synthesize_sample(master_seed, split, index, cfg)
            blob = _serialize(record)
            name = f"{split}_{index:05d}.qusd"
            _atomic_write(out / name, blob)
            return {
                "file": name,
                "index": index,
                "split": split,
                "mask_seed": record.meta["seeds"]["mask_seed"],
                "sha256": hashlib.sha256(blob).hexdigest(),
            }
        except Exception as e:  # noqa: BLE001 - reported with the failing index
            raise GenerationError(split, index, e) from e

    try:
        if threads == 1:
            entries = [run_job(j) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                entries = list(pool.map(run_job, jobs))
        for entry in entries:
            produced.append(out / entry["file"])
    except GenerationError:
        for split, index in jobs:
            for suffix in ("", ".tmp"):
                p = out / f"{split}_{index:05d}.qusd{suffix}"
                if p.exists():
                    p.unlink()
        raise

    entries.sort(key=lambda e: (_SPLIT_CODES[e["split"]], e["index"]))
    manifest = Manifest(
        format_version=FORMAT_VERSION,
        n_samples=len(entries),
        master_seed=int(master_seed),
        parameter_ranges=_parameter_ranges(),
        samples=entries,
    )
    _atomic_write(out / MANIFEST_NAME, manifest.to_json().encode("utf-8"))
    return manifest
