"""QUSD container byte format, manifest integrity, generation determinism."""

import hashlib
import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qusgrid import (
    BadMagicError,
    ConfigurationError,
    DataFormatError,
    DigestMismatchError,
    GenerateConfig,
    ShapeConfig,
    TruncatedFileError,
    UnsupportedVersionError,
    generate_dataset,
    iter_split,
    load_manifest,
    read_sample,
    synthesize_record,
    write_sample,
)
from qusgrid.qusd import GenerationError, MANIFEST_NAME, SampleRecord, _serialize
from qusgrid.simulator import (
    FC_RANGE,
    FS_RANGE,
    N_PULSES_CHOICES,
    NOISE_STD_RANGE,
    SIGMA_A_RANGE,
    SIGMA_L_RANGE,
    V_RANGE,
)

FAST_CFG = GenerateConfig(n_axial=64, n_lateral=64, d_lateral=0.2, with_nakagami=False)


def _record():
    rng = np.random.default_rng(0)
    return SampleRecord(
        tensors={
            "env": rng.random((32, 16)).astype("<f4"),
            "sc_mask": (rng.random((32, 16)) > 0.5).astype(np.uint8),
        },
        meta={"kind": "sample", "note": "fixture", "value": 1.25},
    )


class TestContainer:
    def test_round_trip_bit_identical(self, tmp_path):
        record = synthesize_record(3, GenerateConfig(n_axial=256, n_lateral=256))
        path = tmp_path / "a.qusd"
        write_sample(record, path)
        back = read_sample(path)
        assert back.meta == record.meta
        assert set(back.tensors) == set(record.tensors)
        for name, arr in record.tensors.items():
            assert back.tensors[name].dtype == arr.dtype
            np.testing.assert_array_equal(back.tensors[name], arr)
        # writing the read-back record reproduces the same bytes
        write_sample(back, tmp_path / "b.qusd")
        assert (tmp_path / "a.qusd").read_bytes() == (tmp_path / "b.qusd").read_bytes()

    def test_rejects_unsupported_dtype(self, tmp_path):
        rec = SampleRecord(tensors={"x": np.zeros((4, 4))}, meta={})
        with pytest.raises(ConfigurationError):
            write_sample(rec, tmp_path / "x.qusd")

    def test_mask_values_validated(self):
        with pytest.raises(ConfigurationError):
            SampleRecord(tensors={"sc_mask": np.full((4, 4), 2, dtype=np.uint8)}, meta={})

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.qusd"
        write_sample(_record(), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_sample(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "x.qusd"
        write_sample(_record(), path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedVersionError):
            read_sample(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "x.qusd"
        write_sample(_record(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 100])
        with pytest.raises(TruncatedFileError):
            read_sample(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "x.qusd"
        write_sample(_record(), path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(DataFormatError):
            read_sample(path)

    def test_unknown_dtype_code(self, tmp_path):
        record = SampleRecord(tensors={"x": np.zeros((2, 2), dtype="<f4")}, meta={})
        blob = bytearray(_serialize(record))
        # dtype code sits right after the 1-char tensor name
        idx = blob.index(b"\x01\x00x") + 3
        blob[idx] = 7
        path = tmp_path / "x.qusd"
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError):
            read_sample(path)

    def test_corrupt_metadata(self, tmp_path):
        record = _record()
        blob = bytearray(_serialize(record))
        blob[12] = 0xFF  # first metadata byte: breaks JSON/UTF-8
        path = tmp_path / "x.qusd"
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError):
            read_sample(path)

    @settings(max_examples=25, deadline=None)
    @given(
        names=st.lists(
            st.text(
                alphabet=st.characters(min_codepoint=33, max_codepoint=0x2FFF),
                min_size=1,
                max_size=12,
            ),
            min_size=1,
            max_size=4,
            unique=True,
        ),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_round_trip_random_tensors(self, names, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        tensors = {}
        for k, name in enumerate(names):
            if k % 2:
                tensors[name] = rng.integers(0, 2, size=(3, 5), dtype=np.uint8)
            else:
                tensors[name] = rng.random((4, 2, 3)).astype("<f4")
        rec = SampleRecord(tensors=tensors, meta={"names": sorted(names)})
        path = tmp_path_factory.mktemp("rt") / "r.qusd"
        write_sample(rec, path)
        back = read_sample(path)
        assert list(back.tensors) == list(tensors)
        for name in tensors:
            np.testing.assert_array_equal(back.tensors[name], tensors[name])


class TestGenerateDataset:
    def test_deterministic_across_runs(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_dataset(FAST_CFG, 6, master_seed=99, out_dir=d1)
        generate_dataset(FAST_CFG, 6, master_seed=99, out_dir=d2)
        files = sorted(p.name for p in d1.iterdir())
        assert files == sorted(p.name for p in d2.iterdir())
        for name in files:
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_threads_do_not_change_bytes(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_dataset(FAST_CFG, 6, master_seed=7, out_dir=d1, threads=1)
        generate_dataset(FAST_CFG, 6, master_seed=7, out_dir=d2, threads=3)
        for name in sorted(p.name for p in d1.iterdir()):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_manifest_contents_and_split_hygiene(self, tmp_path):
        manifest = generate_dataset(FAST_CFG, 12, master_seed=5, out_dir=tmp_path)
        assert manifest.n_samples == 12
        train = manifest.entries("train")
        test = manifest.entries("test")
        assert len(train) == 10 and len(test) == 2
        train_seeds = {e["mask_seed"] for e in train}
        test_seeds = {e["mask_seed"] for e in test}
        assert train_seeds.isdisjoint(test_seeds)
        manifest.verify(tmp_path)
        reloaded = load_manifest(tmp_path / MANIFEST_NAME)
        assert reloaded == manifest

    def test_sampled_params_within_ranges(self, tmp_path):
        manifest = generate_dataset(FAST_CFG, 6, master_seed=13, out_dir=tmp_path)
        for rec in iter_split(manifest, tmp_path, "train"):
            p = rec.meta["imaging_params"]
            assert FC_RANGE[0] <= p["f_c"] <= FC_RANGE[1]
            assert FS_RANGE[0] <= p["f_s"] <= FS_RANGE[1]
            assert V_RANGE[0] <= p["v"] <= V_RANGE[1]
            assert SIGMA_A_RANGE[0] <= p["sigma_a"] <= SIGMA_A_RANGE[1]
            assert SIGMA_L_RANGE[0] <= p["sigma_l"] <= SIGMA_L_RANGE[1]
            assert p["n_pulses"] in N_PULSES_CHOICES
            assert NOISE_STD_RANGE[0] <= p["noise_std"] <= NOISE_STD_RANGE[1]
            a = rec.meta["assignment"]
            assert set(np.unique(rec.tensors["sc_mask"])) <= {0, 1}
            assert sorted(a["density_per_cell"])[0] <= 2.0
            assert sorted(a["density_per_cell"])[1] >= 11.0

    def test_digest_mismatch_detected(self, tmp_path):
        manifest = generate_dataset(FAST_CFG, 4, master_seed=3, out_dir=tmp_path)
        victim = tmp_path / manifest.samples[0]["file"]
        blob = bytearray(victim.read_bytes())
        blob[-1] ^= 0xFF
        victim.write_bytes(bytes(blob))
        with pytest.raises(DigestMismatchError):
            manifest.verify(tmp_path)
        with pytest.raises(DigestMismatchError):
            list(iter_split(manifest, tmp_path, manifest.samples[0]["split"]))

    def test_failure_aborts_with_index_and_cleans_up(self, tmp_path):
        bad = GenerateConfig(
            n_axial=64,
            n_lateral=64,
            d_lateral=0.2,
            with_nakagami=False,
            shapes=ShapeConfig(min_area_fraction=0.3, blob_count_range=(4, 4), max_attempts=3),
        )
        with pytest.raises(GenerationError) as exc:
            generate_dataset(bad, 4, master_seed=1, out_dir=tmp_path)
        assert exc.value.index >= 0
        leftovers = [p for p in tmp_path.iterdir()]
        assert leftovers == []

    def test_manifest_written_last(self, tmp_path):
        generate_dataset(FAST_CFG, 3, master_seed=2, out_dir=tmp_path)
        doc = json.loads((tmp_path / MANIFEST_NAME).read_text())
        assert doc["n_samples"] == 3
        # every referenced file exists with the recorded digest
        for entry in doc["samples"]:
            blob = (tmp_path / entry["file"]).read_bytes()
            assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
