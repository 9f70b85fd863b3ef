import struct

import numpy as np
import pytest

from filterflow.fields import FilterFlowField
from filterflow.fileio import (
    FileFormatError,
    load_checkpoint,
    read_field,
    read_flo,
    read_image,
    save_checkpoint,
    write_field,
    write_flo,
    write_image,
)
from filterflow.net import NetConfig, init_params


class TestImages:
    @pytest.mark.parametrize("ext,channels", [("png", 1), ("png", 3), ("pgm", 1)])
    def test_round_trip_within_quantization(self, tmp_path, ext, channels):
        rng = np.random.default_rng(0)
        img = rng.random((9, 7, channels))
        p = tmp_path / f"x.{ext}"
        write_image(img, p)
        back = read_image(p)
        assert back.shape == img.shape
        assert np.abs(back - img).max() <= 1.0 / 510.0 + 1e-12

    def test_pgm_header_parsing(self, tmp_path):
        p = tmp_path / "tiny.pgm"
        p.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        img = read_image(p)
        assert img.shape == (2, 2, 1)
        assert img[0, 0, 0] == 0.0
        assert img[0, 1, 0] == pytest.approx(128 / 255)

    def test_unknown_magic(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(b"XXZZ".ljust(32, b"\0"))
        with pytest.raises(FileFormatError, match="magic"):
            read_image(p)

    def test_truncated_pgm(self, tmp_path):
        p = tmp_path / "trunc.pgm"
        p.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(FileFormatError, match="truncated"):
            read_image(p)

    def test_sixteen_bit_png_rejected(self, tmp_path):
        from PIL import Image as PILImage

        p = tmp_path / "deep.png"
        arr = (np.arange(16, dtype=np.uint16) * 4000).reshape(4, 4)
        PILImage.fromarray(arr).save(p)
        with pytest.raises(FileFormatError, match="depth"):
            read_image(p)

    def test_write_clamps_and_quantizes(self, tmp_path):
        img = np.array([[[-0.3, 0.5, 1.7]]])
        p = tmp_path / "clamp.png"
        write_image(img, p)
        back = read_image(p)
        assert back[0, 0].tolist() == [0.0, pytest.approx(128 / 255), 1.0]


class TestFlo:
    def test_bitwise_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        flow = rng.normal(size=(6, 5, 2)).astype(np.float32).astype(np.float64)
        p = tmp_path / "f.flo"
        write_flo(flow, p)
        first = p.read_bytes()
        back = read_flo(p)
        assert (back == flow).all()
        write_flo(back, p)
        assert p.read_bytes() == first

    def test_component_mapping(self, tmp_path):
        flow = np.array([[[1.0, 2.0]]])  # d_row=1, d_col=2
        p = tmp_path / "one.flo"
        write_flo(flow, p)
        raw = p.read_bytes()
        assert raw[:4] == b"PIEH"
        w, h = struct.unpack("<ii", raw[4:12])
        assert (w, h) == (1, 1)
        u, v = struct.unpack("<ff", raw[12:20])
        assert (u, v) == (2.0, 1.0)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "bad.flo"
        p.write_bytes(b"XXXX" + struct.pack("<ii", 1, 1) + b"\0" * 8)
        with pytest.raises(FileFormatError, match="magic"):
            read_flo(p)

    def test_size_mismatch(self, tmp_path):
        p = tmp_path / "short.flo"
        p.write_bytes(b"PIEH" + struct.pack("<ii", 4, 4) + b"\0" * 16)
        with pytest.raises(FileFormatError, match="size"):
            read_flo(p)


class TestFieldContainer:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        logits = rng.normal(size=(4, 6, 9)).astype(np.float32).astype(np.float64)
        field = FilterFlowField(logits, 3, scale_index=2)
        p = tmp_path / "field.bin"
        write_field(field, p)
        back = read_field(p)
        assert back.k == 3 and back.scale_index == 2
        assert (back.logits == logits).all()
        first = p.read_bytes()
        write_field(back, p)
        assert p.read_bytes() == first

    def test_header_layout(self, tmp_path):
        field = FilterFlowField(np.zeros((2, 3, 9)), 3, scale_index=1)
        p = tmp_path / "field.bin"
        write_field(field, p)
        raw = p.read_bytes()
        assert raw[:4] == b"MGPF"
        version, h, w, k, scale = struct.unpack("<iiiii", raw[4:24])
        assert (version, h, w, k, scale) == (1, 2, 3, 3, 1)
        assert len(raw) == 24 + 4 * 2 * 3 * 9

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "nope.bin"
        p.write_bytes(b"ABCD" + b"\0" * 40)
        with pytest.raises(FileFormatError):
            read_field(p)


class TestCheckpoint:
    def test_round_trip_params_and_config(self, tmp_path):
        cfg = NetConfig(embed_channels=(4, 6, 6, 4), full_res_channels=3,
                        head_channels=(8, 9), k=3, seed=5)
        params = init_params(cfg)
        p = tmp_path / "ck.bin"
        save_checkpoint(p, params, cfg)
        loaded, cfg2 = load_checkpoint(p)
        assert cfg2 == cfg
        assert loaded.keys() == params.keys()
        for name in params:
            assert loaded[name] == pytest.approx(
                params[name].astype(np.float32).astype(np.float64), abs=0
            )

    def test_bitwise_file_round_trip(self, tmp_path):
        cfg = NetConfig(embed_channels=(4, 6, 6, 4), full_res_channels=3,
                        head_channels=(8, 9), k=3, seed=5)
        params = init_params(cfg)
        p1 = tmp_path / "a.bin"
        p2 = tmp_path / "b.bin"
        save_checkpoint(p1, params, cfg)
        loaded, cfg2 = load_checkpoint(p1)
        save_checkpoint(p2, loaded, cfg2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_file(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(FileFormatError):
            load_checkpoint(p)
