"""Tests for JPEG header parsing and the sequential reference decoder."""

from __future__ import annotations

import io
from dataclasses import replace

import numpy as np
import pytest
from conftest import bitstring_codes, noisy_image, pillow_jpeg, smooth_image
from PIL import Image

from ratex.bitstream import BitCursor, BitWriter, unstuff
from ratex.codestream import (
    accumulate_dc,
    cached_huffman_decoder,
    component_quant,
    decode_ac,
    decode_dc_diff,
    decode_reference_image,
    decode_scan_sequential,
    parse_jpeg,
    walk_scan,
)
from ratex.decoders import TableSymbolDecoder
from ratex.encoder import encode_baseline, encode_scan
from ratex.exceptions import (
    CodestreamError,
    DcOverflowError,
    MalformedStreamError,
    UnsupportedFormatError,
)
from ratex.metrics import psnr
from ratex.pixels import ZIGZAG, assemble_mcus, reconstruct_mcus
from ratex.types import HuffmanSpec, TableClass

BLOCK_COMPONENT = (0, 0, 0, 0, 1, 2)


def _custom_spec(*symbols: int) -> HuffmanSpec:
    """Two one-bit codes: ``0`` and ``1``."""
    return HuffmanSpec(counts=(2,) + (0,) * 15, symbols=symbols)


def _random_coefficients(mcus: int, seed: int) -> np.ndarray:
    """Sparse zigzag-order coefficients covering every magnitude category."""
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((mcus, 6, 64), dtype=np.int32)
    coeffs[..., 0] = rng.integers(-1024, 1024, size=(mcus, 6))
    mask = rng.random((mcus, 6, 63)) < 0.3
    magnitudes = rng.integers(-1023, 1024, size=(mcus, 6, 63))
    small = rng.integers(-3, 4, size=(mcus, 6, 63))
    values = np.where(rng.random((mcus, 6, 63)) < 0.8, small, magnitudes)
    coeffs[..., 1:] = np.where(mask, values, 0)
    # A block with a long zero run ending in the last coefficient.
    coeffs[0, 0, 1:] = 0
    coeffs[0, 0, 63] = 7
    return coeffs


def _brute_force_scan(parsed, mcus: int) -> np.ndarray:
    """Decode a scan with string prefix matching straight from T.81 F.2."""
    bits = "".join(format(b, "08b") for b in unstuff(parsed.scan_data))
    tables = []
    for comp in parsed.components:
        dc = bitstring_codes(parsed.huffman_specs[(TableClass.DC, comp.dc_table_id)])
        ac = bitstring_codes(parsed.huffman_specs[(TableClass.AC, comp.ac_table_id)])
        tables.append((dc, ac))
    pos = 0

    def symbol(table):
        nonlocal pos
        prefix = ""
        while prefix not in table:
            prefix += bits[pos]
            pos += 1
        return table[prefix]

    def extend(size):
        nonlocal pos
        if size == 0:
            return 0
        raw = int(bits[pos : pos + size], 2)
        pos += size
        return raw if raw >= 1 << (size - 1) else raw - (1 << size) + 1

    out = np.zeros((mcus, 6, 64), dtype=np.int32)
    predictors = [0, 0, 0]
    for m in range(mcus):
        for b, comp in enumerate(BLOCK_COMPONENT):
            dc, ac = tables[comp]
            predictors[comp] += extend(symbol(dc))
            zz = [predictors[comp]] + [0] * 63
            k = 1
            while k < 64:
                rs = symbol(ac)
                if rs == 0x00:
                    break
                if rs == 0xF0:
                    k += 16
                    continue
                k += rs >> 4
                zz[k] = extend(rs & 0x0F)
                k += 1
            out[m, b, ZIGZAG] = zz
    return out


class TestParse:
    def test_pillow_baseline(self, small_jpeg):
        parsed = parse_jpeg(small_jpeg)
        assert (parsed.width, parsed.height) == (48, 40)
        assert (parsed.mcu_cols, parsed.mcu_rows, parsed.mcu_count) == (3, 3, 9)
        assert [(c.h_sampling, c.v_sampling) for c in parsed.components] == [
            (2, 2),
            (1, 1),
            (1, 1),
        ]
        assert len(parsed.quant_tables) == 2
        assert (TableClass.AC, 1) in parsed.huffman_specs

    def test_odd_dimensions_round_mcu_grid_up(self):
        parsed = parse_jpeg(pillow_jpeg(smooth_image(17, 33), 75))
        assert (parsed.mcu_cols, parsed.mcu_rows) == (3, 2)

    def test_own_encoder_output(self):
        parsed = parse_jpeg(encode_baseline(smooth_image(20, 20), 60))
        assert (parsed.width, parsed.height) == (20, 20)

    def test_progressive_rejected(self):
        buf = io.BytesIO()
        Image.fromarray(smooth_image(32, 32)).save(
            buf, "JPEG", quality=80, progressive=True
        )
        with pytest.raises(UnsupportedFormatError, match="progressive"):
            parse_jpeg(buf.getvalue())

    def test_444_rejected(self):
        buf = io.BytesIO()
        Image.fromarray(smooth_image(32, 32)).save(
            buf, "JPEG", quality=80, subsampling=0
        )
        with pytest.raises(UnsupportedFormatError, match="4:2:0"):
            parse_jpeg(buf.getvalue())

    def test_grayscale_rejected(self):
        buf = io.BytesIO()
        Image.fromarray(smooth_image(32, 32)[..., 0]).save(buf, "JPEG", quality=80)
        with pytest.raises(UnsupportedFormatError, match="components"):
            parse_jpeg(buf.getvalue())

    def test_restart_interval_rejected(self, small_jpeg):
        data = small_jpeg[:2] + b"\xff\xdd\x00\x04\x00\x08" + small_jpeg[2:]
        with pytest.raises(UnsupportedFormatError, match="restart"):
            parse_jpeg(data)

    def test_zero_restart_interval_accepted(self, small_jpeg):
        data = small_jpeg[:2] + b"\xff\xdd\x00\x04\x00\x00" + small_jpeg[2:]
        assert parse_jpeg(data).mcu_count == 9

    def test_missing_soi(self, small_jpeg):
        with pytest.raises(MalformedStreamError, match="SOI"):
            parse_jpeg(small_jpeg[2:])

    def test_missing_eoi(self, small_jpeg):
        with pytest.raises(MalformedStreamError, match="EOI"):
            parse_jpeg(small_jpeg[:-2])

    def test_truncation_never_escapes_codestream_errors(self, small_jpeg):
        """Any prefix parses and walks, or fails with a CodestreamError."""
        for cut in range(0, len(small_jpeg), 7):
            try:
                walk_scan(parse_jpeg(small_jpeg[:cut]))
            except CodestreamError:
                pass

    def test_bit_flips_never_escape_codestream_errors(self, small_jpeg):
        rng = np.random.default_rng(11)
        for _ in range(60):
            data = bytearray(small_jpeg)
            pos = int(rng.integers(2, len(data)))
            data[pos] ^= 1 << int(rng.integers(0, 8))
            try:
                walk_scan(parse_jpeg(bytes(data)))
            except CodestreamError:
                pass


class TestEntropyDecoding:
    def test_random_coefficients_match_brute_force(self):
        template = parse_jpeg(encode_baseline(smooth_image(48, 32), 50))
        coeffs = _random_coefficients(template.mcu_count, seed=2)
        parsed = replace(template, scan_data=encode_scan(coeffs))

        decoded = decode_scan_sequential(parsed)
        expected = np.zeros_like(coeffs)
        expected[..., ZIGZAG] = coeffs
        np.testing.assert_array_equal(decoded, expected)
        np.testing.assert_array_equal(
            _brute_force_scan(parsed, template.mcu_count), expected
        )

    def test_pillow_scan_matches_brute_force(self, corpus_jpeg):
        parsed = parse_jpeg(corpus_jpeg)
        np.testing.assert_array_equal(
            decode_scan_sequential(parsed),
            _brute_force_scan(parsed, parsed.mcu_count),
        )

    def test_bounds_are_contiguous(self, small_jpeg):
        layout = walk_scan(parse_jpeg(small_jpeg))
        flat = layout.bounds.reshape(-1, 3)
        assert flat[0, 0] == 0
        np.testing.assert_array_equal(flat[1:, 0], flat[:-1, 2])
        assert np.all(flat[:, 0] < flat[:, 1])
        assert np.all(flat[:, 1] < flat[:, 2])
        assert layout.end_bit == flat[-1, 2]
        assert layout.end_bit <= len(layout.data) * 8

    def test_dc_category_above_eleven(self):
        table = cached_huffman_decoder(_custom_spec(12, 0))
        with pytest.raises(MalformedStreamError, match="DC category"):
            decode_dc_diff(BitCursor(b"\x00"), table, TableSymbolDecoder())

    def test_ac_zero_run_past_end(self):
        table = cached_huffman_decoder(_custom_spec(0xF0, 0x00))
        block = [0] * 64
        with pytest.raises(MalformedStreamError, match="zero run"):
            decode_ac(BitCursor(b"\x00"), table, TableSymbolDecoder(), block)

    def test_ac_invalid_run_symbol(self):
        table = cached_huffman_decoder(_custom_spec(0x10, 0x00))
        with pytest.raises(MalformedStreamError, match="invalid AC symbol"):
            decode_ac(BitCursor(b"\x00"), table, TableSymbolDecoder(), [0] * 64)

    def test_ac_magnitude_above_ten(self):
        table = cached_huffman_decoder(_custom_spec(0x0B, 0x00))
        with pytest.raises(MalformedStreamError, match="exceeds 10"):
            decode_ac(BitCursor(b"\x00"), table, TableSymbolDecoder(), [0] * 64)

    def test_too_many_coefficients(self):
        """Runs of three: the sixteenth coefficient would land at index 64."""
        table = cached_huffman_decoder(_custom_spec(0x31, 0x00))
        writer = BitWriter()
        for _ in range(16):
            writer.write(0b01, 2)  # symbol 0x31 then magnitude bit 1
        writer.pad_to_byte()
        with pytest.raises(MalformedStreamError, match="more than 63"):
            decode_ac(
                BitCursor(writer.getvalue()), table, TableSymbolDecoder(), [0] * 64
            )

    def test_eob_stops_block(self):
        table = cached_huffman_decoder(_custom_spec(0x01, 0x00))
        block = [0] * 64
        # 0x01 with magnitude bit 1, then EOB.
        decode_ac(BitCursor(bytes([0b01100000])), table, TableSymbolDecoder(), block)
        assert block[1] == 1
        assert sum(1 for c in block if c) == 1

    def test_accumulate_dc_bounds(self):
        cursor = BitCursor(b"\x00")
        assert accumulate_dc(2000, cursor, 47) == 2047
        assert accumulate_dc(-2000, cursor, -48) == -2048
        with pytest.raises(DcOverflowError) as info:
            accumulate_dc(-2048, cursor, -1)
        assert info.value.value == -2049

    def test_accumulated_dc_overflow(self):
        """Two legal category-11 differences whose sum leaves 12 bits."""
        template = parse_jpeg(encode_baseline(smooth_image(16, 32), 50))
        coeffs = np.zeros((2, 6, 64), dtype=np.int32)
        coeffs[0, :4, 0] = 2000
        coeffs[1, :4, 0] = 4000
        parsed = replace(template, scan_data=encode_scan(coeffs))
        with pytest.raises(MalformedStreamError, match="4000"):
            decode_scan_sequential(parsed)

    def test_negative_dc_overflow(self):
        template = parse_jpeg(encode_baseline(smooth_image(16, 32), 50))
        coeffs = np.zeros((2, 6, 64), dtype=np.int32)
        coeffs[0, 4, 0] = -1500
        coeffs[1, 4, 0] = -3000
        parsed = replace(template, scan_data=encode_scan(coeffs))
        with pytest.raises(DcOverflowError, match="-3000"):
            walk_scan(parsed)


# Sizes x qualities of the encoder round trip. 1000 pixels gives a 63x63
# MCU grid with partial blocks on the right and bottom edges.
ROUNDTRIP_SIZES = [16, 24, 48, pytest.param(1000, marks=pytest.mark.slow)]
ROUNDTRIP_QUALITIES = [50, 70, 80, 90]


class TestEncoderRoundTrip:
    @pytest.mark.parametrize("quality", ROUNDTRIP_QUALITIES)
    @pytest.mark.parametrize("size", ROUNDTRIP_SIZES)
    def test_matches_brute_force_decode(self, size, quality):
        image = smooth_image(size, size, seed=size + quality)
        parsed = parse_jpeg(encode_baseline(image, quality))
        luma, cb, cr = component_quant(parsed.quant_tables, parsed.components)

        coefficients = decode_scan_sequential(parsed)
        reference = _brute_force_scan(parsed, parsed.mcu_count)
        np.testing.assert_array_equal(coefficients, reference)

        ours = assemble_mcus(
            reconstruct_mcus(coefficients, luma, cb, cr), parsed.mcu_cols, size, size
        )
        theirs = assemble_mcus(
            reconstruct_mcus(reference, luma, cb, cr), parsed.mcu_cols, size, size
        )
        assert ours.shape == (size, size, 3)
        np.testing.assert_array_equal(ours, theirs)
        np.testing.assert_array_equal(decode_reference_image(parsed), theirs)
        assert psnr(ours, image) > 20.0


class TestReferenceImage:
    def test_close_to_pillow_decode(self):
        image = smooth_image(64, 80, seed=5)
        data = pillow_jpeg(image, 90)
        ours = decode_reference_image(parse_jpeg(data))
        with Image.open(io.BytesIO(data)) as img:
            theirs = np.asarray(img.convert("RGB"))
        assert ours.shape == theirs.shape
        assert psnr(ours, theirs) > 30.0
        assert psnr(ours, image) > 30.0

    def test_cropped_to_frame_size(self):
        data = pillow_jpeg(noisy_image(17, 33), 70)
        assert decode_reference_image(parse_jpeg(data)).shape == (17, 33, 3)
