"""Hex codec, disassembler, and code-hash tests."""

import pytest
from hypothesis import given, strategies as st

from srcverify import code_hash, disassemble, keccak256, parse_hex, render_hex
from srcverify.bytecode import Instruction, reassemble
from srcverify.errors import NonHexCharacterError, OddLengthError

from oracles import keccak256_oracle

# Frozen with the independent oracle (tests/oracles.py); the empty-input
# digest is also a widely published constant.
KECCAK_VECTORS = {
    b"": "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470",
    b"abc": "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45",
    b"testing": "5f16f4c7f149ac4f9510d9cf8cf384038ad348b3bcdc01915f95de12df9d1b02",
    b"\x00": "bc36789e7a1e281436464229828f817d6612f7b477d66591ff96a9e064bcc98a",
    bytes(range(200)): "bfb0aa97863e797943cf7c33bb7e880bb4543f3d2703c0923c6901c2af57b890",
}


class TestHexCodec:
    def test_round_trip_prefixed(self):
        assert parse_hex("0x60016002") == bytes.fromhex("60016002")
        assert render_hex(b"\x60\x01") == "0x6001"
        assert render_hex(b"\x60\x01", prefix=False) == "6001"

    def test_bare_and_uppercase(self):
        assert parse_hex("60FF") == b"\x60\xff"
        assert parse_hex("  0X60ff\n") == b"\x60\xff"

    def test_odd_length_rejected(self):
        with pytest.raises(OddLengthError):
            parse_hex("0x600")

    def test_non_hex_rejected(self):
        with pytest.raises(NonHexCharacterError):
            parse_hex("0x60zz")
        with pytest.raises(NonHexCharacterError):
            parse_hex("60 01")  # inner whitespace is not hex

    @given(st.binary(max_size=300))
    def test_parse_render_inverse(self, code):
        assert parse_hex(render_hex(code)) == code
        assert parse_hex(render_hex(code, prefix=False)) == code


class TestDisassembler:
    def test_simple_sequence(self):
        # PUSH1 01, PUSH2 0203, ADD, STOP
        code = bytes.fromhex("60016102030100")
        ins = disassemble(code)
        assert [i.name for i in ins] == ["PUSH1", "PUSH2", "ADD", "STOP"]
        assert ins[0].immediate == b"\x01"
        assert ins[1].immediate == b"\x02\x03"
        assert [i.offset for i in ins] == [0, 2, 5, 6]

    def test_unknown_opcode_is_single_byte(self):
        ins = disassemble(b"\x0c")
        assert len(ins) == 1
        assert ins[0].name == "UNKNOWN_0c"
        assert not ins[0].truncated

    def test_truncated_push_flagged(self):
        # PUSH32 with only 2 immediate bytes available
        code = b"\x7f\xaa\xbb"
        ins = disassemble(code)
        assert len(ins) == 1
        assert ins[0].truncated
        assert ins[0].immediate == b"\xaa\xbb"

    def test_full_push_not_flagged(self):
        code = b"\x7f" + bytes(32)
        ins = disassemble(code)
        assert not ins[0].truncated

    def test_empty_code(self):
        assert disassemble(b"") == []

    def test_push_immediate_not_misread(self):
        # PUSH1 0x60: the 0x60 immediate must not decode as a second PUSH1
        ins = disassemble(b"\x60\x60")
        assert len(ins) == 1

    @given(st.binary(max_size=600))
    def test_reassembly_reproduces_input(self, code):
        ins = disassemble(code)
        assert reassemble(ins) == code
        # every byte covered exactly once, in order
        covered = 0
        for i in ins:
            assert i.offset == covered
            covered += i.size
        assert covered == len(code)
        assert len(ins) <= max(len(code), 1)

    def test_str_rendering(self):
        ins = Instruction(offset=4, opcode=0x61, immediate=b"\x01\x02")
        assert "PUSH2" in str(ins) and "0x0102" in str(ins)


class TestCodeHash:
    @pytest.mark.parametrize("data,digest", sorted(KECCAK_VECTORS.items()))
    def test_frozen_vectors(self, data, digest):
        assert keccak256(data).hex() == digest
        assert code_hash(data).hex() == digest

    @given(st.binary(max_size=500))
    def test_agrees_with_independent_oracle(self, data):
        assert keccak256(data) == keccak256_oracle(data)

    def test_multi_block_input(self):
        # spans several 136-byte sponge blocks
        data = bytes(range(256)) * 3
        assert keccak256(data) == keccak256_oracle(data)

    def test_rate_boundary_inputs(self):
        for n in (135, 136, 137, 271, 272, 273):
            data = b"\xa5" * n
            assert keccak256(data) == keccak256_oracle(data)
