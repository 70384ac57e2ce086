import pytest

from lfcodec.utils.bit_io import BitReader, BitstreamExhausted, BitWriter


@pytest.mark.parametrize("value,bits", [(0, "1"), (1, "010"), (2, "011"), (3, "00100"), (7, "0001000")])
def test_ue_codewords(value, bits):
    writer = BitWriter()
    writer.write_ue(value)
    assert writer.bit_length == len(bits)
    padded = bits + "0" * (-len(bits) % 8)
    assert writer.getvalue() == int(padded, 2).to_bytes(len(padded) // 8, "big")


@pytest.mark.parametrize("value,code", [(0, 0), (1, 1), (-1, 2), (2, 3), (-2, 4)])
def test_se_mapping(value, code):
    signed, unsigned = BitWriter(), BitWriter()
    signed.write_se(value)
    unsigned.write_ue(code)
    assert signed.getvalue() == unsigned.getvalue()


def test_mixed_syntax_reads_back():
    writer = BitWriter()
    writer.write_flag(True)
    writer.write_bits(0b1011, 4)
    for value in (0, 5, 300):
        writer.write_ue(value)
    for value in (-17, 0, 42):
        writer.write_se(value)

    reader = BitReader(writer.getvalue())
    assert reader.read_flag() is True
    assert reader.read_bits(4) == 0b1011
    assert [reader.read_ue() for _ in range(3)] == [0, 5, 300]
    assert [reader.read_se() for _ in range(3)] == [-17, 0, 42]


def test_reader_exhaustion():
    reader = BitReader(b"\x00")
    with pytest.raises(BitstreamExhausted):
        reader.read_ue()
    with pytest.raises(BitstreamExhausted):
        BitReader(b"").read_bits(1)
