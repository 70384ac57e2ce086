"""
Bit-level writer/reader with Exp-Golomb codes
"""


class BitstreamExhausted(Exception):
    """Reader ran past the end of its buffer"""


class BitWriter:
    """MSB-first bit packer"""

    def __init__(self):
        self._buffer = bytearray()
        self._acc = 0
        self._nbits = 0

    def write_bits(self, value: int, count: int) -> None:
        if count == 0:
            return
        self._acc = (self._acc << count) | (value & ((1 << count) - 1))
        self._nbits += count
        while self._nbits >= 8:
            self._nbits -= 8
            self._buffer.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def write_flag(self, flag: bool) -> None:
        self.write_bits(1 if flag else 0, 1)

    def write_ue(self, value: int) -> None:
        """Unsigned Exp-Golomb: prefix of zeros, then value + 1 in binary"""
        assert value >= 0
        code = value + 1
        length = code.bit_length()
        self.write_bits(0, length - 1)
        self.write_bits(code, length)

    def write_se(self, value: int) -> None:
        """Signed Exp-Golomb with the usual 0, 1, -1, 2, -2 ... mapping"""
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    @property
    def bit_length(self) -> int:
        return 8 * len(self._buffer) + self._nbits

    def getvalue(self) -> bytes:
        """Buffer padded with zero bits to a byte boundary"""
        if self._nbits:
            return bytes(self._buffer) + bytes([(self._acc << (8 - self._nbits)) & 0xFF])
        return bytes(self._buffer)


class BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def read_bits(self, count: int) -> int:
        if self._pos + count > 8 * len(self._data):
            raise BitstreamExhausted()
        value = 0
        for _ in range(count):
            byte = self._data[self._pos >> 3]
            value = (value << 1) | ((byte >> (7 - (self._pos & 7))) & 1)
            self._pos += 1
        return value

    def read_flag(self) -> bool:
        return bool(self.read_bits(1))

    def read_ue(self) -> int:
        zeros = 0
        while self.read_bits(1) == 0:
            zeros += 1
            if zeros > 32:
                raise BitstreamExhausted()
        return ((1 << zeros) | self.read_bits(zeros)) - 1

    def read_se(self) -> int:
        code = self.read_ue()
        return (code + 1) // 2 if code & 1 else -(code // 2)
