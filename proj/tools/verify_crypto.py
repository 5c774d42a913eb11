#!/usr/bin/env python3
"""Checks the byte constants in findcrypt.dl against independent computations."""
import hashlib
import re
import struct
import sys


def rule_constants(path):
    consts = {}
    lengths = {}
    text = open(path).read()
    for name, off, val in re.findall(r'crypto_byte\("(\w+)",\s*(\d+),\s*(0x[0-9a-fA-F]+|\d+)\)\.', text):
        consts.setdefault(name, {})[int(off)] = int(val, 0)
    for name, n in re.findall(r'crypto_length\("(\w+)",\s*(\d+)\)\.', text):
        lengths[name] = int(n)
    out = {}
    for name, table in consts.items():
        if sorted(table) != list(range(len(table))) or lengths.get(name) != len(table):
            sys.exit(f"{name}: offsets or length inconsistent")
        out[name] = bytes(table[i] for i in range(len(table)))
    return out


def md5_with_iv(message, iv):
    s = [7, 12, 17, 22] * 4 + [5, 9, 14, 20] * 4 + [4, 11, 16, 23] * 4 + [6, 10, 15, 21] * 4
    k = [int(abs(__import__("math").sin(i + 1)) * 2**32) & 0xFFFFFFFF for i in range(64)]
    a0, b0, c0, d0 = struct.unpack("<4I", iv)
    msg = bytearray(message)
    bitlen = len(msg) * 8
    msg.append(0x80)
    while len(msg) % 64 != 56:
        msg.append(0)
    msg += struct.pack("<Q", bitlen)
    rotl = lambda x, c: ((x << c) | (x >> (32 - c))) & 0xFFFFFFFF
    for chunk in range(0, len(msg), 64):
        m = struct.unpack("<16I", msg[chunk:chunk + 64])
        a, b, c, d = a0, b0, c0, d0
        for i in range(64):
            if i < 16:
                f, g = (b & c) | (~b & d), i
            elif i < 32:
                f, g = (d & b) | (~d & c), (5 * i + 1) % 16
            elif i < 48:
                f, g = b ^ c ^ d, (3 * i + 5) % 16
            else:
                f, g = c ^ (b | ~d), (7 * i) % 16
            f = (f + a + k[i] + m[g]) & 0xFFFFFFFF
            a, d, c = d, c, b
            b = (b + rotl(f, s[i])) & 0xFFFFFFFF
        a0, b0, c0, d0 = [(x + y) & 0xFFFFFFFF for x, y in zip((a0, b0, c0, d0), (a, b, c, d))]
    return struct.pack("<4I", a0, b0, c0, d0)


def gf_mul(a, b):
    p = 0
    while b:
        if b & 1:
            p ^= a
        a = ((a << 1) ^ 0x11B) if a & 0x80 else a << 1
        b >>= 1
    return p


def aes_sbox():
    box = []
    for x in range(256):
        inv = 0 if x == 0 else next(y for y in range(1, 256) if gf_mul(x, y) == 1)
        r = inv
        for sh in range(1, 5):
            r ^= ((inv << sh) | (inv >> (8 - sh))) & 0xFF
        box.append(r ^ 0x63)
    return bytes(box)


def main():
    consts = rule_constants(sys.argv[1])
    ok = True
    for msg in (b"", b"abc", b"The quick brown fox jumps over the lazy dog"):
        if md5_with_iv(msg, consts["MD5_IV"]) != hashlib.md5(msg).digest():
            print(f"MD5_IV: digest of {msg!r} differs from hashlib")
            ok = False
    sbox = aes_sbox()
    if consts["AES_SBOX"] != sbox[:len(consts["AES_SBOX"])]:
        print("AES_SBOX: differs from the computed S-box")
        ok = False
    for name in sorted(consts):
        print(f"{name}: {'ok' if ok else 'checked'} ({len(consts[name])} bytes)")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
