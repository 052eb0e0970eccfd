"""Writes the OSC golden fixtures with a from-scratch struct-based encoder.

Run from this directory: python3 gen_golden.py
Outputs one <name>.bin per message, manifest.json describing them, and
bundle_two.bin (a bundle holding the first two messages).
"""
import json
import struct

MESSAGES = [
    ("01_ping", "/ping", []),
    ("02_int_one", "/a", [("i", 1)]),
    ("03_empty_string", "/s", [("s", "")]),
    ("04_scan", "/jammin/scan", []),
    ("05_tempo_reply", "/jammin/song/tempo", [("f", 120.0)]),
    ("06_time_sig_reply", "/jammin/song/time_sig", [("i", 6), ("i", 8)]),
    ("07_clip_info", "/jammin/clip/info",
     [("i", 0), ("i", 2), ("s", "4 bar funky bassline"), ("i", 0), ("i", 18)]),
    ("08_notes_chunk", "/jammin/clip/notes",
     [("i", 0), ("i", 1), ("i", 0),
      ("i", 60), ("f", 0.0), ("f", 1.0), ("i", 96),
      ("i", 64), ("f", 0.5), ("f", 0.25), ("i", 127)]),
    ("09_clip_create", "/jammin/clip/create", [("i", 1), ("i", 0), ("f", 16.0)]),
    ("10_error_reply", "/jammin/error",
     [("s", "/jammin/clip/set/color"), ("s", "color out of range")]),
    ("11_negatives_utf8", "/n", [("i", -1), ("f", -0.5), ("s", "Drüms")]),
    ("12_blob", "/blob", [("b", "0102030405")]),
]


def pad(b):
    return b + b"\0" * (-len(b) % 4)


def osc_string(s):
    return pad(s.encode("utf-8") + b"\0")


def encode(address, args):
    out = osc_string(address) + osc_string("," + "".join(t for t, _ in args))
    for tag, value in args:
        if tag == "i":
            out += struct.pack(">i", value)
        elif tag == "f":
            out += struct.pack(">f", value)
        elif tag == "s":
            out += osc_string(value)
        elif tag == "b":
            raw = bytes.fromhex(value)
            out += struct.pack(">I", len(raw)) + pad(raw)
    return out


def main():
    manifest = []
    encoded = []
    for name, address, args in MESSAGES:
        data = encode(address, args)
        encoded.append(data)
        with open(name + ".bin", "wb") as f:
            f.write(data)
        manifest.append({"name": name, "address": address, "args": [[t, v] for t, v in args]})
    with open("manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
        f.write("\n")
    bundle = b"#bundle\0" + struct.pack(">Q", 1)
    for data in encoded[:2]:
        bundle += struct.pack(">I", len(data)) + data
    with open("bundle_two.bin", "wb") as f:
        f.write(bundle)


if __name__ == "__main__":
    main()
