"""Generate the committed image fixtures.

Each image is a smooth synthetic scene. A small counter is stamped into the
bottom-right pixels and incremented until the SHA-256 of the encoded PNG has
the byte pattern the mock detector keys on. Run from the repo root:

    python3 fixtures/tools/gen_images.py
"""

import hashlib
import io
import math
import pathlib

from PIL import Image

OUT = pathlib.Path(__file__).resolve().parent.parent


def scene(w, h, variant):
    img = Image.new("RGB", (w, h))
    px = img.load()
    for y in range(h):
        for x in range(w):
            sky = y < h * 0.55
            if sky:
                r = 90 + int(60 * y / h) + variant * 3
                g = 140 + int(50 * y / h)
                b = 220 - int(30 * y / h)
            else:
                t = math.sin(x / 9.0 + variant) * math.cos(y / 7.0)
                r = 70 + int(25 * t)
                g = 120 + int(35 * t) + variant * 5
                b = 60 + int(15 * t)
            cx, cy = w * (0.3 + 0.1 * variant), h * 0.62
            if (x - cx) ** 2 / (w * 0.12) ** 2 + (y - cy) ** 2 / (h * 0.18) ** 2 < 1:
                r, g, b = 150 + (x * 3) % 40, 95 + (y * 2) % 30, 60
            px[x, y] = (max(0, min(255, r)), max(0, min(255, g)), max(0, min(255, b)))
    return img


def encode(img):
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def search(base, accept):
    w, h = base.size
    for counter in range(1 << 24):
        img = base.copy()
        px = img.load()
        px[w - 1, h - 1] = (counter & 0xFF, (counter >> 8) & 0xFF, (counter >> 16) & 0xFF)
        data = encode(img)
        d = hashlib.sha256(data).digest()
        if accept(d):
            return data, d
    raise RuntimeError("no match")


def write(name, data, d):
    (OUT / name).write_bytes(data)
    print(f"{name}: {len(data)} bytes, sha256 {d.hex()}")


def main():
    fixtures = [
        # fake verdict with 1 + d[1] % 3 == 2 regions
        ("fake_sample.png", scene(256, 192, 0), lambda d: d[0] % 2 == 0 and d[1] % 3 == 1),
        ("detect_fake_00_05.png", scene(64, 64, 1), lambda d: d[0] == 0x00 and d[1] == 5),
        ("detect_real_01.png", scene(64, 64, 2), lambda d: d[0] == 0x01),
        ("overlay_a.png", scene(96, 64, 3), lambda d: d[0] % 2 == 0 and d[1] % 3 == 2),
        ("overlay_b.png", scene(40, 120, 4), lambda d: d[0] % 2 == 0 and d[1] % 3 == 0),
        ("overlay_c.png", scene(128, 128, 5), lambda d: d[0] % 2 == 0 and d[1] % 3 == 1),
    ]
    for name, base, accept in fixtures:
        data, d = search(base, accept)
        write(name, data, d)
    (OUT / "not_an_image.png").write_bytes(b"this is a text file, not a PNG\n")


if __name__ == "__main__":
    main()
