#!/usr/bin/env python3
"""Regenerate the bundled desk corpus under assets/.

Source faces are the 25x25 LFW crops shipped with scikit-image
(`skimage.data.lfw_subset`) and the astronaut photo.  Every derived image is
produced from a fixed seed, so re-running this script reproduces the assets
byte for byte (given the same numpy / Pillow / scikit-image versions).

Usage: python3 tools/make_corpus.py [--out assets]
"""

import argparse
import os
import shutil

import numpy as np
import skimage.data
from PIL import Image
from scipy import ndimage

# 68-point face template in face-square coordinates (u, v in [0, 1]).
# Must stay in sync with `TEMPLATE_68` in crates/core/src/description/landmarks.rs.
def template_68():
    pts = []
    for k in range(17):
        t = np.pi - k * np.pi / 16.0
        pts.append((0.5 + 0.44 * np.cos(t), 0.30 + 0.69 * np.sin(t)))
    for j in range(5):
        pts.append((0.16 + 0.07 * j, 0.28 - 0.04 * np.sin(np.pi * j / 4.0)))
    for j in range(5):
        pts.append((0.56 + 0.07 * j, 0.28 - 0.04 * np.sin(np.pi * j / 4.0)))
    for j in range(4):
        pts.append((0.5, 0.36 + 0.0733 * j))
    for u, v in [(0.42, 0.62), (0.46, 0.625), (0.5, 0.63), (0.54, 0.625), (0.58, 0.62)]:
        pts.append((u, v))
    for cx in (0.32, 0.68):
        pts += [
            (cx - 0.08, 0.40), (cx - 0.03, 0.375), (cx + 0.03, 0.375),
            (cx + 0.08, 0.40), (cx + 0.03, 0.425), (cx - 0.03, 0.425),
        ]
    pts += [
        (0.35, 0.78), (0.40, 0.755), (0.45, 0.745), (0.50, 0.75), (0.55, 0.745),
        (0.60, 0.755), (0.65, 0.78), (0.60, 0.815), (0.55, 0.83), (0.50, 0.835),
        (0.45, 0.83), (0.40, 0.815),
        (0.37, 0.78), (0.45, 0.77), (0.50, 0.772), (0.55, 0.77), (0.63, 0.78),
        (0.55, 0.79), (0.50, 0.792), (0.45, 0.79),
    ]
    assert len(pts) == 68
    return np.array(pts)


TEMPLATE = template_68()
# separate stream so lighting does not shift the layout draws
LIGHT = np.random.default_rng(31337)

PERSONS = [1, 2, 3, 5, 6, 7, 8, 12, 14, 15, 17, 19, 21, 24, 28, 33]
UNKNOWNS = list(range(40, 50))
ATTR_POOL = list(range(50, 100))
DETECTION = list(range(60, 90))

NAMES = [
    ("John", "friend"), ("Maria", "family"), ("Ahmed", "caregiver"), ("Lena", "friend"),
    ("Victor", "family"), ("Priya", "friend"), ("Tom", "caregiver"), ("Grace", "family"),
    ("Kenji", "friend"), ("Sofia", "family"), ("Omar", "friend"), ("Ruth", "caregiver"),
    ("Diego", "friend"), ("Hana", "family"), ("Paul", "friend"), ("Irene", "family"),
]
HAIR = {"black": 14.0, "brown": 105.0, "white": 205.0}
HAIR_OF = ["black", "brown", "black", "white", "brown", "black", "brown", "white",
           "black", "brown", "black", "white", "brown", "black", "brown", "black"]


def lfw():
    return (skimage.data.lfw_subset() * 255.0).astype(np.float64)


def background(rng, h, w, tint=None):
    base = rng.uniform(95, 165)
    noise = ndimage.gaussian_filter(rng.normal(0, 35, (h, w)), 9)
    yy, xx = np.mgrid[0:h, 0:w]
    grad = rng.uniform(-0.08, 0.08) * (xx - w / 2) + rng.uniform(-0.08, 0.08) * (yy - h / 2)
    return np.clip(base + noise + grad, 0, 255)


def paint_attribute(sq, attr, rng):
    """Paint a synthetic attribute on a face square (float array, s x s)."""
    s = sq.shape[0]
    yy, xx = np.mgrid[0:s, 0:s] / float(s)
    tex = ndimage.gaussian_filter(rng.normal(0, 1, (s, s)), 0.8)
    if attr == "beard":
        jaw = TEMPLATE[3:14]
        # region below the lower lip inside the jaw outline
        cy = np.interp(xx, jaw[:, 0], jaw[:, 1])
        m = (yy > 0.80) & (yy < cy) & (xx > 0.17) & (xx < 0.83)
        level = 38 + 18 * tex
        sq[m] = 0.15 * sq[m] + 0.85 * level[m]
    elif attr == "mustache":
        m = ((xx - 0.5) / 0.15) ** 2 + ((yy - 0.695) / 0.045) ** 2 < 1.0
        level = 32 + 14 * tex
        sq[m] = 0.1 * sq[m] + 0.9 * level[m]
    elif attr == "eyeglasses":
        t = max(2.0 / s, 0.018)
        for cx in (0.32, 0.68):
            x0, x1, y0, y1 = cx - 0.12, cx + 0.12, 0.335, 0.465
            outer = (xx > x0) & (xx < x1) & (yy > y0) & (yy < y1)
            inner = (xx > x0 + t) & (xx < x1 - t) & (yy > y0 + t) & (yy < y1 - t)
            sq[outer & ~inner] = 18
        bridge = (xx > 0.44) & (xx < 0.56) & (np.abs(yy - 0.39) < t / 2 + 0.004)
        sq[bridge] = 18
    elif attr == "mask":
        jaw = TEMPLATE[1:16]
        cy = np.interp(xx, jaw[:, 0], jaw[:, 1])
        m = (yy > 0.56) & (yy < cy + 0.01) & (xx > 0.08) & (xx < 0.92)
        level = 212 + 6 * tex
        sq[m] = level[m]
    return sq


def paint_hair(sq, level, rng):
    s = sq.shape[0]
    yy = np.mgrid[0:s, 0:s][0] / float(s)
    tex = ndimage.gaussian_filter(rng.normal(0, 1, (s, s)), 1.0)
    # dark hair may reach lower without hiding the brow/eye contrast
    edge = 0.15 if level > 150 else 0.21
    alpha = np.clip((edge - yy) / 0.05, 0, 1) * 0.9
    sq[:] = (1 - alpha) * sq + alpha * (level + 10 * tex)
    return sq


def face_square(src, size, rng, hair=None, attrs=(), jitter=True):
    im = Image.fromarray(np.clip(src, 0, 255).astype(np.uint8)).resize((size, size), Image.BICUBIC)
    sq = np.asarray(im).astype(np.float64)
    if jitter:
        gamma = rng.uniform(0.8, 1.25)
        sq = 255.0 * (sq / 255.0) ** gamma
        sq = sq * rng.uniform(0.85, 1.15) + rng.uniform(-18, 18)
        # side lighting
        xx = np.mgrid[0:size, 0:size][1] / float(size) - 0.5
        sq = sq * (1.0 + LIGHT.uniform(-0.35, 0.35) * xx)
    if hair is not None:
        paint_hair(sq, HAIR[hair], rng)
    for a in attrs:
        paint_attribute(sq, a, rng)
    if jitter:
        sq = sq + rng.normal(0, 2.5, sq.shape)
    return np.clip(sq, 0, 255)


def paste(canvas, sq, x, y, angle, rng, hair_level=None):
    """Paste a (rotated) face square with its top-left at (x, y); return landmarks."""
    s = sq.shape[0]
    h, w = canvas.shape
    if hair_level is not None:
        yy, xx = np.mgrid[0:h, 0:w]
        cx, cy = x + s / 2.0, y + 0.15 * s
        m = ((xx - cx) / (0.6 * s)) ** 2 + ((yy - cy) / (0.32 * s)) ** 2 < 1.0
        canvas[m] = hair_level + rng.normal(0, 6, m.sum())
    rot = ndimage.rotate(sq, angle, reshape=False, mode="nearest", order=1)
    alpha = np.ones((s, s))
    f = max(2, s // 40)
    ramp = np.minimum(np.arange(s) + 1, np.arange(s)[::-1] + 1) / float(f)
    alpha = np.clip(np.minimum.outer(ramp, ramp), 0, 1)
    region = canvas[y:y + s, x:x + s]
    canvas[y:y + s, x:x + s] = alpha * rot + (1 - alpha) * region
    th = np.deg2rad(angle)
    c, sn = np.cos(th), np.sin(th)
    u = TEMPLATE[:, 0] * s - s / 2.0
    v = TEMPLATE[:, 1] * s - s / 2.0
    # ndimage.rotate turns the content counter-clockwise on screen for positive angles
    lx = c * u + sn * v + s / 2.0 + x
    ly = -sn * u + c * v + s / 2.0 + y
    lx = np.clip(lx, 0, w - 1)
    ly = np.clip(ly, 0, h - 1)
    return np.stack([lx, ly], 1)


def save_gray(path, a):
    Image.fromarray(np.clip(np.rint(a), 0, 255).astype(np.uint8), mode="L").save(path, optimize=True)


def save_rgb(path, a, tint):
    g = np.clip(a, 0, 255)
    rgb = np.stack([g * tint[0], g * tint[1], g * tint[2]], 2)
    Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), mode="RGB").save(path, optimize=True)


def save_landmarks(path, lm):
    with open(path, "w") as f:
        for x, y in lm:
            f.write(f"{x:.2f} {y:.2f}\n")


def build_corpus(out, faces):
    rng = np.random.default_rng(20200501)
    root = os.path.join(out, "corpus")
    os.makedirs(root)
    people = []
    labels = []
    for p, idx in enumerate(PERSONS):
        pid = f"p{p + 1:02d}"
        name, group = NAMES[p]
        people.append((pid, name, group, f"{name.lower()}@example.org", f"90155500{p + 10:02d}"))
        os.makedirs(os.path.join(root, pid))
        count = 12 if p < 4 else 11
        for k in range(count):
            W = H = 240
            canvas = background(rng, H, W)
            s = int(rng.integers(112, 146))
            x = (W - s) // 2 + int(rng.integers(-12, 13))
            y = (H - s) // 2 + int(rng.integers(-8, 12))
            sq = face_square(faces[idx], s, rng, hair=HAIR_OF[p])
            paste(canvas, sq, x, y, rng.uniform(-6, 6), rng, HAIR[HAIR_OF[p]])
            rel = f"{pid}/{k:02d}.png"
            save_gray(os.path.join(root, rel), canvas)
            labels.append((rel, pid))
    with open(os.path.join(root, "people.tsv"), "w") as f:
        f.write("person_id\tname\tgroup\temail\tphone\n")
        for row in people:
            f.write("\t".join(row) + "\n")
    with open(os.path.join(root, "labels.tsv"), "w") as f:
        f.write("image\tperson_id\n")
        for rel, pid in labels:
            f.write(f"{rel}\t{pid}\n")


def build_attrs(out, faces):
    rng = np.random.default_rng(4242)
    root = os.path.join(out, "attrs")
    for attr in ("beard", "mustache", "eyeglasses", "mask"):
        for yes in (True, False):
            d = os.path.join(root, attr, "yes" if yes else "no")
            os.makedirs(d)
            for k in range(40):
                idx = ATTR_POOL[int(rng.integers(0, len(ATTR_POOL)))]
                others = []
                for o in ("beard", "mustache", "eyeglasses"):
                    if o != attr and rng.random() < 0.3:
                        others.append(o)
                if attr in ("beard", "mustache") and "mask" in others:
                    others.remove("mask")
                chosen = others + ([attr] if yes else [])
                W = H = 224
                canvas = background(rng, H, W)
                s = int(rng.integers(172, 194))
                x = (W - s) // 2 + int(rng.integers(-6, 7))
                y = (H - s) // 2 + int(rng.integers(-6, 7))
                sq = face_square(faces[idx], s, rng, attrs=chosen)
                lm = paste(canvas, sq, x, y, rng.uniform(-4, 4), rng)
                save_gray(os.path.join(d, f"{k:02d}.png"), canvas)
                save_landmarks(os.path.join(d, f"{k:02d}.lm"), lm)


def build_detection(out, faces):
    rng = np.random.default_rng(777)
    root = os.path.join(out, "detection")
    os.makedirs(root)
    rows = []
    for k, idx in enumerate(DETECTION):
        W, H = (320, 240) if k % 2 == 0 else (480, 360)
        canvas = background(rng, H, W)
        s = int(rng.integers(70, min(H - 40, 190)))
        x = int(rng.integers(8, W - s - 8))
        y = int(rng.integers(24, H - s - 8))
        sq = face_square(faces[idx], s, rng)
        paste(canvas, sq, x, y, rng.uniform(-4, 4), rng)
        name = f"scene_{k:02d}.png"
        save_gray(os.path.join(root, name), canvas)
        rows.append((name, x, y, s, s))
    astro = skimage.data.astronaut()
    Image.fromarray(astro).save(os.path.join(root, "astronaut.png"), optimize=True)
    # hand-annotated face box (eyebrows to chin, ear to ear) on the 512x512 photo
    rows.append(("astronaut.png", 177, 76, 95, 104))
    with open(os.path.join(root, "annotations.tsv"), "w") as f:
        f.write("image\tx\ty\twidth\theight\n")
        for r in rows:
            f.write("\t".join(str(v) for v in r) + "\n")


def scene(rng, faces, idx, hair, attrs, s, pos, W=480, H=360, bg=None):
    canvas = bg.copy() if bg is not None else background(rng, H, W)
    if idx is None:
        return canvas, None
    sq = face_square(faces[idx], s, rng, hair=hair, attrs=attrs)
    lm = paste(canvas, sq, pos[0], pos[1], rng.uniform(-3, 3), rng, HAIR[hair] if hair else None)
    return canvas, lm


def build_replay(out, faces):
    rng = np.random.default_rng(99)
    root = os.path.join(out, "replay")
    os.makedirs(root)
    tints = {"front_door": (1.0, 0.97, 0.92), "back_door": (0.93, 0.98, 1.0)}
    bgs = {cam: background(rng, 360, 480) for cam in tints}
    # (timestamp, camera, face source or None, hair, painted attrs, items, truth)
    plan = [
        (1000, "front_door", None, None, (), "-", "-"),
        (1500, "back_door", None, None, (), "-", "-"),
        (2000, "front_door", None, None, (), "-", "-"),
        (2500, "back_door", ("u", 0), "black", (), "gun", "unknown"),
        (3000, "front_door", ("p", 0), HAIR_OF[0], ("beard",), "-", "p01"),
        (3500, "back_door", ("u", 1), "brown", ("mask",), "mask", "unknown"),
        (4000, "front_door", "same", None, (), "-", "p01"),
        (4500, "back_door", ("p", 1), HAIR_OF[1], (), "-", "p02"),
        (5000, "front_door", None, None, (), "-", "-"),
        (6000, "front_door", ("p", 4), HAIR_OF[4], ("eyeglasses",), "knife", "p05"),
    ]
    rows = []
    last = {}
    for ts, cam, who, hair, attrs, items, truth in plan:
        name = f"{cam}_{ts}.png"
        lm = None
        if who == "same":
            canvas, lm = last[cam]
        elif who is None:
            canvas = bgs[cam].copy()
        else:
            kind, i = who
            idx = PERSONS[i] if kind == "p" else UNKNOWNS[i]
            s = int(rng.integers(170, 200))
            pos = (int(rng.integers(120, 480 - s - 100)), int(rng.integers(60, 360 - s - 20)))
            canvas, lm = scene(rng, faces, idx, hair, attrs, s, pos, bg=bgs[cam])
        last[cam] = (canvas, lm)
        save_rgb(os.path.join(root, name), canvas, tints[cam])
        if lm is not None:
            save_landmarks(os.path.join(root, name[:-4] + ".lm"), lm)
        rows.append((ts, cam, name, truth, items))
    with open(os.path.join(root, "frames.tsv"), "w") as f:
        f.write("timestamp_ms\tcamera_id\timage\ttruth\titems\n")
        for r in rows:
            f.write("\t".join(str(v) for v in r) + "\n")


def build_toy(out, faces):
    """Ten-frame single-camera replay with two deliberately wrong truth labels."""
    rng = np.random.default_rng(1234)
    root = os.path.join(out, "replay_toy")
    os.makedirs(root)
    rows = [(1000, "front_door", "f00.png", "-", "-")]
    save_rgb(os.path.join(root, "f00.png"), background(rng, 360, 480), (1, 1, 1))
    shown = [0, 1, 2, 0, 1, 3, 2, 0, 3]
    truth = ["p01", "p02", "p03", "p01", "p03", "p04", "p03", "p02", "p04"]
    for k, (p, t) in enumerate(zip(shown, truth)):
        s = int(rng.integers(160, 200))
        pos = (int(rng.integers(40, 480 - s - 40)), int(rng.integers(50, 360 - s - 20)))
        canvas, lm = scene(rng, faces, PERSONS[p], HAIR_OF[p], (), s, pos)
        name = f"f{k + 1:02d}.png"
        save_rgb(os.path.join(root, name), canvas, (1, 1, 1))
        save_landmarks(os.path.join(root, name[:-4] + ".lm"), lm)
        rows.append((2000 + 1000 * k, "front_door", name, t, "-"))
    with open(os.path.join(root, "frames.tsv"), "w") as f:
        f.write("timestamp_ms\tcamera_id\timage\ttruth\titems\n")
        for r in rows:
            f.write("\t".join(str(v) for v in r) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="assets")
    args = ap.parse_args()
    faces = lfw()
    for sub in ("corpus", "attrs", "detection", "replay", "replay_toy"):
        shutil.rmtree(os.path.join(args.out, sub), ignore_errors=True)
    build_corpus(args.out, faces)
    build_attrs(args.out, faces)
    build_detection(args.out, faces)
    build_replay(args.out, faces)
    build_toy(args.out, faces)


if __name__ == "__main__":
    main()
