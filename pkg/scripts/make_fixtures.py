#!/usr/bin/env python3
"""Regenerate the bundled mock fixtures: sample images + descriptions.tsv.

Run from the repo root after changing fixture descriptions or the
placeholder-image scheme:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from semcodec.backends.base import ImageRef
from semcodec.backends.mock import content_words, make_placeholder_image

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "semcodec" / "fixtures"

DESCRIPTIONS = {
    "harbor": (
        "A large white boat rests on calm blue water beside a long wooden dock. "
        "Two small gray gulls stand on the dock rail beside a coil of rope. "
        "Behind the boat, distant green hills rise under a pale morning sky. "
        "A red buoy floats left of the boat, and a small cabin with round "
        "windows sits on the rear deck."
    ),
    "arch": (
        "An indian traditional arch window casts sharp lattice shadows across a "
        "smooth stone floor. Warm golden sunlight enters from the left side. A "
        "small clay pot sits in the corner, and a thin red carpet runs toward a "
        "dark wooden door."
    ),
    "bridge": (
        "A huge steel suspension bridge spans a wide gray river at dusk. Orange "
        "lamps glow along the upper deck, and a lone cyclist crosses from the "
        "right side toward the far tower."
    ),
    "sparse": "A boat on calm water.",
}


def main() -> None:
    images_dir = FIXTURES / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, description in DESCRIPTIONS.items():
        image = make_placeholder_image(f"fixture:{name}")
        path = images_dir / f"{name}.png"
        image.save(path)
        reloaded = ImageRef.from_path(path)
        assert reloaded.content_hash == image.content_hash, f"PNG round-trip drift for {name}"
        rows.append(f"{image.content_hash}\t{description}")
        print(f"{name}: {image.content_hash[:16]}…  {len(content_words(description))} content words")
    tsv = FIXTURES / "descriptions.tsv"
    tsv.write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {tsv} and {len(rows)} images under {images_dir}")


if __name__ == "__main__":
    main()
