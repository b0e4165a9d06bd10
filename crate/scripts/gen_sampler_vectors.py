#!/usr/bin/env python3
"""Reference vectors for the review sampler, from a from-scratch Python
implementation of the documented generator: xorshift64* seeded with
seed ^ FNV-1a-64(platform slug), Floyd selection, ceil(rate * n) per
platform, task ids built from two further draws as v4 UUIDs."""

import json
import uuid
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/data/sampler_vectors.json"
MASK = (1 << 64) - 1


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK
    return h


class XorShift64Star:
    def __init__(self, seed):
        self.state = seed or 0x9E3779B97F4A7C15

    def next(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK


def floyd(rng, n, k):
    chosen = set()
    for j in range(n - k, n):
        t = rng.next() % (j + 1)
        chosen.add(j if t in chosen else t)
    return sorted(chosen)


def sample(seed, platform, n, rate_ppm=100_000):
    k = -(-rate_ppm * n // 1_000_000)
    rng = XorShift64Star(seed ^ fnv1a64(platform.encode()))
    picked = floyd(rng, n, k)
    ids = []
    for _ in picked:
        raw = rng.next().to_bytes(8, "little") + rng.next().to_bytes(8, "little")
        ids.append(str(uuid.UUID(bytes=raw, version=4)))
    return picked, ids


def main():
    sizes = {"pinterest": 0, "twitter": 1, "youtube": 5, "reddit": 9,
             "facebook": 10, "instagram": 30, "wikipedia": 101}
    vectors = []
    for seed in (42, 0, 2020):
        for platform, n in sizes.items():
            picked, ids = sample(seed, platform, n)
            vectors.append({"seed": seed, "platform": platform, "n": n,
                            "indices": picked, "task_ids": ids})
    OUT.write_text(json.dumps(vectors, indent=1) + "\n")


if __name__ == "__main__":
    main()
