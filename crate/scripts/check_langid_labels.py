"""Cross-check the language ID evaluation labels against langdetect.

Usage: python3 scripts/check_langid_labels.py
"""
import pathlib
import sys

from langdetect import DetectorFactory, detect

DetectorFactory.seed = 0
root = pathlib.Path(__file__).resolve().parent.parent / "crates/core/data/langid/eval"
disagreements = 0
for path in sorted(root.glob("*.txt")):
    iso = path.stem
    snippets = [s.strip() for s in path.read_text().split("\n\n") if s.strip()]
    for s in snippets:
        got = detect(s)
        if got != iso:
            disagreements += 1
            print(f"{iso}: langdetect says {got}: {s[:60]}...")
    print(f"{iso}: {len(snippets)} snippets, shortest {min(map(len, snippets))} chars")
sys.exit(1 if disagreements else 0)
