#!/usr/bin/env python3
"""Benchmark the compiled string kernels against the pure-Python fallback.

Times the three hot functions on workloads shaped like real retrieval:
connective-vs-connective edit distances (short phrases, a few words each)
and token containment scans over sentence-length token tuples.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import argparse
import random
import time

from causal_rag.kernels import _pykernels

try:
    from causal_rag.kernels import _ckernels
except ImportError:  # pragma: no cover - compiled module not built
    _ckernels = None

WORDS = (
    "caused", "by", "led", "to", "due", "because", "of", "resulted",
    "in", "triggered", "induced", "as", "a", "result", "owing",
    "brought", "about", "stemmed", "from", "gave", "rise", "thanks",
)


def make_phrases(rng: random.Random, count: int) -> list[str]:
    return [" ".join(rng.choices(WORDS, k=rng.randint(1, 4))) for _ in range(count)]


def make_token_cases(rng: random.Random, count: int) -> list[tuple[tuple, tuple]]:
    cases = []
    for _ in range(count):
        sentence = tuple(rng.choices(WORDS, k=rng.randint(8, 24)))
        if rng.random() < 0.5:
            start = rng.randrange(len(sentence))
            end = min(len(sentence), start + rng.randint(1, 3))
            needle = sentence[start:end]
        else:
            needle = tuple(rng.choices(WORDS, k=rng.randint(1, 3)))
        cases.append((needle, sentence))
    return cases


def bench(label: str, fn, repeat: int = 5) -> float:
    best = min(timed(fn) for _ in range(repeat))
    print(f"  {label:<28} {best * 1000:9.2f} ms")
    return best


def timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def run_suite(name: str, mod, phrases: list[str], token_cases: list[tuple[tuple, tuple]]) -> dict[str, float]:
    print(f"{name}:")
    pairs = list(zip(phrases, reversed(phrases)))
    results = {
        "levenshtein": bench("levenshtein", lambda: [mod.levenshtein(a, b) for a, b in pairs]),
        "edit_ratio": bench("edit_ratio", lambda: [mod.edit_ratio(a, b) for a, b in pairs]),
        "token_subsequence": bench(
            "token_subsequence", lambda: [mod.token_subsequence(n, h) for n, h in token_cases]
        ),
    }
    return results


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=20000, help="phrase pairs per trial")
    parser.add_argument("--scans", type=int, default=50000, help="token containment scans per trial")
    parser.add_argument("--seed", type=int, default=0, help="workload RNG seed")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    phrases = make_phrases(rng, args.pairs)
    token_cases = make_token_cases(rng, args.scans)

    py = run_suite("pure python", _pykernels, phrases, token_cases)
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return

    cy = run_suite("compiled", _ckernels, phrases, token_cases)
    print("speedup (pure python / compiled):")
    for key in py:
        print(f"  {key:<28} {py[key] / cy[key]:9.2f}x")


if __name__ == "__main__":
    main()
