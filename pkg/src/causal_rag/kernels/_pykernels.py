"""Pure-Python string kernels.

Reference implementations of the hot loops; the Cython module `_ckernels`
mirrors these signatures exactly. Both backends must agree bit-for-bit.
"""


def levenshtein(a: str, b: str) -> int:
    """Unit-cost character edit distance between two strings."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    # keep the inner loop over the shorter string
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        curr = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost)
        prev = curr
    return prev[-1]


def edit_ratio(a: str, b: str) -> float:
    """Normalized edit similarity: 1 - distance / max(len).

    Equal strings score 1.0 (including two empty strings).
    """
    if a == b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def token_subsequence(needle: tuple, haystack: tuple) -> bool:
    """True if `needle` occurs as a contiguous run inside `haystack`."""
    n = len(needle)
    if n == 0:
        return True
    h = len(haystack)
    if n > h:
        return False
    first = needle[0]
    for i in range(h - n + 1):
        if haystack[i] == first and haystack[i : i + n] == needle:
            return True
    return False
