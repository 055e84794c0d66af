# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled string kernels: edit distance and contiguous token containment.

Mirrors `_pykernels` exactly; see that module for the reference semantics.
"""

from libc.stdlib cimport free, malloc


def levenshtein(str a, str b):
    """Unit-cost character edit distance between two strings."""
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if a == b:
        return 0
    if la == 0:
        return lb
    if lb == 0:
        return la
    # keep the inner loop over the shorter string
    if lb > la:
        a, b = b, a
        la, lb = lb, la

    cdef long *prev = <long *> malloc((lb + 1) * sizeof(long))
    cdef long *curr = <long *> malloc((lb + 1) * sizeof(long))
    if prev == NULL or curr == NULL:
        free(prev)
        free(curr)
        raise MemoryError()

    cdef Py_ssize_t i, j
    cdef long cost, best, tmp
    cdef Py_UCS4 ca
    cdef long result
    try:
        for j in range(lb + 1):
            prev[j] = j
        for i in range(1, la + 1):
            ca = a[i - 1]
            curr[0] = i
            for j in range(1, lb + 1):
                cost = 0 if ca == <Py_UCS4> b[j - 1] else 1
                best = prev[j] + 1
                tmp = curr[j - 1] + 1
                if tmp < best:
                    best = tmp
                tmp = prev[j - 1] + cost
                if tmp < best:
                    best = tmp
                curr[j] = best
            prev, curr = curr, prev
        result = prev[lb]
    finally:
        free(prev)
        free(curr)
    return result


def edit_ratio(str a, str b):
    """Normalized edit similarity: 1 - distance / max(len).

    Equal strings score 1.0 (including two empty strings).
    """
    if a == b:
        return 1.0
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    cdef Py_ssize_t longest = la if la > lb else lb
    return 1.0 - (<double> levenshtein(a, b)) / (<double> longest)


def token_subsequence(tuple needle, tuple haystack):
    """True if `needle` occurs as a contiguous run inside `haystack`."""
    cdef Py_ssize_t n = len(needle)
    if n == 0:
        return True
    cdef Py_ssize_t h = len(haystack)
    if n > h:
        return False
    cdef Py_ssize_t i, j
    cdef bint hit
    for i in range(h - n + 1):
        hit = True
        for j in range(n):
            if haystack[i + j] != needle[j]:
                hit = False
                break
        if hit:
            return True
    return False
