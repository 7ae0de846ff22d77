"""Symbol sequences of the obstacle-index shift.

An itinerary lists the obstacles a trajectory hits in order; consecutive
symbols must differ, and for periodic itineraries the constraint wraps
around.  The number of admissible cyclic words of length n over m symbols
is (m-1)^n + (m-1)(-1)^n, the trace of the n-th power of the hollow
all-ones transition matrix.
"""

from .errors import (
    InadmissibleClosureError,
    InadmissibleWordError,
    ValidationError,
)


def validate_word(word, m, cyclic=True):
    """Check admissibility and return the word as a tuple of ints."""
    w = tuple(int(s) for s in word)
    if len(w) < 2:
        raise InadmissibleWordError(f"word {w} is shorter than 2 symbols")
    for s in w:
        if not 1 <= s <= m:
            raise InadmissibleWordError(f"symbol {s} outside 1..{m}")
    limit = len(w) if cyclic else len(w) - 1
    for j in range(limit):
        if w[j] == w[(j + 1) % len(w)]:
            raise InadmissibleWordError(
                f"word {w} repeats symbol {w[j]} at positions {j},{(j + 1) % len(w)}")
    return w


def _words(m, n, cyclic):
    # depth-first in lexicographic order
    word = [0] * n
    def rec(j):
        for s in range(1, m + 1):
            if j > 0 and s == word[j - 1]:
                continue
            if j == n - 1 and cyclic and s == word[0]:
                continue
            word[j] = s
            if j == n - 1:
                yield tuple(word)
            else:
                yield from rec(j + 1)
    return rec(0)


def iter_cyclic_words(m, n):
    """Lazily yield admissible cyclic words in lexicographic order."""
    if m < 3:
        raise ValidationError(f"need m >= 3 symbols, got {m}")
    if n < 2:
        raise ValidationError(f"no admissible cyclic word of length {n}")
    return _words(m, n, cyclic=True)


def enumerate_cyclic_words(m, n):
    """All admissible cyclic words of length n, lexicographically sorted."""
    return list(iter_cyclic_words(m, n))


def iter_linear_words(m, n):
    """Lazily yield words with distinct consecutive symbols (no wrap)."""
    if m < 3:
        raise ValidationError(f"need m >= 3 symbols, got {m}")
    if n < 1:
        raise ValidationError(f"no words of length {n}")
    if n == 1:
        return (tuple([s]) for s in range(1, m + 1))
    return _words(m, n, cyclic=False)


def count_fix(m, n):
    """Number of admissible cyclic words of length n (exact integer)."""
    if m < 3 or n < 1:
        raise ValidationError(f"count_fix needs m >= 3 and n >= 1, got {(m, n)}")
    return (m - 1) ** n + (m - 1) * (-1) ** n


def count_linear(m, n):
    return m * (m - 1) ** (n - 1)


def rotate_word(word, r):
    """Cyclic rotation: element j of the result is word[(j + r) % n]."""
    w = tuple(word)
    n = len(w)
    r %= n
    return w[r:] + w[:r]


def canonical_rotation(word):
    """Lexicographically smallest rotation and the shift that reaches it."""
    w = tuple(word)
    best, best_r = w, 0
    for r in range(1, len(w)):
        cand = rotate_word(w, r)
        if cand < best:
            best, best_r = cand, r
    return best, best_r


def truncate_periodic(prefix, n):
    """Close the first n symbols of a one-sided itinerary into a cycle.

    Raises when the closure is inadmissible (first symbol equals the
    n-th); the caller is expected to retry with n + 1.
    """
    w = tuple(int(s) for s in prefix)
    if len(w) < n:
        raise ValidationError(f"prefix of length {len(w)} is shorter than n={n}")
    head = w[:n]
    for j in range(n - 1):
        if head[j] == head[j + 1]:
            raise InadmissibleWordError(f"prefix {head} repeats symbol at {j}")
    if head[-1] == head[0]:
        raise InadmissibleClosureError(
            f"closure of {head} is inadmissible (ends where it starts); extend n by 1")
    return head


def admissible_closure(word, m):
    """The word itself if cyclically admissible, else closed through the
    lexicographically smallest extra symbol."""
    w = validate_word(word, m, cyclic=False)
    if w[-1] != w[0]:
        return w
    for s in range(1, m + 1):
        if s != w[-1] and s != w[0]:
            return w + (s,)
    raise InadmissibleWordError(f"cannot close {w} admissibly with {m} symbols")


def cylinder_metric(word_a, word_b, theta):
    """theta^r with r the radius of agreement about the central symbol."""
    if not 0.0 < theta < 1.0:
        raise ValidationError(f"theta must lie in (0,1), got {theta}")
    a, b = tuple(word_a), tuple(word_b)
    if a == b:
        return 0.0
    ca, cb = len(a) // 2, len(b) // 2
    r = 0
    while (0 <= ca - r and ca + r < len(a) and 0 <= cb - r and cb + r < len(b)
           and a[ca - r] == b[cb - r] and a[ca + r] == b[cb + r]):
        r += 1
    return theta ** r


def default_contraction(d_min, k_min):
    """Natural metric base 1/(1 + d_min k_min) for diagnostics."""
    if d_min <= 0.0 or k_min <= 0.0:
        raise ValidationError("contraction base needs positive d_min and k_min")
    return 1.0 / (1.0 + d_min * k_min)


def format_word(word):
    return ",".join(str(s) for s in word)


def parse_word(text):
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise InadmissibleWordError(f"cannot parse word {text!r}") from exc
