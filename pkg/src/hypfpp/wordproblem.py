"""Word problem machinery for the group models.

Letters are small ints: generator i is letter 2*i, its inverse 2*i+1, so
``letter ^ 1`` inverts.  Free groups use free reduction; the genus-2 surface
group <a,b,c,d | [a,b][c,d]> uses Dehn's algorithm, valid because the
presentation satisfies the C'(1/6) small-cancellation condition (all pieces
of the length-8 relator have length 1).
"""

from __future__ import annotations

from functools import lru_cache

GEN_NAMES = "abcdefghijklmnopqrstuvwxyz"

# [a,b][c,d] = a b a^-1 b^-1 c d c^-1 d^-1
SURFACE_RELATOR = (0, 2, 1, 3, 4, 6, 5, 7)


def inverse_letter(letter: int) -> int:
    return letter ^ 1


def invert(word: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(l ^ 1 for l in reversed(word))


def free_reduce(word) -> tuple[int, ...]:
    out: list[int] = []
    for l in word:
        if out and out[-1] == l ^ 1:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


def append_letter(word: tuple[int, ...], letter: int) -> tuple[int, ...]:
    """Reduced word times one generator, still freely reduced."""
    if word and word[-1] == letter ^ 1:
        return word[:-1]
    return word + (letter,)


def letters_to_str(word) -> str:
    out = []
    for l in word:
        name = GEN_NAMES[l // 2]
        out.append(name.upper() if l & 1 else name)
    return "".join(out) or "e"


def str_to_letters(text: str) -> tuple[int, ...]:
    if text == "e":
        return ()
    out = []
    for ch in text:
        idx = GEN_NAMES.find(ch.lower())
        if idx < 0:
            raise ValueError(f"bad generator letter {ch!r}")
        out.append(2 * idx + (1 if ch.isupper() else 0))
    return tuple(out)


@lru_cache(maxsize=1)
def _dehn_table() -> dict[tuple[int, ...], tuple[int, ...]]:
    """Map from long relator subwords (length >= 5) to their short complements.

    If s is an initial segment of a cyclic rotation r = s+t of the relator or
    its inverse, then s = t^-1 in the group.  Pieces have length 1, so no
    subword of length >= 2 occurs in two distinct rotations: the table is
    unambiguous.
    """
    table: dict[tuple[int, ...], tuple[int, ...]] = {}
    for base in (SURFACE_RELATOR, invert(SURFACE_RELATOR)):
        n = len(base)
        for shift in range(n):
            rot = base[shift:] + base[:shift]
            for length in range(n, n // 2, -1):
                s, t = rot[:length], rot[length:]
                repl = invert(t)
                prev = table.get(s)
                assert prev is None or prev == repl
                table[s] = repl
    return table


def dehn_reduce(word) -> tuple[int, ...]:
    """Shorten a word with Dehn's algorithm until no >half-relator subword remains.

    The result is empty iff the word represents the identity.
    """
    table = _dehn_table()
    relator_len = len(SURFACE_RELATOR)
    w = free_reduce(word)
    changed = True
    while changed:
        changed = False
        n = len(w)
        for start in range(n):
            # longest match first
            for length in range(min(relator_len, n - start), relator_len // 2, -1):
                segment = w[start : start + length]
                repl = table.get(segment)
                if repl is not None:
                    w = free_reduce(w[:start] + repl + w[start + length :])
                    changed = True
                    break
            if changed:
                break
    return w


def surface_is_identity(word) -> bool:
    return dehn_reduce(word) == ()


def surface_equal(w1, w2) -> bool:
    return dehn_reduce(tuple(w1) + invert(tuple(w2))) == ()


def abelianized(word, rank: int) -> tuple[int, ...]:
    counts = [0] * rank
    for l in word:
        counts[l // 2] += -1 if l & 1 else 1
    return tuple(counts)
