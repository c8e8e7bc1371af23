import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, asdict
from enum import Enum
from typing import Dict, Sequence, Tuple


@dataclass(frozen=True)
class EvalPair:
    reference: str
    hypothesis: str
    id: str = ""


@dataclass(frozen=True)
class ScoreReport:
    cer: float
    wer: float
    char_edits: int
    char_total: int
    word_edits: int
    word_total: int
    pair_count: int

    def to_json(self):
        return asdict(self)


class CharClass(str, Enum):
    NUMERIC = "numeric"
    ALPHABETIC = "alphabetic"
    ALL = "all"


def damerau_levenshtein(a: Sequence, b: Sequence) -> int:
    """Optimal string alignment distance: insertions, deletions,
    substitutions and adjacent transpositions, no substring edited twice."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    two_ago = None
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1,         # deletion
                         cur[j - 1] + 1,      # insertion
                         prev[j - 1] + cost)  # substitution
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                cur[j] = min(cur[j], two_ago[j - 2] + 1)  # transposition
        two_ago, prev = prev, cur
    return prev[m]


def _nfc(text):
    return unicodedata.normalize("NFC", text)


def char_edits(pair: EvalPair) -> Tuple[int, int]:
    ref, hyp = _nfc(pair.reference), _nfc(pair.hypothesis)
    if len(ref) == 0:
        raise ValueError(f"pair {pair.id!r}: empty reference")
    return damerau_levenshtein(ref, hyp), len(ref)


def word_edits(pair: EvalPair) -> Tuple[int, int]:
    ref, hyp = _nfc(pair.reference).split(), _nfc(pair.hypothesis).split()
    if len(ref) == 0:
        raise ValueError(f"pair {pair.id!r}: reference has no tokens")
    return damerau_levenshtein(ref, hyp), len(ref)


def cer(pair: EvalPair) -> float:
    edits, total = char_edits(pair)
    return edits / total


def wer(pair: EvalPair) -> float:
    edits, total = word_edits(pair)
    return edits / total


def corpus_score(pairs: Sequence[EvalPair]) -> ScoreReport:
    """Micro-averaged CER and WER over all pairs."""
    if not pairs:
        raise ValueError("no pairs to score")
    c_edits = c_total = w_edits = w_total = 0
    for pair in pairs:
        ce, ct = char_edits(pair)
        we, wt = word_edits(pair)
        c_edits += ce
        c_total += ct
        w_edits += we
        w_total += wt
    return ScoreReport(cer=c_edits / c_total, wer=w_edits / w_total,
                       char_edits=c_edits, char_total=c_total,
                       word_edits=w_edits, word_total=w_total,
                       pair_count=len(pairs))


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    if len(a) != len(b):
        raise ValueError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("no labels to compare")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a, counts_b = Counter(a), Counter(b)
    expected = sum(counts_a[c] * counts_b[c] for c in counts_a) / (n * n)
    if expected == 1.0:
        # both raters constant on the same category
        if observed == 1.0:
            return 1.0
        raise ValueError("kappa is undefined: chance agreement is 1 but observed agreement is not")
    return (observed - expected) / (1.0 - expected)


ROMAN_NUMERAL = re.compile(r"M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})")


def is_roman_numeral(token: str) -> bool:
    return bool(token) and ROMAN_NUMERAL.fullmatch(token) is not None


def char_frequency(records, char_class: CharClass = CharClass.NUMERIC) -> Dict[str, float]:
    """Share of non-whitespace codepoints belonging to a character class.

    `records` are objects with a `transcript` or plain strings. Decimal digits
    are numeric; so are the letters of a token that is a Roman numeral as a
    whole. CharClass.ALL returns the frequency of every symbol."""
    char_class = CharClass(char_class)
    total = numeric = alphabetic = 0
    symbols = Counter()
    for record in records:
        transcript = _nfc(getattr(record, "transcript", record))
        for token in transcript.split():
            total += len(token)
            symbols.update(token)
            if is_roman_numeral(token):
                numeric += len(token)
                continue
            for ch in token:
                if ch.isdecimal():
                    numeric += 1
                elif ch.isalpha():
                    alphabetic += 1
    if total == 0:
        raise ValueError("corpus has no non-whitespace characters")

    if char_class is CharClass.NUMERIC:
        return {CharClass.NUMERIC.value: numeric / total}
    if char_class is CharClass.ALPHABETIC:
        return {CharClass.ALPHABETIC.value: alphabetic / total}
    return {symbol: count / total for symbol, count in sorted(symbols.items())}
