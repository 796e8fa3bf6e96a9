"""Text normalization profiles for lexical segmenters.

A profile is pure configuration: lowercasing, Arabic diacritic stripping,
letter folding (alef variants, dotless yaa, taa marbuta), a stopword list,
and optional light affix stemming. Applying a profile twice equals applying
it once; the stemmer iterates to a fixed point to keep that guarantee.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .corpus import tokenize

# Tashkeel, Quranic marks, superscript alef, and tatweel.
_DIACRITICS = re.compile(r"[ؐ-ًؚ-ٰٟۖ-ۭـ]")

_FOLDING = str.maketrans(
    {
        "أ": "ا",  # alef with hamza above
        "إ": "ا",  # alef with hamza below
        "آ": "ا",  # alef with madda
        "ٱ": "ا",  # alef wasla
        "ى": "ي",  # dotless yaa -> yaa
        "ة": "ه",  # taa marbuta -> haa
    }
)

# Ordered longest-first so the greediest prefix wins within one iteration.
_PREFIXES = ("وال", "فال", "بال",
             "كال", "ال", "لل", "و")
_SUFFIXES = ("ها", "ان", "ات", "ون",
             "ين", "ية", "يه", "ة", "ه",
             "ي", "ا")
_MIN_STEM = 3


@dataclass(frozen=True)
class NormalizationProfile:
    """Declarative text-normalization settings. Stateless and hashable so
    segmenters can expose it as an estimator parameter."""

    lowercase: bool = True
    strip_diacritics: bool = False
    fold_letters: bool = False
    stopword_list_id: str = "none"
    light_stemming: bool = False


DEFAULT_PROFILE = NormalizationProfile()
ARABIC_PROFILE = NormalizationProfile(
    lowercase=True,
    strip_diacritics=True,
    fold_letters=True,
    stopword_list_id="arabic",
    light_stemming=False,
)
ARABIC_STEMMING_PROFILE = NormalizationProfile(
    lowercase=True,
    strip_diacritics=True,
    fold_letters=True,
    stopword_list_id="arabic",
    light_stemming=True,
)

_stopword_cache: dict[str, frozenset[str]] = {}


def load_stopwords(list_id: str) -> frozenset[str]:
    """Load a one-token-per-line stopword file bundled under data/stopwords,
    or an empty set for 'none'. A filesystem path also works."""
    if list_id in _stopword_cache:
        return _stopword_cache[list_id]
    if list_id == "none":
        words: frozenset[str] = frozenset()
    else:
        try:
            text = (
                resources.files("convseg")
                .joinpath(f"data/stopwords/{list_id}.txt")
                .read_text(encoding="utf-8")
            )
        except (FileNotFoundError, ModuleNotFoundError):
            from pathlib import Path

            path = Path(list_id)
            if not path.exists():
                raise ValueError(f"unknown stopword list {list_id!r}") from None
            text = path.read_text(encoding="utf-8")
        words = frozenset(w.strip() for w in text.splitlines() if w.strip())
    _stopword_cache[list_id] = words
    return words


def light_stem(token: str) -> str:
    """Strip common Arabic prefixes and suffixes until nothing more applies,
    never leaving fewer than 3 characters."""
    current = token
    while True:
        changed = False
        for prefix in _PREFIXES:
            if current.startswith(prefix) and len(current) - len(prefix) >= _MIN_STEM:
                current = current[len(prefix):]
                changed = True
                break
        for suffix in _SUFFIXES:
            if current.endswith(suffix) and len(current) - len(suffix) >= _MIN_STEM:
                current = current[: -len(suffix)]
                changed = True
                break
        if not changed:
            return current


def normalize_token(token: str, profile: NormalizationProfile) -> str:
    if profile.lowercase:
        token = token.lower()
    if profile.strip_diacritics:
        token = _DIACRITICS.sub("", token)
    if profile.fold_letters:
        token = token.translate(_FOLDING)
    if profile.light_stemming:
        token = light_stem(token)
    return token


_normalized_stopword_cache: dict[tuple, frozenset[str]] = {}


def _matchable_stopwords(profile: NormalizationProfile) -> frozenset[str]:
    """Stopword entries carried through the same pre-stemming normalization
    as the tokens they must match, so folding cannot bypass the list."""
    base = NormalizationProfile(
        lowercase=profile.lowercase,
        strip_diacritics=profile.strip_diacritics,
        fold_letters=profile.fold_letters,
        stopword_list_id="none",
        light_stemming=False,
    )
    key = (profile.stopword_list_id, base)
    if key not in _normalized_stopword_cache:
        _normalized_stopword_cache[key] = frozenset(
            normalize_token(w, base) for w in load_stopwords(profile.stopword_list_id)
        )
    return _normalized_stopword_cache[key]


def terms(text: str, profile: NormalizationProfile = DEFAULT_PROFILE) -> list[str]:
    """Tokenize and normalize, dropping stopwords and tokens that normalize
    to nothing. Stopwords are matched after normalization (minus stemming) so
    the list may be written in unvoweled base forms."""
    stopwords = _matchable_stopwords(profile)
    out: list[str] = []
    unstemmered = NormalizationProfile(
        lowercase=profile.lowercase,
        strip_diacritics=profile.strip_diacritics,
        fold_letters=profile.fold_letters,
        stopword_list_id="none",
        light_stemming=False,
    )
    for raw in tokenize(text):
        base = normalize_token(raw, unstemmered)
        if not base or base in stopwords:
            continue
        token = light_stem(base) if profile.light_stemming else base
        if token:
            out.append(token)
    return out
