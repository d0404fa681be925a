"""Noise-based and translation-based corpus augmentation and class balancing.

Three noise operators perturb a comment while keeping its context (and
therefore its label): synonym/antonym substitution, random stop-word
insertion, and bounded word shuffling. Translation augmentation converts
same-label comments from a donor language. Balancing tops up minority
classes with a mix of both until per-label counts hit the plan's targets.

RNG contract: every operator takes an explicit ``random.Random`` and draws
in a documented order, so outputs are replayable. Per-comment seeds are
derived from (config seed, comment id), making comment processing pure.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    Corpus,
    CorpusError,
    Label,
    LabelDistribution,
    LabeledComment,
    Language,
    Provenance,
    Split,
    distribution,
)
from .translation import TranslationRequest, TranslationService

__all__ = [
    "SynonymLexicon",
    "NoiseConfig",
    "BalancePlan",
    "BalanceStrategy",
    "AugmentationError",
    "load_lexicon",
    "load_stopwords",
    "replace_with_synonyms",
    "insert_stopwords",
    "shuffle_words",
    "add_noise",
    "plan_balance",
    "balance_corpus",
    "build_translated_corpus",
]


class AugmentationError(Exception):
    pass


@dataclass(frozen=True)
class SynonymLexicon:
    """Case-insensitive word -> replacement map; antonyms are flagged."""

    language: Language
    entries: dict[str, tuple[tuple[str, bool], ...]]  # word -> ((replacement, is_antonym), ...)

    def __post_init__(self):
        normalized = {}
        for word, reps in self.entries.items():
            key = word.casefold()
            kept = tuple((r, a) for r, a in reps if r.casefold() != key)
            if not kept:
                raise AugmentationError(
                    f"lexicon entry {word!r} maps only to itself"
                )
            normalized[key] = kept
        object.__setattr__(self, "entries", normalized)

    def replacements(self, word: str, include_antonyms: bool = False) -> tuple[str, ...]:
        reps = self.entries.get(word.casefold(), ())
        return tuple(r for r, is_ant in reps if include_antonyms or not is_ant)


def load_lexicon(path: str | Path, language: Language) -> SynonymLexicon:
    """Parse a lexicon file: ``word TAB rep1,rep2,...`` with ``!`` marking antonyms."""
    entries: dict[str, tuple[tuple[str, bool], ...]] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, _, reps = line.partition("\t")
        if not reps:
            raise AugmentationError(f"malformed lexicon line: {raw!r}")
        parsed = tuple(
            (r.lstrip("!"), r.startswith("!")) for r in reps.split(",") if r.strip()
        )
        entries[word] = parsed
    return SynonymLexicon(language, entries)


def load_stopwords(path: str | Path) -> tuple[str, ...]:
    words = tuple(
        w.strip()
        for w in Path(path).read_text(encoding="utf-8").splitlines()
        if w.strip()
    )
    return words


@dataclass(frozen=True)
class NoiseConfig:
    """Parameters for the three noise operators and their seeding.

    Defaults are mild on purpose: heavy perturbation would stop "keeping
    the context the same" and endanger label soundness. Antonym swaps are
    off by default for the same reason.
    """

    synonym_swap_prob: float = 0.15
    stopword_insert_prob: float = 0.10
    shuffle_window: int = 2
    max_operations_fraction: float = 0.3
    seed: int = 0
    lexicon: SynonymLexicon | None = None
    stopwords: tuple[str, ...] = ()
    include_antonyms: bool = False

    def __post_init__(self):
        if not 0.0 <= self.synonym_swap_prob <= 1.0:
            raise AugmentationError("synonym_swap_prob must be in [0, 1]")
        if not 0.0 <= self.stopword_insert_prob <= 1.0:
            raise AugmentationError("stopword_insert_prob must be in [0, 1]")
        if self.shuffle_window < 1:
            raise AugmentationError("shuffle_window must be >= 1")
        if not 0.0 < self.max_operations_fraction <= 1.0:
            raise AugmentationError("max_operations_fraction must be in (0, 1]")

    def to_manifest(self) -> dict:
        return {
            "synonym_swap_prob": self.synonym_swap_prob,
            "stopword_insert_prob": self.stopword_insert_prob,
            "shuffle_window": self.shuffle_window,
            "max_operations_fraction": self.max_operations_fraction,
            "seed": self.seed,
            "include_antonyms": self.include_antonyms,
            "lexicon_language": self.lexicon.language.value if self.lexicon else None,
            "stopword_count": len(self.stopwords),
        }


def replace_with_synonyms(
    tokens: list[str],
    lexicon: SynonymLexicon,
    prob: float,
    rng: random.Random,
    include_antonyms: bool = False,
    max_changes: int | None = None,
) -> list[str]:
    """Independently replace each in-lexicon token with probability ``prob``.

    Draw order: one uniform per eligible token, then one choice draw when
    the replacement fires. Out-of-lexicon tokens consume no draws. Stops
    drawing once ``max_changes`` replacements have been made.
    """
    out = list(tokens)
    changes = 0
    for i, tok in enumerate(tokens):
        if max_changes is not None and changes >= max_changes:
            break
        reps = lexicon.replacements(tok, include_antonyms)
        if not reps:
            continue
        if rng.random() < prob:
            out[i] = rng.choice(reps)
            changes += 1
    return out


def insert_stopwords(
    tokens: list[str],
    stopwords: tuple[str, ...] | list[str],
    prob: float,
    rng: random.Random,
    max_changes: int | None = None,
) -> list[str]:
    """At each of the len+1 gaps, insert a uniformly chosen stop word with
    probability ``prob``; original token order is preserved."""
    if prob > 0 and not stopwords:
        raise AugmentationError("stop-word insertion requested with empty list")
    out: list[str] = []
    changes = 0
    for gap in range(len(tokens) + 1):
        exhausted = max_changes is not None and changes >= max_changes
        if not exhausted and rng.random() < prob:
            out.append(rng.choice(stopwords))
            changes += 1
        if gap < len(tokens):
            out.append(tokens[gap])
    return out


def shuffle_words(tokens: list[str], window: int, rng: random.Random) -> list[str]:
    """Permute tokens so no token moves more than ``window`` positions.

    Each position i gets a key i + U[0, window); a stable sort of the keys
    yields a permutation whose displacements are provably < window, so a
    window of 1 is the identity and the bound is always respected.
    """
    if window < 1:
        raise AugmentationError("shuffle window must be >= 1")
    keys = [i + rng.uniform(0.0, float(window)) for i in range(len(tokens))]
    order = sorted(range(len(tokens)), key=keys.__getitem__)
    return [tokens[i] for i in order]


def _comment_rng(seed: int, comment_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{comment_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def add_noise(
    comment: LabeledComment, config: NoiseConfig, new_id: str | None = None
) -> LabeledComment:
    """Apply synonym swap -> stop-word insert -> shuffle to one raw comment.

    Label and language are copied unchanged; provenance becomes noise_aug
    with source_id pointing back at the input. The number of altered
    tokens (swaps + insertions) is capped at max_operations_fraction of
    the token count.
    """
    if comment.provenance is not Provenance.RAW:
        raise AugmentationError(
            f"noise augmentation requires a raw comment, got {comment.provenance.value}"
        )
    tokens = comment.text.split()
    if not tokens:
        raise AugmentationError(f"comment {comment.id!r} tokenizes to nothing")
    rng = _comment_rng(config.seed, comment.id)
    budget = max(1, int(config.max_operations_fraction * len(tokens)))
    out = tokens
    if config.lexicon is not None and config.synonym_swap_prob > 0:
        out = replace_with_synonyms(
            out,
            config.lexicon,
            config.synonym_swap_prob,
            rng,
            include_antonyms=config.include_antonyms,
            max_changes=budget,
        )
        budget -= sum(1 for a, b in zip(tokens, out) if a != b)
    if config.stopword_insert_prob > 0 and budget > 0:
        out = insert_stopwords(
            out, config.stopwords, config.stopword_insert_prob, rng, max_changes=budget
        )
    out = shuffle_words(out, config.shuffle_window, rng)
    return LabeledComment(
        id=new_id or f"{comment.id}#noise",
        text=" ".join(out),
        label=comment.label,
        language=comment.language,
        provenance=Provenance.NOISE_AUG,
        source_id=comment.id,
    )


class BalanceStrategy:
    TO_MAJORITY = "to_majority"
    EXPLICIT_TARGETS = "explicit_targets"


@dataclass(frozen=True)
class BalancePlan:
    """Per-label target counts plus how deficits split between noise and
    translation (translation_share of each deficit goes to donors, capped
    by donor availability; the remainder is noise)."""

    targets: dict[Label, int]
    current: dict[Label, int]
    translation_share: float = 0.0

    def __post_init__(self):
        for label in Label:
            if self.targets[label] < self.current[label]:
                raise AugmentationError(
                    f"target for {label.value} ({self.targets[label]}) is below the "
                    f"current count ({self.current[label]}); targets only add data"
                )
        if not 0.0 <= self.translation_share <= 1.0:
            raise AugmentationError("translation_share must be in [0, 1]")

    def deficit(self, label: Label) -> int:
        return self.targets[label] - self.current[label]

    def to_manifest(self) -> dict:
        return {
            "targets": {l.value: self.targets[l] for l in Label},
            "current": {l.value: self.current[l] for l in Label},
            "translation_share": self.translation_share,
        }


def plan_balance(
    dist: LabelDistribution,
    strategy: str = BalanceStrategy.TO_MAJORITY,
    explicit: dict[Label, int] | None = None,
    translation_share: float = 0.0,
) -> BalancePlan:
    if dist.total == 0:
        raise AugmentationError("cannot plan balancing for an empty distribution")
    current = {l: dist.count(l) for l in Label}
    if strategy == BalanceStrategy.TO_MAJORITY:
        top = max(current.values())
        targets = {l: top for l in Label}
    elif strategy == BalanceStrategy.EXPLICIT_TARGETS:
        if explicit is None:
            raise AugmentationError("explicit_targets strategy needs explicit targets")
        targets = {l: explicit[l] for l in Label}
    else:
        raise AugmentationError(f"unknown balancing strategy {strategy!r}")
    return BalancePlan(targets, current, translation_share)


def balance_corpus(
    corpus: Corpus,
    plan: BalancePlan,
    noise_config: NoiseConfig,
    translator: TranslationService | None = None,
    donor_corpora: list[Corpus] | None = None,
) -> Corpus:
    """Top up each label to the plan target with noise and translation.

    Noise sources are raw comments of the same label sampled uniformly
    with replacement (deficits routinely exceed the raw pool). Translation
    sources are donor comments of the same label, taken in donor order.
    Output order: the raw corpus first, then augmented comments sorted by
    source id and operation index.
    """
    donor_corpora = donor_corpora or []
    by_label: dict[Label, list[LabeledComment]] = {l: [] for l in Label}
    for c in corpus:
        by_label[c.label].append(c)
    donors_by_label: dict[Label, list[tuple[LabeledComment, Corpus]]] = {
        l: [] for l in Label
    }
    for donor in donor_corpora:
        for c in donor:
            donors_by_label[c.label].append((c, donor))

    target_language = corpus.language_tag
    if not isinstance(target_language, Language):
        raise AugmentationError("balance_corpus needs a single-language corpus")

    augmented: list[LabeledComment] = []
    existing_ids = corpus.ids()
    for label in Label:
        deficit = plan.deficit(label)
        if deficit == 0:
            continue
        donors = [
            (c, d) for c, d in donors_by_label[label]
            if c.language != target_language
        ]
        n_translate = min(int(round(deficit * plan.translation_share)), len(donors))
        if translator is None:
            n_translate = 0
        n_noise = deficit - n_translate
        if n_noise > 0 and not by_label[label]:
            raise AugmentationError(
                f"cannot fill deficit for label {label.value}: no raw comments "
                f"of that label and not enough donors"
            )
        rng = _comment_rng(noise_config.seed, f"balance:{label.value}")
        for k in range(n_noise):
            source = rng.choice(by_label[label])
            new_id = f"{source.id}#noise{k}"
            while new_id in existing_ids:
                new_id += "_"
            augmented.append(add_noise(source, noise_config, new_id=new_id))
            existing_ids.add(new_id)
        for k, (donor_comment, _) in enumerate(donors[:n_translate]):
            request = TranslationRequest(
                donor_comment.text, donor_comment.language, target_language
            )
            translated = translator.translate(request)
            new_id = f"{donor_comment.id}#mt{k}"
            while new_id in existing_ids:
                new_id += "_"
            augmented.append(
                LabeledComment(
                    id=new_id,
                    text=translated,
                    label=donor_comment.label,
                    language=target_language,
                    provenance=Provenance.TRANSLATED,
                    source_id=donor_comment.id,
                )
            )
            existing_ids.add(new_id)

    augmented.sort(key=lambda c: (c.source_id or "", c.id))
    out = corpus.with_comments(list(corpus.comments) + augmented)
    got = distribution(out)
    for label in Label:
        if got.count(label) != plan.targets[label]:
            raise AugmentationError(
                f"balancing bug: label {label.value} ended at {got.count(label)}, "
                f"target {plan.targets[label]}"
            )
    return out


def build_translated_corpus(
    sources: list[Corpus],
    translator: TranslationService,
    target_language: Language,
    max_in_flight: int = 4,
) -> Corpus:
    """Translate every source comment into the target language.

    Labels are preserved, provenance becomes translated, and the output
    distribution equals the sum of the source distributions. On partial
    provider failure the successes live in the translation cache, so a
    rerun only re-requests the failed ids.
    """
    if not sources:
        return Corpus((), Split.TRAINING, target_language)
    comments: list[LabeledComment] = []
    requests: list[TranslationRequest] = []
    flat: list[LabeledComment] = []
    for source in sources:
        for c in source:
            if c.language == target_language:
                raise AugmentationError(
                    f"source comment {c.id!r} is already in {target_language.value}"
                )
            flat.append(c)
            requests.append(TranslationRequest(c.text, c.language, target_language))
    result = translator.translate_batch(requests, max_in_flight=max_in_flight)
    if result.errors:
        failed_ids = sorted(flat[i].id for i in result.errors)
        raise AugmentationError(
            f"translation failed for {len(failed_ids)} comments "
            f"(successes are cached for resumption): {failed_ids}"
        )
    for c, translated in zip(flat, result.texts):
        comments.append(
            LabeledComment(
                id=f"{c.language.value}:{c.id}",
                text=translated,
                label=c.label,
                language=target_language,
                provenance=Provenance.TRANSLATED,
                source_id=c.id,
            )
        )
    return Corpus(tuple(comments), sources[0].split, target_language)
