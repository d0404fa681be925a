"""Experiment orchestration: build the three dataset variants, run the
model x language x variant matrix, and emit reports.

One JSON config file describes an experiment end to end. Every stage
writes its outputs plus a content-hash stamp, so reruns with unchanged
inputs skip recomputation and two clean runs produce identical artifacts.

Exit codes: 0 success, 1 experiment failure, 2 configuration/input error.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click

from .augmentation import (
    AugmentationError,
    BalanceStrategy,
    NoiseConfig,
    balance_corpus,
    build_translated_corpus,
    load_lexicon,
    load_stopwords,
    plan_balance,
)
from .corpus import (
    ColumnMap,
    Corpus,
    CorpusError,
    Label,
    Language,
    Split,
    distribution,
    load_corpus,
    save_corpus,
    split_train_validation,
    write_manifest,
)
from .evaluation import EvaluationError, evaluate, render_report
from .models.training import (
    ModelKind,
    ModelSpec,
    TrainingError,
    TrainingRun,
    build_classifier,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .translation import (
    StubTranslator,
    HttpTranslator,
    TranslationCache,
    TranslationError,
    TranslationService,
)

__all__ = ["ExperimentConfig", "ConfigError", "main", "run_all"]

# Published TRAC-2 Sub-Task A label counts (NAG, OAG, CAG) used to sanity-check
# ingested corpora against the official release.
TRAC2_PUBLISHED_COUNTS = {
    ("en", "training"): (3375, 453, 435),
    ("en", "testing"): (836, 117, 113),
    ("hi", "training"): (2245, 829, 910),
    ("hi", "testing"): (578, 211, 208),
    ("bn", "training"): (2078, 898, 850),
    ("bn", "testing"): (522, 218, 217),
}

# Per-language training targets of the published augmented (semi-noisy) corpora.
PUBLISHED_AUGMENTED_TARGETS = {
    "en": {"NAG": 3375, "OAG": 2251, "CAG": 2546},
    "hi": {"NAG": 2245, "OAG": 3497, "CAG": 1810},
    "bn": {"NAG": 2078, "OAG": 1959, "CAG": 1966},
}

# Published distribution of the fully machine-translated English training set.
PUBLISHED_TRANSLATED_COUNTS = (4373, 3096, 2588)

VARIANTS = ("raw", "semi_noisy", "machine_translated")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    seed: int
    output_dir: Path
    variant: str
    languages: list[Language]
    datasets: dict[str, dict[str, str]]  # lang -> {"training": path, "testing": path}
    models: list[ModelSpec]
    validation_fraction: float = 0.1
    column_map: ColumnMap = field(default_factory=ColumnMap)
    delimiter: str = ","
    donor_languages: list[Language] = field(default_factory=list)
    translation_target: Language = Language.EN
    noise: dict = field(default_factory=dict)
    balance: dict = field(default_factory=dict)
    translator: dict = field(default_factory=dict)
    offline: bool = False
    workers: int = 1
    plots: bool = False
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data.update(overrides or {})
        try:
            variant = data["variant"]
            if variant not in VARIANTS:
                raise ConfigError(f"unknown variant {variant!r}")
            languages = [Language(l) for l in data["languages"]]
            models = []
            for m in data.get("models", []):
                kind = ModelKind(m["kind"])
                for lang in languages:
                    models.append(
                        ModelSpec(
                            kind=kind,
                            hyperparameters=m.get("hyperparameters", {}),
                            language=lang,
                            checkpoint=m.get("checkpoint"),
                        )
                    )
            cfg = cls(
                seed=int(data.get("seed", 0)),
                output_dir=Path(data["output_dir"]),
                variant=variant,
                languages=languages,
                datasets=data["datasets"],
                models=models,
                validation_fraction=float(data.get("validation_fraction", 0.1)),
                column_map=ColumnMap(**data.get("column_map", {})),
                delimiter=data.get("delimiter", ","),
                donor_languages=[
                    Language(l) for l in data.get("donor_languages", [])
                ],
                translation_target=Language(data.get("translation_target", "en")),
                noise=data.get("noise", {}),
                balance=data.get("balance", {}),
                translator=data.get("translator", {}),
                offline=bool(data.get("offline", False)),
                workers=int(data.get("workers", 1)),
                plots=bool(data.get("plots", False)),
                raw=data,
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        referenced = set(self.languages) | set(self.donor_languages)
        for lang in referenced:
            entry = self.datasets.get(lang.value)
            if entry is None:
                raise ConfigError(f"no dataset paths for language {lang.value!r}")
            for split in ("training", "testing"):
                if split in entry and not Path(entry[split]).is_file():
                    raise ConfigError(
                        f"dataset file missing: {entry[split]} "
                        f"({lang.value} {split})"
                    )
        if self.variant == "machine_translated" and not self.donor_languages:
            raise ConfigError(
                "machine_translated variant needs at least one donor language"
            )

    def noise_config(self, language: Language) -> NoiseConfig:
        n = self.noise
        lexicon = None
        lex_paths = n.get("lexicons", {})
        if language.value in lex_paths:
            lexicon = load_lexicon(lex_paths[language.value], language)
        stopwords: tuple[str, ...] = ()
        sw_paths = n.get("stopword_lists", {})
        if language.value in sw_paths:
            stopwords = load_stopwords(sw_paths[language.value])
        return NoiseConfig(
            synonym_swap_prob=n.get("synonym_swap_prob", 0.15),
            stopword_insert_prob=n.get("stopword_insert_prob", 0.10 if stopwords else 0.0),
            shuffle_window=n.get("shuffle_window", 2),
            max_operations_fraction=n.get("max_operations_fraction", 0.3),
            seed=n.get("seed", self.seed),
            lexicon=lexicon,
            stopwords=stopwords,
            include_antonyms=n.get("include_antonyms", False),
        )

    def translation_service(self) -> TranslationService:
        t = self.translator
        cache = TranslationCache(t.get("cache"))
        provider_name = t.get("provider", "stub")
        if provider_name == "stub" or self.offline:
            table = {}
            if t.get("table_file"):
                table = json.loads(Path(t["table_file"]).read_text(encoding="utf-8"))
            provider = StubTranslator(table)
        elif provider_name == "http":
            provider = HttpTranslator(t["url"], t.get("api_key_env", "AGGDETECT_MT_API_KEY"))
        else:
            raise ConfigError(f"unknown translation provider {provider_name!r}")
        return TranslationService(provider, cache)


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _cell_hash(parts) -> str:
    return hashlib.sha256(
        json.dumps(parts, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


def _stamp_path(out_dir: Path, name: str) -> Path:
    return out_dir / "stamps" / f"{name}.json"


def _is_fresh(out_dir: Path, name: str, digest: str) -> bool:
    stamp = _stamp_path(out_dir, name)
    if not stamp.is_file():
        return False
    try:
        return json.loads(stamp.read_text())["hash"] == digest
    except (json.JSONDecodeError, KeyError):
        return False


def _write_stamp(out_dir: Path, name: str, digest: str) -> None:
    stamp = _stamp_path(out_dir, name)
    stamp.parent.mkdir(parents=True, exist_ok=True)
    stamp.write_text(json.dumps({"hash": digest}), encoding="utf-8")


def _ingested_path(cfg: ExperimentConfig, language: Language, split: Split) -> Path:
    return cfg.output_dir / "ingest" / f"{language.value}_{split.value}.csv"


def _training_corpus_path(cfg: ExperimentConfig, language: Language) -> Path:
    if cfg.variant == "raw":
        return _ingested_path(cfg, language, Split.TRAINING)
    if cfg.variant == "semi_noisy":
        return cfg.output_dir / "augment" / f"{language.value}_training.csv"
    return cfg.output_dir / "translate" / f"{language.value}_training.csv"


def cmd_ingest(cfg: ExperimentConfig, echo=click.echo) -> dict:
    """Load every referenced corpus, persist it, and print distributions."""
    results = {}
    skipped = 0
    languages = sorted(
        set(cfg.languages) | set(cfg.donor_languages), key=lambda l: l.value
    )
    for lang in languages:
        for split in (Split.TRAINING, Split.TESTING):
            src = cfg.datasets[lang.value].get(split.value)
            if src is None:
                continue
            src = Path(src)
            digest = _cell_hash(
                {"file": _file_hash(src), "column_map": vars(cfg.column_map),
                 "delimiter": cfg.delimiter}
            )
            name = f"ingest_{lang.value}_{split.value}"
            out_path = _ingested_path(cfg, lang, split)
            if _is_fresh(cfg.output_dir, name, digest) and out_path.is_file():
                skipped += 1
                echo(f"[ingest] {lang.value} {split.value}: up to date, skipped")
                continue
            corpus = load_corpus(src, lang, split, cfg.column_map, cfg.delimiter)
            save_corpus(corpus, out_path)
            dist = distribution(corpus)
            write_manifest(
                corpus,
                out_path.with_suffix(".json"),
                source_files=[str(src)],
                seed=cfg.seed,
            )
            echo(
                f"[ingest] {lang.value} {split.value}: "
                f"NAG {dist.count_nag} OAG {dist.count_oag} CAG {dist.count_cag} "
                f"total {dist.total}"
            )
            published = TRAC2_PUBLISHED_COUNTS.get((lang.value, split.value))
            if published and published != (
                dist.count_nag, dist.count_oag, dist.count_cag
            ):
                echo(
                    f"[ingest] warning: {lang.value} {split.value} deviates from "
                    f"the published TRAC-2 counts {published}"
                )
            _write_stamp(cfg.output_dir, name, digest)
            results[(lang.value, split.value)] = dist.as_dict()
    results["skipped"] = skipped
    return results


def _load_ingested(cfg: ExperimentConfig, language: Language, split: Split) -> Corpus:
    path = _ingested_path(cfg, language, split)
    if not path.is_file():
        raise ConfigError(
            f"missing ingested corpus {path}; run the ingest stage first"
        )
    return load_corpus(path, language, split)


def cmd_augment(cfg: ExperimentConfig, echo=click.echo) -> dict:
    """Build the balanced (semi-noisy) training corpora; test sets pass through."""
    results = {}
    skipped = 0
    strategy = cfg.balance.get("strategy", BalanceStrategy.TO_MAJORITY)
    translation_share = cfg.balance.get("translation_share", 0.0)
    translator = cfg.translation_service() if translation_share > 0 else None
    for lang in cfg.languages:
        raw = _load_ingested(cfg, lang, Split.TRAINING)
        out_path = cfg.output_dir / "augment" / f"{lang.value}_training.csv"
        explicit = None
        if strategy == BalanceStrategy.EXPLICIT_TARGETS:
            source = cfg.balance.get("explicit_targets", "published")
            if source == "published":
                source = PUBLISHED_AUGMENTED_TARGETS
            explicit = {Label(k): v for k, v in source[lang.value].items()}
        noise_config = cfg.noise_config(lang)
        digest = _cell_hash(
            {
                "raw": _file_hash(_ingested_path(cfg, lang, Split.TRAINING)),
                "strategy": strategy,
                "explicit": {k.value: v for k, v in explicit.items()} if explicit else None,
                "translation_share": translation_share,
                "noise": noise_config.to_manifest(),
            }
        )
        name = f"augment_{lang.value}"
        if _is_fresh(cfg.output_dir, name, digest) and out_path.is_file():
            skipped += 1
            echo(f"[augment] {lang.value}: up to date, skipped")
            continue
        plan = plan_balance(
            distribution(raw), strategy, explicit, translation_share
        )
        donors = [
            _load_ingested(cfg, d, Split.TRAINING)
            for d in cfg.donor_languages
            if d != lang
        ]
        balanced = balance_corpus(raw, plan, noise_config, translator, donors)
        save_corpus(balanced, out_path)
        dist = distribution(balanced)
        write_manifest(
            balanced,
            out_path.with_suffix(".json"),
            source_files=[str(_ingested_path(cfg, lang, Split.TRAINING))],
            seed=cfg.seed,
            extra={"plan": plan.to_manifest(), "noise": noise_config.to_manifest()},
        )
        echo(
            f"[augment] {lang.value}: NAG {dist.count_nag} OAG {dist.count_oag} "
            f"CAG {dist.count_cag} total {dist.total}"
        )
        _write_stamp(cfg.output_dir, name, digest)
        results[lang.value] = dist.as_dict()
    results["skipped"] = skipped
    return results


def cmd_translate(cfg: ExperimentConfig, echo=click.echo) -> dict:
    """Build the fully machine-translated training corpus for the target language."""
    target = cfg.translation_target
    sources = [
        _load_ingested(cfg, d, Split.TRAINING)
        for d in cfg.donor_languages
        if d != target
    ]
    if not sources:
        raise ConfigError("no donor languages to translate from")
    out_path = cfg.output_dir / "translate" / f"{target.value}_training.csv"
    digest = _cell_hash(
        {
            "sources": [
                _file_hash(_ingested_path(cfg, d, Split.TRAINING))
                for d in cfg.donor_languages
                if d != target
            ],
            "target": target.value,
            "provider": cfg.translator.get("provider", "stub"),
        }
    )
    name = f"translate_{target.value}"
    if _is_fresh(cfg.output_dir, name, digest) and out_path.is_file():
        echo(f"[translate] {target.value}: up to date, skipped")
        return {"skipped": 1}
    service = cfg.translation_service()
    corpus = build_translated_corpus(
        sources, service, target, max_in_flight=cfg.workers
    )
    save_corpus(corpus, out_path)
    dist = distribution(corpus)
    write_manifest(
        corpus,
        out_path.with_suffix(".json"),
        source_files=[str(_ingested_path(cfg, d, Split.TRAINING)) for d in cfg.donor_languages],
        seed=cfg.seed,
    )
    echo(
        f"[translate] {target.value}: NAG {dist.count_nag} OAG {dist.count_oag} "
        f"CAG {dist.count_cag} total {dist.total}"
    )
    counts = (dist.count_nag, dist.count_oag, dist.count_cag)
    if counts != PUBLISHED_TRANSLATED_COUNTS:
        echo(
            f"[translate] note: counts differ from the published fully-translated "
            f"corpus {PUBLISHED_TRANSLATED_COUNTS} (expected unless using the "
            f"exact original sources)"
        )
    _write_stamp(cfg.output_dir, name, digest)
    return {"distribution": dist.as_dict(), "skipped": 0}


def _cell_name(spec: ModelSpec, cfg: ExperimentConfig) -> str:
    return f"{spec.kind.value}_{spec.language.value}_{cfg.variant}"


def _train_cell_hash(cfg: ExperimentConfig, spec: ModelSpec, train_path: Path) -> str:
    return _cell_hash(
        {
            "train_file": _file_hash(train_path),
            "spec": spec.to_manifest(),
            "seed": cfg.seed,
            "validation_fraction": cfg.validation_fraction,
        }
    )


def cmd_train(cfg: ExperimentConfig, echo=click.echo) -> dict:
    results = {}
    skipped = 0
    for spec in cfg.models:
        if cfg.offline and spec.kind in (
            ModelKind.BERT_BASE, ModelKind.BERT_MULTILINGUAL, ModelKind.GPT2_MEDIUM
        ) and (spec.checkpoint is None or not Path(spec.checkpoint).exists()):
            raise ConfigError(
                f"offline mode: {spec.kind.value} needs a local checkpoint directory"
            )
        lang = spec.language
        train_path = _training_corpus_path(cfg, lang)
        if not train_path.is_file():
            raise ConfigError(
                f"missing training corpus for cell {_cell_name(spec, cfg)}: "
                f"{train_path}"
            )
        name = f"train_{_cell_name(spec, cfg)}"
        run_dir = cfg.output_dir / "runs" / _cell_name(spec, cfg)
        digest = _train_cell_hash(cfg, spec, train_path)
        if _is_fresh(cfg.output_dir, name, digest) and (run_dir / "run.json").is_file():
            skipped += 1
            echo(f"[train] {_cell_name(spec, cfg)}: up to date, skipped")
            continue
        corpus = load_corpus(train_path, lang, Split.TRAINING)
        train_part, val_part = split_train_validation(
            corpus, cfg.validation_fraction, cfg.seed
        )
        handle = build_classifier(spec, train_corpus=train_part, seed=cfg.seed)
        run = train(handle, train_part, val_part, seed=cfg.seed)
        run.corpus_manifest = str(train_path.with_suffix(".json"))
        save_checkpoint(handle, run, run_dir)
        train_ids = sorted(train_part.ids() | val_part.ids())
        (run_dir / "train_ids.json").write_text(
            json.dumps(train_ids), encoding="utf-8"
        )
        echo(
            f"[train] {_cell_name(spec, cfg)}: {run.epochs_trained} epochs, "
            f"best val acc {max(run.val_accuracy):.3f}"
        )
        _write_stamp(cfg.output_dir, name, digest)
        results[_cell_name(spec, cfg)] = max(run.val_accuracy)
    results["skipped"] = skipped
    return results


def cmd_evaluate(cfg: ExperimentConfig, echo=click.echo) -> dict:
    results = {}
    skipped = 0
    for spec in cfg.models:
        lang = spec.language
        cell = _cell_name(spec, cfg)
        run_dir = cfg.output_dir / "runs" / cell
        if not (run_dir / "run.json").is_file():
            raise ConfigError(f"missing trained model for cell {cell}: {run_dir}")
        test_lang = cfg.translation_target if cfg.variant == "machine_translated" else lang
        test_path = _ingested_path(cfg, test_lang, Split.TESTING)
        if not test_path.is_file():
            raise ConfigError(f"missing test corpus for cell {cell}: {test_path}")
        digest = _cell_hash(
            {
                "run": _file_hash(run_dir / "run.json"),
                "test": _file_hash(test_path),
            }
        )
        name = f"evaluate_{cell}"
        metrics_path = run_dir / "metrics.json"
        if _is_fresh(cfg.output_dir, name, digest) and metrics_path.is_file():
            skipped += 1
            echo(f"[evaluate] {cell}: up to date, skipped")
            continue
        handle = load_checkpoint(run_dir)
        test_corpus = load_corpus(test_path, test_lang, Split.TESTING)
        train_ids = set(
            json.loads((run_dir / "train_ids.json").read_text(encoding="utf-8"))
        )
        report, cm = evaluate(handle, test_corpus, train_ids, variant=cfg.variant)
        metrics_path.write_text(
            json.dumps(
                {"report": report.to_manifest(), "confusion": cm.cells.tolist()},
                indent=2,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        echo(f"[evaluate] {cell}: accuracy {report.accuracy:.3f}")
        _write_stamp(cfg.output_dir, name, digest)
        results[cell] = report.accuracy
    results["skipped"] = skipped
    return results


def cmd_report(cfg: ExperimentConfig, echo=click.echo) -> dict:
    from .evaluation import ConfusionMatrix, MetricReport

    triples = []
    for spec in cfg.models:
        cell = _cell_name(spec, cfg)
        run_dir = cfg.output_dir / "runs" / cell
        metrics_path = run_dir / "metrics.json"
        run_path = run_dir / "run.json"
        if not metrics_path.is_file() or not run_path.is_file():
            raise ConfigError(f"missing evaluated run for cell {cell}")
        run_m = json.loads(run_path.read_text(encoding="utf-8"))
        metrics_m = json.loads(metrics_path.read_text(encoding="utf-8"))
        rm = metrics_m["report"]
        report = MetricReport(
            per_class=rm["per_class"],
            accuracy=rm["accuracy"],
            precision=rm["precision"],
            recall=rm["recall"],
            f1=rm["f1"],
            averaging=rm["averaging"],
            degenerate=rm["degenerate"],
            model_kind=rm["model_kind"],
            variant=rm["variant"],
            language=rm["language"],
        )
        run = TrainingRun(
            spec=spec,
            seed=run_m["seed"],
            train_loss=run_m["train_loss"],
            train_accuracy=run_m["train_accuracy"],
            val_loss=run_m["val_loss"],
            val_accuracy=run_m["val_accuracy"],
            best_epoch=run_m["best_epoch"],
        )
        triples.append((run, report, ConfusionMatrix(metrics_m["confusion"])))
    written = render_report(triples, cfg.output_dir / "report", plots=cfg.plots)
    echo(f"[report] wrote {len(written)} files to {cfg.output_dir / 'report'}")
    return {"files": [str(p) for p in written]}


def run_all(cfg: ExperimentConfig, echo=click.echo) -> dict:
    out = {"ingest": cmd_ingest(cfg, echo)}
    if cfg.variant == "semi_noisy":
        out["augment"] = cmd_augment(cfg, echo)
    elif cfg.variant == "machine_translated":
        out["translate"] = cmd_translate(cfg, echo)
    out["train"] = cmd_train(cfg, echo)
    out["evaluate"] = cmd_evaluate(cfg, echo)
    out["report"] = cmd_report(cfg, echo)
    return out


_CONFIG_ERRORS = (ConfigError, CorpusError)
_RUNTIME_ERRORS = (AugmentationError, TranslationError, TrainingError, EvaluationError)


def _dispatch(fn, config_path: str, overrides: dict) -> None:
    try:
        cfg = ExperimentConfig.load(config_path, overrides)
        fn(cfg)
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except _RUNTIME_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _overrides(variant, language, model, seed, offline, workers, out):
    data = {}
    if variant:
        data["variant"] = variant
    if language:
        data["languages"] = list(language)
    if model:
        data["models"] = [{"kind": m} for m in model]
    if seed is not None:
        data["seed"] = seed
    if offline:
        data["offline"] = True
    if workers is not None:
        data["workers"] = workers
    if out:
        data["output_dir"] = out
    return data


def _common_options(fn):
    fn = click.option("--config", required=True, type=click.Path())(fn)
    fn = click.option("--variant", type=click.Choice(VARIANTS))(fn)
    fn = click.option("--language", multiple=True)(fn)
    fn = click.option("--model", multiple=True)(fn)
    fn = click.option("--seed", type=int)(fn)
    fn = click.option("--offline", is_flag=True)(fn)
    fn = click.option("--workers", type=int)(fn)
    fn = click.option("--out", type=click.Path())(fn)
    return fn


@click.group()
def main():
    """Aggression-detection experiment workbench."""


def _make_command(name, fn, doc):
    @main.command(name=name, help=doc)
    @_common_options
    def _cmd(config, variant, language, model, seed, offline, workers, out):
        _dispatch(fn, config, _overrides(variant, language, model, seed, offline, workers, out))

    return _cmd


_make_command("ingest", cmd_ingest, "Load and verify the raw corpora.")
_make_command("augment", cmd_augment, "Build the balanced semi-noisy corpora.")
_make_command("translate", cmd_translate, "Build the machine-translated corpus.")
_make_command("train", cmd_train, "Train the configured model cells.")
_make_command("evaluate", cmd_evaluate, "Evaluate trained cells on test data.")
_make_command("report", cmd_report, "Render the combined metrics report.")
_make_command("all", run_all, "Run the full pipeline end to end.")


if __name__ == "__main__":
    main()
