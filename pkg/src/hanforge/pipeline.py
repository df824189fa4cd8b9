"""Orchestration: preprocessing, joint training, prediction and evaluation.

Training interleaves corpora batch-wise (every batch comes from a single
corpus; corpora contribute batches proportionally to their size) with one
task loss per batch: CRF NLL for CWS/POS/NER, head+relation cross-entropy
(with golden segmentation and golden POS labels) for dependency parsing.

Prediction is deterministic given (model, input, lexicon, weight). The
dependency task runs two passes: the POS pass fixes the segmentation and
POS labels, the parse pass pools character features over exactly that
segmentation, so the two outputs can never disagree on tokens.
"""

import json
import sys
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import torch

from . import data as corpus_io
from .core import (CorpusTag, DepTree, LabelScheme, Segmentation, TagRegistry,
                   Task, Vocabulary, decode_bmes, decode_cross, decode_ner,
                   encode_bmes, encode_cross)
from .crf import Constraints, viterbi
from .encoder import EncoderConfig
from .errors import (ConfigError, CorpusFormatError, EmptyInput, HanforgeError,
                     LengthExceeded, UnknownTag)
from .lexicon import Lexicon, bias_matrix, compute_bias, max_match
from .metrics import cws_spans, span_f1, tagged_spans, uas_las
from .model import DepInstance, JointModel, TaskBatch, build_model
from .serialization import load, save  # re-exported; the container lives in serialization

__all__ = [
    "AnalysisResult", "CorpusSpec", "TrainingConfig", "TrainingData",
    "preprocess", "predict", "train", "finetune", "evaluate",
    "prepare_training_data", "set_cws_style", "save", "load",
]

_FORMATS = {"cws", "pos", "ner", "conll"}
_DEFAULT_FORMAT = {Task.CWS: "cws", Task.POS: "pos", Task.NER: "ner", Task.DEP: "conll"}


# --- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class CorpusSpec:
    """One training corpus: file, corpus-tag name and task.

    ``format`` defaults by task; POS and CWS specs may also point at a
    CoNLL file to reuse a dependency corpus's tokens and POS columns.
    """

    path: str
    tag: str
    task: Task
    format: Optional[str] = None

    @property
    def fmt(self) -> str:
        fmt = self.format or _DEFAULT_FORMAT[self.task]
        if fmt not in _FORMATS:
            raise ConfigError(f"unknown corpus format {fmt!r}")
        ok = {
            Task.CWS: {"cws", "conll"},
            Task.POS: {"pos", "conll"},
            Task.NER: {"ner"},
            Task.DEP: {"conll"},
        }[self.task]
        if fmt not in ok:
            raise ConfigError(f"format {fmt!r} cannot feed task {self.task.value}")
        return fmt


@dataclass
class TrainingConfig:
    corpora: list[CorpusSpec]
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    eval_split: float = 0.1
    grad_clip: float = 5.0
    encoder: dict = field(default_factory=dict)
    arc_dim: int = 64
    rel_dim: int = 32

    def validate(self) -> None:
        if not self.corpora:
            raise ConfigError("at least one corpus required")
        names = [spec.tag for spec in self.corpora]
        if len(set(names)) != len(names):
            raise ConfigError("corpus tag names must be unique")
        for spec in self.corpora:
            spec.fmt
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0.0 <= self.eval_split < 1.0:
            raise ConfigError("eval_split must lie in [0, 1)")

    @classmethod
    def from_json(cls, path) -> "TrainingConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            corpora = [
                CorpusSpec(c["path"], c["tag"], Task(c["task"]), c.get("format"))
                for c in raw.pop("corpora")
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad corpora entry in {path}: {exc}") from None
        known = {f.name for f in cls.__dataclass_fields__.values()} - {"corpora"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(corpora=corpora, **raw)


# --- corpus loading ------------------------------------------------------------

def _load_corpus(spec: CorpusSpec):
    fmt = spec.fmt
    if spec.task is Task.CWS:
        if fmt == "cws":
            return corpus_io.read_cws(spec.path)
        return [sent.seg for sent in corpus_io.read_dep(spec.path)]
    if spec.task is Task.POS:
        if fmt == "pos":
            return corpus_io.read_pos(spec.path)
        return [
            corpus_io.PosSentence(sent.tokens, sent.pos)
            for sent in corpus_io.read_dep(spec.path)
        ]
    if spec.task is Task.NER:
        sentences = corpus_io.read_ner(spec.path)
        for sent in sentences:  # gold must decode so evaluation can score it
            try:
                decode_ner(sent.chars, sent.labels)
            except HanforgeError as exc:
                raise CorpusFormatError(f"{spec.path}: {exc}") from None
        return sentences
    return corpus_io.read_dep(spec.path)


def _sentence_text(example) -> str:
    if isinstance(example, Segmentation):
        return example.chars
    if isinstance(example, corpus_io.NerSentence):
        return example.chars
    return "".join(example.tokens)


# --- preprocessing and batches ---------------------------------------------------

def preprocess(model: JointModel, sentences: Union[str, Sequence[str]],
               tag: CorpusTag) -> TaskBatch:
    """Tag id at column 0, character ids after it, right-padded with PAD."""
    if isinstance(sentences, str):
        sentences = [sentences]
    sentences = list(sentences)
    if not sentences:
        raise EmptyInput("no sentences to preprocess")
    if any(not s for s in sentences):
        raise EmptyInput("empty sentence")
    limit = model.encoder.config.max_len - 2
    for s in sentences:
        if len(s) > limit:
            raise LengthExceeded(f"sentence of {len(s)} chars exceeds limit {limit}")
    width = max(len(s) for s in sentences) + 1
    ids = torch.full((len(sentences), width), Vocabulary.pad_id, dtype=torch.long)
    mask = torch.zeros((len(sentences), width), dtype=torch.bool)
    for i, text in enumerate(sentences):
        ids[i, 0] = tag.vocab_id
        ids[i, 1:1 + len(text)] = torch.tensor(model.vocab.encode(text), dtype=torch.long)
        mask[i, :1 + len(text)] = True
    return TaskBatch(tag=tag, ids=ids, mask=mask,
                     lengths=[len(s) for s in sentences], sentences=sentences)


class TrainingData:
    """Tensor-ready batches over prepared examples, reshuffled per epoch."""

    def __init__(self, model: JointModel, prepared: list[tuple[CorpusTag, list]],
                 batch_size: int):
        self.model = model
        self.prepared = prepared
        self.batch_size = batch_size

    def _build(self, tag: CorpusTag, chunk: list) -> TaskBatch:
        texts = [text for text, _ in chunk]
        batch = preprocess(self.model, texts, tag)
        if tag.task is Task.DEP:
            batch.dep = [inst for _, inst in chunk]
            return batch
        width = batch.ids.shape[1] - 1
        labels = torch.zeros((len(chunk), width), dtype=torch.long)
        for i, (text, ids) in enumerate(chunk):
            labels[i, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        batch.labels = labels
        return batch

    def epoch(self, rng: np.random.Generator) -> list[TaskBatch]:
        batches = []
        for tag, examples in self.prepared:
            order = rng.permutation(len(examples))
            for lo in range(0, len(examples), self.batch_size):
                chunk = [examples[i] for i in order[lo:lo + self.batch_size]]
                batches.append(self._build(tag, chunk))
        index = rng.permutation(len(batches))
        return [batches[i] for i in index]

    def steps(self, rng: np.random.Generator):
        while True:
            yield from self.epoch(rng)

    @property
    def batches_per_epoch(self) -> int:
        return sum(
            (len(ex) + self.batch_size - 1) // self.batch_size for _, ex in self.prepared
        )


def _prepare_examples(model: JointModel, spec: CorpusSpec, raw: list) -> list:
    """(text, gold) pairs for one corpus, gold already index-encoded."""
    scheme = model.schemes.get(spec.task)
    limit = model.encoder.config.max_len - 2
    out = []
    for example in raw:
        text = _sentence_text(example)
        if len(text) > limit:
            raise CorpusFormatError(
                f"{spec.path}: sentence of {len(text)} chars exceeds model limit {limit}"
            )
        if spec.task is Task.DEP:
            inst = DepInstance(
                seg=example.seg,
                pos_ids=[model.pos_id(p) for p in example.pos],
                heads=list(example.heads),
                rel_ids=[model.rel_id(r) for r in example.rels],
            )
            out.append((text, inst))
            continue
        if spec.task is Task.CWS:
            labels = encode_bmes(example)
        elif spec.task is Task.POS:
            labels = encode_cross(example.seg, example.tags)
        else:
            labels = list(example.labels)
        try:
            out.append((text, [scheme.index[l] for l in labels]))
        except KeyError as exc:
            raise CorpusFormatError(
                f"{spec.path}: label {exc.args[0]!r} not in the model's {spec.task.value} scheme"
            ) from None
    return out


def prepare_training_data(model: JointModel, specs: Sequence[CorpusSpec],
                          batch_size: int) -> TrainingData:
    """Batches for corpora against an existing model's vocabulary and schemes."""
    prepared = []
    for spec in specs:
        tag = model.tags.get(spec.tag)
        if tag.task is not spec.task:
            raise ConfigError(f"tag {spec.tag!r} belongs to task {tag.task.value}")
        prepared.append((tag, _prepare_examples(model, spec, _load_corpus(spec))))
    return TrainingData(model, prepared, batch_size)


# --- training --------------------------------------------------------------------

def _split(raw: list, eval_split: float, rng: np.random.Generator) -> tuple[list, list]:
    order = rng.permutation(len(raw))
    n_eval = int(len(raw) * eval_split)
    eval_idx = set(order[:n_eval].tolist())
    train = [raw[i] for i in range(len(raw)) if i not in eval_idx]
    heldout = [raw[i] for i in sorted(eval_idx)]
    return train, heldout


def _build_artifacts(config: TrainingConfig, per_corpus_train: list):
    texts = []
    pos_categories: set[str] = set()
    ner_categories: set[str] = set()
    rel_labels: set[str] = set()
    task_seen: set[Task] = set()
    for spec, examples in per_corpus_train:
        task_seen.add(spec.task)
        for example in examples:
            texts.append(_sentence_text(example))
            if spec.task is Task.POS:
                pos_categories.update(example.tags)
            elif spec.task is Task.NER:
                for label in example.labels:
                    if label != "O":
                        ner_categories.add(label.split("-", 1)[1])
            elif spec.task is Task.DEP:
                pos_categories.update(example.pos)
                rel_labels.update(example.rels)

    vocab = Vocabulary.build([spec.tag for spec, _ in per_corpus_train], texts)
    tags = TagRegistry()
    for spec, _ in per_corpus_train:
        tags.register(spec.tag, spec.task, vocab.tag_id(spec.tag))

    schemes: dict[Task, LabelScheme] = {}
    if Task.CWS in task_seen:
        schemes[Task.CWS] = LabelScheme.cws()
    if Task.POS in task_seen:
        schemes[Task.POS] = LabelScheme.cross(Task.POS, pos_categories)
    if Task.NER in task_seen:
        schemes[Task.NER] = LabelScheme.ner(ner_categories)
    return vocab, tags, schemes, sorted(pos_categories), sorted(rel_labels)


def _optimize(model: JointModel, data: TrainingData, epochs: int, lr: float,
              grad_clip: float, rng: np.random.Generator,
              epoch_hook=None) -> list[float]:
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    for epoch in range(1, epochs + 1):
        model.train()
        total, count = 0.0, 0
        for batch in data.epoch(rng):
            loss = model.task_loss(batch)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
            optimizer.step()
            total += float(loss.detach())
            count += 1
        mean_loss = total / max(count, 1)
        losses.append(mean_loss)
        model.eval()
        if epoch_hook is not None:
            epoch_hook(epoch, mean_loss)
    return losses


def _format_metrics(metrics: dict) -> str:
    return " ".join(f"{k}={v:.4f}" for k, v in metrics.items())


def train(config: TrainingConfig, log=None) -> JointModel:
    """Joint training over all configured corpora; returns the trained model.

    Per-epoch held-out metrics go to ``log`` (default stderr) and to
    ``model.train_log``.
    """
    config.validate()
    stream = sys.stderr if log is None else log
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    split_per_corpus = []
    for spec in config.corpora:
        raw = _load_corpus(spec)
        train_raw, eval_raw = _split(raw, config.eval_split, rng)
        if not train_raw:
            raise ConfigError(f"corpus {spec.path} has no training sentences after split")
        split_per_corpus.append((spec, train_raw, eval_raw))

    vocab, tags, schemes, pos_categories, rel_labels = _build_artifacts(
        config, [(spec, tr) for spec, tr, _ in split_per_corpus]
    )
    enc_config = EncoderConfig(vocab_size=len(vocab), **config.encoder)
    model = build_model(enc_config, vocab, tags, schemes, pos_categories,
                        rel_labels, config.arc_dim, config.rel_dim, seed=config.seed)

    data = TrainingData(
        model,
        [(tags.get(spec.tag), _prepare_examples(model, spec, tr))
         for spec, tr, _ in split_per_corpus],
        config.batch_size,
    )

    history: list[dict] = []

    def on_epoch(epoch: int, mean_loss: float):
        row: dict = {"epoch": epoch, "loss": mean_loss}
        for spec, _, eval_raw in split_per_corpus:
            if eval_raw:
                row[spec.tag] = _evaluate_examples(model, tags.get(spec.tag), eval_raw)
        history.append(row)
        parts = [f"epoch {epoch:3d}", f"loss={mean_loss:.4f}"]
        parts += [f"{name}[{_format_metrics(m)}]"
                  for name, m in row.items() if isinstance(m, dict)]
        print("  ".join(parts), file=stream, flush=True)

    _optimize(model, data, config.epochs, config.learning_rate, config.grad_clip,
              rng, on_epoch)
    model.eval()
    model.train_log = history
    return model


def finetune(model: JointModel, path, tag_name: str, epochs: int = 5,
             learning_rate: float = 1e-3, batch_size: int = 16, seed: int = 0,
             grad_clip: float = 5.0, log=None) -> JointModel:
    """Continue training on one formatted corpus under an existing corpus tag."""
    tag = model.tags.get(tag_name)
    spec = CorpusSpec(str(path), tag_name, tag.task)
    data = prepare_training_data(model, [spec], batch_size)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    stream = sys.stderr if log is None else log

    def on_epoch(epoch, mean_loss):
        print(f"finetune epoch {epoch:3d}  loss={mean_loss:.4f}", file=stream, flush=True)

    losses = _optimize(model, data, epochs, learning_rate, grad_clip, rng, on_epoch)
    model.eval()
    model.finetune_log = losses
    return model


def set_cws_style(model: JointModel, tag_name: str) -> None:
    """Select which CWS corpus tag later segmentations should imitate."""
    tag = model.tags.get(tag_name)
    if tag.task is not Task.CWS:
        raise UnknownTag(f"tag {tag_name!r} belongs to task {tag.task.value}, not CWS")
    model.default_cws_tag = tag_name


# --- prediction --------------------------------------------------------------------

class AnalysisResult:
    """Per-sentence analysis items in user-readable form.

    Item shapes: CWS -> token strings; POS -> (token, tag) pairs; NER ->
    (text, category, start, end) tuples; DEP -> (id, form, pos, head, rel)
    rows matching the CoNLL corpus format.
    """

    def __init__(self, task: Task, sentences: list[str], items: list[list]):
        self.task = task
        self.sentences = sentences
        self.items = items

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    def to_plain(self) -> str:
        lines = []
        if self.task is Task.CWS:
            lines = [" ".join(item) for item in self.items]
        elif self.task is Task.POS:
            lines = [" ".join(f"{tok}/{tag}" for tok, tag in item) for item in self.items]
        elif self.task is Task.NER:
            lines = [" ".join(f"{text}/{cat}" for text, cat, _, _ in item)
                     for item in self.items]
        else:
            return self.to_conll()
        return "\n".join(lines) + "\n"

    def to_conll(self) -> str:
        if self.task is not Task.DEP:
            raise ConfigError("CoNLL output is only defined for the DEP task")
        blocks = []
        for item in self.items:
            rows = [f"{i}\t{form}\t{pos}\t{head}\t{rel}"
                    for i, form, pos, head, rel in item]
            blocks.append("\n".join(rows))
        return "\n\n".join(blocks) + "\n"

    def to_json(self) -> str:
        payload = {
            "task": self.task.value,
            "sentences": [
                {"text": text, "items": [list(it) if isinstance(it, tuple) else it
                                         for it in item]}
                for text, item in zip(self.sentences, self.items)
            ],
        }
        return json.dumps(payload, ensure_ascii=False)

    def trees(self) -> list[DepTree]:
        if self.task is not Task.DEP:
            raise ConfigError("only DEP results hold trees")
        return [
            DepTree(tuple(r[1] for r in item), tuple(r[3] for r in item),
                    tuple(r[4] for r in item))
            for item in self.items
        ]


def _chunks(seq: list, size: int) -> Iterable[list]:
    for lo in range(0, len(seq), size):
        yield seq[lo:lo + size]


def _crf_decode(model: JointModel, texts: list[str], tag: CorpusTag,
                lexicon: Optional[Lexicon], batch_size: int) -> list[list[str]]:
    scheme = model.schemes[tag.task]
    constraints = Constraints.from_scheme(scheme)
    head = model.head_for(tag.task)
    trans, start, end = head.numpy_tables()
    out: list[list[str]] = []
    for chunk in _chunks(texts, batch_size):
        batch = preprocess(model, chunk, tag)
        with torch.no_grad():
            feats = model.encode_batch(batch.ids, batch.mask)
            emissions = head.emissions(feats[:, 1:]).double().cpu().numpy()
        for i, text in enumerate(chunk):
            em = emissions[i, :len(text)]
            bias = None
            if lexicon is not None:
                skeleton = max_match(text, lexicon)
                bias = bias_matrix(compute_bias(em, skeleton, lexicon.weight), scheme)
            path, _ = viterbi(em, trans, start, end, constraints, bias)
            out.append([scheme.labels[j] for j in path])
    return out


def _predict_dep(model: JointModel, texts: list[str],
                 lexicon: Optional[Lexicon], batch_size: int) -> list[list]:
    pos_tag = model.default_tag(Task.POS)
    dep_tag = model.default_tag(Task.DEP)
    pos_labels = _crf_decode(model, texts, pos_tag, lexicon, batch_size)
    head = model.head_for(Task.DEP)
    items: list[list] = []
    cursor = 0
    for chunk in _chunks(texts, batch_size):
        batch = preprocess(model, chunk, dep_tag)
        with torch.no_grad():
            feats = model.encode_batch(batch.ids, batch.mask)
        for i, text in enumerate(chunk):
            tagged = decode_cross(text, pos_labels[cursor + i])
            tokens = [tok for tok, _ in tagged]
            cats = [cat for _, cat in tagged]
            seg = Segmentation.from_tokens(tokens)
            heads, rel_ids = head.parse(feats[i, 1:1 + len(text)], seg,
                                        [model.pos_id(c) for c in cats])
            items.append([
                (j + 1, tokens[j], cats[j], heads[j], model.rel_labels[rel_ids[j]])
                for j in range(len(tokens))
            ])
        cursor += len(chunk)
    return items


def predict(model: JointModel, sentences: Union[str, Sequence[str]],
            task: Union[Task, str], lexicon: Optional[Lexicon] = None,
            tag: Optional[str] = None, batch_size: int = 32) -> AnalysisResult:
    """Analyze one string or a list of strings for the given task."""
    task = Task(task) if not isinstance(task, Task) else task
    texts = [sentences] if isinstance(sentences, str) else list(sentences)
    if not texts:
        raise EmptyInput("nothing to predict")
    if task is Task.DEP:
        if tag is not None:
            chosen = model.tags.get(tag)
            if chosen.task is not Task.DEP:
                raise UnknownTag(f"tag {tag!r} belongs to task {chosen.task.value}")
        items = _predict_dep(model, texts, lexicon, batch_size)
        return AnalysisResult(task, texts, items)

    chosen = model.tags.get(tag) if tag is not None else model.default_tag(task)
    if chosen.task is not task:
        raise UnknownTag(f"tag {chosen.name!r} belongs to task {chosen.task.value}")
    label_seqs = _crf_decode(model, texts, chosen, lexicon, batch_size)
    items: list[list] = []
    for text, labels in zip(texts, label_seqs):
        if task is Task.CWS:
            items.append(list(decode_bmes(text, labels).tokens))
        elif task is Task.POS:
            items.append(decode_cross(text, labels))
        else:
            items.append([(text[s:e], cat, s, e)
                          for (s, e), cat in decode_ner(text, labels)])
    return AnalysisResult(task, texts, items)


# --- evaluation ---------------------------------------------------------------------

def _evaluate_examples(model: JointModel, tag: CorpusTag, raw: list,
                       lexicon: Optional[Lexicon] = None,
                       batch_size: int = 32) -> dict:
    texts = [_sentence_text(example) for example in raw]
    if tag.task is Task.DEP:
        result = predict(model, texts, Task.DEP, lexicon, batch_size=batch_size)
        golds = [DepTree(ex.tokens, ex.heads, ex.rels) for ex in raw]
        uas, las = uas_las(golds, result.trees())
        return {"uas": uas, "las": las}

    result = predict(model, texts, tag.task, lexicon, tag=tag.name,
                     batch_size=batch_size)
    if tag.task is Task.CWS:
        gold = [cws_spans(ex) for ex in raw]
        pred = [cws_spans(Segmentation.from_tokens(item)) for item in result]
    elif tag.task is Task.POS:
        gold = [tagged_spans(ex.seg, ex.tags) for ex in raw]
        pred = [
            tagged_spans(Segmentation.from_tokens([t for t, _ in item]),
                         [c for _, c in item])
            for item in result
        ]
    else:
        gold = [{((s, e), cat) for (s, e), cat in decode_ner(ex.chars, ex.labels)}
                for ex in raw]
        pred = [{((s, e), cat) for _, cat, s, e in item} for item in result]
    prf = span_f1(gold, pred)
    return {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}


def evaluate(model: JointModel, path, tag_name: str,
             lexicon: Optional[Lexicon] = None, fmt: Optional[str] = None,
             batch_size: int = 32) -> dict:
    """Score the model against a gold corpus under one corpus tag."""
    tag = model.tags.get(tag_name)
    spec = CorpusSpec(str(path), tag_name, tag.task, fmt)
    return _evaluate_examples(model, tag, _load_corpus(spec), lexicon, batch_size)
