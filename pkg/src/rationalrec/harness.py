"""Data ingestion, batching, and the two desk-scale training tasks.

Language modeling treats each split as one long id stream, batched into
contiguous chunks and trained with truncated backpropagation whose hidden
state carries across window boundaries; input embeddings and the output
softmax share one tensor.  Classification feeds the final hidden state into
a two-layer tanh MLP; instances are bucketed by exact length so no padding
or masking is ever needed, which keeps the cell semantics identical across
semirings.  Reported perplexity is ``exp(mean token NLL)``.

One training run is sequential and deterministic under its seed.
Independent runs (random-search trials, seed replicas) are themselves
deterministic and could execute concurrently.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from . import autodiff as ad
from . import cells
from .autodiff import Adam, Tape, Tensor, const, sgd
from .cells import CELL_KINDS, CellParams, CellState
from .errors import ConfigError, EmptyCorpus, NumericalError, ParseError

UNK, EOS, PAD = "<unk>", "<eos>", "<pad>"
SPECIALS = (UNK, EOS, PAD)


# ----------------------------------------------------------------------
# vocabulary and corpus
# ----------------------------------------------------------------------

@dataclass
class Vocab:
    """Bijective symbol/id mapping with reserved unk, eos and pad ids."""

    itos: tuple[str, ...]
    stoi: dict[str, int]

    unk_id = 0
    eos_id = 1
    pad_id = 2

    @property
    def size(self) -> int:
        return len(self.itos)

    @classmethod
    def build(cls, tokens) -> "Vocab":
        """Deterministic order: specials first, then corpus tokens by
        descending frequency with lexicographic tie-break."""
        counts = Counter(t for t in tokens if t not in SPECIALS)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        itos = SPECIALS + tuple(t for t, _ in ordered)
        return cls(itos=itos, stoi={t: i for i, t in enumerate(itos)})

    def encode(self, tokens) -> list[int]:
        stoi = self.stoi
        return [stoi.get(t, self.unk_id) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]


@dataclass
class Corpus:
    """Tokenised data: id streams for language modeling, or labeled id
    sequences for classification.  All ids are below ``vocab_size``."""

    mode: str  # "lm" | "classify"
    vocab_size: int
    streams: dict[str, np.ndarray] = field(default_factory=dict)
    instances: dict[str, list[tuple[np.ndarray, int]]] = field(default_factory=dict)


def _read_lines(path) -> list[str]:
    return FsPath(path).read_text(encoding="utf-8").splitlines()


def _split_lines(lines: list[str]) -> dict[str, list[str]]:
    """Deterministic 80/10/10 split by position for unsplit data."""
    n = len(lines)
    n_train = int(n * 0.8)
    n_dev = int(n * 0.1)
    return {
        "train": lines[:n_train],
        "dev": lines[n_train:n_train + n_dev],
        "test": lines[n_train + n_dev:],
    }


def _parse_classify_line(line: str, lineno: int) -> tuple[int, list[str]]:
    if "\t" not in line:
        raise ParseError(f"expected 'label<TAB>text', got {line!r}", lineno)
    label_str, text = line.split("\t", 1)
    try:
        label = int(label_str)
    except ValueError:
        raise ParseError(f"label {label_str!r} is not an integer", lineno) from None
    if label not in (0, 1):
        raise ParseError(f"label must be 0 or 1, got {label}", lineno)
    return label, text.split()


def ingest(files, mode: str) -> tuple[Vocab, Corpus]:
    """Read text files into a vocabulary and corpus.

    ``files`` maps split names (``train``/``dev``/``test``) to paths; a
    single ``{"all": path}`` entry is split 80/10/10 by line position.
    Language-model lines are whitespace tokenised with an end-of-sentence
    marker appended; classification lines are ``label<TAB>text``.  The
    vocabulary is built from the training split only, so out-of-vocabulary
    tokens at evaluation map to the unk id.
    """
    if mode not in ("lm", "classify"):
        raise ConfigError(f"mode must be 'lm' or 'classify', got {mode!r}")
    if "all" in files:
        split_lines = _split_lines(_read_lines(files["all"]))
    else:
        split_lines = {split: _read_lines(path) for split, path in files.items()}
    if "train" not in split_lines:
        raise EmptyCorpus("no training split was provided")

    if mode == "lm":
        tokens_by_split = {
            split: [t for line in lines for t in line.split() + [EOS]]
            for split, lines in split_lines.items()
        }
        train_tokens = [t for t in tokens_by_split["train"] if t != EOS]
        if not train_tokens:
            raise EmptyCorpus("training split contains no tokens")
        vocab = Vocab.build(train_tokens)
        streams = {split: np.array(vocab.encode(toks), dtype=np.int64)
                   for split, toks in tokens_by_split.items()}
        return vocab, Corpus(mode="lm", vocab_size=vocab.size, streams=streams)

    parsed: dict[str, list[tuple[int, list[str]]]] = {}
    for split, lines in split_lines.items():
        rows = []
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            rows.append(_parse_classify_line(line, lineno))
        parsed[split] = rows
    if not parsed["train"]:
        raise EmptyCorpus("training split contains no instances")
    vocab = Vocab.build(t for _, toks in parsed["train"] for t in toks)
    instances = {
        split: [(np.array(vocab.encode(toks), dtype=np.int64), label)
                for label, toks in rows]
        for split, rows in parsed.items()
    }
    return vocab, Corpus(mode="classify", vocab_size=vocab.size, instances=instances)


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass
class TrainConfig:
    cell: str = "rrnn_f"
    layers: int = 1
    hidden: int = 64
    bptt_len: int = 35
    batch_size: int = 32
    optimizer: str = "sgd"  # "sgd" | "adam"
    lr: float = 1.0
    l2: float = 0.0
    clip: float = 5.0
    dropout_vertical: float = 0.0
    dropout_recurrent: float = 0.0
    dropout_embedding: float = 0.0
    epochs: int = 10
    patience: int = 30
    lr_patience: int = 10
    seed: int = 0
    output_gate: bool | None = None  # None: on for LM, off for classification
    num_seeds: int = 5
    ngram: int = 2
    lam_mode: str = "input"
    mlp_hidden: int = 0  # 0 means same as hidden

    def validate(self) -> "TrainConfig":
        if self.cell not in CELL_KINDS:
            raise ConfigError(f"unknown cell {self.cell!r}; expected one of {CELL_KINDS}")
        for name in ("layers", "hidden", "bptt_len", "batch_size", "epochs",
                     "patience", "lr_patience", "num_seeds", "ngram"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("dropout_vertical", "dropout_recurrent", "dropout_embedding"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.l2 < 0 or self.clip < 0:
            raise ConfigError("l2 and clip must be nonnegative")
        if self.lam_mode not in ("constant", "input"):
            raise ConfigError(f"lam_mode must be 'constant' or 'input', got {self.lam_mode!r}")
        return self


def _snapshot(params: list[Tensor]) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def _restore(params: list[Tensor], snap: list[np.ndarray]) -> None:
    for p, d in zip(params, snap):
        p.data[...] = d


def _make_layers(cfg: TrainConfig, vocab_size: int, rng: np.random.Generator,
                 output_gate: bool) -> list[CellParams]:
    if cfg.cell == "isan" and cfg.layers > 1:
        raise ConfigError("the affine-switched cell selects parameters per symbol "
                          "and supports a single layer only")
    layers = []
    for li in range(cfg.layers):
        p = cells.init_cell_params(
            cfg.cell, hidden=cfg.hidden, vocab_size=vocab_size, rng=rng,
            embed_dim=cfg.hidden, output_gate=output_gate and cfg.cell != "isan",
            ngram=cfg.ngram, lam_mode=cfg.lam_mode, embedding=(li == 0))
        layers.append(p)
    return layers


# ----------------------------------------------------------------------
# language modeling
# ----------------------------------------------------------------------

@dataclass
class LmModel:
    cfg: TrainConfig
    vocab_size: int
    layers: list[CellParams]

    @property
    def embedding(self) -> Tensor:
        """Input embedding, which is also the output softmax projection."""
        return self.layers[0].embedding

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out


def build_lm_model(cfg: TrainConfig, vocab_size: int, rng: np.random.Generator) -> LmModel:
    if cfg.cell == "isan":
        raise ConfigError("the affine-switched cell batches a shared symbol and does "
                          "not support stream batching; use it via the equivalence tools")
    gate = cfg.output_gate if cfg.output_gate is not None else True
    return LmModel(cfg=cfg, vocab_size=vocab_size,
                   layers=_make_layers(cfg, vocab_size, rng, output_gate=gate))


def batchify(stream: np.ndarray, batch_size: int) -> np.ndarray:
    """Split one long stream into ``batch_size`` contiguous rows."""
    n = len(stream) // batch_size
    if n < 2:
        raise EmptyCorpus(f"stream of {len(stream)} tokens is too short for "
                          f"batch size {batch_size}")
    return np.asarray(stream[: n * batch_size], dtype=np.int64).reshape(batch_size, n)


def iter_windows(mat: np.ndarray, bptt_len: int):
    """Yield (inputs, targets) windows of at most ``bptt_len`` columns."""
    n = mat.shape[1]
    for i in range(0, n - 1, bptt_len):
        length = min(bptt_len, n - 1 - i)
        yield mat[:, i:i + length], mat[:, i + 1:i + 1 + length]


def _fresh_carry(model: LmModel) -> list[tuple[CellState | None, Tensor | None]]:
    return [(None, None) for _ in model.layers]


def _detach_state(s: CellState) -> CellState:
    return CellState(c=tuple(const(ci.data.copy()) for ci in s.c),
                     c_out=const(s.c_out.data.copy()),
                     h=const(s.h.data.copy()), t=s.t)


def lm_window_loss(model: LmModel, inputs: np.ndarray, targets: np.ndarray,
                   carry, train: bool, rng: np.random.Generator | None):
    """Mean per-token NLL of one truncated window.

    Returns ``(loss, new_carry, token_count)``; ``new_carry`` holds detached
    hidden state (and the last input embedding for the two-token window
    cell) to thread into the next window.
    """
    cfg = model.cfg
    batch, length = inputs.shape
    emb = model.embedding
    seq = [ad.embedding_lookup(emb, inputs[:, t]) for t in range(length)]
    if train and cfg.dropout_embedding > 0:
        seq = [ad.dropout(v, cfg.dropout_embedding, rng) for v in seq]

    new_carry = []
    for layer, (state, v_prev) in zip(model.layers, carry):
        rec_mask = None
        if train and cfg.dropout_recurrent > 0:
            rec_mask = ad.dropout_mask((batch, cfg.hidden), cfg.dropout_recurrent, rng)
        states = cells.unroll_vectors(layer, seq, state=state, v_prev=v_prev,
                                      rec_mask=rec_mask)
        carry_v = const(seq[-1].data.copy()) if layer.kind == "qrnn2" else None
        new_carry.append((_detach_state(states[-1]), carry_v))
        seq = [st.h for st in states]
        if train and cfg.dropout_vertical > 0:
            seq = [ad.dropout(h, cfg.dropout_vertical, rng) for h in seq]

    loss = None
    for t in range(length):
        logits = ad.matmul(seq[t], ad.transpose(emb))
        ce = ad.softmax_cross_entropy(logits, targets[:, t])
        loss = ce if loss is None else ad.add(loss, ce)
    loss = ad.scale(loss, 1.0 / length)
    return loss, new_carry, batch * length


def eval_lm(model: LmModel, stream: np.ndarray, bptt_len: int | None = None,
            batch_size: int | None = None) -> float:
    """Perplexity of a stream under the model, dropout off."""
    cfg = model.cfg
    bptt_len = bptt_len or cfg.bptt_len
    batch_size = batch_size or min(cfg.batch_size, max(1, len(stream) // 2))
    mat = batchify(stream, batch_size)
    carry = _fresh_carry(model)
    total_nll, count = 0.0, 0
    for inputs, targets in iter_windows(mat, bptt_len):
        loss, carry, ntok = lm_window_loss(model, inputs, targets, carry,
                                           train=False, rng=None)
        total_nll += loss.item() * ntok
        count += ntok
    return math.exp(total_nll / count)


def train_lm(cfg: TrainConfig, corpus: Corpus) -> tuple[LmModel, list[tuple]]:
    """Truncated-backprop training over the corpus streams.

    Returns the trained model (rewound to its best-dev snapshot) and metric
    rows ``(epoch, split, metric, value)``.  Raises ``NumericalError`` with
    the failing step index if the loss diverges.
    """
    cfg.validate()
    if corpus.mode != "lm":
        raise ConfigError("train_lm requires a language-model corpus")
    rng = np.random.default_rng(cfg.seed)
    model = build_lm_model(cfg, corpus.vocab_size, rng)
    params = model.parameters()
    train_mat = batchify(corpus.streams["train"], cfg.batch_size)
    dev = corpus.streams.get("dev")
    test = corpus.streams.get("test")

    lr = cfg.lr
    adam_state = Adam(lr=lr, clip=cfg.clip, l2=cfg.l2) if cfg.optimizer == "adam" else None
    metrics: list[tuple] = []
    best_dev = math.inf
    best_snap = None
    stale_epochs = 0
    stale_lr = 0
    step = 0
    last_epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        last_epoch = epoch
        carry = _fresh_carry(model)
        total_nll, count = 0.0, 0
        for inputs, targets in iter_windows(train_mat, cfg.bptt_len):
            with Tape() as tape:
                loss, carry, ntok = lm_window_loss(model, inputs, targets, carry,
                                                   train=True, rng=rng)
            if not math.isfinite(loss.item()):
                raise NumericalError(f"non-finite loss at step {step} (epoch {epoch})")
            tape.backward(loss, params)
            if adam_state is not None:
                adam_state.lr = lr
                adam_state.step(params)
            else:
                sgd(params, lr, clip=cfg.clip)
            total_nll += loss.item() * ntok
            count += ntok
            step += 1
        metrics.append((epoch, "train", "ppl", math.exp(total_nll / count)))
        if dev is not None and len(dev):
            dev_ppl = eval_lm(model, dev)
            metrics.append((epoch, "dev", "ppl", dev_ppl))
            if dev_ppl < best_dev:
                best_dev = dev_ppl
                best_snap = _snapshot(params)
                stale_epochs = 0
                stale_lr = 0
            else:
                stale_epochs += 1
                stale_lr += 1
                if stale_lr >= cfg.lr_patience:
                    lr /= 2
                    stale_lr = 0
                if stale_epochs >= cfg.patience:
                    break
    if best_snap is not None:
        _restore(params, best_snap)
    if test is not None and len(test):
        metrics.append((last_epoch, "test", "ppl", eval_lm(model, test)))
    return model, metrics


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------

@dataclass
class ClassifierModel:
    cfg: TrainConfig
    vocab_size: int
    layers: list[CellParams]
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        out.extend([self.w1, self.b1, self.w2, self.b2])
        return out


@dataclass
class ClassifierReport:
    """Accuracy over seed replicas; the model is the first seed's."""

    model: ClassifierModel
    seeds: list[int]
    test_accuracies: list[float]
    mean_test_accuracy: float
    std_test_accuracy: float


def build_classifier_model(cfg: TrainConfig, vocab_size: int,
                           rng: np.random.Generator) -> ClassifierModel:
    gate = cfg.output_gate if cfg.output_gate is not None else False
    layers = _make_layers(cfg, vocab_size, rng, output_gate=gate)
    m = cfg.mlp_hidden or cfg.hidden
    return ClassifierModel(
        cfg=cfg, vocab_size=vocab_size, layers=layers,
        w1=ad.param(rng.normal(0.0, 1.0 / np.sqrt(cfg.hidden), size=(m, cfg.hidden))),
        b1=ad.param(np.zeros(m)),
        w2=ad.param(rng.normal(0.0, 1.0 / np.sqrt(m), size=(2, m))),
        b2=ad.param(np.zeros(2)),
    )


def classifier_logits(model: ClassifierModel, ids: np.ndarray, train: bool,
                      rng: np.random.Generator | None) -> Tensor:
    """Binary logits for a batch of equal-length sequences (B, L)."""
    cfg = model.cfg
    batch, length = ids.shape
    seq = [ad.embedding_lookup(model.layers[0].embedding, ids[:, t])
           for t in range(length)]
    if train and cfg.dropout_embedding > 0:
        seq = [ad.dropout(v, cfg.dropout_embedding, rng) for v in seq]
    for layer in model.layers:
        rec_mask = None
        if train and cfg.dropout_recurrent > 0:
            rec_mask = ad.dropout_mask((batch, cfg.hidden), cfg.dropout_recurrent, rng)
        states = cells.unroll_vectors(layer, seq, rec_mask=rec_mask)
        seq = [st.h for st in states]
        if train and cfg.dropout_vertical > 0:
            seq = [ad.dropout(h, cfg.dropout_vertical, rng) for h in seq]
    h_final = seq[-1]
    hidden = ad.tanh(ad.add(ad.matmul(h_final, ad.transpose(model.w1)), model.b1))
    return ad.add(ad.matmul(hidden, ad.transpose(model.w2)), model.b2)


def _length_batches(instances, batch_size: int, order: np.ndarray):
    """Group instance indices by exact sequence length, then cut batches."""
    by_len: dict[int, list[int]] = {}
    for idx in order:
        by_len.setdefault(len(instances[idx][0]), []).append(int(idx))
    for length in sorted(by_len):
        bucket = by_len[length]
        for i in range(0, len(bucket), batch_size):
            chunk = bucket[i:i + batch_size]
            ids = np.stack([instances[j][0] for j in chunk])
            labels = np.array([instances[j][1] for j in chunk], dtype=np.int64)
            yield ids, labels


def classifier_accuracy(model: ClassifierModel, instances) -> float:
    if not instances:
        return float("nan")
    order = np.arange(len(instances))
    correct = 0
    for ids, labels in _length_batches(instances, model.cfg.batch_size, order):
        logits = classifier_logits(model, ids, train=False, rng=None)
        correct += int((logits.data.argmax(axis=1) == labels).sum())
    return correct / len(instances)


def _train_classifier_single(cfg: TrainConfig, corpus: Corpus, seed: int
                             ) -> tuple[ClassifierModel, float, list[tuple]]:
    rng = np.random.default_rng(seed)
    model = build_classifier_model(cfg, corpus.vocab_size, rng)
    params = model.parameters()
    train_set = corpus.instances["train"]
    dev_set = corpus.instances.get("dev", [])
    test_set = corpus.instances.get("test", [])
    opt = Adam(lr=cfg.lr, clip=cfg.clip, l2=cfg.l2)
    metrics: list[tuple] = []
    best_dev = -math.inf
    best_snap = _snapshot(params)
    stale_epochs = 0
    stale_lr = 0
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        for ids, labels in _length_batches(train_set, cfg.batch_size, order):
            with Tape() as tape:
                logits = classifier_logits(model, ids, train=True, rng=rng)
                loss = ad.softmax_cross_entropy(logits, labels)
            if not math.isfinite(loss.item()):
                raise NumericalError(f"non-finite loss at step {step} (epoch {epoch})")
            tape.backward(loss, params)
            opt.step(params)
            step += 1
        dev_acc = classifier_accuracy(model, dev_set) if dev_set else math.nan
        if dev_set:
            metrics.append((epoch, "dev", f"accuracy[seed={seed}]", dev_acc))
            if dev_acc > best_dev:
                best_dev = dev_acc
                best_snap = _snapshot(params)
                stale_epochs = 0
                stale_lr = 0
            else:
                stale_epochs += 1
                stale_lr += 1
                if stale_lr >= cfg.lr_patience:
                    opt.lr /= 2
                    stale_lr = 0
                if stale_epochs >= cfg.patience:
                    break
    if dev_set:
        _restore(params, best_snap)
    test_acc = classifier_accuracy(model, test_set) if test_set else math.nan
    return model, test_acc, metrics


def train_classifier(cfg: TrainConfig, corpus: Corpus
                     ) -> tuple[ClassifierReport, list[tuple]]:
    """Train ``cfg.num_seeds`` replicas differing only in seed and report
    mean and standard deviation of test accuracy."""
    cfg.validate()
    if corpus.mode != "classify":
        raise ConfigError("train_classifier requires a labeled corpus")
    metrics: list[tuple] = []
    accs: list[float] = []
    seeds = [cfg.seed + k for k in range(cfg.num_seeds)]
    first_model = None
    for seed in seeds:
        model, test_acc, rows = _train_classifier_single(cfg, corpus, seed)
        if first_model is None:
            first_model = model
        accs.append(test_acc)
        metrics.extend(rows)
        metrics.append((cfg.epochs, "test", f"accuracy[seed={seed}]", test_acc))
    mean = float(np.mean(accs))
    std = float(np.std(accs))
    metrics.append((cfg.epochs, "test", "accuracy_mean", mean))
    metrics.append((cfg.epochs, "test", "accuracy_std", std))
    report = ClassifierReport(model=first_model, seeds=seeds, test_accuracies=accs,
                              mean_test_accuracy=mean, std_test_accuracy=std)
    return report, metrics


# ----------------------------------------------------------------------
# random search
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    """Hyperparameter ranges explored by random search."""

    hidden: tuple[int, int] = (100, 300)
    dropout_vertical: tuple[float, float] = (0.0, 0.5)
    dropout_recurrent: tuple[float, float] = (0.0, 0.5)
    dropout_embedding: tuple[float, float] = (0.0, 0.5)
    lr: tuple[float, float] = (1e-4, 1e-2)  # log-uniform
    l2: tuple[float, float] = (1e-7, 1e-5)  # log-uniform
    clip: tuple[float, float] = (1.0, 5.0)


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_config(base: TrainConfig, space: SearchSpace,
                  rng: np.random.Generator) -> TrainConfig:
    return replace(
        base,
        hidden=int(rng.integers(space.hidden[0], space.hidden[1] + 1)),
        dropout_vertical=float(rng.uniform(*space.dropout_vertical)),
        dropout_recurrent=float(rng.uniform(*space.dropout_recurrent)),
        dropout_embedding=float(rng.uniform(*space.dropout_embedding)),
        lr=_log_uniform(rng, *space.lr),
        l2=_log_uniform(rng, *space.l2),
        clip=float(rng.uniform(*space.clip)),
    )


def random_search(base: TrainConfig, corpus: Corpus, trials: int,
                  space: SearchSpace | None = None
                  ) -> tuple[TrainConfig, list[tuple[TrainConfig, float]]]:
    """Sample ``trials`` configurations, train each once, and return the
    config with the best development score (accuracy for classification,
    negated perplexity for language modeling).  Deterministic under
    ``base.seed``: all configs are drawn before any training runs."""
    if trials <= 0:
        raise ConfigError(f"trials must be positive, got {trials}")
    space = space or SearchSpace()
    rng = np.random.default_rng(base.seed)
    configs = [sample_config(base, space, rng) for _ in range(trials)]
    results: list[tuple[TrainConfig, float]] = []
    for k, cfg in enumerate(configs):
        cfg = replace(cfg, seed=base.seed + 10_000 + k)
        if corpus.mode == "classify":
            cfg = replace(cfg, num_seeds=1)
            _, test_acc, rows = _train_classifier_single(cfg, corpus, cfg.seed)
            dev_rows = [v for (_, split, m, v) in rows if split == "dev"]
            score = max(dev_rows) if dev_rows else test_acc
        else:
            _, rows = train_lm(cfg, corpus)
            dev_rows = [v for (_, split, m, v) in rows if split == "dev" and m == "ppl"]
            score = -min(dev_rows) if dev_rows else -math.inf
        results.append((cfg, float(score)))
    best_cfg, _ = max(results, key=lambda r: r[1])
    return best_cfg, results


# ----------------------------------------------------------------------
# metrics serialisation
# ----------------------------------------------------------------------

def metrics_to_csv(rows: list[tuple]) -> str:
    lines = ["epoch,split,metric,value"]
    for epoch, split, metric, value in rows:
        lines.append(f"{epoch},{split},{metric},{format(float(value), '.10g')}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# synthetic desk-scale corpora
# ----------------------------------------------------------------------

def circulant_transition(num_symbols: int,
                         profile=(0.6, 0.3, 0.08, 0.02)) -> np.ndarray:
    """Row-stochastic transition matrix where row ``i`` places ``profile``
    on symbols ``i+1, i+2, ...`` cyclically.  Circulant rows make the
    stationary distribution exactly uniform."""
    if len(profile) > num_symbols:
        raise ConfigError("profile longer than the symbol inventory")
    if abs(sum(profile) - 1.0) > 1e-9:
        raise ConfigError("profile must sum to 1")
    mat = np.zeros((num_symbols, num_symbols))
    for i in range(num_symbols):
        for k, w in enumerate(profile):
            mat[i, (i + 1 + k) % num_symbols] = w
    return mat


def markov_lm_lines(rng: np.random.Generator, num_symbols: int, total_tokens: int,
                    line_len: int = 2000,
                    profile=(0.6, 0.3, 0.08, 0.02)) -> list[str]:
    """Sample lines of a first-order Markov chain over ``s0..s{V-1}``.

    Each line restarts the chain from the uniform distribution, matching
    the end-of-sentence convention of the ingest step."""
    cum = circulant_transition(num_symbols, profile).cumsum(axis=1)
    lines = []
    produced = 0
    while produced < total_tokens:
        n = min(line_len, total_tokens - produced)
        toks = np.empty(n, dtype=np.int64)
        toks[0] = rng.integers(num_symbols)
        draws = rng.random(n)
        for t in range(1, n):
            toks[t] = np.searchsorted(cum[toks[t - 1]], draws[t])
        lines.append(" ".join(f"s{v}" for v in toks))
        produced += n
    return lines


def lm_unigram_ppl_bound(num_symbols: int, line_len: int = 2000) -> float:
    """Perplexity of the best context-free predictor of the generator's
    token stream: the marginal is uniform over symbols (circulant rows)
    plus one end-of-sentence token per line."""
    p_eos = 1.0 / (line_len + 1)
    p_sym = (1.0 - p_eos) / num_symbols
    entropy = -(num_symbols * p_sym * math.log(p_sym) + p_eos * math.log(p_eos))
    return math.exp(entropy)


def markov_conditional_ppl(profile=(0.6, 0.3, 0.08, 0.02)) -> float:
    """Perplexity of the generator itself (the optimum for any model)."""
    return math.exp(-sum(w * math.log(w) for w in profile if w > 0))


def bigram_classification_lines(rng: np.random.Generator, count: int,
                                num_symbols: int = 12, target=(1, 2),
                                min_len: int = 8, max_len: int = 16,
                                distractor_rate: float = 0.7) -> list[str]:
    """Label-balanced synthetic task: label 1 iff the target bigram occurs.

    Negative instances contain both target symbols individually (but never
    adjacent) at ``distractor_rate``, so unigram presence cannot solve the
    task."""
    x, y = target
    if not (0 <= x < num_symbols and 0 <= y < num_symbols) or x == y:
        raise ConfigError("target must be two distinct symbols in range")

    def scrub(seq: np.ndarray) -> None:
        # resample until the target bigram is gone
        while True:
            hits = [k for k in range(len(seq) - 1) if seq[k] == x and seq[k + 1] == y]
            if not hits:
                return
            for k in hits:
                choices = [s for s in range(num_symbols) if s != y]
                seq[k + 1] = choices[rng.integers(len(choices))]

    lines = []
    labels = [1] * (count // 2) + [0] * (count - count // 2)
    for label in labels:
        n = int(rng.integers(min_len, max_len + 1))
        seq = rng.integers(num_symbols, size=n)
        if label == 1:
            pos = int(rng.integers(0, n - 1))
            seq[pos] = x
            seq[pos + 1] = y
        else:
            if rng.random() < distractor_rate and n >= 4:
                i = int(rng.integers(0, n))
                far = [j for j in range(n) if abs(j - i) >= 2]
                j = far[rng.integers(len(far))]
                seq[i] = x
                seq[j] = y
            scrub(seq)
        lines.append(str(label) + "\t" + " ".join(f"w{v}" for v in seq))
    order = rng.permutation(count)
    return [lines[i] for i in order]
