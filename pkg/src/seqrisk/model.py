"""Dual-attention recurrent risk model with per-event influence attribution.

The forward pass embeds each multi-hot step, appends the normalized duration
to the prediction time, and runs two gated recurrent networks over the steps
(newest-first by default). One network yields a scalar score per step that a
softmax turns into step weights alpha_i; the other yields a tanh-bounded
vector beta_i per step. The context vector is sum_i alpha_i * beta_i (*) v_i
and an affine head maps it to per-target logits.

Because the logit is linear in the embedded events given (alpha, beta), it
decomposes exactly into per-(step, code) contributions:

    influence(step, code)[target] = alpha_step * W_out @ (beta_step * emb[code])

and the contributions of all active codes plus the output bias reproduce the
logits (attribution completeness).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import KIND_DIAGNOSIS, EventSequence, EventVocabulary, encode

CHECKPOINT_SCHEMA_VERSION = 1

HEAD_SIGMOID = "sigmoid"
HEAD_SOFTMAX = "softmax"


class ModelError(ValueError):
    """Raised on contract violations in the model layer."""


class CheckpointError(ValueError):
    """Raised when a checkpoint cannot be loaded safely."""


def _uniform_init(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[1] if len(shape) > 1 else 1
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class GRUCell:
    """Two-gate recurrent cell; weights stored input-major so x @ W applies."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.W_z = Tensor(_uniform_init(rng, (input_dim, hidden_dim)))
        self.U_z = Tensor(_uniform_init(rng, (hidden_dim, hidden_dim)))
        self.b_z = Tensor(np.zeros(hidden_dim))
        self.W_r = Tensor(_uniform_init(rng, (input_dim, hidden_dim)))
        self.U_r = Tensor(_uniform_init(rng, (hidden_dim, hidden_dim)))
        self.b_r = Tensor(np.zeros(hidden_dim))
        self.W_c = Tensor(_uniform_init(rng, (input_dim, hidden_dim)))
        self.U_c = Tensor(_uniform_init(rng, (hidden_dim, hidden_dim)))
        self.b_c = Tensor(np.zeros(hidden_dim))

    def parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.{name}", getattr(self, name))
                for name in ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_c", "U_c", "b_c")]

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        z = ad.sigmoid(ad.add(ad.add(ad.matmul(x, self.W_z), ad.matmul(h, self.U_z)), self.b_z))
        r = ad.sigmoid(ad.add(ad.add(ad.matmul(x, self.W_r), ad.matmul(h, self.U_r)), self.b_r))
        c = ad.tanh(ad.add(ad.add(ad.matmul(x, self.W_c), ad.matmul(ad.mul(r, h), self.U_c)), self.b_c))
        return ad.add(ad.mul(ad.sub(1.0, z), h), ad.mul(z, c))


@dataclass(frozen=True, eq=False)
class PredictionResult:
    """Per-target probabilities plus the full influence attribution.

    ``alphas``/``betas`` are indexed by chronological step. ``influence``
    maps (step index, code) to the length-L contribution vector; summed over
    all active (step, code) pairs and added to the output bias it reproduces
    the logits exactly (up to float round-off).
    """

    target_codes: tuple[str, ...]
    probabilities: dict[str, float]
    logits: dict[str, float]
    alphas: np.ndarray
    betas: np.ndarray
    influence: dict[tuple[int, str], np.ndarray]

    def influence_of(self, step: int, code: str, target: str) -> float:
        return float(self.influence[(step, code)][self.target_codes.index(target)])

    def ranked_targets(self) -> list[str]:
        """Targets ordered the way the prediction box lays them out."""
        return sorted(self.target_codes, key=lambda c: (-self.probabilities[c], c))


class RetainModel:
    """All learned parameters of the risk model, bound to one vocabulary."""

    def __init__(self, vocabulary: EventVocabulary, target_codes: Sequence[str],
                 embed_dim: int = 64, hidden_dim: int = 64,
                 reverse_time: bool = True, head: str = HEAD_SIGMOID, seed: int = 0):
        if not target_codes:
            raise ModelError("need at least one target code")
        for code in target_codes:
            if code not in vocabulary:
                raise ModelError(f"target {code!r} is not in the vocabulary")
            if vocabulary.kind_of(code) != KIND_DIAGNOSIS:
                raise ModelError(f"target {code!r} is not a diagnosis code")
        if len(set(target_codes)) != len(target_codes):
            raise ModelError("duplicate target codes")
        if head not in (HEAD_SIGMOID, HEAD_SOFTMAX):
            raise ModelError(f"unknown head {head!r}")

        self.vocabulary = vocabulary
        self.vocab_hash = vocabulary.checksum()
        self.target_codes = tuple(target_codes)
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.reverse_time = reverse_time
        self.head = head
        self.seed = seed

        rng = np.random.default_rng(seed)
        V, m, h, L = vocabulary.size, embed_dim, hidden_dim, len(self.target_codes)
        # one embedding column per code
        self.W_emb = Tensor(_uniform_init(rng, (m, V)))
        self.cell_alpha = GRUCell(m + 1, h, rng)
        self.w_alpha = Tensor(_uniform_init(rng, (h, 1)))
        self.b_alpha = Tensor(np.zeros(1))
        self.cell_beta = GRUCell(m + 1, h, rng)
        self.W_beta = Tensor(_uniform_init(rng, (h, m)))
        self.b_beta = Tensor(np.zeros(m))
        # stored (m, L): logits = o @ W_out + e_out
        self.W_out = Tensor(_uniform_init(rng, (m, L)))
        self.e_out = Tensor(np.zeros(L))

    @property
    def n_targets(self) -> int:
        return len(self.target_codes)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = [("W_emb", self.W_emb)]
        named += self.cell_alpha.parameters("rnn_alpha")
        named += [("w_alpha", self.w_alpha), ("b_alpha", self.b_alpha)]
        named += self.cell_beta.parameters("rnn_beta")
        named += [("W_beta", self.W_beta), ("b_beta", self.b_beta)]
        named += [("W_out", self.W_out), ("e_out", self.e_out)]
        return named

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    # -- forward -----------------------------------------------------------

    def forward_graph(self, x_proc: np.ndarray, d_proc: np.ndarray,
                      mask_proc: np.ndarray | None = None):
        """Differentiable forward over a batch already in processing order.

        ``x_proc`` is (B, T, V) with each sample's steps laid out in the
        order the recurrences consume them (newest-first when reverse_time);
        padding sits at the tail so hidden states of real steps are identical
        to an unpadded run. Returns (logits, probs, alpha, betas, vs), where
        alpha is (B, T) and betas/vs are per-position (B, m) tensors, all in
        processing order.
        """
        B, T, V = x_proc.shape
        if T == 0:
            raise ModelError("empty sequence: the model needs at least one step")
        if V != self.vocabulary.size:
            raise ModelError(f"input dimension {V} != vocabulary size {self.vocabulary.size}")

        emb_t = ad.transpose(self.W_emb)  # (V, m)
        vs, vhats = [], []
        for t in range(T):
            x_t = Tensor(x_proc[:, t, :], op="input")
            v_t = ad.matmul(x_t, emb_t)
            d_t = Tensor(d_proc[:, t].reshape(B, 1), op="input")
            vs.append(v_t)
            vhats.append(ad.concat([v_t, d_t], axis=1))

        g = Tensor(np.zeros((B, self.hidden_dim)), op="h0")
        h = Tensor(np.zeros((B, self.hidden_dim)), op="h0")
        e_parts, betas = [], []
        for t in range(T):
            g = self.cell_alpha.step(vhats[t], g)
            e_parts.append(ad.add(ad.matmul(g, self.w_alpha), self.b_alpha))
            h = self.cell_beta.step(vhats[t], h)
            betas.append(ad.tanh(ad.add(ad.matmul(h, self.W_beta), self.b_beta)))

        e = ad.concat(e_parts, axis=1)  # (B, T)
        if mask_proc is not None:
            # exp() of masked logits underflows to exactly zero
            e = ad.add(e, Tensor((mask_proc - 1.0) * 1e9, op="mask"))
        alpha = ad.softmax(e, axis=1)

        context = None
        for t in range(T):
            a_t = ad.getitem(alpha, (slice(None), slice(t, t + 1)))  # (B, 1)
            term = ad.mul(ad.mul(a_t, betas[t]), vs[t])
            context = term if context is None else ad.add(context, term)

        logits = ad.add(ad.matmul(context, self.W_out), self.e_out)
        if self.head == HEAD_SIGMOID:
            probs = ad.sigmoid(logits)
        else:
            probs = ad.softmax(logits, axis=1)
        return logits, probs, alpha, betas, vs


def prepare_batch(encoded: Sequence[tuple[np.ndarray, np.ndarray]], reverse_time: bool
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[int]]:
    """Pad encoded sequences into processing-order arrays plus a step mask."""
    if not encoded:
        raise ModelError("empty batch")
    lengths = [x.shape[0] for x, _ in encoded]
    if min(lengths) == 0:
        raise ModelError("empty sequence: the model needs at least one step")
    B, T, V = len(encoded), max(lengths), encoded[0][0].shape[1]
    x_proc = np.zeros((B, T, V))
    d_proc = np.zeros((B, T))
    mask = np.zeros((B, T))
    for b, (x, d) in enumerate(encoded):
        n = x.shape[0]
        if reverse_time:
            x, d = x[::-1], d[::-1]
        x_proc[b, :n] = x
        d_proc[b, :n] = d
        mask[b, :n] = 1.0
    return x_proc, d_proc, mask, lengths


def _proc_to_chrono(values_proc: np.ndarray, length: int, reverse_time: bool) -> np.ndarray:
    real = values_proc[:length]
    return real[::-1] if reverse_time else real


def forward(model: RetainModel, x: np.ndarray, d: np.ndarray) -> PredictionResult:
    """Full prediction for one encoded sequence, attribution included."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.ndim != 2:
        raise ModelError(f"expected (T, V) input, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ModelError("empty sequence: the model needs at least one step")
    if d.shape != (x.shape[0],):
        raise ModelError(f"durations shape {d.shape} does not match {x.shape[0]} steps")

    x_proc, d_proc, mask, lengths = prepare_batch([(x, d)], model.reverse_time)
    logits_t, probs_t, alpha_t, betas_t, _ = model.forward_graph(x_proc, d_proc, mask)

    T = x.shape[0]
    alphas = _proc_to_chrono(alpha_t.values[0], T, model.reverse_time).copy()
    betas = _proc_to_chrono(
        np.stack([b.values[0] for b in betas_t]), T, model.reverse_time
    ).copy()
    logits = logits_t.values[0].copy()
    probs = probs_t.values[0].copy()

    W_emb = model.W_emb.values
    W_out = model.W_out.values
    codes = model.vocabulary.codes()
    influence: dict[tuple[int, str], np.ndarray] = {}
    for i in range(T):
        active = np.flatnonzero(x[i])
        if active.size == 0:
            continue
        # (n_active, L) = ((m, n_active) * (m, 1)).T @ (m, L), scaled by alpha_i
        contrib = alphas[i] * (W_emb[:, active] * betas[i][:, None]).T @ W_out
        for j, s in enumerate(active):
            influence[(i, codes[s])] = contrib[j]

    return PredictionResult(
        target_codes=model.target_codes,
        probabilities={c: float(p) for c, p in zip(model.target_codes, probs)},
        logits={c: float(v) for c, v in zip(model.target_codes, logits)},
        alphas=alphas,
        betas=betas,
        influence=influence,
    )


def predict_sequence(model: RetainModel, sequence: EventSequence) -> PredictionResult:
    x, d = encode(sequence, model.vocabulary)
    return forward(model, x, d)


def influence(model: RetainModel, x: np.ndarray, d: np.ndarray, step: int, code: str) -> np.ndarray:
    """Influence vector of ``code`` at ``step`` on every target.

    ``code`` does not have to be active at the step: what-if ranking probes
    inactive codes with the same formula.
    """
    x = np.asarray(x, dtype=np.float64)
    if not (0 <= step < x.shape[0]):
        raise ModelError(f"step {step} out of range for a {x.shape[0]}-step sequence")
    s = model.vocabulary.index(code)
    result = forward(model, x, d)
    return result.alphas[step] * (model.W_out.values.T @ (result.betas[step] * model.W_emb.values[:, s]))


def score_sequences(model: RetainModel, sequences: Sequence[EventSequence],
                    batch_size: int = 256) -> np.ndarray:
    """Per-target probabilities for many sequences, batched (N, L)."""
    out = np.zeros((len(sequences), model.n_targets))
    for start in range(0, len(sequences), batch_size):
        chunk = sequences[start:start + batch_size]
        encoded = [encode(seq, model.vocabulary) for seq in chunk]
        x_proc, d_proc, mask, _ = prepare_batch(encoded, model.reverse_time)
        _, probs, _, _, _ = model.forward_graph(x_proc, d_proc, mask)
        out[start:start + len(chunk)] = probs.values
    return out


# -- checkpointing --------------------------------------------------------------


def save(model: RetainModel, path):
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "vocab_hash": model.vocab_hash,
        "target_codes": list(model.target_codes),
        "hyper": {
            "embed_dim": model.embed_dim,
            "hidden_dim": model.hidden_dim,
            "reverse_time": model.reverse_time,
            "head": model.head,
            "seed": model.seed,
        },
        "params": {
            name: {"shape": list(t.values.shape), "values": t.values.reshape(-1).tolist()}
            for name, t in model.named_parameters()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load(path, vocabulary: EventVocabulary) -> RetainModel:
    """Load a checkpoint; refuses schema or vocabulary mismatches outright."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    version = payload.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(
            f"checkpoint schema version {version} != supported {CHECKPOINT_SCHEMA_VERSION}")
    vocab_hash = vocabulary.checksum()
    if payload.get("vocab_hash") != vocab_hash:
        raise CheckpointError(
            f"vocabulary hash mismatch: checkpoint {payload.get('vocab_hash')!r} "
            f"!= current {vocab_hash!r}")

    hyper = payload["hyper"]
    model = RetainModel(
        vocabulary, payload["target_codes"],
        embed_dim=int(hyper["embed_dim"]), hidden_dim=int(hyper["hidden_dim"]),
        reverse_time=bool(hyper["reverse_time"]), head=hyper["head"],
        seed=int(hyper.get("seed", 0)),
    )
    params = payload["params"]
    for name, tensor in model.named_parameters():
        if name not in params:
            raise CheckpointError(f"checkpoint is missing parameter {name!r}")
        rec = params[name]
        values = np.array(rec["values"], dtype=np.float64).reshape(rec["shape"])
        if values.shape != tensor.values.shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {values.shape}, expected {tensor.values.shape}")
        tensor.values = values
    return model
