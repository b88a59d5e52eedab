"""Shared transformer encoder-decoder over character vocabularies.

Both trainable modules are thin wrappers around this model: the fragment
selector adds banded encoder self-attention and label positional encodings,
the fragment solver uses it vanilla. Decoding helpers cover the two modes
the system needs: deterministic argmax decoding and stochastic multi-output
sampling with per-token probabilities.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from ..tasks import Vocabulary
from .masking import causal_mask, diagonal_mask
from .positional import sample_position_batch, sinusoidal_table


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder with optional banded encoder attention and label
    positional encodings on the source side.

    ``band_half_width=None`` gives vanilla full self-attention; with
    ``label_positions=False`` source positions are the standard 0..L-1.
    Target positions are always standard sinusoidal.
    """

    def __init__(
        self,
        vocab_size: int,
        d_model: int,
        nhead: int,
        num_encoder_layers: int,
        num_decoder_layers: int,
        dim_feedforward: int,
        dropout: float,
        n_positions: int,
        band_half_width: int | None = None,
        label_positions: bool = False,
        attn_gain: float | None = None,
        pad_id: int = 0,
        norm_first: bool = False,
    ):
        super().__init__()
        self.d_model = d_model
        self.nhead = nhead
        self.n_positions = n_positions
        self.band_half_width = band_half_width
        self.label_positions = label_positions
        self.pad_id = pad_id
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d_model, nhead, dim_feedforward, dropout,
                batch_first=True, norm_first=norm_first,
            ),
            num_encoder_layers,
        )
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d_model, nhead, dim_feedforward, dropout,
                batch_first=True, norm_first=norm_first,
            ),
            num_decoder_layers,
        )
        self.embedding = nn.Embedding(vocab_size, d_model, padding_idx=pad_id)
        self.output = nn.Linear(d_model, vocab_size)
        self.dropout = nn.Dropout(dropout)
        self.register_buffer(
            "pos_table", sinusoidal_table(n_positions, d_model), persistent=False
        )
        # embeddings at d^-1/2 so the sqrt(d)-scaled tokens and the positional
        # rows land on comparable scales; the default N(0,1) drowns positions
        nn.init.normal_(self.embedding.weight, mean=0.0, std=d_model**-0.5)
        with torch.no_grad():
            self.embedding.weight[pad_id].zero_()
        if attn_gain is not None:
            self._init_self_attention(attn_gain)

    def _init_self_attention(self, gain: float) -> None:
        # scaled init applies to self-attention projections only
        layers = list(self.encoder.layers) + list(self.decoder.layers)
        for layer in layers:
            nn.init.xavier_uniform_(layer.self_attn.in_proj_weight, gain=gain)
            nn.init.xavier_uniform_(layer.self_attn.out_proj.weight, gain=gain)

    def embed_source(self, src: torch.Tensor, src_positions: torch.Tensor | None) -> torch.Tensor:
        x = self.embedding(src) * math.sqrt(self.d_model)
        if src_positions is not None:
            x = x + self.pos_table[src_positions]
        else:
            x = x + self.pos_table[: src.size(1)].unsqueeze(0)
        return self.dropout(x)

    def embed_target(self, tgt: torch.Tensor) -> torch.Tensor:
        x = self.embedding(tgt) * math.sqrt(self.d_model)
        x = x + self.pos_table[: tgt.size(1)].unsqueeze(0)
        return self.dropout(x)

    def encoder_mask(
        self, length: int, src_padding: torch.Tensor | None
    ) -> torch.Tensor | None:
        """Additive encoder self-attention mask.

        The band and the key-padding constraint are merged into one float
        mask (one entry set, never summed) so no row can overflow to -inf:
        fully-banded pad rows stay finite and softmax never yields NaN.
        """
        if self.band_half_width is None:
            return None
        dtype = self.pos_table.dtype
        band = diagonal_mask(length, self.band_half_width, dtype=dtype)
        if src_padding is None:
            return band
        allowed = (band == 0).unsqueeze(0) & ~src_padding.unsqueeze(1)
        mask = torch.zeros(src_padding.size(0), length, length, dtype=dtype)
        mask[~allowed] = torch.finfo(dtype).min
        return mask.repeat_interleave(self.nhead, dim=0)

    def encode(
        self,
        src: torch.Tensor,
        src_positions: torch.Tensor | None = None,
        src_padding: torch.Tensor | None = None,
    ) -> torch.Tensor:
        x = self.embed_source(src, src_positions)
        mask = self.encoder_mask(src.size(1), src_padding)
        if mask is not None:
            # padding already folded into the additive mask
            return self.encoder(x, mask=mask)
        return self.encoder(x, src_key_padding_mask=src_padding)

    def decode(
        self,
        memory: torch.Tensor,
        tgt: torch.Tensor,
        memory_padding: torch.Tensor | None = None,
    ) -> torch.Tensor:
        x = self.embed_target(tgt)
        out = self.decoder(
            x,
            memory,
            tgt_mask=causal_mask(tgt.size(1), dtype=x.dtype).to(memory.device),
            memory_key_padding_mask=memory_padding,
        )
        return self.output(out)

    def forward(
        self,
        src: torch.Tensor,
        tgt_in: torch.Tensor,
        src_positions: torch.Tensor | None = None,
        src_padding: torch.Tensor | None = None,
    ) -> torch.Tensor:
        memory = self.encode(src, src_positions, src_padding)
        return self.decode(memory, tgt_in, memory_padding=src_padding)


# ---------------------------------------------------------------------------
# Tensorization helpers
# ---------------------------------------------------------------------------

def encode_sources(vocab: Vocabulary, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad-encode source strings -> (ids [B, L], bool padding mask [B, L])."""
    ids = [vocab.encode(t) for t in texts]
    max_len = max(len(i) for i in ids)
    batch = torch.full((len(ids), max_len), vocab.pad_id, dtype=torch.long)
    padding = torch.ones(len(ids), max_len, dtype=torch.bool)
    for row, seq in enumerate(ids):
        batch[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        padding[row, : len(seq)] = False
    return batch, padding


def encode_targets(vocab: Vocabulary, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
    """Teacher-forcing pair: (BOS + tokens, tokens + EOS), PAD-padded."""
    ids = [vocab.encode(t) for t in texts]
    max_len = max(len(i) for i in ids) + 1
    tgt_in = torch.full((len(ids), max_len), vocab.pad_id, dtype=torch.long)
    tgt_out = torch.full((len(ids), max_len), vocab.pad_id, dtype=torch.long)
    for row, seq in enumerate(ids):
        tgt_in[row, 0] = vocab.bos_id
        tgt_in[row, 1 : len(seq) + 1] = torch.tensor(seq, dtype=torch.long)
        tgt_out[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        tgt_out[row, len(seq)] = vocab.eos_id
    return tgt_in, tgt_out


def source_positions(
    model: Seq2SeqTransformer,
    texts: list[str],
    rng: np.random.Generator | None,
) -> torch.Tensor | None:
    """Fresh label positions per sequence, or None for standard positions."""
    if not model.label_positions:
        return None
    if rng is None:
        raise ValueError("label-position models need an rng at every forward")
    return sample_position_batch([len(t) for t in texts], model.n_positions, rng)


@torch.no_grad()
def greedy_decode(
    model: Seq2SeqTransformer,
    vocab: Vocabulary,
    texts: list[str],
    max_len: int,
    rng: np.random.Generator | None = None,
) -> list[str]:
    """Deterministic argmax decoding of a batch of inputs."""
    model.eval()
    src, padding = encode_sources(vocab, texts)
    positions = source_positions(model, texts, rng)
    memory = model.encode(src, positions, padding)
    batch = len(texts)
    tgt = torch.full((batch, 1), vocab.bos_id, dtype=torch.long)
    finished = torch.zeros(batch, dtype=torch.bool)
    for _ in range(max_len):
        logits = model.decode(memory, tgt, memory_padding=padding)[:, -1]
        nxt = logits.argmax(dim=-1)
        nxt = torch.where(finished, torch.full_like(nxt, vocab.pad_id), nxt)
        tgt = torch.cat([tgt, nxt.unsqueeze(1)], dim=1)
        finished |= nxt == vocab.eos_id
        if bool(finished.all()):
            break
    out = []
    for row in tgt[:, 1:].tolist():
        tokens = []
        for tok in row:
            if tok == vocab.eos_id or tok == vocab.pad_id:
                break
            tokens.append(tok)
        out.append(vocab.decode(tokens))
    return out


@torch.no_grad()
def sampled_decode(
    model: Seq2SeqTransformer,
    vocab: Vocabulary,
    texts: list[str],
    max_len: int,
    generator: torch.Generator,
    rng: np.random.Generator | None = None,
) -> list[tuple[str, list[float]]]:
    """Stochastic decoding: every token is sampled from the untempered
    softmax; returns each row's text and the probabilities of its sampled
    tokens (EOS excluded)."""
    model.eval()
    src, padding = encode_sources(vocab, texts)
    positions = source_positions(model, texts, rng)
    memory = model.encode(src, positions, padding)
    batch = len(texts)
    tgt = torch.full((batch, 1), vocab.bos_id, dtype=torch.long)
    finished = torch.zeros(batch, dtype=torch.bool)
    sampled_tokens: list[list[int]] = [[] for _ in range(batch)]
    sampled_probs: list[list[float]] = [[] for _ in range(batch)]
    for _ in range(max_len):
        logits = model.decode(memory, tgt, memory_padding=padding)[:, -1]
        probs = torch.softmax(logits, dim=-1)
        nxt = torch.multinomial(probs, 1, generator=generator).squeeze(1)
        chosen = probs.gather(1, nxt.unsqueeze(1)).squeeze(1)
        for row in range(batch):
            if not finished[row] and int(nxt[row]) != vocab.eos_id:
                sampled_tokens[row].append(int(nxt[row]))
                sampled_probs[row].append(float(chosen[row]))
        nxt = torch.where(finished, torch.full_like(nxt, vocab.pad_id), nxt)
        tgt = torch.cat([tgt, nxt.unsqueeze(1)], dim=1)
        finished |= nxt == vocab.eos_id
        if bool(finished.all()):
            break
    return [
        (vocab.decode(tokens), probs)
        for tokens, probs in zip(sampled_tokens, sampled_probs)
    ]
