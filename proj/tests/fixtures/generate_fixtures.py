#!/usr/bin/env python3
"""Regenerates the frozen reference data under tests/fixtures.

tiny_bert/     a 2-layer BERT with random weights saved by HuggingFace
               transformers, plus bert_expected.json holding its tokenizer ids
               and last-layer [CLS] vectors for a few sentences.
mfcc_expected.json
               MFCC frames computed with numpy following torchaudio.transforms.MFCC
               (hamming window, power spectrum, HTK mel, amplitude_to_DB with
               top_db, orthonormal DCT) with center=False framing.

Requires numpy, torch and transformers. Outputs are deterministic.
"""

import json
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))


def write_json(name, obj):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


# ---------------------------------------------------------------- BERT


VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    ".", ",", "?", "!", "'", "-",
    "the", "a", "in", "it", "to", "is", "you", "could", "please", "increase",
    "decrease", "bright", "##ness", "dark", "here", "too", "change", "light",
    "##s", "green", "turn", "on", "off", "Turn", "The", "Light", "make", "it",
    "warm", "##er", "cold", "##est", "switch", "s", "room", "un", "##believ",
    "##able", "时", "间",
]

SENTENCES = [
    "could you please increase the brightness",
    "it's too dark in here",
    "change the lights to green",
    "Turn the Light off!",
    "make it warmer, please",
    "unbelievable coldest room",
    "switch on the 时间 lights?",
    "zebra lights",
]


def make_bert():
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    out_dir = os.path.join(HERE, "tiny_bert")
    os.makedirs(out_dir, exist_ok=True)
    vocab = list(dict.fromkeys(VOCAB))
    with open(os.path.join(out_dir, "vocab.txt"), "w") as f:
        f.write("\n".join(vocab) + "\n")

    torch.manual_seed(0)
    cfg = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=48,
        max_position_embeddings=64,
        type_vocab_size=2,
        hidden_act="gelu",
        hidden_dropout_prob=0.0,
        attention_probs_dropout_prob=0.0,
    )
    model = BertModel(cfg, add_pooling_layer=False).double().eval()
    with torch.no_grad():
        for p in model.parameters():
            p.normal_(0.0, 0.3)
    model.save_pretrained(out_dir, safe_serialization=True)
    with open(os.path.join(out_dir, "tokenizer_config.json"), "w") as f:
        json.dump({"do_lower_case": False}, f)
        f.write("\n")

    tok = BertTokenizer(os.path.join(out_dir, "vocab.txt"), do_lower_case=False, tokenize_chinese_chars=True,
                        strip_accents=False)
    cases = []
    for s in SENTENCES:
        ids = tok(s)["input_ids"]
        with torch.no_grad():
            h = model(input_ids=torch.tensor([ids]), token_type_ids=torch.zeros(1, len(ids), dtype=torch.long))
        cls = h.last_hidden_state[0, 0].tolist()
        cases.append({"text": s, "tokens": tok.tokenize(s), "ids": ids, "cls": cls})
    write_json("bert_expected.json", {"model": "tiny_bert", "hidden_size": 32, "cases": cases})


# ---------------------------------------------------------------- MFCC


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_fbanks(n_freqs, f_min, f_max, n_mels, sr):
    all_freqs = np.linspace(0, sr // 2, n_freqs)
    m_pts = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    f_pts = mel_to_hz(m_pts)
    f_diff = f_pts[1:] - f_pts[:-1]
    slopes = f_pts[None, :] - all_freqs[:, None]
    down = -slopes[:, :-2] / f_diff[:-1]
    up = slopes[:, 2:] / f_diff[1:]
    return np.maximum(0.0, np.minimum(down, up))


def create_dct(n_mfcc, n_mels):
    n = np.arange(n_mels, dtype=np.float64)
    k = np.arange(n_mfcc, dtype=np.float64)[:, None]
    dct = np.cos(np.pi / n_mels * (n + 0.5) * k)
    dct[0] *= 1.0 / np.sqrt(2.0)
    dct *= np.sqrt(2.0 / n_mels)
    return dct.T


def mfcc(x, sr, win, hop, n_mfcc, n_mels, top_db=80.0, amin=1e-10):
    n = np.arange(win)
    window = 0.54 - 0.46 * np.cos(2.0 * np.pi * n / win)
    frames = 1 + (len(x) - win) // hop
    spec = np.stack([np.abs(np.fft.rfft(x[t * hop:t * hop + win] * window)) ** 2 for t in range(frames)])
    mel = spec @ mel_fbanks(win // 2 + 1, 0.0, sr / 2.0, n_mels, sr)
    db = 10.0 * np.log10(np.maximum(mel, amin))
    db = np.maximum(db, db.max() - top_db)
    return db @ create_dct(n_mfcc, n_mels)


def make_mfcc():
    sr = 16000
    rng = np.random.default_rng(1234)
    t = np.arange(int(0.3 * sr)) / sr
    x = 0.4 * np.sin(2 * np.pi * (300.0 * t + 900.0 * t * t)) + 0.2 * np.sin(2 * np.pi * 1250.0 * t)
    x += 0.02 * rng.standard_normal(len(t))
    x = np.round(x * 32767.0) / 32767.0
    feats = mfcc(x, sr, 400, 160, 40, 80)
    write_json("mfcc_expected.json", {
        "sample_rate": sr, "window": 400, "hop": 160, "num_mfcc": 40, "num_mel_bins": 80,
        "samples": x.tolist(), "frames": feats.tolist(),
    })


if __name__ == "__main__":
    make_bert()
    make_mfcc()
