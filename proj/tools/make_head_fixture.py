#!/usr/bin/env python3
"""Writes the head-predict parity fixture.

Produces a small weight file in the head format (labels listed in MELD order,
not the canonical one), three 25x768 float32 layer sidecars, a two-film corpus
pointing at them, and expected.csv with the float64 numpy forward pass in
canonical label order.

    python3 tools/make_head_fixture.py tests/fixtures/head
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np

CANONICAL = ["anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"]
FILE_ORDER = ["neutral", "surprise", "fear", "sadness", "joy", "disgust", "anger"]
N_LAYERS, DIM, HIDDEN = 25, 768, 8


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)
    layer_logits = rng.normal(0.0, 1.0, N_LAYERS).astype("<f4")
    hidden_w = rng.normal(0.0, 0.05, (HIDDEN, DIM)).astype("<f4")
    hidden_b = rng.normal(0.0, 0.1, HIDDEN).astype("<f4")
    out_w = rng.normal(0.0, 0.5, (len(FILE_ORDER), HIDDEN)).astype("<f4")
    out_b = rng.normal(0.0, 0.1, len(FILE_ORDER)).astype("<f4")

    header = json.dumps({
        "version": "1",
        "n_layers": N_LAYERS,
        "dim": DIM,
        "hidden": HIDDEN,
        "n_labels": len(FILE_ORDER),
        "activation": "relu",
        "labels": FILE_ORDER,
        "training": {"note": "random weights for parity testing"},
    }).encode()
    with open(out / "head.bin", "wb") as f:
        f.write(b"SLHEAD\0\0")
        f.write(struct.pack("<II", 1, len(header)))
        f.write(header)
        for block in (layer_logits, hidden_w, hidden_b, out_w, out_b):
            f.write(block.tobytes())

    w = np.exp(layer_logits.astype(np.float64) - layer_logits.max())
    w /= w.sum()
    films = [
        {"film_id": "h1", "title": "Head One", "year": 2001, "runtime_s": 60.0, "genres": ["drama"]},
        {"film_id": "h2", "title": "Head Two", "year": 2002, "runtime_s": 60.0, "genres": ["drama"]},
    ]
    utts, rows = [], []
    for i, film in enumerate(["h1", "h1", "h2"]):
        layers = rng.normal(0.0, 1.0 + i, (N_LAYERS, DIM)).astype("<f4")
        name = f"layers_{i}.bin"
        (out / name).write_bytes(layers.tobytes())
        v = w @ layers.astype(np.float64)
        h = np.maximum(0.0, hidden_w.astype(np.float64) @ v + hidden_b)
        logits = out_w.astype(np.float64) @ h + out_b
        p = np.exp(logits - logits.max())
        p /= p.sum()
        by_label = dict(zip(FILE_ORDER, p))
        probs = [by_label[c] for c in CANONICAL]
        utt_id = f"{film}_{i}"
        utts.append({"film_id": film, "utt_id": utt_id, "start_s": 1.0 + 10 * i, "end_s": 5.0 + 10 * i,
                     "text": f"line {i}", "emotion_probs": [1 / 7] * 7, "layer_embeddings_path": name})
        rows.append((utt_id, name, probs))

    with open(out / "films.jsonl", "w") as f:
        for film in films:
            f.write(json.dumps(film) + "\n")
    with open(out / "utterances.jsonl", "w") as f:
        for u in utts:
            f.write(json.dumps(u) + "\n")
    with open(out / "expected.csv", "w") as f:
        f.write("utt_id,sidecar," + ",".join(CANONICAL) + "\n")
        for utt_id, name, probs in rows:
            f.write(f"{utt_id},{name}," + ",".join(repr(float(x)) for x in probs) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
