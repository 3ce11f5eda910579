"""Train on 100 toy sentences until character accuracy reaches a target.

A working encoder, CRF and optimizer should memorise this set in a few
dozen passes.
"""

import argparse
import time

import numpy as np

from lexan.corpus import build_vocabulary, to_iob2
from lexan.model import Model
from lexan.synthetic import toy_corpus
from lexan.tagset import Tag, build_label_space
from lexan.training import (ModelConfig, OptimizerConfig, SamplerState, batch_gradients,
                            char_accuracy, init_params, next_batch, sgd_step)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lr", type=float, default=0.2)
    ap.add_argument("--target", type=float, default=0.99)
    ap.add_argument("--max-passes", type=int, default=300)
    args = ap.parse_args()

    tags = list("ABCDEF")
    space = build_label_space([Tag(t) for t in tags])
    sents = [to_iob2(w, space) for w in toy_corpus(7, 100, tags, n_chars=50)]
    vocab = build_vocabulary((s.chars for s in sents), 1)
    data = [(vocab.encode(s.chars), s.labels) for s in sents]
    net, crf = init_params(args.seed, vocab.size, space.size, ModelConfig(16, 32, 1))
    model = Model(space, vocab, net, crf)
    opt = OptimizerConfig(base_lr=args.lr, embedding_lr=args.lr, per_corpus=10)
    sampler = SamplerState([len(data)], np.random.default_rng(args.seed + 1))

    t0 = time.perf_counter()
    for p in range(1, args.max_passes + 1):
        for _ in range(len(data) // opt.per_corpus):
            ll, g = batch_gradients(net, crf, [data[i] for _, i in next_batch(sampler, opt)])
            sgd_step(net, crf, g, opt)
        acc = char_accuracy(model, sents)
        print(f"pass={p} mean_loglik={ll:.4f} char_accuracy={acc:.4f}")
        if acc >= args.target:
            break
    print(f"seconds={time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
