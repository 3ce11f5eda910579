"""Write a randomly initialised full-size model and a benchmark input file.

The model has the default 56-label scheme, 5000 characters, 128-dim
embeddings and two 256-unit Bi-GRU layers. Use it with ``lexan bench``.
"""

import argparse
from pathlib import Path

from lexan import modelfile
from lexan.corpus import Vocabulary
from lexan.model import Model
from lexan.synthetic import CJK_BASE, random_text
from lexan.tagset import default_label_space
from lexan.training import ModelConfig, init_params


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--vocab", type=int, default=5000)
    ap.add_argument("--chars", type=int, default=100_000, help="size of the benchmark input")
    args = ap.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    space = default_label_space()
    vocab = Vocabulary([chr(CJK_BASE + i) for i in range(args.vocab)])
    net, crf = init_params(args.seed, vocab.size, space.size, ModelConfig())
    modelfile.save(Model(space, vocab, net, crf), args.out_dir / "random.lexan")
    lines = random_text(args.seed + 1, args.chars)
    (args.out_dir / "bench.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out_dir / 'random.lexan'} and {args.out_dir / 'bench.txt'}")


if __name__ == "__main__":
    main()
