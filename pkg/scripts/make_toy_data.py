"""Regenerate the bundled toy corpora and training config under src/lexan/data/toy."""

import argparse
from pathlib import Path

from lexan.corpus import write_tagged_file
from lexan.synthetic import toy_corpus
from lexan.tagset import DEFAULT_TAGS

CONFIG = """\
# toy run: tiny model, a few hundred sentences, finishes in seconds
seed=7
manifest=corpora.tsv
dev=dev.txt
checkpoint_dir=out
embed_dim=16
hidden=16
num_layers=1
min_count=1
base_lr=0.2
embedding_lr=0.2
per_corpus=10
finetune_every=50
finetune_lr=0.05
max_batches=150
eval_every=30
patience=2
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parents[1] / "src/lexan/data/toy", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    tags = [t.code for t in DEFAULT_TAGS][:12]
    sizes = {"title": 120, "query": 80, "news": 60, "human": 40, "dev": 30}
    # one shared lexicon (same seed) so every corpus speaks the same toy language
    pool = toy_corpus(2024, sum(sizes.values()), tags, n_chars=60, n_words=40)
    start = 0
    for name, n in sizes.items():
        write_tagged_file(args.out / f"{name}.txt", pool[start:start + n])
        start += n
    (args.out / "corpora.tsv").write_text(
        "# name<TAB>path<TAB>source\n"
        "title\ttitle.txt\tmachine\nquery\tquery.txt\tmachine\n"
        "news\tnews.txt\tmachine\nhuman\thuman.txt\thuman\n", encoding="utf-8")
    (args.out / "toy.cfg").write_text(CONFIG, encoding="utf-8")
    print(f"wrote toy data to {args.out}")


if __name__ == "__main__":
    main()
