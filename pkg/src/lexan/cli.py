"""Command-line entry points: ``train``, ``tag``, ``eval`` and ``bench``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import resource
import sys
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Iterator

from threadpoolctl import threadpool_limits

from . import modelfile
from .corpus import CorpusFormatError, format_tagged_line, load_corpus_set, read_tagged_file
from .evaluation import AlignmentError, evaluate
from .model import Model, split_long
from .tagset import DEFAULT_TAGS, SchemeError, build_label_space, load_scheme
from .training import ModelConfig, OptimizerConfig, Schedule, format_log_entry, train

log = logging.getLogger("lexan")

TARGET_THROUGHPUT = 2300  # chars/sec, one thread
MEMORY_BUDGET_MB = 100
MIN_BENCH_CHARS = 100_000


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# training config


_PATH_KEYS = {"manifest", "dev", "checkpoint_dir", "scheme"}
_BOOL_KEYS = {"wide_sidecar"}


def read_config(path: str | Path) -> dict:
    """Parse ``key=value`` lines; relative paths resolve against the config's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    cfg: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = key.strip(), value.strip()
        if key in _PATH_KEYS:
            cfg[key] = path.parent / value
        elif key in _BOOL_KEYS:
            cfg[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            cfg[key] = value
    return cfg


def _dataclass_from(cls, cfg: dict):
    kwargs = {}
    for f in fields(cls):
        if f.name not in cfg:
            continue
        raw = cfg.pop(f.name)
        if raw.lower() in ("none", "off", ""):
            kwargs[f.name] = None
            continue
        is_float = "float" in str(f.type)
        try:
            kwargs[f.name] = float(raw) if is_float else int(raw)
        except ValueError:
            raise UsageError(f"config key {f.name}: bad value {raw!r}") from None
    return cls(**kwargs)


def _load_space(scheme):
    return build_label_space(load_scheme(scheme) if scheme else DEFAULT_TAGS)


def cmd_train(args) -> int:
    cfg = read_config(args.config)
    seed = int(args.seed if args.seed is not None else cfg.pop("seed", 0))
    cfg.pop("seed", None)
    for key in ("manifest", "checkpoint_dir"):
        if key not in cfg:
            raise UsageError(f"config is missing {key}")
    manifest, out_dir = cfg.pop("manifest"), cfg.pop("checkpoint_dir")
    dev_path = cfg.pop("dev", None)
    wide = cfg.pop("wide_sidecar", False)
    space = _load_space(cfg.pop("scheme", None) or args.scheme)
    model_cfg = _dataclass_from(ModelConfig, cfg)
    opt = _dataclass_from(OptimizerConfig, cfg)
    schedule = _dataclass_from(Schedule, cfg)
    if cfg:
        raise UsageError(f"unknown config keys: {', '.join(sorted(cfg))}")

    try:
        corpora = load_corpus_set(manifest, space)
        dev = read_tagged_file(dev_path, space) if dev_path else None
    except FileNotFoundError as e:
        raise UsageError(f"missing file: {e.filename}") from None
    except (CorpusFormatError, SchemeError, ValueError) as e:
        raise UsageError(str(e)) from None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    log_path = out_dir / "train.log"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def on_log(entry):
            log_fh.write(format_log_entry(entry) + "\n")
            log_fh.flush()

        try:
            result = train(corpora, space, model_cfg=model_cfg, opt=opt, schedule=schedule,
                           dev=dev, seed=seed, on_log=on_log)
        except ValueError as e:
            raise UsageError(str(e)) from None
        on_log({"batch": result.batches, "event": "done",
                "stopped_early": int(result.stopped_early)})

    modelfile.save(result.model, out_dir / "best.lexan")
    modelfile.save(result.final, out_dir / "final.lexan")
    if wide:
        modelfile.save_wide(result.final, out_dir / "final.wide.npz")
    print(f"wrote {out_dir / 'best.lexan'}, {out_dir / 'final.lexan'}, {log_path}")
    return 0


# ---------------------------------------------------------------------------
# tagging


def _decoded_lines(stream, name: str) -> Iterator[str | None]:
    """Yield text lines; undecodable ones are reported and yield None."""
    for lineno, raw in enumerate(stream, 1):
        raw = raw.rstrip(b"\r\n")
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as e:
            print(f"{name}:{lineno}: invalid UTF-8 at byte {e.start}", file=sys.stderr)
            yield None


def tag_lines(model: Model, lines: list[str | None], max_len: int = 1000) -> list[str]:
    pieces, owners = [], []
    for i, line in enumerate(lines):
        for p in split_long(line or "", max_len):
            pieces.append(p)
            owners.append(i)
    words: list[list] = [[] for _ in lines]
    for i, ws in zip(owners, model.tag(pieces)):
        words[i].extend(ws)
    return [format_tagged_line(w) for w in words]


def _chunks(it: Iterable, n: int) -> Iterator[list]:
    buf = []
    for x in it:
        buf.append(x)
        if len(buf) == n:
            yield buf
            buf = []
    if buf:
        yield buf


def stream_tag(model: Model, lines: Iterable[str | None], threads: int = 1, chunk: int = 64,
               max_len: int = 1000) -> Iterator[str]:
    """Tag lines in order; with ``threads > 1`` chunks run on a bounded worker pool."""
    if threads <= 1:
        for c in _chunks(lines, chunk):
            yield from tag_lines(model, c, max_len)
        return
    with ThreadPoolExecutor(threads) as pool:
        pending: deque = deque()
        for c in _chunks(lines, chunk):
            pending.append(pool.submit(tag_lines, model, c, max_len))
            if len(pending) >= 2 * threads:
                yield from pending.popleft().result()
        while pending:
            yield from pending.popleft().result()


def _open_model(path) -> Model:
    try:
        return modelfile.load(path)
    except FileNotFoundError:
        raise UsageError(f"model not found: {path}") from None
    except modelfile.ModelFormatError as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_tag(args) -> int:
    model = _open_model(args.model)
    src = open(args.input, "rb") if args.input else sys.stdin.buffer
    dst = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for out in stream_tag(model, _decoded_lines(src, args.input or "<stdin>"),
                              args.threads, max_len=args.max_len):
            dst.write(out + "\n")
    finally:
        if args.input:
            src.close()
        if args.output:
            dst.close()
        else:
            dst.flush()
    return 0


# ---------------------------------------------------------------------------
# evaluation


def cmd_eval(args) -> int:
    space = _load_space(args.scheme)
    try:
        gold = read_tagged_file(args.gold, space)
        system = read_tagged_file(args.system, space)
        report = evaluate(gold, system, space, args.include_low_confidence_ne)
    except FileNotFoundError as e:
        raise UsageError(f"missing file: {e.filename}") from None
    except AlignmentError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (CorpusFormatError, SchemeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(report.table())
    print()
    print(report.key_values())
    return 0


# ---------------------------------------------------------------------------
# benchmark


def resident_mb() -> tuple[float, float]:
    """(current, peak) resident set size in MB.

    VmHWM is preferred over ``ru_maxrss``: the latter survives ``exec`` on
    Linux, so a child forked from a large parent reports the parent's peak.
    """
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    current = peak
    try:
        with open("/proc/self/status") as fh:
            for line in fh:
                key, _, value = line.partition(":")
                if key == "VmRSS":
                    current = int(value.split()[0]) / 1024
                elif key == "VmHWM":
                    peak = int(value.split()[0]) / 1024
    except OSError:
        pass
    return current, peak


def cmd_bench(args) -> int:
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    n_chars = sum(len(l) for l in lines)
    if n_chars < args.min_chars:
        raise UsageError(f"benchmark input has {n_chars} characters; need at least {args.min_chars}")
    model = _open_model(args.model)

    start = time.perf_counter()
    out = list(stream_tag(model, lines, args.threads, max_len=args.max_len))
    elapsed = time.perf_counter() - start

    if args.output:
        Path(args.output).write_text("".join(o + "\n" for o in out), encoding="utf-8")
    rate = n_chars / elapsed
    current, peak = resident_mb()
    report = {
        "threads": args.threads,
        "chars": n_chars,
        "seconds": f"{elapsed:.3f}",
        "chars_per_sec": f"{rate:.1f}",
        "target_chars_per_sec": TARGET_THROUGHPUT,
        "meets_throughput": int(rate >= TARGET_THROUGHPUT),
        "rss_mb": f"{current:.1f}",
        "peak_rss_mb": f"{peak:.1f}",
        "memory_budget_mb": MEMORY_BUDGET_MB,
        "meets_memory": int(peak < MEMORY_BUDGET_MB),
    }
    print("\n".join(f"{k}={v}" for k, v in report.items()))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a key=value config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme", help="tag scheme file (default: built-in)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="tag plain text, one sentence per line")
    p.add_argument("--model", required=True)
    p.add_argument("--input", help="input file (default: standard input)")
    p.add_argument("--output", help="output file (default: standard output)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-len", type=int, default=1000, help="split longer lines at sentence ends")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="score a system file against a gold file")
    p.add_argument("gold")
    p.add_argument("system")
    p.add_argument("--scheme")
    p.add_argument("--include-low-confidence-ne", action="store_true",
                   help="count nr/ns/nt/t as PER/LOC/ORG/TIME mentions")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure tagging throughput and memory")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="also write the tagged text here")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-len", type=int, default=1000)
    p.add_argument("--min-chars", type=int, default=MIN_BENCH_CHARS, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # BLAS stays single-threaded; parallelism comes only from --threads.
        with threadpool_limits(limits=1):
            return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0
    except Exception as e:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
