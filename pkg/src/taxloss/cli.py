"""Command-line entry point.

Exit status is 0 on success, 1 when an input fails validation and 2 for
usage errors (argparse's own convention).

``train`` reads a JSON config::

    {
      "taxonomy": "tax.txt",           # paths are relative to the config file
      "train": "train.tsv",
      "test": "test.tsv",
      "output_dir": "out",
      "masking": {"rates": [0, 0.6, 0.8], "seed": 0},   # optional
      "method": "symbolic", "w": 0.1, "epochs": 10, ...  # any TrainConfig field
    }

Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import check_structure, compile
from .data import (
    DatasetError,
    MaskingPolicy,
    SynthSpec,
    apply_masking,
    load_dataset_file,
    masked_counts,
    serialize_dataset,
    synth_generate,
)
from .gcnreg import build_backbone
from .logic import node_sentence
from .taxonomy import TaxonomyError, load_taxonomy
from .trainer import (
    Method,
    TrainConfig,
    evaluate,
    history_csv,
    load_model,
    model_json,
    report_json,
    sweep_seeds,
)

CONFIG_KEYS = {"taxonomy", "train", "test", "output_dir", "masking"}


class ValidationError(Exception):
    """Bad input file or config; reported on stderr with exit status 1."""


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_tax(path):
    try:
        return load_taxonomy(path)
    except TaxonomyError as e:
        raise ValidationError(f"{path}: {e}") from None


def _load_data(path, tax):
    try:
        return load_dataset_file(path, tax)
    except DatasetError as e:
        raise ValidationError(f"{path}: {e}") from None


# --- subcommands -------------------------------------------------------------


def cmd_validate_tax(args):
    tax = _load_tax(args.taxonomy)
    print(f"{tax.n_classes} leaves, depth {tax.depth}")


def cmd_compile(args):
    tax = _load_tax(args.taxonomy)
    failed = 0
    total = 0
    for v in tax.internal_nodes():
        s = node_sentence(tax, v)
        c = compile(s)
        rep = check_structure(c)
        total += len(c)
        failed += not rep.ok
        if args.dump:
            kinds = " ".join(f"{k}={n}" for k, n in sorted(c.kind_counts().items()))
            status = "ok" if rep.ok else "FAILED " + "; ".join(rep.violations)
            print(f"{tax.nodes[v].name}\t{s.dump()}")
            print(f"  nodes={len(c)} edges={c.n_edges()} depth={c.depth()} {kinds}")
            print(f"  decomposable={rep.decomposable} smooth={rep.smooth} "
                  f"deterministic={rep.deterministic} ({rep.determinism_method}) {status}")
    n = len(tax.internal_nodes())
    print(f"{n} circuits, {total} nodes, {n - failed}/{n} pass structure checks")
    if failed:
        raise ValidationError(f"{failed} circuit(s) failed structure checks")


def cmd_mask(args):
    tax = _load_tax(args.taxonomy)
    recs = _load_data(args.data, tax)
    try:
        policy = MaskingPolicy(tuple(args.rates), args.seed)
        out = apply_masking(recs, tax, policy)
    except ValueError as e:
        raise ValidationError(str(e)) from None
    _emit(serialize_dataset(out, tax), args.output)
    counts = masked_counts(policy.rates, len(recs))
    print("masked per level: " + " ".join(str(c) for c in counts), file=sys.stderr)


def cmd_synth(args):
    tax = _load_tax(args.taxonomy)
    try:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        recs = synth_generate(tax, spec, sample_seed=args.sample_seed)
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{args.spec}: {e}") from None
    _emit(serialize_dataset(recs, tax), args.output)


def load_experiment(path, overrides) -> tuple[dict, TrainConfig]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = set(doc) - train_keys - CONFIG_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("taxonomy", "train", "test"):
        if key not in doc:
            raise ValidationError(f"{path}: missing required key {key!r}")
    base = path.parent
    paths = {k: str(base / doc[k]) for k in ("taxonomy", "train", "test")}
    paths["output_dir"] = str(base / doc.get("output_dir", "out"))
    for k in ("taxonomy", "train", "test"):
        if not Path(paths[k]).is_file():
            raise ValidationError(f"{path}: {k} file {paths[k]} does not exist")
    settings = {k: v for k, v in doc.items() if k in train_keys}
    settings.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = TrainConfig.from_dict(settings)
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{path}: {e}") from None
    paths["masking"] = doc.get("masking")
    return paths, cfg


def cmd_train(args):
    overrides = {"method": args.method, "w": args.w, "epochs": args.epochs, "lr": args.lr,
                 "batch_size": args.batch_size, "seeds": args.seeds}
    paths, cfg = load_experiment(args.config, overrides)
    if args.output_dir:
        paths["output_dir"] = args.output_dir
    tax = _load_tax(paths["taxonomy"])
    train_set = _load_data(paths["train"], tax)
    test_set = _load_data(paths["test"], tax)
    if paths["masking"]:
        m = paths["masking"]
        try:
            train_set = apply_masking(train_set, tax, MaskingPolicy(tuple(m["rates"]), int(m.get("seed", 0))))
        except (KeyError, ValueError) as e:
            raise ValidationError(f"{args.config}: masking: {e}") from None
    try:
        sweep = sweep_seeds(cfg, train_set, test_set, tax)
    except ValueError as e:
        raise ValidationError(str(e)) from None
    run, rep = sweep.best
    out = Path(paths["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.csv").write_text(history_csv(run.history), encoding="utf-8")
    (out / "model.json").write_text(model_json(run.params, tax, cfg), encoding="utf-8")
    per_seed = [(r.seed, m) for r, m in zip(sweep.runs, sweep.reports)]
    (out / "report.json").write_text(report_json(rep, tax, cfg, run.seed, per_seed), encoding="utf-8")
    print(f"{cfg.method.value}: best seed {run.seed}  accuracy {rep.accuracy:.4f}  "
          f"macro-F1 {rep.macro_avg_f1:.4f}  weighted-F1 {rep.weighted_avg_f1:.4f}  -> {out}")


def cmd_eval(args):
    try:
        params, tax = load_model(Path(args.model).read_text(encoding="utf-8"))
    except (ValueError, KeyError) as e:
        raise ValidationError(f"{args.model}: {e}") from None
    test = _load_data(args.test, tax)
    try:
        rep = evaluate(params, test, tax)
    except ValueError as e:
        raise ValidationError(f"{args.test}: {e}") from None
    names = [tax.nodes[v].name for v in tax.leaf_order]
    _emit(json.dumps(rep.to_dict(names), indent=1, sort_keys=True) + "\n", args.output)


def cmd_inspect_graph(args):
    tax = _load_tax(args.taxonomy)
    recs = _load_data(args.data, tax)
    if not recs:
        raise ValidationError(f"{args.data}: no records")
    order = np.random.default_rng(args.batch_seed).permutation(len(recs))
    batch = [recs[i] for i in order[: args.batch_size]]
    g = build_backbone(tax, batch)
    deg = g.degrees()
    print(f"nodes {g.n_nodes} (taxonomy {g.n_tax}, documents {len(batch)}), "
          f"edges {int(g.adjacency.sum()) // 2}")
    for i, v in enumerate(g.order):
        print(f"{i}\ttax\t{tax.nodes[v].name}\tdegree={deg[i]}")
    for k, r in enumerate(batch):
        i = g.n_tax + k
        print(f"{i}\tdoc\t{r.id}\t-> {tax.nodes[r.known_node].name}\tdegree={deg[i]}")
    hist = Counter(int(d) for d in deg)
    print("degree histogram: " + " ".join(f"{d}:{hist[d]}" for d in sorted(hist)))


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taxloss", description="Taxonomy-aware losses for flat classifiers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate-tax", help="parse a taxonomy and report its shape")
    s.add_argument("taxonomy")
    s.set_defaults(func=cmd_validate_tax)

    s = sub.add_parser("compile", help="compile every node sentence and check circuit structure")
    s.add_argument("taxonomy")
    s.add_argument("--dump", action="store_true", help="print per-circuit statistics")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("mask", help="hide labels level by level")
    s.add_argument("taxonomy")
    s.add_argument("data")
    s.add_argument("--rates", type=_floats, required=True, help="per-level rates, e.g. 0,0.6,0.8")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("synth", help="generate a synthetic long-tailed dataset")
    s.add_argument("taxonomy")
    s.add_argument("--spec", required=True, help="JSON file with SynthSpec fields")
    s.add_argument("--sample-seed", type=int, default=None)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train from a JSON config; writes history, model and report")
    s.add_argument("config")
    s.add_argument("--method", choices=[m.value for m in Method])
    s.add_argument("--w", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--seeds", type=_ints)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a saved model on a labelled dataset")
    s.add_argument("model")
    s.add_argument("test")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect-graph", help="show the backbone graph for one batch")
    s.add_argument("taxonomy")
    s.add_argument("data")
    s.add_argument("--batch-seed", type=int, default=0)
    s.add_argument("--batch-size", type=int, default=32)
    s.set_defaults(func=cmd_inspect_graph)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
