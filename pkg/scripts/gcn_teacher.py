"""How good a teacher is the batch graph convolution?

After training the gcn method, samples batches and compares, for documents
known only at an internal node, how much probability mass the classifier (P)
and the graph convolution (H) put inside that node's subtree.  For labelled
documents it compares top-1 accuracy.  The regularizer pulls P toward H, so
it can only help where H is the better of the two.
"""

import argparse
from dataclasses import replace

import numpy as np

from taxloss.data import feature_matrix
from taxloss.experiments import DEFAULT_W, default_base, make_benchmark
from taxloss.gcnreg import build_backbone, gcn_forward, node_inputs
from taxloss.trainer import Method, evaluate, forward, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--w", type=float, default=DEFAULT_W[Method.GCN])
    ap.add_argument("--layers", type=int, default=1, choices=[1, 2])
    ap.add_argument("--gcn-lr", type=float, default=None)
    ap.add_argument("--batches", type=int, default=30)
    args = ap.parse_args()

    print("seed  lab acc P / H   subtree mass P / H   macro-F1")
    for seed in args.seeds:
        bench = make_benchmark(seed)
        tax = bench.tax
        cfg = replace(default_base(), method=Method.GCN, w=args.w, gcn_layers=args.layers)
        if args.gcn_lr is not None:
            cfg = replace(cfg, gcn_lr=args.gcn_lr)
        res = train(cfg, bench.train, tax, seed=seed)
        rng = np.random.default_rng(seed)
        lab, unl = [], []
        for _ in range(args.batches):
            idx = rng.choice(len(bench.train), cfg.batch_size, replace=False)
            batch = [bench.train[i] for i in idx]
            g = build_backbone(tax, batch)
            X = feature_matrix(batch)
            H = gcn_forward(g, node_inputs(g, res.gcn, X), res.gcn)[g.doc_rows]
            P = forward(res.params, X)
            for k, r in enumerate(batch):
                if r.leaf_label is not None:
                    lab.append((P[k].argmax() == r.leaf_label, H[k].argmax() == r.leaf_label))
                else:
                    s = list(tax.leaves_under(r.known_node))
                    unl.append((P[k, s].sum(), H[k, s].sum()))
        la, ua = np.mean(lab, axis=0), np.mean(unl, axis=0)
        f1 = evaluate(res.params, bench.test, tax).macro_avg_f1
        print(f"{seed:>4}  {la[0]:.3f} / {la[1]:.3f}     {ua[0]:.3f} / {ua[1]:.3f}         {f1:.4f}")


if __name__ == "__main__":
    main()
