#!/usr/bin/env python3
"""Independent reference for the seeded bootstrap referral pipeline.

Standard library only. It shares no code with the C++ library: the
generator, canonical ordering, uncertainty measures, referral rule, QWK, AUC
and the per-level summary are all written out here from their definitions.

Subcommands
  generate   write the fixed golden inputs (predictions + validation confusion)
  summarize  run the pipeline on given inputs and print the summary CSV
  all        generate inputs and both golden summaries into a directory
  check      regenerate everything in memory and diff against a directory
"""

import argparse
import math
import os
import sys

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + GAMMA) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next() >> 11) * 2.0 ** -53

    def index(self, n):
        return (self.next() * n) >> 64

    @staticmethod
    def child(seed, k):
        return SplitMix64(SplitMix64((seed + k * GAMMA) & MASK).next())


# ---------------------------------------------------------------- inputs

M = 5
N_TEST = 300
N_VAL = 400
INPUT_SEED = 20240607


def _noisy_prediction(rng, label):
    """Probability row in millionths that sums to exactly 10**6."""
    roll = rng.uniform()
    centre = label
    if roll < 0.25:
        centre = max(0, label - 1)
    elif roll < 0.45:
        centre = min(M - 1, label + 1)
    elif roll < 0.5:
        centre = rng.index(M)
    sharp = 0.2 + 1.5 * rng.uniform()
    w = [math.exp(-sharp * (k - centre) ** 2) * (0.5 + rng.uniform()) for k in range(M)]
    s = sum(w)
    ints = [int(1e6 * v / s) for v in w]
    ints[max(range(M), key=lambda k: ints[k])] += 10 ** 6 - sum(ints)
    return ints


def generate_inputs():
    rng = SplitMix64(INPUT_SEED)
    labels, rows = [], []
    for _ in range(N_TEST):
        y = rng.index(M)
        labels.append(y)
        rows.append(_noisy_prediction(rng, y))
    # stored in a scrambled id order so the canonical sort matters
    perm = list(range(N_TEST))
    for k in range(N_TEST - 1, 0, -1):
        j = rng.index(k + 1)
        perm[k], perm[j] = perm[j], perm[k]
    lines = ["id,label," + ",".join("p%d" % k for k in range(M))]
    for i in range(N_TEST):
        probs = ",".join("%d.%06d" % divmod(v, 10 ** 6) for v in rows[i])
        lines.append("case%04d,%d,%s" % (perm[i], labels[i], probs))
    preds_csv = "\n".join(lines) + "\n"

    counts = [[0] * M for _ in range(M)]
    for _ in range(N_VAL):
        y = rng.index(M)
        row = _noisy_prediction(rng, y)
        pred = max(range(M), key=lambda k: (row[k], -k))
        counts[pred][y] += 1
    conf_csv = "".join(",".join(str(c) for c in r) + "\n" for r in counts)
    return preds_csv, conf_csv


# ---------------------------------------------------------------- parsing

def parse_predictions(text):
    lines = [l.rstrip("\r") for l in text.splitlines() if l.strip()]
    ids, labels, probs = [], [], []
    for line in lines[1:]:
        f = line.split(",")
        ids.append(f[0].strip())
        labels.append(int(f[1]))
        probs.append([float(v) for v in f[2:]])
    return ids, labels, probs


def parse_confusion(text):
    return [[int(v) for v in l.split(",")] for l in text.splitlines() if l.strip()]


# ---------------------------------------------------------------- measures

def kappa(counts):
    """Quadratic weighted kappa, rows = predicted; unit scale."""
    m = len(counts)
    n = float(sum(sum(r) for r in counts))
    rows = [float(sum(r)) for r in counts]
    cols = [float(sum(counts[i][j] for i in range(m))) for j in range(m)]
    num = sum((i - j) ** 2 * counts[i][j] for i in range(m) for j in range(m))
    den = sum((i - j) ** 2 * rows[i] * cols[j] / n for i in range(m) for j in range(m))
    if den == 0.0:
        if num == 0.0:
            return 1.0
        raise ArithmeticError("DegenerateAgreement")
    return 1.0 - num / den


def entropy(p):
    return -sum(v * math.log(v) for v in p if v > 0.0)


def qwk_risk_scores(probs, conf):
    m = len(conf)
    table = [[0.0] * m for _ in range(m)]
    for j in range(m):
        for i in range(m):
            c = [list(r) for r in conf]
            c[j][i] += 1
            table[j][i] = kappa(c)
    return [-sum(p[i] * p[j] * table[j][i] for i in range(m) for j in range(m)) for p in probs]


def argmax(p):
    best = 0
    for k in range(1, len(p)):
        if p[k] > p[best]:
            best = k
    return best


def qwk_metric(probs, labels, m):
    c = [[0] * m for _ in range(m)]
    for p, y in zip(probs, labels):
        c[argmax(p)][y] += 1
    if not probs:
        raise ArithmeticError("EmptyInput")
    return kappa(c)


def auc_metric(probs, labels):
    pos = [p[1] for p, y in zip(probs, labels) if y == 1]
    neg = [p[1] for p, y in zip(probs, labels) if y == 0]
    if not pos or not neg:
        raise ArithmeticError("SingleClass")
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else (0.5 if a == b else 0.0)
    return wins / (len(pos) * len(neg))


# ---------------------------------------------------------------- pipeline

def retained(u, level):
    drop = int(math.floor(level * len(u) + 1e-9))
    keyed = sorted(range(len(u)), key=lambda k: (u[k], k))
    return sorted(keyed[: len(u) - drop])


def metric_at(probs, labels, u, level, metric, m):
    keep = retained(u, level)
    sub_p = [probs[k] for k in keep]
    sub_y = [labels[k] for k in keep]
    if metric == "qwk":
        return 100.0 * qwk_metric(sub_p, sub_y, m)
    return 100.0 * auc_metric(sub_p, sub_y)


def fmt(v):
    return "%.17g" % v


def summarize(preds_csv, conf_csv, measure, scheme, metric, levels, n_boot, seed):
    ids, labels, probs = parse_predictions(preds_csv)
    if scheme == "rdr2":
        probs = [[p[0] + p[1], p[2] + p[3] + p[4]] for p in probs]
        labels = [1 if y >= 2 else 0 for y in labels]
    m = len(probs[0])
    if measure == "qwk-risk":
        u = qwk_risk_scores(probs, parse_confusion(conf_csv))
    else:
        u = [entropy(p) for p in probs]

    def safe(ps, ys, uu, level):
        try:
            return metric_at(ps, ys, uu, level, metric, m)
        except ArithmeticError:
            return None

    order = sorted(range(len(ids)), key=lambda k: ids[k])
    probs = [probs[k] for k in order]
    labels = [labels[k] for k in order]
    u = [u[k] for k in order]
    n = len(ids)

    values = [[] for _ in levels]
    for b in range(n_boot):
        rng = SplitMix64.child(seed, b)
        draw = [rng.index(n) for _ in range(n)]
        dp = [probs[k] for k in draw]
        dy = [labels[k] for k in draw]
        du = [u[k] for k in draw]
        for li, level in enumerate(levels):
            v = safe(dp, dy, du, level)
            if v is not None:
                values[li].append(v)

    out = ["level,retained_count,point,mean,std,n_valid,n_skipped,display,marker"]
    means = []
    for li, level in enumerate(levels):
        vals = values[li]
        point = safe(probs, labels, u, level)
        kept = n - int(math.floor(level * n + 1e-9))
        if vals:
            mean = sum(vals) / len(vals)
            std = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
            mean_s, std_s, display = fmt(mean), fmt(std), "%.1f ± %.1f" % (mean, std)
            means.append(mean)
        else:
            mean_s, std_s, display = "nan", "nan", "n/a"
            means.append(None)
        marker = ""
        if li > 0:
            a, b = means[li - 1], means[li]
            if a is None or b is None:
                marker = "missing"
            else:
                ra, rb = math.floor(a * 10 + 0.5), math.floor(b * 10 + 0.5)
                marker = "equal" if ra == rb else ("up" if rb > ra else "down")
        out.append(",".join([fmt(level), str(kept), fmt(point) if point is not None else "nan", mean_s, std_s,
                             str(len(vals)), str(n_boot - len(vals)), display, marker]))
    return "\n".join(out) + "\n"


GOLDEN_RUNS = {
    "golden_qwk_summary.csv": dict(measure="qwk-risk", scheme="pirc5", metric="qwk"),
    "golden_auc_summary.csv": dict(measure="entropy", scheme="rdr2", metric="auc"),
}
GOLDEN_LEVELS = [0.0, 0.3, 0.5]
GOLDEN_B = 100
GOLDEN_SEED = 42


def build_all():
    preds_csv, conf_csv = generate_inputs()
    files = {"golden_preds.csv": preds_csv, "golden_confusion.csv": conf_csv}
    for name, run in GOLDEN_RUNS.items():
        files[name] = summarize(preds_csv, conf_csv, levels=GOLDEN_LEVELS, n_boot=GOLDEN_B, seed=GOLDEN_SEED, **run)
    return files


def main(argv):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    g = sub.add_parser("generate")
    g.add_argument("--out-dir", required=True)
    s = sub.add_parser("summarize")
    s.add_argument("--predictions", required=True)
    s.add_argument("--confusion", default="")
    s.add_argument("--measure", default="entropy", choices=["entropy", "qwk-risk"])
    s.add_argument("--scheme", default="pirc5", choices=["pirc5", "rdr2"])
    s.add_argument("--metric", default="qwk", choices=["qwk", "auc"])
    s.add_argument("--levels", default="0,0.3,0.5")
    s.add_argument("--bootstrap", type=int, default=100)
    s.add_argument("--seed", type=int, required=True)
    a = sub.add_parser("all")
    a.add_argument("--data-dir", required=True)
    c = sub.add_parser("check")
    c.add_argument("--data-dir", required=True)
    args = ap.parse_args(argv)

    if args.cmd == "generate":
        preds_csv, conf_csv = generate_inputs()
        os.makedirs(args.out_dir, exist_ok=True)
        for name, text in (("golden_preds.csv", preds_csv), ("golden_confusion.csv", conf_csv)):
            with open(os.path.join(args.out_dir, name), "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
    elif args.cmd == "summarize":
        with open(args.predictions, encoding="utf-8") as f:
            preds_csv = f.read()
        conf_csv = ""
        if args.confusion:
            with open(args.confusion, encoding="utf-8") as f:
                conf_csv = f.read()
        levels = [float(v) for v in args.levels.split(",")]
        sys.stdout.write(summarize(preds_csv, conf_csv, args.measure, args.scheme, args.metric, levels,
                                   args.bootstrap, args.seed))
    elif args.cmd == "all":
        os.makedirs(args.data_dir, exist_ok=True)
        for name, text in build_all().items():
            with open(os.path.join(args.data_dir, name), "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
    else:
        bad = 0
        for name, text in build_all().items():
            path = os.path.join(args.data_dir, name)
            with open(path, encoding="utf-8") as f:
                if f.read() != text:
                    print("differs: " + path)
                    bad += 1
        if bad:
            return 1
        print("golden files reproduce")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
