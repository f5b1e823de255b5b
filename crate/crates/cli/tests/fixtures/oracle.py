"""Independent reference values for refs.txt / hyps.txt.

WER: plain Levenshtein distance over tokens, summed over utterances.
BLEU: n-gram counting with clipping, pooled over the corpus.
Run: python3 oracle.py
"""
import math
from collections import Counter


def load(path):
    out = {}
    for line in open(path, encoding="utf-8"):
        if line.strip():
            uid, text = line.rstrip("\n").split("\t", 1)
            out[uid] = text.split()
    return out


def lev(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


refs, hyps = load("refs.txt"), load("hyps.txt")
ids = sorted(refs)
edits = sum(lev(refs[i], hyps[i]) for i in ids)
n = sum(len(refs[i]) for i in ids)
print("wer_edits", edits, "ref_len", n, "wer", repr(edits / n))
print("utterance_mean_wer", repr(sum(lev(refs[i], hyps[i]) / len(refs[i]) for i in ids) / len(ids)))

match, total = [0] * 4, [0] * 4
for i in ids:
    r, h = refs[i], hyps[i]
    for k in range(1, 5):
        rc = Counter(tuple(r[j:j + k]) for j in range(len(r) - k + 1))
        hc = Counter(tuple(h[j:j + k]) for j in range(len(h) - k + 1))
        match[k - 1] += sum(min(c, rc[g]) for g, c in hc.items())
        total[k - 1] += sum(hc.values())
hl = sum(len(hyps[i]) for i in ids)
rl = sum(len(refs[i]) for i in ids)
bp = 1.0 if hl >= rl else math.exp(1 - rl / hl)
p = [m / t for m, t in zip(match, total)]
bleu = bp * math.exp(sum(math.log(x) for x in p) / 4) if all(p) else 0.0
print("matches", match, "totals", total, "bp", repr(bp), "bleu", repr(bleu))

# The single-sentence example: the cat sat on the mat / the cat on the mat.
r = "the cat sat on the mat".split()
h = "the cat on the mat".split()
m, t = [], []
for k in range(1, 5):
    rc = Counter(tuple(r[j:j + k]) for j in range(len(r) - k + 1))
    hc = Counter(tuple(h[j:j + k]) for j in range(len(h) - k + 1))
    m.append(sum(min(c, rc[g]) for g, c in hc.items()))
    t.append(sum(hc.values()))
bp = math.exp(1 - len(r) / len(h))
ps = [(x if x else 1e-9) / y for x, y in zip(m, t)]
print("example matches", m, "totals", t, "bp", repr(bp),
      "smoothed", repr(bp * math.exp(sum(math.log(x) for x in ps) / 4)))
