"""Brute-force all-pairs leave-one-out K-NN, written without the package."""
import math

DECIMALS = 12


def _unit(v):
    norm = math.sqrt(sum(float(x) * float(x) for x in v))
    return [float(x) / norm for x in v]


def _neighbours(units, q, k):
    cands = []
    for j, u in enumerate(units):
        if j != q:
            d = 1.0 - sum(a * b for a, b in zip(units[q], u))
            cands.append((round(d, DECIMALS), j))
    cands.sort()
    return cands[:k]


def _vote(near, labels):
    votes = {}
    for d, j in near:
        cnt, total = votes.get(labels[j], (0, 0.0))
        votes[labels[j]] = (cnt + 1, total + d)
    # most votes, then smallest summed distance, then lowest label
    return min(votes, key=lambda lab: (-votes[lab][0], votes[lab][1], lab))


def predictions(vectors, label_sets, k):
    """LOO predictions of every sample, one list per label set."""
    units = [_unit(v) for v in vectors]
    out = [[] for _ in label_sets]
    for q in range(len(units)):
        near = _neighbours(units, q, k)
        for preds, labels in zip(out, label_sets):
            preds.append(_vote(near, labels))
    return out


def predict(vectors, labels, k, q):
    return _vote(_neighbours([_unit(v) for v in vectors], q, k), labels)


def summary(shape_labels, texture_labels, shape_pred, texture_pred):
    s = t = both = 0
    for ys, yt, ps, pt in zip(shape_labels, texture_labels, shape_pred, texture_pred):
        s += ps == ys
        t += pt == yt
        both += ps == ys and pt == yt
    union = s + t - both
    return s, t, both, (s / union if union else None)


def report(vectors, shape_labels, texture_labels, k):
    ps, pt = predictions(vectors, [list(shape_labels), list(texture_labels)], k)
    return summary(shape_labels, texture_labels, ps, pt)
