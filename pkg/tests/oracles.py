"""Independent brute-force reimplementations of every metric, used to
cross-check the library implementations. Everything here is plain loops and
math.* so no code path is shared with litkit."""

import math

EPS = 1e-12


def diversity_oracle(keyword_lists):
    seen = []
    for kws in keyword_lists:
        for k in kws:
            if k not in seen:
                seen.append(k)
    total = sum(len(kws) for kws in keyword_lists)
    return len(seen) / total


def cosine_oracle(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def embedding_similarity_oracle(centroids):
    values = []
    for i in range(len(centroids)):
        for j in range(i + 1, len(centroids)):
            values.append(cosine_oracle(centroids[i], centroids[j]))
    return sum(values) / len(values)


def significance_oracle(term_dist, vocab_size):
    total = 0.0
    for p in term_dist.values():
        if p > 0:
            total += p * math.log(p * vocab_size)
    return total


def perplexity_oracle(labels, term_dists, docs):
    """labels: record_id -> topic id; docs: record_id -> token list."""
    vocab = set()
    for tokens in docs.values():
        vocab.update(tokens)
    v = len(vocab)
    total, n = 0.0, 0
    for rid, tokens in docs.items():
        topic = labels.get(rid, -1)
        if topic < 0 or topic not in term_dists or not tokens:
            continue
        dist = term_dists[topic]
        for tok in tokens:
            p = (dist.get(tok, 0.0) + EPS) / (1.0 + EPS * v)
            total += math.log(p)
            n += 1
    return math.exp(-total / n)


def coherence_oracle(keywords, docs):
    n_docs = len(docs)
    values = []
    for i in range(len(keywords)):
        for j in range(i + 1, len(keywords)):
            wi, wj = keywords[i], keywords[j]
            ci = sum(1 for d in docs if wi in d)
            cj = sum(1 for d in docs if wj in d)
            cij = sum(1 for d in docs if wi in d and wj in d)
            if ci == 0 or cj == 0 or cij == 0:
                values.append(-1.0)
                continue
            if cij == n_docs:
                values.append(1.0)
                continue
            p_i, p_j, p_ij = ci / n_docs, cj / n_docs, cij / n_docs
            p_ij = max(p_ij, EPS)
            values.append(math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij)))
    return sum(values) / len(values)


def kappa_oracle(pairs):
    """pairs: list of (bool, bool) ratings."""
    n = len(pairs)
    yy = sum(1 for a, b in pairs if a and b)
    yn = sum(1 for a, b in pairs if a and not b)
    ny = sum(1 for a, b in pairs if not a and b)
    nn = sum(1 for a, b in pairs if not a and not b)
    p_o = (yy + nn) / n
    p_e = ((yy + yn) * (yy + ny) + (ny + nn) * (yn + nn)) / (n * n)
    if abs(1 - p_e) < 1e-15:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1 - p_e)


def modularity_oracle(nodes, edges, assignment):
    """Naive double loop over the full adjacency matrix.

    nodes: list of names; edges: dict (a, b) -> w with a < b; assignment:
    name -> community id.
    """
    adj = {(a, b): 0.0 for a in nodes for b in nodes}
    for (a, b), w in edges.items():
        adj[(a, b)] += w
        adj[(b, a)] += w
    two_m = sum(adj.values())
    if two_m == 0:
        return 0.0
    k = {a: sum(adj[(a, b)] for b in nodes) for a in nodes}
    q = 0.0
    for a in nodes:
        for b in nodes:
            if assignment[a] == assignment[b]:
                q += adj[(a, b)] - k[a] * k[b] / two_m
    return q / two_m


def all_partitions(items):
    """Every set partition of items (Bell-number enumeration)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in all_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]
        yield [[first]] + partition
