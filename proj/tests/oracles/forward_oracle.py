"""Numpy evaluation of the full forward pass for the frozen cases in
tests/unit/test_model.cpp. Parameters follow the canonical tensor order and
are filled with 0.3*sin(0.7*k + 0.1) over a running index k; embeddings are
U[i][j] = 0.5*cos(1.3*i + 0.4*j)."""

import numpy as np

GATES = ["forget", "output", "input", "graph_gate", "candidate", "graph_candidate"]
HIDDEN = {"forget", "output", "input", "candidate"}
GRAPH = {"forget", "output", "graph_gate", "graph_candidate"}


def params(du, dg, dh, layers, d):
    shapes = [("down_w", (dg, du)), ("down_b", (dg, 1))]
    shapes += [(f"att{l}", (1, 2 * dg)) for l in range(layers)]
    for direction in ("fwd", "bwd"):
        for g in GATES:
            shapes.append((f"{direction}.{g}.W", (dh, du)))
            if g in HIDDEN:
                shapes.append((f"{direction}.{g}.U", (dh, dh)))
            if g in GRAPH:
                shapes.append((f"{direction}.{g}.Q", (dh, dg)))
            shapes.append((f"{direction}.{g}.b", (dh, 1)))
    shapes += [("head_w", (d, 2 * dh)), ("head_b", (d, 1))]
    out, k = {}, 0
    for name, shape in shapes:
        size = shape[0] * shape[1]
        out[name] = (0.3 * np.sin(0.7 * np.arange(k, k + size) + 0.1)).reshape(shape)
        k += size
    return out


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def forward(n, edges, du, dg, dh, layers, d):
    p = params(du, dg, dh, layers, d)
    U = np.array([[0.5 * np.cos(1.3 * i + 0.4 * j) for j in range(du)] for i in range(n)])
    preds = [sorted(s for s, t in edges if t == i) for i in range(n)]
    G = [p["down_w"] @ U[i] + p["down_b"][:, 0] for i in range(n)]
    for l in range(layers):
        w = p[f"att{l}"][0]
        cur = [None] * n
        for i in range(n):
            if not preds[i]:
                cur[i] = G[i]
                continue
            s = np.array([w[:dg] @ cur[j] + w[dg:] @ G[i] for j in preds[i]])
            a = np.exp(s - s.max())
            a /= a.sum()
            cur[i] = G[i] + sum(a[k] * cur[j] for k, j in enumerate(preds[i]))
        G = cur

    def run(direction, order):
        h, c, out = np.zeros(dh), np.zeros(dh), {}
        for t in order:
            act = {}
            for g in GATES:
                z = p[f"{direction}.{g}.W"] @ U[t] + p[f"{direction}.{g}.b"][:, 0]
                if g in HIDDEN:
                    z = z + p[f"{direction}.{g}.U"] @ h
                if g in GRAPH:
                    z = z + p[f"{direction}.{g}.Q"] @ G[t]
                act[g] = np.tanh(z) if g in ("candidate", "graph_candidate") else sig(z)
            c = act["forget"] * c + act["input"] * act["candidate"] + act["graph_gate"] * act["graph_candidate"]
            h = act["output"] * np.tanh(c)
            out[t] = h
        return out

    f = run("fwd", range(n))
    b = run("bwd", reversed(range(n)))
    return np.array([p["head_w"] @ np.concatenate([f[i], b[i]]) + p["head_b"][:, 0] for i in range(n)])


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    for case in [(3, [(0, 1), (0, 2), (1, 2)], 4, 3, 2, 1, 2),
                 (4, [(0, 2), (1, 2), (2, 3)], 5, 3, 2, 2, 3)]:
        for row in forward(*case):
            print(", ".join(repr(float(v)) for v in row))
        print()
