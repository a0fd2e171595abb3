import numpy as np
import pytest

from mind.diffcore import Tensor, no_grad, symmetric_eigh
from mind.encoder import (
    EncoderConfig,
    EncoderParams,
    attention_coeffs,
    batch_graphs,
    encode,
    encode_batch,
    fiedler_estimate,
    init_heads,
    init_reference_params,
    message_pass_layer,
    normalized_laplacian,
    softmax_attention_reference,
)
from mind.errors import ContractError
from mind.graph import Graph

from oracles import random_simple_graph


def path_graph(n):
    return Graph(n, np.array([(i, i + 1) for i in range(n - 1)]))


def star_graph(n):
    return Graph(n, np.array([(0, i) for i in range(1, n)]))


def cycle_graph(n):
    return Graph(n, np.array([(i, (i + 1) % n) for i in range(n)]))


def barbell_graph(k=5):
    edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    edges += [(k + i, k + j) for i in range(k) for j in range(i + 1, k)]
    edges.append((k - 1, k))
    return Graph(2 * k, np.array(edges))


def constant_attention_params(cfg):
    """Force every attention MLP to logit 0 (alpha=0.5) and W matrices to 1."""
    params = EncoderParams.create(cfg, seed=0, dtype=np.float64)
    for name, t in params.bank.items():
        if name.endswith("/w_sigma") or name.endswith("/w_nu"):
            t.data = np.ones_like(t.data)
        else:
            t.data = np.zeros_like(t.data)
    return params


# -- initialization ------------------------------------------------------------

def test_init_heads_all_ones():
    g = path_graph(6)
    e, o = init_heads(g)
    assert e.shape == (6, 4, 4) and (e == 1.0).all()
    assert o.shape == (4, 4) and (o == 1.0).all()
    assert e.shape[1] * e.shape[2] == 16  # H*F values per node


def test_init_heads_excludes_inactive():
    g = path_graph(6)
    g.remove_node(3)
    e, _ = init_heads(g)
    assert e.shape[0] == 5


# -- attention coefficients -------------------------------------------------------

def test_attention_constant_logits_give_half():
    cfg = EncoderConfig()
    params = constant_attention_params(cfg)
    e = np.ones((4, 4))
    a_i, a_ij = attention_coeffs(params, 0, e, e)
    assert np.allclose(a_i, 0.5) and np.allclose(a_ij, 0.5)


def test_attention_symmetric_under_pair_swap():
    cfg = EncoderConfig()
    params = EncoderParams.create(cfg, seed=3)
    rng = np.random.default_rng(0)
    e = rng.normal(size=(4, 4))
    with_symmetric_weights = {k: v for k, v in params.bank.items()}
    # make W_sigma == W_nu so cat_s(e) == cat_v(e) and the pair input is symmetric
    with_symmetric_weights["enc/k0/w_nu"].data = params.bank["enc/k0/w_sigma"].data.copy()
    _, a_ij = attention_coeffs(params, 0, e, e)
    _, a_ji = attention_coeffs(params, 0, e, e)
    assert np.allclose(a_ij, a_ji)


def test_attention_strictly_inside_unit_interval():
    params = EncoderParams.create(seed=5)
    rng = np.random.default_rng(1)
    for _ in range(10):
        a_i, a_ij = attention_coeffs(params, 2, rng.normal(size=(4, 4)),
                                     rng.normal(size=(4, 4)))
        assert ((a_i > 0) & (a_i < 1)).all()
        assert ((a_ij > 0) & (a_ij < 1)).all()


# -- message passing layer ---------------------------------------------------------

def test_triangle_symmetric_update():
    cfg = EncoderConfig(heads=1, feat=1, layers=1, attn_hidden=4)
    params = constant_attention_params(cfg)
    g = Graph(3, np.array([(0, 1), (1, 2), (0, 2)]))
    e0, o0 = np.ones((3, 1, 1)), np.ones((1, 1))
    e1, o1 = message_pass_layer(g, e0, o0, 0, params)
    # 0.5*1*1 self + two neighbors at 0.5*1*1 each
    assert np.allclose(e1, 1.5)
    # omni with mean aggregation: 0.5 self + mean of three 0.5 messages
    assert np.allclose(o1, 1.0)


def test_isolated_node_self_term_only():
    cfg = EncoderConfig(heads=1, feat=1, layers=1, attn_hidden=4)
    params = constant_attention_params(cfg)
    g = Graph(3, np.array([(0, 1)]))
    e1, _ = message_pass_layer(g, np.ones((3, 1, 1)), np.ones((1, 1)), 0, params)
    assert np.allclose(e1[2], 0.5)
    assert np.allclose(e1[0], 1.0)  # 0.5 self + 0.5 from its one neighbor


def test_star_hub_and_leaf_diverge():
    params = EncoderParams.create(seed=7)
    g = star_graph(5)
    res = encode(g, params)
    hub, leaf = res.profiles[0], res.profiles[1]
    assert not np.allclose(hub, leaf)
    assert np.allclose(res.profiles[1], res.profiles[2])  # leaves identical


# -- encode ---------------------------------------------------------------------------

def test_encode_single_node():
    params = EncoderParams.create(seed=9)
    g = Graph(1, np.zeros((0, 2)))
    res = encode(g, params)
    assert res.profiles.shape == (1, 96)
    assert np.isfinite(res.profiles).all() and np.isfinite(res.omni_profile).all()


def test_encode_empty_graph_rejected():
    params = EncoderParams.create(seed=9)
    g = path_graph(2)
    g.remove_node(0)
    g.remove_node(1)
    with pytest.raises(ContractError):
        encode(g, params)


def test_encode_deterministic():
    params = EncoderParams.create(seed=11)
    g = path_graph(7)
    a = encode(g, params).profiles
    b = encode(g, params).profiles
    assert np.array_equal(a, b)


def test_encode_permutation_equivariance():
    params = EncoderParams.create(seed=13)
    rng = np.random.default_rng(2)
    edges = random_simple_graph(rng, 12, 0.25)
    g = Graph(12, np.array(edges))
    perm = rng.permutation(12)
    g2 = Graph(12, np.array([(int(perm[a]), int(perm[b])) for a, b in edges]))
    p1 = encode(g, params).profiles
    p2 = encode(g2, params).profiles
    assert np.allclose(p2[perm], p1, atol=1e-4, rtol=1e-4)


def test_isomorphic_graphs_same_profile_multiset():
    params = EncoderParams.create(seed=15)
    rng = np.random.default_rng(3)
    edges = random_simple_graph(rng, 10, 0.3)
    g = Graph(10, np.array(edges))
    perm = rng.permutation(10)
    g2 = Graph(10, np.array([(int(perm[a]), int(perm[b])) for a, b in edges]))
    p1 = np.array(sorted(encode(g, params).profiles.tolist()))
    p2 = np.array(sorted(encode(g2, params).profiles.tolist()))
    assert np.allclose(p1, p2, atol=1e-4, rtol=1e-4)


def test_batched_encode_matches_individual():
    params = EncoderParams.create(seed=17)
    g1, g2 = path_graph(6), star_graph(4)
    batch = batch_graphs([g1, g2])
    with no_grad():
        z, zo = encode_batch(params.bank, params.cfg, batch)
    r1, r2 = encode(g1, params), encode(g2, params)
    assert np.allclose(z.data[:6, 0], r1.profiles, atol=1e-6)
    assert np.allclose(z.data[6:, 0], r2.profiles, atol=1e-6)
    assert np.allclose(zo.data[0, 0], r1.omni_profile, atol=1e-6)
    assert np.allclose(zo.data[1, 0], r2.omni_profile, atol=1e-6)


def test_encode_matches_loop_reference():
    # line-by-line loop re-derivation of the forward pass, float64
    from oracles import reference_encode, random_simple_graph

    rng = np.random.default_rng(31)
    for omni_mean in (True, False):
        cfg = EncoderConfig(heads=2, feat=3, layers=3, attn_hidden=5, omni_mean=omni_mean)
        params = EncoderParams.create(cfg, seed=33, dtype=np.float64)
        edges = random_simple_graph(rng, 9, 0.3)
        g = Graph(9, np.array(edges))
        adjacency = [[int(u) for u in g.active_neighbors(v)] for v in range(9)]
        bank = {k: t.data for k, t in params.bank.items()}
        want_z, want_o = reference_encode(adjacency, bank, 2, 3, 3, 5, omni_mean)
        got = encode(g, params)
        assert np.allclose(got.profiles, want_z, atol=1e-10)
        assert np.allclose(got.omni_profile, want_o, atol=1e-10)


def test_fused_ops_gradients():
    # finite-difference checks of the kernel-backed ops, float64
    import mind.diffcore as dc
    from mind.diffcore import Tape, backward, constant, param
    from oracles import finite_difference_grad

    rng = np.random.default_rng(35)
    rows, s_n, h, f, hid = 7, 2, 2, 3, 4
    src = np.array([0, 1, 2, 4, 5, 5, 6, 3], dtype=np.int64)
    dst = np.array([1, 0, 4, 2, 6, 3, 5, 5], dtype=np.int64)

    inputs = {
        "ha": rng.normal(size=(rows, s_n, h * hid)),
        "hb": rng.normal(size=(rows, s_n, h * hid)),
        "b1": rng.normal(size=(s_n, h, hid)),
        "w2": rng.normal(size=(s_n, h, hid)),
        "b2": rng.normal(size=(s_n, h)),
        "vp": rng.normal(size=(rows, s_n, h, f)),
    }
    wmix = constant(rng.normal(size=(rows, s_n, h, f)))

    def run(leaves):
        agg = dc.edge_attn_messages(leaves["ha"], leaves["hb"], leaves["b1"],
                                    leaves["w2"], leaves["b2"], leaves["vp"],
                                    src, dst, h, f)
        return dc.reduce_sum(dc.mul(agg, wmix))

    leaves = {k: param(v.copy()) for k, v in inputs.items()}
    with Tape():
        backward(run(leaves))
    for key in inputs:
        base = inputs[key]

        def fval(flat, key=key):
            trial = {k: param(v.copy()) for k, v in inputs.items()}
            trial[key] = param(flat.reshape(base.shape))
            with Tape():
                return float(run(trial).data)

        numeric = finite_difference_grad(fval, base.reshape(-1).copy(), h=1e-6)
        analytic = leaves[key].grad.reshape(-1)
        denom = np.maximum(np.abs(numeric), 1e-8)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-5, key

    # attn_scores + per_net_matmul + head_linear composed
    x0 = rng.normal(size=(rows, s_n, h, f))
    wheads = rng.normal(size=(s_n, h, f, f))
    w1 = rng.normal(size=(s_n, h * f, h * hid))
    mix2 = constant(rng.normal(size=(rows, s_n, h)))

    def run2(leaves):
        y = dc.head_linear(leaves["x"], leaves["wh"])
        cat = dc.reshape(y, (rows, s_n, h * f))
        h1 = dc.per_net_matmul(cat, leaves["w1"])
        alpha = dc.attn_scores(h1, leaves["b1"], leaves["w2"], leaves["b2"], h, hid)
        return dc.reduce_sum(dc.mul(alpha, mix2))

    inputs2 = {"x": x0, "wh": wheads, "w1": w1, "b1": inputs["b1"],
               "w2": inputs["w2"], "b2": inputs["b2"]}
    leaves2 = {k: param(v.copy()) for k, v in inputs2.items()}
    with Tape():
        backward(run2(leaves2))
    for key in inputs2:
        base = inputs2[key]

        def fval2(flat, key=key):
            trial = {k: param(v.copy()) for k, v in inputs2.items()}
            trial[key] = param(flat.reshape(base.shape))
            with Tape():
                return float(run2(trial).data)

        numeric = finite_difference_grad(fval2, base.reshape(-1).copy(), h=1e-6)
        analytic = leaves2[key].grad.reshape(-1)
        denom = np.maximum(np.abs(numeric), 1e-8)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-5, key


def test_profiles_respect_masks():
    params = EncoderParams.create(seed=19)
    g = path_graph(8)
    g.remove_node(3)
    res = encode(g, params)
    assert res.profiles.shape == (7, 96)
    assert 3 not in res.node_ids


# -- softmax reference comparator ------------------------------------------------------

def test_softmax_reference_collapses_from_constant_init():
    cfg = EncoderConfig()
    rng = np.random.default_rng(4)
    ref = init_reference_params(cfg, rng)
    for gname, g in [("star", star_graph(6)), ("path", path_graph(7))]:
        states = softmax_attention_reference(g, cfg, ref)
        for k, e in enumerate(states):
            flat = e.reshape(e.shape[0], -1)
            assert flat.var(axis=0).max() < 1e-12, (gname, k)


def test_mind_attention_separates_run_together():
    # same graph where the softmax reference collapses: unnormalized
    # coefficients keep degree information from the first layer on
    params = EncoderParams.create(seed=21)
    g = star_graph(6)
    res = encode(g, params)
    assert res.profiles.var(axis=0).max() > 1e-6


def test_equal_degree_different_context_witness():
    # nodes 0 and 3 both have degree 2; 0's neighbors are leaves while 3's
    # neighbors have degree 3: profiles must differ under the real encoder,
    # while the softmax reference sees identical constant embeddings
    edges = [(0, 1), (0, 2),
             (3, 4), (3, 5), (4, 6), (4, 7), (5, 8), (5, 9)]
    g = Graph(10, np.array(edges))
    params = EncoderParams.create(seed=23)
    res = encode(g, params)
    assert not np.allclose(res.profiles[0], res.profiles[3], atol=1e-9)
    ref = init_reference_params(params.cfg, np.random.default_rng(5))
    states = softmax_attention_reference(g, params.cfg, ref)
    final = states[-1].reshape(10, -1)
    assert np.allclose(final[0], final[3], atol=1e-12)


# -- spectral estimation -----------------------------------------------------------------

def fiedler_oracle(g):
    L = normalized_laplacian(g)
    w, V = symmetric_eigh(L)
    return V[:, 1]


def cosine(u, v):
    return abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


def test_fiedler_path10():
    g = path_graph(10)
    with pytest.warns(UserWarning, match="bipartite"):
        est = fiedler_estimate(g, iters=500)
    assert cosine(est, fiedler_oracle(g)) >= 0.99


def test_fiedler_barbell_sign_split():
    g = barbell_graph(5)
    est = fiedler_estimate(g, iters=500)
    assert cosine(est, fiedler_oracle(g)) >= 0.99
    left, right = est[:5], est[5:]
    assert (np.sign(left) == np.sign(left[0])).all()
    assert (np.sign(right) == -np.sign(left[0])).all()


def test_fiedler_degenerate_on_vertex_transitive():
    g = cycle_graph(5)
    with pytest.warns(UserWarning, match="degenerate"):
        est = fiedler_estimate(g, iters=200)
    assert np.linalg.norm(est) < 1e-9


def test_fiedler_requires_connected():
    g = Graph(4, np.array([(0, 1), (2, 3)]))
    with pytest.raises(ContractError):
        fiedler_estimate(g)


def test_lemma_identity_eigenvalue_map():
    g = barbell_graph(5)
    L = normalized_laplacian(g)
    w, V = symmetric_eigh(L)
    T = np.eye(len(L)) - L / 2.0
    for i in range(len(w)):
        assert np.linalg.norm(T @ V[:, i] - (1 - w[i] / 2) * V[:, i]) < 1e-8
    t_eigs = 1 - w / 2
    assert (t_eigs > 0).all() and (t_eigs <= 1 + 1e-12).all()  # non-bipartite
