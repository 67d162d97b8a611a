"""Compiled inner loops for the sequential message-passing solver."""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def refresh_beliefs(theta_node, edge_s, edge_t, msg, hat):
    hat[:, :] = theta_node
    for e in range(edge_s.shape[0]):
        hat[edge_t[e], 0] += msg[e, 0, 0]
        hat[edge_t[e], 1] += msg[e, 0, 1]
        hat[edge_s[e], 0] += msg[e, 1, 0]
        hat[edge_s[e], 1] += msg[e, 1, 1]


@nb.njit(cache=True)
def sweep(order, pos, forward, edge_s, edge_t, adj_ptr, adj_edge, theta_edge, gamma, msg, hat):
    """Visit vertices in ``order`` (or reversed) and resend every message
    towards later (resp. earlier) neighbours.

    msg[e, 0] flows lower endpoint -> higher and is indexed by the higher
    endpoint's label; msg[e, 1] flows the other way.
    """
    n = order.shape[0]
    for i in range(n):
        v = order[i] if forward else order[n - 1 - i]
        g = gamma[v]
        for a in range(adj_ptr[v], adj_ptr[v + 1]):
            e = adj_edge[a]
            if edge_s[e] == v:
                u = edge_t[e]
                d = 0
            else:
                u = edge_s[e]
                d = 1
            if forward and pos[u] < pos[v]:
                continue
            if not forward and pos[u] > pos[v]:
                continue
            a0 = g * hat[v, 0] - msg[e, 1 - d, 0]
            a1 = g * hat[v, 1] - msg[e, 1 - d, 1]
            if d == 0:
                n0 = min(a0 + theta_edge[e, 0, 0], a1 + theta_edge[e, 1, 0])
                n1 = min(a0 + theta_edge[e, 0, 1], a1 + theta_edge[e, 1, 1])
            else:
                n0 = min(a0 + theta_edge[e, 0, 0], a1 + theta_edge[e, 0, 1])
                n1 = min(a0 + theta_edge[e, 1, 0], a1 + theta_edge[e, 1, 1])
            low = min(n0, n1)
            n0 -= low
            n1 -= low
            hat[u, 0] += n0 - msg[e, d, 0]
            hat[u, 1] += n1 - msg[e, d, 1]
            msg[e, d, 0] = n0
            msg[e, d, 1] = n1


@nb.njit(cache=True)
def tree_bound(const, rho, vert_ptr, verts, post_ptr, post_child, post_parent, post_edge, roots,
               edge_s, theta_edge, msg, hat, inv_nu_node, inv_nu_edge, acc):
    """sum_T rho(T) * min_x E(x; theta(T)) with theta(T) the rho-share of the
    current reparameterization, by leaf-to-root min-sum on each tree."""
    total = 0.0
    for tr in range(rho.shape[0]):
        for a in range(vert_ptr[tr], vert_ptr[tr + 1]):
            v = verts[a]
            acc[v, 0] = hat[v, 0] * inv_nu_node[v]
            acc[v, 1] = hat[v, 1] * inv_nu_node[v]
        for a in range(post_ptr[tr], post_ptr[tr + 1]):
            c = post_child[a]
            p = post_parent[a]
            e = post_edge[a]
            w = inv_nu_edge[e]
            # reparameterized edge table, host orientation [x_s, x_t]
            t00 = (theta_edge[e, 0, 0] - msg[e, 0, 0] - msg[e, 1, 0]) * w
            t01 = (theta_edge[e, 0, 1] - msg[e, 0, 1] - msg[e, 1, 0]) * w
            t10 = (theta_edge[e, 1, 0] - msg[e, 0, 0] - msg[e, 1, 1]) * w
            t11 = (theta_edge[e, 1, 1] - msg[e, 0, 1] - msg[e, 1, 1]) * w
            if edge_s[e] == c:
                m0 = min(acc[c, 0] + t00, acc[c, 1] + t10)
                m1 = min(acc[c, 0] + t01, acc[c, 1] + t11)
            else:
                m0 = min(acc[c, 0] + t00, acc[c, 1] + t01)
                m1 = min(acc[c, 0] + t10, acc[c, 1] + t11)
            acc[p, 0] += m0
            acc[p, 1] += m1
        r = roots[tr]
        total += rho[tr] * (const + min(acc[r, 0], acc[r, 1]))
    return total


def reparameterized_edges(theta_edge: np.ndarray, msg: np.ndarray) -> np.ndarray:
    """theta_st(j, k) - m_{s->t}(k) - m_{t->s}(j)."""
    return theta_edge - msg[:, 0, None, :] - msg[:, 1, :, None]
