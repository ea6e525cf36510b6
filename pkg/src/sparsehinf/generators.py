"""Benchmark system generators: diagonal, chain, random network, consensus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, InvalidInputError, SolverError, StabilityError
from .linalg import null_basis, spectral_radius
from .statespace import StateSpace


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..node_count-1``."""

    node_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.node_count < 1:
            raise InvalidInputError("graph needs at least one node")
        canon = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidInputError(f"self loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise InvalidInputError(f"edge ({i}, {j}) out of range")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.node_count, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def incidence(self) -> np.ndarray:
        """Node-by-edge matrix with columns ``e_i - e_j``."""
        E = np.zeros((self.node_count, len(self.edges)))
        for col, (i, j) in enumerate(self.edges):
            E[i, col], E[j, col] = 1.0, -1.0
        return E

    def laplacian(self) -> np.ndarray:
        E = self.incidence()
        return E @ E.T

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        nbrs = {v: [] for v in range(self.node_count)}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        while stack:
            for w in nbrs[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.node_count


def petersen_graph() -> Graph:
    """Outer 5-cycle ``0..4``, inner pentagram ``5..9``, spokes ``i -- i+5``."""
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    return Graph(10, tuple(outer + inner + spokes))


def gen_example1(n: int = 10) -> StateSpace:
    """Gap family ``A = 0.99 J + 0.1 (I - J)`` with ``J = 11^T / n``.

    ``B = C = I`` and ``D = 0``. The consensus direction has peak gain
    100 at ``theta = 0``; its complement has gain 1/0.9.
    """
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    J = np.full((n, n), 1.0 / n)
    A = 0.99 * J + 0.1 * (np.eye(n) - J)
    return StateSpace(A, np.eye(n), np.eye(n), np.zeros((n, n)))


def gen_chain(n: int, a: float = 0.8, p: float = 0.1) -> StateSpace:
    """Chain of ``2n+1`` coupled states, strongest in the middle.

    ``A`` has diagonal entries ``a**(|n - i| + 1)`` for ``i = 0..2n`` and
    ``p`` on both off-diagonals; ``B = C = I``, ``D = 0``.
    """
    if n < 1:
        raise InvalidInputError("n must be positive")
    size = 2 * n + 1
    i = np.arange(size)
    A = np.diag(a ** (np.abs(n - i) + 1.0))
    A += p * (np.eye(size, k=1) + np.eye(size, k=-1))
    rho = spectral_radius(A)
    if not rho < 1.0:
        raise StabilityError(f"chain with a={a}, p={p} has spectral radius {rho:.6g}")
    return StateSpace(A, np.eye(size), np.eye(size), np.zeros((size, size)))


def gen_er_random(n: int = 20, p_edge: float = 0.1, weight_seed: int = 0,
                  b_scale: float = 0.1, max_draws: int = 100) -> StateSpace:
    """Random directed network with Gaussian edge weights.

    Each attempt draws an adjacency mask (off-diagonal, probability
    ``p_edge``) then a full standard-normal weight matrix from
    ``np.random.RandomState(weight_seed)``; the first stable draw wins.
    ``B = b_scale * I``, ``C = I``, ``D = 0``.

    Raises
    ------
    GenerationError
        If none of ``max_draws`` draws is stable.
    """
    if n < 1 or not 0.0 <= p_edge <= 1.0:
        raise InvalidInputError("need n >= 1 and 0 <= p_edge <= 1")
    rng = np.random.RandomState(weight_seed)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_draws):
        mask = (rng.random_sample((n, n)) < p_edge) & offdiag
        weights = rng.standard_normal((n, n))
        A = np.where(mask, weights, 0.0)
        if spectral_radius(A) < 1.0:
            return StateSpace(A, b_scale * np.eye(n), np.eye(n), np.zeros((n, n)))
    raise GenerationError(
        f"no stable draw in {max_draws} attempts (n={n}, p_edge={p_edge}, seed={weight_seed})")


def _fastest_weights(g: Graph, tol: float) -> np.ndarray:
    from .sdp import Model, solve

    n, ne = g.node_count, len(g.edges)
    J = np.full((n, n), 1.0 / n)
    model = Model()
    w = model.free(ne, name="w")
    s = model.free(1, name="s")
    E = g.incidence()
    # A - J = I - J - E diag(w) E^T, assembled column by column
    lap = None
    for col in range(ne):
        term = w[col, 0].times(np.outer(E[:, col], E[:, col]))
        lap = term if lap is None else lap + term
    dev = (np.eye(n) - J) - lap
    model.add_psd(s.times(np.eye(n)) - dev)
    model.add_psd(s.times(np.eye(n)) + dev)
    model.minimize(s)
    sol = solve(model.build(), tol=tol)
    if sol.status != "optimal":
        raise SolverError(f"fastest-mixing weight program ended with {sol.status}", sol.status, sol)
    return model.value("w", sol.x).ravel()


def gen_consensus(g: Graph, rule: str = "max_degree", tol: float = 1e-9) -> StateSpace:
    """Consensus network ``x+ = A x + w``, output ``(I - J) x``.

    ``rule="max_degree"`` uses ``A = I - L / (d_max + 1)``; ``"fastest_sdp"``
    picks symmetric edge weights minimizing ``||A - J||_2``. The returned
    realization keeps the consensus eigenvalue 1 of ``A``; use
    :func:`consensus_deviation` for a stable equivalent.
    """
    if not g.is_connected():
        raise InvalidInputError("consensus needs a connected graph")
    n = g.node_count
    if rule == "max_degree":
        A = np.eye(n) - g.laplacian() / (g.degrees().max() + 1.0)
    elif rule == "fastest_sdp":
        w = _fastest_weights(g, tol)
        E = g.incidence()
        A = np.eye(n) - (E * w) @ E.T
    else:
        raise InvalidInputError(f"unknown consensus rule {rule!r}")
    J = np.full((n, n), 1.0 / n)
    if not np.allclose(A.sum(axis=1), 1.0, atol=1e-9):
        raise GenerationError("weight matrix rows do not sum to one")
    if not spectral_radius(A - J) < 1.0:
        raise StabilityError("averaging does not converge for this graph and rule")
    return StateSpace(A, np.eye(n), np.eye(n) - J, np.zeros((n, n)))


def consensus_deviation(sys: StateSpace) -> StateSpace:
    """Stable realization of a consensus network on the complement of ``1``.

    With ``U`` an orthonormal basis of ``1^perp`` the triple
    ``(U^T A U, U^T B, C U, D)`` has the same transfer function whenever
    ``A^T 1 = 1`` and ``C 1 = 0``.
    """
    n = sys.n
    ones = np.ones(n)
    if not np.allclose(sys.A.T @ ones, ones, atol=1e-9):
        raise InvalidInputError("A must have unit column sums")
    if not np.allclose(sys.C @ ones, 0.0, atol=1e-9):
        raise InvalidInputError("C must annihilate the consensus direction")
    U = null_basis(ones.reshape(1, -1))
    return StateSpace(U.T @ sys.A @ U, U.T @ sys.B, sys.C @ U, sys.D, sys.time_domain)


def gen_random_stable(n: int, m: int, p: int | None = None, seed: int = 0,
                      radius: tuple[float, float] = (0.5, 0.95),
                      time_domain: str = "discrete") -> StateSpace:
    """Gaussian ``(A, B, C, D)`` with ``A`` rescaled to a random spectral radius.

    The radius is uniform on ``radius``; continuous systems instead shift
    ``A`` so its spectral abscissa is ``-(1 - r)``.
    """
    p = m if p is None else p
    rng = np.random.RandomState(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m))
    r = rng.uniform(*radius)
    if time_domain == "discrete":
        rho = spectral_radius(A)
        A = A * (r / rho) if rho > 0 else A
    else:
        alpha = float(np.max(np.linalg.eigvals(A).real))
        A = A - (alpha + 1.0 - r) * np.eye(n)
    return StateSpace(A, B, C, D, time_domain)
