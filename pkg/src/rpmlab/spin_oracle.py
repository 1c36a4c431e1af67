"""Direct O(N)-spin expectations by quadrature and seeded Monte Carlo."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .graph import BOUNDARY
from .measure import PLUS, InstanceTooLarge, ModelParams, converge

N_BLOCKS = 100


@dataclass
class EstimateReport:
    value: float
    stderr: float
    samples: int
    seed: int | None = None
    method: str = "mc"

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class _Couplings:
    pairs: np.ndarray  # (E, 2) vertex indices of interior edges
    J: np.ndarray  # (E, N)
    boundary: np.ndarray  # (n,) summed J^1 over boundary edges at each vertex (plus only)
    h: np.ndarray  # (n, N)


def _couplings(p: ModelParams) -> _Couplings:
    g = p.graph
    n, N = len(g.vertices), p.N
    idx = g.vertex_index
    pairs, J = [], []
    for e, (u, v) in enumerate(g.edges):
        pairs.append((idx[u], idx[v]))
        J.append([float(p.J.get((e, i), 0)) for i in range(1, N + 1)])
    boundary = np.zeros(n)
    if p.eta == PLUS:
        for e, (u, _) in enumerate(g.all_edges):
            if g.kinds[e] == BOUNDARY:
                boundary[idx[u]] += float(p.J.get((e, 1), 0))
    h = np.zeros((n, N))
    for (x, i), val in p.h.items():
        h[idx[x], i - 1] = float(val)
    return _Couplings(
        np.array(pairs, dtype=int).reshape(-1, 2),
        np.array(J, dtype=float).reshape(-1, N),
        boundary,
        h,
    )


def hamiltonian(p: ModelParams, phi: np.ndarray) -> np.ndarray:
    """Energy of spin configurations ``phi`` with shape (..., n_vertices, N)."""
    c = _couplings(p)
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape[:-2])
    for (a, b), Je in zip(c.pairs, c.J):
        out -= np.sum(Je * phi[..., a, :] * phi[..., b, :], axis=-1)
    out -= np.sum(c.boundary * phi[..., :, 0], axis=-1)
    out -= np.sum(c.h * phi, axis=(-1, -2))
    return out


def sample_sphere(rng: np.random.Generator, shape: tuple[int, ...], N: int) -> np.ndarray:
    """Uniform points on S^{N-1}; normalised Gaussians."""
    x = rng.standard_normal(shape + (N,))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _observable_sites(p: ModelParams, A: Iterable[str], B: Iterable[str] | None) -> list[int]:
    idx = p.graph.vertex_index
    sites = [idx[a] for a in A]
    if B is not None:
        sites += [idx[b] for b in B]
    return sites


def _mc_block(p: ModelParams, sites: list[int], n: int, seed_seq: np.random.SeedSequence):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    phi = sample_sphere(rng, (n, len(p.graph.vertices)), p.N)
    logw = -hamiltonian(p, phi)
    f = np.ones(n)
    for s in sites:
        f = f * phi[:, s, 0]
    return logw, f


def spin_expectation_mc(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str] | None = None,
    samples: int = 100_000,
    seed: int = 0,
    threads: int = 1,
) -> EstimateReport:
    """Self-normalised estimate of ⟨∏_A S¹ ∏_B S¹⟩ from independent uniform spins.

    The sample is cut into fixed blocks with their own child seeds, so the
    result does not depend on ``threads``.  The error bar is a delete-one-block
    jackknife of the ratio.
    """
    if samples < N_BLOCKS:
        raise ValueError(f"need at least {N_BLOCKS} samples")
    sites = _observable_sites(p, A, B)
    children = np.random.SeedSequence(seed).spawn(N_BLOCKS)
    sizes = [samples // N_BLOCKS + (k < samples % N_BLOCKS) for k in range(N_BLOCKS)]
    jobs = list(zip(sizes, children))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda a: _mc_block(p, sites, *a), jobs))
    else:
        parts = [_mc_block(p, sites, *a) for a in jobs]
    shift = max(float(lw.max()) for lw, _ in parts)
    num = np.array([np.sum(np.exp(lw - shift) * f) for lw, f in parts])
    den = np.array([np.sum(np.exp(lw - shift)) for lw, _ in parts])
    value = num.sum() / den.sum()
    loo = (num.sum() - num) / (den.sum() - den)
    k = N_BLOCKS
    stderr = math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2))
    return EstimateReport(float(value), stderr, samples, seed, "mc")


def _sphere_rule(N: int, points: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (P, N) and weights (P,) integrating against the uniform measure."""
    if N == 2:
        t = 2 * np.pi * np.arange(points) / points
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(points, 1.0 / points)
    if N == 3:
        x, wx = np.polynomial.legendre.leggauss(points)
        nphi = 2 * points
        ph = 2 * np.pi * np.arange(nphi) / nphi
        c = np.repeat(x, nphi)
        s = np.sqrt(1 - c**2)
        pp = np.tile(ph, points)
        nodes = np.stack([c, s * np.cos(pp), s * np.sin(pp)], axis=1)
        w = np.repeat(wx / 2, nphi) / nphi
        return nodes, w
    raise ValueError("quadrature supports N = 2 or 3")


def spin_expectation_quadrature(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str] | None = None,
    points: int | None = None,
) -> float:
    """Tensor-product quadrature, contracted edge by edge (N in {2, 3}, at most 3 vertices)."""
    n = len(p.graph.vertices)
    if n > 3:
        raise InstanceTooLarge("quadrature is limited to 3 vertices")
    if points is None:
        points = 256 if p.N == 2 else 28
    nodes, w = _sphere_rule(p.N, points)
    c = _couplings(p)
    site = []
    for x in range(n):
        sw = w * np.exp(c.boundary[x] * nodes[:, 0] + nodes @ c.h[x])
        site.append(sw)
    obs = [np.ones(len(w)) for _ in range(n)]
    for s in _observable_sites(p, A, B):
        obs[s] = obs[s] * nodes[:, 0]
    letters = "abc"
    terms, ops_z, ops_f = [], [], []
    for x in range(n):
        terms.append(letters[x])
        ops_z.append(site[x])
        ops_f.append(site[x] * obs[x])
    kernels = []
    for (a, b), Je in zip(c.pairs, c.J):
        terms.append(letters[a] + letters[b])
        kernels.append(np.exp((nodes * Je) @ nodes.T))
    expr = ",".join(terms) + "->"
    Z = np.einsum(expr, *ops_z, *kernels, optimize=True)
    F = np.einsum(expr, *ops_f, *kernels, optimize=True)
    return float(F / Z)


def compare_rpm_spin(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str] | None = None,
    tol=Fraction(1, 10**9),
    samples: int = 0,
    seed: int = 0,
    threads: int = 1,
    max_cap: int = 40,
) -> dict:
    """Converged RPM correlation next to the quadrature (and optional MC) value.

    With overlapping A and B only the one-sided relation is checked, since the
    RPM quantity leaves out zero-length walks at A∩B.
    """
    A = frozenset(A)
    Bs = frozenset(B) if B is not None else None
    rpm, cap = converge(p, A, Bs, tol, max_cap, exact=False)
    quad = spin_expectation_quadrature(p, A, Bs)
    overlap = bool(Bs and A & Bs)
    out = {
        "A": sorted(A),
        "B": sorted(Bs) if Bs is not None else None,
        "rpm": float(rpm),
        "cap": cap,
        "quadrature": quad,
        "abs_diff": abs(float(rpm) - quad),
        "overlap": overlap,
    }
    if samples:
        mc = spin_expectation_mc(p, A, Bs, samples, seed, threads)
        out["mc"] = mc.to_json()
        out["mc_z"] = abs(mc.value - quad) / mc.stderr if mc.stderr else 0.0
    if overlap:
        out["ok"] = float(rpm) <= quad + 1e-9
    else:
        out["ok"] = out["abs_diff"] < 1e-3 and (not samples or out["mc_z"] <= 3)
    return out
