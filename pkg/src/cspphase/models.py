"""Constraint models and instances.

A model is a finite family of weight tables psi: {0,..,q-1}^k -> [0,1]
together with a probability distribution over them.  Tables are stored as
dense length-q^k tuples in lexicographic order with the *last* coordinate
varying fastest; this ordering is fixed forever and shared by the JSON
schema, the samplers and the spectral code.

For the two-valued domains (NAESAT, balanced SAT, parity-majority) the
convention is digit 0 = +1 and digit 1 = -1.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

PROB_TOL = 1e-12
XI_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model construction or serialization input."""


def _as_index(tau, q, k):
    idx = 0
    for t in tau:
        idx = idx * q + t
    return idx


@dataclass(frozen=True)
class WeightTable:
    """One weight function psi as a dense table of q^k reals in [0,1]."""

    q: int
    k: int
    values: tuple

    def __post_init__(self):
        if self.q < 2:
            raise ModelError("domain size q must be >= 2")
        if self.k < 1:
            raise ModelError("arity k must be >= 1")
        if len(self.values) != self.q ** self.k:
            raise ModelError(
                f"table length {len(self.values)} != q^k = {self.q ** self.k}")
        for v in self.values:
            if not (0.0 <= v <= 1.0):
                raise ModelError(f"table entry {v} outside [0,1]")

    def __call__(self, tau):
        return self.values[_as_index(tau, self.q, self.k)]

    def as_array(self):
        """Table reshaped to a (q,)*k ndarray (axis j = coordinate j)."""
        return np.asarray(self.values, dtype=float).reshape((self.q,) * self.k)

    def permuted(self, theta):
        """psi o theta, i.e. sigma -> psi(sigma_theta(1),..,sigma_theta(k)).

        theta is a 0-based permutation of range(k).
        """
        arr = self.as_array()
        out = np.transpose(arr, axes=np.argsort(theta))
        return WeightTable(self.q, self.k, tuple(out.reshape(-1).tolist()))

    def row_sum(self, i, omega):
        """sum over tau with tau_i = omega of psi(tau) (i is 0-based)."""
        arr = self.as_array()
        return float(np.take(arr, omega, axis=i).sum())

    def mean(self):
        return float(np.mean(self.values))


def _permutation_closure_errors(tables, probs, q, k, tol=PROB_TOL):
    """Check closure of the weighted family under coordinate permutations.

    Returns a list of human-readable problems; empty when closed.
    """
    index = {}
    for i, (tab, p) in enumerate(zip(tables, probs)):
        key = tuple(round(v, 12) for v in tab.values)
        if key in index:
            index[key] = (index[key][0] + p, index[key][1])
        else:
            index[key] = (p, i)
    problems = []
    for i, (tab, p) in enumerate(zip(tables, probs)):
        for theta in itertools.permutations(range(k)):
            key = tuple(round(v, 12) for v in tab.permuted(list(theta)).values)
            if key not in index:
                problems.append(
                    f"table {i}: permuted copy under theta={theta} is missing")
                break
            p_perm = index[key][0]
            if abs(p_perm - index[tuple(round(v, 12) for v in tab.values)][0]) > 1e-9:
                problems.append(
                    f"table {i}: permuted copy under theta={theta} has "
                    f"probability {p_perm} != {p}")
                break
    return problems


@dataclass(frozen=True)
class ConstraintModel:
    """The pair (Psi, P): weight tables with strictly positive probabilities.

    Invariants (validated unless check=False): probabilities sum to 1 within
    1e-12, the family is closed under coordinate permutations with matching
    probabilities, and min psi < max psi over all tables and inputs.
    """

    q: int
    k: int
    weights: tuple  # tuple of (WeightTable, prob)
    name: str = ""
    check: bool = True
    xi: float = field(init=False)

    def __post_init__(self):
        tables = [w for w, _ in self.weights]
        probs = [p for _, p in self.weights]
        xi = sum(p * t.mean() for t, p in zip(tables, probs))
        object.__setattr__(self, "xi", float(xi))
        if not self.check:
            return
        if not tables:
            raise ModelError("model needs at least one weight table")
        for t in tables:
            if t.q != self.q or t.k != self.k:
                raise ModelError("table shape mismatch with model (q, k)")
        if any(p <= 0 for p in probs):
            raise ModelError("probabilities must be strictly positive")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ModelError(
                f"probabilities must sum to 1 (got {sum(probs):.15f})")
        lo = min(min(t.values) for t in tables)
        hi = max(max(t.values) for t in tables)
        if not lo < hi:
            raise ModelError("degenerate model: min psi == max psi")
        problems = _permutation_closure_errors(tables, probs, self.q, self.k)
        if problems:
            raise ModelError("not permutation closed: " + problems[0])

    # -- array views -------------------------------------------------------
    @property
    def n_weights(self):
        return len(self.weights)

    def table(self, i):
        return self.weights[i][0]

    def weight_prob(self, i):
        return self.weights[i][1]

    def probs_array(self):
        return np.array([p for _, p in self.weights], dtype=float)

    def tables_array(self):
        """(n_weights, q^k) array of all tables."""
        return np.array([w.values for w, _ in self.weights], dtype=float)

    def sample_index(self, rng, size=None):
        return rng.choice(self.n_weights, size=size, p=self.probs_array())

    def mean_table(self):
        """E[Psi] as a flat length-q^k array."""
        return self.probs_array() @ self.tables_array()

    def pair_table(self):
        """E[Psi(sigma) Psi(tau)] as a (q^k, q^k) array (same Psi twice)."""
        tabs = self.tables_array()
        return (tabs.T * self.probs_array()) @ tabs

    def recompute_xi(self):
        return float(self.mean_table().mean())

    def is_color_symmetric(self):
        """True if relabelling the domain by any permutation of range(q)
        maps the weighted family onto itself (transpositions suffice)."""
        tabs = {}
        for w, p in self.weights:
            key = tuple(round(v, 12) for v in w.values)
            tabs[key] = tabs.get(key, 0.0) + p
        for a in range(self.q - 1):
            g = list(range(self.q))
            g[a], g[a + 1] = g[a + 1], g[a]
            for w, p in self.weights:
                relabel = w.as_array()[np.ix_(*([g] * self.k))]
                key = tuple(round(v, 12) for v in relabel.reshape(-1).tolist())
                base = tuple(round(v, 12) for v in w.values)
                if key not in tabs or abs(tabs[key] - tabs[base]) > 1e-9:
                    return False
        return True

    def phi(self, mu):
        """phi(mu) = sum_tau E[Psi(tau)] prod_i mu(tau_i)."""
        mu = np.asarray(mu, dtype=float)
        out = self.mean_table().reshape((self.q,) * self.k)
        for _ in range(self.k):
            out = out @ mu  # contracts the last axis each time
        return float(out)

    def phi_pair(self, rho):
        """phibar(rho) = sum_{sigma,tau} E[Psi(sigma)Psi(tau)] prod_i rho(sigma_i,tau_i).

        rho is a (q, q) array (a distribution on pairs).
        """
        rho = np.asarray(rho, dtype=float)
        kron = rho
        for _ in range(self.k - 1):
            kron = np.kron(kron, rho)
        return float(np.vdot(self.pair_table(), kron))


def model_hash(model):
    """Stable hex digest of the model's canonical JSON form."""
    import hashlib
    payload = json.dumps(model_to_dict(model), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

def make_naesat(k):
    """Not-all-equal SAT: 2^k tables psi_tau = 1 - 1{sigma=tau} - 1{sigma=-tau}."""
    if k < 3:
        raise ModelError("NAESAT requires k >= 3")
    n = 2 ** k
    tables = []
    for t_idx in range(n):
        vals = [1.0] * n
        vals[t_idx] = 0.0
        vals[n - 1 - t_idx] = 0.0  # binary inverse flips every digit
        tables.append((WeightTable(2, k, tuple(vals)), 1.0 / n))
    return ConstraintModel(2, k, tuple(tables), name=f"naesat(k={k})")


def make_hypergraph_coloring(k, q):
    """Hypergraph q-coloring: the single table 1 - 1{sigma_1=..=sigma_k}."""
    if k < 2 or q < 2:
        raise ModelError("coloring requires k >= 2 and q >= 2")
    if k == 2 and q == 2:
        raise ModelError("k = q = 2 is not supported (unicyclic instances "
                         "can be unsatisfiable)")
    vals = np.ones(q ** k)
    for c in range(q):
        vals[_as_index([c] * k, q, k)] = 0.0
    table = WeightTable(q, k, tuple(vals.tolist()))
    return ConstraintModel(q, k, ((table, 1.0),), name=f"coloring(k={k},q={q})")


def balanced_sat_lambda(k):
    """Unique nontrivial root in (0,1) of (1-x)(1+x)^(k-1) - 1 = 0.

    x=0 is a trivial root; f rises then falls on (0,1) with f(1)=-1, so
    bisection from the peak brackets the crossing.  Resolved to 1e-14.
    """
    f = lambda x: (1.0 - x) * (1.0 + x) ** (k - 1) - 1.0
    grid = np.linspace(1e-6, 1 - 1e-6, 1001)
    lo = float(grid[np.argmax([f(x) for x in grid])])
    hi = 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def make_balanced_sat(k):
    """SAT tables reweighted by lambda^{#{sigma_j = tau_j}} so that every
    value looks the same from any single coordinate."""
    if k < 3:
        raise ModelError("balanced SAT requires k >= 3")
    lam = balanced_sat_lambda(k)
    n = 2 ** k
    tables = []
    for t_idx in range(n):
        tau = [(t_idx >> (k - 1 - j)) & 1 for j in range(k)]
        vals = []
        for s_idx in range(n):
            sig = [(s_idx >> (k - 1 - j)) & 1 for j in range(k)]
            agree = sum(1 for a, b in zip(sig, tau) if a == b)
            blocked = 1.0 if agree == 0 else 0.0  # sigma = -tau
            vals.append(lam ** agree * (1.0 - blocked))
        tables.append((WeightTable(2, k, tuple(vals)), 1.0 / n))
    return ConstraintModel(2, k, tuple(tables), name=f"balanced-sat(k={k})")


def make_ksat(k):
    """Plain k-SAT tables (negative-test fixture; fails the row-sum identity)."""
    if k < 2:
        raise ModelError("k-SAT requires k >= 2")
    n = 2 ** k
    tables = []
    for t_idx in range(n):
        vals = [1.0] * n
        vals[n - 1 - t_idx] = 0.0  # the unique violating assignment
        tables.append((WeightTable(2, k, tuple(vals)), 1.0 / n))
    return ConstraintModel(2, k, tuple(tables), name=f"ksat(k={k})")


# ---------------------------------------------------------------------------
# parity-majority (reduced representation)
# ---------------------------------------------------------------------------

def _parity_majority_table(k, parity_set, parity_sign, maj_signs, q=2):
    """Dense table of one parity-majority function of arity 2k.

    parity_set: frozenset of positions (0-based) feeding the parity check.
    parity_sign: +-1 overall sign of the parity product.
    maj_signs: dict pos -> +-1 for the majority positions.
    Digit convention: 0 = +1, 1 = -1.
    """
    K = 2 * k
    vals = np.empty(2 ** K)
    spin = np.array([1, -1])
    for idx in range(2 ** K):
        digs = [(idx >> (K - 1 - j)) & 1 for j in range(K)]
        par = parity_sign
        m = 0
        for j in range(K):
            s = spin[digs[j]]
            if j in parity_set:
                par *= s
            else:
                m += maj_signs[j] * s
        vals[idx] = 1.0 if (par == 1 and m < 0) or (par == -1 and m > 0) else 0.0
    return WeightTable(2, K, tuple(vals.tolist()))


@dataclass(frozen=True)
class ParityMajorityModel:
    """XOR-of-(parity, majority) model of arity 2*k_half, k_half odd.

    The full family has one function per (parity position set, parity sign,
    majority sign vector); only the canonical table is materialized and all
    averages are taken through the sign/permutation reductions.  ``soften``
    composes an affine map (offset, scale) applied entrywise to the hard
    tables.
    """

    k_half: int
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.k_half < 3 or self.k_half % 2 == 0:
            raise ModelError("parity-majority requires odd k >= 3")

    # model protocol ---------------------------------------------------
    @property
    def q(self):
        return 2

    @property
    def k(self):
        return 2 * self.k_half

    @property
    def name(self):
        tag = f"parity-majority(k={self.k_half})"
        if self.offset:
            tag += f"+soft({self.offset:.6g})"
        return tag

    @property
    def xi(self):
        return self.offset + self.scale * 0.5

    @property
    def n_weights(self):
        return math.comb(self.k, self.k_half) * 2 ** (self.k_half + 1)

    def weight_prob(self, i):
        return 1.0 / self.n_weights

    def _decode(self, i):
        n_sets = math.comb(self.k, self.k_half)
        set_rank, rest = divmod(i, 2 ** (self.k_half + 1))
        parity_sign = 1 if rest < 2 ** self.k_half else -1
        sign_bits = rest % (2 ** self.k_half)
        subsets = _k_subsets(self.k, self.k_half)
        parity_set = subsets[set_rank]
        maj_positions = [j for j in range(self.k) if j not in parity_set]
        maj_signs = {}
        for b, j in enumerate(maj_positions):
            maj_signs[j] = 1 if (sign_bits >> (self.k_half - 1 - b)) & 1 == 0 else -1
        return parity_set, parity_sign, maj_signs

    def table(self, i):
        parity_set, parity_sign, maj_signs = self._decode(i)
        hard = _parity_majority_table(self.k_half, parity_set, parity_sign, maj_signs)
        if self.offset == 0.0 and self.scale == 1.0:
            return hard
        vals = tuple(self.offset + self.scale * v for v in hard.values)
        return WeightTable(2, self.k, vals)

    @property
    def canonical(self):
        # parity on the first k_half positions, all signs +1: index 0
        return self.table(0)

    def sample_index(self, rng, size=None):
        return rng.integers(0, self.n_weights, size=size)

    def mean_table(self):
        """E[Psi] is constant: every input is satisfied by exactly half of
        the sign choices."""
        return np.full(2 ** self.k, self.xi)

    def phi(self, mu):
        return self.xi

    def recompute_xi(self):
        return self.xi

    def is_color_symmetric(self):
        return True

    # pair statistics ----------------------------------------------------
    def parity_pair_function(self, r):
        """f(r) = (1 - (1-2r)^k_half) / 4.

        Both parities equal iff the agreement count is odd (k_half odd), and
        sum over odd i of C(k,i) r^i (1-r)^(k-i) = (1 - (1-2r)^k)/2.
        """
        return 0.25 * (1.0 - (1.0 - 2.0 * r) ** self.k_half)

    def majority_pair_function(self, r):
        """g(r): both majority votes negative when positions agree w.p. r."""
        kh = self.k_half
        g = 0.0
        for u_idx in range(2 ** kh):
            u = [1 - 2 * ((u_idx >> (kh - 1 - j)) & 1) for j in range(kh)]
            if sum(u) >= 0:
                continue
            for v_idx in range(2 ** kh):
                v = [1 - 2 * ((v_idx >> (kh - 1 - j)) & 1) for j in range(kh)]
                if sum(v) >= 0:
                    continue
                agree = sum(1 for a, b in zip(u, v) if a == b)
                g += r ** agree * (1.0 - r) ** (kh - agree)
        return g / 2 ** kh

    def pair_r_objective(self, r):
        """phibar restricted to the diagonal family rho(1,1)=rho(-1,-1)=r/2.

        Hard model: 2 (f(r) g(r) + f(1-r) g(1-r)); softening enters as an
        affine map because the cross term integrates to xi_hard on the
        row/column-constrained polytope.
        """
        hard = 2.0 * (self.parity_pair_function(r) * self.majority_pair_function(r)
                      + self.parity_pair_function(1.0 - r) * self.majority_pair_function(1.0 - r))
        o, s = self.offset, self.scale
        return o * o + 2.0 * o * s * 0.5 + s * s * hard

    def expand(self):
        """Explicit ConstraintModel with every distinct function (2k <= 6)."""
        if self.k > 6:
            raise ModelError("explicit expansion supported only for 2k <= 6")
        tables = []
        p = 1.0 / self.n_weights
        for i in range(self.n_weights):
            tables.append((self.table(i), p))
        return ConstraintModel(2, self.k, tuple(tables),
                               name=self.name + "[expanded]")


@lru_cache(maxsize=None)
def _k_subsets(n, k):
    return [frozenset(c) for c in itertools.combinations(range(n), k)]


def make_parity_majority(k, expand=False):
    if k % 2 == 0:
        raise ModelError("parity-majority requires odd k")
    model = ParityMajorityModel(k)
    return model.expand() if expand else model


# ---------------------------------------------------------------------------
# softening
# ---------------------------------------------------------------------------

def soften(model, beta):
    """Mix every table with the constant e^-beta: x -> e^-b + (1-e^-b) x."""
    if beta <= 0:
        raise ModelError("beta must be positive")
    a = math.exp(-beta)
    if isinstance(model, ParityMajorityModel):
        return ParityMajorityModel(model.k_half,
                                   offset=a + (1 - a) * model.offset,
                                   scale=(1 - a) * model.scale)
    weights = tuple(
        (WeightTable(w.q, w.k, tuple(a + (1 - a) * v for v in w.values)), p)
        for w, p in model.weights)
    return ConstraintModel(model.q, model.k, weights,
                           name=model.name + f"+soft({beta:g})",
                           check=model.check)


# ---------------------------------------------------------------------------
# instances and assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorGraphInstance:
    """A concrete CSP: n variables plus ordered constraint neighborhoods.

    ``pins`` holds unary clamp constraints (variable, value) appended by the
    pinning operation; they multiply 1{sigma(x)=v} into the weight.
    """

    n: int
    constraints: tuple  # tuple of (vars tuple, weight_index)
    pins: tuple = ()

    def __post_init__(self):
        for vs, wi in self.constraints:
            for v in vs:
                if not (0 <= v < self.n):
                    raise ModelError(f"variable index {v} outside [0,{self.n})")
        for v, val in self.pins:
            if not (0 <= v < self.n):
                raise ModelError(f"pinned variable {v} outside [0,{self.n})")

    @property
    def m(self):
        return len(self.constraints)

    def is_simple(self):
        seen = set()
        for vs, _ in self.constraints:
            if len(set(vs)) != len(vs):
                return False
            key = frozenset(vs)
            if key in seen:
                return False
            seen.add(key)
        return True

    def validate_simple(self):
        if not self.is_simple():
            raise ModelError("instance is not simple (repeated variable in a "
                             "tuple, or duplicate constraint k-set)")


def evaluate_weight(instance, model, sigma):
    """psi_G(sigma): product of per-constraint table lookups (and pins)."""
    sigma = np.asarray(sigma)
    if len(sigma) != instance.n:
        raise ModelError("assignment length does not match instance")
    out = 1.0
    for vs, wi in instance.constraints:
        out *= model.table(wi)(tuple(int(sigma[v]) for v in vs))
        if out == 0.0:
            return 0.0
    for v, val in instance.pins:
        if int(sigma[v]) != val:
            return 0.0
    return out


def satisfies(instance, model, sigma):
    return evaluate_weight(instance, model, sigma) > 0.0


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def model_to_dict(model):
    if isinstance(model, ParityMajorityModel):
        model = model.expand()
    return {
        "q": model.q,
        "k": model.k,
        "weights": [{"prob": p, "table": list(w.values)}
                    for w, p in model.weights],
    }


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def model_from_dict(data, name=""):
    try:
        q = int(data["q"])
        k = int(data["k"])
        raw = data["weights"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"model JSON missing field: {exc}")
    weights = []
    for i, item in enumerate(raw):
        if "prob" not in item or "table" not in item:
            raise ModelError(f"weights[{i}] needs 'prob' and 'table'")
        try:
            tab = WeightTable(q, k, tuple(float(v) for v in item["table"]))
        except ModelError as exc:
            raise ModelError(f"weights[{i}]: {exc}")
        weights.append((tab, float(item["prob"])))
    probs = [p for _, p in weights]
    if abs(sum(probs) - 1.0) > PROB_TOL:
        raise ModelError("probabilities must sum to 1")
    problems = _permutation_closure_errors([w for w, _ in weights], probs, q, k)
    if problems:
        raise ModelError(problems[0])
    return ConstraintModel(q, k, tuple(weights), name=name or "loaded")


def load_model(path):
    with open(path) as fh:
        data = json.load(fh)
    return model_from_dict(data, name=os.path.basename(path))


def instance_to_dict(instance):
    out = {
        "n": instance.n,
        "constraints": [{"vars": list(vs), "w": wi}
                        for vs, wi in instance.constraints],
    }
    if instance.pins:
        out["pins"] = [{"var": v, "value": val} for v, val in instance.pins]
    return out


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1)


def load_instance(path):
    with open(path) as fh:
        data = json.load(fh)
    cons = tuple((tuple(c["vars"]), int(c["w"])) for c in data["constraints"])
    pins = tuple((int(p["var"]), int(p["value"])) for p in data.get("pins", ()))
    return FactorGraphInstance(int(data["n"]), cons, pins)


BUILTIN_FACTORIES = {
    "naesat": lambda k=3, q=2, **kw: make_naesat(k),
    "coloring": lambda k=2, q=3, **kw: make_hypergraph_coloring(k, q),
    "balanced-sat": lambda k=3, q=2, **kw: make_balanced_sat(k),
    "parity-majority": lambda k=3, q=2, expand=False, **kw: make_parity_majority(k, expand=expand),
    "ksat": lambda k=3, q=2, **kw: make_ksat(k),
}
