"""Graded dynamic quadtree with cell-average multiresolution.

Storage is dense per level: an existence mask and one value array per field
at every level 0..L, with parent/child navigation by index arithmetic
(parent of (l, i, j) is (l-1, i//2, j//2)). This keeps every tree pass a
vectorized stencil operation; at 2D desk scales the dense overhead
(sum_l 4^l ~ 1.33 * 4^L cells) is negligible.

Multiscale operations:

* projection: parent value = mean of its four children (exact, bottom-up);
* prediction: child averages interpolated from a (2s+1)^2 coarse stencil,

      u~[2i+e1, 2j+e2] = u[i,j] + (-1)^e1 Qx + (-1)^e2 Qy + (-1)^(e1+e2) Qxy,

  with Qx = sum_n g_n (u[i+n,j] - u[i-n,j]) (Qy, Qxy analogous) and
  g1 = -22/128, g2 = 3/128 for the default stencil s=2 (g1 = -1/8 for s=1).
  Prediction is the right inverse of projection: the four predicted children
  average back to the parent exactly. Boundary stencils use even (mirror)
  reflection, consistent with the zero-flux boundary condition;
* details: d = value - prediction, stored per node with a parent; level-l
  details are thresholded against eps_l = 2^(2(l-L)) * eps_ref.

The tree is kept graded (edge-adjacent leaves differ by at most one level)
and sibling groups are always complete. adapt() performs one
threshold/coarsen/refine/re-grade pass; refining every non-deletable leaf by
one level is the safety zone that lets the mesh track moving fronts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .fvcore import CellState, GridSpec, init_cell_averages

__all__ = [
    "LeafIndex",
    "NodeKey",
    "PREDICTION_COEFFS",
    "Tree",
    "build_initial_tree",
    "interface_flux",
    "mr_decode",
    "mr_encode",
    "predict_children",
    "predict_point",
    "project_children",
    "reference_tolerance",
    "resolve_value",
    "threshold_schedule",
    "write_leaf_dump",
]

# Prediction stencil coefficients per half-width s; s=0 is the bare Haar
# refinement (children copy the parent), used by tests.
PREDICTION_COEFFS: dict[int, tuple[float, ...]] = {
    0: (),
    1: (-1.0 / 8.0,),
    2: (-22.0 / 128.0, 3.0 / 128.0),
}


@dataclass(frozen=True)
class NodeKey:
    """Dyadic cell address (level, i, j) with 0 <= i, j < 2^level."""

    level: int
    i: int
    j: int

    def __post_init__(self):
        n = 1 << self.level
        if not (0 <= self.i < n and 0 <= self.j < n):
            raise ValueError(f"indices out of range for level {self.level}: {self}")

    def parent(self) -> "NodeKey":
        if self.level == 0:
            raise ValueError("root has no parent")
        return NodeKey(self.level - 1, self.i // 2, self.j // 2)

    def children(self) -> list["NodeKey"]:
        return [
            NodeKey(self.level + 1, 2 * self.i + p, 2 * self.j + q)
            for p in (0, 1)
            for q in (0, 1)
        ]

    def neighbor(self, di: int, dj: int) -> "NodeKey | None":
        n = 1 << self.level
        i, j = self.i + di, self.j + dj
        if 0 <= i < n and 0 <= j < n:
            return NodeKey(self.level, i, j)
        return None

    def center(self, grid: GridSpec) -> tuple[float, float]:
        h = grid.h(self.level)
        return (
            grid.origin[0] + (self.i + 0.5) * h,
            grid.origin[1] + (self.j + 0.5) * h,
        )


def threshold_schedule(eps_ref: float, max_level: int) -> np.ndarray:
    """Level thresholds eps_l = 2^(2(l-L)) * eps_ref for l = 0..L."""
    if eps_ref < 0:
        raise ValueError("eps_ref must be >= 0")
    levels = np.arange(max_level + 1)
    return 2.0 ** (2.0 * (levels - max_level)) * eps_ref


def reference_tolerance(
    c_factor: float,
    alpha: float,
    max_level: int,
    domain_area: float,
    max_ion_2app: float,
    max_tensor_sum: float,
) -> float:
    """Reference tolerance balancing discretization and perturbation error:

    eps_R = C * 2^(-(alpha+2)L) /
            ( |O| * max(|I_ion| + 2|I_app|) + |O|^(3/2) * 2^(2+L) * max(|M_i|+|M_e|) )
    """
    denom = (
        domain_area * max_ion_2app
        + domain_area**1.5 * 2.0 ** (2 + max_level) * max_tensor_sum
    )
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError(f"degenerate reference-tolerance denominator {denom}")
    return c_factor * 2.0 ** (-(alpha + 2.0) * max_level) / denom


def interface_flux(fine_flux_a: float, fine_flux_b: float) -> float:
    """Ingoing coarse flux across a refinement interface: the sum of the two
    outgoing fine fluxes sharing the edge (no independent coarse evaluation)."""
    return fine_flux_a + fine_flux_b


def _kernel(s: int) -> np.ndarray:
    g = PREDICTION_COEFFS[s]
    k = np.zeros(2 * s + 1)
    for n, gn in enumerate(g, start=1):
        k[s + n] = gn
        k[s - n] = -gn
    return k


def predict_children(coarse: np.ndarray, stencil_width: int = 2) -> np.ndarray:
    """Predict the full next-finer level (2n x 2n) from a level array (n x n).

    Mirror reflection at the domain boundary; exact on polynomials up to
    degree 2s (details vanish there).
    """
    n = coarse.shape[0]
    fine = np.empty((2 * n, 2 * n), dtype=float)
    if stencil_width == 0:
        qx = qy = qxy = 0.0
    else:
        k = _kernel(stencil_width)
        qx = correlate1d(coarse, k, axis=0, mode="reflect")
        qy = correlate1d(coarse, k, axis=1, mode="reflect")
        qxy = correlate1d(qx, k, axis=1, mode="reflect")
    fine[0::2, 0::2] = coarse + qx + qy + qxy
    fine[0::2, 1::2] = coarse + qx - qy - qxy
    fine[1::2, 0::2] = coarse - qx + qy - qxy
    fine[1::2, 1::2] = coarse - qx - qy + qxy
    return fine


def predict_point(
    neighborhood: np.ndarray, e1: int, e2: int, stencil_width: int = 2
) -> float:
    """Predict one child average from its parent's (2s+1)^2 neighborhood.

    neighborhood[s, s] is the parent; (e1, e2) in {0,1}^2 selects the child
    (2i+e1, 2j+e2).
    """
    s = stencil_width
    if neighborhood.shape != (2 * s + 1, 2 * s + 1):
        raise ValueError("neighborhood must be (2s+1) x (2s+1)")
    g = PREDICTION_COEFFS[s]
    c = s
    qx = sum(gn * (neighborhood[c + n, c] - neighborhood[c - n, c])
             for n, gn in enumerate(g, start=1))
    qy = sum(gn * (neighborhood[c, c + n] - neighborhood[c, c - n])
             for n, gn in enumerate(g, start=1))
    qxy = 0.0
    for n, gn in enumerate(g, start=1):
        for p, gp in enumerate(g, start=1):
            qxy += gn * gp * (
                neighborhood[c + n, c + p]
                - neighborhood[c + n, c - p]
                - neighborhood[c - n, c + p]
                + neighborhood[c - n, c - p]
            )
    sx, sy = 1 - 2 * e1, 1 - 2 * e2
    return float(neighborhood[c, c] + sx * qx + sy * qy + sx * sy * qxy)


def project_children(fine: np.ndarray) -> np.ndarray:
    """Exact coarsening: each parent is the mean of its four children."""
    n = fine.shape[0] // 2
    return fine.reshape(n, 2, n, 2).mean(axis=(1, 3))


def mr_encode(fine: np.ndarray, stencil_width: int = 2):
    """Multiresolution transform of a finest-level field: root average plus
    per-level detail arrays (level l details compare prediction from l-1)."""
    levels = [fine.astype(float)]
    while levels[0].shape[0] > 1:
        levels.insert(0, project_children(levels[0]))
    details = [
        levels[l] - predict_children(levels[l - 1], stencil_width)
        for l in range(1, len(levels))
    ]
    return levels[0], details


def mr_decode(root: np.ndarray, details: Sequence[np.ndarray], stencil_width: int = 2):
    """Inverse transform: predict down, adding stored details back per level."""
    u = root.astype(float)
    for d in details:
        u = predict_children(u, stencil_width) + d
    return u


# Dense-level mask helpers (arrays indexed [i, j] = [x, y]).


def _down_any(m: np.ndarray) -> np.ndarray:
    n = m.shape[0] // 2
    return m.reshape(n, 2, n, 2).any(axis=(1, 3))


def _down_all(m: np.ndarray) -> np.ndarray:
    n = m.shape[0] // 2
    return m.reshape(n, 2, n, 2).all(axis=(1, 3))


def _down_max(a: np.ndarray) -> np.ndarray:
    n = a.shape[0] // 2
    return a.reshape(n, 2, n, 2).max(axis=(1, 3))


def _up(m: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(m, 2, axis=0), 2, axis=1)


def _dilate_cross(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    out[1:, :] |= m[:-1, :]
    out[:-1, :] |= m[1:, :]
    out[:, 1:] |= m[:, :-1]
    out[:, :-1] |= m[:, 1:]
    return out


@dataclass
class LeafIndex:
    """Level-major enumeration of leaves: bijection leaf <-> row."""

    levels: list[int]
    i_idx: list[np.ndarray]
    j_idx: list[np.ndarray]
    offsets: list[int]
    n: int

    def gather(self, arrays: Sequence[np.ndarray]) -> np.ndarray:
        out = np.empty(self.n)
        for lv, ii, jj, off in zip(self.levels, self.i_idx, self.j_idx, self.offsets):
            out[off : off + ii.size] = arrays[lv][ii, jj]
        return out

    def scatter(self, vec: np.ndarray, arrays: Sequence[np.ndarray]) -> None:
        for lv, ii, jj, off in zip(self.levels, self.i_idx, self.j_idx, self.offsets):
            arrays[lv][ii, jj] = vec[off : off + ii.size]

    def areas(self, grid: GridSpec) -> np.ndarray:
        out = np.empty(self.n)
        for lv, ii, jj, off in zip(self.levels, self.i_idx, self.j_idx, self.offsets):
            out[off : off + ii.size] = grid.cell_area(lv)
        return out

    def keys(self) -> list[NodeKey]:
        out = []
        for lv, ii, jj in zip(self.levels, self.i_idx, self.j_idx):
            out.extend(NodeKey(lv, int(a), int(b)) for a, b in zip(ii, jj))
        return out

    def row_of(self, key: NodeKey) -> int:
        for lv, ii, jj, off in zip(self.levels, self.i_idx, self.j_idx, self.offsets):
            if lv == key.level:
                hit = np.flatnonzero((ii == key.i) & (jj == key.j))
                if hit.size:
                    return off + int(hit[0])
        raise KeyError(key)


class Tree:
    """Graded quadtree of cell averages over a square dyadic hierarchy."""

    def __init__(
        self,
        grid: GridSpec,
        fields: Sequence[str],
        eps_ref: float = 0.0,
        stencil_width: int = 2,
        refine_rule: str = "coarsen",
    ):
        if stencil_width not in PREDICTION_COEFFS:
            raise ValueError(f"unsupported stencil width {stencil_width}")
        if refine_rule not in ("coarsen", "min"):
            raise ValueError(f"unknown refine_rule {refine_rule!r}")
        grid.validate()
        self.grid = grid
        self.field_names = list(fields)
        self.eps_ref = float(eps_ref)
        self.stencil_width = stencil_width
        self.refine_rule = refine_rule
        L = grid.max_level
        self.exists: list[np.ndarray] = [
            np.zeros((1 << l, 1 << l), dtype=bool) for l in range(L + 1)
        ]
        self.exists[0][0, 0] = True
        self.values: dict[str, list[np.ndarray]] = {
            f: [np.zeros((1 << l, 1 << l)) for l in range(L + 1)]
            for f in self.field_names
        }

    # -- basic structure ---------------------------------------------------

    @property
    def max_level(self) -> int:
        return self.grid.max_level

    @property
    def eps_schedule(self) -> np.ndarray:
        return threshold_schedule(self.eps_ref, self.max_level)

    def has_children(self, level: int) -> np.ndarray:
        if level >= self.max_level:
            return np.zeros_like(self.exists[level])
        return _down_any(self.exists[level + 1])

    def leaf_mask(self, level: int) -> np.ndarray:
        return self.exists[level] & ~self.has_children(level)

    def virtual_mask(self, level: int) -> np.ndarray:
        """Cells absent from the tree within s'=2 of a same-level leaf in each
        axis direction (the phantom neighbors that flux stencils read)."""
        m = self.leaf_mask(level)
        near = m.copy()
        for _ in range(2):
            near = _dilate_cross(near)
        return near & ~self.exists[level]

    def leaf_count(self) -> int:
        return sum(int(self.leaf_mask(l).sum()) for l in range(self.max_level + 1))

    def node_count(self) -> int:
        return sum(int(e.sum()) for e in self.exists)

    def leaf_index(self) -> LeafIndex:
        levels, iidx, jidx, offsets = [], [], [], []
        off = 0
        for l in range(self.max_level + 1):
            ii, jj = np.nonzero(self.leaf_mask(l))
            if ii.size:
                levels.append(l)
                iidx.append(ii)
                jidx.append(jj)
                offsets.append(off)
                off += ii.size
        return LeafIndex(levels, iidx, jidx, offsets, off)

    def exists_key(self, key: NodeKey) -> bool:
        return bool(self.exists[key.level][key.i, key.j])

    def is_leaf(self, key: NodeKey) -> bool:
        return self.exists_key(key) and not (
            key.level < self.max_level and bool(self.has_children(key.level)[key.i, key.j])
        )

    def value(self, field: str, key: NodeKey) -> float:
        return float(self.values[field][key.level][key.i, key.j])

    def node(self, key: NodeKey) -> CellState:
        get = lambda f: self.value(f, key) if f in self.values else None
        return CellState(v=get("v"), w=get("w"), u_e=get("ue"))

    def copy(self) -> "Tree":
        t = Tree(self.grid, self.field_names, self.eps_ref, self.stencil_width,
                 self.refine_rule)
        t.exists = [e.copy() for e in self.exists]
        t.values = {f: [a.copy() for a in v] for f, v in self.values.items()}
        return t

    # -- invariants ----------------------------------------------------------

    def sibling_groups_complete(self) -> bool:
        for l in range(1, self.max_level + 1):
            counts = self.exists[l].reshape(-1, 2, self.exists[l].shape[0] // 2, 2)
            per_group = counts.sum(axis=(1, 3))
            if not np.all((per_group == 0) | (per_group == 4)):
                return False
        return True

    def is_graded(self) -> bool:
        """Every existing cell's in-bounds axis neighbors have a parent."""
        for l in range(2, self.max_level + 1):
            if not np.any(self.exists[l]):
                continue
            need = _down_any(_dilate_cross(self.exists[l]))
            if np.any(need & ~self.exists[l - 1]):
                return False
        return True

    # -- multiscale passes ---------------------------------------------------

    def project(self, fields: Iterable[str] | None = None) -> None:
        """Refresh internal node values bottom-up from the leaves."""
        names = self.field_names if fields is None else list(fields)
        for l in range(self.max_level - 1, -1, -1):
            hc = self.has_children(l)
            if not np.any(hc):
                continue
            for f in names:
                means = project_children(self.values[f][l + 1])
                self.values[f][l][hc] = means[hc]

    def mr_sweep(self, fields: Iterable[str] | None = None):
        """One coarse-to-fine sweep producing, per field:

        resolved[l]: real values where nodes exist, recursive prediction
                     elsewhere (virtual-leaf values, free of tree holes);
        predicted[l]: prediction of level l from resolved l-1 (l >= 1);
        details[l]:  value - prediction at existing nodes, zero elsewhere.
        """
        names = self.field_names if fields is None else list(fields)
        resolved = {f: [self.values[f][0].copy()] for f in names}
        predicted = {f: [None] for f in names}
        details = {f: [None] for f in names}
        for l in range(1, self.max_level + 1):
            e = self.exists[l]
            for f in names:
                p = predict_children(resolved[f][l - 1], self.stencil_width)
                predicted[f].append(p)
                r = np.where(e, self.values[f][l], p)
                resolved[f].append(r)
                d = np.where(e, self.values[f][l] - p, 0.0)
                details[f].append(d)
        return resolved, predicted, details

    def resolved(self, field: str) -> list[np.ndarray]:
        res, _, _ = self.mr_sweep([field])
        return res[field]

    def flatten(self, field: str) -> np.ndarray:
        """Uniform finest-level array: each fine cell takes the value of its
        covering leaf via recursive prediction down to level L."""
        return self.resolved(field)[self.max_level]

    def compute_details(self, fields: Iterable[str] | None = None):
        """Raw per-field details plus the scale-free combined details used by
        thresholding: per level, each field's |detail| is normalized by the
        field's global max-abs (fields that are identically zero carry no
        information and are excluded), then combined with min over fields for
        the refinement detail and max over fields for the coarsening detail."""
        names = self.field_names if fields is None else list(fields)
        _, _, details = self.mr_sweep(names)
        norms = {}
        for f in names:
            m = 0.0
            for l in range(self.max_level + 1):
                e = self.exists[l]
                if np.any(e):
                    m = max(m, float(np.abs(self.values[f][l][e]).max()))
            norms[f] = m
        informative = [f for f in names if norms[f] > 0.0]
        d_refine, d_coarsen = [None], [None]
        for l in range(1, self.max_level + 1):
            if informative:
                stack = np.stack([np.abs(details[f][l]) / norms[f] for f in informative])
                d_refine.append(stack.min(axis=0))
                d_coarsen.append(stack.max(axis=0))
            else:
                z = np.zeros_like(details[names[0]][l])
                d_refine.append(z)
                d_coarsen.append(z.copy())
        return details, d_refine, d_coarsen

    # -- adaptation ----------------------------------------------------------

    def _node_deletable(self, d_coarsen) -> list[np.ndarray]:
        """Group-level deletable flags broadcast to nodes: a node and its
        siblings are deletable when every member's coarsening detail is below
        the level threshold. The root is always deletable (no detail)."""
        eps = self.eps_schedule
        out = [np.ones((1, 1), dtype=bool)]
        for l in range(1, self.max_level + 1):
            grp_ok = _down_max(d_coarsen[l]) < eps[l]
            out.append(_up(grp_ok))
        return out

    def adapt(self) -> dict:
        """One tree update: project, details, coarsen, refine (safety zone),
        re-grade. New node values come from prediction off the pre-update
        tree ("the former leaves")."""
        self.project()
        _, predicted, _ = self.mr_sweep()
        _, d_refine, d_coarsen = self.compute_details()
        deletable = self._node_deletable(d_coarsen)

        deleted = self._coarsen_pass(deletable)
        created = self._refine_pass(deletable, d_refine, predicted)
        created += self._grade_pass(predicted)
        return {"deleted": deleted, "created": created}

    def _coarsen_pass(self, deletable) -> int:
        """Delete leaf sibling groups whose own node, and all four sons, are
        deletable, provided the merge keeps the tree graded. Fine-to-coarse so
        merges cascade within one pass."""
        deleted = 0
        for l in range(self.max_level, 0, -1):
            e = self.exists[l]
            if not np.any(e):
                continue
            group_exists = _down_all(e)
            sons_deletable = _down_all(deletable[l])
            sons_are_leaves = _down_all(self.leaf_mask(l) | ~e) & group_exists
            # merging may not leave a finer leaf edge-adjacent to the new leaf
            grading_block = _down_any(_dilate_cross(self.has_children(l)) & e)
            kill_groups = (
                deletable[l - 1]
                & group_exists
                & sons_deletable
                & sons_are_leaves
                & ~grading_block
            )
            if np.any(kill_groups):
                kill = _up(kill_groups)
                deleted += int((kill & e).sum())
                self.exists[l][kill] = False
                for f in self.field_names:
                    self.values[f][l][kill] = 0.0
        return deleted

    def _refine_pass(self, deletable, d_refine, predicted) -> int:
        """Create the four sons of every leaf the refine rule selects
        (default: any non-deletable leaf; "min" demands the min-combined
        detail itself exceed the level threshold). This is the safety zone."""
        eps = self.eps_schedule
        created = 0
        for l in range(self.max_level):
            leaf = self.leaf_mask(l)
            if self.refine_rule == "coarsen":
                trigger = ~deletable[l]
            else:
                trigger = (
                    np.zeros_like(leaf) if l == 0 else d_refine[l] >= eps[l]
                )
            refine = leaf & trigger
            if not np.any(refine):
                continue
            new = _up(refine) & ~self.exists[l + 1]
            created += int(new.sum())
            self.exists[l + 1] |= new
            for f in self.field_names:
                self.values[f][l + 1][new] = predicted[f][l + 1][new]
        return created

    def _grade_pass(self, predicted=None) -> int:
        """Restore gradedness: every in-bounds axis neighbor of an existing
        cell must have a parent. Creations are full sibling groups, valued by
        prediction off the pre-update tree. Fine-to-coarse cascades."""
        if predicted is None:
            _, predicted, _ = self.mr_sweep()
        created = 0
        for l in range(self.max_level, 1, -1):
            if not np.any(self.exists[l]):
                continue
            required = _down_any(_dilate_cross(self.exists[l]))
            missing = required & ~self.exists[l - 1]
            if not np.any(missing):
                continue
            groups = _down_any(missing)
            new = _up(groups) & ~self.exists[l - 1]
            created += int(new.sum())
            self.exists[l - 1] |= new
            for f in self.field_names:
                self.values[f][l - 1][new] = predicted[f][l - 1][new]
        return created

    # -- guarded single-node mutators (tests, fuzzing) -----------------------

    def refine_leaf(self, key: NodeKey) -> bool:
        """Split one leaf (children by prediction), then re-grade."""
        if key.level >= self.max_level or not self.is_leaf(key):
            return False
        _, predicted, _ = self.mr_sweep()
        l = key.level
        new = np.zeros_like(self.exists[l + 1])
        new[2 * key.i : 2 * key.i + 2, 2 * key.j : 2 * key.j + 2] = True
        self.exists[l + 1] |= new
        for f in self.field_names:
            self.values[f][l + 1][new] = predicted[f][l + 1][new]
        self._grade_pass(predicted)
        return True

    def coarsen_group(self, parent: NodeKey) -> bool:
        """Merge the four children of `parent` back into it if they are all
        leaves and the merge keeps the tree graded."""
        l = parent.level + 1
        if l > self.max_level or not self.exists_key(parent):
            return False
        sl_i, sl_j = slice(2 * parent.i, 2 * parent.i + 2), slice(
            2 * parent.j, 2 * parent.j + 2
        )
        if not self.exists[l][sl_i, sl_j].all():
            return False
        if not self.leaf_mask(l)[sl_i, sl_j].all():
            return False
        blocked = _dilate_cross(self.has_children(l))[sl_i, sl_j].any()
        if blocked:
            return False
        for f in self.field_names:
            self.values[f][parent.level][parent.i, parent.j] = self.values[f][l][
                sl_i, sl_j
            ].mean()
            self.values[f][l][sl_i, sl_j] = 0.0
        self.exists[l][sl_i, sl_j] = False
        return True


def _mirror(i: int, n: int) -> int:
    """Even (whole-cell) reflection of an index into [0, n)."""
    while i < 0 or i >= n:
        i = -1 - i if i < 0 else 2 * n - 1 - i
    return i


def resolve_value(tree: Tree, field: str, key: NodeKey) -> float:
    """Value of an arbitrary cell: the real average if the node exists, else
    the recursive prediction from its ancestors (the virtual-leaf value).

    Per-cell recursive descent, deliberately independent of the vectorized
    sweep; used as its oracle in tests and by the single-node mutators.
    """
    if tree.exists_key(key):
        return tree.value(field, key)
    parent = key.parent()
    s = tree.stencil_width
    n = 1 << parent.level
    neigh = np.empty((2 * s + 1, 2 * s + 1))
    for di in range(-s, s + 1):
        for dj in range(-s, s + 1):
            pk = NodeKey(parent.level, _mirror(parent.i + di, n), _mirror(parent.j + dj, n))
            neigh[di + s, dj + s] = resolve_value(tree, field, pk)
    return predict_point(neigh, key.i - 2 * parent.i, key.j - 2 * parent.j, s)


def apply_stimulus_tree(
    tree: Tree,
    field: str,
    center: tuple[float, float],
    radius_sq: float,
    amplitude: float,
) -> int:
    """Add amplitude to every leaf whose center lies strictly inside the
    disc; refreshes parent values afterwards. Returns the leaf count hit."""
    hit = 0
    for l in range(tree.max_level + 1):
        leaf = tree.leaf_mask(l)
        if not np.any(leaf):
            continue
        x, y = tree.grid.centers(l)
        inside = (
            (x[:, None] - center[0]) ** 2 + (y[None, :] - center[1]) ** 2 < radius_sq
        ) & leaf
        if np.any(inside):
            tree.values[field][l][inside] += amplitude
            hit += int(inside.sum())
    if hit:
        tree.project([field])
    return hit


def build_initial_tree(
    grid: GridSpec,
    field_fns: dict[str, Callable],
    eps_ref: float,
    stencil_width: int = 2,
    refine_rule: str = "coarsen",
) -> Tree:
    """Top-down creation of the initial tree.

    Starting from the root, every frontier leaf is split, the sons receive
    midpoint-quadrature averages of the initial data, and son groups whose
    details all fall below the level tolerance are discarded again; the
    process repeats until no sons survive or the finest level is reached.
    A final adapt() adds the safety zone and restores grading.
    """
    tree = Tree(grid, list(field_fns), eps_ref, stencil_width, refine_rule)
    averages = {
        f: [init_cell_averages(fn, l, grid) for l in range(grid.max_level + 1)]
        for f, fn in field_fns.items()
    }
    norms = {
        f: max(float(np.abs(a[grid.max_level]).max()), 0.0) for f, a in averages.items()
    }
    informative = [f for f in field_fns if norms[f] > 0.0]
    eps = threshold_schedule(eps_ref, grid.max_level)
    for f in field_fns:
        tree.values[f][0][:] = averages[f][0]
    for l in range(grid.max_level):
        frontier = tree.leaf_mask(l)
        if not np.any(frontier):
            break
        new = _up(frontier) & ~tree.exists[l + 1]
        tree.exists[l + 1] |= new
        for f in field_fns:
            tree.values[f][l + 1][new] = averages[f][l + 1][new]
        if not informative:
            keep = np.zeros_like(_down_any(new))
        else:
            _, _, details = tree.mr_sweep()
            stack = np.stack(
                [np.abs(details[f][l + 1]) / norms[f] for f in informative]
            )
            keep = _down_max(stack.max(axis=0)) >= eps[l + 1]
        drop = _up(~keep) & new
        tree.exists[l + 1][drop] = False
        for f in field_fns:
            tree.values[f][l + 1][drop] = 0.0
        if not np.any(tree.exists[l + 1]):
            break
    tree.project()
    tree.adapt()
    # safety-zone and grading creations were valued by prediction; the true
    # initial data is available, so re-evaluate every node from it
    for f in field_fns:
        for l in range(grid.max_level + 1):
            e = tree.exists[l]
            tree.values[f][l][e] = averages[f][l][e]
    tree.project()
    return tree


def write_leaf_dump(tree: Tree, path) -> None:
    """CSV leaf dump: level,i,j,x_center,y_center,v,u_e,w (one row per leaf,
    level-major, row-major within a level; u_e empty for monodomain runs)."""
    has_ue = "ue" in tree.values
    with open(path, "w") as fh:
        fh.write("level,i,j,x_center,y_center,v,u_e,w\n")
        for l in range(tree.max_level + 1):
            ii, jj = np.nonzero(tree.leaf_mask(l))
            if not ii.size:
                continue
            h = tree.grid.h(l)
            for a, b in zip(ii, jj):
                x = tree.grid.origin[0] + (a + 0.5) * h
                y = tree.grid.origin[1] + (b + 0.5) * h
                v = tree.values["v"][l][a, b]
                w = tree.values["w"][l][a, b]
                ue = repr(float(tree.values["ue"][l][a, b])) if has_ue else ""
                fh.write(f"{l},{a},{b},{x!r},{y!r},{v!r},{ue},{w!r}\n")
