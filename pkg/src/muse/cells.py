"""Relaxed cell chains: mixed operators, discretization, pruning.

A chain is one fusion cell followed by transformation cells. Each
searched edge carries a logit vector over its candidate operators; the
edge's output is the softmax-weighted sum of all candidate outputs.
Discretization keeps the argmax operator per edge (with its trained
parameters); pruning drops the lowest-weight operator per edge and
keeps the surviving logits.

Topologies:

* ``chain`` (default): cell j has exactly one incoming edge (j-1, j);
* ``dag``: cell j sums the mixed outputs of every edge (i, j), i < j.
  A subset of dag edges can be retained to mask the rest; masking down
  to the chain edges reproduces chain forward bit-exactly.

Linear chains fuse two projected vectors through a searched fusion
edge, written ``edge(-1,0)``. Sequence chains fuse by concatenating the
two projected position lists along the sequence axis; that fusion is
structural (single mandatory operator, never searched or pruned).
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from . import rng
from .errors import ConfigError, ContractError, RegistryError
from .searchspace import instantiate, operator_names

__all__ = ["ArchWeights", "CellChain", "DiscreteChain", "mixed_op", "genotype_lines"]

FUSION_EDGE = (-1, 0)


def _edge_tag(edge: tuple[int, int]) -> str:
    return f"e({edge[0]},{edge[1]})"


class ArchWeights:
    """Per-edge operator logits; softmax per edge gives mixture weights."""

    def __init__(self, seed: int, name: str, edge_sizes: dict[tuple[int, int], int]):
        self.name = name
        self.logits: dict[tuple[int, int], ag.Tensor] = {}
        for edge, n_ops in edge_sizes.items():
            if n_ops < 1:
                raise ConfigError(f"edge {edge} has no operators")
            g = rng.stream(seed, f"{name}.alpha.{_edge_tag(edge)}")
            self.logits[edge] = ag.parameter(1e-3 * g.standard_normal(n_ops))

    @classmethod
    def from_values(cls, name: str, values: dict[tuple[int, int], np.ndarray]) -> "ArchWeights":
        aw = cls.__new__(cls)
        aw.name = name
        aw.logits = {e: ag.parameter(np.asarray(v, dtype=np.float64).copy()) for e, v in values.items()}
        return aw

    def weights(self, edge: tuple[int, int]) -> ag.Tensor:
        return ag.softmax(self.logits[edge], axis=0)

    def weight_values(self, edge: tuple[int, int]) -> np.ndarray:
        with ag.no_grad():
            return self.weights(edge).values

    def parameters(self) -> dict[str, ag.Tensor]:
        return {f"{self.name}.alpha.{_edge_tag(e)}": t for e, t in self.logits.items()}


def _is_seq(value) -> bool:
    return isinstance(value, list)


def _weighted_sum(outs: list, coeffs: list[ag.Tensor]):
    if _is_seq(outs[0]):
        length = len(outs[0])
        result = []
        for pos in range(length):
            acc = ag.smul(outs[0][pos], coeffs[0])
            for o in range(1, len(outs)):
                acc = ag.add(acc, ag.smul(outs[o][pos], coeffs[o]))
            result.append(acc)
        return result
    acc = ag.smul(outs[0], coeffs[0])
    for o in range(1, len(outs)):
        acc = ag.add(acc, ag.smul(outs[o], coeffs[o]))
    return acc


def mixed_op(h, logits: ag.Tensor, operators: list):
    """Softmax(logits)-weighted sum of every operator applied to h.

    h may be a single tensor, a tuple of tensors (fusion input pair), or
    a position list (sequence input). Differentiable in the logits and
    in every operator parameter.
    """
    if not operators:
        raise ConfigError("mixed_op needs at least one operator")
    if logits.numel != len(operators):
        raise ConfigError(f"{logits.numel} logits for {len(operators)} operators")
    w = ag.reshape(ag.softmax(logits, axis=0), (len(operators), 1))
    coeffs = [ag.row_slice(w, o, o + 1) for o in range(len(operators))]
    outs = [op(*h) if isinstance(h, tuple) else op(h) for op in operators]
    return _weighted_sum(outs, coeffs)


def _sum_hidden(values: list):
    if _is_seq(values[0]):
        length = len(values[0])
        return [
            values[0][pos] if len(values) == 1
            else _fold_add([v[pos] for v in values])
            for pos in range(length)
        ]
    return _fold_add(values)


def _fold_add(ts: list[ag.Tensor]) -> ag.Tensor:
    acc = ts[0]
    for t in ts[1:]:
        acc = ag.add(acc, t)
    return acc


class CellChain:
    """A searchable chain of one fusion cell plus transformation cells."""

    def __init__(
        self,
        kind: str,
        d_h: int,
        n_cells: int,
        seed: int,
        name: str,
        topology: str = "chain",
        fusion_names: tuple[str, ...] | None = None,
        transform_names: tuple[str, ...] | None = None,
        retained_edges: set[tuple[int, int]] | None = None,
    ):
        if kind not in ("linear", "sequence"):
            raise ConfigError(f"unknown chain kind {kind!r}")
        if topology not in ("chain", "dag"):
            raise ConfigError(f"unknown topology {topology!r}")
        if n_cells < 1:
            raise ConfigError(f"chain needs at least the fusion cell, got n_cells={n_cells}")
        self.kind = kind
        self.d_h = d_h
        self.n_cells = n_cells
        self.name = name
        self.topology = topology
        transform_kind = "linear_transform" if kind == "linear" else "seq_transform"
        self.transform_kind = transform_kind
        if transform_names is None:
            transform_names = operator_names(transform_kind)
        if fusion_names is None:
            fusion_names = operator_names("fusion")
        for t in transform_names:
            if t not in operator_names(transform_kind):
                raise RegistryError(f"unknown {transform_kind} operator {t!r}")
        for f in fusion_names:
            if f not in operator_names("fusion"):
                raise RegistryError(f"unknown fusion operator {f!r}")

        if topology == "chain":
            edges = [(i, i + 1) for i in range(n_cells - 1)]
        else:
            edges = [(i, j) for j in range(1, n_cells) for i in range(j)]
        if retained_edges is not None:
            if topology != "dag":
                raise ConfigError("retained_edges applies to dag topology only")
            edges = [e for e in edges if e in retained_edges]
        self.transform_edges: list[tuple[int, int]] = edges
        self._validate_connectivity()

        self.ops_by_edge: dict[tuple[int, int], list] = {}
        edge_sizes: dict[tuple[int, int], int] = {}
        if kind == "linear":
            self.fusion_op_names = tuple(fusion_names)
            self.ops_by_edge[FUSION_EDGE] = [
                instantiate("fusion", f, d_h, seed, f"{name}.{_edge_tag(FUSION_EDGE)}.{f}")
                for f in fusion_names
            ]
            edge_sizes[FUSION_EDGE] = len(fusion_names)
        else:
            self.fusion_op_names = ("Concat",)  # structural sequence-axis concat
        for e in self.transform_edges:
            self.ops_by_edge[e] = [
                instantiate(transform_kind, t, d_h, seed, f"{name}.{_edge_tag(e)}.{t}")
                for t in transform_names
            ]
            edge_sizes[e] = len(transform_names)
        self.transform_op_names = tuple(transform_names)
        self.arch = ArchWeights(seed, name, edge_sizes)

    def _validate_connectivity(self) -> None:
        if self.n_cells == 1:
            return
        reachable = {0}
        for _ in range(self.n_cells):
            for (i, j) in self.transform_edges:
                if i in reachable:
                    reachable.add(j)
        if self.n_cells - 1 not in reachable:
            raise ConfigError("final cell is unreachable with the retained edges")
        for (i, j) in self.transform_edges:
            if i not in reachable:
                raise ConfigError(f"edge ({i},{j}) hangs from unreachable cell {i}")

    @property
    def searched_edges(self) -> list[tuple[int, int]]:
        edges = []
        if self.kind == "linear":
            edges.append(FUSION_EDGE)
        edges.extend(self.transform_edges)
        return edges

    def forward(self, a, b):
        """a, b: (B, D_h) tensors for linear chains; position lists for sequence."""
        if self.kind == "linear":
            hidden = {0: mixed_op((a, b), self.arch.logits[FUSION_EDGE], self.ops_by_edge[FUSION_EDGE])}
        else:
            hidden = {0: list(a) + list(b)}
        for j in range(1, self.n_cells):
            contributions = [
                mixed_op(hidden[i], self.arch.logits[(i, j)], self.ops_by_edge[(i, j)])
                for (i, jj) in self.transform_edges
                if jj == j and i in hidden
            ]
            if contributions:
                hidden[j] = _sum_hidden(contributions)
        return hidden[self.n_cells - 1]

    def parameters(self) -> dict[str, ag.Tensor]:
        named: dict[str, ag.Tensor] = {}
        for ops in self.ops_by_edge.values():
            for op in ops:
                named.update(op.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return self.arch.parameters()

    def op_names(self, edge: tuple[int, int]) -> tuple[str, ...]:
        return tuple(op.name for op in self.ops_by_edge[edge])

    def discretize(self) -> "DiscreteChain":
        """Keep the argmax operator per searched edge, with its parameters.

        Ties break to the lowest operator index.
        """
        chosen: dict[tuple[int, int], object] = {}
        for edge in self.searched_edges:
            weights = self.arch.weight_values(edge)
            chosen[edge] = self.ops_by_edge[edge][int(np.argmax(weights))]
        return DiscreteChain(self, chosen)

    def prunable_edges(self, kind: str | None = None) -> list[tuple[int, int]]:
        if kind is None:
            return self.searched_edges
        if kind == "fusion":
            return [FUSION_EDGE] if self.kind == "linear" else []
        if kind == self.transform_kind:
            return list(self.transform_edges)
        return []

    def prune_lowest(self, kind: str | None = None) -> "CellChain":
        """Drop the lowest-softmax-weight operator on each targeted edge.

        kind=None targets every searched edge; naming an operator kind
        restricts pruning to its edges (the ablation loop prunes one
        kind at a time since edge sizes differ). Surviving operators
        keep their parameter tensors (warm start) and surviving logits
        keep their values.
        """
        targets = self.prunable_edges(kind)
        if not targets:
            raise ContractError(f"chain {self.name!r} has no {kind!r} edges to prune")
        for edge in targets:
            if len(self.ops_by_edge[edge]) < 2:
                raise ContractError(f"edge {_edge_tag(edge)} is down to one operator; cannot prune")
        clone = object.__new__(CellChain)
        clone.kind = self.kind
        clone.d_h = self.d_h
        clone.n_cells = self.n_cells
        clone.name = self.name
        clone.topology = self.topology
        clone.transform_kind = self.transform_kind
        clone.transform_edges = list(self.transform_edges)
        clone.fusion_op_names = self.fusion_op_names
        clone.ops_by_edge = {}
        logit_values: dict[tuple[int, int], np.ndarray] = {}
        for edge in self.searched_edges:
            if edge in targets:
                weights = self.arch.weight_values(edge)
                drop = int(np.argmin(weights))
                clone.ops_by_edge[edge] = [op for o, op in enumerate(self.ops_by_edge[edge]) if o != drop]
                logit_values[edge] = np.delete(self.arch.logits[edge].values, drop)
            else:
                clone.ops_by_edge[edge] = list(self.ops_by_edge[edge])
                logit_values[edge] = self.arch.logits[edge].values.copy()
        if self.kind == "linear":
            clone.fusion_op_names = tuple(op.name for op in clone.ops_by_edge[FUSION_EDGE])
        if clone.transform_edges:
            first = clone.transform_edges[0]
            clone.transform_op_names = tuple(op.name for op in clone.ops_by_edge[first])
        else:
            clone.transform_op_names = ()
        clone.arch = ArchWeights.from_values(self.name, logit_values)
        return clone

    def genotype(self) -> list[str]:
        lines = [f"# {self.kind} topology={self.topology}"]
        if self.kind == "sequence":
            lines.append(f"{_edge_tag(FUSION_EDGE)}: Concat [1.000000]")
        for edge in self.searched_edges:
            weights = self.arch.weight_values(edge)
            best = self.ops_by_edge[edge][int(np.argmax(weights))].name
            wtxt = ", ".join(f"{w:.6f}" for w in weights)
            lines.append(f"{_edge_tag(edge)}: {best} [{wtxt}]")
        return lines


class DiscreteChain:
    """A chain with exactly one operator per edge and no mixture weights."""

    def __init__(self, source: CellChain, chosen: dict[tuple[int, int], object]):
        self.kind = source.kind
        self.d_h = source.d_h
        self.n_cells = source.n_cells
        self.name = source.name
        self.topology = source.topology
        self.transform_edges = list(source.transform_edges)
        self.chosen = chosen
        self.arch = None

    def forward(self, a, b):
        if self.kind == "linear":
            hidden = {0: self.chosen[FUSION_EDGE](a, b)}
        else:
            hidden = {0: list(a) + list(b)}
        for j in range(1, self.n_cells):
            contributions = [
                self.chosen[(i, j)](hidden[i])
                for (i, jj) in self.transform_edges
                if jj == j and i in hidden
            ]
            if contributions:
                hidden[j] = _sum_hidden(contributions)
        return hidden[self.n_cells - 1]

    def parameters(self) -> dict[str, ag.Tensor]:
        named: dict[str, ag.Tensor] = {}
        for op in self.chosen.values():
            named.update(op.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return {}

    def chosen_names(self) -> dict[tuple[int, int], str]:
        return {e: op.name for e, op in self.chosen.items()}

    def genotype(self) -> list[str]:
        lines = [f"# {self.kind} topology={self.topology} (discrete)"]
        if self.kind == "sequence":
            lines.append(f"{_edge_tag(FUSION_EDGE)}: Concat")
        for edge, op in self.chosen.items():
            lines.append(f"{_edge_tag(edge)}: {op.name}")
        return lines


def genotype_lines(*chains) -> str:
    lines: list[str] = []
    for chain in chains:
        lines.extend(chain.genotype())
    return "\n".join(lines)
