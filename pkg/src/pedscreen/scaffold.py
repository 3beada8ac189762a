"""Ring-linker (Bemis-Murcko style) scaffolds and canonical scaffold keys.

The scaffold of a molecule is what remains after iteratively deleting
degree-1 atoms that are neither in a ring nor double/triple-bonded to a
retained atom: the union of ring systems and the linkers connecting them,
with exocyclic multiply-bonded atoms kept. Ring-free molecules reduce to the
empty graph and map to the sentinel key ``ACYCLIC``.

Scaffold keys are canonical SMILES produced by iterative neighborhood
refinement (initial invariant: element, aromatic flag, charge, degree) with
complete tie-breaking: every member of the first tied cell is promoted in
turn and the lexicographically smallest serialization wins, so the key is
invariant under any relabeling of the input graph. Stereo and explicit
hydrogens never reach the key.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .errors import SmilesError
from .smiles import (
    Atom,
    Bond,
    BondOrder,
    MolGraph,
    compute_ring_membership,
    parse_smiles,
    write_component,
)

ACYCLIC_KEY = "ACYCLIC"
PARSE_FAIL_PREFIX = "PARSE_FAIL:"

_MULTIPLE = (BondOrder.DOUBLE, BondOrder.TRIPLE)


def murcko_atom_indices(g: MolGraph) -> list[int]:
    """Indices of the atoms that survive scaffold pruning, in input order."""
    n = len(g.atoms)
    adj = g.adjacency()

    alive = [False] * n
    # Components without any ring atom are side-chain-only: dropped whole.
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        component = []
        queue = [start]
        seen[start] = True
        while queue:
            node = queue.pop()
            component.append(node)
            for nbr, _ in adj[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    queue.append(nbr)
        if any(g.atoms[i].in_ring for i in component):
            for i in component:
                alive[i] = True

    while True:
        removable = []
        for i in range(n):
            if not alive[i] or g.atoms[i].in_ring:
                continue
            live_bonds = [(nbr, bond) for nbr, bond in adj[i] if alive[nbr]]
            if len(live_bonds) != 1:
                continue
            if live_bonds[0][1].order not in _MULTIPLE:
                removable.append(i)
        if not removable:
            break
        for i in removable:
            alive[i] = False
    return [i for i in range(n) if alive[i]]


def murcko_scaffold(g: MolGraph) -> MolGraph:
    """Scaffold subgraph of ``g``; the empty graph for ring-free input."""
    keep = murcko_atom_indices(g)
    remap = {old: new for new, old in enumerate(keep)}
    atoms = [g.atoms[i] for i in keep]
    bonds = [
        Bond(remap[b.a], remap[b.b], b.order)
        for b in g.bonds
        if b.a in remap and b.b in remap
    ]
    atoms = compute_ring_membership(atoms, bonds)
    return MolGraph(atoms=tuple(atoms), bonds=tuple(bonds), source=g.source)


# --- canonical keys -------------------------------------------------------------

_ORDER_CODE = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2,
               BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}


def _dense_ranks(keys: Sequence) -> list[int]:
    translate = {key: rank for rank, key in enumerate(sorted(set(keys)))}
    return [translate[key] for key in keys]


def _refine(adj: list[list[tuple[int, Bond]]], ranks: list[int]) -> list[int]:
    """Iterate neighborhood signatures to a stable partition."""
    while True:
        signatures = [
            (
                ranks[i],
                tuple(sorted((_ORDER_CODE[bond.order], ranks[nbr]) for nbr, bond in adj[i])),
            )
            for i in range(len(ranks))
        ]
        refined = _dense_ranks(signatures)
        if refined == ranks:
            return ranks
        ranks = refined


def _canonical_search(g: MolGraph, adj, ranks: list[int]) -> str:
    cells: dict[int, list[int]] = {}
    for i, rank in enumerate(ranks):
        cells.setdefault(rank, []).append(i)
    tied = sorted(rank for rank, members in cells.items() if len(members) > 1)
    if not tied:
        priority = {i: float(rank) for i, rank in enumerate(ranks)}
        return write_component(g, list(range(len(g.atoms))), priority)
    best: Optional[str] = None
    # Promote each member of the first tied cell; the minimum serialization
    # over all branches is relabeling-invariant.
    for atom in cells[tied[0]]:
        keyed = [(rank, 0 if i == atom else 1) for i, rank in enumerate(ranks)]
        candidate = _canonical_search(g, adj, _refine(adj, _dense_ranks(keyed)))
        if best is None or candidate < best:
            best = candidate
    return best


def _component_subgraph(g: MolGraph, indices: list[int]) -> MolGraph:
    remap = {old: new for new, old in enumerate(indices)}
    atoms = tuple(g.atoms[i] for i in indices)
    bonds = tuple(
        Bond(remap[b.a], remap[b.b], b.order)
        for b in g.bonds
        if b.a in remap and b.b in remap
    )
    return MolGraph(atoms=atoms, bonds=bonds, source=g.source)


def canonical_key(g: MolGraph) -> str:
    """Canonical scaffold SMILES, or ``ACYCLIC`` for the empty graph.

    Disconnected components are canonicalized independently, sorted, and
    joined with ``.``. Explicit hydrogen atoms are dropped first.
    """
    kept = [i for i, atom in enumerate(g.atoms) if atom.element != "H"]
    if len(kept) != len(g.atoms):
        g = _component_subgraph(g, kept)
    if not g.atoms:
        return ACYCLIC_KEY

    adj_full = g.adjacency()
    seen = [False] * len(g.atoms)
    pieces = []
    for start in range(len(g.atoms)):
        if seen[start]:
            continue
        component = []
        queue = [start]
        seen[start] = True
        while queue:
            node = queue.pop()
            component.append(node)
            for nbr, _ in adj_full[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    queue.append(nbr)
        sub = _component_subgraph(g, sorted(component))
        adj = sub.adjacency()
        initial = [
            (atom.element, atom.aromatic, atom.charge, len(adj[i]))
            for i, atom in enumerate(sub.atoms)
        ]
        ranks = _refine(adj, _dense_ranks(initial))
        pieces.append(_canonical_search(sub, adj, ranks))
    return ".".join(sorted(pieces))


def scaffold_of(smiles: str) -> str:
    """Parse, reduce to the scaffold, canonicalize. Parse errors propagate."""
    return canonical_key(murcko_scaffold(parse_smiles(smiles)))


def scaffold_key_or_sentinel(mol_id: str, smiles: Optional[str]) -> str:
    """Scaffold key for analytics pipelines; parse failures become singleton
    sentinel keys instead of aborting a run."""
    if not smiles:
        return f"{PARSE_FAIL_PREFIX}{mol_id}"
    try:
        return scaffold_of(smiles)
    except SmilesError:
        return f"{PARSE_FAIL_PREFIX}{mol_id}"
