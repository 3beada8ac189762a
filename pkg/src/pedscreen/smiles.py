"""Self-contained SMILES parsing onto molecular graphs, plus a writer.

Supported subset: organic-subset atoms (B, C, N, O, P, S, F, Cl, Br, I),
aromatic lowercase (b, c, n, o, p, s), bracket atoms with charges and
explicit H counts, bonds ``- = # :``, branches, ring closures ``1``-``9``
and ``%nn``, and dot-separated components. Stereo markers (``/ \\ @ @@``)
are accepted and discarded. Isotopes, wildcards and atom classes are
rejected as unsupported. Aromaticity is taken as written: no kekulization
or aromaticity perception happens, so corpora should be pre-normalized to
aromatic SMILES.

H counts inside brackets are parsed and dropped: graphs carry no hydrogen
bookkeeping, which is what scaffold identity wants.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import SmilesError


class BondOrder(Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    in_ring: bool = False


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder

    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.atoms)

    def adjacency(self) -> list[list[tuple[int, Bond]]]:
        adj: list[list[tuple[int, Bond]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond))
            adj[bond.b].append((bond.a, bond))
        return adj

    def degree(self, i: int) -> int:
        return sum(1 for b in self.bonds if b.a == i or b.b == i)


ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("b", "c", "n", "o", "p", "s", "se", "as")

# Periodic symbols accepted inside brackets (H through Rn plus lanthanides
# commonly seen in screening collections).
ELEMENTS = frozenset(
    """H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co
    Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te
    I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir
    Pt Au Hg Tl Pb Bi Po At Rn""".split()
)

_BOND_CHARS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE,
               "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC}


def _bridges(n_atoms: int, adjacency: list[list[tuple[int, Bond]]]) -> set[tuple[int, int]]:
    """Bridge edges (by sorted endpoint pair) via iterative lowlink DFS."""
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges: set[tuple[int, int]] = set()
    counter = 0
    for root in range(n_atoms):
        if disc[root] != -1:
            continue
        stack: list[tuple[int, int, Iterable]] = [(root, -1, iter(adjacency[root]))]
        disc[root] = low[root] = counter
        counter += 1
        while stack:
            node, parent, it = stack[-1]
            advanced = False
            for nbr, _bond in it:
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = counter
                    counter += 1
                    stack.append((nbr, node, iter(adjacency[nbr])))
                    advanced = True
                    break
                elif nbr != parent:
                    low[node] = min(low[node], disc[nbr])
            if not advanced:
                stack.pop()
                if stack:
                    pnode = stack[-1][0]
                    low[pnode] = min(low[pnode], low[node])
                    if low[node] > disc[pnode]:
                        bridges.add((node, pnode) if node < pnode else (pnode, node))
    return bridges


def compute_ring_membership(atoms: Sequence[Atom], bonds: Sequence[Bond]) -> tuple[Atom, ...]:
    """Return atoms with ``in_ring`` set from cycle detection on the bonds."""
    adj: list[list[tuple[int, Bond]]] = [[] for _ in atoms]
    for bond in bonds:
        adj[bond.a].append((bond.b, bond))
        adj[bond.b].append((bond.a, bond))
    bridges = _bridges(len(atoms), adj)
    in_ring = [False] * len(atoms)
    for bond in bonds:
        if bond.key() not in bridges:
            in_ring[bond.a] = True
            in_ring[bond.b] = True
    return tuple(replace(a, in_ring=flag) for a, flag in zip(atoms, in_ring))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self.bond_keys: set[tuple[int, int]] = set()
        self.anchor: Optional[int] = None
        self.branch_stack: list[tuple[int, int]] = []  # (anchor, open position)
        self.pending: Optional[BondOrder] = None
        self.pending_pos = 0
        # ring marker -> (atom index, explicit order or None, marker position)
        self.open_rings: dict[int, tuple[int, Optional[BondOrder], int]] = {}

    def fail(self, code: str, message: str, position: Optional[int] = None):
        raise SmilesError(code, message, self.pos if position is None else position)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        return ch

    # -- atoms ---------------------------------------------------------------

    def add_atom(self, atom: Atom):
        idx = len(self.atoms)
        self.atoms.append(atom)
        if self.anchor is not None:
            order = self.pending
            if order is None:
                order = (
                    BondOrder.AROMATIC
                    if self.atoms[self.anchor].aromatic and atom.aromatic
                    else BondOrder.SINGLE
                )
            self.add_bond(self.anchor, idx, order, self.pos - 1)
        elif self.pending is not None:
            self.fail("DANGLING_BOND", "bond symbol with no preceding atom", self.pending_pos)
        self.pending = None
        self.anchor = idx

    def add_bond(self, a: int, b: int, order: BondOrder, position: int):
        if a == b:
            self.fail("RING_SELF_BOND", "ring closure bonds an atom to itself", position)
        key = (a, b) if a < b else (b, a)
        if key in self.bond_keys:
            self.fail("DUPLICATE_BOND", f"bond between atoms {key[0]} and {key[1]} repeated",
                      position)
        self.bond_keys.add(key)
        self.bonds.append(Bond(a, b, order))

    def parse_bracket(self):
        start = self.pos
        self.take()  # consume '['
        end = self.text.find("]", self.pos)
        if end == -1:
            self.fail("UNMATCHED_BRACKET", "bracket atom missing ']'", start)
        body = self.text[self.pos:end]
        inner = 0

        def body_pos() -> int:
            return self.pos + inner

        if inner < len(body) and body[inner].isdigit():
            self.fail("UNSUPPORTED_FEATURE", "isotope labels are not supported", body_pos())
        if inner < len(body) and body[inner] == "*":
            self.fail("UNSUPPORTED_FEATURE", "wildcard atoms are not supported", body_pos())

        element = ""
        aromatic = False
        if inner < len(body) and body[inner].islower():
            for symbol in sorted(AROMATIC_BRACKET, key=len, reverse=True):
                if body.startswith(symbol, inner):
                    element, aromatic = symbol.capitalize(), True
                    inner += len(symbol)
                    break
            else:
                self.fail("UNKNOWN_ATOM", f"unknown aromatic symbol in {body!r}", body_pos())
        elif inner < len(body) and body[inner].isupper():
            symbol = body[inner]
            inner += 1
            if inner < len(body) and body[inner].islower() and symbol + body[inner] in ELEMENTS:
                symbol += body[inner]
                inner += 1
            element = symbol
        else:
            self.fail("UNKNOWN_ATOM", f"bracket atom {body!r} has no element symbol", body_pos())
        if element not in ELEMENTS:
            self.fail("UNKNOWN_ATOM", f"unknown element {element!r}", start + 1)

        # chirality: accepted, discarded
        if inner < len(body) and body[inner] == "@":
            inner += 1
            if inner < len(body) and body[inner] == "@":
                inner += 1
        # explicit hydrogen count: parsed, dropped (no H bookkeeping)
        if inner < len(body) and body[inner] == "H":
            inner += 1
            while inner < len(body) and body[inner].isdigit():
                inner += 1
        charge = 0
        if inner < len(body) and body[inner] in "+-":
            sign = 1 if body[inner] == "+" else -1
            symbol = body[inner]
            inner += 1
            digits = ""
            while inner < len(body) and body[inner].isdigit():
                digits += body[inner]
                inner += 1
            if digits:
                charge = sign * int(digits)
            else:
                charge = sign
                while inner < len(body) and body[inner] == symbol:
                    charge += sign
                    inner += 1
        if inner < len(body) and body[inner] == ":":
            self.fail("UNSUPPORTED_FEATURE", "atom class labels are not supported", body_pos())
        if inner != len(body):
            self.fail("BAD_BRACKET", f"unparsed bracket content {body[inner:]!r}", body_pos())

        self.pos = end + 1
        self.add_atom(Atom(element=element, aromatic=aromatic, charge=charge))

    # -- ring closures ---------------------------------------------------------

    def close_ring(self, marker: int, position: int):
        if marker in self.open_rings:
            other, other_order, _ = self.open_rings.pop(marker)
            order = self.pending
            if order is not None and other_order is not None and order is not other_order:
                self.fail("RING_BOND_MISMATCH",
                          f"ring closure {marker} written with conflicting bond orders",
                          position)
            if order is None:
                order = other_order
            if order is None:
                order = (
                    BondOrder.AROMATIC
                    if self.atoms[other].aromatic and self.atoms[self.anchor].aromatic
                    else BondOrder.SINGLE
                )
            self.add_bond(other, self.anchor, order, position)
            self.pending = None
        else:
            if self.anchor is None:
                self.fail("UNPAIRED_RING_CLOSURE", "ring marker before any atom", position)
            self.open_rings[marker] = (self.anchor, self.pending, position)
            self.pending = None

    # -- main loop ---------------------------------------------------------------

    def run(self) -> MolGraph:
        text = self.text
        while self.pos < len(text):
            ch = self.peek()
            if ch == "[":
                self.parse_bracket()
            elif ch.isupper():
                two = text[self.pos:self.pos + 2]
                if two in ("Cl", "Br"):
                    self.pos += 2
                    self.add_atom(Atom(element=two))
                elif ch in "BCNOPSFI":
                    self.pos += 1
                    self.add_atom(Atom(element=ch))
                else:
                    self.fail("UNKNOWN_ATOM", f"unknown atom symbol {ch!r}")
            elif ch in AROMATIC_ORGANIC:
                self.pos += 1
                self.add_atom(Atom(element=ch.upper(), aromatic=True))
            elif ch.isalpha():
                self.fail("UNKNOWN_ATOM", f"unknown atom symbol {ch!r}")
            elif ch in _BOND_CHARS:
                if self.pending is not None:
                    self.fail("DANGLING_BOND", "two bond symbols in a row")
                self.pending = _BOND_CHARS[ch]
                self.pending_pos = self.pos
                self.pos += 1
            elif ch in "/\\":
                # cis/trans markers carry a single bond; geometry is discarded
                if self.pending is None:
                    self.pending = BondOrder.SINGLE
                    self.pending_pos = self.pos
                self.pos += 1
            elif ch.isdigit():
                self.close_ring(int(ch), self.pos)
                self.pos += 1
            elif ch == "%":
                start = self.pos
                digits = text[self.pos + 1:self.pos + 3]
                if len(digits) != 2 or not digits.isdigit():
                    self.fail("UNPAIRED_RING_CLOSURE", "%% needs two digits", start)
                self.close_ring(int(digits), start)
                self.pos += 3
            elif ch == "(":
                if self.anchor is None:
                    self.fail("UNMATCHED_PAREN", "branch opened before any atom")
                if self.pending is not None:
                    self.fail("DANGLING_BOND", "bond symbol before '('", self.pending_pos)
                self.branch_stack.append((self.anchor, self.pos))
                self.pos += 1
            elif ch == ")":
                if not self.branch_stack:
                    self.fail("UNMATCHED_PAREN", "')' without matching '('")
                if self.pending is not None:
                    self.fail("DANGLING_BOND", "bond symbol before ')'", self.pending_pos)
                self.anchor, _ = self.branch_stack.pop()
                self.pos += 1
            elif ch == ".":
                if self.pending is not None:
                    self.fail("DANGLING_BOND", "bond symbol before '.'", self.pending_pos)
                if self.branch_stack:
                    self.fail("UNMATCHED_PAREN", "'.' inside an open branch")
                self.anchor = None
                self.pos += 1
            elif ch == "*":
                self.fail("UNSUPPORTED_FEATURE", "wildcard atoms are not supported")
            elif ch in "@":
                self.fail("UNSUPPORTED_FEATURE", "stereo marker outside a bracket atom")
            else:
                self.fail("UNSUPPORTED_FEATURE", f"unsupported character {ch!r}")

        if self.pending is not None:
            self.fail("DANGLING_BOND", "trailing bond symbol", self.pending_pos)
        if self.branch_stack:
            self.fail("UNMATCHED_PAREN", "unclosed '('", self.branch_stack[-1][1])
        if self.open_rings:
            marker, (_, _, position) = min(
                self.open_rings.items(), key=lambda kv: kv[1][2]
            )
            self.fail("UNPAIRED_RING_CLOSURE", f"ring closure {marker} never closed", position)
        atoms = compute_ring_membership(self.atoms, self.bonds)
        return MolGraph(atoms=atoms, bonds=tuple(self.bonds), source=self.text)


def parse_smiles(text: str) -> MolGraph:
    """Parse a SMILES string into a molecular graph with ring flags set."""
    if not text:
        raise SmilesError("EMPTY_SMILES", "empty SMILES string", 0)
    return _Parser(text).run()


# --- writer --------------------------------------------------------------------


def _atom_token(atom: Atom) -> str:
    symbol = atom.element.lower() if atom.aromatic else atom.element
    plain_ok = (
        atom.charge == 0
        and (
            (atom.aromatic and symbol in AROMATIC_ORGANIC)
            or (not atom.aromatic and atom.element in ORGANIC_SUBSET)
        )
    )
    if plain_ok:
        return symbol
    if atom.charge == 0:
        charge = ""
    elif atom.charge == 1:
        charge = "+"
    elif atom.charge == -1:
        charge = "-"
    elif atom.charge > 0:
        charge = f"+{atom.charge}"
    else:
        charge = str(atom.charge)
    return f"[{symbol}{charge}]"


def _bond_token(bond: Bond, atoms: Sequence[Atom]) -> str:
    both_aromatic = atoms[bond.a].aromatic and atoms[bond.b].aromatic
    if bond.order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    if bond.order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    return "=" if bond.order is BondOrder.DOUBLE else "#"


def _components(g: MolGraph) -> list[list[int]]:
    adj = g.adjacency()
    seen = [False] * len(g.atoms)
    comps = []
    for start in range(len(g.atoms)):
        if seen[start]:
            continue
        comp = []
        queue = [start]
        seen[start] = True
        while queue:
            node = queue.pop()
            comp.append(node)
            for nbr, _ in adj[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    queue.append(nbr)
        comps.append(sorted(comp))
    return comps


def write_component(g: MolGraph, component: Sequence[int],
                    priority: dict[int, float]) -> str:
    """Serialize one connected component as SMILES.

    DFS starts at the component's minimum-priority atom and visits neighbors
    in ascending priority; ring-closure markers are assigned in encounter
    order. The output reparses to an isomorphic graph whatever priorities are
    supplied, which is what canonicalization and the shuffle tests rely on.
    """
    adj = g.adjacency()
    start = min(component, key=lambda i: (priority[i], i))

    def ordered(node: int):
        return iter(sorted(adj[node], key=lambda p: (priority[p[0]], p[0])))

    # Depth-first tree/ring split in priority order: chains thread without
    # branching, back edges become ring closures in encounter order.
    children: dict[int, list[int]] = {i: [] for i in component}
    ring_bonds: list[Bond] = []
    visited = {start}
    seen_edges: set[tuple[int, int]] = set()
    stack: list[tuple[int, Iterable]] = [(start, ordered(start))]
    while stack:
        node, neighbors = stack[-1]
        advanced = False
        for nbr, bond in neighbors:
            if bond.key() in seen_edges:
                continue
            seen_edges.add(bond.key())
            if nbr in visited:
                ring_bonds.append(bond)
                continue
            visited.add(nbr)
            children[node].append(nbr)
            stack.append((nbr, ordered(nbr)))
            advanced = True
            break
        if not advanced:
            stack.pop()

    ring_markers: dict[int, list[tuple[int, Bond]]] = {i: [] for i in component}
    for marker, bond in enumerate(ring_bonds, start=1):
        ring_markers[bond.a].append((marker, bond))
        ring_markers[bond.b].append((marker, bond))

    opened: set[int] = set()

    def marker_token(marker: int) -> str:
        return str(marker) if marker < 10 else f"%{marker:02d}"

    def emit(node: int) -> str:
        parts = [_atom_token(g.atoms[node])]
        for marker, bond in ring_markers[node]:
            if marker not in opened:
                opened.add(marker)
                parts.append(_bond_token(bond, g.atoms) + marker_token(marker))
            else:
                parts.append(marker_token(marker))
        kids = children[node]
        for pos, kid in enumerate(kids):
            bond = next(b for n, b in adj[node] if n == kid)
            text = _bond_token(bond, g.atoms) + emit(kid)
            if pos < len(kids) - 1:
                parts.append(f"({text})")
            else:
                parts.append(text)
        return "".join(parts)

    return emit(start)


def write_graph(g: MolGraph, priority: Optional[dict[int, float]] = None) -> str:
    """SMILES for the whole graph; components joined with ``.``."""
    if not g.atoms:
        return ""
    if priority is None:
        priority = {i: float(i) for i in range(len(g.atoms))}
    return ".".join(write_component(g, comp, priority) for comp in _components(g))


def shuffled_serialization(g: MolGraph, rng: random.Random) -> str:
    """Random-priority serialization; exercises writer/parser robustness."""
    order = list(range(len(g.atoms)))
    rng.shuffle(order)
    priority = {atom: float(rank) for rank, atom in enumerate(order)}
    return write_graph(g, priority)
