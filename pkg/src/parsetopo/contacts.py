"""Contact maps and the separated contact / non-contact pair classes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from .errors import ContactError, EmptyPairClassError

__all__ = [
    "ContactSource",
    "ContactMap",
    "PairSets",
    "extract_from_pdb",
    "representative_coordinates",
    "contacts_from_coordinates",
    "load_contact_list",
    "read_contact_file",
    "format_contact_list",
    "build_pair_sets",
]

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 8.0
DEFAULT_SEPARATION = 5
ATOM_POLICY = "CB, CA fallback"


@dataclass(frozen=True)
class ContactSource:
    origin: str = ""
    cutoff: Optional[float] = None
    atom_policy: Optional[str] = None


@dataclass(frozen=True)
class ContactMap:
    """Residue count plus the set of unordered residue pairs in contact.

    Pairs are stored as ``(i, j)`` with ``i < j``.  ``excluded`` lists
    residues that had no usable representative atom; they keep their index
    but take part in no pair class.
    """

    n_residues: int
    contacts: frozenset
    excluded: frozenset = frozenset()
    source: ContactSource = field(default_factory=ContactSource)

    def __post_init__(self):
        n = self.n_residues
        if n < 1:
            raise ContactError("n_residues must be positive")
        norm = set()
        for a, b in self.contacts:
            a, b = int(a), int(b)
            if a == b:
                raise ContactError(f"self-contact ({a}, {a})")
            if not (0 <= a < n and 0 <= b < n):
                raise ContactError(f"contact ({a}, {b}) out of range for n={n}")
            norm.add((min(a, b), max(a, b)))
        for k in self.excluded:
            if not 0 <= k < n:
                raise ContactError(f"excluded residue {k} out of range for n={n}")
        object.__setattr__(self, "contacts", frozenset(norm))
        object.__setattr__(self, "excluded", frozenset(int(k) for k in self.excluded))

    def sorted_contacts(self) -> list:
        return sorted(self.contacts)


@dataclass(frozen=True)
class PairSets:
    """Admissible pairs (separation >= L) split into contacts and non-contacts."""

    L: int
    n_residues: int
    pc: frozenset
    pnc: frozenset

    @property
    def admissible(self) -> frozenset:
        return self.pc | self.pnc


# -- PDB -------------------------------------------------------------------


def _pdb_float(line: str, lo: int, hi: int, lineno: int) -> float:
    try:
        return float(line[lo:hi])
    except ValueError:
        raise ContactError(
            f"line {lineno}: malformed coordinate field {line[lo:hi]!r}"
        ) from None


def _read_models(pdb_text: str) -> list:
    """ATOM records grouped by model, as ``(lineno, line)`` lists.

    A file without MODEL records is one model.
    """
    lines = pdb_text.splitlines()
    if not any(line.startswith("MODEL") for line in lines):
        block = [(n, line) for n, line in enumerate(lines, 1) if line[:6] == "ATOM  "]
        return [block] if block else []
    models: list = []
    current = None
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("MODEL"):
            current = []
            models.append(current)
        elif line.startswith("ENDMDL"):
            current = None
        elif line[:6] == "ATOM  " and current is not None:
            current.append((lineno, line))
    return [m for m in models if m]


def representative_coordinates(
    pdb_text: str, chain: Optional[str] = None, model: int = 1
) -> Tuple[np.ndarray, list]:
    """Per-residue representative atom coordinates for one chain.

    Returns an ``(n, 3)`` array (CB, else CA; NaN rows for residues with
    neither) and the list of excluded residue indices.  Residues are indexed
    0..n-1 in the order their records appear; ``model`` is the 1-based
    ordinal of the MODEL block and ``chain=None`` picks the model's first
    chain.
    """
    models = _read_models(pdb_text)
    if not models:
        raise ContactError("no parsable ATOM records")
    if not 1 <= model <= len(models):
        raise ContactError(f"model {model} not found ({len(models)} present)")
    records = models[model - 1]
    if chain is None:
        chain = records[0][1][21:22]
    records = [(n, line) for n, line in records if line[21:22] == chain]
    if not records:
        raise ContactError(f"chain {chain!r} not found")

    order: list = []
    atoms: dict = {}
    for lineno, line in records:
        if len(line) < 54:
            raise ContactError(f"line {lineno}: ATOM record too short for coordinates")
        key = (line[22:26], line[26:27])
        if key not in atoms:
            atoms[key] = {}
            order.append(key)
        name = line[12:16].strip()
        if name not in ("CA", "CB") or name in atoms[key]:
            # first-listed altloc wins
            continue
        atoms[key][name] = (
            _pdb_float(line, 30, 38, lineno),
            _pdb_float(line, 38, 46, lineno),
            _pdb_float(line, 46, 54, lineno),
        )

    coords = np.full((len(order), 3), np.nan)
    excluded = []
    for i, key in enumerate(order):
        found = atoms[key]
        xyz = found.get("CB", found.get("CA"))
        if xyz is None:
            excluded.append(i)
            log.warning(
                "residue %d (%s%s) has neither CB nor CA; excluded",
                i, key[0].strip(), key[1].strip(),
            )
        else:
            coords[i] = xyz
    return coords, excluded


def contacts_from_coordinates(coords: np.ndarray, cutoff: float) -> frozenset:
    """Pairs ``(i, j)``, ``i < j``, whose points are closer than ``cutoff``.

    Rows containing NaN never take part in a contact.
    """
    coords = np.asarray(coords, dtype=float)
    ok = np.flatnonzero(~np.isnan(coords).any(axis=1))
    if len(ok) < 2:
        return frozenset()
    sub = coords[ok]
    dist = np.sqrt(((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=-1))
    a, b = np.nonzero(np.triu(dist < cutoff, k=1))
    return frozenset((int(ok[i]), int(ok[j])) for i, j in zip(a, b))


def extract_from_pdb(
    pdb_text: str,
    chain: Optional[str] = None,
    model: int = 1,
    cutoff: float = DEFAULT_CUTOFF,
    origin: str = "",
) -> ContactMap:
    """Contact map from fixed-column PDB ATOM records.

    Residues ``i`` and ``j`` are in contact when their representative atoms
    (CB, or CA when CB is missing) are closer than ``cutoff`` angstroms,
    strictly.  See :func:`representative_coordinates` for indexing.
    """
    if not cutoff > 0:
        raise ContactError(f"cutoff must be positive, got {cutoff}")
    coords, excluded = representative_coordinates(pdb_text, chain, model)
    return ContactMap(
        n_residues=len(coords),
        contacts=contacts_from_coordinates(coords, cutoff),
        excluded=frozenset(excluded),
        source=ContactSource(origin=origin, cutoff=float(cutoff), atom_policy=ATOM_POLICY),
    )


# -- contact lists ---------------------------------------------------------


def load_contact_list(
    text: str, n_residues: Optional[int] = None, origin: str = ""
) -> ContactMap:
    """Parse a contact list.

    Each non-comment line is ``i j`` (0-based).  Optional header lines are
    ``n N`` (residue count) and ``x K`` (residue K excluded).  When both the
    header and ``n_residues`` are given they must agree.
    """
    header_n = None
    pairs = []
    excluded = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "n" and len(parts) == 2:
                header_n = int(parts[1])
                continue
            if parts[0] == "x" and len(parts) == 2:
                excluded.append((lineno, int(parts[1])))
                continue
            if len(parts) != 2:
                raise ValueError
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ContactError(f"line {lineno}: cannot parse {line!r}") from None
        pairs.append((lineno, i, j))

    if n_residues is None:
        n_residues = header_n
    elif header_n is not None and header_n != n_residues:
        raise ContactError(
            f"residue count {n_residues} disagrees with header 'n {header_n}'"
        )
    if n_residues is None:
        raise ContactError("residue count unknown: no 'n' header and none given")
    if n_residues < 1:
        raise ContactError("residue count must be positive")

    contacts = set()
    for lineno, i, j in pairs:
        if i == j:
            raise ContactError(f"line {lineno}: self-contact {i} {j}")
        for k in (i, j):
            if not 0 <= k < n_residues:
                raise ContactError(
                    f"line {lineno}: index {k} out of range for n={n_residues}"
                )
        contacts.add((min(i, j), max(i, j)))
    for lineno, k in excluded:
        if not 0 <= k < n_residues:
            raise ContactError(f"line {lineno}: index {k} out of range for n={n_residues}")
    return ContactMap(
        n_residues=n_residues,
        contacts=frozenset(contacts),
        excluded=frozenset(k for _, k in excluded),
        source=ContactSource(origin=origin),
    )


def read_contact_file(path, n_residues: Optional[int] = None) -> ContactMap:
    with open(path, encoding="utf-8") as fh:
        return load_contact_list(fh.read(), n_residues, origin=str(path))


def format_contact_list(cmap: ContactMap, header: bool = True) -> str:
    lines = []
    if header:
        lines.append(f"n {cmap.n_residues}")
        lines.extend(f"x {k}" for k in sorted(cmap.excluded))
    lines.extend(f"{i} {j}" for i, j in cmap.sorted_contacts())
    return "\n".join(lines) + "\n"


# -- pair classes ----------------------------------------------------------


def build_pair_sets(cmap: ContactMap, L: int = DEFAULT_SEPARATION) -> PairSets:
    """Split all pairs with ``|i - j| >= L`` into contacts and non-contacts.

    Pairs touching an excluded residue belong to neither class.  Raises
    :class:`EmptyPairClassError` with ``which="admissible"`` when no pair
    qualifies at all.
    """
    if L < 1:
        raise ContactError(f"sequence separation must be >= 1, got {L}")
    pc = set()
    pnc = set()
    skip = cmap.excluded
    contacts = cmap.contacts
    for i, j in combinations(range(cmap.n_residues), 2):
        if j - i < L or i in skip or j in skip:
            continue
        (pc if (i, j) in contacts else pnc).add((i, j))
    if not pc and not pnc:
        raise EmptyPairClassError(
            "admissible",
            f"no admissible pairs: n={cmap.n_residues}, L={L}",
        )
    return PairSets(L=L, n_residues=cmap.n_residues, pc=frozenset(pc), pnc=frozenset(pnc))
