"""Binary quantum-gene encoding of circuit architectures.

A gene is ``TYPE (3 bits) | PLACE (w bits) | INCLUDED (1 bit)``, most
significant bit first. ``PLACE`` is the acting qubit for single-qubit gates
and the control qubit for two-qubit gates; the target of a two-qubit gate is
always the next qubit on the ring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .simulator import SINGLE_QUBIT_KINDS, TWO_QUBIT_KINDS, Circuit, GateInstance, GateKind

TYPE_CODES = {
    "000": GateKind.RX,
    "001": GateKind.RY,
    "010": GateKind.RZ,
    "011": GateKind.H,
    "100": GateKind.CNOT,
    "101": GateKind.CRX,
    "110": GateKind.CRY,
    "111": GateKind.CRZ,
}
KIND_CODES = {kind: code for code, kind in TYPE_CODES.items()}
TYPE_WIDTH = 3


class GenomeFormatError(ValueError):
    pass


def place_width_for(n_qubits: int) -> int:
    return max(2, math.ceil(math.log2(n_qubits)))


@dataclass(frozen=True)
class Gene:
    kind: GateKind
    place: int
    included: bool = True

    @property
    def type_bits(self) -> str:
        return KIND_CODES[self.kind]

    def place_bits(self, width: int) -> str:
        return format(self.place, f"0{width}b")


def decode_gene(bits: str, n_qubits: int) -> Gene:
    w = place_width_for(n_qubits)
    if len(bits) != TYPE_WIDTH + w + 1 or set(bits) - {"0", "1"}:
        raise GenomeFormatError(f"gene {bits!r} is not a {TYPE_WIDTH + w + 1}-bit string")
    place = int(bits[TYPE_WIDTH:TYPE_WIDTH + w], 2)
    if place >= n_qubits:
        raise GenomeFormatError(f"PLACE {place} out of range for {n_qubits} qubits")
    return Gene(TYPE_CODES[bits[:TYPE_WIDTH]], place, bits[-1] == "1")


def encode_gene(gene: Gene, place_width: int = 2) -> str:
    return gene.type_bits + gene.place_bits(place_width) + ("1" if gene.included else "0")


@dataclass(frozen=True)
class Genome:
    n_qubits: int
    genes: tuple[Gene, ...]
    place_width: Optional[int] = None

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("genomes need at least 2 qubits")
        if self.place_width is None:
            object.__setattr__(self, "place_width", place_width_for(self.n_qubits))
        object.__setattr__(self, "genes", tuple(self.genes))
        for g in self.genes:
            if not 0 <= g.place < self.n_qubits:
                raise ValueError(f"gene place {g.place} out of range")

    @property
    def gene_width(self) -> int:
        return TYPE_WIDTH + self.place_width + 1

    def gene_bits(self) -> list[str]:
        return [encode_gene(g, self.place_width) for g in self.genes]

    def to_bitstring(self) -> str:
        return "".join(self.gene_bits())

    @classmethod
    def from_bitstring(cls, bits: str, n_qubits: int) -> "Genome":
        width = TYPE_WIDTH + place_width_for(n_qubits) + 1
        bits = bits.strip()
        if len(bits) % width:
            raise GenomeFormatError(f"bitstring length {len(bits)} is not a multiple of {width}")
        genes = [decode_gene(bits[i:i + width], n_qubits) for i in range(0, len(bits), width)]
        return cls(n_qubits, tuple(genes))

    def __len__(self) -> int:
        return len(self.genes)

    @property
    def dominant_count(self) -> int:
        return sum(g.included for g in self.genes)

    @property
    def param_gate_count(self) -> int:
        return sum(g.included and g.kind.parameterized for g in self.genes)

    @property
    def included_bits(self) -> tuple[bool, ...]:
        return tuple(g.included for g in self.genes)

    def with_included(self, included) -> "Genome":
        genes = tuple(replace(g, included=bool(b)) for g, b in zip(self.genes, included, strict=True))
        return replace(self, genes=genes)

    def param_gene_indices(self) -> list[int]:
        """Gene index of each circuit parameter slot, in slot order."""
        return [i for i, g in enumerate(self.genes) if g.included and g.kind.parameterized]


def format_genome(genome: Genome) -> str:
    return f"n_qubits={genome.n_qubits} place_width={genome.place_width}\n{genome.to_bitstring()}\n"


def parse_genome(text: str) -> Genome:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise GenomeFormatError("expected a header line and a bitstring line")
    try:
        header = dict(field.split("=", 1) for field in lines[0].split())
        n_qubits = int(header["n_qubits"])
        width = int(header["place_width"])
    except (KeyError, ValueError) as exc:
        raise GenomeFormatError(f"bad header {lines[0]!r}") from exc
    if n_qubits < 2 or width != place_width_for(n_qubits):
        raise GenomeFormatError(f"place_width={width} does not match n_qubits={n_qubits}")
    return Genome.from_bitstring(lines[1], n_qubits)


def write_genome(path: Union[str, Path], genome: Genome) -> None:
    Path(path).write_text(format_genome(genome))


def read_genome(path: Union[str, Path]) -> Genome:
    return parse_genome(Path(path).read_text())


@dataclass(frozen=True)
class LayoutSpec:
    """Initial genome size: whole blocks, or a gate count truncated in layer order.

    A block is one single-qubit gate per qubit followed by one ring-connected
    two-qubit gate per qubit.
    """

    n_qubits: int
    n_blocks: Optional[int] = None
    n_gates: Optional[int] = None
    random_included: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("layouts need at least 2 qubits")
        if (self.n_blocks or 0) < 1 and (self.n_gates or 0) < 1:
            raise ValueError("need n_blocks >= 1 or n_gates >= 1")

    @property
    def size(self) -> int:
        if self.n_gates:
            return self.n_gates
        return self.n_blocks * 2 * self.n_qubits


def random_genome(layout: LayoutSpec, rng: Optional[np.random.Generator] = None) -> Genome:
    if rng is None:
        rng = np.random.default_rng(layout.seed)
    n = layout.n_qubits
    genes = []
    while len(genes) < layout.size:
        for q in range(n):
            genes.append(Gene(SINGLE_QUBIT_KINDS[rng.integers(4)], q))
        for q in range(n):
            genes.append(Gene(TWO_QUBIT_KINDS[rng.integers(4)], q))
    genes = genes[:layout.size]
    if layout.random_included:
        flags = rng.integers(0, 2, size=len(genes))
        genes = [replace(g, included=bool(f)) for g, f in zip(genes, flags)]
    return Genome(n, tuple(genes))


def to_circuit(genome: Genome) -> Circuit:
    n = genome.n_qubits
    gates = []
    slot = 0
    for g in genome.genes:
        if not g.included:
            continue
        ps = None
        if g.kind.parameterized:
            ps, slot = slot, slot + 1
        if g.kind.two_qubit:
            gates.append(GateInstance(g.kind, (g.place + 1) % n, g.place, ps))
        else:
            gates.append(GateInstance(g.kind, g.place, None, ps))
    return Circuit(n, tuple(gates))
