import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqas.genome import (
    Gene,
    Genome,
    GenomeFormatError,
    LayoutSpec,
    decode_gene,
    encode_gene,
    format_genome,
    parse_genome,
    place_width_for,
    random_genome,
    read_genome,
    to_circuit,
    write_genome,
)
from eqas.simulator import GateKind

# four genes with types 010,000,110,011, places 00,01,00,00, included 1,0,1,1
WORKED_EXAMPLE = "010001" "000010" "110001" "011001"


@pytest.mark.parametrize("bits, expected", [
    ("010001", Gene(GateKind.RZ, 0, True)),
    ("000010", Gene(GateKind.RX, 1, False)),
    ("110001", Gene(GateKind.CRY, 0, True)),
])
def test_decode_examples(bits, expected):
    assert decode_gene(bits, 2) == expected


def test_encode_examples():
    assert encode_gene(Gene(GateKind.H, 3, True)) == "011111"
    assert encode_gene(Gene(GateKind.CNOT, 2, False)) == "100100"


def test_type_table():
    order = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.H,
             GateKind.CNOT, GateKind.CRX, GateKind.CRY, GateKind.CRZ]
    for code, kind in enumerate(order):
        assert decode_gene(format(code, "03b") + "001", 4).kind is kind


def test_exhaustive_round_trip_w2():
    seen = set()
    for code in range(2**6):
        bits = format(code, "06b")
        gene = decode_gene(bits, 4)
        assert encode_gene(gene, 2) == bits
        seen.add(gene)
    assert len(seen) == 8 * 4 * 2


@pytest.mark.parametrize("bits, n", [("01000", 2), ("0100011", 2), ("01a001", 2), ("011111", 3)])
def test_decode_errors(bits, n):
    with pytest.raises(GenomeFormatError):
        decode_gene(bits, n)


@pytest.mark.parametrize("n, w", [(2, 2), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4)])
def test_place_width(n, w):
    assert place_width_for(n) == w


def test_worked_example_circuit():
    g = Genome.from_bitstring(WORKED_EXAMPLE, 2)
    c = to_circuit(g)
    assert [(x.kind, x.target, x.control) for x in c.gates] == [
        (GateKind.RZ, 0, None), (GateKind.CRY, 1, 0), (GateKind.H, 0, None)]
    assert c.n_params == 2
    assert [x.param_slot for x in c.gates] == [0, 1, None]


def test_all_recessive_is_empty():
    g = random_genome(LayoutSpec(3, n_blocks=2), np.random.default_rng(0))
    empty = g.with_included([False] * len(g))
    assert to_circuit(empty).gates == () and to_circuit(empty).n_params == 0


def test_counts_by_construction():
    rng = np.random.default_rng(12)
    g = random_genome(LayoutSpec(4, n_blocks=3), rng)
    included = [True] * 20 + [False] * 4
    g = g.with_included(included)
    c = to_circuit(g)
    assert len(c.gates) == g.dominant_count == 20
    expected_params = sum(gene.kind.parameterized for gene in g.genes[:20])
    assert c.n_params == g.param_gate_count == expected_params


def test_random_genome_block_layout():
    g = random_genome(LayoutSpec(4, n_blocks=3), np.random.default_rng(1))
    assert len(g) == 24 and g.dominant_count == 24
    for b in range(3):
        block = g.genes[8 * b: 8 * b + 8]
        assert [x.place for x in block] == [0, 1, 2, 3, 0, 1, 2, 3]
        assert all(not x.kind.two_qubit for x in block[:4])
        assert all(x.kind.two_qubit for x in block[4:])
        pairs = sorted((x.control, x.target) for x in to_circuit(Genome(4, block)).gates if x.control is not None)
        assert pairs == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_random_genome_truncated():
    g = random_genome(LayoutSpec(2, n_gates=5), np.random.default_rng(2))
    assert [x.place for x in g.genes] == [0, 1, 0, 1, 0]
    assert [x.kind.two_qubit for x in g.genes] == [False, False, True, True, False]


def test_random_genome_seeded():
    a = random_genome(LayoutSpec(4, n_blocks=2, seed=5))
    b = random_genome(LayoutSpec(4, n_blocks=2, seed=5))
    assert a == b
    c = random_genome(LayoutSpec(4, n_blocks=2), np.random.default_rng(9))
    d = random_genome(LayoutSpec(4, n_blocks=2), np.random.default_rng(9))
    assert c.to_bitstring() == d.to_bitstring()


def test_random_included_layout():
    rng = np.random.default_rng(3)
    flags = [random_genome(LayoutSpec(2, n_gates=5, random_included=True), rng).dominant_count
             for _ in range(200)]
    assert max(flags) <= 5
    assert len(set(flags)) > 2


def test_layout_validation():
    with pytest.raises(ValueError):
        LayoutSpec(4)
    with pytest.raises(ValueError):
        LayoutSpec(1, n_gates=3)


def test_genome_file_round_trip(tmp_path):
    g = random_genome(LayoutSpec(4, n_blocks=3), np.random.default_rng(4))
    path = tmp_path / "g.txt"
    write_genome(path, g)
    assert path.read_text().splitlines()[0] == "n_qubits=4 place_width=2"
    assert read_genome(path) == g


@pytest.mark.parametrize("text", [
    "",
    "n_qubits=2 place_width=2\n0100",
    "n_qubits=2\n010001",
    "n_qubits=x place_width=2\n010001",
    "n_qubits=2 place_width=3\n0100001",
    "n_qubits=2 place_width=2\n01000z",
])
def test_parse_genome_errors(text):
    with pytest.raises(GenomeFormatError):
        parse_genome(text)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 9), data=st.data())
def test_bitstring_round_trip(n, data):
    w = place_width_for(n)
    genes = data.draw(st.lists(st.tuples(st.sampled_from(list(GateKind)), st.integers(0, n - 1), st.booleans()),
                               min_size=1, max_size=20))
    g = Genome(n, tuple(Gene(*t) for t in genes))
    bits = g.to_bitstring()
    assert len(bits) == len(genes) * (4 + w)
    assert Genome.from_bitstring(bits, n) == g
    assert parse_genome(format_genome(g)) == g


def test_exhaustive_two_gene_circuits():
    # every dominant/recessive pattern over a fixed 3-gene genome
    base = Genome.from_bitstring("001001" "101011" "011001", 2)
    for flags in itertools.product([False, True], repeat=3):
        g = base.with_included(flags)
        c = to_circuit(g)
        assert len(c.gates) == sum(flags)
        assert c.n_params == flags[0] + flags[1]
