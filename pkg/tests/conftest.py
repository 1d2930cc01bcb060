import random

import pytest

from espindex import corpus
from espindex.esp import esp_comp
from espindex.index import build_index


@pytest.fixture(scope="session")
def small_texts():
    rng = random.Random(7)
    words = [bytes(rng.choice(b"abcdefgh") for _ in range(rng.randint(2, 6))) for _ in range(80)]
    return {
        "banana": b"banana",
        "words": b" ".join(rng.choice(words) for _ in range(1500)),
        "dna": corpus.dna_like(12000, seed=3),
        "runs": b"".join(bytes([rng.choice(b"ab")]) * rng.randint(1, 6) for _ in range(2000)),
    }


@pytest.fixture(scope="session")
def built(small_texts):
    out = {}
    for name, text in small_texts.items():
        d = esp_comp(text)
        out[name] = (text, d, build_index(d, "1/4", lengths=True))
    return out


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
