import numpy as np
import pytest

from grounder.corpus import Cell, CellRef, TableDocument


@pytest.fixture
def wnba_table():
    return TableDocument(
        table_id="t1",
        page_title="WNBA Finals",
        page_intro="The WNBA Finals is the championship series.",
        section_title="Results",
        section_intro="By year.",
        headers=("Year", "Champion"),
        rows=(
            (Cell("1997"), Cell("Houston Comets")),
            (Cell("1998"), Cell("Houston Comets", "American professional basketball team")),
        ),
    )


@pytest.fixture
def faroe_table():
    return TableDocument(
        table_id="faroe",
        page_title="2007 Faroe Islands Premier League",
        headers=("Team", "Stadium", "Capacity"),
        rows=(
            (Cell("EB/Streymur"), Cell("Við Margáir", "Stadium in Streymnes"), Cell("1,000")),
            (Cell("GÍ Gøta"), Cell("Sarpugerði"), Cell("2,000")),
        ),
    )


def random_table(rng: np.random.Generator, table_id: str, n_rows: int, n_cols: int) -> TableDocument:
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]

    def word():
        return words[rng.integers(len(words))]

    return TableDocument(
        table_id=table_id,
        page_title=f"{word()} {word()}",
        page_intro=" ".join(word() for _ in range(rng.integers(0, 5))),
        headers=tuple(f"{word()}{c}" for c in range(n_cols)),
        rows=tuple(
            tuple(Cell(value=f"{word()} {r}{c}") for c in range(n_cols)) for r in range(n_rows)
        ),
    )
