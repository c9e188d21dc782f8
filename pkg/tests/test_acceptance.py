"""The ten acceptance criteria at their stated tolerances (full ensemble sizes).

Each criterion prints one PASS/FAIL line; the lines are repeated in the
terminal summary. Set MARTENSIM_ACCEPTANCE_LEVEL=fast for a quicker pass.
"""

import os

import pytest

from martensim.verify import NAMES, run_criterion

from .conftest import ACCEPTANCE_LINES

LEVEL = os.environ.get("MARTENSIM_ACCEPTANCE_LEVEL", "full")


@pytest.mark.slow
@pytest.mark.parametrize("cid", sorted(NAMES), ids=[f"{i}-{NAMES[i].replace(' ', '_')}"
                                                    for i in sorted(NAMES)])
def test_criterion(cid):
    res = run_criterion(cid, LEVEL)
    print(res.line)
    ACCEPTANCE_LINES.append(res.line)
    assert res.passed, res.detail
