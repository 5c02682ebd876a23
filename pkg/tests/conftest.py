import pytest

from scvamp.denoiser import LdpcCode, parse_alist

HAMMING74_ALIST = """\
7 3
3 4
1 1 2 1 2 2 3
4 4 4
1 0 0
2 0 0
1 2 0
3 0 0
1 3 0
2 3 0
1 2 3
1 3 5 7 0 0 0
2 3 6 7 0 0 0
4 5 6 7 0 0 0
"""

SPC3_ALIST = """\
3 1
1 3
1 1 1
3
1
1
1
1 2 3
"""


@pytest.fixture
def spc3():
    return LdpcCode.from_checks(3, [[0, 1, 2]])


@pytest.fixture
def hamming74():
    return parse_alist(HAMMING74_ALIST)
