import numpy as np
import pytest

from nftdrain.txdata import NULL_ACCOUNT, TransactionRecord

NULL = NULL_ACCOUNT
DAY = 86400


def rec(token, frm, to, kind, t, price=0.0, tx=None, contract="0xc1"):
    """Shorthand for a classified record; ``t`` is in days."""
    return TransactionRecord(contract, str(token), frm, to, kind, float(price), int(round(t * DAY)),
                             tx or f"0x{contract}-{token}-{int(round(t * DAY))}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record an acceptance outcome: ``criterion(n, ok, detail)``; printed in the summary."""
    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
