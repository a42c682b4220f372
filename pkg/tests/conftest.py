import pytest

from cocheck import TimedTrace, compile_contract, load_diagram, load_network, sample_path

TABLE = {
    "t0": "[!a1 4]",
    "t1": "[a1 3 a3 8]",
    "t2": "[a1 3 !a3 15 !a4 8]",
    "t3": "[a1 3 !a3 15 a5 2 !a4 6]",
    "t4": "[a2 2 !a3 15 a4 4]",
    "t5": "[a2 2 !a3 15 a4 4 a5 1]",
}


def T(text):
    return TimedTrace.parse(text)


@pytest.fixture(scope="session")
def ps_diagram():
    return load_diagram(sample_path("payment_shipment.cod"))


@pytest.fixture(scope="session")
def ps_unit(ps_diagram):
    return compile_contract(ps_diagram, {"g1": True})


@pytest.fixture(scope="session")
def ps_net(ps_unit):
    return ps_unit.network


@pytest.fixture(scope="session")
def impl_net():
    return load_network(sample_path("impl_p_and_s.nta"))


@pytest.fixture(scope="session")
def table():
    return {k: T(v) for k, v in TABLE.items()}


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line("criterion %d: %s  %s" % (n, "PASS" if ok else "FAIL", detail))
