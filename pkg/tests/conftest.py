def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: production-size acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE

    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[number]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}")
    missing = sorted(set(range(1, 9)) - set(ACCEPTANCE))
    for number in missing:
        tr.write_line(f"FAIL criterion {number}: not run")
