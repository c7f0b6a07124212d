ACCEPTANCE = {}


def pytest_configure(config):
    config.acceptance = ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"AC{key:<2} {'PASS' if ok else 'FAIL'}  {detail}")
