def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get(
        "tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
