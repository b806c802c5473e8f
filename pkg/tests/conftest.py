"""Shared golden data and the acceptance summary printed after the run."""

# Expected outcome strings keyed by the 1-based voters who vetoed.
CLUSTER_TABLE = {
    (): "0000", (1,): "1111", (2,): "0110", (3,): "1110", (4,): "0111",
    (1, 2): "1001", (1, 3): "0001", (1, 4): "1000", (2, 3): "1000", (2, 4): "0001",
    (3, 4): "1001", (1, 2, 3): "0111", (1, 2, 4): "1110", (1, 3, 4): "0110",
    (2, 3, 4): "1111", (1, 2, 3, 4): "0000",
}
GHZ_TABLE = {
    (): "000", (1,): "010", (2,): "011", (3,): "111", (4,): "110",
    (1, 2): "001", (1, 3): "101", (1, 4): "100", (2, 3): "100", (2, 4): "101",
    (3, 4): "001", (1, 2, 3): "110", (1, 2, 4): "111", (1, 3, 4): "011",
    (2, 3, 4): "010", (1, 2, 3, 4): "000",
}
# Protocol A with four voters: outcome per iteration, keyed by veto count.
BELL_TABLE = {0: ["00"], 1: ["10"], 2: ["00", "10"], 3: ["10"], 4: ["00", "00", "10"]}

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
