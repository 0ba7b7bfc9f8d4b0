import re

CRITERIA = {
    1: "identity suite: 100 random trials, every residual <= 1e-11, < 2 min",
    2: "channel energy conservation: drift <= 1e-10 over T = 10*l, < 10 min",
    3: "channel with dissipation: energy nonincreasing across snapshots",
    4: "sliver mesh at background CFL: finite, Linf <= 10x initial at T = 1",
    5: "rotated-square L2 rates >= 1.75 / 2.6 / 3.4 for r = 1 / 2 / 3, < 30 min",
    6: "filtered Linf >= 10x below unfiltered; rho >= 1e-7 sweep agrees within 2x",
    7: "stabilization disabled on the sliver mesh blows up (> 1e3x energy)",
    8: "uncut periodic baseline: L2 rates r+1 within 0.15 for r = 1, 2, 3",
}

_NODE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # any failing parametrization fails the criterion; skip beats pass
    rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
    verdicts = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, ()):
            m = _NODE.search(getattr(rep, "nodeid", ""))
            if m is None:
                continue
            num = int(m.group(1))
            prev = verdicts.get(num, "PASS")
            verdicts[num] = max(prev, label, key=rank.get)
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(verdicts):
        terminalreporter.write_line(
            "criterion %d: %-4s %s" % (num, verdicts[num], CRITERIA[num]))
