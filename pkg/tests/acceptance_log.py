"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

RESULTS = {}


def record(number, title, passed, detail):
    line = f"CRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS[number] = line
    print(line)
    return passed
