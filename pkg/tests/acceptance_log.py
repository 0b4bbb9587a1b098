"""Pass/fail lines for the acceptance criteria, printed again in the run summary."""

RESULTS: dict = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[criterion] = line
    print(line)
    return ok
