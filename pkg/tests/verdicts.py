"""Per-criterion verdict lines collected by the acceptance suite and printed at session end."""

LINES: list[str] = []


def record(n: int, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"criterion {n}: {status} - {detail}"
    LINES.append(line)
    print(line)
