"""Shared PASS/FAIL record for the acceptance suite, printed at session end."""

RESULTS: dict[str, tuple[bool, str]] = {}


def record(key: str, ok: bool, detail: str) -> bool:
    RESULTS[key] = (bool(ok), detail)
    line = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    return bool(ok)
