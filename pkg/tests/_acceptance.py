"""Registry of acceptance outcomes, printed once at the end of the session."""

RESULTS: dict[int, tuple[str, str]] = {}


def record(n: int, ok: bool | None, detail: str) -> None:
    RESULTS[n] = ("SKIP" if ok is None else "PASS" if ok else "FAIL", detail)
