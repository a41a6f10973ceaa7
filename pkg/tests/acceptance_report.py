"""Collects one verdict per acceptance criterion for the terminal summary."""

_results: dict[str, tuple[bool, str, bool]] = {}


def check(name: str, ok: bool, detail: str = "", known_gap: bool = False) -> bool:
    _results[name] = (bool(ok), detail, known_gap)
    return bool(ok)


def lines() -> list[str]:
    out = []
    for name, (ok, detail, gap) in _results.items():
        tag = "PASS" if ok else "FAIL"
        note = " [known gap, see /root/notes/decisions.md]" if gap and not ok else ""
        out.append(f"{tag}  {name}: {detail}{note}")
    return out
