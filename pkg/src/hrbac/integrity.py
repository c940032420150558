"""Multi-algorithm digest comparison between original and decrypted bytes.

SHA-256 is the digest of record stored in resource metadata; MD5 and
SHA-1 are computed for the comparison report only and must not be relied
on for security.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

ALGORITHMS = ("MD5", "SHA1", "SHA256", "SHA512")

_HASHERS = {
    "MD5": hashlib.md5,
    "SHA1": hashlib.sha1,
    "SHA256": hashlib.sha256,
    "SHA512": hashlib.sha512,
}


def digest(data: bytes, alg: str) -> str:
    """Lowercase hex digest of ``data`` under one of the four algorithms."""
    try:
        hasher = _HASHERS[alg.upper().replace("-", "")]
    except KeyError:
        raise ValueError(f"unsupported digest algorithm: {alg}") from None
    return hasher(data).hexdigest()


@dataclass(frozen=True)
class DigestReport:
    original: dict[str, str]
    decrypted: dict[str, str]
    matches: dict[str, bool]
    verdict: bool

    def as_table(self) -> str:
        width = max(len(a) for a in ALGORITHMS)
        lines = [f"{'ALG':<{width}}  MATCH  ORIGINAL / DECRYPTED"]
        for alg in ALGORITHMS:
            mark = "yes" if self.matches[alg] else "NO "
            lines.append(f"{alg:<{width}}  {mark}    {self.original[alg]}")
            lines.append(f"{'':<{width}}         {self.decrypted[alg]}")
        lines.append(f"verdict: {'PASS' if self.verdict else 'FAIL'}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "original": dict(self.original),
            "decrypted": dict(self.decrypted),
            "matches": dict(self.matches),
            "verdict": self.verdict,
        }


def verify_roundtrip(original: bytes, decrypted: bytes) -> DigestReport:
    """Digest both inputs under all four algorithms and report matches.

    The overall verdict is the conjunction of the per-algorithm matches.
    """
    o = {alg: digest(original, alg) for alg in ALGORITHMS}
    d = {alg: digest(decrypted, alg) for alg in ALGORITHMS}
    matches = {alg: o[alg] == d[alg] for alg in ALGORITHMS}
    return DigestReport(
        original=o, decrypted=d, matches=matches, verdict=all(matches.values())
    )
