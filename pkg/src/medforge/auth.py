"""Credential file handling and bearer-token sessions.

The credential file holds one ``principal:role:salt:hash`` line per
identity (PBKDF2-HMAC-SHA256, hex). A principal may have several lines,
which is how data-acquisition devices get their own secret for a
patient's account. Comparisons are constant time, and unknown principals
burn the same hash work as wrong passwords.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import time
from dataclasses import dataclass

ROLES = ("patient", "doctor")
PBKDF2_ITERATIONS = 100_000
TOKEN_BYTES = 16  # 128-bit tokens, url-safe encoded


class CredentialFileError(ValueError):
    pass


@dataclass(frozen=True)
class Credential:
    principal: str
    role: str
    salt: str
    password_hash: str


@dataclass(frozen=True)
class Session:
    token: str
    principal: str
    role: str
    expires_at: float


def _hash_password(password: str, salt: str) -> str:
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                 bytes.fromhex(salt), PBKDF2_ITERATIONS)
    return digest.hex()


def make_credential_line(principal: str, role: str, password: str) -> str:
    if role not in ROLES:
        raise CredentialFileError(f"role must be one of {', '.join(ROLES)}")
    salt = secrets.token_hex(16)
    return f"{principal}:{role}:{salt}:{_hash_password(password, salt)}"


def parse_credentials(text: str) -> list[Credential]:
    creds: list[Credential] = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            principal, role, salt, password_hash = line.rsplit(":", 3)
        except ValueError:
            raise CredentialFileError(f"line {n}: expected principal:role:salt:hash")
        if role not in ROLES:
            raise CredentialFileError(f"line {n}: unknown role {role!r}")
        creds.append(Credential(principal, role, salt, password_hash))
    return creds


class Credentials:
    def __init__(self, credentials: list[Credential]):
        self._by_principal: dict[str, list[Credential]] = {}
        for cred in credentials:
            self._by_principal.setdefault(cred.principal, []).append(cred)
        # decoy keeps unknown-principal timing aligned with wrong-password
        self._decoy_salt = secrets.token_hex(16)
        self._decoy_hash = _hash_password(secrets.token_hex(8), self._decoy_salt)

    @classmethod
    def load(cls, path) -> "Credentials":
        from pathlib import Path

        file = Path(path)
        if not file.exists():
            return cls([])
        return cls(parse_credentials(file.read_text(encoding="utf-8")))

    def verify(self, principal: str, password: str) -> str | None:
        """Role on success, None otherwise; unknown and wrong are alike."""
        lines = self._by_principal.get(principal)
        if not lines:
            hmac.compare_digest(_hash_password(password, self._decoy_salt),
                                self._decoy_hash)
            return None
        role: str | None = None
        for cred in lines:
            if hmac.compare_digest(_hash_password(password, cred.salt),
                                   cred.password_hash):
                role = cred.role
        return role


class SessionManager:
    def __init__(self, ttl_seconds: float = 3600.0, clock=time.time):
        self.ttl = ttl_seconds
        self._clock = clock
        self._sessions: dict[str, Session] = {}

    def create(self, principal: str, role: str) -> Session:
        session = Session(
            token=secrets.token_urlsafe(TOKEN_BYTES),
            principal=principal,
            role=role,
            expires_at=self._clock() + self.ttl,
        )
        self._sessions[session.token] = session
        return session

    def lookup(self, token: str) -> Session | None:
        session = self._sessions.get(token)
        if session is None:
            return None
        if session.expires_at <= self._clock():
            del self._sessions[token]
            return None
        return session
