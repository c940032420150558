from __future__ import annotations

import dataclasses

import pytest
from hypothesis import settings

from hrbac.audit import AuditLog
from hrbac.gateway import Gateway, SessionContext
from hrbac.policy import UserKind
from hrbac.stores import FilesystemBlobStore, MemoryBlobStore

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

NOW = 1_700_000_000.0


@dataclasses.dataclass
class Env:
    """A bootstrapped gateway plus session contexts for common actors."""

    gateway: Gateway
    admin: SessionContext
    tokens: dict[str, str]

    def session(self, actor: str, at: float = NOW) -> SessionContext:
        return SessionContext(actor, self.tokens[actor], at)

    def add_actor(self, user_id: str, kind: UserKind) -> SessionContext:
        self.tokens[user_id] = self.gateway.create_user(self.admin, user_id, kind)
        return self.session(user_id)


def make_env(private_path=None, public_store=None, audit_path=None) -> Env:
    gateway, admin_token = Gateway.bootstrap(
        public_store if public_store is not None else MemoryBlobStore(),
        AuditLog(audit_path),
        private_path=private_path,
        now=NOW,
    )
    admin = SessionContext("admin", admin_token, NOW)
    return Env(gateway=gateway, admin=admin, tokens={"admin": admin_token})


@pytest.fixture
def env() -> Env:
    return make_env()


@pytest.fixture
def disk_env(tmp_path) -> Env:
    return make_env(
        private_path=str(tmp_path / "private.json"),
        public_store=FilesystemBlobStore(str(tmp_path / "public")),
        audit_path=str(tmp_path / "audit.log"),
    )
