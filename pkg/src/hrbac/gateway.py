"""Service orchestration: authenticates actors, routes uploads and
downloads through policy and crypto, manages grants, revocations, key
rotation, and break-glass override, and audits every decision.

Commit discipline for mutating operations: stage changes in memory,
persist the private document, then append the audit entry.  The audit
append is the last step before success is reported; if it fails the
operation fails and staged changes are rolled back (audit-or-abort).
A failure after the blob write compensates by deleting the blob, so a
failed upload never leaves an orphan blob or metadata without its blob.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from . import envelope
from .audit import AuditAction, AuditEntry, AuditLog
from .envelope import DataKey, SealedBlob
from .errors import (
    AccessDenied,
    HrbacError,
    IntegrityMismatch,
    NotFound,
    NotGranted,
    OverrideDisabled,
    TokenInvalid,
    Unauthorized,
    UnknownRole,
    ValidationError,
)
from .policy import Action, Decision, DecisionReason, Permission, UserKind, UserRecord
from .stores import (
    BlobRef,
    BlobStore,
    Classification,
    PLANE_PRIVATE,
    PLANE_PUBLIC,
    PrivateState,
    ResourceMeta,
    check_name,
    save_private,
    validate_state,
)

ALLOW = "Allow"
DENY = "Deny"

_WRITE_KINDS = (UserKind.DATA_OWNER, UserKind.ADMIN)
_STATUS_KINDS = (UserKind.ADMIN, UserKind.ROLE_MANAGER)
_ASSIGN_KINDS = (UserKind.ADMIN, UserKind.ROLE_MANAGER)


@dataclass
class SystemParams:
    default_modulus_bits: int = 2048
    override_enabled: bool = True


@dataclass(frozen=True)
class SessionContext:
    actor: str
    token: str
    now: float


@dataclass
class StatusReport:
    users: int
    roles: int
    resources: int
    audit_entries: int
    deny_rate: float
    override_count: int
    recent: list[AuditEntry] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "users": self.users,
            "roles": self.roles,
            "resources": self.resources,
            "audit_entries": self.audit_entries,
            "deny_rate": self.deny_rate,
            "override_count": self.override_count,
            "recent": [e.to_line() for e in self.recent],
        }


def _token_digest(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def _aad(resource_id: str, version: int) -> bytes:
    # binds ciphertext to (resource, version) so blobs cannot be swapped
    return f"{resource_id}:{version}".encode("utf-8")


def _blob_name(resource_id: str, version: int) -> str:
    return f"{resource_id}.{version}.blob"


class Gateway:
    def __init__(
        self,
        state: PrivateState,
        public_store: BlobStore,
        audit_log: AuditLog,
        params: Optional[SystemParams] = None,
        private_path: Optional[str] = None,
    ) -> None:
        self._state = state
        self._public = public_store
        self._audit_log = audit_log
        self.params = params or SystemParams()
        self._private_path = private_path

    @property
    def state(self) -> PrivateState:
        return self._state

    @property
    def audit_log(self) -> AuditLog:
        return self._audit_log

    @classmethod
    def bootstrap(
        cls,
        public_store: BlobStore,
        audit_log: AuditLog,
        params: Optional[SystemParams] = None,
        private_path: Optional[str] = None,
        admin_id: str = "admin",
        now: float = 0.0,
    ) -> tuple["Gateway", str]:
        """Create a fresh system with one Admin user; returns the gateway
        and the admin's one-time-visible API token."""
        state = PrivateState()
        token = secrets.token_urlsafe(24)
        state.policy.add_user(admin_id, UserKind.ADMIN, _token_digest(token))
        gateway = cls(state, public_store, audit_log, params, private_path)
        gateway._persist()
        gateway._audit_entry(
            now, admin_id, AuditAction.POLICY_CHANGE, ALLOW, "Bootstrap"
        )
        return gateway, token

    # -- plumbing --------------------------------------------------------

    def _persist(self) -> None:
        if self._private_path is not None:
            save_private(self._private_path, self._state)
        else:
            validate_state(self._state)

    def _audit_entry(
        self,
        ts: float,
        actor: str,
        action: AuditAction,
        decision: str,
        reason: str,
        resource: Optional[str] = None,
        override_flag: bool = False,
    ) -> AuditEntry:
        entry = self._audit_log.append(
            ts=ts,
            actor=actor,
            action=action,
            decision=decision,
            reason=reason,
            resource=resource,
            override_flag=override_flag,
        )
        self._state.audit_head = {"seq": entry.seq, "entry_hash": entry.entry_hash}
        return entry

    def _authenticate(self, ctx: SessionContext) -> UserRecord:
        user = self._state.policy.users.get(ctx.actor)
        presented = _token_digest(ctx.token)
        if user is None or not hmac.compare_digest(presented, user.token_digest):
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.AUTH_FAIL, DENY, "TokenInvalid"
            )
            raise TokenInvalid(f"authentication failed for {ctx.actor}")
        return user

    def verify_session(self, ctx: SessionContext) -> UserRecord:
        """Public authentication check for callers outside the data path."""
        return self._authenticate(ctx)

    def authenticate_token(self, token: str, now: float) -> SessionContext:
        """Resolve a bearer token to a session; audits and rejects unknown
        tokens."""
        presented = _token_digest(token)
        for user in self._state.policy.users.values():
            if user.token_digest and hmac.compare_digest(presented, user.token_digest):
                return SessionContext(actor=user.id, token=token, now=now)
        self._audit_entry(now, "unknown", AuditAction.AUTH_FAIL, DENY, "TokenInvalid")
        raise TokenInvalid("bearer token does not match any user")

    def _snapshot(self) -> dict:
        return self._state.to_doc()

    def _restore(self, doc: dict) -> None:
        restored = PrivateState.from_doc(doc)
        self._state.policy = restored.policy
        self._state.resources = restored.resources
        self._state.role_keys = restored.role_keys
        self._state.blobs = restored.blobs
        self._state.audit_head = restored.audit_head

    def _plane_store(self, plane: str):
        return self._state if plane == PLANE_PRIVATE else self._public

    def _delete_blob(self, ref: BlobRef) -> None:
        try:
            self._plane_store(ref.plane).delete_blob(ref.name)
        except HrbacError:
            pass  # compensation is best-effort; consistency check tolerates absence

    def _unwrap_any(self, meta: ResourceMeta, roles: Optional[Iterable[str]] = None) -> DataKey:
        candidates = sorted(meta.wrapped_keys if roles is None else roles)
        for role in candidates:
            keypair = self._state.role_keys.get(role)
            if keypair is None:
                continue
            return envelope.unwrap_key(meta.wrapped_keys[role], keypair.private)
        raise AccessDenied(
            f"no usable wrapped key for resource {meta.resource_id}",
            reason="NoGrantingRole",
        )

    # -- administration (audited as PolicyChange) -------------------------

    def _admin_op(
        self,
        ctx: SessionContext,
        op_name: str,
        kinds: tuple[UserKind, ...],
        fn: Callable[[UserRecord], object],
    ):
        user = self._authenticate(ctx)
        if user.kind not in kinds:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.POLICY_CHANGE, DENY, "Unauthorized"
            )
            raise Unauthorized(f"{user.kind.value} may not perform {op_name}")
        before = self._state.policy.dump_state()
        keys_before = dict(self._state.role_keys)
        try:
            result = fn(user)
            self._persist()
        except HrbacError as exc:
            self._state.policy = type(self._state.policy).from_state(before)
            self._state.role_keys = keys_before
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.POLICY_CHANGE, DENY, type(exc).__name__
            )
            raise
        self._audit_entry(ctx.now, ctx.actor, AuditAction.POLICY_CHANGE, ALLOW, op_name)
        return result

    def create_user(self, ctx: SessionContext, user_id: str, kind: UserKind) -> str:
        """Register an actor; returns their one-time-visible API token."""
        token = secrets.token_urlsafe(24)

        def run(_: UserRecord):
            self._state.policy.add_user(user_id, kind, _token_digest(token))

        self._admin_op(ctx, "CreateUser", (UserKind.ADMIN,), run)
        return token

    def add_role(self, ctx: SessionContext, name: str, juniors: Iterable[str] = ()) -> str:
        return self._admin_op(
            ctx, "AddRole", (UserKind.ADMIN,),
            lambda _: self._state.policy.add_role(name, juniors),
        )

    def link_roles(self, ctx: SessionContext, senior: str, junior: str) -> None:
        self._admin_op(
            ctx, "LinkRoles", (UserKind.ADMIN,),
            lambda _: self._state.policy.link_roles(senior, junior),
        )

    def grant_permission(self, ctx: SessionContext, role: str, perm: Permission) -> None:
        self._admin_op(
            ctx, "GrantPermission", (UserKind.ADMIN,),
            lambda _: self._state.policy.grant_permission(role, perm),
        )

    def add_sod_constraint(self, ctx: SessionContext, role_a: str, role_b: str) -> None:
        self._admin_op(
            ctx, "AddSodConstraint", (UserKind.ADMIN,),
            lambda _: self._state.policy.add_sod_constraint(role_a, role_b),
        )

    def assign_role(self, ctx: SessionContext, user_id: str, role: str) -> None:
        self._admin_op(
            ctx, "AssignRole", _ASSIGN_KINDS,
            lambda _: self._state.policy.assign_role(user_id, role),
        )

    def revoke_role(self, ctx: SessionContext, user_id: str, role: str) -> None:
        self._admin_op(
            ctx, "RevokeRole", _ASSIGN_KINDS,
            lambda _: self._state.policy.revoke_role(user_id, role),
        )

    def delegate_role(
        self, ctx: SessionContext, to_user: str, role: str, ttl_seconds: float
    ) -> str:
        """Self-service: the session actor delegates a directly-held role."""
        return self._admin_op(
            ctx, "Delegate", tuple(UserKind),
            lambda user: self._state.policy.delegate_role(
                user.id, to_user, role, ttl_seconds, ctx.now
            ),
        )

    def revoke_delegation(self, ctx: SessionContext, delegation_id: str) -> None:
        def run(user: UserRecord):
            delegation = self._state.policy.delegations.get(delegation_id)
            if delegation is not None and user.kind not in _ASSIGN_KINDS:
                if delegation.from_user != user.id:
                    raise Unauthorized("only the delegator or a role manager may revoke")
            self._state.policy.revoke_delegation(delegation_id)

        self._admin_op(ctx, "RevokeDelegation", tuple(UserKind), run)

    def ensure_role_key(
        self, ctx: SessionContext, role: str, modulus_bits: Optional[int] = None
    ) -> int:
        """Generate the role's RSA keypair if absent; returns modulus bits."""

        def run(_: UserRecord) -> int:
            if role not in self._state.policy.roles:
                raise UnknownRole(f"no such role: {role}")
            existing = self._state.role_keys.get(role)
            if existing is not None:
                return existing.modulus_bits
            bits = modulus_bits or self.params.default_modulus_bits
            self._state.role_keys[role] = envelope.generate_role_keypair(role, bits)
            return bits

        return self._admin_op(ctx, "EnsureRoleKey", (UserKind.ADMIN,), run)

    def set_override_enabled(self, ctx: SessionContext, enabled: bool) -> None:
        def run(_: UserRecord):
            self.params.override_enabled = enabled

        self._admin_op(ctx, "SetParams", (UserKind.ADMIN,), run)

    # -- data path ---------------------------------------------------------

    def upload(
        self,
        ctx: SessionContext,
        resource_id: str,
        plaintext: bytes,
        classification: Classification,
        grant_roles: Iterable[str],
    ) -> ResourceMeta:
        user = self._authenticate(ctx)
        grant_roles = sorted(set(grant_roles))

        def deny(reason: str) -> None:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.UPLOAD, DENY, reason, resource_id
            )

        if user.kind not in _WRITE_KINDS:
            deny("Unauthorized")
            raise Unauthorized(f"{user.kind.value} may not upload")
        existing = self._state.resources.get(resource_id)
        if existing is not None and existing.owner != user.id and user.kind is not UserKind.ADMIN:
            deny("Unauthorized")
            raise Unauthorized("only the owner or an admin may replace a resource")
        if not grant_roles:
            deny("NoGrantRoles")
            raise ValidationError("grant_roles must be non-empty")
        check_name(resource_id)
        for role in grant_roles:
            if role not in self._state.policy.roles:
                deny("UnknownRole")
                raise UnknownRole(f"no such role: {role}")
            if role not in self._state.role_keys:
                deny("UnknownRole")
                raise UnknownRole(f"role {role} has no keypair")

        version = existing.version + 1 if existing else 1
        data_key = envelope.generate_data_key()
        blob = envelope.seal(plaintext, data_key, _aad(resource_id, version))
        wrapped = {
            role: envelope.wrap_key(data_key, self._state.role_keys[role].public, role)
            for role in grant_roles
        }
        plane = (
            PLANE_PRIVATE
            if classification is Classification.CONFIDENTIAL
            else PLANE_PUBLIC
        )
        ref = BlobRef(plane, _blob_name(resource_id, version))

        snapshot = self._snapshot()
        try:
            self._plane_store(plane).put_blob(ref.name, blob.to_bytes())
        except HrbacError as exc:
            self._restore(snapshot)
            deny(type(exc).__name__)
            raise
        meta = ResourceMeta(
            resource_id=resource_id,
            owner=user.id,
            classification=classification,
            blob_ref=ref,
            plaintext_sha256=hashlib.sha256(plaintext).hexdigest(),
            size_bytes=len(plaintext),
            version=version,
            wrapped_keys=wrapped,
            created_at=ctx.now,
        )
        try:
            self._state.resources[resource_id] = meta
            for role in grant_roles:
                self._state.policy.grant_permission(
                    role, Permission(resource_id, Action.READ)
                )
            if existing is not None:
                for role in existing.wrapped_keys:
                    if role not in wrapped:
                        self._state.policy.revoke_permission(
                            role, Permission(resource_id, Action.READ)
                        )
            self._persist()
        except HrbacError as exc:
            self._restore(snapshot)
            if plane == PLANE_PUBLIC:
                self._delete_blob(ref)
            deny(type(exc).__name__)
            raise
        try:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.UPLOAD, ALLOW, "Granted", resource_id
            )
        except HrbacError:
            self._restore(snapshot)
            if plane == PLANE_PUBLIC:
                self._delete_blob(ref)
            try:
                self._persist()
            except HrbacError:
                pass
            raise
        if existing is not None and existing.blob_ref != ref:
            self._delete_blob(existing.blob_ref)
            if existing.blob_ref.plane == PLANE_PRIVATE:
                try:
                    self._persist()
                except HrbacError:
                    pass
        return meta

    def _read_and_open(self, meta: ResourceMeta, data_key: DataKey) -> bytes:
        raw = self._plane_store(meta.blob_ref.plane).get_blob(meta.blob_ref.name)
        blob = SealedBlob.from_bytes(raw)
        plaintext = envelope.open_blob(
            blob, data_key, _aad(meta.resource_id, meta.version)
        )
        if hashlib.sha256(plaintext).hexdigest() != meta.plaintext_sha256:
            raise IntegrityMismatch(
                f"decrypted bytes disagree with recorded digest for {meta.resource_id}"
            )
        return plaintext

    def download(self, ctx: SessionContext, resource_id: str) -> bytes:
        user = self._authenticate(ctx)

        def deny(reason: str) -> None:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.DOWNLOAD, DENY, reason, resource_id
            )

        meta = self._state.resources.get(resource_id)
        if meta is None:
            deny("NotFound")
            raise NotFound(f"no such resource: {resource_id}")

        owner_implicit = meta.owner == user.id
        if owner_implicit:
            decision = Decision(True, DecisionReason.GRANTED)
            reason = "OwnerImplicit"
        else:
            decision = self._state.policy.check_access(
                user.id, resource_id, Action.READ, ctx.now
            )
            reason = decision.reason.value
        if not decision.allowed:
            deny(reason)
            raise AccessDenied(
                f"read of {resource_id} denied: {reason}", reason=reason
            )

        effective = self._state.policy.effective_roles(user.id, ctx.now)
        granting = [r for r in meta.wrapped_keys if r in effective]
        try:
            if granting:
                data_key = self._unwrap_any(meta, granting)
            elif owner_implicit:
                # server-mediated recovery: the private store holds every
                # role key, so the owner is not blocked on role membership
                data_key = self._unwrap_any(meta)
            else:
                raise AccessDenied(
                    f"no granting role for {resource_id}", reason="NoGrantingRole"
                )
            plaintext = self._read_and_open(meta, data_key)
        except HrbacError as exc:
            deny(getattr(exc, "reason", type(exc).__name__))
            raise
        self._audit_entry(
            ctx.now, ctx.actor, AuditAction.DOWNLOAD, ALLOW, reason, resource_id
        )
        return plaintext

    def override_download(self, ctx: SessionContext, resource_id: str, reason: str) -> bytes:
        user = self._authenticate(ctx)

        def deny(code: str) -> None:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.OVERRIDE, DENY, code, resource_id
            )

        if user.kind is not UserKind.OVERRIDE:
            deny("Unauthorized")
            raise Unauthorized(f"{user.kind.value} may not use override access")
        if not self.params.override_enabled:
            deny("OverrideDisabled")
            raise OverrideDisabled("break-glass override is disabled")
        if not reason or not reason.strip():
            deny("JustificationMissing")
            raise ValidationError("override requires a justification reason")
        meta = self._state.resources.get(resource_id)
        if meta is None:
            deny("NotFound")
            raise NotFound(f"no such resource: {resource_id}")
        try:
            data_key = self._unwrap_any(meta)
            plaintext = self._read_and_open(meta, data_key)
        except HrbacError as exc:
            deny(getattr(exc, "reason", type(exc).__name__))
            raise
        self._audit_entry(
            ctx.now,
            ctx.actor,
            AuditAction.OVERRIDE,
            ALLOW,
            reason.strip(),
            resource_id,
            override_flag=True,
        )
        return plaintext

    def _require_resource_admin(
        self, ctx: SessionContext, action: AuditAction, resource_id: str
    ) -> ResourceMeta:
        user = self._authenticate(ctx)
        meta = self._state.resources.get(resource_id)
        if meta is None:
            self._audit_entry(
                ctx.now, ctx.actor, action, DENY, "NotFound", resource_id
            )
            raise NotFound(f"no such resource: {resource_id}")
        if not (
            user.kind is UserKind.ADMIN
            or (user.kind is UserKind.DATA_OWNER and meta.owner == user.id)
        ):
            self._audit_entry(
                ctx.now, ctx.actor, action, DENY, "Unauthorized", resource_id
            )
            raise Unauthorized("only the resource owner or an admin may do this")
        return meta

    def grant_resource_access(self, ctx: SessionContext, resource_id: str, role: str) -> None:
        meta = self._require_resource_admin(ctx, AuditAction.GRANT, resource_id)

        def deny(code: str) -> None:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.GRANT, DENY, code, resource_id
            )

        if role not in self._state.policy.roles:
            deny("UnknownRole")
            raise UnknownRole(f"no such role: {role}")
        if role not in self._state.role_keys:
            deny("UnknownRole")
            raise UnknownRole(f"role {role} has no keypair")

        snapshot = self._snapshot()
        try:
            if role not in meta.wrapped_keys:
                data_key = self._unwrap_any(meta)
                meta.wrapped_keys[role] = envelope.wrap_key(
                    data_key, self._state.role_keys[role].public, role
                )
            self._state.policy.grant_permission(
                role, Permission(resource_id, Action.READ)
            )
            self._persist()
        except HrbacError as exc:
            self._restore(snapshot)
            deny(getattr(exc, "reason", type(exc).__name__))
            raise
        self._audit_entry(
            ctx.now, ctx.actor, AuditAction.GRANT, ALLOW, "Granted", resource_id
        )

    def revoke_resource_access(self, ctx: SessionContext, resource_id: str, role: str) -> None:
        meta = self._require_resource_admin(ctx, AuditAction.REVOKE, resource_id)
        if role not in meta.wrapped_keys:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.REVOKE, DENY, "NotGranted", resource_id
            )
            raise NotGranted(f"role {role} is not granted on {resource_id}")
        snapshot = self._snapshot()
        try:
            del meta.wrapped_keys[role]
            self._state.policy.revoke_permission(
                role, Permission(resource_id, Action.READ)
            )
            self._persist()
        except HrbacError as exc:
            self._restore(snapshot)
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.REVOKE, DENY,
                type(exc).__name__, resource_id,
            )
            raise
        self._audit_entry(
            ctx.now, ctx.actor, AuditAction.REVOKE, ALLOW, "Revoked", resource_id
        )

    def rotate_resource_key(self, ctx: SessionContext, resource_id: str) -> ResourceMeta:
        meta = self._require_resource_admin(ctx, AuditAction.ROTATE, resource_id)

        def deny(code: str) -> None:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.ROTATE, DENY, code, resource_id
            )

        try:
            old_key = self._unwrap_any(meta)
            plaintext = self._read_and_open(meta, old_key)
        except HrbacError as exc:
            deny(getattr(exc, "reason", type(exc).__name__))
            raise

        new_version = meta.version + 1
        new_key = envelope.generate_data_key()
        blob = envelope.seal(plaintext, new_key, _aad(resource_id, new_version))
        new_ref = BlobRef(meta.blob_ref.plane, _blob_name(resource_id, new_version))
        old_ref = meta.blob_ref

        snapshot = self._snapshot()
        try:
            self._plane_store(new_ref.plane).put_blob(new_ref.name, blob.to_bytes())
        except HrbacError as exc:
            self._restore(snapshot)
            deny(type(exc).__name__)
            raise
        try:
            meta.version = new_version
            meta.blob_ref = new_ref
            meta.wrapped_keys = {
                role: envelope.wrap_key(
                    new_key, self._state.role_keys[role].public, role
                )
                for role in meta.wrapped_keys
            }
            self._persist()
        except HrbacError as exc:
            self._restore(snapshot)
            if new_ref.plane == PLANE_PUBLIC:
                self._delete_blob(new_ref)
            deny(type(exc).__name__)
            raise
        try:
            self._audit_entry(
                ctx.now, ctx.actor, AuditAction.ROTATE, ALLOW, "Rotated", resource_id
            )
        except HrbacError:
            self._restore(snapshot)
            if new_ref.plane == PLANE_PUBLIC:
                self._delete_blob(new_ref)
            try:
                self._persist()
            except HrbacError:
                pass
            raise
        self._delete_blob(old_ref)
        if old_ref.plane == PLANE_PRIVATE:
            try:
                self._persist()
            except HrbacError:
                pass
        return self._state.resources[resource_id]

    def status(self, ctx: SessionContext, last_n: int = 10) -> StatusReport:
        user = self._authenticate(ctx)
        if user.kind not in _STATUS_KINDS:
            raise Unauthorized(f"{user.kind.value} may not view status")
        entries = list(self._audit_log)
        denies = sum(1 for e in entries if e.decision == DENY)
        overrides = sum(
            1 for e in entries if e.action == AuditAction.OVERRIDE.value and e.decision == ALLOW
        )
        return StatusReport(
            users=len(self._state.policy.users),
            roles=len(self._state.policy.roles),
            resources=len(self._state.resources),
            audit_entries=len(entries),
            deny_rate=denies / len(entries) if entries else 0.0,
            override_count=overrides,
            recent=entries[-last_n:],
        )
